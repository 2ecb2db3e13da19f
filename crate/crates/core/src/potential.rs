//! Quartic double-well potential `F(s) = (s^2 - 1)^2`.

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PotentialKind {
    Quartic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Potential {
    pub kind: PotentialKind,
    /// Stabilization constant `S` of the semi-implicit Cahn-Hilliard step.
    pub stabilization: f64,
    /// Test-only switch: when false, `F` and all its derivatives are zero.
    pub enabled: bool,
}

impl Default for Potential {
    fn default() -> Self {
        Self {
            kind: PotentialKind::Quartic,
            stabilization: 2.0,
            enabled: true,
        }
    }
}

impl Potential {
    pub fn quartic(stabilization: f64) -> Self {
        Self {
            stabilization,
            ..Self::default()
        }
    }

    /// Lower bound `-C` on `F''`; the quartic satisfies `F'' >= -4`.
    pub const SECOND_DERIVATIVE_LOWER_BOUND: f64 = -4.0;

    pub fn f_val(&self, s: f64) -> f64 {
        if !self.enabled {
            return 0.0;
        }
        let q = s * s - 1.0;
        q * q
    }

    pub fn f_d1(&self, s: f64) -> f64 {
        if !self.enabled {
            return 0.0;
        }
        4.0 * s * s * s - 4.0 * s
    }

    pub fn f_d2(&self, s: f64) -> f64 {
        if !self.enabled {
            return 0.0;
        }
        12.0 * s * s - 4.0
    }

    pub fn f_d3(&self, s: f64) -> f64 {
        if !self.enabled {
            return 0.0;
        }
        24.0 * s
    }
}
