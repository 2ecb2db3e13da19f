//! Text snapshots, control files, CSV tables and run manifests. All writes
//! go through a temporary file followed by a rename.

use crate::control::BoundaryControl;
use crate::error::{Error, Result};
use crate::grid::{BoundaryTrace, Grid, ScalarField, VelocityField};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// Write `contents` to `path` atomically.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn header(kind: &str, g: &Grid, t: f64) -> String {
    format!(
        "{kind} {} {} {} {} {}\n",
        g.nx,
        g.ny,
        num(g.lx),
        num(g.ly),
        num(t)
    )
}

fn format_err(path: &Path, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

struct Parsed {
    grid: Grid,
    t: f64,
    values: Vec<f64>,
}

fn parse_snapshot(path: &Path, kind: &str) -> Result<Parsed> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let head: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
    if head.len() != 6 || head[0] != kind {
        return Err(format_err(
            path,
            format!("expected header `{kind} nx ny lx ly t`"),
        ));
    }
    let bad = |what: &str| format_err(path, format!("bad header field {what}"));
    let nx: usize = head[1].parse().map_err(|_| bad("nx"))?;
    let ny: usize = head[2].parse().map_err(|_| bad("ny"))?;
    let lx: f64 = head[3].parse().map_err(|_| bad("lx"))?;
    let ly: f64 = head[4].parse().map_err(|_| bad("ly"))?;
    let t: f64 = head[5].parse().map_err(|_| bad("t"))?;
    let grid = Grid::new(nx, ny, lx, ly).map_err(|e| format_err(path, e.to_string()))?;
    let mut values = Vec::new();
    for (i, tok) in lines.flat_map(str::split_whitespace).enumerate() {
        values.push(
            tok.parse()
                .map_err(|_| format_err(path, format!("value {i} is not a number: {tok}")))?,
        );
    }
    Ok(Parsed { grid, t, values })
}

fn check_count(path: &Path, got: usize, want: usize) -> Result<()> {
    if got != want {
        return Err(format_err(
            path,
            format!("expected {want} values, found {got}"),
        ));
    }
    Ok(())
}

pub fn write_scalar(path: &Path, f: &ScalarField, t: f64) -> Result<()> {
    let mut s = header("scalar", &f.grid, t);
    for v in &f.values {
        let _ = writeln!(s, "{}", num(*v));
    }
    write_atomic(path, s.as_bytes())
}

pub fn read_scalar(path: &Path) -> Result<(ScalarField, f64)> {
    let p = parse_snapshot(path, "scalar")?;
    check_count(path, p.values.len(), p.grid.n_cells())?;
    Ok((ScalarField::from_values(p.grid, p.values)?, p.t))
}

pub fn write_velocity(path: &Path, u: &VelocityField, t: f64) -> Result<()> {
    let mut s = header("velocity", &u.grid, t);
    for v in u.ux.iter().chain(&u.uy) {
        let _ = writeln!(s, "{}", num(*v));
    }
    write_atomic(path, s.as_bytes())
}

pub fn read_velocity(path: &Path) -> Result<(VelocityField, f64)> {
    let p = parse_snapshot(path, "velocity")?;
    let g = p.grid;
    check_count(path, p.values.len(), g.n_ux() + g.n_uy())?;
    let mut u = VelocityField::zeros(g);
    u.ux.copy_from_slice(&p.values[..g.n_ux()]);
    u.uy.copy_from_slice(&p.values[g.n_ux()..]);
    Ok((u, p.t))
}

/// Control file: header `control nx ny lx ly dt steps`, then one line per
/// time node holding the tangential then the normal face values.
pub fn write_control(path: &Path, h: &BoundaryControl) -> Result<()> {
    let g = h.grid;
    let mut s = format!(
        "control {} {} {} {} {} {}\n",
        g.nx,
        g.ny,
        num(g.lx),
        num(g.ly),
        num(h.dt()),
        h.steps()
    );
    for (t, n) in h.tangential.iter().zip(&h.normal) {
        let row: Vec<String> = t.values.iter().chain(&n.values).map(|v| num(*v)).collect();
        let _ = writeln!(s, "{}", row.join(" "));
    }
    write_atomic(path, s.as_bytes())
}

pub fn read_control(path: &Path) -> Result<BoundaryControl> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let head: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
    if head.len() != 7 || head[0] != "control" {
        return Err(format_err(
            path,
            "expected header `control nx ny lx ly dt steps`",
        ));
    }
    let bad = |what: &str| format_err(path, format!("bad header field {what}"));
    let nx: usize = head[1].parse().map_err(|_| bad("nx"))?;
    let ny: usize = head[2].parse().map_err(|_| bad("ny"))?;
    let lx: f64 = head[3].parse().map_err(|_| bad("lx"))?;
    let ly: f64 = head[4].parse().map_err(|_| bad("ly"))?;
    let dt: f64 = head[5].parse().map_err(|_| bad("dt"))?;
    let steps: usize = head[6].parse().map_err(|_| bad("steps"))?;
    let g = Grid::new(nx, ny, lx, ly).map_err(|e| format_err(path, e.to_string()))?;
    let nb = g.n_boundary();
    let mut h = BoundaryControl::zeros(g, dt, steps);
    let rows: Vec<&str> = lines.filter(|l| !l.trim().is_empty()).collect();
    check_count(path, rows.len(), steps + 1).map_err(|_| {
        format_err(
            path,
            format!("expected {} node rows, found {}", steps + 1, rows.len()),
        )
    })?;
    for (k, row) in rows.iter().enumerate() {
        let vals: Vec<f64> = row
            .split_whitespace()
            .map(|t| {
                t.parse()
                    .map_err(|_| format_err(path, format!("row {k}: not a number: {t}")))
            })
            .collect::<Result<_>>()?;
        check_count(path, vals.len(), 2 * nb).map_err(|_| {
            format_err(
                path,
                format!("row {k}: expected {} values, found {}", 2 * nb, vals.len()),
            )
        })?;
        h.tangential[k] = BoundaryTrace {
            grid: g,
            values: vals[..nb].to_vec(),
        };
        h.normal[k] = BoundaryTrace {
            grid: g,
            values: vals[nb..].to_vec(),
        };
    }
    Ok(h)
}

/// Simple CSV table with a fixed header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| num(*v)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingInput(path.display().to_string()));
        }
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines();
        let columns: Vec<String> = lines
            .next()
            .unwrap_or("")
            .split(',')
            .map(str::to_string)
            .collect();
        let mut rows = vec![];
        for (i, l) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
            let r: Vec<f64> = l
                .split(',')
                .map(|c| {
                    c.trim()
                        .parse()
                        .map_err(|_| format_err(path, format!("row {i}: not a number: {c}")))
                })
                .collect::<Result<_>>()?;
            if r.len() != columns.len() {
                return Err(format_err(
                    path,
                    format!("row {i}: expected {} columns", columns.len()),
                ));
            }
            rows.push(r);
        }
        Ok(Self { columns, rows })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_digest: String,
    pub code_version: String,
    pub nx: usize,
    pub ny: usize,
    pub dt: f64,
    pub steps: usize,
    pub seed: u64,
    pub parallel: bool,
    pub wall_time_s: f64,
    pub metrics: BTreeMap<String, f64>,
    pub outcome: String,
}

impl RunManifest {
    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        write_atomic(path, text.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Grid {
        Grid::new(5, 4, 1.3, 0.7).unwrap()
    }

    #[test]
    fn scalar_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let g = grid();
        let f = ScalarField::from_values(
            g,
            (0..g.n_cells())
                .map(|_| rng.gen::<f64>() * 1e3 - 5e2)
                .collect(),
        )
        .unwrap();
        let p = dir.path().join("phi.txt");
        write_scalar(&p, &f, 0.1 + 0.2).unwrap();
        let (back, t) = read_scalar(&p).unwrap();
        assert_eq!(back, f);
        assert_eq!(t, 0.1 + 0.2);
    }

    #[test]
    fn velocity_and_control_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = grid();
        let mut u = VelocityField::zeros(g);
        u.ux.iter_mut()
            .chain(u.uy.iter_mut())
            .for_each(|v| *v = rng.gen_range(-1.0..1.0) / 3.0);
        let p = dir.path().join("u.txt");
        write_velocity(&p, &u, 2.5).unwrap();
        assert_eq!(read_velocity(&p).unwrap().0, u);

        let mut h = BoundaryControl::zeros(g, 0.1, 3);
        for tr in h.tangential.iter_mut().chain(h.normal.iter_mut()) {
            tr.values
                .iter_mut()
                .for_each(|v| *v = rng.gen_range(-1.0..1.0) / 7.0);
        }
        let p = dir.path().join("h.txt");
        write_control(&p, &h).unwrap();
        assert_eq!(read_control(&p).unwrap(), h);
    }

    #[test]
    fn truncated_snapshot_names_expected_count() {
        let dir = tempfile::tempdir().unwrap();
        let g = grid();
        let p = dir.path().join("phi.txt");
        write_scalar(&p, &ScalarField::constant(g, 1.0), 0.0).unwrap();
        let text = fs::read_to_string(&p).unwrap();
        let cut: Vec<&str> = text.lines().take(10).collect();
        fs::write(&p, cut.join("\n")).unwrap();
        match read_scalar(&p) {
            Err(Error::Format { msg, .. }) => assert!(msg.contains("expected 20 values"), "{msg}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_kind_is_a_format_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("u.txt");
        write_velocity(&p, &VelocityField::zeros(grid()), 0.0).unwrap();
        assert!(matches!(read_scalar(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn table_round_trip_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new(&["a", "b"]);
        t.push(vec![1.0, 1.0 / 3.0]);
        t.push(vec![-2.5e-300, 7.0]);
        let p = dir.path().join("t.csv");
        t.write(&p).unwrap();
        assert_eq!(Table::read(&p).unwrap(), t);
        assert_eq!(t.column("b").unwrap(), vec![1.0 / 3.0, 7.0]);
        assert!(matches!(
            Table::read(&dir.path().join("none.csv")),
            Err(Error::MissingInput(_))
        ));
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
