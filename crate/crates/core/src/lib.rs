//! Optimal boundary control of a Cahn-Hilliard-Navier-Stokes system on a
//! rectangle: forward, linearized and adjoint solvers, reduced gradient,
//! projected gradient descent and numerical verification tools.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adjoint;
pub mod config;
pub mod control;
pub mod error;
pub mod exec;
pub mod fastsolve;
pub mod grid;
pub mod io;
pub mod linalg;
pub mod linearized;
pub mod objective;
pub mod ops;
pub mod optimizer;
pub mod plot;
pub mod potential;
pub mod presets;
pub mod run;
pub mod scheme;
pub mod state;
pub mod verify;

pub use error::{Error, Result};
