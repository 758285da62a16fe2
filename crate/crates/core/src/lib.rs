//! Numerical laboratory for spin^c Dirac operators `D_k` and magnetic
//! Schrodinger operators `Δ_k - kτ` on high tensor powers of a prequantum
//! line bundle, on flat torus lattices and (analytically) on the round sphere.

pub mod analysis;
pub mod clifford;
pub mod config;
pub mod covering;
pub mod eigensolve;
pub mod error;
pub mod gauge;
pub mod geometry;
pub mod linalg;
pub mod operators;
pub mod report;
pub mod runner;
pub mod sparse;

pub use error::{Error, Result};
