//! Low-spectrum eigensolvers for Hermitian operators.

mod dense;
mod lanczos;
mod tridiagonal;

pub use dense::{dense_eigenvalues, dense_lowest, dense_lowest_covering, dense_lowest_of_square, dense_spectrum, HermitianReduction, DENSE_LIMIT};
pub use lanczos::lanczos_smallest;
pub use tridiagonal::tridiagonal_eigen;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::linalg::C64;
use crate::operators::{LinearOperator, Squared};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Lanczos,
    Dense,
}

#[derive(Clone, Debug)]
pub struct EigenRequest {
    pub count: usize,
    /// Bound on `||A v - θ v|| / ||v||` for every returned pair.
    pub tolerance: f64,
    /// Budget of operator applications across all restarts.
    pub max_iterations: usize,
    pub seed: u64,
    /// Krylov basis cap per run; defaults to `min(dim, 800)`.
    pub max_basis: Option<usize>,
    pub want_vectors: bool,
}

impl EigenRequest {
    pub fn new(count: usize) -> Self {
        EigenRequest {
            count,
            tolerance: 1e-9,
            max_iterations: 200_000,
            seed: 0x5eed,
            max_basis: None,
            want_vectors: false,
        }
    }

    pub fn tolerance(mut self, tol: f64) -> Self {
        self.tolerance = tol;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_vectors(mut self) -> Self {
        self.want_vectors = true;
        self
    }

    pub fn max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn max_basis(mut self, n: usize) -> Self {
        self.max_basis = Some(n);
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.count == 0 {
            return Err(invalid("eigenvalue count must be at least 1"));
        }
        if !(self.tolerance > 0.0 && self.tolerance <= 1e-2) {
            return Err(invalid(format!("tolerance {} outside (0, 1e-2]", self.tolerance)));
        }
        if dim < self.count + 2 {
            return Err(invalid(format!("dimension {dim} too small for {} eigenvalues", self.count)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EigenResult {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// `||A v - θ v|| / ||v||`, or an a priori backward-error bound when no vector was formed.
    pub residuals: Vec<f64>,
    #[serde(skip)]
    pub vectors: Option<Vec<Vec<C64>>>,
    /// Krylov runs for Lanczos, 1 for dense.
    pub iterations: usize,
    pub matvecs: usize,
    pub backend: Backend,
    /// True when `eigenvalues` is the whole spectrum.
    pub complete: bool,
}

impl EigenResult {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }

    pub fn largest(&self) -> f64 {
        self.eigenvalues.last().cloned().unwrap_or(f64::NEG_INFINITY)
    }
}

/// Number of eigenvalues in the open window `(lo, hi)`.
///
/// Each eigenvalue is only known to within its residual; an eigenvalue that
/// close to an edge makes the count indeterminate and is reported as an error.
/// On a partial spectrum the window must end below the largest computed value.
pub fn count_in_window(result: &EigenResult, lo: f64, hi: f64) -> Result<usize> {
    if !(lo < hi) {
        return Err(invalid(format!("empty window ({lo}, {hi})")));
    }
    if !result.complete {
        let top = result.largest();
        let top_tol = result.residuals.last().cloned().unwrap_or(0.0).max(1e-12);
        if hi >= top - top_tol {
            return Err(Error::WindowBeyondSpectrum { lo, hi, computed: top });
        }
    }
    let mut count = 0;
    for (&v, &r) in result.eigenvalues.iter().zip(&result.residuals) {
        let tol = r.max(1e-12 * v.abs().max(1.0));
        for edge in [lo, hi] {
            if edge.is_finite() && (v - edge).abs() <= tol {
                return Err(Error::IndeterminateCount { value: v, edge, tolerance: tol });
            }
        }
        if v > lo && v < hi {
            count += 1;
        }
    }
    Ok(count)
}

/// Count directly on an operator: the lowest part of the spectrum is computed
/// until it passes `hi`.
pub fn count_in_window_op(op: &dyn LinearOperator, lo: f64, hi: f64, seed: u64) -> Result<usize> {
    let result = smallest_eigenvalues(op, &EigenRequest::new(1).seed(seed), Some(hi))?;
    count_in_window(&result, lo, hi)
}

/// Dimension up to which `smallest_eigenvalues` uses the dense solver.
pub const AUTO_DENSE_MAX: usize = 2048;

/// The `count` smallest eigenvalues, dense up to `AUTO_DENSE_MAX`, Lanczos above.
/// With `cover = Some(mu)` the count grows until an eigenvalue above `mu` is found.
pub fn smallest_eigenvalues(op: &dyn LinearOperator, req: &EigenRequest, cover: Option<f64>) -> Result<EigenResult> {
    if op.dim() <= AUTO_DENSE_MAX {
        return match cover {
            Some(mu) => dense_lowest_covering(op, req.count, mu, req.want_vectors),
            None => dense_lowest(op, req.count, req.want_vectors),
        };
    }
    let mut request = req.clone();
    loop {
        let r = lanczos_smallest(op, &request)?;
        match cover {
            Some(mu) if r.largest() <= mu + r.max_residual() && request.count < op.dim() - 2 => {
                request.count = (request.count * 2).min(op.dim() - 2);
            }
            _ => return Ok(r),
        }
    }
}

/// The smallest eigenvalues of `op²`. Below `AUTO_DENSE_MAX` they come from a
/// dense decomposition of `op` itself, which resolves the kernel far better
/// than working with the square.
pub fn smallest_of_square(op: &dyn LinearOperator, req: &EigenRequest, cover: Option<f64>) -> Result<EigenResult> {
    if op.dim() <= AUTO_DENSE_MAX {
        return dense_lowest_of_square(op, req.count, cover, req.want_vectors);
    }
    smallest_eigenvalues(&Squared::new(op), req, cover)
}
