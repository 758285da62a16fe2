//! Lanczos with full reorthogonalization and locking.
//!
//! Each Krylov run starts from a fresh random vector orthogonal to every
//! locked eigenvector, so repeated eigenvalues are found one copy per run.
//! Converged Ritz pairs at the bottom of a run are locked. The solve stops
//! once a run finds nothing below the `count`-th locked eigenvalue.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::tridiagonal::tridiagonal_eigen;
use super::{Backend, EigenRequest, EigenResult};
use crate::error::{Error, Result};
use crate::linalg::{self, C64, ZERO};
use crate::operators::{random_vector, LinearOperator};

const DEFAULT_BASIS: usize = 800;

struct RitzPair {
    value: f64,
    vector: Vec<C64>,
    residual: f64,
}

fn orthogonalize(w: &mut [C64], against: &[&[C64]]) {
    for _ in 0..2 {
        for u in against {
            let c = linalg::dot(u, w);
            linalg::axpy(-c, u, w);
        }
    }
}

struct RunOutcome {
    converged: Vec<RitzPair>,
    matvecs: usize,
    exhausted: bool,
}

/// One Krylov run in the complement of `locked`. Returns the converged Ritz
/// pairs at the bottom of the spectrum of the run, ascending.
fn krylov_run(
    op: &dyn LinearOperator,
    locked: &[Vec<C64>],
    want: usize,
    max_basis: usize,
    tol: f64,
    rng: &mut ChaCha8Rng,
) -> RunOutcome {
    let n = op.dim();
    let room = n - locked.len();
    let max_basis = max_basis.min(room).max(1);
    let locked_refs: Vec<&[C64]> = locked.iter().map(|v| v.as_slice()).collect();
    let fresh = |rng: &mut ChaCha8Rng, basis: &[Vec<C64>]| -> Option<Vec<C64>> {
        for _ in 0..4 {
            let mut v = random_vector(rng, n);
            let mut refs = locked_refs.clone();
            refs.extend(basis.iter().map(|b| b.as_slice()));
            orthogonalize(&mut v, &refs);
            if linalg::normalize(&mut v) > 1e-8 {
                return Some(v);
            }
        }
        None
    };
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(max_basis);
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut matvecs = 0;
    let mut scale: f64 = 0.0;
    let mut next_check = (want + 8).min(max_basis);
    let Some(v0) = fresh(rng, &basis) else {
        return RunOutcome { converged: Vec::new(), matvecs, exhausted: true };
    };
    basis.push(v0);
    let mut w = vec![ZERO; n];
    loop {
        let j = basis.len() - 1;
        op.apply(&basis[j], &mut w);
        matvecs += 1;
        let a = linalg::dot(&basis[j], &w).re;
        alpha.push(a);
        linalg::axpy(C64::new(-a, 0.0), &basis[j], &mut w);
        if j > 0 {
            linalg::axpy(C64::new(-beta[j - 1], 0.0), &basis[j - 1], &mut w);
        }
        let mut refs = locked_refs.clone();
        refs.extend(basis.iter().map(|b| b.as_slice()));
        orthogonalize(&mut w, &refs);
        let b = linalg::norm(&w);
        scale = scale.max(a.abs() + b + beta.last().cloned().unwrap_or(0.0));
        let m = basis.len();
        let breakdown = b <= 1e-12 * scale.max(f64::MIN_POSITIVE);
        let full = m >= max_basis;
        if m >= next_check || full || breakdown {
            let (theta, s) = tridiagonal_eigen(&alpha, &beta, true).expect("tridiagonal QL failed");
            let s = s.expect("vectors requested");
            let bottom = theta
                .iter()
                .enumerate()
                .take_while(|(i, _)| (b * s[i * m + m - 1]).abs() <= 0.5 * tol)
                .count();
            if bottom >= want.min(m) || full || (breakdown && m == room) {
                let converged = (0..bottom.min(m))
                    .map(|i| {
                        let mut y = vec![ZERO; n];
                        for (k, v) in basis.iter().enumerate() {
                            linalg::axpy(C64::new(s[i * m + k], 0.0), v, &mut y);
                        }
                        linalg::normalize(&mut y);
                        RitzPair { value: theta[i], vector: y, residual: f64::NAN }
                    })
                    .collect();
                let exhausted = full || (breakdown && m == room);
                return RunOutcome { converged, matvecs, exhausted };
            }
            next_check = (m + (m / 4).max(8)).min(max_basis);
        }
        if breakdown {
            beta.push(0.0);
            match fresh(rng, &basis) {
                Some(v) => basis.push(v),
                None => return RunOutcome { converged: Vec::new(), matvecs, exhausted: true },
            }
        } else {
            beta.push(b);
            linalg::scale(C64::new(1.0 / b, 0.0), &mut w);
            basis.push(w.clone());
        }
    }
}

/// The `count` smallest eigenvalues of a Hermitian operator.
pub fn lanczos_smallest(op: &dyn LinearOperator, req: &EigenRequest) -> Result<EigenResult> {
    let n = op.dim();
    req.validate(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(req.seed);
    let mut max_basis = req.max_basis.unwrap_or(DEFAULT_BASIS).clamp(req.count + 2, n);
    let mut locked: Vec<RitzPair> = Vec::new();
    let mut matvecs = 0;
    let mut runs = 0;
    let mut confirmed = false;
    while matvecs < req.max_iterations {
        if locked.len() == n {
            confirmed = true;
            break;
        }
        let vectors: Vec<Vec<C64>> = locked.iter().map(|p| p.vector.clone()).collect();
        let want = req.count.saturating_sub(locked.len()).max(1);
        let outcome = krylov_run(op, &vectors, want, max_basis, req.tolerance, &mut rng);
        runs += 1;
        matvecs += outcome.matvecs;
        let mut fresh = Vec::new();
        for mut pair in outcome.converged {
            let av = op.apply_vec(&pair.vector);
            matvecs += 1;
            let r: Vec<C64> = av.iter().zip(&pair.vector).map(|(a, x)| a - x * pair.value).collect();
            pair.residual = linalg::norm(&r);
            if pair.residual > req.tolerance {
                break;
            }
            fresh.push(pair);
        }
        if fresh.is_empty() {
            if outcome.exhausted && max_basis < n - locked.len() {
                max_basis = (max_basis * 2).min(n);
            }
            if locked.len() + 1 >= n {
                confirmed = locked.len() >= req.count;
                break;
            }
            continue;
        }
        if locked.len() >= req.count {
            let mut sorted: Vec<f64> = locked.iter().map(|p| p.value).collect();
            sorted.sort_by(f64::total_cmp);
            if fresh[0].value >= sorted[req.count - 1] - req.tolerance {
                confirmed = true;
                break;
            }
        }
        locked.extend(fresh);
    }
    locked.sort_by(|a, b| a.value.total_cmp(&b.value));
    let take = locked.len().min(req.count);
    let kept: Vec<RitzPair> = locked.into_iter().take(take).collect();
    let result = EigenResult {
        eigenvalues: kept.iter().map(|p| p.value).collect(),
        residuals: kept.iter().map(|p| p.residual).collect(),
        vectors: if req.want_vectors { Some(kept.into_iter().map(|p| p.vector).collect()) } else { None },
        iterations: runs,
        matvecs,
        backend: Backend::Lanczos,
        complete: take == n,
    };
    if !confirmed || result.eigenvalues.len() < req.count {
        return Err(Error::NotConverged { wanted: req.count, matvecs, partial: Box::new(result) });
    }
    Ok(result)
}
