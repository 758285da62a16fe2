//! Dense Hermitian eigensolver: Householder reduction to real tridiagonal
//! form, implicit QL for eigenvalues, inverse iteration plus back
//! transformation for selected eigenvectors.

use super::tridiagonal::{inverse_iteration, tridiagonal_eigen};
use super::{Backend, EigenResult};
use crate::error::{Error, Result};
use crate::linalg::{self, CMatrix, C64, ZERO};
use crate::operators::LinearOperator;

/// Largest dimension accepted by the dense oracle.
pub const DENSE_LIMIT: usize = 4096;

/// `A = Q T Q^*` with `T` real symmetric tridiagonal and `Q` a product of reflectors.
pub struct HermitianReduction {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
    /// Reflector `k` acts on indices `k+1..n` as `I - tau v v^*` with `v[0] = 1`.
    reflectors: Vec<(C64, Vec<C64>)>,
    norm: f64,
}

impl HermitianReduction {
    pub fn new(mut a: CMatrix) -> Result<Self> {
        let n = a.rows;
        if a.cols != n {
            return Err(Error::Dimension("dense eigensolver needs a square matrix".into()));
        }
        let norm = (0..n).map(|r| (0..n).map(|c| a.get(r, c).norm()).sum::<f64>()).fold(0.0, f64::max);
        let mut diag = vec![0.0; n];
        let mut off = vec![0.0; n.saturating_sub(1)];
        let mut reflectors = Vec::with_capacity(n.saturating_sub(1));
        let mut p = vec![ZERO; n];
        let mut w = vec![ZERO; n];
        for k in 0..n.saturating_sub(1) {
            let m = n - k - 1;
            // column k below the diagonal
            let x: Vec<C64> = (k + 1..n).map(|i| a.get(i, k)).collect();
            let alpha = x[0];
            let xnorm = x[1..].iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            diag[k] = a.get(k, k).re;
            if xnorm == 0.0 && alpha.im == 0.0 {
                off[k] = alpha.re;
                reflectors.push((ZERO, vec![ZERO; m]));
                continue;
            }
            let h = alpha.norm().hypot(xnorm);
            let beta = if alpha.re >= 0.0 { -h } else { h };
            let tau = (C64::new(beta, 0.0) - alpha) / beta;
            let scale = C64::new(1.0, 0.0) / (alpha - beta);
            let mut v = Vec::with_capacity(m);
            v.push(C64::new(1.0, 0.0));
            v.extend(x[1..].iter().map(|z| z * scale));
            off[k] = beta;
            // p = B v on the trailing block, reading only its lower triangle
            let base = k + 1;
            p[..m].iter_mut().for_each(|z| *z = ZERO);
            for i in 0..m {
                let row = &a.data[(base + i) * n + base..(base + i) * n + base + i + 1];
                let vi = v[i];
                let mut s = ZERO;
                for j in 0..i {
                    s += row[j] * v[j];
                    p[j] += row[j].conj() * vi;
                }
                p[i] += s + row[i] * vi;
            }
            let vp = linalg::dot(&v, &p[..m]);
            let half = 0.5 * tau.norm_sqr() * vp.re;
            for i in 0..m {
                w[i] = tau * p[i] - v[i] * half;
            }
            let vc: Vec<C64> = v.iter().map(|z| z.conj()).collect();
            let wc: Vec<C64> = w[..m].iter().map(|z| z.conj()).collect();
            for i in 0..m {
                let (wi, vi) = (w[i], v[i]);
                let row = &mut a.data[(base + i) * n + base..(base + i) * n + base + i + 1];
                for j in 0..=i {
                    row[j] -= wi * vc[j] + vi * wc[j];
                }
            }
            reflectors.push((tau, v));
        }
        if n > 0 {
            diag[n - 1] = a.get(n - 1, n - 1).re;
        }
        Ok(HermitianReduction { diag, off, reflectors, norm })
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        Ok(tridiagonal_eigen(&self.diag, &self.off, false)?.0)
    }

    /// `Q z` for a vector in tridiagonal coordinates.
    pub fn back_transform(&self, z: &[f64]) -> Vec<C64> {
        let mut y: Vec<C64> = z.iter().map(|&x| C64::new(x, 0.0)).collect();
        for (k, (tau, v)) in self.reflectors.iter().enumerate().rev() {
            if *tau == ZERO {
                continue;
            }
            let tail = &mut y[k + 1..];
            let c = *tau * linalg::dot(v, tail);
            for (t, vi) in tail.iter_mut().zip(v) {
                *t -= c * vi;
            }
        }
        y
    }

    /// Eigenvectors for the given eigenvalues (ascending, from `eigenvalues`).
    pub fn eigenvectors(&self, values: &[f64]) -> Vec<Vec<C64>> {
        inverse_iteration(&self.diag, &self.off, values).iter().map(|z| self.back_transform(z)).collect()
    }

    /// A priori error bound on each computed eigenvalue.
    pub fn backward_error(&self) -> f64 {
        let n = self.dim().max(1) as f64;
        8.0 * f64::EPSILON * n.sqrt() * self.norm
    }
}

fn materialize(op: &dyn LinearOperator) -> Result<CMatrix> {
    let n = op.dim();
    if n > DENSE_LIMIT {
        return Err(Error::TooLarge { dim: n, limit: DENSE_LIMIT });
    }
    let mut m = CMatrix::zeros(n, n);
    let mut unit = vec![ZERO; n];
    let mut col = vec![ZERO; n];
    for c in 0..n {
        unit[c] = C64::new(1.0, 0.0);
        op.apply(&unit, &mut col);
        unit[c] = ZERO;
        for r in 0..n {
            m.data[r * n + c] = col[r];
        }
    }
    // symmetrize away rounding asymmetry of the operator application
    for r in 0..n {
        for c in r..n {
            let avg = 0.5 * (m.data[r * n + c] + m.data[c * n + r].conj());
            m.data[r * n + c] = avg;
            m.data[c * n + r] = avg.conj();
        }
    }
    Ok(m)
}

fn residual(op: &dyn LinearOperator, lambda: f64, v: &[C64]) -> f64 {
    let av = op.apply_vec(v);
    let r: Vec<C64> = av.iter().zip(v).map(|(a, x)| a - x * lambda).collect();
    linalg::norm(&r) / linalg::norm(v)
}

/// Full spectrum with eigenvectors and measured residuals.
pub fn dense_spectrum(op: &dyn LinearOperator) -> Result<EigenResult> {
    dense_lowest(op, op.dim(), true)
}

/// All eigenvalues without vectors; residuals hold the backward-error bound.
pub fn dense_eigenvalues(op: &dyn LinearOperator) -> Result<EigenResult> {
    let red = HermitianReduction::new(materialize(op)?)?;
    let values = red.eigenvalues()?;
    let bound = red.backward_error();
    Ok(EigenResult {
        residuals: vec![bound; values.len()],
        eigenvalues: values,
        vectors: None,
        iterations: 1,
        matvecs: op.dim(),
        backend: Backend::Dense,
        complete: true,
    })
}

/// The `count` smallest eigenpairs with measured residuals.
pub fn dense_lowest(op: &dyn LinearOperator, count: usize, want_vectors: bool) -> Result<EigenResult> {
    let red = HermitianReduction::new(materialize(op)?)?;
    let all = red.eigenvalues()?;
    Ok(lowest_from(&red, op, &all, count, want_vectors))
}

/// Smallest eigenpairs: at least `min_count`, and enough to include the first
/// eigenvalue above `mu`. Vectors are formed only for the returned part.
pub fn dense_lowest_covering(op: &dyn LinearOperator, min_count: usize, mu: f64, want_vectors: bool) -> Result<EigenResult> {
    let red = HermitianReduction::new(materialize(op)?)?;
    let all = red.eigenvalues()?;
    let count = all.iter().position(|&v| v > mu).map(|p| p + 1).unwrap_or(all.len()).max(min_count);
    if !want_vectors {
        let count = count.min(all.len());
        let bound = red.backward_error();
        return Ok(EigenResult {
            eigenvalues: all[..count].to_vec(),
            residuals: vec![bound; count],
            vectors: None,
            iterations: 1,
            matvecs: op.dim(),
            backend: Backend::Dense,
            complete: count == all.len(),
        });
    }
    Ok(lowest_from(&red, op, &all, count, true))
}

/// Smallest eigenvalues of `op²` from one reduction of `op`: at least
/// `min_count`, and with `cover = Some(mu)` past the first value above `mu`.
/// Residuals are `||op² v - θ v||` for the returned vectors, or the squared
/// backward-error bound when vectors are not requested.
pub fn dense_lowest_of_square(
    op: &dyn LinearOperator,
    min_count: usize,
    cover: Option<f64>,
    want_vectors: bool,
) -> Result<EigenResult> {
    let red = HermitianReduction::new(materialize(op)?)?;
    let signed = red.eigenvalues()?;
    let n = signed.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| signed[a].abs().total_cmp(&signed[b].abs()));
    let squares: Vec<f64> = order.iter().map(|&i| signed[i] * signed[i]).collect();
    let mut count = min_count.min(n);
    if let Some(mu) = cover {
        count = count.max(squares.iter().position(|&v| v > mu).map(|p| p + 1).unwrap_or(n));
    }
    let bound = red.backward_error();
    let max_abs = signed.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (residuals, vectors) = if want_vectors {
        let mut chosen: Vec<f64> = order[..count].iter().map(|&i| signed[i]).collect();
        chosen.sort_by(f64::total_cmp);
        let vecs = red.eigenvectors(&chosen);
        let mut pairs: Vec<(f64, Vec<C64>)> = chosen.into_iter().zip(vecs).collect();
        pairs.sort_by(|a, b| a.0.abs().total_cmp(&b.0.abs()));
        let res = pairs
            .iter()
            .map(|(l, v)| {
                let av = op.apply_vec(v);
                let aav = op.apply_vec(&av);
                let r: Vec<C64> = aav.iter().zip(v.iter()).map(|(a, x)| a - x * (l * l)).collect();
                linalg::norm(&r) / linalg::norm(v)
            })
            .collect();
        (res, Some(pairs.into_iter().map(|p| p.1).collect()))
    } else {
        (vec![2.0 * max_abs * bound + bound * bound; count], None)
    };
    Ok(EigenResult {
        eigenvalues: squares[..count].to_vec(),
        residuals,
        vectors,
        iterations: 1,
        matvecs: n,
        backend: Backend::Dense,
        complete: count == n,
    })
}

fn lowest_from(red: &HermitianReduction, op: &dyn LinearOperator, all: &[f64], count: usize, want_vectors: bool) -> EigenResult {
    let n = all.len();
    let count = count.min(n);
    let values = all[..count].to_vec();
    let vectors = red.eigenvectors(&values);
    let residuals = vectors.iter().zip(&values).map(|(v, &l)| residual(op, l, v)).collect();
    EigenResult {
        eigenvalues: values,
        residuals,
        vectors: if want_vectors { Some(vectors) } else { None },
        iterations: 1,
        matvecs: n + count,
        backend: Backend::Dense,
        complete: count == n,
    }
}
