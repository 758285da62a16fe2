//! Real symmetric tridiagonal eigenproblems: implicit QL and inverse iteration.

use crate::error::{Error, Result};

/// Eigenvalues (ascending) of the tridiagonal matrix with diagonal `d` and
/// off-diagonal `e` (`e[i] = T[i][i+1]`), and with `want_vectors` the
/// eigenvectors as rows of a row-major `n x n` matrix.
pub fn tridiagonal_eigen(d: &[f64], e: &[f64], want_vectors: bool) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let n = d.len();
    let mut d = d.to_vec();
    let mut e: Vec<f64> = e.iter().cloned().chain(std::iter::repeat(0.0)).take(n).collect();
    if n > 0 {
        e[n - 1] = 0.0;
    }
    // z holds eigenvectors as columns while iterating
    let mut z = if want_vectors {
        let mut z = vec![0.0; n * n];
        for i in 0..n {
            z[i * n + i] = 1.0;
        }
        Some(z)
    } else {
        None
    };
    for l in 0..n {
        let mut iter = 0;
        loop {
            let mut m = l;
            while m + 1 < n {
                let dd = d[m].abs() + d[m + 1].abs();
                if e[m].abs() <= f64::EPSILON * dd {
                    break;
                }
                m += 1;
            }
            if m == l {
                break;
            }
            iter += 1;
            if iter > 60 {
                return Err(Error::DenseNoConvergence(l));
            }
            let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
            let mut r = g.hypot(1.0);
            g = d[m] - d[l] + e[l] / (g + r.copysign(g));
            let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
            let mut i = m as isize - 1;
            let mut underflow = false;
            while i >= l as isize {
                let iu = i as usize;
                let f = s * e[iu];
                let b = c * e[iu];
                r = f.hypot(g);
                e[iu + 1] = r;
                if r == 0.0 {
                    d[iu + 1] -= p;
                    e[m] = 0.0;
                    underflow = true;
                    break;
                }
                s = f / r;
                c = g / r;
                g = d[iu + 1] - p;
                r = (d[iu] - g) * s + 2.0 * c * b;
                p = s * r;
                d[iu + 1] = g + p;
                g = c * r - b;
                if let Some(z) = z.as_mut() {
                    for k in 0..n {
                        let f = z[k * n + iu + 1];
                        z[k * n + iu + 1] = s * z[k * n + iu] + c * f;
                        z[k * n + iu] = c * z[k * n + iu] - s * f;
                    }
                }
                i -= 1;
            }
            if underflow {
                continue;
            }
            d[l] -= p;
            e[l] = g;
            e[m] = 0.0;
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = z.map(|z| {
        let mut rows = vec![0.0; n * n];
        for (new, &old) in order.iter().enumerate() {
            for k in 0..n {
                rows[new * n + k] = z[k * n + old];
            }
        }
        rows
    });
    Ok((values, vectors))
}

/// LU factorization with partial pivoting of `T - sigma I`.
struct ShiftedLu {
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    mult: Vec<f64>,
    swapped: Vec<bool>,
}

impl ShiftedLu {
    fn new(d: &[f64], e: &[f64], sigma: f64, tiny: f64) -> Self {
        let n = d.len();
        let mut lu = ShiftedLu {
            u0: vec![0.0; n],
            u1: vec![0.0; n],
            u2: vec![0.0; n],
            mult: vec![0.0; n],
            swapped: vec![false; n],
        };
        let off = |i: usize| if i + 1 < n { e[i] } else { 0.0 };
        let mut cur = (d[0] - sigma, off(0), 0.0);
        for i in 0..n {
            if i + 1 == n {
                lu.u0[i] = if cur.0.abs() < tiny { tiny.copysign(cur.0) } else { cur.0 };
                break;
            }
            let next = (e[i], d[i + 1] - sigma, off(i + 1));
            let (piv, other, swap) = if next.0.abs() > cur.0.abs() { (next, cur, true) } else { (cur, next, false) };
            let p0 = if piv.0.abs() < tiny { tiny.copysign(piv.0) } else { piv.0 };
            let m = other.0 / p0;
            lu.u0[i] = p0;
            lu.u1[i] = piv.1;
            lu.u2[i] = piv.2;
            lu.mult[i] = m;
            lu.swapped[i] = swap;
            cur = (other.1 - m * piv.1, other.2 - m * piv.2, 0.0);
        }
        lu
    }

    fn solve(&self, b: &mut [f64]) {
        let n = b.len();
        for i in 0..n.saturating_sub(1) {
            if self.swapped[i] {
                b.swap(i, i + 1);
            }
            b[i + 1] -= self.mult[i] * b[i];
        }
        for i in (0..n).rev() {
            let mut s = b[i];
            if i + 1 < n {
                s -= self.u1[i] * b[i + 1];
            }
            if i + 2 < n {
                s -= self.u2[i] * b[i + 2];
            }
            b[i] = s / self.u0[i];
        }
    }
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Eigenvectors of the tridiagonal matrix for the given (ascending, accurate)
/// eigenvalues by inverse iteration, reorthogonalized inside clusters.
pub fn inverse_iteration(d: &[f64], e: &[f64], values: &[f64]) -> Vec<Vec<f64>> {
    let n = d.len();
    let norm = (0..n)
        .map(|i| d[i].abs() + if i > 0 { e[i - 1].abs() } else { 0.0 } + if i + 1 < n { e[i].abs() } else { 0.0 })
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let tiny = f64::EPSILON * norm;
    let cluster_gap = 1e-3 * norm;
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(values.len());
    let mut cluster_start = 0;
    let mut seed: u64 = 0x9e3779b97f4a7c15;
    for (j, &lambda) in values.iter().enumerate() {
        if j > 0 && lambda - values[j - 1] > cluster_gap {
            cluster_start = j;
        }
        // nudge repeated shifts so each factorization differs
        let sigma = if j > cluster_start { lambda + (j - cluster_start) as f64 * 10.0 * tiny } else { lambda };
        let lu = ShiftedLu::new(d, e, sigma, tiny);
        let mut v: Vec<f64> = (0..n)
            .map(|_| {
                seed ^= seed << 13;
                seed ^= seed >> 7;
                seed ^= seed << 17;
                (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
            })
            .collect();
        normalize(&mut v);
        for _ in 0..4 {
            for prev in &out[cluster_start..j] {
                let c: f64 = prev.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(prev).for_each(|(x, p)| *x -= c * p);
            }
            lu.solve(&mut v);
            normalize(&mut v);
        }
        for _ in 0..2 {
            for prev in &out[cluster_start..j] {
                let c: f64 = prev.iter().zip(&v).map(|(a, b)| a * b).sum();
                v.iter_mut().zip(prev).for_each(|(x, p)| *x -= c * p);
            }
            normalize(&mut v);
        }
        out.push(v);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn residual(d: &[f64], e: &[f64], lambda: f64, v: &[f64]) -> f64 {
        let n = d.len();
        (0..n)
            .map(|i| {
                let mut s = d[i] * v[i] - lambda * v[i];
                if i > 0 {
                    s += e[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    s += e[i] * v[i + 1];
                }
                s * s
            })
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn second_difference_spectrum() {
        let n = 20;
        let d = vec![2.0; n];
        let e = vec![-1.0; n - 1];
        let (vals, vecs) = tridiagonal_eigen(&d, &e, true).unwrap();
        let vecs = vecs.unwrap();
        for (k, v) in vals.iter().enumerate() {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64).cos();
            assert!((v - exact).abs() < 1e-13);
            assert!(residual(&d, &e, *v, &vecs[k * n..(k + 1) * n]) < 1e-13);
        }
        let inv = inverse_iteration(&d, &e, &vals);
        for (k, v) in inv.iter().enumerate() {
            assert!(residual(&d, &e, vals[k], v) < 1e-13);
        }
    }

    #[test]
    fn degenerate_blocks() {
        // two decoupled copies of the same 3x3 block
        let d = vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0];
        let e = vec![0.5, 0.5, 0.0, 0.5, 0.5];
        let (vals, _) = tridiagonal_eigen(&d, &e, false).unwrap();
        let vecs = inverse_iteration(&d, &e, &vals);
        for i in 0..6 {
            assert!(residual(&d, &e, vals[i], &vecs[i]) < 1e-13);
            for j in 0..i {
                let c: f64 = vecs[i].iter().zip(&vecs[j]).map(|(a, b)| a * b).sum();
                assert!(c.abs() < 1e-12, "{i} {j} {c}");
            }
        }
    }
}
