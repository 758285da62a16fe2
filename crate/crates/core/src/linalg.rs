//! Small dense complex matrices and vector kernels shared by the solvers.

use std::sync::atomic::{AtomicBool, Ordering};

use num_complex::Complex64;
use rayon::prelude::*;

pub type C64 = Complex64;

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };

static STRICT: AtomicBool = AtomicBool::new(true);
const PAR_MIN: usize = 1 << 14;

/// Sequential reductions (the default) make every result independent of the
/// thread count. Turning strict mode off lets long reductions split across
/// the rayon pool.
pub fn set_strict_reductions(strict: bool) {
    STRICT.store(strict, Ordering::SeqCst);
}

pub fn strict_reductions() -> bool {
    STRICT.load(Ordering::SeqCst)
}

fn parallel(len: usize) -> bool {
    len >= PAR_MIN && !strict_reductions()
}

/// `sum conj(u_i) v_i`.
pub fn dot(u: &[C64], v: &[C64]) -> C64 {
    if parallel(u.len()) {
        u.par_iter().zip(v.par_iter()).map(|(a, b)| a.conj() * b).sum()
    } else {
        let mut s = ZERO;
        for (a, b) in u.iter().zip(v) {
            s += a.conj() * b;
        }
        s
    }
}

pub fn norm_sqr(u: &[C64]) -> f64 {
    if parallel(u.len()) {
        u.par_iter().map(|a| a.norm_sqr()).sum()
    } else {
        u.iter().map(|a| a.norm_sqr()).sum()
    }
}

pub fn norm(u: &[C64]) -> f64 {
    norm_sqr(u).sqrt()
}

/// `y += a x`.
pub fn axpy(a: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn scale(a: C64, x: &mut [C64]) {
    for xi in x.iter_mut() {
        *xi *= a;
    }
}

pub fn sub(u: &[C64], v: &[C64]) -> Vec<C64> {
    u.iter().zip(v).map(|(a, b)| a - b).collect()
}

/// Normalize in place and return the former norm.
pub fn normalize(u: &mut [C64]) -> f64 {
    let n = norm(u);
    if n > 0.0 {
        scale(C64::new(1.0 / n, 0.0), u);
    }
    n
}

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix { rows, cols, data: vec![ZERO; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = ONE;
        }
        m
    }

    pub fn diagonal(d: &[C64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = d[i];
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> C64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c);
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: C64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = CMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == ZERO {
                    continue;
                }
                let row = &other.data[k * other.cols..(k + 1) * other.cols];
                let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(row) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub fn add(&self, other: &CMatrix) -> CMatrix {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        CMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &CMatrix) -> CMatrix {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        CMatrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn scaled(&self, a: C64) -> CMatrix {
        CMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| a * x).collect() }
    }

    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        (0..self.rows)
            .map(|r| {
                let row = &self.data[r * self.cols..(r + 1) * self.cols];
                row.iter().zip(v).map(|(a, b)| a * b).sum()
            })
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &CMatrix) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn hermiticity_defect(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    pub fn is_diagonal(&self, tol: f64) -> bool {
        (0..self.rows).all(|r| (0..self.cols).all(|c| r == c || self.get(r, c).norm() <= tol))
    }
}
