//! Compressed sparse row matrices over `C64`.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::{CMatrix, C64, ONE, ZERO};

const PAR_ROWS: usize = 1 << 14;

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    pub rows: usize,
    pub cols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<C64>,
}

impl CsrMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CsrMatrix { rows, cols, indptr: vec![0; rows + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![ONE; n])
    }

    pub fn diagonal(d: &[C64]) -> Self {
        let n = d.len();
        CsrMatrix { rows: n, cols: n, indptr: (0..=n).collect(), indices: (0..n).collect(), values: d.to_vec() }
    }

    pub fn real_diagonal(d: &[f64]) -> Self {
        Self::diagonal(&d.iter().map(|&x| C64::new(x, 0.0)).collect::<Vec<_>>())
    }

    /// Sum duplicate entries; exact zeros are dropped.
    pub fn from_triplets(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, C64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut indptr = vec![0; rows + 1];
        let mut indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<C64> = Vec::with_capacity(triplets.len());
        let mut i = 0;
        while i < triplets.len() {
            let (r, c, mut v) = triplets[i];
            i += 1;
            while i < triplets.len() && triplets[i].0 == r && triplets[i].1 == c {
                v += triplets[i].2;
                i += 1;
            }
            if v != ZERO {
                indices.push(c);
                values.push(v);
                indptr[r + 1] += 1;
            }
        }
        for r in 0..rows {
            indptr[r + 1] += indptr[r];
        }
        CsrMatrix { rows, cols, indptr, indices, values }
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().cloned().zip(self.values[span].iter().cloned())
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        self.row(r).find(|&(j, _)| j == c).map(|(_, v)| v).unwrap_or(ZERO)
    }

    fn row_product(&self, r: usize, x: &[C64]) -> C64 {
        let mut s = ZERO;
        for k in self.indptr[r]..self.indptr[r + 1] {
            s += self.values[k] * x[self.indices[k]];
        }
        s
    }

    /// `y = A x`. Rows are independent, so the parallel path is bit-identical.
    pub fn matvec_into(&self, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.cols);
        debug_assert_eq!(y.len(), self.rows);
        if self.rows >= PAR_ROWS {
            y.par_iter_mut().enumerate().for_each(|(r, yr)| *yr = self.row_product(r, x));
        } else {
            for (r, yr) in y.iter_mut().enumerate() {
                *yr = self.row_product(r, x);
            }
        }
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.rows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn adjoint(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.cols + 1];
        for &c in &self.indices {
            counts[c + 1] += 1;
        }
        for c in 0..self.cols {
            counts[c + 1] += counts[c];
        }
        let mut next = counts.clone();
        let mut indices = vec![0; self.nnz()];
        let mut values = vec![ZERO; self.nnz()];
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                let p = next[c];
                indices[p] = r;
                values[p] = v.conj();
                next[c] += 1;
            }
        }
        CsrMatrix { rows: self.cols, cols: self.rows, indptr: counts, indices, values }
    }

    pub fn scaled(&self, a: C64) -> CsrMatrix {
        let mut out = self.clone();
        for v in out.values.iter_mut() {
            *v *= a;
        }
        out
    }

    /// `alpha A + beta B`.
    pub fn combine(&self, alpha: C64, other: &CsrMatrix, beta: C64) -> CsrMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut triplets = Vec::with_capacity(self.nnz() + other.nnz());
        for r in 0..self.rows {
            triplets.extend(self.row(r).map(|(c, v)| (r, c, alpha * v)));
            triplets.extend(other.row(r).map(|(c, v)| (r, c, beta * v)));
        }
        CsrMatrix::from_triplets(self.rows, self.cols, triplets)
    }

    pub fn plus(&self, other: &CsrMatrix) -> CsrMatrix {
        self.combine(ONE, other, ONE)
    }

    pub fn minus(&self, other: &CsrMatrix) -> CsrMatrix {
        self.combine(ONE, other, -ONE)
    }

    /// Sparse product with a dense row accumulator.
    pub fn mul(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.cols, other.rows);
        let mut acc = vec![ZERO; other.cols];
        let mut mark = vec![usize::MAX; other.cols];
        let mut indptr = vec![0; self.rows + 1];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut touched: Vec<usize> = Vec::new();
        for r in 0..self.rows {
            touched.clear();
            for (k, a) in self.row(r) {
                for (c, b) in other.row(k) {
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = ZERO;
                        touched.push(c);
                    }
                    acc[c] += a * b;
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                if acc[c] != ZERO {
                    indices.push(c);
                    values.push(acc[c]);
                }
            }
            indptr[r + 1] = indices.len();
        }
        CsrMatrix { rows: self.rows, cols: other.cols, indptr, indices, values }
    }

    /// `A (x) B` with `B` a small dense block; the block index runs fastest.
    pub fn kron(&self, block: &CMatrix) -> CsrMatrix {
        let (br, bc) = (block.rows, block.cols);
        let mut triplets = Vec::new();
        for r in 0..self.rows {
            for (c, a) in self.row(r) {
                for i in 0..br {
                    for j in 0..bc {
                        let b = block.get(i, j);
                        if b != ZERO {
                            triplets.push((r * br + i, c * bc + j, a * b));
                        }
                    }
                }
            }
        }
        CsrMatrix::from_triplets(self.rows * br, self.cols * bc, triplets)
    }

    /// Submatrix on the given row and column index lists.
    pub fn extract(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut col_map = vec![usize::MAX; self.cols];
        for (new, &old) in cols.iter().enumerate() {
            col_map[old] = new;
        }
        let mut triplets = Vec::new();
        for (new_r, &old_r) in rows.iter().enumerate() {
            for (c, v) in self.row(old_r) {
                if col_map[c] != usize::MAX {
                    triplets.push((new_r, col_map[c], v));
                }
            }
        }
        CsrMatrix::from_triplets(rows.len(), cols.len(), triplets)
    }

    pub fn to_dense(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                m.data[r * self.cols + c] += v;
            }
        }
        m
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Largest absolute row sum, an upper bound on the spectral norm of a Hermitian matrix.
    pub fn max_row_sum(&self) -> f64 {
        (0..self.rows).map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    /// MatrixMarket coordinate format, 1-based, all stored entries.
    pub fn write_matrix_market<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate complex general")?;
        writeln!(out, "{} {} {}", self.rows, self.cols, self.nnz())?;
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                writeln!(out, "{} {} {:e} {:e}", r + 1, c + 1, v.re, v.im)?;
            }
        }
        Ok(())
    }

    pub fn read_matrix_market(text: &str) -> Result<CsrMatrix> {
        let err = |line: usize, m: &str| Error::Parse { line: line + 1, message: m.to_string() };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (i, banner) = lines.next().ok_or_else(|| err(0, "empty input"))?;
        let lower = banner.to_ascii_lowercase();
        if !lower.starts_with("%%matrixmarket matrix coordinate complex") {
            return Err(err(i, "expected a complex coordinate MatrixMarket banner"));
        }
        let mut lines = lines.filter(|(_, l)| !l.starts_with('%'));
        let (i, size) = lines.next().ok_or_else(|| err(0, "missing size line"))?;
        let dims: Vec<usize> =
            size.split_whitespace().map(|x| x.parse().map_err(|_| err(i, "bad size"))).collect::<Result<_>>()?;
        if dims.len() != 3 {
            return Err(err(i, "size line needs rows, cols, nnz"));
        }
        let mut triplets = Vec::with_capacity(dims[2]);
        for (i, l) in lines {
            let f: Vec<&str> = l.split_whitespace().collect();
            if f.len() != 4 {
                return Err(err(i, "expected `row col re im`"));
            }
            let r: usize = f[0].parse().map_err(|_| err(i, "bad row"))?;
            let c: usize = f[1].parse().map_err(|_| err(i, "bad column"))?;
            let re: f64 = f[2].parse().map_err(|_| err(i, "bad value"))?;
            let im: f64 = f[3].parse().map_err(|_| err(i, "bad value"))?;
            if r == 0 || c == 0 || r > dims[0] || c > dims[1] {
                return Err(err(i, "entry out of range"));
            }
            triplets.push((r - 1, c - 1, C64::new(re, im)));
        }
        if triplets.len() != dims[2] {
            return Err(err(0, "entry count does not match the size line"));
        }
        Ok(CsrMatrix::from_triplets(dims[0], dims[1], triplets))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> CsrMatrix {
        CsrMatrix::from_triplets(
            3,
            3,
            vec![
                (0, 0, C64::new(1.0, 0.0)),
                (0, 2, C64::new(0.0, 2.0)),
                (2, 1, C64::new(3.0, -1.0)),
                (2, 1, C64::new(1.0, 1.0)),
                (1, 1, ZERO),
            ],
        )
    }

    #[test]
    fn triplets_sum_and_drop_zeros() {
        let a = sample();
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(2, 1), C64::new(4.0, 0.0));
    }

    #[test]
    fn algebra_matches_dense() {
        let a = sample();
        let b = a.adjoint().plus(&CsrMatrix::identity(3));
        let dense = a.to_dense().mul(&b.to_dense());
        assert!(a.mul(&b).to_dense().max_abs_diff(&dense) < 1e-14);
        assert!(a.adjoint().to_dense().max_abs_diff(&a.to_dense().adjoint()) == 0.0);
        let x = vec![C64::new(1.0, 1.0), C64::new(-2.0, 0.5), C64::new(0.0, 3.0)];
        let y = a.matvec(&x);
        let yd = a.to_dense().matvec(&x);
        for (p, q) in y.iter().zip(&yd) {
            assert!((p - q).norm() < 1e-14);
        }
    }

    #[test]
    fn kron_and_extract() {
        let a = sample();
        let b = CMatrix::from_fn(2, 2, |r, c| C64::new((r + 2 * c) as f64, 0.0));
        let k = a.kron(&b);
        assert_eq!((k.rows, k.cols), (6, 6));
        assert_eq!(k.get(4 + 1, 2 + 1), a.get(2, 1) * b.get(1, 1));
        let e = a.extract(&[0, 2], &[1, 2]);
        assert_eq!(e.get(0, 1), C64::new(0.0, 2.0));
        assert_eq!(e.get(1, 0), C64::new(4.0, 0.0));
    }

    #[test]
    fn matrix_market_round_trip() {
        let a = sample();
        let mut buf = Vec::new();
        a.write_matrix_market(&mut buf).unwrap();
        let back = CsrMatrix::read_matrix_market(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, a);
    }
}
