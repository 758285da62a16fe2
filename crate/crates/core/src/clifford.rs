//! The fiber of antiholomorphic forms and its Clifford module structure.
//!
//! Basis elements are monomials `w̄^{j_1} ^ ... ^ w̄^{j_q}` with `j_1 < ... < j_q`,
//! encoded as bitmasks and ordered by degree, then lexicographically by the
//! index list. Frame vectors follow the convention `e_{2j} = (w_j + w̄_j)/√2`,
//! `e_{2j-1} = i(w_j - w̄_j)/√2`, so `generators[2j - 1] = w̄^j ^ - i_{w̄_j}`
//! and `generators[2j - 2] = i (w̄^j ^ + i_{w̄_j})` (1-based `j`).

use std::f64::consts::PI;

use crate::error::{invalid, Error, Result};
use crate::linalg::{CMatrix, C64, ZERO};

pub const MAX_HALF_DIM: usize = 6;

#[derive(Clone, Debug)]
pub struct FiberAlgebra {
    pub n: usize,
    pub dim_fiber: usize,
    /// Bitmask of each basis monomial.
    pub basis: Vec<u32>,
    pub degree_grading: Vec<usize>,
    /// `c(e_1) .. c(e_{2n})`.
    pub generators: Vec<CMatrix>,
    /// `w̄^j ^` for `j = 0..n`.
    pub wedge: Vec<CMatrix>,
    /// `i_{w̄_j}` for `j = 0..n`.
    pub contraction: Vec<CMatrix>,
    /// Diagonal of `omega_d` once the J0 eigenvalues are attached.
    pub omega_d: Option<Vec<f64>>,
    index_of_mask: Vec<usize>,
}

/// Sign from moving `w̄^j` past the lower-index factors of the monomial.
fn koszul_sign(mask: u32, j: usize) -> f64 {
    if (mask & ((1u32 << j) - 1)).count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn monomial_order(n: usize) -> Vec<u32> {
    let mut masks: Vec<u32> = (0..(1u32 << n)).collect();
    masks.sort_by_key(|&m| {
        let idx: Vec<u32> = (0..n as u32).filter(|j| m & (1 << j) != 0).collect();
        (m.count_ones(), idx)
    });
    masks
}

pub fn clifford_generators(n: usize) -> Result<FiberAlgebra> {
    if n == 0 || n > MAX_HALF_DIM {
        return Err(invalid(format!("half-dimension {n} outside 1..={MAX_HALF_DIM}")));
    }
    let dim = 1usize << n;
    let basis = monomial_order(n);
    let mut index_of_mask = vec![0; dim];
    for (i, &m) in basis.iter().enumerate() {
        index_of_mask[m as usize] = i;
    }
    let degree_grading = basis.iter().map(|m| m.count_ones() as usize).collect();
    let mut wedge = Vec::with_capacity(n);
    let mut contraction = Vec::with_capacity(n);
    for j in 0..n {
        let mut w = CMatrix::zeros(dim, dim);
        let mut c = CMatrix::zeros(dim, dim);
        for (col, &m) in basis.iter().enumerate() {
            let bit = 1u32 << j;
            let sign = C64::new(koszul_sign(m, j), 0.0);
            if m & bit == 0 {
                w.set(index_of_mask[(m | bit) as usize], col, sign);
            } else {
                c.set(index_of_mask[(m & !bit) as usize], col, sign);
            }
        }
        wedge.push(w);
        contraction.push(c);
    }
    let i = C64::new(0.0, 1.0);
    let mut generators = Vec::with_capacity(2 * n);
    for j in 0..n {
        generators.push(wedge[j].add(&contraction[j]).scaled(i));
        generators.push(wedge[j].sub(&contraction[j]));
    }
    Ok(FiberAlgebra {
        n,
        dim_fiber: dim,
        basis,
        degree_grading,
        generators,
        wedge,
        contraction,
        omega_d: None,
        index_of_mask,
    })
}

impl FiberAlgebra {
    /// Attach `omega_d` for the given J0 eigenvalues.
    pub fn with_symplectic(mut self, a: &[f64]) -> Result<Self> {
        let diag = omega_d_matrix(&self, a)?;
        self.omega_d = Some((0..self.dim_fiber).map(|i| diag.get(i, i).re).collect());
        Ok(self)
    }

    pub fn index_of(&self, mask: u32) -> usize {
        self.index_of_mask[mask as usize]
    }

    pub fn is_even(&self, index: usize) -> bool {
        self.degree_grading[index] % 2 == 0
    }

    /// `w̄^j ^ i_{w̄_j}` as a 0/1 diagonal.
    pub fn occupation(&self, j: usize) -> Vec<f64> {
        self.basis.iter().map(|m| if m & (1 << j) != 0 { 1.0 } else { 0.0 }).collect()
    }

    /// Parity involution `(-1)^degree`.
    pub fn parity(&self) -> Vec<f64> {
        self.degree_grading.iter().map(|d| if d % 2 == 0 { 1.0 } else { -1.0 }).collect()
    }

    /// `c(v)` for a real vector given in components along `e_1 .. e_{2n}`.
    pub fn clifford_action(&self, v: &[f64]) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim_fiber, self.dim_fiber);
        for (g, &x) in self.generators.iter().zip(v) {
            out = out.add(&g.scaled(C64::new(x, 0.0)));
        }
        out
    }
}

/// `omega_d = -2 pi sum_l a_l w̄^l ^ i_{w̄_l}`, diagonal in the monomial basis.
pub fn omega_d_matrix(algebra: &FiberAlgebra, a: &[f64]) -> Result<CMatrix> {
    if a.len() != algebra.n {
        return Err(invalid(format!("expected {} coefficients, got {}", algebra.n, a.len())));
    }
    if a.iter().any(|&x| !(x > 0.0)) {
        return Err(invalid("J0 eigenvalues must be positive"));
    }
    let d: Vec<C64> = algebra
        .basis
        .iter()
        .map(|&m| {
            let s: f64 = (0..algebra.n).filter(|j| m & (1 << j) != 0).map(|j| a[j]).sum();
            C64::new(-2.0 * PI * s, 0.0)
        })
        .collect();
    Ok(CMatrix::diagonal(&d))
}

/// The 2-form `R^E + tr[R^{T^{1,0}}]/2` evaluated on the real frame, `coeffs[l * 2n + m]`.
#[derive(Clone, Debug)]
pub struct CurvatureData {
    pub n: usize,
    pub coeffs: Vec<C64>,
}

impl CurvatureData {
    pub fn flat(n: usize) -> Self {
        CurvatureData { n, coeffs: vec![ZERO; 4 * n * n] }
    }

    /// Round sphere of radius `r` with a line bundle `E` of degree `chern_e`.
    pub fn round_sphere(radius: f64, chern_e: i64) -> Self {
        let f = C64::new(0.0, (chern_e as f64 + 1.0) / (2.0 * radius * radius));
        CurvatureData { n: 1, coeffs: vec![ZERO, f, -f, ZERO] }
    }

    /// Constant-curvature line bundle of degree `chern_e[j]` on each plane of a
    /// flat torus with the given sides, with the flat tangent bundle.
    pub fn torus_line_bundle(sides: &[f64], chern_e: &[i64]) -> Self {
        let n = chern_e.len();
        let d = 2 * n;
        let mut coeffs = vec![ZERO; d * d];
        for j in 0..n {
            let area = sides[2 * j] * sides[2 * j + 1];
            // R^E = -2 pi i (e / area) dx ^ dy and (e_{2j-1}, e_{2j}) = (d/dy, d/dx).
            let f = C64::new(0.0, 2.0 * PI * chern_e[j] as f64 / area);
            coeffs[(2 * j) * d + 2 * j + 1] = f;
            coeffs[(2 * j + 1) * d + 2 * j] = -f;
        }
        CurvatureData { n, coeffs }
    }
}

/// `c(R) = sum_{l<m} F(e_l, e_m) c(e_l) c(e_m)`.
pub fn cr_endomorphism(algebra: &FiberAlgebra, curvature: &CurvatureData) -> Result<CMatrix> {
    let d = 2 * algebra.n;
    if curvature.n != algebra.n || curvature.coeffs.len() != d * d {
        return Err(Error::Dimension(format!(
            "curvature for n={} against algebra n={}",
            curvature.n, algebra.n
        )));
    }
    let tol = 1e-12 * curvature.coeffs.iter().map(|z| z.norm()).fold(1.0, f64::max);
    for l in 0..d {
        for m in 0..d {
            if (curvature.coeffs[l * d + m] + curvature.coeffs[m * d + l]).norm() > tol {
                return Err(Error::NonAntisymmetric(l, m));
            }
        }
    }
    let mut out = CMatrix::zeros(algebra.dim_fiber, algebra.dim_fiber);
    for l in 0..d {
        for m in l + 1..d {
            let f = curvature.coeffs[l * d + m];
            if f != ZERO {
                let prod = algebra.generators[l].mul(&algebra.generators[m]);
                out = out.add(&prod.scaled(f));
            }
        }
    }
    Ok(out)
}
