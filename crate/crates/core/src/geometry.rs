//! Model manifolds: the flat torus lattice T^{2n} and the round sphere.
//!
//! Coordinates on the torus are ordered `(x_1, y_1, x_2, y_2, ...)`; axis `2j`
//! is `x_{j+1}` and axis `2j + 1` is `y_{j+1}`. The complex structure sends
//! `d/dx_j` to `d/dy_j` and the symplectic form is `sum_j a_j dx_j ^ dy_j`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Smallest admissible lattice resolution per axis.
pub const MIN_RESOLUTION: usize = 4;

const INTEGRALITY_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum ModelKind {
    FlatTorus { sides: Vec<f64>, resolution: usize },
    RoundSphere { radius: f64 },
}

/// Periodic hypercubic lattice with `resolution` sites per axis.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    dims: usize,
    resolution: usize,
    spacing: Vec<f64>,
    sites: usize,
}

impl Lattice {
    pub fn new(sides: &[f64], resolution: usize) -> Result<Self> {
        if resolution < MIN_RESOLUTION {
            return Err(Error::Resolution(resolution));
        }
        let dims = sides.len();
        let sites = resolution
            .checked_pow(dims as u32)
            .ok_or_else(|| invalid("lattice site count overflows"))?;
        let spacing = sides.iter().map(|l| l / resolution as f64).collect();
        Ok(Lattice { dims, resolution, spacing, sites })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }

    pub fn site_count(&self) -> usize {
        self.sites
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing.iter().product()
    }

    fn stride(&self, axis: usize) -> usize {
        self.resolution.pow(axis as u32)
    }

    pub fn coord(&self, site: usize, axis: usize) -> usize {
        (site / self.stride(axis)) % self.resolution
    }

    pub fn coords(&self, site: usize) -> Vec<usize> {
        (0..self.dims).map(|a| self.coord(site, a)).collect()
    }

    pub fn site_of(&self, coords: &[usize]) -> usize {
        coords
            .iter()
            .enumerate()
            .map(|(a, &c)| (c % self.resolution) * self.stride(a))
            .sum()
    }

    /// Site displaced by `steps` along `axis`, with periodic wrap.
    pub fn shift(&self, site: usize, axis: usize, steps: isize) -> usize {
        let n = self.resolution as isize;
        let c = self.coord(site, axis) as isize;
        let moved = (c + steps).rem_euclid(n) as usize;
        site - (c as usize) * self.stride(axis) + moved * self.stride(axis)
    }

    pub fn forward(&self, site: usize, axis: usize) -> usize {
        self.shift(site, axis, 1)
    }

    pub fn backward(&self, site: usize, axis: usize) -> usize {
        self.shift(site, axis, -1)
    }
}

/// Discretized geometry of a model manifold.
#[derive(Clone, Debug)]
pub struct ModelManifold {
    pub kind: ModelKind,
    /// Complex dimension.
    pub n: usize,
    /// `omega(u_a, u_b)` on the orthonormal coordinate basis, row-major `2n x 2n`.
    pub omega_coeffs: Vec<f64>,
    /// Complex structure `J` acting on column vectors, row-major.
    pub complex_structure: Vec<f64>,
    /// `J0` with `omega(u, v) = g(J0 u, v)`.
    pub j0: Vec<f64>,
    pub j0_eigenvalues: Vec<f64>,
    /// Per-site on the torus, a single entry on the sphere.
    pub tau: Vec<f64>,
    pub lambda: f64,
    pub scalar_curvature: f64,
    /// Row-major `(2n)^3` tensor, `torsion_a2[(a * 2n + b) * 2n + c]`; zero for both models.
    pub torsion_a2: Vec<f64>,
    pub volume: f64,
    /// Integral of omega over each coordinate 2-plane factor.
    pub periods: Vec<i64>,
    lattice: Option<Lattice>,
}

fn check_period(plane: usize, period: f64) -> Result<i64> {
    let rounded = period.round();
    if rounded < 1.0 || (period - rounded).abs() > INTEGRALITY_TOL * period.abs().max(1.0) {
        return Err(Error::NonIntegralClass { plane, period });
    }
    Ok(rounded as i64)
}

fn structure_matrices(a: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let d = 2 * a.len();
    let mut j = vec![0.0; d * d];
    let mut j0 = vec![0.0; d * d];
    let mut omega = vec![0.0; d * d];
    for (p, &ap) in a.iter().enumerate() {
        let (x, y) = (2 * p, 2 * p + 1);
        j[y * d + x] = 1.0;
        j[x * d + y] = -1.0;
        j0[y * d + x] = ap;
        j0[x * d + y] = -ap;
        omega[x * d + y] = ap;
        omega[y * d + x] = -ap;
    }
    (omega, j, j0)
}

/// Flat torus with sides `(l_{x_1}, l_{y_1}, ...)` and `omega = sum a_j dx_j ^ dy_j`.
pub fn build_torus_model(n: usize, sides: &[f64], resolution: usize, a: &[f64]) -> Result<ModelManifold> {
    if n == 0 {
        return Err(invalid("half-dimension must be at least 1"));
    }
    if sides.len() != 2 * n {
        return Err(invalid(format!("expected {} side lengths, got {}", 2 * n, sides.len())));
    }
    if a.len() != n {
        return Err(invalid(format!("expected {} symplectic coefficients, got {}", n, a.len())));
    }
    if sides.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
        return Err(invalid("side lengths must be positive and finite"));
    }
    if a.iter().any(|&x| !(x > 0.0 && x.is_finite())) {
        return Err(invalid("symplectic coefficients must be positive and finite"));
    }
    let lattice = Lattice::new(sides, resolution)?;
    let periods = (0..n)
        .map(|p| check_period(p, a[p] * sides[2 * p] * sides[2 * p + 1]))
        .collect::<Result<Vec<_>>>()?;
    let (omega, j, j0) = structure_matrices(a);
    let tau_value = 2.0 * PI * a.iter().sum::<f64>();
    let lambda = 2.0 * PI * a.iter().cloned().fold(f64::INFINITY, f64::min);
    let volume = (0..n).map(|p| a[p] * sides[2 * p] * sides[2 * p + 1]).product();
    let d = 2 * n;
    Ok(ModelManifold {
        kind: ModelKind::FlatTorus { sides: sides.to_vec(), resolution },
        n,
        omega_coeffs: omega,
        complex_structure: j,
        j0,
        j0_eigenvalues: a.to_vec(),
        tau: vec![tau_value; lattice.site_count()],
        lambda,
        scalar_curvature: 0.0,
        torsion_a2: vec![0.0; d * d * d],
        volume,
        periods,
        lattice: Some(lattice),
    })
}

/// Round sphere of radius `r` with `omega = (flux / 4 pi r^2) dA`.
pub fn build_sphere_model(radius: f64, flux: f64) -> Result<ModelManifold> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(invalid("radius must be positive and finite"));
    }
    let period = check_period(0, flux)?;
    let a = flux / (4.0 * PI * radius * radius);
    let (omega, j, j0) = structure_matrices(&[a]);
    Ok(ModelManifold {
        kind: ModelKind::RoundSphere { radius },
        n: 1,
        omega_coeffs: omega,
        complex_structure: j,
        j0,
        j0_eigenvalues: vec![a],
        tau: vec![2.0 * PI * a],
        lambda: 2.0 * PI * a,
        scalar_curvature: 2.0 / (radius * radius),
        torsion_a2: vec![0.0; 8],
        volume: flux,
        periods: vec![period],
        lattice: None,
    })
}

impl ModelManifold {
    pub fn real_dim(&self) -> usize {
        2 * self.n
    }

    pub fn lattice(&self) -> Option<&Lattice> {
        self.lattice.as_ref()
    }

    /// The lattice, or the analytic-backend error on the sphere.
    pub fn require_lattice(&self) -> Result<&Lattice> {
        self.lattice.as_ref().ok_or(Error::AnalyticBackend)
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self.kind, ModelKind::RoundSphere { .. })
    }

    pub fn tau_at(&self, site: usize) -> f64 {
        if self.tau.len() == 1 {
            self.tau[0]
        } else {
            self.tau[site]
        }
    }

    pub fn max_j0_eigenvalue(&self) -> f64 {
        self.j0_eigenvalues.iter().cloned().fold(0.0, f64::max)
    }

    /// `omega(u, v)` for vectors in the orthonormal coordinate basis.
    pub fn omega(&self, u: &[f64], v: &[f64]) -> f64 {
        bilinear(&self.omega_coeffs, u, v)
    }

    /// `g(J0 u, v)` with the flat metric.
    pub fn metric_of_j0(&self, u: &[f64], v: &[f64]) -> f64 {
        let ju = matvec(&self.j0, u);
        dot(&ju, v)
    }

    /// Largest entry of `J^2 + 1`, `J J0 - J0 J`, `omega - g(J0 ., .)` and `g(J., J.) - g`.
    pub fn compatibility_defect(&self) -> f64 {
        let d = self.real_dim();
        let jj = matmul(&self.complex_structure, &self.complex_structure, d);
        let jj0 = matmul(&self.complex_structure, &self.j0, d);
        let j0j = matmul(&self.j0, &self.complex_structure, d);
        let mut defect: f64 = 0.0;
        for r in 0..d {
            for c in 0..d {
                let id = if r == c { 1.0 } else { 0.0 };
                defect = defect.max((jj[r * d + c] + id).abs());
                defect = defect.max((jj0[r * d + c] - j0j[r * d + c]).abs());
                let mut ur = vec![0.0; d];
                let mut uc = vec![0.0; d];
                ur[r] = 1.0;
                uc[c] = 1.0;
                defect = defect.max((self.omega(&ur, &uc) - self.metric_of_j0(&ur, &uc)).abs());
                let jr = matvec(&self.complex_structure, &ur);
                let jc = matvec(&self.complex_structure, &uc);
                defect = defect.max((dot(&jr, &jc) - id).abs());
            }
        }
        defect
    }

    /// Largest entry of `J A2 + A2 J`, with `A2` read as a `TX`-valued one-form.
    pub fn torsion_anticommutation_defect(&self) -> f64 {
        let d = self.real_dim();
        let mut worst: f64 = 0.0;
        for a in 0..d {
            let block: Vec<f64> = self.torsion_a2[a * d * d..(a + 1) * d * d].to_vec();
            let lhs = matmul(&self.complex_structure, &block, d);
            let rhs = matmul(&block, &self.complex_structure, d);
            for i in 0..d * d {
                worst = worst.max((lhs[i] + rhs[i]).abs());
            }
        }
        worst
    }

    /// Sum of `omega^n / n!` over lattice cells.
    pub fn riemann_volume(&self) -> Result<f64> {
        let lattice = self.require_lattice()?;
        let density: f64 = self.j0_eigenvalues.iter().product();
        let mut total = 0.0;
        for _ in 0..lattice.site_count() {
            total += density * lattice.cell_volume();
        }
        Ok(total)
    }
}

fn dot(u: &[f64], v: &[f64]) -> f64 {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn matvec(m: &[f64], v: &[f64]) -> Vec<f64> {
    let d = v.len();
    (0..d).map(|r| dot(&m[r * d..(r + 1) * d], v)).collect()
}

fn bilinear(m: &[f64], u: &[f64], v: &[f64]) -> f64 {
    let d = u.len();
    let mut s = 0.0;
    for r in 0..d {
        for c in 0..d {
            s += u[r] * m[r * d + c] * v[c];
        }
    }
    s
}

fn matmul(a: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d * d];
    for r in 0..d {
        for k in 0..d {
            let x = a[r * d + k];
            if x != 0.0 {
                for c in 0..d {
                    out[r * d + c] += x * b[k * d + c];
                }
            }
        }
    }
    out
}

/// Orthonormal frames. `real[i]` holds `e_{i+1}` and `holo[j]` holds `w_{j+1}`,
/// both as component vectors in the coordinate basis.
#[derive(Clone, Debug)]
pub struct FrameData {
    pub real: Vec<Vec<f64>>,
    pub holo: Vec<Vec<Complex64>>,
    pub site_independent: bool,
}

/// Coordinate axis carried by real frame vector `e_{i+1}`.
///
/// `e_{2j}` points along `x_j` and `e_{2j-1}` along `y_j`.
pub fn frame_axis(i: usize) -> usize {
    if i % 2 == 0 {
        i + 1
    } else {
        i - 1
    }
}

pub fn frames(model: &ModelManifold) -> FrameData {
    let d = model.real_dim();
    let real: Vec<Vec<f64>> = (0..d)
        .map(|i| {
            let mut e = vec![0.0; d];
            e[frame_axis(i)] = 1.0;
            e
        })
        .collect();
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let holo = (0..model.n)
        .map(|j| {
            let ex = &real[2 * j + 1];
            let ey = &real[2 * j];
            (0..d).map(|c| Complex64::new(ex[c] * s, -ey[c] * s)).collect()
        })
        .collect();
    FrameData { real, holo, site_independent: true }
}

impl FrameData {
    /// Rebuild the real frame from `w_j` via `e_{2j} = (w + w̄)/√2`, `e_{2j-1} = i(w - w̄)/√2`.
    pub fn real_from_holo(&self) -> Vec<Vec<f64>> {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let d = 2 * self.holo.len();
        let mut out = vec![vec![0.0; d]; d];
        for (j, w) in self.holo.iter().enumerate() {
            for c in 0..d {
                let sum = w[c] + w[c].conj();
                let diff = Complex64::i() * (w[c] - w[c].conj());
                out[2 * j + 1][c] = (sum * s).re;
                out[2 * j][c] = (diff * s).re;
            }
        }
        out
    }

    /// Largest deviation of `<e_i, e_j>` from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, a) in self.real.iter().enumerate() {
            for (j, b) in self.real.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot(a, b) - target).abs());
            }
        }
        worst
    }
}
