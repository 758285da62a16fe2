//! Lattice operators on sections of `Λ^{0,•} ⊗ L^k ⊗ E` over the torus.
//!
//! Index layout: `(site * rank_e + summand) * fiber + monomial`.
//!
//! The Dirac operator is `√2(∂̄ + ∂̄*)` with `∂̄` built from gauged forward
//! differences `F_a = (V_a - 1)/h_a`, where `(V_a ψ)(x) = U_a(x) ψ(x + a)`.
//! That operator squares to an exactly computable stencil but has fermion
//! doublers of opposite chirality at the corners of the Brillouin zone. The
//! default operator adds a parity-signed mass `ε (r/h)(h² D_b²)^q` built from
//! the backward-difference operator `D_b`, whose symbol is large at exactly
//! those corners and of order `h^{4q-1}` near the origin.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::clifford::FiberAlgebra;
use crate::error::{Error, Result};
use crate::gauge::GaugeField;
use crate::geometry::{frame_axis, ModelManifold};
use crate::linalg::{self, CMatrix, C64, ONE, ZERO};
use crate::sparse::CsrMatrix;

/// Anything that can be applied to a vector.
pub trait LinearOperator: Send + Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[C64], y: &mut [C64]);

    fn apply_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.dim()];
        self.apply(x, &mut y);
        y
    }
}

/// How an operator interacts with the parity involution `ε = (-1)^degree`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Grading {
    /// No form-degree structure (scalar operators).
    None,
    /// Anticommutes with `ε`.
    Odd,
    /// Commutes with `ε`.
    Even,
    /// Parity labels exist but the operator has no symmetry under `ε`.
    Mixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Shape of the index space.
#[derive(Clone, Debug, PartialEq)]
pub struct Layout {
    pub sites: usize,
    pub rank_e: usize,
    /// Form degree of each fiber basis element; `[0]` for scalar operators.
    pub fiber_degrees: Vec<usize>,
}

impl Layout {
    pub fn fiber(&self) -> usize {
        self.fiber_degrees.len()
    }

    pub fn dim(&self) -> usize {
        self.sites * self.rank_e * self.fiber()
    }

    pub fn degree(&self, index: usize) -> usize {
        self.fiber_degrees[index % self.fiber()]
    }

    pub fn parity(&self, index: usize) -> Parity {
        if self.degree(index) % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        }
    }

    pub fn indices_of(&self, parity: Parity) -> Vec<usize> {
        (0..self.dim()).filter(|&i| self.parity(i) == parity).collect()
    }

    pub fn site_of(&self, index: usize) -> usize {
        index / (self.rank_e * self.fiber())
    }
}

/// Explicitly stored operator with its grading tag.
#[derive(Clone, Debug)]
pub struct SparseHermitianOperator {
    pub matrix: CsrMatrix,
    pub hermitian: bool,
    pub grading: Grading,
    pub layout: Layout,
    pub label: String,
}

impl LinearOperator for SparseHermitianOperator {
    fn dim(&self) -> usize {
        self.matrix.rows
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        self.matrix.matvec_into(x, y);
    }
}

impl SparseHermitianOperator {
    /// The explicit product `A A`.
    pub fn square(&self) -> SparseHermitianOperator {
        let grading = match self.grading {
            Grading::Odd | Grading::Even => Grading::Even,
            g => g,
        };
        SparseHermitianOperator {
            matrix: self.matrix.mul(&self.matrix),
            hermitian: self.hermitian,
            grading,
            layout: self.layout.clone(),
            label: format!("({})^2", self.label),
        }
    }

    /// Matrix-free `A A` via two matvecs.
    pub fn squared(&self) -> Squared<'_> {
        Squared::new(self)
    }

    pub fn to_dense(&self) -> CMatrix {
        self.matrix.to_dense()
    }

    pub fn export_matrix_market<W: Write>(&self, out: W) -> Result<()> {
        self.matrix.write_matrix_market(out)
    }

    /// Largest `||A v - A^* v||`-type defect `|<Av, w> - <v, Aw>|`, relative to
    /// `||A|| ||v|| ||w||`, over `samples` random pairs.
    pub fn hermiticity_defect(&self, samples: usize, seed: u64) -> f64 {
        hermiticity_defect(self, self.matrix.max_row_sum(), samples, seed)
    }

    /// Largest relative size of the parity-violating part of `A` on random vectors.
    pub fn grading_defect(&self, samples: usize, seed: u64) -> Result<f64> {
        let sign = match self.grading {
            Grading::Odd => -1.0,
            Grading::Even => 1.0,
            _ => return Err(Error::Ungraded),
        };
        let eps: Vec<f64> =
            (0..self.dim()).map(|i| if self.layout.parity(i) == Parity::Even { 1.0 } else { -1.0 }).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..samples {
            let v = random_vector(&mut rng, self.dim());
            let ev: Vec<C64> = v.iter().zip(&eps).map(|(a, s)| a * s).collect();
            let a_ev = self.apply_vec(&ev);
            let av = self.apply_vec(&v);
            let e_av: Vec<C64> = av.iter().zip(&eps).map(|(a, s)| a * s * sign).collect();
            let d = linalg::norm(&linalg::sub(&a_ev, &e_av));
            worst = worst.max(d / (self.matrix.max_row_sum().max(1.0) * linalg::norm(&v)));
        }
        Ok(worst)
    }
}

pub struct Squared<'a> {
    inner: &'a dyn LinearOperator,
    scratch: std::sync::Mutex<Vec<C64>>,
}

impl<'a> Squared<'a> {
    pub fn new(inner: &'a dyn LinearOperator) -> Self {
        Squared { inner, scratch: std::sync::Mutex::new(vec![ZERO; inner.dim()]) }
    }
}

impl LinearOperator for Squared<'_> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        let mut t = self.scratch.lock().expect("scratch poisoned");
        self.inner.apply(x, &mut t);
        self.inner.apply(&t, y);
    }
}

/// Diagonal operator, mainly for solver tests.
pub struct DiagonalOperator(pub Vec<f64>);

impl LinearOperator for DiagonalOperator {
    fn dim(&self) -> usize {
        self.0.len()
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        for ((yi, xi), d) in y.iter_mut().zip(x).zip(&self.0) {
            *yi = xi * d;
        }
    }
}

/// Dense matrix as an operator.
pub struct DenseOperator(pub CMatrix);

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.0.rows
    }

    fn apply(&self, x: &[C64], y: &mut [C64]) {
        y.copy_from_slice(&self.0.matvec(x));
    }
}

pub fn random_vector(rng: &mut impl Rng, n: usize) -> Vec<C64> {
    (0..n).map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect()
}

pub fn hermiticity_defect(op: &dyn LinearOperator, scale: f64, samples: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let v = random_vector(&mut rng, op.dim());
        let w = random_vector(&mut rng, op.dim());
        let lhs = linalg::dot(&op.apply_vec(&v), &w);
        let rhs = linalg::dot(&v, &op.apply_vec(&w));
        let denom = scale.max(f64::MIN_POSITIVE) * linalg::norm(&v) * linalg::norm(&w);
        worst = worst.max((lhs - rhs).norm() / denom);
    }
    worst
}

/// Parameters of the parity-signed mass term.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct WilsonParams {
    pub strength: f64,
    pub power: u32,
}

impl Default for WilsonParams {
    fn default() -> Self {
        WilsonParams { strength: 0.01, power: 2 }
    }
}

/// Building blocks shared by all assemblers: gauged shifts per axis on the
/// `(site, summand)` space.
struct Hopping {
    /// `V_a`.
    forward: Vec<CsrMatrix>,
    spacing: Vec<f64>,
    sites: usize,
    rank: usize,
}

impl Hopping {
    fn new(model: &ModelManifold, gauge: &GaugeField) -> Result<Self> {
        let lattice = model.require_lattice()?;
        if gauge.lattice() != lattice {
            return Err(Error::Dimension("gauge field lives on a different lattice".into()));
        }
        if gauge.chern.len() != model.n {
            return Err(Error::Dimension(format!("gauge has {} planes, model {}", gauge.chern.len(), model.n)));
        }
        let sites = lattice.site_count();
        let rank = gauge.rank_e;
        let forward = (0..lattice.dims())
            .map(|axis| {
                let mut triplets = Vec::with_capacity(sites * rank);
                for s in 0..rank {
                    let links = gauge.links(s, axis);
                    for site in 0..sites {
                        let to = lattice.forward(site, axis);
                        triplets.push((site * rank + s, to * rank + s, links[site]));
                    }
                }
                CsrMatrix::from_triplets(sites * rank, sites * rank, triplets)
            })
            .collect();
        Ok(Hopping { forward, spacing: lattice.spacing().to_vec(), sites, rank })
    }

    fn dim(&self) -> usize {
        self.sites * self.rank
    }

    fn identity(&self) -> CsrMatrix {
        CsrMatrix::identity(self.dim())
    }

    /// `(V_a - 1)/h_a`.
    fn forward_difference(&self, axis: usize) -> CsrMatrix {
        let h = self.spacing[axis];
        self.forward[axis].minus(&self.identity()).scaled(C64::new(1.0 / h, 0.0))
    }

    /// `(1 - V_a^*)/h_a = -F_a^*`.
    fn backward_difference(&self, axis: usize) -> CsrMatrix {
        self.forward_difference(axis).adjoint().scaled(-ONE)
    }

    /// `sum_a (2 - V_a - V_a^*)/h_a^2`.
    fn laplacian(&self) -> CsrMatrix {
        let mut out = CsrMatrix::zeros(self.dim(), self.dim());
        for (axis, v) in self.forward.iter().enumerate() {
            let h2 = self.spacing[axis] * self.spacing[axis];
            let term = self
                .identity()
                .scaled(C64::new(2.0, 0.0))
                .minus(v)
                .minus(&v.adjoint())
                .scaled(C64::new(1.0 / h2, 0.0));
            out = out.plus(&term);
        }
        out
    }

    /// Lattice curvature stencil of plane `j` seen by the forward `∂̄`:
    /// `i/(h_x h_y) (V_x^* V_y - V_y^* V_x - V_x^* + V_y^* - V_y + V_x)`.
    fn curvature_forward(&self, plane: usize) -> CsrMatrix {
        let (x, y) = (2 * plane, 2 * plane + 1);
        let (vx, vy) = (&self.forward[x], &self.forward[y]);
        let (vxa, vya) = (vx.adjoint(), vy.adjoint());
        let s = vxa.mul(vy).minus(&vya.mul(vx)).minus(&vxa).plus(&vya).minus(vy).plus(vx);
        s.scaled(C64::new(0.0, 1.0 / (self.spacing[x] * self.spacing[y])))
    }

    /// Companion stencil `i/(h_x h_y) (V_y V_x^* - V_x V_y^* - V_y - V_x^* + V_x + V_y^*)`.
    fn curvature_reverse(&self, plane: usize) -> CsrMatrix {
        let (x, y) = (2 * plane, 2 * plane + 1);
        let (vx, vy) = (&self.forward[x], &self.forward[y]);
        let (vxa, vya) = (vx.adjoint(), vy.adjoint());
        let s = vy.mul(&vxa).minus(&vx.mul(&vya)).minus(vy).minus(&vxa).plus(vx).plus(&vya);
        s.scaled(C64::new(0.0, 1.0 / (self.spacing[x] * self.spacing[y])))
    }
}

fn check_algebra(model: &ModelManifold, algebra: &FiberAlgebra) -> Result<()> {
    if algebra.n != model.n {
        return Err(Error::Dimension(format!("fiber algebra n={} on a model with n={}", algebra.n, model.n)));
    }
    Ok(())
}

fn spinor_layout(model: &ModelManifold, gauge: &GaugeField, algebra: &FiberAlgebra) -> Result<Layout> {
    Ok(Layout {
        sites: model.require_lattice()?.site_count(),
        rank_e: gauge.rank_e,
        fiber_degrees: algebra.degree_grading.clone(),
    })
}

fn scalar_layout(model: &ModelManifold, gauge: &GaugeField) -> Result<Layout> {
    Ok(Layout { sites: model.require_lattice()?.site_count(), rank_e: gauge.rank_e, fiber_degrees: vec![0] })
}

/// `√2 sum_j (w̄^j ^ ⊗ ∇̄_j + i_{w̄_j} ⊗ ∇̄_j^*)` for the given per-axis differences.
fn dbar_dirac(hop: &Hopping, algebra: &FiberAlgebra, difference: impl Fn(usize) -> CsrMatrix) -> CsrMatrix {
    let mut out = CsrMatrix::zeros(hop.dim() * algebra.dim_fiber, hop.dim() * algebra.dim_fiber);
    for j in 0..algebra.n {
        let nabla = difference(2 * j).plus(&difference(2 * j + 1).scaled(C64::new(0.0, 1.0)));
        // √2 · (F_x + i F_y)/√2
        out = out.plus(&nabla.kron(&algebra.wedge[j]));
        out = out.plus(&nabla.adjoint().kron(&algebra.contraction[j]));
    }
    out
}

/// Fiber term `sum_i c(e_i) Ω_{axis(i)}` from a nonzero `A2`; `None` when `A2 = 0`.
fn torsion_term(model: &ModelManifold, algebra: &FiberAlgebra) -> Option<CMatrix> {
    if model.torsion_a2.iter().all(|&x| x == 0.0) {
        return None;
    }
    let d = model.real_dim();
    let connection = |axis: usize| {
        let mut omega = CMatrix::zeros(algebra.dim_fiber, algebra.dim_fiber);
        for i in 0..d {
            for j in 0..d {
                let coeff = model.torsion_a2[(axis * d + frame_axis(i)) * d + frame_axis(j)];
                if coeff != 0.0 {
                    let prod = algebra.generators[i].mul(&algebra.generators[j]);
                    omega = omega.add(&prod.scaled(C64::new(0.25 * coeff, 0.0)));
                }
            }
        }
        omega
    };
    let mut out = CMatrix::zeros(algebra.dim_fiber, algebra.dim_fiber);
    for i in 0..d {
        out = out.add(&algebra.generators[i].mul(&connection(frame_axis(i))));
    }
    Some(out)
}

fn parity_diagonal(hop: &Hopping, algebra: &FiberAlgebra) -> CsrMatrix {
    let eps: Vec<C64> = algebra.parity().iter().map(|&s| C64::new(s, 0.0)).collect();
    hop.identity().kron(&CMatrix::diagonal(&eps))
}

/// The discretized covariant Laplacian on `L^k ⊗ E`.
pub fn covariant_laplacian(model: &ModelManifold, gauge: &GaugeField) -> Result<SparseHermitianOperator> {
    let hop = Hopping::new(model, gauge)?;
    Ok(SparseHermitianOperator {
        matrix: hop.laplacian(),
        hermitian: true,
        grading: Grading::None,
        layout: scalar_layout(model, gauge)?,
        label: format!("laplacian k={}", gauge.k),
    })
}

/// `Δ_k - k τ`, with `τ` applied exactly on the diagonal.
pub fn schrodinger_operator(model: &ModelManifold, gauge: &GaugeField) -> Result<SparseHermitianOperator> {
    let hop = Hopping::new(model, gauge)?;
    let shift: Vec<f64> =
        (0..hop.dim()).map(|i| -(gauge.k as f64) * model.tau_at(i / hop.rank)).collect();
    Ok(SparseHermitianOperator {
        matrix: hop.laplacian().plus(&CsrMatrix::real_diagonal(&shift)),
        hermitian: true,
        grading: Grading::None,
        layout: scalar_layout(model, gauge)?,
        label: format!("schrodinger k={}", gauge.k),
    })
}

/// Dirac operator with the default mass term.
pub fn dirac_operator(model: &ModelManifold, gauge: &GaugeField, algebra: &FiberAlgebra) -> Result<SparseHermitianOperator> {
    dirac_operator_with(model, gauge, algebra, Some(WilsonParams::default()))
}

/// Dirac operator; `wilson = None` gives the bare graded `√2(∂̄ + ∂̄*)`.
pub fn dirac_operator_with(
    model: &ModelManifold,
    gauge: &GaugeField,
    algebra: &FiberAlgebra,
    wilson: Option<WilsonParams>,
) -> Result<SparseHermitianOperator> {
    check_algebra(model, algebra)?;
    let hop = Hopping::new(model, gauge)?;
    let layout = spinor_layout(model, gauge, algebra)?;
    let mut matrix = dbar_dirac(&hop, algebra, |a| hop.forward_difference(a));
    if let Some(t) = torsion_term(model, algebra) {
        matrix = matrix.plus(&hop.identity().kron(&t));
    }
    let (grading, label) = match wilson {
        None => (Grading::Odd, format!("dirac k={}", gauge.k)),
        Some(w) => {
            matrix = matrix.plus(&wilson_mass(&hop, algebra, w));
            (Grading::Mixed, format!("dirac k={} wilson r={} q={}", gauge.k, w.strength, w.power))
        }
    };
    Ok(SparseHermitianOperator { matrix, hermitian: true, grading, layout, label })
}

/// `ε (r/h) (h² D_b²)^q` with `h` the largest lattice spacing.
fn wilson_mass(hop: &Hopping, algebra: &FiberAlgebra, w: WilsonParams) -> CsrMatrix {
    parity_diagonal(hop, algebra).mul(&wilson_magnitude(hop, algebra, w))
}

fn wilson_magnitude(hop: &Hopping, algebra: &FiberAlgebra, w: WilsonParams) -> CsrMatrix {
    let h = hop.spacing.iter().cloned().fold(0.0, f64::max);
    let db = dbar_dirac(hop, algebra, |a| hop.backward_difference(a));
    let block = db.mul(&db).scaled(C64::new(h * h, 0.0));
    let mut m = CsrMatrix::identity(block.rows);
    for _ in 0..w.power {
        m = m.mul(&block);
    }
    m.scaled(C64::new(w.strength / h, 0.0))
}

/// The backward-difference Dirac operator `√2(∂̄_b + ∂̄_b^*)` (graded).
pub fn backward_dirac_operator(
    model: &ModelManifold,
    gauge: &GaugeField,
    algebra: &FiberAlgebra,
) -> Result<SparseHermitianOperator> {
    check_algebra(model, algebra)?;
    let hop = Hopping::new(model, gauge)?;
    Ok(SparseHermitianOperator {
        matrix: dbar_dirac(&hop, algebra, |a| hop.backward_difference(a)),
        hermitian: true,
        grading: Grading::Odd,
        layout: spinor_layout(model, gauge, algebra)?,
        label: format!("backward dirac k={}", gauge.k),
    })
}

/// Right-hand side of the Lichnerowicz formula for `dirac_operator_with(.., wilson)`,
/// assembled from link-product stencils rather than by squaring.
///
/// For the bare operator this is
/// `Δ ⊗ 1 + sum_j Θ_j ⊗ 1 + sum_j (Θ'_j - Θ_j) ⊗ w̄^j ^ i_{w̄_j}`,
/// where `Θ_j` and `Θ'_j` are the lattice curvature stencils of plane `j`; they
/// tend to `-2πk a_j` and `+2πk a_j`, which is the continuum
/// `Δ - 2k ω_d - k τ` (flat metric, `K = 0`, `c(R) = 0` for trivial `E`).
/// With the mass term `ε M` the rhs gains `M² + ε [M, D]`.
pub fn lichnerowicz_rhs_with(
    model: &ModelManifold,
    gauge: &GaugeField,
    algebra: &FiberAlgebra,
    wilson: Option<WilsonParams>,
) -> Result<SparseHermitianOperator> {
    check_algebra(model, algebra)?;
    if torsion_term(model, algebra).is_some() {
        return Err(Error::InvalidParameter("the Lichnerowicz stencil requires A2 = 0".into()));
    }
    let hop = Hopping::new(model, gauge)?;
    let fid = CMatrix::identity(algebra.dim_fiber);
    let mut matrix = hop.laplacian().kron(&fid);
    for j in 0..model.n {
        let theta = hop.curvature_forward(j);
        let theta_rev = hop.curvature_reverse(j);
        let occ: Vec<C64> = algebra.occupation(j).iter().map(|&x| C64::new(x, 0.0)).collect();
        matrix = matrix.plus(&theta.kron(&fid));
        matrix = matrix.plus(&theta_rev.minus(&theta).kron(&CMatrix::diagonal(&occ)));
    }
    let mut label = format!("lichnerowicz rhs k={}", gauge.k);
    if let Some(w) = wilson {
        let m = wilson_magnitude(&hop, algebra, w);
        let eps = parity_diagonal(&hop, algebra);
        let d = dbar_dirac(&hop, algebra, |a| hop.forward_difference(a));
        let commutator = m.mul(&d).minus(&d.mul(&m));
        matrix = matrix.plus(&m.mul(&m)).plus(&eps.mul(&commutator));
        label.push_str(" wilson");
    }
    Ok(SparseHermitianOperator {
        matrix,
        hermitian: true,
        grading: if wilson.is_some() { Grading::Mixed } else { Grading::Even },
        layout: spinor_layout(model, gauge, algebra)?,
        label,
    })
}

/// Right-hand side matching `dirac_operator`.
pub fn lichnerowicz_rhs(model: &ModelManifold, gauge: &GaugeField, algebra: &FiberAlgebra) -> Result<SparseHermitianOperator> {
    lichnerowicz_rhs_with(model, gauge, algebra, Some(WilsonParams::default()))
}

/// Lattice curvature stencil `Θ_j` of plane `j` (the discrete `-2π k a_j`
/// plus the `E` curvature), acting on the scalar `(site, summand)` space.
pub fn plane_curvature_stencil(model: &ModelManifold, gauge: &GaugeField, plane: usize) -> Result<SparseHermitianOperator> {
    let hop = Hopping::new(model, gauge)?;
    if plane >= model.n {
        return Err(Error::Dimension(format!("plane {plane} on a model with n={}", model.n)));
    }
    Ok(SparseHermitianOperator {
        matrix: hop.curvature_forward(plane),
        hermitian: true,
        grading: Grading::None,
        layout: scalar_layout(model, gauge)?,
        label: format!("curvature stencil plane {plane}"),
    })
}

/// `P A P` on the chosen parity subspace.
pub fn restrict_parity(op: &SparseHermitianOperator, parity: Parity) -> Result<SparseHermitianOperator> {
    if op.grading == Grading::None {
        return Err(Error::Ungraded);
    }
    let idx = op.layout.indices_of(parity);
    let fiber_degrees: Vec<usize> =
        op.layout.fiber_degrees.iter().cloned().filter(|d| (d % 2 == 0) == (parity == Parity::Even)).collect();
    Ok(SparseHermitianOperator {
        matrix: op.matrix.extract(&idx, &idx),
        hermitian: op.hermitian,
        grading: Grading::None,
        layout: Layout { sites: op.layout.sites, rank_e: op.layout.rank_e, fiber_degrees },
        label: format!("{} on {:?} forms", op.label, parity),
    })
}

/// Rectangular block of `A` from the `from` parity subspace to the `to` subspace.
pub fn parity_block(op: &SparseHermitianOperator, from: Parity, to: Parity) -> Result<CsrMatrix> {
    if op.grading == Grading::None {
        return Err(Error::Ungraded);
    }
    Ok(op.matrix.extract(&op.layout.indices_of(to), &op.layout.indices_of(from)))
}

/// Norms of the degree-0 part and of the positive-degree part of a section.
pub fn degree_split(layout: &Layout, v: &[Complex64]) -> (f64, f64) {
    let mut zero = 0.0;
    let mut positive = 0.0;
    for (i, z) in v.iter().enumerate() {
        if layout.degree(i) == 0 {
            zero += z.norm_sqr();
        } else {
            positive += z.norm_sqr();
        }
    }
    (zero.sqrt(), positive.sqrt())
}

/// Weight of a section on each form degree.
pub fn degree_weights(layout: &Layout, v: &[Complex64]) -> Vec<f64> {
    let top = layout.fiber_degrees.iter().cloned().max().unwrap_or(0);
    let mut w = vec![0.0; top + 1];
    for (i, z) in v.iter().enumerate() {
        w[layout.degree(i)] += z.norm_sqr();
    }
    w
}
