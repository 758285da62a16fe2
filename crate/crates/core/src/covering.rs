//! Finite quotients of the universal cover of a flat torus.
//!
//! Scale `m` is the torus with sides `m * l` and resolution `m * N`, carrying the
//! pulled-back field: the flux per plaquette is unchanged and the total flux
//! grows by `m²` per plane. Per-cell spectral counts on growing quotients
//! approximate the `Γ`-trace of spectral projectors for `Γ = Z^{2n}`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::analysis::{continuum_first_level, gap_report, index_prediction, BundleSpec};
use crate::clifford::{clifford_generators, FiberAlgebra};
use crate::eigensolve::{count_in_window, smallest_eigenvalues, smallest_of_square, EigenRequest};
use crate::error::{invalid, Error, Result};
use crate::gauge::{assign_line_bundle, GaugeField};
use crate::geometry::{build_torus_model, ModelKind, ModelManifold};
use crate::linalg::{self, C64, ZERO};
use crate::operators::{
    dirac_operator_with, random_vector, restrict_parity, schrodinger_operator, LinearOperator, Parity,
    SparseHermitianOperator, WilsonParams,
};

/// Default bound on the dimension of the largest quotient's Dirac operator.
pub const DEFAULT_DIM_CAP: usize = 1 << 14;

#[derive(Clone, Debug)]
pub struct Quotient {
    pub scale: usize,
    pub model: ModelManifold,
    pub bundle: BundleSpec,
}

impl Quotient {
    /// Number of base fundamental domains, `m^{2n}`.
    pub fn cells(&self) -> usize {
        self.scale.pow(2 * self.model.n as u32)
    }

    pub fn gauge(&self, k: u32) -> Result<GaugeField> {
        assign_line_bundle(&self.model, k, &self.bundle.chern)?.with_auxiliary_bundle(self.bundle.rank_e, &self.bundle.chern_e)
    }

    pub fn algebra(&self) -> Result<FiberAlgebra> {
        clifford_generators(self.model.n)?.with_symplectic(&self.model.j0_eigenvalues)
    }

    pub fn dirac_dim(&self) -> usize {
        let sites = self.model.lattice().map(|l| l.site_count()).unwrap_or(0);
        sites * self.bundle.rank_e * (1 << self.model.n)
    }
}

#[derive(Clone, Debug)]
pub struct QuotientFamily {
    pub base: ModelManifold,
    pub bundle: BundleSpec,
    pub quotients: Vec<Quotient>,
}

impl QuotientFamily {
    /// Total `L^k` flux through each plane of quotient `i`, in units of `2π`.
    pub fn flux_quanta(&self, i: usize, k: u32) -> Vec<i64> {
        self.quotients[i].bundle.chern.iter().map(|c| c * k as i64).collect()
    }
}

/// Quotients at the given increasing scales; scale 1 is the base model itself.
pub fn build_quotient_family(base: &ModelManifold, bundle: &BundleSpec, scales: &[usize], dim_cap: usize) -> Result<QuotientFamily> {
    let (sides, resolution) = match &base.kind {
        ModelKind::FlatTorus { sides, resolution } => (sides.clone(), *resolution),
        ModelKind::RoundSphere { .. } => return Err(invalid("coverings are built over the torus model only")),
    };
    if scales.is_empty() || scales[0] == 0 || scales.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid(format!("scales must be a nonempty increasing list of positive integers, got {scales:?}")));
    }
    index_prediction(base, bundle, 1)?;
    let mut quotients = Vec::new();
    for &m in scales {
        let factor = (m * m) as i64;
        let model = if m == 1 {
            base.clone()
        } else {
            let s: Vec<f64> = sides.iter().map(|l| l * m as f64).collect();
            build_torus_model(base.n, &s, resolution * m, &base.j0_eigenvalues)?
        };
        let q = Quotient {
            scale: m,
            model,
            bundle: BundleSpec {
                chern: bundle.chern.iter().map(|c| c * factor).collect(),
                rank_e: bundle.rank_e,
                chern_e: bundle.chern_e.iter().map(|c| c * factor).collect(),
            },
        };
        if q.dirac_dim() > dim_cap {
            return Err(Error::TooLarge { dim: q.dirac_dim(), limit: dim_cap });
        }
        quotients.push(q);
    }
    Ok(QuotientFamily { base: base.clone(), bundle: bundle.clone(), quotients })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SpectralKind {
    /// `Δ_k - kτ`.
    Schrodinger,
    /// `D_k²` with the default mass term.
    DiracSquare,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScaleCounts {
    pub scale: usize,
    pub cells: usize,
    /// Eigenvalues below each `μ`.
    pub raw: Vec<usize>,
    pub normalized: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GammaTraceEstimate {
    pub kind: SpectralKind,
    pub k: u32,
    pub mu: Vec<f64>,
    pub scales: Vec<ScaleCounts>,
    /// Values at the largest scale.
    pub limit: Vec<f64>,
    /// Successive scales agree to within half a state of the largest quotient.
    pub converged: bool,
    pub tolerance: f64,
}

fn build_operator(q: &Quotient, kind: SpectralKind, k: u32, wilson: Option<WilsonParams>) -> Result<SparseHermitianOperator> {
    let gauge = q.gauge(k)?;
    match kind {
        SpectralKind::Schrodinger => schrodinger_operator(&q.model, &gauge),
        SpectralKind::DiracSquare => dirac_operator_with(&q.model, &gauge, &q.algebra()?, wilson),
    }
}

/// Normalized eigenvalue counts `N_m(μ)` per scale.
pub fn gamma_spectrum_distribution(
    family: &QuotientFamily,
    kind: SpectralKind,
    k: u32,
    mu: &[f64],
    request: &EigenRequest,
    wilson: Option<WilsonParams>,
) -> Result<GammaTraceEstimate> {
    if mu.is_empty() {
        return Err(invalid("empty μ grid"));
    }
    let top = mu.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut scales = Vec::new();
    for q in &family.quotients {
        let op = build_operator(q, kind, k, wilson)?;
        let spectrum = match kind {
            SpectralKind::Schrodinger => smallest_eigenvalues(&op, request, Some(top))?,
            SpectralKind::DiracSquare => smallest_of_square(&op, request, Some(top))?,
        };
        let raw = mu.iter().map(|&m| count_in_window(&spectrum, f64::NEG_INFINITY, m)).collect::<Result<Vec<_>>>()?;
        let cells = q.cells();
        scales.push(ScaleCounts {
            scale: q.scale,
            cells,
            normalized: raw.iter().map(|&c| c as f64 / cells as f64).collect(),
            raw,
        });
    }
    let largest = scales.last().map(|s| s.cells).unwrap_or(1);
    let tolerance = 0.5 / largest as f64;
    let converged = scales
        .windows(2)
        .all(|w| w[0].normalized.iter().zip(&w[1].normalized).all(|(a, b)| (a - b).abs() < tolerance));
    Ok(GammaTraceEstimate {
        kind,
        k,
        mu: mu.to_vec(),
        limit: scales.last().map(|s| s.normalized.clone()).unwrap_or_default(),
        scales,
        converged,
        tolerance,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ScaleIndex {
    pub scale: usize,
    pub cells: usize,
    pub kernel_dim: usize,
    pub normalized_kernel: f64,
    /// Smallest eigenvalue of `D_k²` compressed to odd forms.
    pub odd_minimum: f64,
    pub odd_kernel_empty: bool,
    /// Eigenvalues of `Δ_k - kτ` in `(-a, a)`.
    pub window_count: usize,
    pub normalized_window: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GammaIndexReport {
    pub k: u32,
    pub predicted: i64,
    pub a: f64,
    pub scales: Vec<ScaleIndex>,
    pub excluded: bool,
    pub pass: bool,
}

/// Per-cell kernel dimension of `D_k^+`, emptiness of the odd kernel, and the
/// per-cell gap-window count of `Δ_k - kτ` at every scale.
pub fn gamma_index_check(
    family: &QuotientFamily,
    k: u32,
    request: &EigenRequest,
    wilson: Option<WilsonParams>,
) -> Result<GammaIndexReport> {
    let predicted = index_prediction(&family.base, &family.bundle, k)?.predicted;
    if k == 0 {
        return Ok(GammaIndexReport { k, predicted, a: f64::NAN, scales: Vec::new(), excluded: true, pass: true });
    }
    let lambda = family.base.lambda;
    let mut a = None;
    let mut scales = Vec::new();
    for q in &family.quotients {
        let cells = q.cells();
        let expected = (predicted.max(0) as usize) * cells;
        let gauge = q.gauge(k)?;
        let schr = schrodinger_operator(&q.model, &gauge)?;
        let a_value = match a {
            Some(v) => v,
            None => {
                let low = smallest_eigenvalues(&schr, &EigenRequest { count: expected + 2, ..request.clone() }, Some(k as f64 * lambda))?;
                let anchor = low
                    .eigenvalues
                    .iter()
                    .cloned()
                    .find(|&v| v >= k as f64 * lambda)
                    .ok_or_else(|| invalid("Schrodinger spectrum does not reach the half gap"))?;
                a = Some(0.5 * anchor);
                0.5 * anchor
            }
        };
        let low = smallest_eigenvalues(&schr, &EigenRequest { count: expected + 2, ..request.clone() }, Some(a_value))?;
        let window_count = count_in_window(&low, -a_value, a_value)?;

        let dirac = dirac_operator_with(&q.model, &gauge, &q.algebra()?, wilson)?;
        let spectrum = smallest_of_square(&dirac, &EigenRequest { count: expected + 4, ..request.clone() }, None)?;
        let odd = restrict_parity(&dirac.square(), Parity::Odd)?;
        let odd_minimum = smallest_eigenvalues(&odd, &EigenRequest { count: 1, ..request.clone() }, None)?.eigenvalues[0];
        let report = gap_report(k, lambda, &spectrum, odd_minimum, continuum_first_level(&q.model, &q.bundle, k)?)?;
        let guard = crate::analysis::KERNEL_SEPARATION * report.threshold;
        scales.push(ScaleIndex {
            scale: q.scale,
            cells,
            kernel_dim: report.kernel_dim,
            normalized_kernel: report.kernel_dim as f64 / cells as f64,
            odd_minimum,
            odd_kernel_empty: odd_minimum >= guard,
            window_count,
            normalized_window: window_count as f64 / cells as f64,
        });
    }
    let pass = scales.iter().all(|s| {
        s.kernel_dim as i64 == predicted * s.cells as i64
            && s.window_count as i64 == predicted * s.cells as i64
            && s.odd_kernel_empty
    });
    Ok(GammaIndexReport { k, predicted, a: a.unwrap_or(f64::NAN), scales, excluded: false, pass })
}

/// Apply the magnetic translation by `shift` lattice steps to a section in the
/// layout of `op`.
fn translate(gauge: &GaugeField, phases: &[Vec<C64>], shift: &[usize], fiber: usize, v: &[C64]) -> Vec<C64> {
    let l = gauge.lattice();
    let rank = gauge.rank_e;
    let mut out = vec![ZERO; v.len()];
    for site in 0..l.site_count() {
        let mut target = site;
        for (axis, &d) in shift.iter().enumerate() {
            target = l.shift(target, axis, d as isize);
        }
        for s in 0..rank {
            let g = phases[s][site];
            for f in 0..fiber {
                out[(site * rank + s) * fiber + f] = g * v[(target * rank + s) * fiber + f];
            }
        }
    }
    out
}

/// Largest `‖[op, T] v‖ / ‖v‖` over random `v`, for the magnetic translation `T`
/// by `shift` lattice steps. Fails if no magnetic translation by `shift` exists.
pub fn translation_defect(gauge: &GaugeField, op: &SparseHermitianOperator, shift: &[usize], samples: usize, seed: u64) -> Result<f64> {
    let l = gauge.lattice();
    if shift.len() != l.dims() {
        return Err(Error::Dimension(format!("shift of length {} on a {}-dimensional lattice", shift.len(), l.dims())));
    }
    if op.layout.sites != l.site_count() || op.layout.rank_e != gauge.rank_e {
        return Err(Error::Dimension("operator and gauge field live on different lattices".into()));
    }
    let phases = (0..gauge.rank_e).map(|s| gauge.magnetic_translation(s, shift)).collect::<Result<Vec<_>>>()?;
    let fiber = op.layout.fiber();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples.max(1) {
        let v = random_vector(&mut rng, op.dim());
        let a = op.apply_vec(&translate(gauge, &phases, shift, fiber, &v));
        let b = translate(gauge, &phases, shift, fiber, &op.apply_vec(&v));
        let d: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
        worst = worst.max(linalg::norm(&d) / linalg::norm(&v));
    }
    Ok(worst)
}

/// Shifts by one base period along each lattice axis of quotient `q`.
pub fn deck_shifts(family: &QuotientFamily, q: &Quotient) -> Vec<Vec<usize>> {
    let base_n = family.base.lattice().map(|l| l.resolution()).unwrap_or(0);
    let dims = 2 * q.model.n;
    if q.scale == 1 {
        return Vec::new();
    }
    (0..dims)
        .map(|axis| {
            let mut s = vec![0; dims];
            s[axis] = base_n;
            s
        })
        .collect()
}
