//! Verdicts from spectra: gap detection for `D_k²`, kernel counting against
//! the index formula, clustering of `Δ_k - kτ`, decay of the positive-degree
//! part of kernel sections, and the closed-form monopole spectrum on the sphere.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::clifford::{clifford_generators, cr_endomorphism, CurvatureData};
use crate::eigensolve::{count_in_window, EigenResult, HermitianReduction};
use crate::error::{invalid, Error, Result};
use crate::geometry::{ModelKind, ModelManifold};
use crate::linalg::{self, CMatrix, C64};
use crate::operators::{random_vector, LinearOperator, Layout};

/// Eigenvalues below this multiple of `2kλ` count as kernel.
pub const KERNEL_THRESHOLD: f64 = 1e-6;
/// Required ratio between the first nonzero eigenvalue and the kernel threshold.
pub const KERNEL_SEPARATION: f64 = 1e3;
/// Relative tolerance of the first nonzero cluster against the continuum level.
pub const CLUSTER_TOLERANCE: f64 = 0.05;
/// Largest admissible slope of `C_k` against `k`, in units of `2λ`.
pub const C_SLOPE_FACTOR: f64 = 0.05;
/// Largest accepted residual on the eigenvalues entering a gap report.
pub const GAP_RESIDUAL: f64 = 1e-8;
/// Largest flux quanta per plaquette, `k * chern / N²`, for which lattice
/// spectra are compared with continuum values.
pub const FLUX_FINENESS_CAP: f64 = 1.0 / 64.0;
/// Decay verdict: required slope of `log ρ_k` against `log k`.
pub const DECAY_SLOPE: f64 = -0.4;
/// Decay verdict: bound on `ρ_k √k`.
pub const DECAY_BOUND: f64 = 1.0;
/// Below this `ρ_k` the positive-degree part counts as vanishing and no slope is fitted.
pub const DECAY_FLOOR: f64 = 1e-3;
/// Relative size under which a degree-0 part counts as zero.
const DEGREE_ZERO_FLOOR: f64 = 1e-8;

/// Chern data of `L` and of `E = E_0 ⊕ trivial^{rank-1}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BundleSpec {
    pub chern: Vec<i64>,
    pub rank_e: usize,
    /// Chern numbers of the twisted summand `E_0`, one per plane.
    pub chern_e: Vec<i64>,
}

impl BundleSpec {
    pub fn new(chern: Vec<i64>, rank_e: usize, chern_e: Vec<i64>) -> Result<Self> {
        if rank_e == 0 {
            return Err(invalid("rank of E must be at least 1"));
        }
        if chern.len() != chern_e.len() {
            return Err(Error::Dimension(format!(
                "{} chern numbers for L but {} for E",
                chern.len(),
                chern_e.len()
            )));
        }
        Ok(BundleSpec { chern, rank_e, chern_e })
    }

    pub fn line(chern: Vec<i64>) -> Self {
        let n = chern.len();
        BundleSpec { chern, rank_e: 1, chern_e: vec![0; n] }
    }

    /// Per-plane degree of `L^k ⊗ E_s`.
    fn summand_degrees(&self, k: u32, summand: usize) -> Vec<i64> {
        self.chern
            .iter()
            .zip(&self.chern_e)
            .map(|(&c, &e)| k as i64 * c + if summand == 0 { e } else { 0 })
            .collect()
    }
}

fn check_bundle(model: &ModelManifold, bundle: &BundleSpec) -> Result<()> {
    if bundle.chern.len() != model.n {
        return Err(Error::Dimension(format!("{} chern numbers on a model with n={}", bundle.chern.len(), model.n)));
    }
    if bundle.chern != model.periods {
        return Err(Error::ChernMismatch { given: bundle.chern.clone(), expected: model.periods.clone() });
    }
    Ok(())
}

/// Whether `k` lies in the validated range of a lattice of resolution `N`.
pub fn within_flux_cap(k: u32, chern: &[i64], resolution: usize) -> bool {
    let worst = chern.iter().map(|c| c.abs()).max().unwrap_or(0) as f64;
    k as f64 * worst / (resolution * resolution) as f64 <= FLUX_FINENESS_CAP + 1e-15
}

#[derive(Clone, Debug, Serialize)]
pub struct IndexPrediction {
    pub model: String,
    pub k: u32,
    pub rank_e: usize,
    pub chern_l: Vec<i64>,
    pub chern_e: Vec<i64>,
    /// `<ch(L^k ⊗ E) td(X), [X]>`.
    pub predicted: i64,
    /// `k^n rank(E) vol_ω(X)`.
    pub leading: f64,
}

impl IndexPrediction {
    /// `d_k / (k^n rank(E) vol_ω)`.
    pub fn leading_ratio(&self, observed: usize) -> f64 {
        observed as f64 / self.leading
    }
}

fn model_id(model: &ModelManifold) -> String {
    match &model.kind {
        ModelKind::FlatTorus { sides, resolution } => format!("torus n={} sides={:?} N={}", model.n, sides, resolution),
        ModelKind::RoundSphere { radius } => format!("sphere r={radius}"),
    }
}

/// Closed-form index of `D_k^+` on `L^k ⊗ E`.
///
/// Torus: the Todd class is trivial and `c_1(L^k ⊗ E_s)` splits over the
/// planes, so each summand contributes the product of its plane degrees.
/// Sphere: Riemann-Roch in genus 0.
pub fn index_prediction(model: &ModelManifold, bundle: &BundleSpec, k: u32) -> Result<IndexPrediction> {
    check_bundle(model, bundle)?;
    let rank = bundle.rank_e as i64;
    let predicted = match model.kind {
        ModelKind::FlatTorus { .. } => {
            (0..bundle.rank_e).map(|s| bundle.summand_degrees(k, s).iter().product::<i64>()).sum()
        }
        ModelKind::RoundSphere { .. } => rank * (k as i64 * bundle.chern[0] + 1) + bundle.chern_e[0],
    };
    Ok(IndexPrediction {
        model: model_id(model),
        k,
        rank_e: bundle.rank_e,
        chern_l: bundle.chern.clone(),
        chern_e: bundle.chern_e.clone(),
        predicted,
        leading: (k as f64).powi(model.n as i32) * bundle.rank_e as f64 * model.volume,
    })
}

/// Continuum value of the smallest nonzero eigenvalue of `D_k²`.
///
/// On the torus `L^k ⊗ E_s` restricted to plane `j` has constant field
/// `B = 2π deg / area` and the first excited level of `D²` is `2B`.
pub fn continuum_first_level(model: &ModelManifold, bundle: &BundleSpec, k: u32) -> Result<f64> {
    check_bundle(model, bundle)?;
    match &model.kind {
        ModelKind::FlatTorus { sides, .. } => {
            let mut best = f64::INFINITY;
            for s in 0..bundle.rank_e {
                for (j, deg) in bundle.summand_degrees(k, s).into_iter().enumerate() {
                    let area = sides[2 * j] * sides[2 * j + 1];
                    best = best.min(4.0 * PI * deg as f64 / area);
                }
            }
            Ok(best)
        }
        ModelKind::RoundSphere { .. } => {
            let oracle = SphereOracle::new(model, bundle, k)?;
            Ok(oracle.dirac_square_levels(2).iter().find(|l| l.value > 0.0).map(|l| l.value).unwrap_or(f64::INFINITY))
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GapReport {
    pub k: u32,
    pub lambda: f64,
    pub threshold: f64,
    pub kernel_dim: usize,
    /// Smallest eigenvalue of `D_k²` above the kernel threshold.
    pub first_nonzero: f64,
    /// `max(0, 2kλ - first_nonzero)`.
    pub c_k: f64,
    pub odd_minimum: f64,
    pub continuum_level: f64,
    /// `first_nonzero / continuum_level - 1`.
    pub cluster_error: f64,
    /// `first_nonzero / 2kλ`.
    pub gap_ratio: f64,
    /// `k = 0` is outside the asymptotic statement.
    pub excluded: bool,
}

/// Gap data at one `k` from the low spectrum of `D_k²`.
pub fn gap_report(k: u32, lambda: f64, spectrum: &EigenResult, odd_minimum: f64, continuum_level: f64) -> Result<GapReport> {
    let scale = 2.0 * k as f64 * lambda;
    let threshold = KERNEL_THRESHOLD * if k == 0 { 1.0 } else { scale };
    let guard = KERNEL_SEPARATION * threshold;
    let kernel_dim = spectrum.eigenvalues.iter().take_while(|&&v| v < threshold).count();
    let needed = kernel_dim + 4;
    if spectrum.eigenvalues.len() < needed && !spectrum.complete {
        return Err(invalid(format!(
            "gap report at k={k} needs {needed} eigenvalues, got {}",
            spectrum.eigenvalues.len()
        )));
    }
    let worst = spectrum.residuals.iter().take(needed).cloned().fold(0.0, f64::max);
    if worst > GAP_RESIDUAL {
        return Err(invalid(format!("gap report at k={k}: residual {worst:e} above {GAP_RESIDUAL:e}")));
    }
    let first_nonzero = spectrum.eigenvalues.get(kernel_dim).cloned().unwrap_or(f64::INFINITY);
    if first_nonzero < guard {
        return Err(Error::IndeterminateSeparation { k, value: first_nonzero, threshold, guard });
    }
    Ok(GapReport {
        k,
        lambda,
        threshold,
        kernel_dim,
        first_nonzero,
        c_k: (scale - first_nonzero).max(0.0),
        odd_minimum,
        continuum_level,
        cluster_error: first_nonzero / continuum_level - 1.0,
        gap_ratio: if k == 0 { f64::NAN } else { first_nonzero / scale },
        excluded: k == 0,
    })
}

/// Least-squares slope of `y` against `x`.
pub fn linear_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    Some(sxy / sxx)
}

/// Slope of `log y` against `log x`; `None` unless every value is positive.
pub fn fit_log_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    if x.iter().chain(y).any(|&v| !(v > 0.0)) {
        return None;
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_slope(&lx, &ly)
}

#[derive(Clone, Debug, Serialize)]
pub struct KernelMatch {
    pub k: u32,
    pub observed: usize,
    pub predicted: i64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GapVerdict {
    pub reports: Vec<GapReport>,
    pub max_c: f64,
    pub c_slope: f64,
    pub c_slope_limit: f64,
    pub kernel: Vec<KernelMatch>,
    pub bounded: bool,
    pub kernel_ok: bool,
    pub odd_ok: bool,
    pub cluster_ok: bool,
    pub pass: bool,
}

/// Verdict over a `k` sweep. Excluded reports (`k = 0`) are carried along but
/// do not enter any condition.
pub fn verify_gap(reports: Vec<GapReport>, predictions: &[IndexPrediction]) -> Result<GapVerdict> {
    let active: Vec<&GapReport> = reports.iter().filter(|r| !r.excluded).collect();
    if active.is_empty() {
        return Err(invalid("gap verdict needs at least one k >= 1"));
    }
    let lambda = active[0].lambda;
    let max_c = active.iter().map(|r| r.c_k).fold(0.0, f64::max);
    let ks: Vec<f64> = active.iter().map(|r| r.k as f64).collect();
    let cs: Vec<f64> = active.iter().map(|r| r.c_k).collect();
    let c_slope = linear_slope(&ks, &cs).unwrap_or(0.0);
    let c_slope_limit = C_SLOPE_FACTOR * 2.0 * lambda;
    let mut kernel = Vec::new();
    for r in &active {
        let p = predictions
            .iter()
            .find(|p| p.k == r.k)
            .ok_or_else(|| invalid(format!("no index prediction for k={}", r.k)))?;
        kernel.push(KernelMatch { k: r.k, observed: r.kernel_dim, predicted: p.predicted });
    }
    let bounded = c_slope <= c_slope_limit;
    let kernel_ok = kernel.iter().all(|m| m.observed as i64 == m.predicted);
    let odd_ok = active.iter().all(|r| r.odd_minimum >= 2.0 * r.k as f64 * lambda - max_c);
    let cluster_ok = active.iter().all(|r| r.cluster_error.abs() <= CLUSTER_TOLERANCE);
    Ok(GapVerdict {
        pass: bounded && kernel_ok && odd_ok && cluster_ok,
        reports,
        max_c,
        c_slope,
        c_slope_limit,
        kernel,
        bounded,
        kernel_ok,
        odd_ok,
        cluster_ok,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ClusterEntry {
    pub k: u32,
    /// Eigenvalues in `(-a, a)`.
    pub count: usize,
    pub predicted: i64,
    pub lowest: f64,
    /// Smallest eigenvalue at or above `a`.
    pub next: f64,
    pub gap_top: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ClusterReport {
    pub a: f64,
    pub b: f64,
    pub entries: Vec<ClusterEntry>,
    pub counts_ok: bool,
    pub bounded_below: bool,
    pub window_open: bool,
    pub pass: bool,
}

/// Clustering of `Δ_k - kτ` over a sweep of `(k, low spectrum)`.
///
/// `a` is half the first eigenvalue at or above `kλ` at the smallest `k`,
/// then held fixed. `b` is the smallest value making `[a, 2kλ - b]` free of
/// eigenvalues at every `k`. Each spectrum must reach past `2kλ`.
pub fn schrodinger_clustering(lambda: f64, spectra: &[(u32, EigenResult)], predictions: &[IndexPrediction]) -> Result<ClusterReport> {
    let mut sorted: Vec<&(u32, EigenResult)> = spectra.iter().filter(|(k, _)| *k > 0).collect();
    sorted.sort_by_key(|(k, _)| *k);
    let (k0, first) = sorted.first().ok_or_else(|| invalid("clustering needs at least one k >= 1"))?;
    let half_scale = *k0 as f64 * lambda;
    let anchor = first
        .eigenvalues
        .iter()
        .cloned()
        .find(|&v| v >= half_scale)
        .ok_or_else(|| invalid(format!("spectrum at k={k0} does not reach {half_scale}")))?;
    let a = 0.5 * anchor;
    let mut b: f64 = 0.0;
    let mut entries = Vec::new();
    for (k, spec) in &sorted {
        let scale = 2.0 * *k as f64 * lambda;
        let next = spec
            .eigenvalues
            .iter()
            .cloned()
            .find(|&v| v >= a)
            .ok_or_else(|| invalid(format!("spectrum at k={k} ends below a={a}")))?;
        if spec.largest() < scale && !spec.complete {
            return Err(Error::WindowBeyondSpectrum { lo: a, hi: scale, computed: spec.largest() });
        }
        b = b.max(scale - next);
        let count = count_in_window(spec, -a, a)?;
        let predicted = predictions
            .iter()
            .find(|p| p.k == *k)
            .ok_or_else(|| invalid(format!("no index prediction for k={k}")))?
            .predicted;
        entries.push(ClusterEntry {
            k: *k,
            count,
            predicted,
            lowest: spec.eigenvalues.first().cloned().unwrap_or(f64::NAN),
            next,
            gap_top: 0.0,
        });
    }
    for e in entries.iter_mut() {
        e.gap_top = 2.0 * e.k as f64 * lambda - b;
    }
    let counts_ok = entries.iter().all(|e| e.count as i64 == e.predicted);
    let bounded_below = entries.iter().all(|e| e.lowest > -a);
    let window_open = entries.iter().all(|e| e.gap_top > a);
    Ok(ClusterReport { a, b, counts_ok, bounded_below, window_open, pass: counts_ok && bounded_below && window_open, entries })
}

/// Minimax spot check: for random unit `u` orthogonal to `kernel`, the largest
/// Rayleigh quotient of `op` on `span(kernel, u)`. Returns the minimum over samples.
pub fn minimax_spot_check(op: &dyn LinearOperator, kernel: &[Vec<C64>], samples: usize, seed: u64) -> Result<f64> {
    let n = op.dim();
    let mut basis: Vec<Vec<C64>> = Vec::new();
    for v in kernel {
        if v.len() != n {
            return Err(Error::Dimension(format!("kernel vector of length {} for dimension {n}", v.len())));
        }
        let mut w = v.clone();
        for _ in 0..2 {
            for b in &basis {
                let c = linalg::dot(b, &w);
                linalg::axpy(-c, b, &mut w);
            }
        }
        if linalg::normalize(&mut w) > 1e-10 {
            basis.push(w);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = f64::INFINITY;
    let images: Vec<Vec<C64>> = basis.iter().map(|b| op.apply_vec(b)).collect();
    for _ in 0..samples.max(1) {
        let mut u = random_vector(&mut rng, n);
        for _ in 0..2 {
            for b in &basis {
                let c = linalg::dot(b, &u);
                linalg::axpy(-c, b, &mut u);
            }
        }
        linalg::normalize(&mut u);
        let au = op.apply_vec(&u);
        let m = basis.len() + 1;
        let vecs: Vec<&Vec<C64>> = basis.iter().chain(std::iter::once(&u)).collect();
        let imgs: Vec<&Vec<C64>> = images.iter().chain(std::iter::once(&au)).collect();
        let g = CMatrix::from_fn(m, m, |i, j| linalg::dot(vecs[i], imgs[j]));
        let sym = CMatrix::from_fn(m, m, |i, j| 0.5 * (g.get(i, j) + g.get(j, i).conj()));
        let top = HermitianReduction::new(sym)?.eigenvalues()?.last().cloned().unwrap_or(f64::NEG_INFINITY);
        worst = worst.min(top);
    }
    Ok(worst)
}

/// `‖s'‖ / ‖s_0‖` for each kernel vector, with `s_0` the degree-0 part.
pub fn kernel_ratios(k: u32, layout: &Layout, vectors: &[Vec<C64>]) -> Result<Vec<f64>> {
    vectors
        .iter()
        .enumerate()
        .map(|(index, v)| {
            let (zero, positive) = crate::operators::degree_split(layout, v);
            let total = zero.hypot(positive);
            if zero <= DEGREE_ZERO_FLOOR * total.max(f64::MIN_POSITIVE) {
                return Err(Error::VanishingDegreeZero { k, index, norm: zero });
            }
            Ok(positive / zero)
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayPoint {
    pub k: u32,
    pub max_ratio: f64,
    pub scaled: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DecayReport {
    pub points: Vec<DecayPoint>,
    /// Fitted slope of `log ρ_k` against `log k`, absent in the vanishing regime.
    pub slope: Option<f64>,
    pub max_scaled: f64,
    pub vanishing: bool,
    pub pass: bool,
}

/// Decay verdict from per-`k` ratios. `ρ_k` is the worst ratio over the kernel.
///
/// PASS iff `max ρ_k √k ≤ DECAY_BOUND` and either every `ρ_k ≤ DECAY_FLOOR`
/// (vanishing regime, no exponent to fit) or the fitted slope is at most `DECAY_SLOPE`.
pub fn kernel_component_decay(samples: &[(u32, Vec<f64>)]) -> Result<DecayReport> {
    let mut points: Vec<DecayPoint> = samples
        .iter()
        .filter(|(k, r)| *k > 0 && !r.is_empty())
        .map(|(k, r)| {
            let max_ratio = r.iter().cloned().fold(0.0, f64::max);
            DecayPoint { k: *k, max_ratio, scaled: max_ratio * (*k as f64).sqrt() }
        })
        .collect();
    if points.is_empty() {
        return Err(invalid("decay fit needs kernel vectors at some k >= 1"));
    }
    points.sort_by_key(|p| p.k);
    let max_scaled = points.iter().map(|p| p.scaled).fold(0.0, f64::max);
    let vanishing = points.iter().all(|p| p.max_ratio <= DECAY_FLOOR);
    let ks: Vec<f64> = points.iter().map(|p| p.k as f64).collect();
    let rs: Vec<f64> = points.iter().map(|p| p.max_ratio).collect();
    let slope = if vanishing { None } else { fit_log_slope(&ks, &rs) };
    let bounded = max_scaled <= DECAY_BOUND;
    let pass = bounded && (vanishing || slope.map_or(false, |s| s <= DECAY_SLOPE));
    Ok(DecayReport { points, slope, max_scaled, vanishing, pass })
}

/// Fitter self-test: sections with `‖s'‖ = k^{-1/2} ‖s_0‖` on a small layout for
/// `k = 1..=10`; returns the fitted slope.
pub fn decay_self_test(seed: u64) -> Result<f64> {
    let layout = Layout { sites: 16, rank_e: 1, fiber_degrees: vec![0, 1, 1, 2] };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::new();
    for k in 1..=10u32 {
        let mut v = random_vector(&mut rng, layout.dim());
        let (zero, positive) = crate::operators::degree_split(&layout, &v);
        let target = zero / (k as f64).sqrt();
        for (i, z) in v.iter_mut().enumerate() {
            if layout.degree(i) > 0 {
                *z *= target / positive;
            }
        }
        samples.push((k, kernel_ratios(k, &layout, &[v])?));
    }
    let ks: Vec<f64> = samples.iter().map(|s| s.0 as f64).collect();
    let rs: Vec<f64> = samples.iter().map(|s| s.1[0]).collect();
    fit_log_slope(&ks, &rs).ok_or_else(|| invalid("self-test produced a zero ratio"))
}

/// Eigenvalue with multiplicity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Level {
    pub value: f64,
    pub multiplicity: usize,
}

fn merge_levels(mut levels: Vec<Level>, count: usize) -> Vec<Level> {
    levels.sort_by(|a, b| a.value.total_cmp(&b.value));
    let mut out: Vec<Level> = Vec::new();
    for l in levels {
        match out.last_mut() {
            Some(last) if (last.value - l.value).abs() <= 1e-12 * l.value.abs().max(1.0) => last.multiplicity += l.multiplicity,
            _ => out.push(l),
        }
    }
    out.truncate(count);
    out
}

/// Monopole harmonics on the round sphere.
///
/// The summand `L^k ⊗ E_s` of degree `t` carries charge `q = t/2`; the
/// Bochner Laplacian has levels `(l(l+1) - q²)/r²`, `l = q + m`, with
/// multiplicity `2l + 1`, and `D²` on even forms has `m(t + m + 1)/r²` with the
/// same multiplicities. Odd forms carry the same nonzero levels.
#[derive(Clone, Debug, Serialize)]
pub struct SphereOracle {
    pub radius: f64,
    pub flux: i64,
    pub k: u32,
    pub rank_e: usize,
    pub chern_e: i64,
    /// Charge of the untwisted summand `L^k`.
    pub charge: f64,
    pub tau: f64,
    pub lambda: f64,
    pub scalar_curvature: f64,
}

impl SphereOracle {
    pub fn new(model: &ModelManifold, bundle: &BundleSpec, k: u32) -> Result<Self> {
        let radius = match model.kind {
            ModelKind::RoundSphere { radius } => radius,
            _ => return Err(invalid("the monopole oracle needs the sphere model")),
        };
        check_bundle(model, bundle)?;
        let flux = bundle.chern[0];
        for s in 0..bundle.rank_e {
            if bundle.summand_degrees(k, s)[0] < 0 {
                return Err(invalid("monopole oracle needs summands of nonnegative degree"));
            }
        }
        Ok(SphereOracle {
            radius,
            flux,
            k,
            rank_e: bundle.rank_e,
            chern_e: bundle.chern_e[0],
            charge: 0.5 * k as f64 * flux as f64,
            tau: model.tau[0],
            lambda: model.lambda,
            scalar_curvature: model.scalar_curvature,
        })
    }

    fn degrees(&self) -> Vec<i64> {
        (0..self.rank_e).map(|s| self.k as i64 * self.flux + if s == 0 { self.chern_e } else { 0 }).collect()
    }

    fn r2(&self) -> f64 {
        self.radius * self.radius
    }

    /// Lowest `count` distinct levels of the Bochner Laplacian on `L^k ⊗ E`.
    pub fn laplacian_levels(&self, count: usize) -> Vec<Level> {
        let mut all = Vec::new();
        for t in self.degrees() {
            let q = 0.5 * t as f64;
            for m in 0..count {
                let l = q + m as f64;
                all.push(Level { value: (l * (l + 1.0) - q * q) / self.r2(), multiplicity: (2.0 * l + 1.0) as usize });
            }
        }
        merge_levels(all, count)
    }

    /// Levels of `Δ_k - kτ`.
    pub fn schrodinger_levels(&self, count: usize) -> Vec<Level> {
        let shift = self.k as f64 * self.tau;
        self.laplacian_levels(count).into_iter().map(|l| Level { value: l.value - shift, ..l }).collect()
    }

    /// Levels of `D_k²` on even forms (degree 0).
    pub fn dirac_square_levels(&self, count: usize) -> Vec<Level> {
        let mut all = Vec::new();
        for t in self.degrees() {
            for m in 0..count {
                let mf = m as f64;
                all.push(Level { value: mf * (t as f64 + mf + 1.0) / self.r2(), multiplicity: (t + 2 * m as i64 + 1) as usize });
            }
        }
        merge_levels(all, count)
    }

    /// Levels of `D_k²` on odd forms: the nonzero even levels.
    pub fn odd_dirac_square_levels(&self, count: usize) -> Vec<Level> {
        self.dirac_square_levels(count + 1).into_iter().filter(|l| l.value > 0.0).take(count).collect()
    }

    pub fn kernel_dim(&self) -> usize {
        self.dirac_square_levels(1).iter().filter(|l| l.value == 0.0).map(|l| l.multiplicity).sum()
    }

    /// Lowest eigenvalue of `Δ_k - kτ + K/4 + c(R)` on degree 0 for each summand;
    /// the Lichnerowicz formula makes it vanish (it is `2 ∂̄*∂̄` there).
    pub fn degree_zero_lichnerowicz_floor(&self) -> Result<Vec<f64>> {
        let algebra = clifford_generators(1)?;
        let mut out = Vec::new();
        for t in self.degrees() {
            let e = t - self.k as i64 * self.flux;
            let cr = cr_endomorphism(&algebra, &CurvatureData::round_sphere(self.radius, e))?;
            let q = 0.5 * t as f64;
            let lowest = q / self.r2() - self.k as f64 * self.tau;
            out.push(lowest + self.scalar_curvature / 4.0 + cr.get(0, 0).re);
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SphereEntry {
    pub k: u32,
    pub d_k: usize,
    pub predicted: i64,
    pub kernel_dim: usize,
    pub clusters: Vec<Level>,
    pub next_cluster: f64,
    pub gap_top: f64,
    pub lichnerowicz_floor: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SphereReport {
    pub a: f64,
    pub b: f64,
    pub lambda: f64,
    pub entries: Vec<SphereEntry>,
    pub pass: bool,
}

/// Closed-form clustering report on the sphere over `ks`.
pub fn sphere_report(model: &ModelManifold, bundle: &BundleSpec, ks: &[u32]) -> Result<SphereReport> {
    let mut ks: Vec<u32> = ks.iter().cloned().filter(|&k| k > 0).collect();
    ks.sort_unstable();
    let k0 = *ks.first().ok_or_else(|| invalid("sphere report needs some k >= 1"))?;
    let first = SphereOracle::new(model, bundle, k0)?;
    let anchor = first
        .schrodinger_levels(4)
        .iter()
        .map(|l| l.value)
        .find(|&v| v >= k0 as f64 * model.lambda)
        .ok_or_else(|| invalid("no sphere level above the half gap"))?;
    let a = 0.5 * anchor;
    let mut entries = Vec::new();
    let mut b: f64 = 0.0;
    for &k in &ks {
        let oracle = SphereOracle::new(model, bundle, k)?;
        let clusters = oracle.schrodinger_levels(4);
        let d_k = clusters.iter().filter(|l| l.value > -a && l.value < a).map(|l| l.multiplicity).sum();
        let next_cluster = clusters.iter().map(|l| l.value).find(|&v| v >= a).unwrap_or(f64::INFINITY);
        b = b.max(2.0 * k as f64 * model.lambda - next_cluster);
        entries.push(SphereEntry {
            k,
            d_k,
            predicted: index_prediction(model, bundle, k)?.predicted,
            kernel_dim: oracle.kernel_dim(),
            clusters,
            next_cluster,
            gap_top: 0.0,
            lichnerowicz_floor: oracle.degree_zero_lichnerowicz_floor()?,
        });
    }
    for e in entries.iter_mut() {
        e.gap_top = 2.0 * e.k as f64 * model.lambda - b;
    }
    let pass = entries.iter().all(|e| {
        e.d_k as i64 == e.predicted
            && e.kernel_dim == e.d_k
            && e.clusters.iter().all(|l| l.value > -a)
            && e.lichnerowicz_floor.iter().all(|v| v.abs() < 1e-12)
    });
    Ok(SphereReport { a, b, lambda: model.lambda, entries, pass })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolve::Backend;
    use crate::geometry::{build_sphere_model, build_torus_model};

    fn exact(values: Vec<f64>) -> EigenResult {
        let n = values.len();
        EigenResult {
            eigenvalues: values,
            residuals: vec![1e-13; n],
            vectors: None,
            iterations: 1,
            matvecs: 0,
            backend: Backend::Dense,
            complete: false,
        }
    }

    #[test]
    fn torus_index_formulas() {
        let m = build_torus_model(1, &[1.0, 1.0], 8, &[1.0]).unwrap();
        let p = index_prediction(&m, &BundleSpec::line(vec![1]), 5).unwrap();
        assert_eq!(p.predicted, 5);
        assert_eq!(p.leading, 5.0);
        let p = index_prediction(&m, &BundleSpec::new(vec![1], 2, vec![0]).unwrap(), 3).unwrap();
        assert_eq!(p.predicted, 6);
        let p = index_prediction(&m, &BundleSpec::new(vec![1], 1, vec![1]).unwrap(), 6).unwrap();
        assert_eq!(p.predicted, 7);
        assert!((p.leading_ratio(7) - 7.0 / 6.0).abs() < 1e-15);
        let m4 = build_torus_model(2, &[1.0; 4], 4, &[1.0, 2.0]).unwrap();
        let p = index_prediction(&m4, &BundleSpec::line(vec![1, 2]), 3).unwrap();
        assert_eq!(p.predicted, 18);
        assert_eq!(p.leading, 18.0);
        let p = index_prediction(&m4, &BundleSpec::new(vec![1, 2], 2, vec![1, 0]).unwrap(), 1).unwrap();
        assert_eq!(p.predicted, 2 * 2 + 2);
        assert!(index_prediction(&m, &BundleSpec::line(vec![2]), 1).is_err());
    }

    #[test]
    fn sphere_index_and_levels() {
        let s = build_sphere_model(1.0, 1.0).unwrap();
        let b = BundleSpec::line(vec![1]);
        assert_eq!(index_prediction(&s, &b, 5).unwrap().predicted, 6);
        let o = SphereOracle::new(&s, &b, 4).unwrap();
        assert_eq!(o.charge, 2.0);
        let lv = o.schrodinger_levels(3);
        assert_eq!(lv[0], Level { value: 0.0, multiplicity: 5 });
        assert_eq!(lv[1], Level { value: 6.0, multiplicity: 7 });
        assert_eq!(lv[2], Level { value: 14.0, multiplicity: 9 });
        let d = o.dirac_square_levels(3);
        assert_eq!(d.iter().map(|l| l.value).collect::<Vec<_>>(), vec![0.0, 6.0, 14.0]);
        assert_eq!(o.kernel_dim(), 5);
        assert_eq!(o.odd_dirac_square_levels(2)[0], Level { value: 6.0, multiplicity: 7 });
        for v in o.degree_zero_lichnerowicz_floor().unwrap() {
            assert!(v.abs() < 1e-14);
        }
    }

    #[test]
    fn twisted_sphere_floor_vanishes() {
        let s = build_sphere_model(2.0, 1.0).unwrap();
        let b = BundleSpec::new(vec![1], 2, vec![3]).unwrap();
        let o = SphereOracle::new(&s, &b, 2).unwrap();
        assert_eq!(o.kernel_dim(), (2 + 3 + 1) + (2 + 1));
        for v in o.degree_zero_lichnerowicz_floor().unwrap() {
            assert!(v.abs() < 1e-14, "{v}");
        }
    }

    #[test]
    fn sphere_report_counts_linear_in_k() {
        let s = build_sphere_model(1.0, 1.0).unwrap();
        let r = sphere_report(&s, &BundleSpec::line(vec![1]), &(1..=10).collect::<Vec<_>>()).unwrap();
        assert!(r.pass);
        assert_eq!(r.a, 1.5);
        for e in &r.entries {
            assert_eq!(e.d_k, e.k as usize + 1);
        }
        let e4 = &r.entries[3];
        assert_eq!(e4.next_cluster, 6.0);
    }

    #[test]
    fn gap_report_and_separation_guard() {
        let lambda = 2.0 * PI;
        let spec = exact(vec![1e-9, 2e-9, 24.0, 24.5, 25.0, 26.0, 27.0]);
        let r = gap_report(2, lambda, &spec, 24.2, 8.0 * PI).unwrap();
        assert_eq!(r.kernel_dim, 2);
        assert!((r.c_k - (8.0 * PI - 24.0)).abs() < 1e-12);
        let bad = exact(vec![1e-9, 1e-3, 24.0, 24.5, 25.0, 26.0]);
        assert!(matches!(gap_report(2, lambda, &bad, 24.0, 8.0 * PI), Err(Error::IndeterminateSeparation { .. })));
        let r0 = gap_report(0, lambda, &exact(vec![0.0, 0.0, 3.0, 4.0, 5.0, 6.0]), 3.0, 1.0).unwrap();
        assert!(r0.excluded);
    }

    #[test]
    fn gap_verdict_flags_growth() {
        let lambda = 2.0 * PI;
        let m = build_torus_model(1, &[1.0, 1.0], 32, &[1.0]).unwrap();
        let b = BundleSpec::line(vec![1]);
        let mut reports = Vec::new();
        let mut preds = Vec::new();
        for k in 1..=4u32 {
            let level = 4.0 * PI * k as f64;
            let mut v = vec![0.0; k as usize];
            v.extend([level - 0.1 * k as f64, level, level + 1.0, level + 2.0]);
            reports.push(gap_report(k, lambda, &exact(v), level, level).unwrap());
            preds.push(index_prediction(&m, &b, k).unwrap());
        }
        let verdict = verify_gap(reports.clone(), &preds).unwrap();
        assert!(verdict.pass, "{verdict:?}");
        let mut grown = reports;
        for r in grown.iter_mut() {
            r.c_k = r.k as f64 * 2.0;
        }
        assert!(!verify_gap(grown, &preds).unwrap().bounded);
    }

    #[test]
    fn clustering_picks_a_and_b() {
        let lambda = 2.0 * PI;
        let m = build_torus_model(1, &[1.0, 1.0], 32, &[1.0]).unwrap();
        let b = BundleSpec::line(vec![1]);
        let spectra: Vec<(u32, EigenResult)> = (1..=3u32)
            .map(|k| {
                let mut v = vec![-0.01 * k as f64; k as usize];
                let s = 4.0 * PI * k as f64;
                v.extend([s - 0.2 * k as f64, s + 1.0, 3.0 * s]);
                (k, exact(v))
            })
            .collect();
        let preds: Vec<_> = (1..=3).map(|k| index_prediction(&m, &b, k).unwrap()).collect();
        let r = schrodinger_clustering(lambda, &spectra, &preds).unwrap();
        assert!(r.pass);
        assert!((r.a - 0.5 * (4.0 * PI - 0.2)).abs() < 1e-12);
        assert!((r.b - 0.6).abs() < 1e-12);
    }

    #[test]
    fn decay_verdicts() {
        let slope = decay_self_test(1).unwrap();
        assert!((slope + 0.5).abs() < 1e-10, "{slope}");
        let r = kernel_component_decay(&[(1, vec![1e-14]), (2, vec![0.0, 1e-13])]).unwrap();
        assert!(r.vanishing && r.pass && r.slope.is_none());
        let r = kernel_component_decay(&[(1, vec![0.5]), (4, vec![0.5])]).unwrap();
        assert!(!r.pass);
        let layout = Layout { sites: 1, rank_e: 1, fiber_degrees: vec![0, 1] };
        let v = vec![C64::new(0.0, 0.0), C64::new(1.0, 0.0)];
        assert!(matches!(kernel_ratios(3, &layout, &[v]), Err(Error::VanishingDegreeZero { k: 3, .. })));
    }

    #[test]
    fn minimax_on_diagonal() {
        use crate::operators::DiagonalOperator;
        let op = DiagonalOperator(vec![0.0, 0.0, 5.0, 6.0, 7.0]);
        let e = |i: usize| {
            let mut v = vec![C64::new(0.0, 0.0); 5];
            v[i] = C64::new(1.0, 0.0);
            v
        };
        let m = minimax_spot_check(&op, &[e(0), e(1)], 10, 2).unwrap();
        assert!(m >= 5.0 - 1e-12);
    }

    #[test]
    fn flux_cap() {
        assert!(within_flux_cap(6, &[1], 32));
        assert!(within_flux_cap(4, &[1], 16));
        assert!(!within_flux_cap(5, &[1], 16));
    }
}
