//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use spinc_core::analysis::{
    decay_self_test, gap_report, index_prediction, schrodinger_clustering, BundleSpec, IndexPrediction, SphereOracle,
};
use spinc_core::clifford::clifford_generators;
use spinc_core::config::parse_config;
use spinc_core::eigensolve::{
    count_in_window, dense_lowest, dense_spectrum, lanczos_smallest, smallest_of_square, EigenRequest, EigenResult,
};
use spinc_core::gauge::{assign_line_bundle, GaugeField};
use spinc_core::geometry::{build_sphere_model, build_torus_model, ModelManifold};
use spinc_core::linalg::{self, C64};
use spinc_core::operators::{
    covariant_laplacian, dirac_operator_with, random_vector, schrodinger_operator, LinearOperator, SparseHermitianOperator,
    WilsonParams,
};
use spinc_core::runner::{run, RunOutput, Status};

const LANCZOS_DENSE_TOL: f64 = 1e-8;
const LEADING_RATIO_TOL: f64 = 0.10;
const SELF_TEST_SLOPE: f64 = -0.5;
const SELF_TEST_TOL: f64 = 0.05;
const RANDOM_CONFIGS: usize = 50;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn torus_config(resolution: usize, k_max: u32, suites: &str, extra: &str) -> String {
    format!(
        "[model]\nkind = torus\nn = 1\nsides = 1, 1\nresolution = {resolution}\na = 1\n\
         [bundle]\nchern = 1\n\
         [run]\nk_min = 1\nk_max = {k_max}\nsuite = {suites}\nseed = 7\n\
         [solver]\ntolerance = 1e-10\n{extra}"
    )
}

fn run_text(text: &str) -> RunOutput {
    let cfg = parse_config(text).expect("acceptance config");
    run(&cfg).expect("run")
}

fn pass_of(report: &Value, suite: &str) -> bool {
    report["suites"][suite]["pass"] == Value::Bool(true)
}

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn lichnerowicz() -> Outcome {
    let t = Instant::now();
    let out = run_text(&torus_config(16, 4, "lichnerowicz", ""));
    let elapsed = t.elapsed();
    let worst = out.report["suites"]["lichnerowicz"]["max_residual"].as_f64().unwrap_or(f64::NAN);
    let pass = pass_of(&out.report, "lichnerowicz") && worst <= 1e-10 && elapsed < Duration::from_secs(10);
    outcome(pass, format!("N=16 k=1..4, 100 vectors: max residual {worst:.2e} (limit 1e-10), {:.1} s (limit 10 s)", secs(elapsed)))
}

fn gap(out: &RunOutput, elapsed: Duration) -> Outcome {
    let g = &out.report["suites"]["gap"];
    if g.get("error").is_some() {
        return outcome(false, format!("error: {}", g["error"]));
    }
    let counts: Vec<String> =
        g["kernel"].as_array().into_iter().flatten().map(|m| format!("{}/{}", m["observed"], m["predicted"])).collect();
    let cluster: f64 = g["reports"]
        .as_array()
        .into_iter()
        .flatten()
        .filter_map(|r| r["cluster_error"].as_f64())
        .fold(0.0, |m, e| m.max(e.abs()));
    let pass = pass_of(&out.report, "gap") && elapsed < Duration::from_secs(300);
    outcome(
        pass,
        format!(
            "N=32 k=1..6: kernel observed/predicted [{}], max C_fit {:.3}, C slope {:.4} (limit {:.4}), odd sector ok {}, \
             max cluster error {:.2}% (limit 5%), sweep {:.0} s (limit 300 s)",
            counts.join(" "),
            g["max_c"].as_f64().unwrap_or(f64::NAN),
            g["c_slope"].as_f64().unwrap_or(f64::NAN),
            g["c_slope_limit"].as_f64().unwrap_or(f64::NAN),
            g["odd_ok"],
            100.0 * cluster,
            secs(elapsed)
        ),
    )
}

/// Lanczos and dense window counts of `Δ_k - kτ` at N=16 for k ≤ 3.
fn schrodinger_dense_oracle() -> Result<String, String> {
    let model = build_torus_model(1, &[1.0, 1.0], 16, &[1.0]).map_err(|e| e.to_string())?;
    let bundle = BundleSpec::line(vec![1]);
    let mut dense = Vec::new();
    let mut iterative = Vec::new();
    let mut preds = Vec::new();
    for k in 1..=3u32 {
        let op = schrodinger_operator(&model, &assign_line_bundle(&model, k, &[1]).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
        dense.push((k, dense_spectrum(&op).map_err(|e| e.to_string())?));
        let req = EigenRequest::new(k as usize + 6).tolerance(1e-10).seed(k as u64);
        iterative.push(lanczos_smallest(&op, &req).map_err(|e| e.to_string())?);
        preds.push(index_prediction(&model, &bundle, k).map_err(|e| e.to_string())?);
    }
    let clusters = schrodinger_clustering(model.lambda, &dense, &preds).map_err(|e| e.to_string())?;
    let a = clusters.a;
    let mut notes = Vec::new();
    for ((k, d), l) in dense.iter().zip(&iterative) {
        let nd = count_in_window(d, -a, a).map_err(|e| e.to_string())?;
        let nl = count_in_window(l, -a, a).map_err(|e| e.to_string())?;
        if nd != *k as usize || nl != nd {
            return Err(format!("k={k}: dense {nd}, lanczos {nl}, expected {k}"));
        }
        notes.push(format!("k={k}:{nd}"));
    }
    if !clusters.pass {
        return Err("dense clustering verdict failed".into());
    }
    Ok(format!("N=16 dense=lanczos [{}] with a={a:.3}", notes.join(" ")))
}

fn schrodinger(out: &RunOutput) -> Outcome {
    let s = &out.report["suites"]["schrodinger"];
    if s.get("error").is_some() {
        return outcome(false, format!("error: {}", s["error"]));
    }
    let counts: Vec<String> = s["entries"]
        .as_array()
        .into_iter()
        .flatten()
        .map(|e| format!("{}/{}", e["count"], e["predicted"]))
        .collect();
    let oracle = schrodinger_dense_oracle();
    let pass = pass_of(&out.report, "schrodinger") && oracle.is_ok();
    outcome(
        pass,
        format!(
            "N=32 k=1..6: a={:.3}, b={:.3}, counts [{}], window open {}; {}",
            s["a"].as_f64().unwrap_or(f64::NAN),
            s["b"].as_f64().unwrap_or(f64::NAN),
            counts.join(" "),
            s["window_open"],
            oracle.unwrap_or_else(|e| format!("dense oracle FAILED: {e}"))
        ),
    )
}

/// Kernel dimension of `D_k²` on a lattice bundle, values only.
fn lattice_kernel(model: &ModelManifold, bundle: &BundleSpec, k: u32) -> Result<usize, String> {
    let gauge = assign_line_bundle(model, k, &bundle.chern)
        .and_then(|g| g.with_auxiliary_bundle(bundle.rank_e, &bundle.chern_e))
        .map_err(|e| e.to_string())?;
    let alg = clifford_generators(model.n).and_then(|a| a.with_symplectic(&model.j0_eigenvalues)).map_err(|e| e.to_string())?;
    let h = dirac_operator_with(model, &gauge, &alg, Some(WilsonParams::default())).map_err(|e| e.to_string())?;
    let predicted = index_prediction(model, bundle, k).map_err(|e| e.to_string())?.predicted.max(0) as usize;
    let spec = smallest_of_square(&h, &EigenRequest::new(predicted + 6).tolerance(1e-10), None).map_err(|e| e.to_string())?;
    let level = spinc_core::analysis::continuum_first_level(model, bundle, k).map_err(|e| e.to_string())?;
    gap_report(k, model.lambda, &spec, f64::NAN, level).map(|r| r.kernel_dim).map_err(|e| e.to_string())
}

struct IndexCase {
    label: &'static str,
    exact: bool,
    ratio: f64,
    counts: Vec<usize>,
}

fn index_case(label: &'static str, model: &ModelManifold, bundle: &BundleSpec, observed: &[(u32, usize)]) -> IndexCase {
    let preds: Vec<IndexPrediction> = observed.iter().map(|(k, _)| index_prediction(model, bundle, *k).unwrap()).collect();
    let exact = preds.iter().zip(observed).all(|(p, (_, d))| p.predicted == *d as i64);
    let last = preds.last().unwrap();
    IndexCase { label, exact, ratio: last.leading_ratio(observed.last().unwrap().1), counts: observed.iter().map(|o| o.1).collect() }
}

fn index_law(out: &RunOutput) -> Outcome {
    let mut cases = Vec::new();
    let ks: Vec<u32> = (1..=6).collect();

    let base = build_torus_model(1, &[1.0, 1.0], 32, &[1.0]).unwrap();
    let observed: Vec<(u32, usize)> = out.report["results"]
        .as_array()
        .into_iter()
        .flatten()
        .map(|r| (r["k"].as_u64().unwrap_or(0) as u32, r["d_k_observed"].as_u64().unwrap_or(0) as usize))
        .collect();
    cases.push(index_case("(1,0) N=32", &base, &BundleSpec::line(vec![1]), &observed));

    // rank-2 bundles at the largest resolution whose operator still fits the dense path
    let model = build_torus_model(1, &[1.0, 1.0], 22, &[1.0]).unwrap();
    for (label, rank, chern_e) in [("(2,0) N=22", 2usize, 0i64), ("(1,1) N=22", 1, 1)] {
        let bundle = BundleSpec::new(vec![1], rank, vec![chern_e]).unwrap();
        let mut observed = Vec::new();
        for &k in &ks {
            match lattice_kernel(&model, &bundle, k) {
                Ok(d) => observed.push((k, d)),
                Err(e) => return outcome(false, format!("{label} k={k}: {e}")),
            }
        }
        cases.push(index_case(label, &model, &bundle, &observed));
    }

    let sphere = build_sphere_model(1.0, 1.0).unwrap();
    let bundle = BundleSpec::line(vec![1]);
    let observed: Vec<(u32, usize)> = ks.iter().map(|&k| (k, SphereOracle::new(&sphere, &bundle, k).unwrap().kernel_dim())).collect();
    cases.push(index_case("S2 analytic", &sphere, &bundle, &observed));

    let counts_ok = cases.iter().all(|c| c.exact);
    let ratio_ok = cases.iter().all(|c| (c.ratio - 1.0).abs() <= LEADING_RATIO_TOL);
    let detail: Vec<String> = cases
        .iter()
        .map(|c| format!("{} d_k={:?} exact={} ratio@k=6 {:.4}", c.label, c.counts, c.exact, c.ratio))
        .collect();
    outcome(
        counts_ok && ratio_ok,
        format!(
            "closed-form counts {}; leading ratio within {:.0}% {}: {}",
            if counts_ok { "match" } else { "MISMATCH" },
            100.0 * LEADING_RATIO_TOL,
            if ratio_ok { "yes" } else { "NO" },
            detail.join("; ")
        ),
    )
}

fn decay(out: &RunOutput) -> Outcome {
    let d = &out.report["suites"]["decay"];
    let slope = decay_self_test(11);
    let self_ok = matches!(slope, Ok(s) if (s - SELF_TEST_SLOPE).abs() <= SELF_TEST_TOL);
    let pass = pass_of(&out.report, "decay") && self_ok;
    outcome(
        pass,
        format!(
            "N=32 k=1..6: max rho*sqrt(k) {:.2e}, vanishing {}, fitted slope {}; self-test slope {:?} (target -0.5 +- 0.05)",
            d["max_scaled"].as_f64().unwrap_or(f64::NAN),
            d["vanishing"],
            d["slope"],
            slope.map_err(|e| e.to_string())
        ),
    )
}

fn compare(label: String, lanczos: &EigenResult, dense: &EigenResult, worst: &mut f64, failures: &mut Vec<String>) {
    let m = lanczos.eigenvalues.len().min(dense.eigenvalues.len());
    let diff = (0..m).map(|i| (lanczos.eigenvalues[i] - dense.eigenvalues[i]).abs()).fold(0.0, f64::max);
    *worst = worst.max(diff);
    if diff > LANCZOS_DENSE_TOL || m == 0 {
        failures.push(format!("{label}: {diff:.2e}"));
    }
}

#[derive(Debug)]
struct RandomSetup {
    model: ModelManifold,
    gauge: GaugeField,
    wilson: Option<WilsonParams>,
}

fn random_setup(rng: &mut ChaCha8Rng) -> RandomSetup {
    let n = if rng.gen_bool(0.8) { 1 } else { 2 };
    let resolution = if n == 1 { rng.gen_range(4..=12) } else { 4 };
    let sides: Vec<f64> = (0..2 * n).map(|_| rng.gen_range(0.5..2.0)).collect();
    let a: Vec<f64> = (0..n).map(|p| rng.gen_range(1..=3) as f64 / (sides[2 * p] * sides[2 * p + 1])).collect();
    let model = build_torus_model(n, &sides, resolution, &a).unwrap();
    let k = rng.gen_range(0..=3);
    let rank = rng.gen_range(1..=2);
    let chern_e: Vec<i64> = (0..n).map(|_| rng.gen_range(-1..=1)).collect();
    let gauge = assign_line_bundle(&model, k, &model.periods.clone()).unwrap().with_auxiliary_bundle(rank, &chern_e).unwrap();
    let wilson = rng.gen_bool(0.7).then(|| WilsonParams { strength: rng.gen_range(0.001..0.1), power: rng.gen_range(1..=3) });
    RandomSetup { model, gauge, wilson }
}

fn operators_of(s: &RandomSetup, gauge: &GaugeField) -> Vec<SparseHermitianOperator> {
    let alg = clifford_generators(s.model.n).unwrap().with_symplectic(&s.model.j0_eigenvalues).unwrap();
    vec![
        dirac_operator_with(&s.model, gauge, &alg, s.wilson).unwrap(),
        schrodinger_operator(&s.model, gauge).unwrap(),
        covariant_laplacian(&s.model, gauge).unwrap(),
    ]
}

fn oracle_equivalence() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    let mut checked = 0;
    let req = |count: usize, seed: u64| EigenRequest::new(count).tolerance(1e-10).seed(seed);
    let t2 = build_torus_model(1, &[1.0, 1.0], 16, &[1.0]).unwrap();
    let t4 = build_torus_model(2, &[1.0; 4], 4, &[1.0, 1.0]).unwrap();
    let mut cases: Vec<(String, ModelManifold, GaugeField)> = Vec::new();
    for k in 1..=4 {
        cases.push((format!("T2 N=16 k={k}"), t2.clone(), assign_line_bundle(&t2, k, &[1]).unwrap()));
    }
    let e11 = assign_line_bundle(&t2, 2, &[1]).unwrap().with_auxiliary_bundle(2, &[1]).unwrap();
    cases.push(("T2 N=16 k=2 E=(2,1)".into(), t2.clone(), e11));
    cases.push(("T4 N=4 k=1".into(), t4.clone(), assign_line_bundle(&t4, 1, &[1, 1]).unwrap()));
    for (i, (label, model, gauge)) in cases.iter().enumerate() {
        let alg = clifford_generators(model.n).unwrap().with_symplectic(&model.j0_eigenvalues).unwrap();
        let h = dirac_operator_with(model, gauge, &alg, Some(WilsonParams::default())).unwrap();
        let ops: Vec<(String, SparseHermitianOperator)> = vec![
            (format!("{label} D^2"), h.square()),
            (format!("{label} schrodinger"), schrodinger_operator(model, gauge).unwrap()),
            (format!("{label} laplacian"), covariant_laplacian(model, gauge).unwrap()),
        ];
        for (j, (name, op)) in ops.iter().enumerate() {
            let count = 16;
            match (lanczos_smallest(op, &req(count, (i * 8 + j) as u64)), dense_lowest(op, count, false)) {
                (Ok(l), Ok(d)) => compare(name.clone(), &l, &d, &mut worst, &mut failures),
                (l, d) => failures.push(format!("{name}: {:?} / {:?}", l.err().map(|e| e.to_string()), d.err().map(|e| e.to_string()))),
            }
            checked += 1;
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut herm_worst: f64 = 0.0;
    let mut gauge_worst: f64 = 0.0;
    for c in 0..RANDOM_CONFIGS {
        let s = random_setup(&mut rng);
        for op in operators_of(&s, &s.gauge) {
            herm_worst = herm_worst.max(op.hermiticity_defect(4, c as u64));
        }
        let sites = s.gauge.lattice().site_count();
        let g: Vec<C64> = (0..sites).map(|_| C64::from_polar(1.0, rng.gen_range(-3.2..3.2))).collect();
        let moved = s.gauge.gauge_transform(&g).unwrap();
        for (op, op_moved) in operators_of(&s, &s.gauge).iter().zip(operators_of(&s, &moved)) {
            let block = op.dim() / sites;
            let apply_g = |v: &[C64]| -> Vec<C64> { v.iter().enumerate().map(|(i, z)| z * g[i / block]).collect() };
            let v = random_vector(&mut rng, op.dim());
            let d = linalg::norm(&linalg::sub(&op_moved.apply_vec(&apply_g(&v)), &apply_g(&op.apply_vec(&v))));
            gauge_worst = gauge_worst.max(d / (op.matrix.max_row_sum() * linalg::norm(&v)));
        }
    }
    let props_ok = herm_worst <= 1e-13 && gauge_worst <= 1e-13;
    outcome(
        failures.is_empty() && props_ok,
        format!(
            "{checked} operators (dim <= 1024), lowest 16 eigenvalues, max |lanczos - dense| {worst:.2e} (limit 1e-8){}; \
             {RANDOM_CONFIGS} random configs: hermiticity defect {herm_worst:.1e}, gauge covariance defect {gauge_worst:.1e} \
             (limit 1e-13); {:.0} s",
            if failures.is_empty() { String::new() } else { format!(", failures {failures:?}") },
            secs(t.elapsed())
        ),
    )
}

fn covering() -> Outcome {
    let t = Instant::now();
    let sweep = run_text(&torus_config(16, 4, "covering", "[covering]\nscales = 1, 2\n"));
    let deep = run_text(&torus_config(16, 2, "covering", "[covering]\nscales = 1, 2, 4\n").replace("k_min = 1", "k_min = 2"));
    let elapsed = t.elapsed();
    let mut notes = Vec::new();
    let mut pass = true;
    for out in [&sweep, &deep] {
        let c = &out.report["suites"]["covering"];
        if c.get("error").is_some() {
            return outcome(false, format!("error: {}", c["error"]));
        }
        pass &= pass_of(&out.report, "covering") && out.status == Status::Pass;
        for e in c["per_k"].as_array().into_iter().flatten() {
            let scales: Vec<String> = e["index"]["scales"]
                .as_array()
                .into_iter()
                .flatten()
                .map(|s| {
                    format!(
                        "m={} ker/cell {} win/cell {} odd-empty {}",
                        s["scale"], s["normalized_kernel"], s["normalized_window"], s["odd_kernel_empty"]
                    )
                })
                .collect();
            notes.push(format!("k={} [{}]", e["k"], scales.join(", ")));
        }
    }
    pass &= elapsed < Duration::from_secs(600);
    outcome(pass, format!("base N=16: {}; {:.0} s (limit 600 s)", notes.join("; "), secs(elapsed)))
}

fn report(name: &str, o: Outcome, failed: &mut usize) {
    println!("{} criterion {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    *failed += usize::from(!o.pass);
}

fn main() {
    let mut failed = 0;
    report("1 lichnerowicz exactness", lichnerowicz(), &mut failed);

    let t = Instant::now();
    let sweep = run_text(&torus_config(32, 6, "gap, schrodinger, decay", ""));
    let sweep_time = t.elapsed();
    report("2 spectral gap of D_k^2", gap(&sweep, sweep_time), &mut failed);
    report("3 schrodinger clustering", schrodinger(&sweep), &mut failed);
    report("4 index law", index_law(&sweep), &mut failed);
    report("5 kernel component decay", decay(&sweep), &mut failed);
    report("6 oracle equivalence", oracle_equivalence(), &mut failed);
    report("7 covering consistency", covering(), &mut failed);

    println!("acceptance: {} passed, {failed} failed", 7 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
