use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use spinc_core::analysis::{index_prediction, within_flux_cap, BundleSpec};
use spinc_core::clifford::clifford_generators;
use spinc_core::covering::{build_quotient_family, gamma_spectrum_distribution, SpectralKind};
use spinc_core::eigensolve::{count_in_window, Backend, EigenRequest, EigenResult};
use spinc_core::gauge::{assign_line_bundle, tensor_power, GaugeField};
use spinc_core::geometry::{build_torus_model, ModelManifold};
use spinc_core::linalg::{self, CMatrix, C64};
use spinc_core::operators::{
    covariant_laplacian, dirac_operator_with, lichnerowicz_rhs_with, random_vector, schrodinger_operator, LinearOperator,
    SparseHermitianOperator, WilsonParams,
};

#[derive(Clone, Debug)]
struct Setup {
    n: usize,
    sides: Vec<f64>,
    a: Vec<f64>,
    resolution: usize,
    k: u32,
    rank_e: usize,
    chern_e: Vec<i64>,
    wilson: Option<WilsonParams>,
}

impl Setup {
    fn model(&self) -> ModelManifold {
        build_torus_model(self.n, &self.sides, self.resolution, &self.a).unwrap()
    }

    fn gauge(&self, model: &ModelManifold) -> GaugeField {
        assign_line_bundle(model, self.k, &model.periods).unwrap().with_auxiliary_bundle(self.rank_e, &self.chern_e).unwrap()
    }

    fn dirac(&self, model: &ModelManifold, gauge: &GaugeField) -> SparseHermitianOperator {
        let alg = clifford_generators(self.n).unwrap().with_symplectic(&model.j0_eigenvalues).unwrap();
        dirac_operator_with(model, gauge, &alg, self.wilson).unwrap()
    }
}

/// Integral periods are arranged by choosing `a = period / area`.
fn setup() -> impl Strategy<Value = Setup> {
    (1usize..=2).prop_flat_map(|n| {
        let res = if n == 1 { 4usize..=10 } else { 4usize..=4 };
        (
            Just(n),
            prop::collection::vec(0.5f64..2.0, 2 * n),
            prop::collection::vec(1i64..=3, n),
            res,
            0u32..=3,
            1usize..=2,
            prop::collection::vec(-1i64..=1, n),
            prop::option::of((0.001f64..0.1, 1u32..=3)),
        )
            .prop_map(|(n, sides, periods, resolution, k, rank_e, chern_e, w)| {
                let a = (0..n).map(|p| periods[p] as f64 / (sides[2 * p] * sides[2 * p + 1])).collect();
                Setup {
                    n,
                    sides,
                    a,
                    resolution,
                    k,
                    rank_e,
                    chern_e,
                    wilson: w.map(|(strength, power)| WilsonParams { strength, power }),
                }
            })
    })
}

fn diff_norm(a: &[C64], b: &[C64]) -> f64 {
    linalg::norm(&linalg::sub(a, b))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn operators_are_hermitian(s in setup(), seed in any::<u64>()) {
        let model = s.model();
        let gauge = s.gauge(&model);
        let alg = clifford_generators(s.n).unwrap().with_symplectic(&model.j0_eigenvalues).unwrap();
        let ops = [
            s.dirac(&model, &gauge),
            schrodinger_operator(&model, &gauge).unwrap(),
            covariant_laplacian(&model, &gauge).unwrap(),
            lichnerowicz_rhs_with(&model, &gauge, &alg, s.wilson).unwrap(),
        ];
        for op in &ops {
            let d = op.hermiticity_defect(4, seed);
            prop_assert!(d < 1e-13, "{}: {d}", op.label);
            prop_assert!(op.matrix.minus(&op.matrix.adjoint()).max_abs() <= 1e-14 * op.matrix.max_abs());
        }
    }

    #[test]
    fn operators_are_gauge_covariant(s in setup(), seed in any::<u64>()) {
        let model = s.model();
        let gauge = s.gauge(&model);
        let sites = gauge.lattice().site_count();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g: Vec<C64> = random_vector(&mut rng, sites).iter().map(|z| C64::from_polar(1.0, 3.0 * z.re)).collect();
        let moved = gauge.gauge_transform(&g).unwrap();
        let pairs = [
            (s.dirac(&model, &gauge), s.dirac(&model, &moved)),
            (schrodinger_operator(&model, &gauge).unwrap(), schrodinger_operator(&model, &moved).unwrap()),
        ];
        for (op, op_moved) in &pairs {
            let block = op.dim() / sites;
            let act = |v: &[C64], conj: bool| -> Vec<C64> {
                v.iter()
                    .enumerate()
                    .map(|(i, z)| z * if conj { g[i / block].conj() } else { g[i / block] })
                    .collect()
            };
            let v = random_vector(&mut rng, op.dim());
            // op_moved = G op G^-1
            let lhs = op_moved.apply_vec(&act(&v, false));
            let rhs = act(&op.apply_vec(&v), false);
            prop_assert!(diff_norm(&lhs, &rhs) <= 1e-12 * op.matrix.max_row_sum() * linalg::norm(&v));
        }
    }

    #[test]
    fn lichnerowicz_identity_is_exact(s in setup(), seed in any::<u64>()) {
        let model = s.model();
        let gauge = s.gauge(&model);
        let alg = clifford_generators(s.n).unwrap().with_symplectic(&model.j0_eigenvalues).unwrap();
        let h = dirac_operator_with(&model, &gauge, &alg, s.wilson).unwrap();
        let rhs = lichnerowicz_rhs_with(&model, &gauge, &alg, s.wilson).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v = random_vector(&mut rng, h.dim());
        let scale = h.matrix.max_row_sum().powi(2).max(1.0);
        let d = diff_norm(&h.apply_vec(&h.apply_vec(&v)), &rhs.apply_vec(&v));
        prop_assert!(d <= 1e-13 * scale * linalg::norm(&v), "{d}");
    }

    #[test]
    fn gauge_text_round_trip(s in setup()) {
        let model = s.model();
        let gauge = s.gauge(&model);
        let back = GaugeField::from_text(&gauge.to_text()).unwrap();
        prop_assert_eq!(back.max_link_difference(&gauge), 0.0);
        prop_assert_eq!(back.rank_e, gauge.rank_e);
        prop_assert_eq!(&back.chern_e, &gauge.chern_e);
    }

    #[test]
    fn tensor_power_matches_direct_assignment(s in setup(), m in 1u32..=3) {
        let model = s.model();
        let base = assign_line_bundle(&model, s.k.max(1), &model.periods).unwrap();
        let direct = assign_line_bundle(&model, s.k.max(1) * m, &model.periods).unwrap();
        prop_assert!(tensor_power(&base, m).max_link_difference(&direct) < 1e-12);
        // plaquette angles alias once the flux per plaquette reaches one half
        if within_flux_cap(s.k.max(1) * m, &model.periods, s.resolution) {
            prop_assert_eq!(direct.recovered_chern().unwrap(), model.periods.iter().map(|c| c * (s.k.max(1) * m) as i64).collect::<Vec<_>>());
        }
    }

    #[test]
    fn index_formula_is_a_sum_over_summands(s in setup()) {
        let model = s.model();
        let bundle = BundleSpec::new(model.periods.clone(), s.rank_e, s.chern_e.clone()).unwrap();
        let p = index_prediction(&model, &bundle, s.k).unwrap();
        let twisted: i64 = (0..s.n).map(|j| s.k as i64 * model.periods[j] + s.chern_e[j]).product();
        let plain: i64 = (0..s.n).map(|j| s.k as i64 * model.periods[j]).product();
        prop_assert_eq!(p.predicted, twisted + (s.rank_e as i64 - 1) * plain);
    }

    #[test]
    fn clifford_relations(n in 1usize..=4, v in prop::collection::vec(-2.0f64..2.0, 8)) {
        let alg = clifford_generators(n).unwrap();
        let d = alg.dim_fiber;
        for i in 0..2 * n {
            for j in 0..2 * n {
                let ac = alg.generators[i].mul(&alg.generators[j]).add(&alg.generators[j].mul(&alg.generators[i]));
                let expect = if i == j { CMatrix::identity(d).scaled(C64::new(-2.0, 0.0)) } else { CMatrix::zeros(d, d) };
                prop_assert!(ac.max_abs_diff(&expect) < 1e-14);
            }
        }
        let v = &v[..2 * n];
        let cv = alg.clifford_action(v);
        let len2: f64 = v.iter().map(|x| x * x).sum();
        prop_assert!(cv.mul(&cv).max_abs_diff(&CMatrix::identity(d).scaled(C64::new(-len2, 0.0))) < 1e-12);
        prop_assert!(cv.adjoint().max_abs_diff(&cv.scaled(C64::new(-1.0, 0.0))) < 1e-14);
        // c(v) maps even forms to odd forms
        for r in 0..d {
            for c in 0..d {
                if alg.is_even(r) == alg.is_even(c) {
                    prop_assert_eq!(cv.get(r, c), C64::new(0.0, 0.0));
                }
            }
        }
    }

    #[test]
    fn window_counts_are_monotone(mut values in prop::collection::vec(-10.0f64..10.0, 1..40), cuts in prop::collection::vec(-11.0f64..11.0, 2)) {
        values.sort_by(f64::total_cmp);
        let n = values.len();
        let r = EigenResult { eigenvalues: values, residuals: vec![1e-14; n], vectors: None, iterations: 1, matvecs: 0, backend: Backend::Dense, complete: true };
        let (lo, hi) = (cuts[0].min(cuts[1]), cuts[0].max(cuts[1]));
        prop_assume!(lo < hi);
        if let (Ok(inner), Ok(outer)) = (count_in_window(&r, lo, hi), count_in_window(&r, lo - 1.0, hi + 1.0)) {
            prop_assert!(inner <= outer);
            prop_assert_eq!(inner, r.eigenvalues.iter().filter(|&&v| v > lo && v < hi).count());
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn spectral_distribution_is_monotone_in_mu(k in 1u32..=2, mut mu in prop::collection::vec(-30.0f64..40.0, 4)) {
        mu.sort_by(f64::total_cmp);
        let model = build_torus_model(1, &[1.0, 1.0], 8, &[1.0]).unwrap();
        let family = build_quotient_family(&model, &BundleSpec::line(vec![1]), &[1, 2], 1 << 12).unwrap();
        let req = EigenRequest::new(4).tolerance(1e-10);
        if let Ok(est) = gamma_spectrum_distribution(&family, SpectralKind::Schrodinger, k, &mu, &req, None) {
            for s in &est.scales {
                prop_assert!(s.raw.windows(2).all(|w| w[0] <= w[1]), "{:?}", s.raw);
                prop_assert!(s.normalized.iter().zip(&s.raw).all(|(x, &c)| (x * s.cells as f64 - c as f64).abs() < 1e-9));
            }
        }
    }
}
