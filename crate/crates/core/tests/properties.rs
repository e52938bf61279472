mod common;

use common::{naive_gm_variance, naive_gm_vnf, naive_sigma_tm, naive_vn, rel_close};
use odecheck::estimation::{
    collocation_objective, levenberg_marquardt, nls_estimate, two_step_estimate, CollocationCurves, LeastSquares,
    LmConfig, NlsConfig, TwoStepConfig,
};
use odecheck::gof::{
    gm_test, gm_variance, gm_vnf, im_test, p_value, residuals_tm, sigma_hat_tm, tm_test_with_theta, vn_statistic,
    GmConfig, GmSample, ImConfig, Intermediates, Reference, TmConfig,
};
use odecheck::io::{read_observations, write_observations};
use odecheck::ode::registry::{fhn_model, study1_model, STUDY1_THETA};
use odecheck::ode::{rk4_solve, ModelRegistry, OdeModel, ParamBounds, SolverOptions, Study1Variant};
use odecheck::sim::{generate_dataset, run_study, StudySpec};
use odecheck::smoothing::{local_linear_at, local_quadratic_deriv_at, ObservationSet};
use odecheck::Result;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_distr::{Distribution, Normal};

fn sorted(mut t: Vec<f64>) -> Vec<f64> {
    t.sort_by(|a, b| a.partial_cmp(b).unwrap());
    t
}

fn noisy_linear(x0: [f64; 2], n: usize, seed: u64) -> ObservationSet {
    let model = study1_model(Study1Variant::H11, 0.0, 0.0, 10.0);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let times: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let mut grid = vec![0.0];
    grid.extend(&times);
    let tr = rk4_solve(&model, &STUDY1_THETA, &x0, &grid, &SolverOptions::default()).unwrap();
    let noise = Normal::new(0.0, 0.05).unwrap();
    let rows = (0..n).map(|i| tr.state(i + 1).iter().map(|x| x + noise.sample(&mut rng)).collect()).collect();
    ObservationSet::new(times, rows, Some((0.0, 1.0))).unwrap()
}

fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>, f64)> {
    (5usize..=30, 1usize..=3).prop_flat_map(|(n, p)| {
        (
            proptest::collection::vec(0.0f64..1.0, n),
            proptest::collection::vec(proptest::collection::vec(-2.0f64..2.0, p), n),
            0.05f64..0.6,
        )
    })
}

fn gm_instance() -> impl Strategy<Value = (GmSample, f64)> {
    (9usize..=30).prop_flat_map(|n| {
        (
            proptest::collection::vec(0.0f64..1.0, n),
            proptest::collection::vec(-2.0f64..2.0, n),
            proptest::collection::vec(-5.0f64..5.0, n),
            0.2f64..0.9,
        )
            .prop_map(|(t, y, f, h)| (GmSample { times: t, y, f }, h))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn tm_sums_match_full_enumeration((t, e, h) in instance()) {
        let t = sorted(t);
        let v = vn_statistic(&e, &t, h).unwrap();
        let s = sigma_hat_tm(&e, &t, h).unwrap();
        let vo = naive_vn(&e, &t, h);
        let so = naive_sigma_tm(&e, &t, h);
        let vscale = vo.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (a, b) in v.iter().zip(&vo) {
            prop_assert!((a - b).abs() <= 1e-10 * vscale.max(1e-300), "{a} vs {b}");
        }
        let sscale = so.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        for (i, row) in so.iter().enumerate() {
            for (j, b) in row.iter().enumerate() {
                prop_assert!((s[(i, j)] - b).abs() <= 1e-10 * sscale.max(1e-300));
            }
        }
    }

    #[test]
    fn gm_sums_match_full_enumeration((s, h) in gm_instance()) {
        let v = gm_vnf(&s, h).unwrap();
        prop_assert!(rel_close(v, naive_gm_vnf(&s, h), 1e-10), "{v}");
        let var = gm_variance(&s, h).unwrap();
        let oracle = naive_gm_variance(&s, h);
        prop_assert!(rel_close(var, oracle, 1e-10), "{var} vs {oracle}");
    }

    #[test]
    fn tm_sigma_is_positive_semidefinite((t, e, h) in instance()) {
        let t = sorted(t);
        let s = sigma_hat_tm(&e, &t, h).unwrap();
        let eig = s.clone().symmetric_eigen();
        let scale = s.amax();
        prop_assert!(eig.eigenvalues.iter().all(|&l| l >= -1e-12 * scale.max(1e-300)));
        prop_assert!((&s - s.transpose()).amax() == 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn autonomous_solutions_commute_with_time_shift(
        x0 in proptest::collection::vec(-2.0f64..2.0, 2),
        shift in -3.0f64..3.0,
    ) {
        let model = fhn_model(0.0, 0.0, 10.0);
        let theta = [3.0, 0.2, 0.34];
        let grid: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let moved: Vec<f64> = grid.iter().map(|t| t + shift).collect();
        let a = rk4_solve(&model, &theta, &x0, &grid, &SolverOptions::default()).unwrap();
        let b = rk4_solve(&model, &theta, &x0, &moved, &SolverOptions::default()).unwrap();
        for i in 0..grid.len() {
            for (u, v) in a.state(i).iter().zip(b.state(i)) {
                prop_assert!((u - v).abs() <= 1e-10 * (1.0 + u.abs()), "{u} vs {v}");
            }
        }
    }

    #[test]
    fn tm_is_location_invariant(c1 in -5.0f64..5.0, c2 in -5.0f64..5.0, seed in 0u64..1000) {
        let data = noisy_linear([1.0, 1.0], 60, seed);
        let base = study1_model(Study1Variant::H11, 0.0, 0.0, 10.0);
        let shift = [c1, c2];
        let inner = base.clone();
        let moved_model = OdeModel::new("shifted", 2, 2, move |t, x, th, out| {
            let back = [x[0] - shift[0], x[1] - shift[1]];
            out.copy_from_slice(&inner.rhs(t, &back, th));
        })
        .with_bounds(base.bounds().to_vec());
        let rows = (0..data.len()).map(|i| vec![data.value(i, 0) + c1, data.value(i, 1) + c2]).collect();
        let moved = ObservationSet::new(data.times().to_vec(), rows, Some(data.span())).unwrap();
        let opts = SolverOptions::default();
        let e = residuals_tm(&data, &base, &STUDY1_THETA, &[1.0, 1.0], &opts).unwrap();
        let em = residuals_tm(&moved, &moved_model, &STUDY1_THETA, &[1.0 + c1, 1.0 + c2], &opts).unwrap();
        for (r, rm) in e.iter().zip(&em) {
            for (u, v) in r.iter().zip(rm) {
                prop_assert!((u - v).abs() <= 1e-10, "{u} vs {v}");
            }
        }
        let cfg = TmConfig { h: Some(0.1), ..Default::default() };
        let tm = tm_test_with_theta(&data, &base, &[1.0, 1.0], &STUDY1_THETA, &cfg).unwrap().statistic;
        let tmm = tm_test_with_theta(&moved, &moved_model, &[1.0 + c1, 1.0 + c2], &STUDY1_THETA, &cfg).unwrap().statistic;
        prop_assert!(rel_close(tm, tmm, 1e-10), "{tm} vs {tmm}");
    }

    #[test]
    fn collocation_gradient_matches_central_differences(
        a in -0.5f64..0.5,
        b in -0.5f64..0.5,
        seed in 0u64..1000,
    ) {
        let data = noisy_linear([3.0, 2.0], 120, seed);
        let model = study1_model(Study1Variant::H11, 0.0, 0.0, 10.0);
        let curves = CollocationCurves::from_data(&data, &TwoStepConfig::for_component(1)).unwrap();
        let m = curves.len() as f64;
        let mut grad = [0.0, 0.0];
        for j in 0..curves.len() {
            let x = &curves.states[j];
            let r = curves.derivative[j] - 10.0 * (a * x[0] + b * x[1]);
            let w = curves.weights[j] / m;
            grad[0] += -2.0 * w * r * 10.0 * x[0];
            grad[1] += -2.0 * w * r * 10.0 * x[1];
        }
        let theta = [a, b];
        for i in 0..2 {
            let step = 1e-5 * (1.0 + theta[i].abs());
            let mut up = theta;
            let mut down = theta;
            up[i] += step;
            down[i] -= step;
            let fd = (collocation_objective(&model, &curves, &up).unwrap()
                - collocation_objective(&model, &curves, &down).unwrap()) / (2.0 * step);
            prop_assert!((fd - grad[i]).abs() <= 1e-4 * grad[i].abs().max(1e-3), "{fd} vs {}", grad[i]);
        }
    }
}

struct ExpFit {
    t: Vec<f64>,
    y: Vec<f64>,
}

impl LeastSquares for ExpFit {
    fn residuals(&self, theta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.t.iter().zip(&self.y).map(|(t, y)| y - theta[0] * (theta[1] * t).exp()).collect())
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn accepted_lm_steps_never_increase_the_objective(
        amp in 0.5f64..3.0,
        rate in -2.0f64..1.0,
        s0 in 0.1f64..5.0,
        r0 in -3.0f64..3.0,
        noise in proptest::collection::vec(-0.1f64..0.1, 25),
    ) {
        let t: Vec<f64> = (0..25).map(|i| i as f64 / 24.0).collect();
        let y = t.iter().zip(&noise).map(|(t, e)| amp * (rate * t).exp() + e).collect();
        let prob = ExpFit { t, y };
        let bounds = [ParamBounds::new(0.0, 10.0), ParamBounds::new(-5.0, 5.0)];
        let out = levenberg_marquardt(&prob, &[s0, r0], &bounds, &LmConfig::default()).unwrap();
        prop_assert_eq!(out.history.len(), out.iterations + 1);
        for w in out.history.windows(2) {
            prop_assert!(w[1] <= w[0], "{} then {}", w[0], w[1]);
        }
        prop_assert!(out.objective >= 0.0);
    }

    #[test]
    fn csv_round_trip_is_exact(
        t in proptest::collection::vec(-1e3f64..1e3, 1..40),
        p in 1usize..4,
        scale in 1e-8f64..1e8,
    ) {
        let t = sorted(t);
        let rows: Vec<Vec<f64>> = t.iter().enumerate()
            .map(|(i, &ti)| (0..p).map(|k| (ti * (k as f64 + 1.3) + i as f64 / 7.0) * scale).collect())
            .collect();
        let data = ObservationSet::new(t.clone(), rows, None).unwrap();
        let mut buf = Vec::new();
        write_observations(&data, &mut buf).unwrap();
        let back = read_observations(buf.as_slice()).unwrap();
        prop_assert_eq!(back.times(), data.times());
        for i in 0..data.len() {
            prop_assert_eq!(back.row(i), data.row(i));
        }
    }

    #[test]
    fn p_values_agree_with_closed_forms(x in -8.0f64..40.0) {
        let chi2 = p_value(x, Reference::ChiSquare { df: 2 });
        let exact = if x <= 0.0 { 1.0 } else { (-x / 2.0).exp() };
        prop_assert!((chi2 - exact).abs() <= 1e-12, "{chi2} vs {exact}");
        let up = p_value(x, Reference::StandardNormal);
        let down = p_value(-x, Reference::StandardNormal);
        prop_assert!((up + down - 1.0).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&up));
    }

    #[test]
    fn local_polynomials_reproduce_low_degree_curves(
        t in proptest::collection::vec(0.0f64..1.0, 30..60),
        c0 in -3.0f64..3.0,
        c1 in -3.0f64..3.0,
        c2 in -3.0f64..3.0,
        at in 0.2f64..0.8,
    ) {
        let mut t = sorted(t);
        for (i, v) in t.iter_mut().take(12).enumerate() {
            *v = 0.15 + 0.06 * i as f64;
        }
        let t = sorted(t);
        let rows = t.iter().map(|&s| vec![c0 + c1 * s, c0 + c1 * s + c2 * s * s]).collect();
        let data = ObservationSet::new(t, rows, Some((0.0, 1.0))).unwrap();
        let lin = local_linear_at(&data, 0.2, &[0], at).unwrap()[0];
        prop_assert!((lin - (c0 + c1 * at)).abs() <= 1e-9 * (1.0 + lin.abs()));
        let d = local_quadratic_deriv_at(&data, 0.2, &[1], at).unwrap()[0];
        prop_assert!((d - (c1 + 2.0 * c2 * at)).abs() <= 1e-9 * (1.0 + d.abs()));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn two_step_ignores_labels_of_other_components(seed in 0u64..10_000) {
        let entry = ModelRegistry::lookup("tcell").unwrap();
        let base = entry.model.clone();
        let swapped = OdeModel::new("tcell-swapped", 3, 5, move |t, x, th, out| {
            let f = base.rhs(t, &[x[0], x[2], x[1]], th);
            out.copy_from_slice(&[f[0], f[2], f[1]]);
        })
        .with_bounds(entry.model.bounds().to_vec());
        let times: Vec<f64> = (0..90).map(|i| 0.01 * (i as f64 + 0.5)).collect();
        let mut grid = vec![0.0];
        grid.extend(&times);
        let tr = rk4_solve(&entry.model, &entry.theta, &entry.x0, &grid, &SolverOptions::default()).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let rows: Vec<Vec<f64>> = (0..times.len())
            .map(|i| tr.state(i + 1).iter().map(|x| x + noise.sample(&mut rng)).collect())
            .collect();
        let flipped = rows.iter().map(|r| vec![r[0], r[2], r[1]]).collect();
        let data = ObservationSet::new(times.clone(), rows, Some(entry.span)).unwrap();
        let data_swapped = ObservationSet::new(times, flipped, Some(entry.span)).unwrap();
        let cfg = TwoStepConfig {
            component: 0,
            multistart: 2,
            seed,
            initial: Some(entry.theta.clone()),
            ..Default::default()
        };
        let a = two_step_estimate(&entry.model, &data, &cfg).unwrap();
        let b = two_step_estimate(&swapped, &data_swapped, &cfg).unwrap();
        prop_assert_eq!(a.theta_hat, b.theta_hat);
    }

    #[test]
    fn seeded_runs_are_reproducible(seed in 0u64..10_000) {
        let data = noisy_linear([1.0, 1.0], 80, seed);
        let model = study1_model(Study1Variant::H11, 0.0, 0.0, 10.0);
        let cfg = NlsConfig { multistart: 3, seed, ..Default::default() };
        let a = nls_estimate(&model, &data, &[1.0, 1.0], &cfg).unwrap();
        let b = nls_estimate(&model, &data, &[1.0, 1.0], &cfg).unwrap();
        prop_assert_eq!(a, b);

        let gm = GmConfig { split_seed: seed, theta: Some(STUDY1_THETA.to_vec()), ..Default::default() };
        let g1 = gm_test(&data, &model, 1, &gm).unwrap();
        let g2 = gm_test(&data, &model, 1, &gm).unwrap();
        prop_assert_eq!(g1.statistic.to_bits(), g2.statistic.to_bits());
    }

    #[test]
    fn single_interval_im_is_the_plain_statistic_over_mu(seed in 0u64..10_000) {
        let data = noisy_linear([2.0, 1.0], 100, seed);
        let model = study1_model(Study1Variant::H11, 0.0, 0.0, 10.0);
        let plain = ImConfig { h: Some(0.05), theta: Some(STUDY1_THETA.to_vec()), ..ImConfig::plain() };
        let one = ImConfig {
            h: Some(0.05),
            n_l: 1,
            restricted: (0.0, 1.0),
            theta: Some(STUDY1_THETA.to_vec()),
            ..Default::default()
        };
        for k in 0..2 {
            let p = im_test(&data, &model, k, &plain).unwrap();
            let a = im_test(&data, &model, k, &one).unwrap();
            let Intermediates::Im { mu_n, n_used, .. } = a.intermediates else { unreachable!() };
            prop_assert_eq!(n_used, 1);
            prop_assert!(rel_close(a.statistic * mu_n, p.statistic, 1e-12), "{} vs {}", a.statistic * mu_n, p.statistic);
        }
    }
}

#[test]
fn replications_do_not_depend_on_thread_count() {
    let mut spec = StudySpec::study(2).unwrap();
    spec.n = 60;
    spec.replications = 7;
    spec.seed = 11;
    spec.keep_replications = true;
    let one = serde_json::to_string(&run_study(&spec, 1).unwrap()).unwrap();
    let three = serde_json::to_string(&run_study(&spec, 3).unwrap()).unwrap();
    assert_eq!(one, three);
}

#[test]
fn summaries_are_binomially_consistent() {
    let mut spec = StudySpec::study(1).unwrap();
    spec.n = 60;
    spec.replications = 12;
    spec.alpha = 0.5;
    let report = run_study(&spec, 1).unwrap();
    for s in &report.summaries {
        let failed: usize = s.failures.values().sum();
        assert_eq!(s.completed + failed, spec.replications);
        let r = s.rate.unwrap();
        assert!((0.0..=1.0).contains(&r));
        assert_eq!(r, s.rejections as f64 / s.completed as f64);
        assert_eq!(s.se.unwrap(), (r * (1.0 - r) / s.completed as f64).sqrt());
    }
}

#[test]
fn generated_data_follow_the_seed() {
    let spec = StudySpec::study(3).unwrap();
    let a = generate_dataset(&spec, None, 5).unwrap();
    let b = generate_dataset(&spec, None, 5).unwrap();
    let c = generate_dataset(&spec, None, 6).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}
