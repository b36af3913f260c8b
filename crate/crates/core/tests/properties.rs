use fecf::analysis::{robustness_report, spectral_condition, stability_sweep, worst_case_perturbation, QuadraticObjective, StabilityMetric, SweepGrid};
use fecf::annealer::metropolis_accept;
use fecf::energy::energy;
use fecf::entropy::{entropy_gaussian, BoxDomain};
use fecf::{find_counterfactual, AnnealConfig, Covariance, EnergyParams, EntropyModel, Matrix, ModelHandle};
use proptest::prelude::*;

fn quad(p: f64, q: f64, r: f64, g: [f64; 2]) -> QuadraticObjective {
    QuadraticObjective {
        a: Matrix::from_row_slice(2, 2, &[p, q, q, r]),
        b: g.to_vec(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn energy_is_nonnegative_and_anchored(
        w in prop::collection::vec(-2.0..2.0f64, 3),
        x0 in prop::collection::vec(-2.0..2.0f64, 3),
        delta in prop::collection::vec(-2.0..2.0f64, 3),
        lambda in 0.0..2.0f64,
        mu in 0.0..5.0f64,
        c in 0.05..0.95f64,
    ) {
        let model = ModelHandle::logistic(w, 0.0).unwrap();
        let params = EnergyParams::new(lambda, mu, c).with_critical(vec![0, 2], vec![1.0, 3.0]);
        prop_assert!(energy(&params, &model, &x0, &delta).unwrap() >= 0.0);
        let e0 = energy(&params, &model, &x0, &[0.0; 3]).unwrap();
        let f0 = model.predict(&x0).unwrap();
        prop_assert!((e0 - mu * (f0 - c).abs()).abs() < 1e-12);
    }

    #[test]
    fn metropolis_is_monotone_in_delta_f(a in -10.0..100.0f64, b in -10.0..100.0f64, beta in 1e-3..10.0f64, u in 0.0..1.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        if metropolis_accept(hi, beta, u) {
            prop_assert!(metropolis_accept(lo, beta, u));
        }
    }

    #[test]
    fn diagonal_gaussian_entropy_matches_closed_form(v in prop::collection::vec(0.01..10.0f64, 1..6)) {
        let closed: f64 = v.iter().map(|s| 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * s).ln()).sum();
        let got = entropy_gaussian(&Covariance::Diagonal(v)).unwrap();
        prop_assert!((got - closed).abs() < 1e-10);
    }

    #[test]
    fn worst_case_shift_grows_with_budget(
        p in -3.0..3.0f64, q in -2.0..2.0f64, r in -3.0..3.0f64,
        g0 in -1.0..1.0f64, g1 in -1.0..1.0f64,
        xi in 0.05..1.0f64,
        seed in 0u64..1000,
    ) {
        let obj = quad(p, q, r, [g0, g1]);
        let small = worst_case_perturbation(&obj, &[0.0, 0.0], xi, 8, 200, seed).unwrap();
        let large = worst_case_perturbation(&obj, &[0.0, 0.0], 2.0 * xi, 8, 200, seed).unwrap();
        prop_assert!(small.delta_f >= 0.0);
        prop_assert!(large.delta_f >= small.delta_f * (1.0 - 1e-3) - 1e-9);
        prop_assert!(small.eta_star.iter().map(|v| v * v).sum::<f64>().sqrt() <= xi * (1.0 + 1e-9));
    }

    #[test]
    fn second_order_bound_holds_for_convex_quadratics(
        a in 0.0..3.0f64, b in 0.0..3.0f64, theta in 0.0..3.2f64,
        g0 in -1.0..1.0f64, g1 in -1.0..1.0f64,
        xi in 0.05..1.0f64,
    ) {
        let (c, s) = (theta.cos(), theta.sin());
        let obj = quad(a * c * c + b * s * s, (a - b) * c * s, a * s * s + b * c * c, [g0, g1]);
        let wc = worst_case_perturbation(&obj, &[0.0, 0.0], xi, 4, 100, 0).unwrap();
        prop_assert!(wc.delta_f <= wc.bound * (1.0 + 1e-6) + 1e-12);
        prop_assert!(!wc.bound_violated);
    }

    #[test]
    fn spectral_flag_is_consistent(
        p in -3.0..3.0f64, q in -2.0..2.0f64, r in -3.0..3.0f64,
        g0 in -1.0..1.0f64, g1 in -1.0..1.0f64,
        xi in 0.05..1.0f64,
    ) {
        let obj = quad(p, q, r, [g0, g1]);
        let rep = robustness_report(&obj, &[0.0, 0.0], xi, 20, 1).unwrap();
        prop_assert_eq!(rep.spectral_condition_ok, spectral_condition(rep.lambda_max, rep.grad_norm, rep.budget_xi));
        prop_assert!(rep.adversarial_deviation >= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn search_respects_box_and_immutables(x0 in prop::collection::vec(-1.0..1.0f64, 3), seed in 0u64..100) {
        let model = ModelHandle::logistic(vec![1.0, -0.5, 2.0], 0.0).unwrap();
        let params = EnergyParams::new(0.1, 5.0, 0.5).with_seeded_weights(vec![0, 1], seed).with_immutable(vec![1]);
        let cfg = AnnealConfig::new(0.05, 1.0, 1e-3, 300, seed).with_box(BoxDomain::cube(3, -0.5, 0.5).unwrap());
        let res = find_counterfactual(&model, &x0, &params, &cfg, &EntropyModel::default()).unwrap();
        prop_assert_eq!(res.delta[1], 0.0);
        prop_assert!(res.delta.iter().all(|d| (-0.5..=0.5).contains(d)));
        for t in &res.trace {
            prop_assert_eq!(t.delta[1], 0.0);
        }
    }

    #[test]
    fn stability_scores_are_fractions(lambda in 0.01..1.0f64, mu in 0.5..10.0f64, beta in 0.01..1.0f64, seed in 0u64..50) {
        let grid = SweepGrid {
            lambdas: vec![lambda],
            mus: vec![mu],
            betas: vec![beta],
            seeds_per_cell: 3,
            stability_metric: StabilityMetric::Combined,
            identical_seeds: false,
        };
        let params = EnergyParams::new(1.0, 1.0, 0.5).with_seeded_weights(vec![0, 1], seed);
        let cfg = AnnealConfig::new(1e-2, beta, 1e-2, 200, seed).with_box(BoxDomain::cube(2, -10.0, 2.0).unwrap());
        let cells = stability_sweep(&ModelHandle::reference_landscape(), &[1.0, 1.0], &grid, &params, &cfg, &EntropyModel::default()).unwrap();
        prop_assert_eq!(cells.len(), 1);
        for v in [cells[0].stability, cells[0].success_rate] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}
