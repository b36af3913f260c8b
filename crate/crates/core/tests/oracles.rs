//! Checks against closed forms computed independently of the library.

use std::f64::consts::{E, PI};

use fecf::analysis::lipschitz_estimate;
use fecf::entropy::{partition_estimate, BoxDomain};
use fecf::free_energy::lambda_max;
use fecf::{find_counterfactual, AnnealConfig, EnergyParams, EntropyModel, Matrix, ModelHandle};

#[test]
fn partition_function_of_linear_energy() {
    // Z = prod over coordinates of the integral of exp(-beta a x) on [0, 1].
    let beta: f64 = 2.0;
    let a: [f64; 2] = [1.0, 0.5];
    let exact: f64 = a.iter().map(|ai| (1.0 - (-beta * ai).exp()) / (beta * ai)).product();
    let domain = BoxDomain::cube(2, 0.0, 1.0).unwrap();
    let est = partition_estimate(beta, |x| a[0] * x[0] + a[1] * x[1], &domain, 20000, 3).unwrap();
    assert!(est.within(exact, 4.0), "{est:?} vs {exact}");
}

#[test]
fn lambda_max_of_symmetric_matrix() {
    let m = Matrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
    let exact = m.clone().symmetric_eigen().eigenvalues.max();
    assert!((lambda_max(&m, 1e-12, 10_000).unwrap() - exact).abs() < 1e-8);
}

#[test]
fn lipschitz_of_linear_map_is_its_norm() {
    let w = [3.0, -4.0];
    let domain = BoxDomain::cube(2, -1.0, 1.0).unwrap();
    let l = lipschitz_estimate(|x: &[f64]| w[0] * x[0] + w[1] * x[1], &domain, 2000, 9).unwrap();
    assert!(l <= 5.0 + 1e-9 && l > 4.5, "{l}");
}

#[test]
fn static_entropy_leaves_energy_minimizer() {
    // With a point-independent surrogate the entropy term is constant: the
    // search reduces to energy descent and must end near the threshold.
    let model = ModelHandle::logistic(vec![1.0, 1.0], 0.0).unwrap();
    let params = EnergyParams::new(0.0, 10.0, 0.5).with_critical(vec![0, 1], vec![1.0, 1.0]);
    let cfg = AnnealConfig::new(0.01, 1.0, 1e-3, 5000, 4);
    let res = find_counterfactual(&model, &[1.0, 1.0], &params, &cfg, &EntropyModel::fixed()).unwrap();
    assert!(res.converged);
    // Closest point on the 0.5 level set is delta = (-1, -1).
    assert!((res.delta[0] + 1.0).abs() < 0.1 && (res.delta[1] + 1.0).abs() < 0.1, "{:?}", res.delta);
    let s0 = res.trace[0].entropy;
    assert!(res.trace.iter().all(|t| (t.entropy - s0).abs() < 1e-12));
    assert!((s0 - (2.0 * PI * E * 0.25).ln()).abs() < 1e-9);
}
