//! Effective energy of a perturbation, its subgradient and Hessian, and the
//! Taylor surrogate of the model score around `x0`.
//!
//! `E(delta) = |delta|_2 + lambda * R(delta) + mu * |f(x0 + delta) - c|`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::model::ModelHandle;
use crate::numdiff;
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regularizer {
    /// `sum_{i in V} w_i |delta_i|`
    #[default]
    WeightedL1,
    /// `sum_i |delta_i|` over every feature.
    PlainL1,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergyParams {
    pub lambda: f64,
    pub mu: f64,
    pub target_c: f64,
    /// Critical feature indices `V`.
    #[serde(default)]
    pub critical_set: Vec<usize>,
    /// `weights[k]` belongs to `critical_set[k]`.
    #[serde(default)]
    pub weights: Vec<f64>,
    #[serde(default)]
    pub regularizer: Regularizer,
    /// Features held fixed by projection.
    #[serde(default)]
    pub immutable_set: Vec<usize>,
}

impl EnergyParams {
    pub fn new(lambda: f64, mu: f64, target_c: f64) -> Self {
        Self {
            lambda,
            mu,
            target_c,
            critical_set: Vec::new(),
            weights: Vec::new(),
            regularizer: Regularizer::WeightedL1,
            immutable_set: Vec::new(),
        }
    }

    pub fn with_critical(mut self, critical_set: Vec<usize>, weights: Vec<f64>) -> Self {
        self.critical_set = critical_set;
        self.weights = weights;
        self
    }

    /// Critical set with weights drawn from `U(1, 10)` under `seed`.
    pub fn with_seeded_weights(self, critical_set: Vec<usize>, seed: u64) -> Self {
        let weights = seeded_weights(critical_set.len(), seed);
        self.with_critical(critical_set, weights)
    }

    pub fn with_regularizer(mut self, regularizer: Regularizer) -> Self {
        self.regularizer = regularizer;
        self
    }

    pub fn with_immutable(mut self, immutable_set: Vec<usize>) -> Self {
        self.immutable_set = immutable_set;
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidInput(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::InvalidInput(format!("mu must be >= 0, got {}", self.mu)));
        }
        ensure_finite(&[self.target_c], "target_c")?;
        if self.weights.len() != self.critical_set.len() {
            return Err(Error::InvalidInput(format!(
                "{} weights for {} critical features",
                self.weights.len(),
                self.critical_set.len()
            )));
        }
        if let Some(w) = self.weights.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(Error::InvalidInput(format!("weights must be >= 0, got {w}")));
        }
        check_index_set(&self.critical_set, dim, "critical_set")?;
        check_index_set(&self.immutable_set, dim, "immutable_set")
    }

    /// Per-feature regularization weights as a dense vector.
    pub fn dense_weights(&self, dim: usize) -> Vec<f64> {
        match self.regularizer {
            Regularizer::WeightedL1 => {
                let mut w = vec![0.0; dim];
                for (&i, &wi) in self.critical_set.iter().zip(&self.weights) {
                    w[i] += wi;
                }
                w
            }
            Regularizer::PlainL1 => vec![1.0; dim],
            Regularizer::None => vec![0.0; dim],
        }
    }

    pub fn is_immutable(&self, i: usize) -> bool {
        self.immutable_set.contains(&i)
    }

    /// Zeroes the immutable coordinates of `delta` in place.
    pub fn project(&self, delta: &mut [f64]) {
        for &i in &self.immutable_set {
            if let Some(v) = delta.get_mut(i) {
                *v = 0.0;
            }
        }
    }

    pub(crate) fn check_feasible(&self, delta: &[f64]) -> Result<()> {
        for &i in &self.immutable_set {
            if let Some(&v) = delta.get(i) {
                if v != 0.0 {
                    return Err(Error::InfeasiblePerturbation { index: i, value: v });
                }
            }
        }
        Ok(())
    }
}

fn check_index_set(set: &[usize], dim: usize, what: &str) -> Result<()> {
    let mut seen = vec![false; dim];
    for &i in set {
        if i >= dim {
            return Err(Error::InvalidInput(format!("{what}: index {i} out of range for dimension {dim}")));
        }
        if seen[i] {
            return Err(Error::InvalidInput(format!("{what}: duplicate index {i}")));
        }
        seen[i] = true;
    }
    Ok(())
}

/// `n` draws from `U(1, 10)`.
pub fn seeded_weights(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(1.0..10.0)).collect()
}

/// `sign` with `sign(0) = 0`.
pub fn sign0(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Individual terms of the energy at one perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyTerms {
    pub distance: f64,
    pub regularization: f64,
    pub decision: f64,
    /// `f(x0 + delta)`
    pub score: f64,
}

impl EnergyTerms {
    pub fn total(&self) -> f64 {
        self.distance + self.regularization + self.decision
    }
}

fn check_inputs(params: &EnergyParams, model: &ModelHandle, x0: &[f64], delta: &[f64]) -> Result<Vec<f64>> {
    ensure_dim(model.dim(), x0.len())?;
    ensure_dim(model.dim(), delta.len())?;
    ensure_finite(x0, "x0")?;
    ensure_finite(delta, "delta")?;
    params.check_feasible(delta)?;
    Ok(x0.iter().zip(delta).map(|(a, b)| a + b).collect())
}

pub fn energy_terms(params: &EnergyParams, model: &ModelHandle, x0: &[f64], delta: &[f64]) -> Result<EnergyTerms> {
    let x = check_inputs(params, model, x0, delta)?;
    let score = model.predict(&x)?;
    let w = params.dense_weights(delta.len());
    let reg: f64 = w.iter().zip(delta).map(|(wi, d)| wi * d.abs()).sum();
    Ok(EnergyTerms {
        distance: numdiff::norm(delta),
        regularization: params.lambda * reg,
        decision: params.mu * (score - params.target_c).abs(),
        score,
    })
}

pub fn energy(params: &EnergyParams, model: &ModelHandle, x0: &[f64], delta: &[f64]) -> Result<f64> {
    energy_terms(params, model, x0, delta).map(|t| t.total())
}

/// Subgradient of the energy with the selection 0 at every kink.
pub fn energy_gradient(params: &EnergyParams, model: &ModelHandle, x0: &[f64], delta: &[f64]) -> Result<Vec<f64>> {
    let x = check_inputs(params, model, x0, delta)?;
    let score = model.predict(&x)?;
    let grad_f = model.gradient(&x)?;
    let w = params.dense_weights(delta.len());
    let n = numdiff::norm(delta);
    let s = sign0(score - params.target_c);
    let mut g: Vec<f64> = delta
        .iter()
        .zip(&w)
        .zip(&grad_f)
        .map(|((d, wi), gf)| {
            let dist = if n > 0.0 { d / n } else { 0.0 };
            dist + params.lambda * wi * sign0(*d) + params.mu * s * gf
        })
        .collect();
    params.project(&mut g);
    Ok(g)
}

/// Hessian of the energy away from kinks: `(I - u u^T)/|delta| + mu sign(f - c) H_f`.
/// The L1 part contributes 0 and the norm part is 0 at `delta = 0`.
pub fn energy_hessian(params: &EnergyParams, model: &ModelHandle, x0: &[f64], delta: &[f64]) -> Result<Matrix> {
    let x = check_inputs(params, model, x0, delta)?;
    let d = delta.len();
    let score = model.predict(&x)?;
    let s = sign0(score - params.target_c);
    let mut h = if s != 0.0 && params.mu > 0.0 {
        model.hessian(&x)? * (params.mu * s)
    } else {
        Matrix::zeros(d, d)
    };
    let n = numdiff::norm(delta);
    if n > 0.0 {
        for i in 0..d {
            for j in 0..d {
                let eye = if i == j { 1.0 } else { 0.0 };
                h[(i, j)] += (eye - delta[i] * delta[j] / (n * n)) / n;
            }
        }
    }
    for &i in &params.immutable_set {
        for j in 0..d {
            h[(i, j)] = 0.0;
            h[(j, i)] = 0.0;
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaylorOrder {
    First,
    Second,
}

/// `f(x0) + grad f(x0) . delta` (+ `0.5 delta^T H(x0) delta` at second order).
pub fn taylor_predict(model: &ModelHandle, x0: &[f64], delta: &[f64], order: TaylorOrder) -> Result<f64> {
    ensure_dim(model.dim(), delta.len())?;
    ensure_finite(delta, "delta")?;
    let f0 = model.predict(x0)?;
    let g = model.gradient(x0)?;
    let mut v = f0 + numdiff::dot(&g, delta);
    if order == TaylorOrder::Second {
        let h = model.hessian(x0)?;
        let dv = nalgebra::DVector::from_column_slice(delta);
        v += 0.5 * dv.dot(&(&h * &dv));
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn reference() -> ModelHandle {
        ModelHandle::reference_landscape()
    }

    #[test]
    fn zero_delta_on_threshold_is_zero() {
        let model = ModelHandle::linear(vec![1.0, 2.0], 0.0).unwrap();
        let p = EnergyParams::new(1.0, 1.0, 3.0).with_critical(vec![0], vec![2.0]);
        assert_eq!(energy(&p, &model, &[1.0, 1.0], &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn weighted_l1_example() {
        let model = ModelHandle::linear(vec![1.0, 2.0], 0.0).unwrap();
        let p = EnergyParams::new(1.0, 0.0, 0.0).with_critical(vec![0, 1], vec![2.0, 3.0]);
        let e = energy(&p, &model, &[0.0, 0.0], &[1.0, -1.0]).unwrap();
        assert!((e - (2f64.sqrt() + 5.0)).abs() < 1e-12);
    }

    #[test]
    fn reference_landscape_matches_scalar_oracle() {
        let w = seeded_weights(2, 7);
        let p = EnergyParams::new(1.0, 1.0, 0.0).with_critical(vec![0, 1], w.clone());
        let e = energy(&p, &reference(), &[3.0, 3.0], &[-3.0, -3.0]).unwrap();
        // x0 + delta = 0, f = 0.5.
        let oracle = (18.0f64).sqrt() + 3.0 * (w[0] + w[1]) + 0.5;
        assert!((e - oracle).abs() < 1e-12);
    }

    #[test]
    fn immutable_delta_is_infeasible() {
        let p = EnergyParams::new(1.0, 1.0, 0.0).with_immutable(vec![1]);
        assert_eq!(
            energy(&p, &reference(), &[3.0, 3.0], &[0.0, 0.5]),
            Err(Error::InfeasiblePerturbation { index: 1, value: 0.5 })
        );
    }

    #[test]
    fn gradient_examples() {
        let model = ModelHandle::linear(vec![1.0, 2.0], 0.0).unwrap();
        let p = EnergyParams::new(0.0, 0.0, 0.0);
        assert_eq!(energy_gradient(&p, &model, &[0.0, 0.0], &[3.0, 4.0]).unwrap(), vec![0.6, 0.8]);
        let p = EnergyParams::new(0.0, 1.0, -10.0);
        assert_eq!(energy_gradient(&p, &model, &[0.0, 0.0], &[1.0, 0.0]).unwrap(), vec![2.0, 2.0]);
    }

    #[test]
    fn gradient_at_origin_uses_zero_selection() {
        let model = ModelHandle::linear(vec![1.0, 2.0], 0.0).unwrap();
        let p = EnergyParams::new(1.0, 1.0, 0.0).with_critical(vec![0], vec![3.0]);
        // f = c at the origin: every term has selection 0.
        assert_eq!(energy_gradient(&p, &model, &[0.0, 0.0], &[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn hessian_matches_differenced_gradient() {
        let model = ModelHandle::reference_rbf();
        let p = EnergyParams::new(0.7, 1.3, 0.2).with_critical(vec![1], vec![2.0]);
        let x0 = [0.3, -0.2];
        let delta = [0.4, 0.9];
        let h = energy_hessian(&p, &model, &x0, &delta).unwrap();
        let fd = numdiff::hessian_from_gradient(|d| energy_gradient(&p, &model, &x0, d).unwrap(), &delta);
        assert!((h - fd).abs().max() < 1e-5);
    }

    #[test]
    fn taylor_is_exact_where_expected() {
        let lin = ModelHandle::linear(vec![1.0, -2.0], 0.5).unwrap();
        let x0 = [0.2, 0.4];
        let d = [1.5, -0.7];
        let exact = lin.predict(&[1.7, -0.3]).unwrap();
        assert_eq!(taylor_predict(&lin, &x0, &d, TaylorOrder::First).unwrap(), exact);
        let q = ModelHandle::quadratic(vec![vec![3.0, 1.0], vec![1.0, 1.0]], vec![0.5, -1.0], 2.0).unwrap();
        let exact = q.predict(&[1.7, -0.3]).unwrap();
        assert!((taylor_predict(&q, &x0, &d, TaylorOrder::Second).unwrap() - exact).abs() < 1e-10);
    }

    #[test]
    fn first_order_error_within_curvature_bound() {
        let lg = ModelHandle::logistic(vec![1.0, 1.0], -1.0).unwrap();
        let x0 = [1.0, 1.0];
        let d = [0.01, 0.01];
        let approx = taylor_predict(&lg, &x0, &d, TaylorOrder::First).unwrap();
        let exact = lg.predict(&[1.01, 1.01]).unwrap();
        let h = lg.hessian(&x0).unwrap();
        let lmax = h.symmetric_eigenvalues().iter().fold(f64::MIN, |a, b| a.max(b.abs()));
        // Slack covers the variation of H along the short segment.
        assert!((approx - exact).abs() <= 0.5 * lmax * 2e-4 * 1.05);
    }

    proptest! {
        #[test]
        fn energy_nonnegative(d0 in -10.0f64..10.0, d1 in -10.0f64..10.0, lam in 0.0f64..5.0, mu in 0.0f64..5.0, c in -1.0f64..2.0) {
            let p = EnergyParams::new(lam, mu, c).with_critical(vec![0, 1], vec![1.5, 4.0]);
            prop_assert!(energy(&p, &reference(), &[3.0, 3.0], &[d0, d1]).unwrap() >= 0.0);
        }

        #[test]
        fn energy_increasing_in_mu(d0 in -10.0f64..2.0, d1 in -10.0f64..2.0, mu in 0.0f64..5.0) {
            let p1 = EnergyParams::new(1.0, mu, 0.3);
            let p2 = EnergyParams::new(1.0, mu + 0.5, 0.3);
            let t = energy_terms(&p1, &reference(), &[3.0, 3.0], &[d0, d1]).unwrap();
            prop_assume!(t.score != 0.3);
            prop_assert!(energy(&p2, &reference(), &[3.0, 3.0], &[d0, d1]).unwrap() > t.total());
        }

        #[test]
        fn weight_lambda_scaling(d0 in -5.0f64..5.0, d1 in -5.0f64..5.0, lam in 0.01f64..5.0) {
            let p1 = EnergyParams::new(lam, 0.0, 0.0).with_critical(vec![0, 1], vec![2.0, 7.0]);
            let p2 = EnergyParams::new(lam / 2.0, 0.0, 0.0).with_critical(vec![0, 1], vec![4.0, 14.0]);
            let a = energy_terms(&p1, &reference(), &[3.0, 3.0], &[d0, d1]).unwrap().regularization;
            let b = energy_terms(&p2, &reference(), &[3.0, 3.0], &[d0, d1]).unwrap().regularization;
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
        }
    }
}
