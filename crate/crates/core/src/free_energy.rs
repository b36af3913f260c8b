//! Free energy `F = E - S / beta`, its gradient and Hessian, the entropy
//! surrogate used along a search trajectory, and power-iteration `lambda_max`.

use std::cell::RefCell;
use std::f64::consts::{E, PI};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::energy::{self, EnergyParams};
use crate::entropy::{BoxDomain, Covariance, Gaussian};
use crate::error::{ensure_dim, Error, Result};
use crate::model::ModelHandle;
use crate::numdiff;
use crate::Matrix;

/// How the surrogate covariance depends on the trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EntropyMode {
    /// Fixed covariance: `S` is constant and `grad S = 0`.
    Static,
    /// Diagonal covariance `base + var(recent iterates and the point)` over a
    /// window of `window` points.
    Adaptive { window: usize },
}

impl Default for EntropyMode {
    fn default() -> Self {
        EntropyMode::Adaptive { window: 25 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EntropyEstimator {
    #[default]
    ClosedForm,
    /// `-(1/K) sum ln p` with the same `K` standard-normal draws at every
    /// evaluation, so the estimate is a deterministic function of the point.
    MonteCarlo { samples: usize, seed: u64 },
}

/// Gaussian surrogate of the perturbation distribution around a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EntropyModel {
    #[serde(default)]
    pub mode: EntropyMode,
    /// Per-dimension variance floor `sigma_0^2`.
    #[serde(default = "default_variance")]
    pub base_variance: f64,
    #[serde(default)]
    pub estimator: EntropyEstimator,
}

fn default_variance() -> f64 {
    0.25
}

impl Default for EntropyModel {
    fn default() -> Self {
        Self {
            mode: EntropyMode::default(),
            base_variance: default_variance(),
            estimator: EntropyEstimator::ClosedForm,
        }
    }
}

struct WindowStats {
    n: f64,
    mean: Vec<f64>,
    var: Vec<f64>,
}

impl EntropyModel {
    pub fn fixed() -> Self {
        Self {
            mode: EntropyMode::Static,
            ..Self::default()
        }
    }

    pub fn adaptive(window: usize) -> Self {
        Self {
            mode: EntropyMode::Adaptive { window },
            ..Self::default()
        }
    }

    pub fn with_estimator(mut self, estimator: EntropyEstimator) -> Self {
        self.estimator = estimator;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_variance > 0.0 && self.base_variance.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "base_variance must be positive, got {}",
                self.base_variance
            )));
        }
        if let EntropyMode::Adaptive { window } = self.mode {
            if window < 2 {
                return Err(Error::InvalidInput("adaptive window must be at least 2".into()));
            }
        }
        if let EntropyEstimator::MonteCarlo { samples, .. } = self.estimator {
            if samples == 0 {
                return Err(Error::InvalidInput("entropy sample count must be positive".into()));
            }
        }
        Ok(())
    }

    fn window<'h>(&self, history: &'h [Vec<f64>]) -> &'h [Vec<f64>] {
        match self.mode {
            EntropyMode::Static => &[],
            EntropyMode::Adaptive { window } => &history[history.len().saturating_sub(window - 1)..],
        }
    }

    fn stats(&self, point: &[f64], history: &[Vec<f64>]) -> WindowStats {
        let prior = self.window(history);
        let d = point.len();
        let n = (prior.len() + 1) as f64;
        let mut mean = point.to_vec();
        for p in prior {
            for (m, v) in mean.iter_mut().zip(p) {
                *m += v;
            }
        }
        for m in mean.iter_mut() {
            *m /= n;
        }
        let mut var = vec![0.0; d];
        for p in prior.iter().map(|p| p.as_slice()).chain(std::iter::once(point)) {
            for ((s, v), m) in var.iter_mut().zip(p).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        for s in var.iter_mut() {
            *s = self.base_variance + *s / n;
        }
        WindowStats { n, mean, var }
    }

    /// Surrogate variances at `point` given past accepted iterates.
    pub fn variances(&self, point: &[f64], history: &[Vec<f64>]) -> Vec<f64> {
        self.stats(point, history).var
    }

    pub fn entropy(&self, point: &[f64], history: &[Vec<f64>]) -> Result<f64> {
        let var = self.variances(point, history);
        match self.estimator {
            EntropyEstimator::ClosedForm => {
                let d = var.len() as f64;
                Ok(0.5 * var.iter().map(|v| v.ln()).sum::<f64>() + 0.5 * d * (2.0 * PI * E).ln())
            }
            EntropyEstimator::MonteCarlo { samples, seed } => {
                let g = Gaussian::new(point.to_vec(), Covariance::Diagonal(var))?;
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let mut acc = 0.0;
                for _ in 0..samples {
                    acc -= g.log_density(&g.sample(&mut rng));
                }
                Ok(acc / samples as f64)
            }
        }
    }

    /// Gradient of the surrogate entropy with respect to `point`.
    ///
    /// Under common random numbers the Monte-Carlo estimate differs from the
    /// closed form by a point-independent constant, so both share this gradient.
    pub fn gradient(&self, point: &[f64], history: &[Vec<f64>]) -> Vec<f64> {
        if self.mode == EntropyMode::Static {
            return vec![0.0; point.len()];
        }
        let s = self.stats(point, history);
        point
            .iter()
            .zip(&s.mean)
            .zip(&s.var)
            .map(|((x, m), v)| (x - m) / (s.n * v))
            .collect()
    }

    /// Diagonal Hessian of the surrogate entropy with respect to `point`.
    pub fn hessian_diagonal(&self, point: &[f64], history: &[Vec<f64>]) -> Vec<f64> {
        if self.mode == EntropyMode::Static {
            return vec![0.0; point.len()];
        }
        let s = self.stats(point, history);
        let n = s.n;
        point
            .iter()
            .zip(&s.mean)
            .zip(&s.var)
            .map(|((x, m), v)| (1.0 - 1.0 / n) / (n * v) - 2.0 * (x - m).powi(2) / (n * n * v * v))
            .collect()
    }
}

/// Evaluated point of the free-energy surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeEnergyState {
    pub delta: Vec<f64>,
    pub energy: f64,
    pub entropy: f64,
    pub free_energy: f64,
    pub grad_norm: f64,
    pub beta: f64,
    /// `f(x0 + delta)`
    pub score: f64,
}

/// Everything needed to evaluate `F` at a perturbation of `x0`.
#[derive(Debug, Clone, Copy)]
pub struct FreeEnergyProblem<'a> {
    pub params: &'a EnergyParams,
    pub model: &'a ModelHandle,
    pub x0: &'a [f64],
    pub entropy: &'a EntropyModel,
}

fn check_beta(beta: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidInput(format!("beta must be positive and finite, got {beta}")));
    }
    Ok(())
}

impl<'a> FreeEnergyProblem<'a> {
    pub fn new(params: &'a EnergyParams, model: &'a ModelHandle, x0: &'a [f64], entropy: &'a EntropyModel) -> Result<Self> {
        ensure_dim(model.dim(), x0.len())?;
        params.validate(model.dim())?;
        entropy.validate()?;
        Ok(Self {
            params,
            model,
            x0,
            entropy,
        })
    }

    pub fn dim(&self) -> usize {
        self.x0.len()
    }

    fn check_history(&self, history: &[Vec<f64>]) -> Result<()> {
        for h in history {
            ensure_dim(self.dim(), h.len())?;
        }
        Ok(())
    }

    /// `(E, S, F, score)` without the gradient.
    pub fn components(&self, delta: &[f64], history: &[Vec<f64>], beta: f64) -> Result<(f64, f64, f64, f64)> {
        check_beta(beta)?;
        self.check_history(history)?;
        let t = energy::energy_terms(self.params, self.model, self.x0, delta)?;
        let e = t.total();
        let s = self.entropy.entropy(delta, history)?;
        let f = e - s / beta;
        if !f.is_finite() {
            return Err(Error::NumericalFailure(format!("free energy {f}")));
        }
        Ok((e, s, f, t.score))
    }

    pub fn value(&self, delta: &[f64], history: &[Vec<f64>], beta: f64) -> Result<f64> {
        self.components(delta, history, beta).map(|c| c.2)
    }

    pub fn gradient(&self, delta: &[f64], history: &[Vec<f64>], beta: f64) -> Result<Vec<f64>> {
        check_beta(beta)?;
        self.check_history(history)?;
        let mut g = energy::energy_gradient(self.params, self.model, self.x0, delta)?;
        let gs = self.entropy.gradient(delta, history);
        for (gi, si) in g.iter_mut().zip(&gs) {
            *gi -= si / beta;
        }
        self.params.project(&mut g);
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("non-finite free-energy gradient".into()));
        }
        Ok(g)
    }

    /// Full state including `|grad F|`, plus the gradient itself.
    pub fn evaluate(&self, delta: &[f64], history: &[Vec<f64>], beta: f64) -> Result<(FreeEnergyState, Vec<f64>)> {
        let (energy, entropy, free_energy, score) = self.components(delta, history, beta)?;
        let g = self.gradient(delta, history, beta)?;
        Ok((
            FreeEnergyState {
                delta: delta.to_vec(),
                energy,
                entropy,
                free_energy,
                grad_norm: numdiff::norm(&g),
                beta,
                score,
            },
            g,
        ))
    }

    /// Analytic composition `H_E - H_S / beta`.
    pub fn hessian(&self, delta: &[f64], history: &[Vec<f64>], beta: f64) -> Result<Matrix> {
        check_beta(beta)?;
        self.check_history(history)?;
        let mut h = energy::energy_hessian(self.params, self.model, self.x0, delta)?;
        for (i, hs) in self.entropy.hessian_diagonal(delta, history).iter().enumerate() {
            if !self.params.is_immutable(i) {
                h[(i, i)] -= hs / beta;
            }
        }
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("non-finite free-energy Hessian".into()));
        }
        Ok(h)
    }

    /// Central differences of the gradient, symmetrized.
    pub fn hessian_fd(&self, delta: &[f64], history: &[Vec<f64>], beta: f64) -> Result<Matrix> {
        self.gradient(delta, history, beta)?;
        let failure = RefCell::new(None);
        let h = numdiff::hessian_from_gradient(
            |d| match self.gradient(d, history, beta) {
                Ok(g) => g,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    vec![0.0; d.len()]
                }
            },
            delta,
        );
        match failure.into_inner() {
            Some(e) => Err(e),
            None => Ok(h),
        }
    }
}

pub fn free_energy(
    params: &EnergyParams,
    model: &ModelHandle,
    x0: &[f64],
    delta: &[f64],
    entropy: &EntropyModel,
    beta: f64,
) -> Result<FreeEnergyState> {
    FreeEnergyProblem::new(params, model, x0, entropy)?
        .evaluate(delta, &[], beta)
        .map(|(s, _)| s)
}

pub fn free_energy_gradient(
    params: &EnergyParams,
    model: &ModelHandle,
    x0: &[f64],
    delta: &[f64],
    entropy: &EntropyModel,
    beta: f64,
) -> Result<Vec<f64>> {
    FreeEnergyProblem::new(params, model, x0, entropy)?.gradient(delta, &[], beta)
}

pub fn free_energy_hessian(
    params: &EnergyParams,
    model: &ModelHandle,
    x0: &[f64],
    delta: &[f64],
    entropy: &EntropyModel,
    beta: f64,
) -> Result<Matrix> {
    FreeEnergyProblem::new(params, model, x0, entropy)?.hessian_fd(delta, &[], beta)
}

/// Dominant eigenvalue and the number of iterations used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Spectral {
    pub value: f64,
    pub iterations: usize,
}

/// Largest eigenvalue of a symmetric matrix by power iteration on
/// `A + sigma I`, `sigma = |A|_inf`. Stops when successive Rayleigh quotients
/// differ by at most `tol * max(1, |rho|)`.
pub fn lambda_max(matrix: &Matrix, tol: f64, max_iters: usize) -> Result<f64> {
    lambda_max_detailed(matrix, tol, max_iters).map(|s| s.value)
}

pub fn lambda_max_detailed(matrix: &Matrix, tol: f64, max_iters: usize) -> Result<Spectral> {
    let n = matrix.nrows();
    if n == 0 || matrix.ncols() != n {
        return Err(Error::InvalidInput("lambda_max needs a nonempty square matrix".into()));
    }
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("lambda_max: non-finite entry".into()));
    }
    if !(tol > 0.0) || max_iters == 0 {
        return Err(Error::InvalidInput("lambda_max: tol and max_iters must be positive".into()));
    }
    let sigma = matrix
        .row_iter()
        .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    if sigma == 0.0 {
        return Ok(Spectral {
            value: 0.0,
            iterations: 0,
        });
    }
    let mut b = matrix.clone();
    for i in 0..n {
        b[(i, i)] += sigma;
    }
    // Deterministic start with generic components.
    let mut v = nalgebra::DVector::from_fn(n, |i, _| 1.0 + 0.1 * ((i + 1) as f64).sin());
    v /= v.norm();
    let mut rho = v.dot(&(&b * &v));
    for it in 1..=max_iters {
        let w = &b * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return Ok(Spectral {
                value: -sigma,
                iterations: it,
            });
        }
        v = w / norm;
        let next = v.dot(&(&b * &v));
        if (next - rho).abs() <= tol * next.abs().max(1.0) {
            return Ok(Spectral {
                value: next - sigma,
                iterations: it,
            });
        }
        rho = next;
    }
    Err(Error::SpectralFailure {
        estimate: rho - sigma,
        iterations: max_iters,
    })
}

/// One landscape grid cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LandscapePoint {
    pub delta0: f64,
    pub delta1: f64,
    pub energy: f64,
    pub entropy: f64,
    pub free_energy: f64,
}

/// `F` on a `resolution x resolution` grid over a 2-D box, row-major in
/// `delta0`. Each cell uses the surrogate centered at that point with no history.
pub fn landscape_grid(problem: &FreeEnergyProblem<'_>, domain: &BoxDomain, resolution: usize, beta: f64) -> Result<Vec<LandscapePoint>> {
    domain.validate()?;
    if domain.dim() != 2 || problem.dim() != 2 {
        return Err(Error::InvalidInput("landscape export needs a 2-D problem and box".into()));
    }
    if resolution < 2 {
        return Err(Error::InvalidInput("landscape resolution must be at least 2".into()));
    }
    let axis = |k: usize, i: usize| {
        domain.lower[k] + (domain.upper[k] - domain.lower[k]) * i as f64 / (resolution - 1) as f64
    };
    (0..resolution * resolution)
        .into_par_iter()
        .map(|idx| {
            let d = [axis(0, idx / resolution), axis(1, idx % resolution)];
            let (energy, entropy, free_energy, _) = problem.components(&d, &[], beta)?;
            Ok(LandscapePoint {
                delta0: d[0],
                delta1: d[1],
                energy,
                entropy,
                free_energy,
            })
        })
        .collect()
}
