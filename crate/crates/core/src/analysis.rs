//! Experiment drivers: parameter stability sweeps, cross-method variability,
//! decision-boundary grids, robustness diagnostics and timing benchmarks.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annealer::{find_counterfactual, AnnealConfig, BetaSchedule, CounterfactualResult};
use crate::baselines::{gradient_counterfactual, surrogate_method, GradientCfConfig, SurrogateConfig};
use crate::energy::{seeded_weights, EnergyParams};
use crate::entropy::BoxDomain;
use crate::error::{Error, Result};
use crate::free_energy::{lambda_max, lambda_max_detailed, EntropyEstimator, EntropyModel, FreeEnergyProblem};
use crate::model::ModelHandle;
use crate::numdiff;
use crate::Matrix;

/// Scalar function with first and second derivatives.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn hessian(&self, x: &[f64]) -> Result<Matrix>;
}

/// `F` over perturbations for a fixed history and temperature.
pub struct FreeEnergyObjective<'a> {
    pub problem: FreeEnergyProblem<'a>,
    pub history: Vec<Vec<f64>>,
    pub beta: f64,
}

impl Objective for FreeEnergyObjective<'_> {
    fn dim(&self) -> usize {
        self.problem.dim()
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        self.problem.value(x, &self.history, self.beta)
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.problem.gradient(x, &self.history, self.beta)
    }
    fn hessian(&self, x: &[f64]) -> Result<Matrix> {
        self.problem.hessian(x, &self.history, self.beta)
    }
}

/// `0.5 x^T A x + b . x`
#[derive(Debug, Clone)]
pub struct QuadraticObjective {
    pub a: Matrix,
    pub b: Vec<f64>,
}

impl Objective for QuadraticObjective {
    fn dim(&self) -> usize {
        self.b.len()
    }
    fn value(&self, x: &[f64]) -> Result<f64> {
        let v = nalgebra::DVector::from_column_slice(x);
        Ok(0.5 * v.dot(&(&self.a * &v)) + numdiff::dot(&self.b, x))
    }
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let v = &self.a * nalgebra::DVector::from_column_slice(x);
        Ok(v.iter().zip(&self.b).map(|(a, b)| a + b).collect())
    }
    fn hessian(&self, _x: &[f64]) -> Result<Matrix> {
        Ok(self.a.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StabilityMetric {
    /// `exp(-cv)` of `|delta|` over converged runs.
    RunDispersion,
    SuccessRate,
    /// `success_rate * exp(-cv)`
    #[default]
    Combined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub lambdas: Vec<f64>,
    pub mus: Vec<f64>,
    pub betas: Vec<f64>,
    pub seeds_per_cell: usize,
    #[serde(default)]
    pub stability_metric: StabilityMetric,
    /// Every run in a cell reuses the base seed.
    #[serde(default)]
    pub identical_seeds: bool,
}

impl SweepGrid {
    pub fn validate(&self) -> Result<()> {
        if self.lambdas.is_empty() || self.mus.is_empty() || self.betas.is_empty() {
            return Err(Error::InvalidInput("sweep axes must be nonempty".into()));
        }
        for (name, axis) in [("lambdas", &self.lambdas), ("mus", &self.mus)] {
            if axis.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidInput(format!("{name} must be positive")));
            }
            if axis.windows(2).any(|w| w[1] < w[0]) {
                return Err(Error::InvalidInput(format!("{name} must be sorted")));
            }
        }
        if self.betas.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidInput("betas must be positive".into()));
        }
        if self.seeds_per_cell == 0 {
            return Err(Error::InvalidInput("seeds_per_cell must be positive".into()));
        }
        if self.seeds_per_cell < 2 && self.stability_metric != StabilityMetric::SuccessRate {
            return Err(Error::InvalidInput("dispersion metrics need seeds_per_cell >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub lambda: f64,
    pub mu: f64,
    pub beta: f64,
    pub stability: f64,
    pub success_rate: f64,
    /// Coefficient of variation of `|delta|` over converged runs.
    pub dispersion: f64,
    /// Median of `lambda_max(H_F)` at the returned perturbations.
    pub median_lambda_max: f64,
}

fn median(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, var.sqrt())
}

/// Curvature of `F` at a returned perturbation, using its own history.
pub fn final_lambda_max(
    model: &ModelHandle,
    x0: &[f64],
    eparams: &EnergyParams,
    entropy: &EntropyModel,
    result: &CounterfactualResult,
) -> Result<f64> {
    let mut p = eparams.clone();
    p.mu = result.final_mu;
    let problem = FreeEnergyProblem::new(&p, model, x0, entropy)?;
    let beta = result.trace.last().map(|r| r.beta).unwrap_or(0.0);
    let h = problem.hessian(&result.delta, &result.accepted_history(), beta)?;
    match lambda_max_detailed(&h, 1e-9, 2000) {
        Ok(s) => Ok(s.value),
        Err(Error::SpectralFailure { estimate, .. }) => Ok(estimate),
        Err(e) => Err(e),
    }
}

/// Stability score per `(lambda, mu, beta)` cell, ordered beta-major, then
/// lambda, then mu.
pub fn stability_sweep(
    model: &ModelHandle,
    x0: &[f64],
    grid: &SweepGrid,
    base_eparams: &EnergyParams,
    base_cfg: &AnnealConfig,
    entropy: &EntropyModel,
) -> Result<Vec<SweepCell>> {
    grid.validate()?;
    let mut cells = Vec::new();
    for &beta in &grid.betas {
        for &lambda in &grid.lambdas {
            for &mu in &grid.mus {
                cells.push((lambda, mu, beta));
            }
        }
    }
    cells
        .par_iter()
        .map(|&(lambda, mu, beta)| {
            let mut p = base_eparams.clone();
            p.lambda = lambda;
            p.mu = mu;
            let runs: Vec<CounterfactualResult> = (0..grid.seeds_per_cell)
                .map(|s| {
                    let mut cfg = base_cfg.clone();
                    cfg.beta = BetaSchedule::Constant { beta };
                    if !grid.identical_seeds {
                        cfg.seed = base_cfg.seed.wrapping_add(s as u64);
                    }
                    find_counterfactual(model, x0, &p, &cfg, entropy)
                })
                .collect::<Result<_>>()?;
            let norms: Vec<f64> = runs.iter().filter(|r| r.converged).map(|r| numdiff::norm(&r.delta)).collect();
            let success_rate = norms.len() as f64 / runs.len() as f64;
            let (m, sd) = mean_std(&norms);
            let dispersion = if norms.is_empty() {
                f64::NAN
            } else if m > 0.0 {
                sd / m
            } else {
                0.0
            };
            let disp_score = if norms.is_empty() { 0.0 } else { (-dispersion).exp() };
            let stability = match grid.stability_metric {
                StabilityMetric::RunDispersion => disp_score,
                StabilityMetric::SuccessRate => success_rate,
                StabilityMetric::Combined => success_rate * disp_score,
            };
            let mut lmax = runs
                .iter()
                .map(|r| final_lambda_max(model, x0, &p, entropy, r))
                .collect::<Result<Vec<f64>>>()?;
            Ok(SweepCell {
                lambda,
                mu,
                beta,
                stability,
                success_rate,
                dispersion,
                median_lambda_max: median(&mut lmax),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    FreeEnergy,
    Gradient,
    Surrogate,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::FreeEnergy => "free-energy",
            Method::Gradient => "gradient",
            Method::Surrogate => "surrogate",
        }
    }
}

/// Settings for every method in a variability comparison.
#[derive(Debug, Clone)]
pub struct VariabilitySetup {
    pub eparams: EnergyParams,
    pub anneal: AnnealConfig,
    pub entropy: EntropyModel,
    pub gradient: GradientCfConfig,
    pub surrogate: SurrogateConfig,
    /// Convergence tolerance used to score surrogate counterfactuals.
    pub epsilon: f64,
    /// Redraw the `U(1, 10)` critical weights from each free-energy run's seed.
    pub reseed_weights: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariabilityRow {
    pub feature: String,
    pub method: String,
    pub mean_abs_delta: f64,
    pub std_abs_delta: f64,
}

/// Runs one method with the run seed `seed`.
pub fn run_method(model: &ModelHandle, x0: &[f64], method: Method, setup: &VariabilitySetup, seed: u64) -> Result<CounterfactualResult> {
    match method {
        Method::FreeEnergy => {
            let mut cfg = setup.anneal.clone();
            cfg.seed = seed;
            let mut p = setup.eparams.clone();
            if setup.reseed_weights {
                p.weights = seeded_weights(p.critical_set.len(), seed);
            }
            let mut entropy = setup.entropy;
            if let EntropyEstimator::MonteCarlo { samples, .. } = entropy.estimator {
                entropy.estimator = EntropyEstimator::MonteCarlo { samples, seed };
            }
            find_counterfactual(model, x0, &p, &cfg, &entropy)
        }
        Method::Gradient => gradient_counterfactual(model, x0, &GradientCfConfig { seed, ..setup.gradient.clone() }),
        Method::Surrogate => surrogate_method(
            model,
            x0,
            setup.eparams.target_c,
            setup.epsilon,
            &SurrogateConfig { seed, ..setup.surrogate.clone() },
        ),
    }
}

/// Per-feature mean and sample std of `|delta|` over `n_runs` seeds per method.
/// Run `i` uses seed `seed + i`.
pub fn method_variability(
    model: &ModelHandle,
    x0: &[f64],
    methods: &[Method],
    setup: &VariabilitySetup,
    feature_names: &[String],
    n_runs: usize,
    seed: u64,
) -> Result<(Vec<VariabilityRow>, Vec<CounterfactualResult>)> {
    if n_runs < 2 {
        return Err(Error::InvalidInput("n_runs must be at least 2".into()));
    }
    if feature_names.len() != x0.len() {
        return Err(Error::DimensionMismatch {
            expected: x0.len(),
            got: feature_names.len(),
        });
    }
    let jobs: Vec<(Method, u64)> = methods
        .iter()
        .flat_map(|m| (0..n_runs).map(move |i| (*m, seed.wrapping_add(i as u64))))
        .collect();
    let results: Vec<CounterfactualResult> = jobs
        .par_iter()
        .map(|(m, s)| run_method(model, x0, *m, setup, *s))
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for (j, name) in feature_names.iter().enumerate() {
        for (k, m) in methods.iter().enumerate() {
            let vals: Vec<f64> = results[k * n_runs..(k + 1) * n_runs].iter().map(|r| r.delta[j].abs()).collect();
            let (mean, std) = mean_std(&vals);
            rows.push(VariabilityRow {
                feature: name.clone(),
                method: m.name().into(),
                mean_abs_delta: mean,
                std_abs_delta: std,
            });
        }
    }
    Ok((rows, results))
}

/// Model scores on a grid over features `i` and `j`, others held at `x0`.
pub fn boundary_grid(
    model: &ModelHandle,
    x0: &[f64],
    features: (usize, usize),
    range_i: (f64, f64),
    range_j: (f64, f64),
    resolution: usize,
) -> Result<Vec<(f64, f64, f64)>> {
    let (i, j) = features;
    if i >= x0.len() || j >= x0.len() || i == j {
        return Err(Error::InvalidInput("boundary grid needs two distinct valid features".into()));
    }
    if resolution < 2 {
        return Err(Error::InvalidInput("boundary resolution must be at least 2".into()));
    }
    let at = |r: (f64, f64), k: usize| r.0 + (r.1 - r.0) * k as f64 / (resolution - 1) as f64;
    (0..resolution * resolution)
        .into_par_iter()
        .map(|idx| {
            let (a, b) = (at(range_i, idx / resolution), at(range_j, idx % resolution));
            let mut x = x0.to_vec();
            x[i] = a;
            x[j] = b;
            Ok((a, b, model.predict(&x)?))
        })
        .collect()
}

/// Largest observed `|F(a) - F(b)| / |a - b|` over `n_pairs` uniform pairs
/// in `domain`; a lower bound on the Lipschitz constant. The first `k` pairs
/// do not depend on `n_pairs`.
pub fn lipschitz_estimate<F>(f: F, domain: &BoxDomain, n_pairs: usize, seed: u64) -> Result<f64>
where
    F: Fn(&[f64]) -> f64,
{
    domain.validate()?;
    if n_pairs == 0 {
        return Err(Error::InvalidInput("n_pairs must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best: f64 = 0.0;
    for _ in 0..n_pairs {
        let a = domain.sample(&mut rng);
        let b = domain.sample(&mut rng);
        let dist = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        if dist > 0.0 {
            let slope = (f(&a) - f(&b)).abs() / dist;
            if slope.is_finite() {
                best = best.max(slope);
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorstCase {
    pub eta_star: Vec<f64>,
    /// `F(x + eta*) - F(x)`, at least 0 since `eta = 0` is feasible.
    pub delta_f: f64,
    /// `|grad F| xi + 0.5 lambda_max xi^2`
    pub bound: f64,
    pub grad_norm: f64,
    pub lambda_max: f64,
    /// The search found a shift above the second-order bound.
    pub bound_violated: bool,
}

fn project_ball(v: &mut [f64], xi: f64) {
    let n = numdiff::norm(v);
    if n > xi {
        for x in v.iter_mut() {
            *x *= xi / n;
        }
    }
}

/// Projected normalized-gradient ascent on `F(x + eta)` over `|eta| <= xi`.
/// Restart 0 starts on the boundary along `grad F(x)`; the others start at
/// uniform directions on the boundary.
pub fn worst_case_perturbation(obj: &dyn Objective, x: &[f64], xi: f64, n_restarts: usize, steps: usize, seed: u64) -> Result<WorstCase> {
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::InvalidInput(format!("xi must be positive, got {xi}")));
    }
    let d = obj.dim();
    let f0 = obj.value(x)?;
    let g0 = obj.gradient(x)?;
    let gn = numdiff::norm(&g0);
    let h = obj.hessian(x)?;
    let lmax = match lambda_max_detailed(&h, 1e-10, 5000) {
        Ok(s) => s.value,
        Err(Error::SpectralFailure { estimate, .. }) => estimate,
        Err(e) => return Err(e),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_eta = vec![0.0; d];
    let mut best = 0.0;
    let mut at = vec![0.0; d];
    for r in 0..n_restarts.max(1) {
        let mut dir: Vec<f64> = if r == 0 && gn > 0.0 {
            g0.clone()
        } else {
            (0..d).map(|_| rng.sample(StandardNormal)).collect()
        };
        let n = numdiff::norm(&dir);
        for v in dir.iter_mut() {
            *v *= xi / n;
        }
        let mut eta = dir;
        let mut step = 0.5 * xi;
        for _ in 0..=steps {
            for ((a, b), c) in at.iter_mut().zip(x).zip(&eta) {
                *a = b + c;
            }
            let val = obj.value(&at)? - f0;
            if val > best {
                best = val;
                best_eta.clone_from(&eta);
            }
            let g = obj.gradient(&at)?;
            let norm = numdiff::norm(&g);
            if norm == 0.0 {
                break;
            }
            for (e, gi) in eta.iter_mut().zip(&g) {
                *e += step * gi / norm;
            }
            project_ball(&mut eta, xi);
            step *= 0.97;
        }
    }
    let bound = gn * xi + 0.5 * lmax * xi * xi;
    Ok(WorstCase {
        eta_star: best_eta,
        delta_f: best,
        bound,
        grad_norm: gn,
        lambda_max: lmax,
        bound_violated: best > bound * (1.0 + 1e-9) + 1e-12,
    })
}

/// `lambda_max <= (2 / xi) |grad F|`
pub fn spectral_condition(lambda_max: f64, grad_norm: f64, xi: f64) -> bool {
    lambda_max <= (2.0 / xi) * grad_norm
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessReport {
    pub lipschitz_estimate: f64,
    pub grad_norm: f64,
    pub lambda_max: f64,
    pub adversarial_deviation: f64,
    pub spectral_condition_ok: bool,
    pub budget_xi: f64,
}

/// Lipschitz estimate over the `xi`-box around `x`, worst-case shift and the
/// spectral condition at `x`.
pub fn robustness_report(obj: &dyn Objective, x: &[f64], xi: f64, n_pairs: usize, seed: u64) -> Result<RobustnessReport> {
    let wc = worst_case_perturbation(obj, x, xi, 4, 100, seed)?;
    let domain = BoxDomain::new(x.iter().map(|v| v - xi).collect(), x.iter().map(|v| v + xi).collect())?;
    let lip = lipschitz_estimate(|p| obj.value(p).unwrap_or(f64::NAN), &domain, n_pairs, seed)?;
    Ok(RobustnessReport {
        lipschitz_estimate: lip,
        grad_norm: wc.grad_norm,
        lambda_max: wc.lambda_max,
        adversarial_deviation: wc.delta_f,
        spectral_condition_ok: spectral_condition(wc.lambda_max, wc.grad_norm, xi),
        budget_xi: xi,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchConfig {
    pub dims: Vec<usize>,
    pub k_values: Vec<usize>,
    pub t_values: Vec<usize>,
    /// Sample counts for the surrogate fit along its `N` axis.
    #[serde(default = "default_n_values")]
    pub n_values: Vec<usize>,
    #[serde(default = "default_repeats")]
    pub repeats: usize,
    /// Fixed dimension for the `K`, `T` and `N` axes.
    #[serde(default = "default_bench_dim")]
    pub base_dim: usize,
    /// Fixed `K` for the `d` and `T` axes.
    #[serde(default = "default_bench_k")]
    pub base_k: usize,
    /// Fixed `T` for the `d`, `K` and `N` axes.
    #[serde(default = "default_bench_t")]
    pub base_t: usize,
    /// Fixed surrogate sample count for its `d` axis.
    #[serde(default = "default_bench_n")]
    pub base_n: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_n_values() -> Vec<usize> {
    vec![512, 1024, 2048, 4096]
}
fn default_repeats() -> usize {
    5
}
fn default_bench_dim() -> usize {
    16
}
fn default_bench_k() -> usize {
    256
}
fn default_bench_t() -> usize {
    200
}
fn default_bench_n() -> usize {
    1024
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            dims: vec![32, 64, 128, 256],
            k_values: vec![512, 1024, 2048, 4096],
            t_values: vec![250, 500, 1000, 2000],
            n_values: default_n_values(),
            repeats: default_repeats(),
            base_dim: default_bench_dim(),
            base_k: default_bench_k(),
            base_t: default_bench_t(),
            base_n: default_bench_n(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub method: String,
    pub axis: String,
    pub value: usize,
    pub seconds_median: f64,
    pub seconds_mad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSlope {
    pub method: String,
    pub axis: String,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub slopes: Vec<BenchSlope>,
}

impl BenchReport {
    pub fn slope(&self, method: &str, axis: &str) -> Option<f64> {
        self.slopes.iter().find(|s| s.method == method && s.axis == axis).map(|s| s.slope)
    }
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// Median and median absolute deviation of wall times after one warmup call.
fn time_it<F: FnMut() -> Result<()>>(repeats: usize, mut f: F) -> Result<(f64, f64)> {
    f()?;
    let mut times = Vec::with_capacity(repeats);
    for _ in 0..repeats.max(1) {
        let t = Instant::now();
        f()?;
        times.push(t.elapsed().as_secs_f64());
    }
    let med = median(&mut times.clone());
    let mut dev: Vec<f64> = times.iter().map(|t| (t - med).abs()).collect();
    Ok((med, median(&mut dev)))
}

/// Logistic model in `d` dimensions far from its boundary, so runs use every iteration.
fn bench_problem(d: usize, seed: u64) -> (ModelHandle, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0) / (d as f64).sqrt()).collect();
    let model = ModelHandle::logistic(w.clone(), 0.0).expect("finite weights");
    let x0: Vec<f64> = w.iter().map(|v| 40.0 * v.signum()).collect();
    (model, x0)
}

fn bench_free_energy(d: usize, k: usize, t: usize, seed: u64) -> impl FnMut() -> Result<()> {
    let (model, x0) = bench_problem(d, seed);
    let p = EnergyParams::new(0.1, 1.0, 0.5);
    let mut cfg = AnnealConfig::new(1e-3, 0.1, 1e-12, t, seed);
    cfg.hessian_check = false;
    let entropy = EntropyModel::adaptive(25).with_estimator(EntropyEstimator::MonteCarlo { samples: k, seed });
    move || find_counterfactual(&model, &x0, &p, &cfg, &entropy).map(|_| ())
}

fn bench_gradient(d: usize, t: usize, seed: u64) -> impl FnMut() -> Result<()> {
    let (model, x0) = bench_problem(d, seed);
    let mut cfg = GradientCfConfig::new(1e-3, 0.5, t, seed);
    cfg.tolerance = 1e-300;
    move || gradient_counterfactual(&model, &x0, &cfg).map(|_| ())
}

fn bench_surrogate(d: usize, n: usize, seed: u64) -> impl FnMut() -> Result<()> {
    let (model, x0) = bench_problem(d, seed);
    let cfg = SurrogateConfig::new(n, 0.5, 1e-6, seed);
    move || crate::baselines::fit_local_surrogate(&model, &x0, &cfg).map(|_| ())
}

/// Serial timings per method and axis with fitted log-log slopes.
pub fn complexity_bench(cfg: &BenchConfig) -> Result<BenchReport> {
    if cfg.dims.len() < 2 || cfg.k_values.len() < 2 || cfg.t_values.len() < 2 || cfg.n_values.len() < 2 {
        return Err(Error::InvalidInput("every bench axis needs at least two values".into()));
    }
    if cfg.repeats == 0 {
        return Err(Error::InvalidInput("repeats must be positive".into()));
    }
    let mut rows = Vec::new();
    let mut push = |method: &str, axis: &str, value: usize, timing: (f64, f64)| {
        rows.push(BenchRow {
            method: method.into(),
            axis: axis.into(),
            value,
            seconds_median: timing.0,
            seconds_mad: timing.1,
        });
    };
    let s = cfg.seed;
    for &d in &cfg.dims {
        push("free-energy", "d", d, time_it(cfg.repeats, bench_free_energy(d, cfg.base_k, cfg.base_t, s))?);
    }
    for &k in &cfg.k_values {
        push("free-energy", "K", k, time_it(cfg.repeats, bench_free_energy(cfg.base_dim, k, cfg.base_t, s))?);
    }
    for &t in &cfg.t_values {
        push("free-energy", "T", t, time_it(cfg.repeats, bench_free_energy(cfg.base_dim, cfg.base_k, t, s))?);
    }
    let gt = *cfg.t_values.iter().max().expect("nonempty");
    for &d in &cfg.dims {
        push("gradient", "d", d, time_it(cfg.repeats, bench_gradient(d, gt, s))?);
    }
    for &t in &cfg.t_values {
        push("gradient", "T", t, time_it(cfg.repeats, bench_gradient(cfg.base_dim, t, s))?);
    }
    for &d in &cfg.dims {
        push("surrogate", "d", d, time_it(cfg.repeats, bench_surrogate(d, cfg.base_n, s))?);
    }
    for &n in &cfg.n_values {
        push("surrogate", "N", n, time_it(cfg.repeats, bench_surrogate(cfg.base_dim, n, s))?);
    }
    let mut slopes = Vec::new();
    for (method, axis) in [
        ("free-energy", "d"),
        ("free-energy", "K"),
        ("free-energy", "T"),
        ("gradient", "d"),
        ("gradient", "T"),
        ("surrogate", "d"),
        ("surrogate", "N"),
    ] {
        let sel: Vec<&BenchRow> = rows.iter().filter(|r| r.method == method && r.axis == axis).collect();
        let xs: Vec<f64> = sel.iter().map(|r| r.value as f64).collect();
        let ys: Vec<f64> = sel.iter().map(|r| r.seconds_median.max(1e-12)).collect();
        slopes.push(BenchSlope {
            method: method.into(),
            axis: axis.into(),
            slope: log_log_slope(&xs, &ys),
        });
    }
    Ok(BenchReport { rows, slopes })
}

/// `lambda_max` helper for callers outside the crate.
pub fn spectral_radius_bound(h: &Matrix) -> Result<f64> {
    lambda_max(h, 1e-9, 5000)
}
