//! Simulated-annealing refinement of a counterfactual perturbation.
//!
//! Each iteration evaluates `F` at the current iterate, proposes a gradient
//! step, halves the learning rate when the gradient at the proposal exceeds
//! `c1`, rejects the step when `lambda_max(H_F)` at the current iterate exceeds
//! `c2`, and otherwise applies the Metropolis rule. Once `|f - c| < epsilon`
//! the result is probed inside a `xi`-ball; a failed probe restarts the search
//! with a larger decision weight.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::energy::{sign0, EnergyParams};
use crate::entropy::BoxDomain;
use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::free_energy::{lambda_max_detailed, EntropyModel, FreeEnergyProblem};
use crate::model::ModelHandle;
use crate::numdiff;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BetaSchedule {
    Constant { beta: f64 },
    /// `beta_t = beta0 * ratio^t`
    Geometric { beta0: f64, ratio: f64 },
}

impl BetaSchedule {
    pub fn at(&self, t: usize) -> f64 {
        match *self {
            BetaSchedule::Constant { beta } => beta,
            BetaSchedule::Geometric { beta0, ratio } => beta0 * ratio.powf(t as f64),
        }
    }

    pub fn initial(&self) -> f64 {
        self.at(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnealConfig {
    pub alpha: f64,
    pub beta: BetaSchedule,
    pub epsilon: f64,
    #[serde(default = "default_c1")]
    pub c1: f64,
    #[serde(default = "default_c2")]
    pub c2: f64,
    /// Robustness radius; `None` means `0.05 * sqrt(d)`.
    #[serde(default)]
    pub xi: Option<f64>,
    pub max_iters: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_retries")]
    pub robustness_retries: usize,
    /// Allowed `|F(x_cf + eta) - F(x_cf)|`; `None` means `0.05 |F(x_cf)| + 1e-6`.
    #[serde(default)]
    pub robustness_tolerance: Option<f64>,
    #[serde(default = "default_probes")]
    pub n_probes: usize,
    /// Disables the curvature guard when false.
    #[serde(default = "default_true")]
    pub hessian_check: bool,
    /// Perturbations are clamped to this box when present.
    #[serde(default)]
    pub search_box: Option<BoxDomain>,
}

fn default_c1() -> f64 {
    1e3
}
fn default_c2() -> f64 {
    1e6
}
fn default_retries() -> usize {
    3
}
fn default_probes() -> usize {
    256
}
fn default_true() -> bool {
    true
}

const SPECTRAL_TOL: f64 = 1e-9;
const SPECTRAL_ITERS: usize = 500;

impl AnnealConfig {
    pub fn new(alpha: f64, beta: f64, epsilon: f64, max_iters: usize, seed: u64) -> Self {
        Self {
            alpha,
            beta: BetaSchedule::Constant { beta },
            epsilon,
            c1: default_c1(),
            c2: default_c2(),
            xi: None,
            max_iters,
            seed,
            robustness_retries: default_retries(),
            robustness_tolerance: None,
            n_probes: default_probes(),
            hessian_check: true,
            search_box: None,
        }
    }

    pub fn with_box(mut self, b: BoxDomain) -> Self {
        self.search_box = Some(b);
        self
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v > 0.0 && !v.is_nan() {
                Ok(())
            } else {
                Err(Error::InvalidInput(format!("{name} must be positive, got {v}")))
            }
        };
        positive(self.alpha, "alpha")?;
        positive(self.epsilon, "epsilon")?;
        positive(self.c1, "c1")?;
        positive(self.c2, "c2")?;
        if !self.alpha.is_finite() || !self.epsilon.is_finite() {
            return Err(Error::InvalidInput("alpha and epsilon must be finite".into()));
        }
        match self.beta {
            BetaSchedule::Constant { beta } => {
                positive(beta, "beta")?;
                ensure_finite(&[beta], "beta")?;
            }
            BetaSchedule::Geometric { beta0, ratio } => {
                positive(beta0, "beta0")?;
                ensure_finite(&[beta0, ratio], "beta schedule")?;
                if ratio < 1.0 {
                    return Err(Error::InvalidInput(format!("schedule ratio must be >= 1, got {ratio}")));
                }
            }
        }
        if let Some(xi) = self.xi {
            if !(xi >= 0.0 && xi.is_finite()) {
                return Err(Error::InvalidInput(format!("xi must be >= 0, got {xi}")));
            }
        }
        if let Some(t) = self.robustness_tolerance {
            positive(t, "robustness_tolerance")?;
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be positive".into()));
        }
        if self.n_probes == 0 {
            return Err(Error::InvalidInput("n_probes must be positive".into()));
        }
        if let Some(b) = &self.search_box {
            b.validate()?;
            ensure_dim(dim, b.dim())?;
            if b.lower.iter().zip(&b.upper).any(|(l, u)| *l > 0.0 || *u < 0.0) {
                return Err(Error::InvalidDomain("search box must contain delta = 0".into()));
            }
        }
        Ok(())
    }

    pub fn xi_for(&self, dim: usize) -> f64 {
        self.xi.unwrap_or(0.05 * (dim as f64).sqrt())
    }
}

/// One iteration of the search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    /// Restart index (0 for the first attempt).
    pub attempt: usize,
    pub beta: f64,
    /// Free energy, energy, entropy and `|grad F|` at the iterate before the step.
    pub free_energy: f64,
    pub energy: f64,
    pub entropy: f64,
    pub grad_norm: f64,
    /// Learning rate used for the proposal (after any halving).
    pub alpha: f64,
    pub alpha_halved: bool,
    pub hessian_rejected: bool,
    pub lambda_max: Option<f64>,
    /// `F(candidate) - F(current)`.
    pub delta_f: f64,
    pub uphill: bool,
    /// Uniform draw consumed by the Metropolis test, when one was needed.
    pub draw: Option<f64>,
    pub accepted: bool,
    /// `f(x0 + delta)` after the step.
    pub score: f64,
    /// Perturbation after the step.
    pub delta: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AcceptanceStats {
    pub downhill_accepts: usize,
    pub uphill_accepts: usize,
    pub rejects: usize,
    pub hessian_rejects: usize,
    pub alpha_halvings: usize,
}

impl AcceptanceStats {
    fn record(&mut self, r: &TraceRecord) {
        if r.alpha_halved {
            self.alpha_halvings += 1;
        }
        if r.hessian_rejected {
            self.hessian_rejects += 1;
        } else if r.accepted && r.uphill {
            self.uphill_accepts += 1;
        } else if r.accepted {
            self.downhill_accepts += 1;
        } else {
            self.rejects += 1;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessOutcome {
    pub passed: bool,
    pub max_f_deviation: f64,
    pub samples: usize,
    pub tolerance: f64,
    pub xi: f64,
    /// Every probe kept the score on the converged side of `c`.
    pub side_preserved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterfactualResult {
    pub method: String,
    pub x_cf: Vec<f64>,
    pub delta: Vec<f64>,
    pub final_score: f64,
    pub target_c: f64,
    pub converged: bool,
    /// Set by methods that detect iterate blow-up.
    #[serde(default)]
    pub diverged: bool,
    pub iterations_used: usize,
    pub trace: Vec<TraceRecord>,
    pub acceptance_stats: AcceptanceStats,
    /// Present only for converged runs.
    pub robustness: Option<RobustnessOutcome>,
    /// Number of restarts triggered by failed robustness checks.
    pub restarts: usize,
    /// Decision weight used by the final attempt.
    pub final_mu: f64,
}

impl CounterfactualResult {
    /// Accepted iterates of the final attempt preceding the returned
    /// perturbation, oldest first, starting at `delta = 0`.
    pub fn accepted_history(&self) -> Vec<Vec<f64>> {
        let last = self.trace.last().map(|r| r.attempt).unwrap_or(0);
        let mut trail = vec![vec![0.0; self.delta.len()]];
        for r in self.trace.iter().filter(|r| r.attempt == last && r.accepted) {
            trail.push(r.delta.clone());
        }
        trail.pop();
        trail
    }
}

/// Metropolis rule: downhill always, uphill when `exp(-beta dF) > u`.
pub fn metropolis_accept(delta_f: f64, beta: f64, u: f64) -> bool {
    delta_f <= 0.0 || (-beta * delta_f).exp() > u
}

/// Raises the decision weight by half; every other setting is kept.
pub fn tighten_constraints(eparams: &EnergyParams, cfg: &AnnealConfig) -> (EnergyParams, AnnealConfig) {
    let mut p = eparams.clone();
    p.mu *= 1.5;
    (p, cfg.clone())
}

fn project(params: &EnergyParams, search_box: Option<&BoxDomain>, delta: &mut [f64]) {
    if let Some(b) = search_box {
        b.clamp(delta);
    }
    params.project(delta);
}

/// Uniform point in the `xi`-ball restricted to the mutable coordinates.
fn ball_probe<R: Rng>(rng: &mut R, dim: usize, params: &EnergyParams, xi: f64) -> Vec<f64> {
    let mutable = (0..dim).filter(|i| !params.is_immutable(*i)).count();
    if mutable == 0 || xi == 0.0 {
        return vec![0.0; dim];
    }
    let mut v: Vec<f64> = (0..dim)
        .map(|i| if params.is_immutable(i) { 0.0 } else { rng.sample(StandardNormal) })
        .collect();
    let n = numdiff::norm(&v);
    let r = xi * rng.random::<f64>().powf(1.0 / mutable as f64);
    for x in v.iter_mut() {
        *x *= r / n;
    }
    v
}

/// Probes `F` at `n_probes` uniform points of the `xi`-ball around `delta_cf`.
#[allow(clippy::too_many_arguments)]
pub fn robustness_check(
    problem: &FreeEnergyProblem<'_>,
    delta_cf: &[f64],
    history: &[Vec<f64>],
    beta: f64,
    xi: f64,
    tolerance: Option<f64>,
    n_probes: usize,
    seed: u64,
) -> Result<RobustnessOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    robustness_check_with(problem, delta_cf, history, beta, xi, tolerance, n_probes, &mut rng)
}

#[allow(clippy::too_many_arguments)]
fn robustness_check_with<R: Rng>(
    problem: &FreeEnergyProblem<'_>,
    delta_cf: &[f64],
    history: &[Vec<f64>],
    beta: f64,
    xi: f64,
    tolerance: Option<f64>,
    n_probes: usize,
    rng: &mut R,
) -> Result<RobustnessOutcome> {
    let (_, _, f0, score0) = problem.components(delta_cf, history, beta)?;
    let tol = tolerance.unwrap_or(0.05 * f0.abs() + 1e-6);
    let side = sign0(score0 - problem.params.target_c);
    let mut max_dev: f64 = 0.0;
    let mut side_preserved = true;
    for _ in 0..n_probes {
        let eta = ball_probe(rng, delta_cf.len(), problem.params, xi);
        let d: Vec<f64> = delta_cf.iter().zip(&eta).map(|(a, b)| a + b).collect();
        let (_, _, f, score) = problem.components(&d, history, beta)?;
        max_dev = max_dev.max((f - f0).abs());
        if side != 0.0 && sign0(score - problem.params.target_c) != side {
            side_preserved = false;
        }
    }
    Ok(RobustnessOutcome {
        passed: max_dev <= tol,
        max_f_deviation: max_dev,
        samples: n_probes,
        tolerance: tol,
        xi,
        side_preserved,
    })
}

struct Attempt {
    delta: Vec<f64>,
    trail: Vec<Vec<f64>>,
    converged: bool,
    score: f64,
}

/// Runs one attempt of the loop from `delta = 0`, appending to `trace`.
#[allow(clippy::too_many_arguments)]
fn run_attempt(
    problem: &FreeEnergyProblem<'_>,
    cfg: &AnnealConfig,
    attempt: usize,
    rng: &mut ChaCha8Rng,
    trace: &mut Vec<TraceRecord>,
    stats: &mut AcceptanceStats,
) -> Result<Attempt> {
    let dim = problem.dim();
    let params = problem.params;
    let search_box = cfg.search_box.as_ref();
    let mut delta = vec![0.0; dim];
    // Accepted iterates; the last entry is the current iterate.
    let mut trail: Vec<Vec<f64>> = vec![delta.clone()];
    let mut alpha = cfg.alpha;
    let mut score = problem.model.predict(problem.x0)?;

    for t in 0..cfg.max_iters {
        let beta = cfg.beta.at(t);
        let prior = &trail[..trail.len() - 1];
        let (state, grad) = problem.evaluate(&delta, prior, beta)?;

        let propose = |a: f64| {
            let mut c: Vec<f64> = delta.iter().zip(&grad).map(|(d, g)| d - a * g).collect();
            project(params, search_box, &mut c);
            c
        };
        let mut candidate = propose(alpha);
        let mut delta_f = problem.value(&candidate, &trail, beta)? - state.free_energy;

        let mut alpha_halved = false;
        let cand_grad = problem.gradient(&candidate, &trail, beta)?;
        if numdiff::norm(&cand_grad) > cfg.c1 {
            alpha *= 0.5;
            alpha_halved = true;
            candidate = propose(alpha);
            delta_f = problem.value(&candidate, &trail, beta)? - state.free_energy;
        }

        let lambda = if cfg.hessian_check {
            let h = problem.hessian(&delta, prior, beta)?;
            Some(match lambda_max_detailed(&h, SPECTRAL_TOL, SPECTRAL_ITERS) {
                Ok(s) => s.value,
                Err(Error::SpectralFailure { estimate, .. }) => estimate,
                Err(e) => return Err(e),
            })
        } else {
            None
        };
        let hessian_rejected = lambda.is_some_and(|l| l > cfg.c2);

        let uphill = delta_f > 0.0;
        let mut draw = None;
        let accepted = if hessian_rejected {
            false
        } else if !uphill {
            true
        } else {
            let u: f64 = rng.random();
            draw = Some(u);
            metropolis_accept(delta_f, beta, u)
        };
        if accepted {
            delta = candidate;
            trail.push(delta.clone());
        }
        let x: Vec<f64> = problem.x0.iter().zip(&delta).map(|(a, b)| a + b).collect();
        score = problem.model.predict(&x)?;

        let record = TraceRecord {
            iter: trace.len(),
            attempt,
            beta,
            free_energy: state.free_energy,
            energy: state.energy,
            entropy: state.entropy,
            grad_norm: state.grad_norm,
            alpha,
            alpha_halved,
            hessian_rejected,
            lambda_max: lambda,
            delta_f,
            uphill,
            draw,
            accepted,
            score,
            delta: delta.clone(),
        };
        stats.record(&record);
        trace.push(record);

        if (score - params.target_c).abs() < cfg.epsilon {
            return Ok(Attempt {
                delta,
                trail,
                converged: true,
                score,
            });
        }
    }
    Ok(Attempt {
        delta,
        trail,
        converged: false,
        score,
    })
}

/// Searches for a perturbation of `x0` that brings the score to `target_c`.
pub fn find_counterfactual(
    model: &ModelHandle,
    x0: &[f64],
    eparams: &EnergyParams,
    cfg: &AnnealConfig,
    entropy: &EntropyModel,
) -> Result<CounterfactualResult> {
    ensure_dim(model.dim(), x0.len())?;
    ensure_finite(x0, "x0")?;
    eparams.validate(model.dim())?;
    cfg.validate(model.dim())?;
    entropy.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut probe_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    probe_rng.set_stream(1);

    let mut params = eparams.clone();
    let mut run_cfg = cfg.clone();
    let mut trace = Vec::new();
    let mut stats = AcceptanceStats::default();
    let xi = cfg.xi_for(model.dim());
    let mut restarts = 0;

    loop {
        let problem = FreeEnergyProblem::new(&params, model, x0, entropy)?;
        let a = run_attempt(&problem, &run_cfg, restarts, &mut rng, &mut trace, &mut stats)?;
        let mut robustness = None;
        if a.converged {
            let beta = trace.last().map(|r| r.beta).unwrap_or(cfg.beta.initial());
            let prior = &a.trail[..a.trail.len() - 1];
            let out = robustness_check_with(
                &problem,
                &a.delta,
                prior,
                beta,
                xi,
                cfg.robustness_tolerance,
                cfg.n_probes,
                &mut probe_rng,
            )?;
            let passed = out.passed;
            robustness = Some(out);
            if !passed && restarts < cfg.robustness_retries {
                let (p, c) = tighten_constraints(&params, &run_cfg);
                params = p;
                run_cfg = c;
                restarts += 1;
                continue;
            }
        }
        let x_cf = x0.iter().zip(&a.delta).map(|(x, d)| x + d).collect();
        return Ok(CounterfactualResult {
            method: "free-energy".into(),
            x_cf,
            delta: a.delta,
            final_score: a.score,
            target_c: params.target_c,
            converged: a.converged,
            diverged: false,
            iterations_used: trace.len(),
            trace,
            acceptance_stats: stats,
            robustness,
            restarts,
            final_mu: params.mu,
        });
    }
}
