//! Comparison methods: gradient descent on a prediction loss and a
//! kernel-weighted local linear surrogate. Both return the same result type
//! as the annealer.

use nalgebra::{Cholesky, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::annealer::{AcceptanceStats, CounterfactualResult, TraceRecord};
use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::model::ModelHandle;
use crate::numdiff;
use crate::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Loss {
    /// `0.5 (f - y)^2`
    #[default]
    Squared,
    /// `max(0, s (f - y))` with `s` the side of `y` the input starts on.
    HingeToThreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GradientCfConfig {
    pub alpha: f64,
    pub target: f64,
    #[serde(default)]
    pub loss: Loss,
    pub max_iters: usize,
    #[serde(default)]
    pub seed: u64,
    /// Std of the Gaussian noise added to every update.
    #[serde(default)]
    pub noise_scale: f64,
    /// Squared loss stops once `|f - y| < tolerance`.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub immutable_set: Vec<usize>,
}

fn default_tolerance() -> f64 {
    1e-3
}

impl GradientCfConfig {
    pub fn new(alpha: f64, target: f64, max_iters: usize, seed: u64) -> Self {
        Self {
            alpha,
            target,
            loss: Loss::Squared,
            max_iters,
            seed,
            noise_scale: 0.0,
            tolerance: default_tolerance(),
            immutable_set: Vec::new(),
        }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidInput(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be positive".into()));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::InvalidInput("noise_scale must be >= 0".into()));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidInput("tolerance must be positive".into()));
        }
        ensure_finite(&[self.target], "target")?;
        check_indices(&self.immutable_set, dim)
    }
}

fn check_indices(set: &[usize], dim: usize) -> Result<()> {
    match set.iter().find(|i| **i >= dim) {
        Some(i) => Err(Error::InvalidInput(format!("immutable index {i} out of range"))),
        None => Ok(()),
    }
}

fn zero_immutable(set: &[usize], v: &mut [f64]) {
    for &i in set {
        v[i] = 0.0;
    }
}

/// Bound on `|delta|` relative to `1 + |x0|` beyond which a run counts as diverged.
const DIVERGENCE_FACTOR: f64 = 1e8;

/// `delta <- delta - alpha grad L(f(x0 + delta), y) + noise`
pub fn gradient_counterfactual(model: &ModelHandle, x0: &[f64], cfg: &GradientCfConfig) -> Result<CounterfactualResult> {
    ensure_dim(model.dim(), x0.len())?;
    ensure_finite(x0, "x0")?;
    cfg.validate(model.dim())?;
    let d = x0.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let side = if model.predict(x0)? >= cfg.target { 1.0 } else { -1.0 };
    let limit = DIVERGENCE_FACTOR * (1.0 + numdiff::norm(x0));
    let loss = |f: f64| match cfg.loss {
        Loss::Squared => 0.5 * (f - cfg.target).powi(2),
        Loss::HingeToThreshold => (side * (f - cfg.target)).max(0.0),
    };
    let done = |f: f64| match cfg.loss {
        Loss::Squared => (f - cfg.target).abs() < cfg.tolerance,
        Loss::HingeToThreshold => side * (f - cfg.target) <= 0.0,
    };

    let mut delta = vec![0.0; d];
    let mut x = x0.to_vec();
    let mut f = model.predict(&x)?;
    let mut trace = Vec::new();
    let mut converged = done(f);
    let mut diverged = false;
    let mut stats = AcceptanceStats::default();

    for t in 0..cfg.max_iters {
        if converged {
            break;
        }
        let current = loss(f);
        let gf = model.gradient(&x)?;
        let k = match cfg.loss {
            Loss::Squared => f - cfg.target,
            Loss::HingeToThreshold => side,
        };
        let mut g: Vec<f64> = gf.iter().map(|v| k * v).collect();
        zero_immutable(&cfg.immutable_set, &mut g);
        let gnorm = numdiff::norm(&g);
        for (i, (di, gi)) in delta.iter_mut().zip(&g).enumerate() {
            let noise = if cfg.noise_scale > 0.0 && !cfg.immutable_set.contains(&i) {
                let z: f64 = StandardNormal.sample(&mut rng);
                cfg.noise_scale * z
            } else {
                0.0
            };
            *di += -cfg.alpha * gi + noise;
        }
        let n = numdiff::norm(&delta);
        if !n.is_finite() || n > limit {
            diverged = true;
        }
        if !diverged {
            for ((xi, a), b) in x.iter_mut().zip(x0).zip(&delta) {
                *xi = a + b;
            }
            f = model.predict(&x)?;
        }
        let next = if diverged { f64::INFINITY } else { loss(f) };
        let record = TraceRecord {
            iter: t,
            attempt: 0,
            beta: 0.0,
            free_energy: current,
            energy: current,
            entropy: 0.0,
            grad_norm: gnorm,
            alpha: cfg.alpha,
            alpha_halved: false,
            hessian_rejected: false,
            lambda_max: None,
            delta_f: next - current,
            uphill: next > current,
            draw: None,
            accepted: true,
            score: f,
            delta: delta.clone(),
        };
        if record.uphill {
            stats.uphill_accepts += 1;
        } else {
            stats.downhill_accepts += 1;
        }
        trace.push(record);
        if diverged {
            break;
        }
        converged = done(f);
    }
    Ok(CounterfactualResult {
        method: "gradient".into(),
        x_cf: x,
        delta,
        final_score: f,
        target_c: cfg.target,
        converged: converged && !diverged,
        diverged,
        iterations_used: trace.len(),
        trace,
        acceptance_stats: stats,
        robustness: None,
        restarts: 0,
        final_mu: 0.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurrogateConfig {
    pub n_samples: usize,
    /// Kernel width of `exp(-|z|^2 / width^2)` in scaled units;
    /// `None` means `0.75 sqrt(d) perturbation_scale`.
    #[serde(default)]
    pub kernel_width: Option<f64>,
    pub perturbation_scale: f64,
    #[serde(default)]
    pub ridge: f64,
    #[serde(default)]
    pub seed: u64,
    /// Per-feature units for sampling and the kernel; `None` means all ones.
    #[serde(default)]
    pub feature_scales: Option<Vec<f64>>,
    #[serde(default)]
    pub immutable_set: Vec<usize>,
}

impl SurrogateConfig {
    pub fn new(n_samples: usize, perturbation_scale: f64, ridge: f64, seed: u64) -> Self {
        Self {
            n_samples,
            kernel_width: None,
            perturbation_scale,
            ridge,
            seed,
            feature_scales: None,
            immutable_set: Vec::new(),
        }
    }

    pub fn kernel_width_for(&self, dim: usize) -> f64 {
        self.kernel_width
            .unwrap_or(0.75 * (dim as f64).sqrt() * self.perturbation_scale)
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.n_samples < dim + 1 {
            return Err(Error::InvalidInput(format!(
                "n_samples must be at least dim + 1 = {}",
                dim + 1
            )));
        }
        if !(self.perturbation_scale > 0.0 && self.perturbation_scale.is_finite()) {
            return Err(Error::InvalidInput("perturbation_scale must be positive".into()));
        }
        if !(self.kernel_width_for(dim) > 0.0) {
            return Err(Error::InvalidInput("kernel_width must be positive".into()));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::InvalidInput("ridge must be >= 0".into()));
        }
        if let Some(s) = &self.feature_scales {
            ensure_dim(dim, s.len())?;
            if s.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                return Err(Error::InvalidInput("feature_scales must be finite and >= 0".into()));
            }
        }
        check_indices(&self.immutable_set, dim)
    }
}

/// Linear surrogate `g(x) = intercept + coefficients . x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalSurrogate {
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    /// Kernel-weighted R^2 on the fitting sample.
    pub r2_local: f64,
}

impl LocalSurrogate {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + numdiff::dot(&self.coefficients, x)
    }
}

/// Kernel-weighted ridge fit of the model around `x0` (intercept unpenalized).
pub fn fit_local_surrogate(model: &ModelHandle, x0: &[f64], cfg: &SurrogateConfig) -> Result<LocalSurrogate> {
    ensure_dim(model.dim(), x0.len())?;
    ensure_finite(x0, "x0")?;
    let d = x0.len();
    cfg.validate(d)?;
    let scales = cfg.feature_scales.clone().unwrap_or_else(|| vec![1.0; d]);
    let kw = cfg.kernel_width_for(d);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let p = d + 1;

    // Normal equations in offsets from x0: column 0 is the intercept.
    let mut xtwx = Matrix::zeros(p, p);
    let mut xtwy = DVector::zeros(p);
    let mut ys = Vec::with_capacity(cfg.n_samples);
    let mut ws = Vec::with_capacity(cfg.n_samples);
    let mut rows = Vec::with_capacity(cfg.n_samples);
    let mut row = vec![0.0; p];
    let mut x = vec![0.0; d];
    for _ in 0..cfg.n_samples {
        let mut z2 = 0.0;
        row[0] = 1.0;
        for j in 0..d {
            let z: f64 = if cfg.immutable_set.contains(&j) {
                0.0
            } else {
                StandardNormal.sample(&mut rng)
            };
            let off = cfg.perturbation_scale * scales[j] * z;
            let zs = cfg.perturbation_scale * z;
            z2 += zs * zs;
            row[j + 1] = off;
            x[j] = x0[j] + off;
        }
        let y = model.predict(&x)?;
        let w = (-z2 / (kw * kw)).exp();
        for a in 0..p {
            let wa = w * row[a];
            xtwy[a] += wa * y;
            for b in a..p {
                xtwx[(a, b)] += wa * row[b];
            }
        }
        ys.push(y);
        ws.push(w);
        rows.push(row.clone());
    }
    for a in 0..p {
        for b in 0..a {
            xtwx[(a, b)] = xtwx[(b, a)];
        }
    }
    for j in 1..p {
        xtwx[(j, j)] += cfg.ridge;
    }
    // Immutable columns are identically zero; pin their coefficients at 0.
    for &j in &cfg.immutable_set {
        xtwx[(j + 1, j + 1)] += 1.0;
    }
    let chol = Cholesky::new(xtwx.clone())
        .ok_or_else(|| Error::SingularSystem("weighted design is not positive-definite".into()))?;
    let diag = chol.l_dirty().diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
    if !(lo > 1e-7 * hi) {
        return Err(Error::SingularSystem("weighted design is numerically rank-deficient".into()));
    }
    let beta = chol.solve(&xtwy);
    let coefficients: Vec<f64> = beta.iter().skip(1).cloned().collect();
    let intercept = beta[0] - numdiff::dot(&coefficients, x0);

    let wsum: f64 = ws.iter().sum();
    let ybar = ws.iter().zip(&ys).map(|(w, y)| w * y).sum::<f64>() / wsum;
    let mut ss_tot = 0.0;
    let mut ss_res = 0.0;
    for ((r, y), w) in rows.iter().zip(&ys).zip(&ws) {
        let fit: f64 = r.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
        ss_res += w * (y - fit).powi(2);
        ss_tot += w * (y - ybar).powi(2);
    }
    let r2_local = if ss_tot <= f64::EPSILON * wsum * ybar.abs().max(1.0).powi(2) {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(LocalSurrogate {
        coefficients,
        intercept,
        r2_local,
    })
}

/// Minimal-norm `delta` with `g(x0 + delta) = target_c`.
///
/// Coefficients at roundoff level relative to the intercept count as zero.
pub fn surrogate_counterfactual(surrogate: &LocalSurrogate, x0: &[f64], target_c: f64) -> Result<Vec<f64>> {
    ensure_dim(surrogate.coefficients.len(), x0.len())?;
    let b = &surrogate.coefficients;
    let nb2 = numdiff::dot(b, b);
    if nb2.sqrt() <= 1e-12 * surrogate.intercept.abs().max(1.0) {
        return Err(Error::NoDirection);
    }
    let gap = target_c - surrogate.predict(x0);
    Ok(b.iter().map(|v| gap * v / nb2).collect())
}

/// Surrogate fit plus its counterfactual, scored against the true model.
pub fn surrogate_method(model: &ModelHandle, x0: &[f64], target_c: f64, epsilon: f64, cfg: &SurrogateConfig) -> Result<CounterfactualResult> {
    let g = fit_local_surrogate(model, x0, cfg)?;
    let delta = surrogate_counterfactual(&g, x0, target_c)?;
    let x_cf: Vec<f64> = x0.iter().zip(&delta).map(|(a, b)| a + b).collect();
    let final_score = model.predict(&x_cf)?;
    Ok(CounterfactualResult {
        method: "surrogate".into(),
        x_cf,
        delta,
        final_score,
        target_c,
        converged: (final_score - target_c).abs() < epsilon,
        diverged: false,
        iterations_used: 0,
        trace: Vec::new(),
        acceptance_stats: AcceptanceStats::default(),
        robustness: None,
        restarts: 0,
        final_mu: 0.0,
    })
}
