//! Boltzmann weights, partition-function estimates and entropy estimators
//! (Gaussian closed form, Monte Carlo, score-function gradient, variational).
//!
//! Entropy is `S = -E[ln p]` throughout.

use std::f64::consts::{E, PI};

use nalgebra::{Cholesky, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::Matrix;

/// Axis-aligned box `[lower_i, upper_i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxDomain {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    /// The same interval on every axis.
    pub fn cube(dim: usize, lo: f64, hi: f64) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() || self.lower.is_empty() {
            return Err(Error::InvalidDomain("bounds must be nonempty and of equal length".into()));
        }
        for (i, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !lo.is_finite() || !hi.is_finite() {
                return Err(Error::InvalidDomain(format!("axis {i} has non-finite bounds")));
            }
            if hi <= lo {
                return Err(Error::InvalidDomain(format!("axis {i} has zero width [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn volume(&self) -> f64 {
        self.lower.iter().zip(&self.upper).map(|(l, u)| u - l).product()
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for ((v, l), u) in x.iter_mut().zip(&self.lower).zip(&self.upper) {
            *v = v.clamp(*l, *u);
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| l + (u - l) * rng.random::<f64>())
            .collect()
    }
}

/// Mean of per-sample quantities with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub std_error: f64,
}

impl Estimate {
    pub fn from_samples(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self {
            value: mean,
            std_error: (var / n).sqrt(),
        }
    }

    /// `|value - target| <= k * std_error`
    pub fn within(&self, target: f64, k: f64) -> bool {
        (self.value - target).abs() <= k * self.std_error
    }
}

/// Componentwise estimate of a vector-valued mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorEstimate {
    pub value: Vec<f64>,
    pub std_error: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoltzmannWeight {
    pub value: f64,
    /// `exp(-beta E)` underflowed and was clamped to the smallest positive normal.
    pub underflow: bool,
}

/// Unnormalized Boltzmann weight `exp(-beta E)`.
pub fn boltzmann_weight(beta: f64, energy: f64) -> BoltzmannWeight {
    let v = (-beta * energy).exp();
    if v < f64::MIN_POSITIVE {
        BoltzmannWeight {
            value: f64::MIN_POSITIVE,
            underflow: true,
        }
    } else {
        BoltzmannWeight {
            value: v,
            underflow: false,
        }
    }
}

/// Uniform Monte-Carlo estimate of `Z = integral over the box of exp(-beta E)`.
pub fn partition_estimate<F>(beta: f64, energy_fn: F, domain: &BoxDomain, k: usize, seed: u64) -> Result<Estimate>
where
    F: Fn(&[f64]) -> f64,
{
    domain.validate()?;
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::InvalidInput(format!("beta must be positive, got {beta}")));
    }
    if k == 0 {
        return Err(Error::InvalidInput("sample count must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let vol = domain.volume();
    let mut weights = Vec::with_capacity(k);
    for _ in 0..k {
        let x = domain.sample(&mut rng);
        let e = energy_fn(&x);
        if !e.is_finite() {
            return Err(Error::NumericalFailure(format!("energy {e} in partition estimate")));
        }
        weights.push(vol * (-beta * e).exp());
    }
    Ok(Estimate::from_samples(&weights))
}

/// Covariance in diagonal or dense form.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    Diagonal(Vec<f64>),
    Dense(Matrix),
}

impl Covariance {
    pub fn dim(&self) -> usize {
        match self {
            Covariance::Diagonal(v) => v.len(),
            Covariance::Dense(m) => m.nrows(),
        }
    }

    pub fn to_dense(&self) -> Matrix {
        match self {
            Covariance::Diagonal(v) => Matrix::from_diagonal(&DVector::from_column_slice(v)),
            Covariance::Dense(m) => m.clone(),
        }
    }

    fn check_diagonal(v: &[f64]) -> Result<()> {
        if v.is_empty() {
            return Err(Error::InvalidCovariance("empty covariance".into()));
        }
        if let Some(x) = v.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
            return Err(Error::InvalidCovariance(format!("diagonal entry {x} is not positive")));
        }
        Ok(())
    }

    fn cholesky(m: &Matrix) -> Result<Cholesky<f64, Dyn>> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(Error::InvalidCovariance("covariance must be square and nonempty".into()));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidCovariance("non-finite entry".into()));
        }
        let scale = m.abs().max().max(1.0);
        if (m - m.transpose()).abs().max() > 1e-10 * scale {
            return Err(Error::InvalidCovariance("matrix is not symmetric".into()));
        }
        Cholesky::new(m.clone()).ok_or_else(|| Error::InvalidCovariance("matrix is not positive-definite".into()))
    }

    pub fn log_det(&self) -> Result<f64> {
        match self {
            Covariance::Diagonal(v) => {
                Self::check_diagonal(v)?;
                Ok(v.iter().map(|x| x.ln()).sum())
            }
            Covariance::Dense(m) => {
                let l = Self::cholesky(m)?;
                Ok(2.0 * l.l_dirty().diagonal().iter().map(|x| x.ln()).sum::<f64>())
            }
        }
    }
}

/// Differential entropy `0.5 ln det S + (d/2) ln(2 pi e)` of a Gaussian.
pub fn entropy_gaussian(cov: &Covariance) -> Result<f64> {
    let d = cov.dim() as f64;
    Ok(0.5 * cov.log_det()? + 0.5 * d * (2.0 * PI * E).ln())
}

#[derive(Debug, Clone)]
enum Factor {
    Diagonal { var: Vec<f64>, sd: Vec<f64> },
    Dense { chol: Cholesky<f64, Dyn>, inverse: Matrix },
}

/// Which inverse the Gaussian score uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InversePath {
    /// Multiply by a cached `S^-1`.
    Precomputed,
    /// Solve against the Cholesky factor at every call.
    Solve,
}

/// Multivariate normal with cached factorization.
#[derive(Debug, Clone)]
pub struct Gaussian {
    mean: Vec<f64>,
    cov: Covariance,
    factor: Factor,
    log_norm: f64,
}

impl Gaussian {
    pub fn new(mean: Vec<f64>, cov: Covariance) -> Result<Self> {
        ensure_finite(&mean, "gaussian mean")?;
        ensure_dim(cov.dim(), mean.len())?;
        let factor = match &cov {
            Covariance::Diagonal(v) => {
                Covariance::check_diagonal(v)?;
                Factor::Diagonal {
                    var: v.clone(),
                    sd: v.iter().map(|x| x.sqrt()).collect(),
                }
            }
            Covariance::Dense(m) => {
                let chol = Covariance::cholesky(m)?;
                let inverse = chol.inverse();
                Factor::Dense { chol, inverse }
            }
        };
        let d = mean.len() as f64;
        let log_norm = -0.5 * (d * (2.0 * PI).ln() + cov.log_det()?);
        Ok(Self {
            mean,
            cov,
            factor,
            log_norm,
        })
    }

    pub fn isotropic(mean: Vec<f64>, variance: f64) -> Result<Self> {
        let d = mean.len();
        Self::new(mean, Covariance::Diagonal(vec![variance; d]))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn covariance(&self) -> &Covariance {
        &self.cov
    }

    pub fn entropy(&self) -> f64 {
        -self.log_norm + 0.5 * self.dim() as f64
    }

    /// `S^-1 (x - m)`
    pub fn whitened_residual(&self, x: &[f64], path: InversePath) -> Vec<f64> {
        let r: Vec<f64> = x.iter().zip(&self.mean).map(|(a, b)| a - b).collect();
        match &self.factor {
            Factor::Diagonal { var, .. } => r.iter().zip(var).map(|(a, v)| a / v).collect(),
            Factor::Dense { chol, inverse } => {
                let rv = DVector::from_vec(r);
                let out = match path {
                    InversePath::Precomputed => inverse * rv,
                    InversePath::Solve => chol.solve(&rv),
                };
                out.as_slice().to_vec()
            }
        }
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let s = self.whitened_residual(x, InversePath::Precomputed);
        let q: f64 = s.iter().zip(x.iter().zip(&self.mean)).map(|(si, (a, b))| si * (a - b)).sum();
        self.log_norm - 0.5 * q
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }

    /// `m + L z`
    pub fn transform(&self, z: &[f64]) -> Vec<f64> {
        match &self.factor {
            Factor::Diagonal { sd, .. } => self.mean.iter().zip(sd).zip(z).map(|((m, s), zi)| m + s * zi).collect(),
            Factor::Dense { chol, .. } => {
                let lz = chol.l_dirty().lower_triangle() * DVector::from_column_slice(z);
                self.mean.iter().zip(lz.iter()).map(|(m, v)| m + v).collect()
            }
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        let z: Vec<f64> = (0..self.dim()).map(|_| rng.sample(StandardNormal)).collect();
        self.transform(&z)
    }

    pub fn samples(&self, k: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..k).map(|_| self.sample(&mut rng)).collect()
    }

    /// Gradient of the density with respect to the mean: `p S^-1 (x - m)`.
    pub fn density_grad_mean(&self, x: &[f64], path: InversePath) -> Vec<f64> {
        let p = self.density(x);
        self.whitened_residual(x, path).into_iter().map(|v| p * v).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistributionKind {
    BoltzmannEmpirical,
    Gaussian,
}

/// Perturbation distribution at inverse temperature `beta`.
#[derive(Debug, Clone)]
pub struct PerturbationDistribution {
    pub kind: DistributionKind,
    pub beta: f64,
    pub gaussian: Gaussian,
    pub sample_count: usize,
}

impl PerturbationDistribution {
    pub fn gaussian(beta: f64, gaussian: Gaussian, sample_count: usize) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(Error::InvalidInput(format!("beta must be positive, got {beta}")));
        }
        if sample_count == 0 {
            return Err(Error::InvalidInput("sample count must be positive".into()));
        }
        Ok(Self {
            kind: DistributionKind::Gaussian,
            beta,
            gaussian,
            sample_count,
        })
    }

    pub fn boltzmann_weight(&self, energy: f64) -> BoltzmannWeight {
        boltzmann_weight(self.beta, energy)
    }
}

fn check_density(index: usize, p: f64) -> Result<()> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::InvalidDensity { index, value: p });
    }
    Ok(())
}

/// `-(1/K) sum ln p(x_i)` over samples drawn from `p`.
pub fn entropy_monte_carlo<F>(samples: &[Vec<f64>], density_fn: F) -> Result<Estimate>
where
    F: Fn(&[f64]) -> f64,
{
    if samples.is_empty() {
        return Err(Error::InvalidInput("no samples".into()));
    }
    let mut terms = Vec::with_capacity(samples.len());
    for (i, s) in samples.iter().enumerate() {
        let p = density_fn(s);
        check_density(i, p)?;
        terms.push(-p.ln());
    }
    Ok(Estimate::from_samples(&terms))
}

/// Score-function estimate of the entropy gradient,
/// `-(1/K) sum (grad p / p)(ln p + 1)` over `K` seeded draws from `dist`.
pub fn entropy_gradient_mc<P, G>(dist: &Gaussian, density_fn: P, density_grad_fn: G, k: usize, seed: u64) -> Result<VectorEstimate>
where
    P: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    if k == 0 {
        return Err(Error::InvalidInput("sample count must be positive".into()));
    }
    let d = dist.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = vec![0.0; d];
    let mut sum_sq = vec![0.0; d];
    for i in 0..k {
        let x = dist.sample(&mut rng);
        let p = density_fn(&x);
        check_density(i, p)?;
        let g = density_grad_fn(&x);
        ensure_dim(d, g.len())?;
        let lp = p.ln() + 1.0;
        for j in 0..d {
            let t = -(g[j] / p) * lp;
            sum[j] += t;
            sum_sq[j] += t * t;
        }
    }
    let n = k as f64;
    let value: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_error = sum_sq
        .iter()
        .zip(&value)
        .map(|(sq, m)| {
            if k > 1 {
                ((sq - n * m * m).max(0.0) / (n - 1.0) / n).sqrt()
            } else {
                0.0
            }
        })
        .collect();
    Ok(VectorEstimate { value, std_error })
}

/// Entropy gradient of a Gaussian with respect to its mean using its own density.
pub fn gaussian_entropy_gradient(dist: &Gaussian, k: usize, seed: u64, path: InversePath) -> Result<VectorEstimate> {
    entropy_gradient_mc(dist, |x| dist.density(x), |x| dist.density_grad_mean(x, path), k, seed)
}

/// Cross-entropy and KL estimates from samples of `p`.
///
/// `S(p) = H(p, q) - KL(p || q)`, so the cross-entropy is an upper estimate
/// of `S(p)` and `entropy_estimate` removes the KL part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VariationalEstimate {
    /// `-(1/K) sum ln q(x_i)`
    pub cross_entropy: Estimate,
    /// `(1/K) sum ln(p(x_i) / q(x_i))`
    pub kl: Estimate,
    pub entropy_estimate: f64,
}

pub fn entropy_variational<L>(p_samples: &[Vec<f64>], p_log_density: L, q: &Gaussian) -> Result<VariationalEstimate>
where
    L: Fn(&[f64]) -> f64,
{
    if p_samples.is_empty() {
        return Err(Error::InvalidInput("no samples".into()));
    }
    let mut ce = Vec::with_capacity(p_samples.len());
    let mut kl = Vec::with_capacity(p_samples.len());
    for (i, s) in p_samples.iter().enumerate() {
        ensure_dim(q.dim(), s.len())?;
        let lq = q.log_density(s);
        if !lq.is_finite() || lq.exp() == 0.0 {
            return Err(Error::SupportMismatch { index: i, value: lq.exp() });
        }
        let lp = p_log_density(s);
        if !lp.is_finite() {
            return Err(Error::InvalidDensity { index: i, value: lp.exp() });
        }
        ce.push(-lq);
        kl.push(lp - lq);
    }
    let cross_entropy = Estimate::from_samples(&ce);
    let kl = Estimate::from_samples(&kl);
    Ok(VariationalEstimate {
        cross_entropy,
        kl,
        entropy_estimate: cross_entropy.value - kl.value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn boltzmann_examples() {
        assert_eq!(boltzmann_weight(0.3, 0.0).value, 1.0);
        assert!((boltzmann_weight(0.01, 100.0).value - (-1f64).exp()).abs() < 1e-15);
        let w = boltzmann_weight(1.0, 1e6);
        assert!(w.underflow && w.value == f64::MIN_POSITIVE);
    }

    #[test]
    fn partition_of_constant_energy_is_volume() {
        let b = BoxDomain::cube(2, 0.0, 1.0).unwrap();
        let z = partition_estimate(1.0, |_| 0.0, &b, 100, 1).unwrap();
        assert!((z.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn partition_matches_quadrature() {
        let b = BoxDomain::cube(1, -1.0, 1.0).unwrap();
        let z = partition_estimate(1.0, |x| x[0].abs(), &b, 20_000, 2).unwrap();
        // Midpoint rule on 10^5 cells.
        let n = 100_000;
        let h = 2.0 / n as f64;
        let quad: f64 = (0..n).map(|i| (-(-1.0 + (i as f64 + 0.5) * h).abs()).exp() * h).sum();
        assert!((quad - 2.0 * (1.0 - (-1f64).exp())).abs() < 1e-8);
        assert!(z.within(quad, 3.0), "{z:?} vs {quad}");
    }

    #[test]
    fn degenerate_box_is_rejected() {
        assert!(matches!(BoxDomain::new(vec![0.0, 1.0], vec![1.0, 1.0]), Err(Error::InvalidDomain(_))));
    }

    #[test]
    fn closed_form_examples() {
        let s = entropy_gaussian(&Covariance::Diagonal(vec![1.0, 1.0])).unwrap();
        assert!((s - (2.0 * PI * E).ln()).abs() < 1e-12);
        assert!((s - 2.837_877_066_409_345).abs() < 1e-12);
        let one = entropy_gaussian(&Covariance::Diagonal(vec![1.0 / (2.0 * PI * E)])).unwrap();
        assert!(one.abs() < 1e-14);
        let v = vec![0.3, 2.0, 0.7];
        let a = entropy_gaussian(&Covariance::Diagonal(v.clone())).unwrap();
        let b = entropy_gaussian(&Covariance::Diagonal(v.iter().map(|x| 4.0 * x).collect())).unwrap();
        assert!((b - a - 3.0 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn non_spd_rejected() {
        let m = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(entropy_gaussian(&Covariance::Dense(m)), Err(Error::InvalidCovariance(_))));
        assert!(entropy_gaussian(&Covariance::Diagonal(vec![1.0, 0.0])).is_err());
    }

    #[test]
    fn uniform_density_has_zero_entropy() {
        let samples: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64 / 10.0]).collect();
        assert_eq!(entropy_monte_carlo(&samples, |_| 1.0).unwrap().value, 0.0);
        assert!(matches!(
            entropy_monte_carlo(&samples, |_| 0.0),
            Err(Error::InvalidDensity { index: 0, .. })
        ));
    }

    #[test]
    fn mc_entropy_of_standard_normal() {
        let g = Gaussian::isotropic(vec![0.0], 1.0).unwrap();
        let est = entropy_monte_carlo(&g.samples(10_000, 3), |x| g.density(x)).unwrap();
        assert!(est.within(0.5 * (2.0 * PI * E).ln(), 3.0));
        let g = Gaussian::new(vec![0.0, 0.0], Covariance::Diagonal(vec![1.0, 4.0])).unwrap();
        let est = entropy_monte_carlo(&g.samples(10_000, 4), |x| g.density(x)).unwrap();
        assert!(est.within(entropy_gaussian(g.covariance()).unwrap(), 3.0));
    }

    #[test]
    fn gradient_at_symmetric_mean_vanishes() {
        let g = Gaussian::isotropic(vec![0.5], 1.0).unwrap();
        let est = gaussian_entropy_gradient(&g, 100_000, 5, InversePath::Precomputed).unwrap();
        // Differential entropy does not depend on the mean.
        let h = 1e-3;
        let up = Gaussian::isotropic(vec![0.5 + h], 1.0).unwrap().entropy();
        let down = Gaussian::isotropic(vec![0.5 - h], 1.0).unwrap().entropy();
        let fd = (up - down) / (2.0 * h);
        assert!((est.value[0] - fd).abs() <= 3.0 * est.std_error[0]);
    }

    #[test]
    fn inverse_paths_agree() {
        let m = Matrix::from_row_slice(3, 3, &[2.0, 0.3, 0.1, 0.3, 1.0, -0.2, 0.1, -0.2, 0.5]);
        let g = Gaussian::new(vec![0.1, -0.3, 0.2], Covariance::Dense(m)).unwrap();
        let a = gaussian_entropy_gradient(&g, 500, 6, InversePath::Precomputed).unwrap();
        let b = gaussian_entropy_gradient(&g, 500, 6, InversePath::Solve).unwrap();
        for (x, y) in a.value.iter().zip(&b.value) {
            assert!((x - y).abs() <= 1e-10);
        }
    }

    #[test]
    fn dense_and_diagonal_paths_agree() {
        let v = vec![0.4, 1.7, 3.0];
        let diag = Gaussian::new(vec![1.0, 0.0, -1.0], Covariance::Diagonal(v.clone())).unwrap();
        let dense = Gaussian::new(vec![1.0, 0.0, -1.0], Covariance::Dense(Covariance::Diagonal(v).to_dense())).unwrap();
        assert!((entropy_gaussian(diag.covariance()).unwrap() - entropy_gaussian(dense.covariance()).unwrap()).abs() <= 1e-10);
        let x = [0.3, 0.8, -2.0];
        assert!((diag.log_density(&x) - dense.log_density(&x)).abs() <= 1e-10);
        let z = [0.5, -1.0, 2.0];
        for (a, b) in diag.transform(&z).iter().zip(dense.transform(&z)) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn kl_of_identical_gaussians_is_zero() {
        let p = Gaussian::new(vec![0.0, 1.0], Covariance::Diagonal(vec![1.0, 2.0])).unwrap();
        let v = entropy_variational(&p.samples(4000, 7), |x| p.log_density(x), &p).unwrap();
        assert!(v.kl.within(0.0, 3.0) || v.kl.value.abs() < 1e-12);
    }

    #[test]
    fn wide_surrogate_overestimates_entropy() {
        let p = Gaussian::isotropic(vec![0.0], 1.0).unwrap();
        let q = Gaussian::isotropic(vec![0.0], 25.0).unwrap();
        let v = entropy_variational(&p.samples(20_000, 8), |x| p.log_density(x), &q).unwrap();
        let oracle = 0.5 * (2.0 * PI * 25.0).ln() + 1.0 / (2.0 * 25.0);
        assert!(v.cross_entropy.within(oracle, 3.0));
        assert!(v.cross_entropy.value > p.entropy());
    }

    #[test]
    fn diagonal_kl_matches_closed_form() {
        let (mp, vp) = ([0.0, 1.0], [1.0, 0.5]);
        let (mq, vq) = ([0.5, 0.0], [2.0, 1.5]);
        let p = Gaussian::new(mp.to_vec(), Covariance::Diagonal(vp.to_vec())).unwrap();
        let q = Gaussian::new(mq.to_vec(), Covariance::Diagonal(vq.to_vec())).unwrap();
        let v = entropy_variational(&p.samples(20_000, 9), |x| p.log_density(x), &q).unwrap();
        let oracle: f64 = (0..2)
            .map(|i| 0.5 * ((vq[i] / vp[i]).ln() + (vp[i] + (mp[i] - mq[i]).powi(2)) / vq[i] - 1.0))
            .sum();
        assert!(v.kl.within(oracle, 3.0), "{:?} vs {oracle}", v.kl);
    }

    #[test]
    fn support_mismatch_reported() {
        let q = Gaussian::isotropic(vec![0.0], 1e-4).unwrap();
        let err = entropy_variational(&[vec![100.0]], |_| 0.0, &q).unwrap_err();
        assert!(matches!(err, Error::SupportMismatch { index: 0, .. }));
    }

    proptest! {
        #[test]
        fn partition_nonincreasing_in_beta(beta in 0.01f64..5.0, seed in 0u64..1000) {
            let b = BoxDomain::cube(2, -10.0, 2.0).unwrap();
            let e = |x: &[f64]| (x[0] * x[0] + x[1] * x[1]).sqrt();
            let z1 = partition_estimate(beta, e, &b, 256, seed).unwrap();
            let z2 = partition_estimate(2.0 * beta, e, &b, 256, seed).unwrap();
            prop_assert!(z2.value <= z1.value);
        }
    }
}
