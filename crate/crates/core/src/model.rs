//! Predictive-model abstraction `f: R^n -> R`, reference models, tabular
//! datasets and a deterministic L2-regularized logistic fit.

use std::collections::HashSet;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, ensure_finite, Error, Result};
use crate::numdiff;
use crate::Matrix;

/// Dense point in feature space with optional dimension labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    names: Option<Vec<String>>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        ensure_finite(&values, "feature vector")?;
        Ok(Self {
            values,
            names: None,
        })
    }

    pub fn with_names(values: Vec<f64>, names: Vec<String>) -> Result<Self> {
        ensure_finite(&values, "feature vector")?;
        check_names(&names, values.len())?;
        Ok(Self {
            values,
            names: Some(names),
        })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![0.0; dim],
            names: None,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl AsRef<[f64]> for FeatureVector {
    fn as_ref(&self) -> &[f64] {
        &self.values
    }
}

fn check_names(names: &[String], len: usize) -> Result<()> {
    if names.len() != len {
        return Err(Error::InvalidInput(format!(
            "{} names for {} values",
            names.len(),
            len
        )));
    }
    let mut seen = HashSet::new();
    for n in names {
        if !seen.insert(n.as_str()) {
            return Err(Error::InvalidInput(format!("duplicate feature name {n:?}")));
        }
    }
    Ok(())
}

/// Labeled tabular data. Rows are stored dense; `labels[i]` belongs to `rows[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, labels: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::InvalidInput("dataset has no rows".into()));
        }
        if labels.len() != rows.len() {
            return Err(Error::InvalidInput(format!(
                "{} labels for {} rows",
                labels.len(),
                rows.len()
            )));
        }
        check_names(&feature_names, feature_names.len())?;
        for (i, r) in rows.iter().enumerate() {
            if r.len() != feature_names.len() {
                return Err(Error::InvalidInput(format!(
                    "row {i} has {} values, expected {}",
                    r.len(),
                    feature_names.len()
                )));
            }
            ensure_finite(r, "dataset row")?;
        }
        if let Some(l) = labels.iter().find(|l| !(0.0..=1.0).contains(*l)) {
            return Err(Error::InvalidInput(format!("label {l} outside [0, 1]")));
        }
        Ok(Self {
            rows,
            labels,
            feature_names,
        })
    }

    pub fn dim(&self) -> usize {
        self.feature_names.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Reads CSV with a header row; the last column is the {0,1} label.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(true)
            .from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| Error::Parse {
                row: 1,
                column: 0,
                message: e.to_string(),
            })?
            .clone();
        if header.len() < 2 {
            return Err(Error::Parse {
                row: 1,
                column: header.len(),
                message: "need at least one feature column and a label column".into(),
            });
        }
        let n_features = header.len() - 1;
        let names: Vec<String> = header.iter().take(n_features).map(str::to_string).collect();
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (idx, rec) in rdr.records().enumerate() {
            let row = idx + 2;
            let rec = rec.map_err(|e| Error::Parse {
                row,
                column: 0,
                message: e.to_string(),
            })?;
            if rec.len() != header.len() {
                return Err(Error::Parse {
                    row,
                    column: rec.len().min(header.len()) + 1,
                    message: format!("expected {} fields, found {}", header.len(), rec.len()),
                });
            }
            let mut values = Vec::with_capacity(n_features);
            for (c, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                    row,
                    column: c + 1,
                    message: format!("not a number: {field:?}"),
                })?;
                if !v.is_finite() {
                    return Err(Error::Parse {
                        row,
                        column: c + 1,
                        message: format!("non-finite value {field:?}"),
                    });
                }
                if c < n_features {
                    values.push(v);
                } else if v == 0.0 || v == 1.0 {
                    labels.push(v);
                } else {
                    return Err(Error::Parse {
                        row,
                        column: c + 1,
                        message: format!("label must be 0 or 1, found {field:?}"),
                    });
                }
            }
            rows.push(values);
        }
        if rows.is_empty() {
            return Err(Error::Parse {
                row: 2,
                column: 0,
                message: "no data rows".into(),
            });
        }
        Dataset::new(rows, labels, names).map_err(|e| Error::Parse {
            row: 1,
            column: 0,
            message: e.to_string(),
        })
    }

    /// Header-first, comma-separated, LF line endings, label column `label`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let mut header: Vec<String> = self.feature_names.iter().map(|n| csv_field(n)).collect();
        header.push("label".into());
        writeln!(w, "{}", header.join(","))?;
        for (row, label) in self.rows.iter().zip(&self.labels) {
            let mut line = String::new();
            for v in row {
                line.push_str(&v.to_string());
                line.push(',');
            }
            line.push_str(&label.to_string());
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    Analytic,
    FiniteDifference,
}

/// Model-specific coefficient block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelKind {
    /// `w.x + b`
    Linear { weights: Vec<f64>, bias: f64 },
    /// `sigmoid(w.x + b)`
    Logistic { weights: Vec<f64>, bias: f64 },
    /// `b + sum_k a_k exp(-|x - c_k|^2 / (2 h^2))` with fixed centers and bandwidth.
    RbfKernel {
        centers: Vec<Vec<f64>>,
        coefficients: Vec<f64>,
        bandwidth: f64,
        bias: f64,
    },
    /// Logistic model produced by [`fit_logistic`]; weights are in raw feature units.
    FittedLogistic {
        weights: Vec<f64>,
        bias: f64,
        training_loss: f64,
        iterations: usize,
    },
    /// `0.5 x^T A x + b.x + c` with symmetric `A`, used as a curvature reference.
    Quadratic {
        matrix: Vec<Vec<f64>>,
        linear: Vec<f64>,
        bias: f64,
    },
}

/// Immutable predictive model with value, gradient and Hessian access.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHandle {
    dim: usize,
    #[serde(flatten)]
    kind: ModelKind,
    gradient_mode: GradientMode,
}

/// Numerically stable logistic function.
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

// Keeps logistic outputs inside the open interval (0, 1).
fn open_unit(p: f64) -> f64 {
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

impl ModelHandle {
    pub fn new(kind: ModelKind) -> Result<Self> {
        let dim = match &kind {
            ModelKind::Linear { weights, bias }
            | ModelKind::Logistic { weights, bias }
            | ModelKind::FittedLogistic { weights, bias, .. } => {
                ensure_finite(weights, "weights")?;
                ensure_finite(&[*bias], "bias")?;
                weights.len()
            }
            ModelKind::RbfKernel {
                centers,
                coefficients,
                bandwidth,
                bias,
            } => {
                if centers.is_empty() || centers.len() != coefficients.len() {
                    return Err(Error::InvalidInput(
                        "rbf model needs one coefficient per center".into(),
                    ));
                }
                if !(*bandwidth > 0.0 && bandwidth.is_finite()) {
                    return Err(Error::InvalidInput("rbf bandwidth must be positive".into()));
                }
                let d = centers[0].len();
                for c in centers {
                    ensure_dim(d, c.len())?;
                    ensure_finite(c, "rbf center")?;
                }
                ensure_finite(coefficients, "rbf coefficients")?;
                ensure_finite(&[*bias], "bias")?;
                d
            }
            ModelKind::Quadratic {
                matrix,
                linear,
                bias,
            } => {
                let d = linear.len();
                ensure_dim(d, matrix.len())?;
                for (i, row) in matrix.iter().enumerate() {
                    ensure_dim(d, row.len())?;
                    ensure_finite(row, "quadratic matrix")?;
                    for (j, v) in row.iter().enumerate() {
                        if (v - matrix[j][i]).abs() > 1e-12 * (1.0 + v.abs()) {
                            return Err(Error::InvalidInput(
                                "quadratic matrix must be symmetric".into(),
                            ));
                        }
                    }
                }
                ensure_finite(linear, "quadratic linear term")?;
                ensure_finite(&[*bias], "bias")?;
                d
            }
        };
        if dim == 0 {
            return Err(Error::InvalidInput("model dimension must be positive".into()));
        }
        Ok(Self {
            dim,
            kind,
            gradient_mode: GradientMode::Analytic,
        })
    }

    pub fn linear(weights: Vec<f64>, bias: f64) -> Result<Self> {
        Self::new(ModelKind::Linear { weights, bias })
    }

    pub fn logistic(weights: Vec<f64>, bias: f64) -> Result<Self> {
        Self::new(ModelKind::Logistic { weights, bias })
    }

    pub fn quadratic(matrix: Vec<Vec<f64>>, linear: Vec<f64>, bias: f64) -> Result<Self> {
        Self::new(ModelKind::Quadratic {
            matrix,
            linear,
            bias,
        })
    }

    pub fn rbf(centers: Vec<Vec<f64>>, coefficients: Vec<f64>, bandwidth: f64, bias: f64) -> Result<Self> {
        Self::new(ModelKind::RbfKernel {
            centers,
            coefficients,
            bandwidth,
            bias,
        })
    }

    /// The fixed 2-D landscape model `sigmoid(x_0 + x_1)` used for the
    /// figure-style experiments.
    pub fn reference_landscape() -> Self {
        Self::logistic(vec![1.0, 1.0], 0.0).expect("constant parameters")
    }

    /// Fixed nonlinear 2-D model: two Gaussian bumps of opposite sign.
    pub fn reference_rbf() -> Self {
        Self::rbf(
            vec![vec![1.0, 1.0], vec![-1.0, -0.5]],
            vec![1.0, -0.8],
            0.9,
            0.1,
        )
        .expect("constant parameters")
    }

    pub fn with_gradient_mode(mut self, mode: GradientMode) -> Self {
        self.gradient_mode = mode;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn gradient_mode(&self) -> GradientMode {
        self.gradient_mode
    }

    pub fn has_analytic_hessian(&self) -> bool {
        self.gradient_mode == GradientMode::Analytic
    }

    fn check(&self, x: &[f64]) -> Result<()> {
        ensure_dim(self.dim, x.len())?;
        ensure_finite(x, "model input")
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.check(x)?;
        let v = self.eval(x);
        if !v.is_finite() {
            return Err(Error::NumericalFailure(format!("model output {v}")));
        }
        Ok(v)
    }

    /// Unchecked evaluation; callers guarantee dimension and finiteness.
    pub(crate) fn eval(&self, x: &[f64]) -> f64 {
        match &self.kind {
            ModelKind::Linear { weights, bias } => numdiff::dot(weights, x) + bias,
            ModelKind::Logistic { weights, bias } | ModelKind::FittedLogistic { weights, bias, .. } => {
                open_unit(sigmoid(numdiff::dot(weights, x) + bias))
            }
            ModelKind::RbfKernel {
                centers,
                coefficients,
                bandwidth,
                bias,
            } => {
                let inv = 1.0 / (2.0 * bandwidth * bandwidth);
                bias + centers
                    .iter()
                    .zip(coefficients)
                    .map(|(c, a)| a * (-sq_dist(x, c) * inv).exp())
                    .sum::<f64>()
            }
            ModelKind::Quadratic {
                matrix,
                linear,
                bias,
            } => {
                let quad: f64 = matrix
                    .iter()
                    .zip(x)
                    .map(|(row, xi)| xi * numdiff::dot(row, x))
                    .sum();
                0.5 * quad + numdiff::dot(linear, x) + bias
            }
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check(x)?;
        let g = match self.gradient_mode {
            GradientMode::Analytic => self.analytic_gradient(x),
            GradientMode::FiniteDifference => numdiff::central_gradient(|p| self.eval(p), x),
        };
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("non-finite gradient".into()));
        }
        Ok(g)
    }

    fn analytic_gradient(&self, x: &[f64]) -> Vec<f64> {
        match &self.kind {
            ModelKind::Linear { weights, .. } => weights.clone(),
            ModelKind::Logistic { weights, bias } | ModelKind::FittedLogistic { weights, bias, .. } => {
                let s = sigmoid(numdiff::dot(weights, x) + bias);
                let k = s * (1.0 - s);
                weights.iter().map(|w| k * w).collect()
            }
            ModelKind::RbfKernel {
                centers,
                coefficients,
                bandwidth,
                ..
            } => {
                let h2 = bandwidth * bandwidth;
                let mut g = vec![0.0; self.dim];
                for (c, a) in centers.iter().zip(coefficients) {
                    let phi = (-sq_dist(x, c) / (2.0 * h2)).exp();
                    for ((gi, xi), ci) in g.iter_mut().zip(x).zip(c) {
                        *gi -= a * phi * (xi - ci) / h2;
                    }
                }
                g
            }
            ModelKind::Quadratic { matrix, linear, .. } => matrix
                .iter()
                .zip(linear)
                .map(|(row, b)| numdiff::dot(row, x) + b)
                .collect(),
        }
    }

    /// Symmetric Hessian; analytic when available, finite differences otherwise.
    pub fn hessian(&self, x: &[f64]) -> Result<Matrix> {
        self.check(x)?;
        let h = match self.gradient_mode {
            GradientMode::Analytic => self.analytic_hessian(x),
            GradientMode::FiniteDifference => {
                let mut h = numdiff::hessian_from_values(|p| self.eval(p), x);
                numdiff::symmetrize(&mut h);
                h
            }
        };
        if h.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalFailure("non-finite Hessian".into()));
        }
        Ok(h)
    }

    fn analytic_hessian(&self, x: &[f64]) -> Matrix {
        let n = self.dim;
        match &self.kind {
            ModelKind::Linear { .. } => Matrix::zeros(n, n),
            ModelKind::Logistic { weights, bias } | ModelKind::FittedLogistic { weights, bias, .. } => {
                let s = sigmoid(numdiff::dot(weights, x) + bias);
                let k = s * (1.0 - s) * (1.0 - 2.0 * s);
                Matrix::from_fn(n, n, |i, j| k * weights[i] * weights[j])
            }
            ModelKind::RbfKernel {
                centers,
                coefficients,
                bandwidth,
                ..
            } => {
                let h2 = bandwidth * bandwidth;
                let mut h = Matrix::zeros(n, n);
                for (c, a) in centers.iter().zip(coefficients) {
                    let phi = (-sq_dist(x, c) / (2.0 * h2)).exp();
                    for i in 0..n {
                        for j in 0..n {
                            let outer = (x[i] - c[i]) * (x[j] - c[j]) / (h2 * h2);
                            let diag = if i == j { 1.0 / h2 } else { 0.0 };
                            h[(i, j)] += a * phi * (outer - diag);
                        }
                    }
                }
                h
            }
            ModelKind::Quadratic { matrix, .. } => Matrix::from_fn(n, n, |i, j| matrix[i][j]),
        }
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Full-batch gradient descent with Armijo backtracking on the mean log-loss
/// plus `0.5 * l2_penalty * |w|^2` (intercept unpenalized). Features are
/// standardized internally; the returned weights act on raw features.
pub fn fit_logistic(data: &Dataset, l2_penalty: f64, max_iters: usize) -> Result<ModelHandle> {
    if !(l2_penalty >= 0.0 && l2_penalty.is_finite()) {
        return Err(Error::InvalidInput("l2_penalty must be a finite nonnegative number".into()));
    }
    if max_iters == 0 {
        return Err(Error::InvalidInput("max_iters must be positive".into()));
    }
    if data.labels.iter().any(|&l| l != 0.0 && l != 1.0) {
        return Err(Error::DegenerateData("labels must be exactly 0 or 1".into()));
    }
    let positives = data.labels.iter().filter(|&&l| l == 1.0).count();
    if positives == 0 || positives == data.len() {
        return Err(Error::DegenerateData("training data contains a single class".into()));
    }

    let n = data.len() as f64;
    let d = data.dim();
    let mut means = vec![0.0; d];
    for r in &data.rows {
        for (m, v) in means.iter_mut().zip(r) {
            *m += v / n;
        }
    }
    let mut scales = vec![0.0; d];
    for r in &data.rows {
        for ((s, v), m) in scales.iter_mut().zip(r).zip(&means) {
            *s += (v - m) * (v - m) / n;
        }
    }
    for s in scales.iter_mut() {
        *s = if *s > 1e-24 { s.sqrt() } else { 1.0 };
    }
    let z: Vec<Vec<f64>> = data
        .rows
        .iter()
        .map(|r| {
            r.iter()
                .zip(&means)
                .zip(&scales)
                .map(|((v, m), s)| (v - m) / s)
                .collect()
        })
        .collect();

    let loss = |w: &[f64], b: f64| -> f64 {
        let data_term: f64 = z
            .iter()
            .zip(&data.labels)
            .map(|(row, y)| {
                let t = numdiff::dot(w, row) + b;
                softplus(t) - y * t
            })
            .sum::<f64>()
            / n;
        data_term + 0.5 * l2_penalty * numdiff::dot(w, w)
    };
    let grad = |w: &[f64], b: f64| -> (Vec<f64>, f64) {
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for (row, y) in z.iter().zip(&data.labels) {
            let r = sigmoid(numdiff::dot(w, row) + b) - y;
            gb += r / n;
            for (g, v) in gw.iter_mut().zip(row) {
                *g += r * v / n;
            }
        }
        for (g, wi) in gw.iter_mut().zip(w) {
            *g += l2_penalty * wi;
        }
        (gw, gb)
    };

    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut current = loss(&w, b);
    let mut step = 1.0;
    let mut iterations = 0;
    for _ in 0..max_iters {
        let (gw, gb) = grad(&w, b);
        let gnorm2 = numdiff::dot(&gw, &gw) + gb * gb;
        if gnorm2.sqrt() < 1e-10 {
            break;
        }
        let mut accepted = false;
        let mut t = step;
        while t > 1e-12 {
            let w_new: Vec<f64> = w.iter().zip(&gw).map(|(wi, g)| wi - t * g).collect();
            let b_new = b - t * gb;
            let candidate = loss(&w_new, b_new);
            if candidate <= current - 1e-4 * t * gnorm2 {
                w = w_new;
                b = b_new;
                current = candidate;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        iterations += 1;
        step = (t * 2.0).min(64.0);
    }

    let weights: Vec<f64> = w.iter().zip(&scales).map(|(wi, s)| wi / s).collect();
    let bias = b - w
        .iter()
        .zip(&means)
        .zip(&scales)
        .map(|((wi, m), s)| wi * m / s)
        .sum::<f64>();
    ModelHandle::new(ModelKind::FittedLogistic {
        weights,
        bias,
        training_loss: current,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn predict_examples() {
        let lin = ModelHandle::linear(vec![1.0, 2.0], 0.0).unwrap();
        assert_eq!(lin.predict(&[0.0, 0.0]).unwrap(), 0.0);
        let flat = ModelHandle::logistic(vec![0.0, 0.0], 0.0).unwrap();
        assert_eq!(flat.predict(&[5.0, -3.0]).unwrap(), 0.5);
        let lg = ModelHandle::logistic(vec![1.0, 1.0], -1.0).unwrap();
        assert!((lg.predict(&[1.0, 1.0]).unwrap() - 0.731_058_578_630_004_9).abs() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let lin = ModelHandle::linear(vec![1.0, 2.0], 0.0).unwrap();
        assert_eq!(
            lin.predict(&[1.0]),
            Err(Error::DimensionMismatch { expected: 2, got: 1 })
        );
        assert!(matches!(lin.predict(&[f64::NAN, 0.0]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn logistic_stays_in_open_interval() {
        let lg = ModelHandle::logistic(vec![1.0], 0.0).unwrap();
        let hi = lg.predict(&[800.0]).unwrap();
        let lo = lg.predict(&[-800.0]).unwrap();
        assert!(hi < 1.0 && lo > 0.0);
    }

    #[test]
    fn gradient_examples() {
        let lin = ModelHandle::linear(vec![1.0, 2.0], 0.0).unwrap();
        assert_eq!(lin.gradient(&[4.0, -7.0]).unwrap(), vec![1.0, 2.0]);
        let flat = ModelHandle::logistic(vec![0.0, 0.0], 0.0).unwrap();
        assert_eq!(flat.gradient(&[1.0, 9.0]).unwrap(), vec![0.0, 0.0]);
        let lg = ModelHandle::logistic(vec![1.0, 1.0], -1.0).unwrap();
        let g = lg.gradient(&[1.0, 1.0]).unwrap();
        // sigma(1)(1 - sigma(1)), cross-checked by central differences below.
        let fd = numdiff::central_gradient(|x| lg.eval(x), &[1.0, 1.0]);
        for (a, b) in g.iter().zip(&fd) {
            assert!((a - 0.196_611_933_241_481_85).abs() < 1e-12);
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn hessian_examples() {
        let lin = ModelHandle::linear(vec![1.0, 2.0], 3.0).unwrap();
        assert_eq!(lin.hessian(&[0.5, 0.5]).unwrap(), Matrix::zeros(2, 2));
        // f = 0.5 x^T diag(3, 1) x has Hessian diag(3, 1).
        let q = ModelHandle::quadratic(vec![vec![3.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0], 0.0).unwrap();
        let h = q.hessian(&[0.2, -0.4]).unwrap();
        let h_fd = q.clone().with_gradient_mode(GradientMode::FiniteDifference).hessian(&[0.2, -0.4]).unwrap();
        assert_eq!(h, Matrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]));
        assert!((h - h_fd).abs().max() < 1e-6);
        let lg = ModelHandle::logistic(vec![1.0, 0.0], 0.0).unwrap();
        assert!(lg.hessian(&[0.0, 0.0]).unwrap()[(0, 0)].abs() < 1e-15);
    }

    fn reference_models() -> Vec<ModelHandle> {
        vec![
            ModelHandle::linear(vec![0.5, -1.5, 2.0], 0.3).unwrap(),
            ModelHandle::logistic(vec![0.8, -0.4, 1.1], -0.2).unwrap(),
            ModelHandle::rbf(
                vec![vec![0.0, 1.0, -1.0], vec![1.0, 0.0, 0.5]],
                vec![1.2, -0.7],
                1.3,
                0.05,
            )
            .unwrap(),
            ModelHandle::quadratic(
                vec![vec![2.0, 0.5, 0.0], vec![0.5, 1.0, -0.3], vec![0.0, -0.3, 0.7]],
                vec![0.1, 0.0, -0.2],
                1.0,
            )
            .unwrap(),
        ]
    }

    #[test]
    fn analytic_gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for model in reference_models() {
            for _ in 0..100 {
                let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
                let g = model.gradient(&x).unwrap();
                let fd = numdiff::central_gradient(|p| model.eval(p), &x);
                let err = numdiff::relative_error(&g, &fd, 1e-6);
                assert!(err <= 1e-5, "{:?}: rel err {err}", model.kind());
            }
        }
    }

    #[test]
    fn analytic_hessians_match_differenced_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for model in reference_models() {
            let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
            let h = model.hessian(&x).unwrap();
            let h_fd = numdiff::hessian_from_gradient(|p| model.analytic_gradient(p), &x);
            assert!((&h - &h_fd).abs().max() < 1e-6);
            assert!((&h - h.transpose()).abs().max() <= 1e-10);
            let h_vals = model.clone().with_gradient_mode(GradientMode::FiniteDifference).hessian(&x).unwrap();
            assert!((&h_vals - h_vals.transpose()).abs().max() <= 1e-10);
            assert!((&h - &h_vals).abs().max() < 1e-5);
        }
    }

    #[test]
    fn finite_difference_mode_matches_analytic() {
        let model = ModelHandle::logistic(vec![1.0, 1.0], -1.0).unwrap();
        let fd_model = model.clone().with_gradient_mode(GradientMode::FiniteDifference);
        let a = model.gradient(&[1.0, 1.0]).unwrap();
        let b = fd_model.gradient(&[1.0, 1.0]).unwrap();
        assert!(numdiff::relative_error(&a, &b, 1e-12) < 1e-5);
    }

    #[test]
    fn fit_separable_pair() {
        let data = Dataset::new(vec![vec![0.0], vec![1.0]], vec![0.0, 1.0], vec!["x".into()]).unwrap();
        let m = fit_logistic(&data, 1e-3, 500).unwrap();
        assert!(m.predict(&[1.0]).unwrap() > 0.5);
        assert!(m.predict(&[0.0]).unwrap() < 0.5);
    }

    #[test]
    fn fit_constant_features_gives_prior() {
        let rows = vec![vec![2.0, 2.0]; 8];
        let labels = vec![1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let data = Dataset::new(rows, labels, vec!["a".into(), "b".into()]).unwrap();
        let m = fit_logistic(&data, 0.1, 2000).unwrap();
        // Intercept-only optimum: sigmoid(logit(3/8)) = 3/8.
        assert!((m.predict(&[2.0, 2.0]).unwrap() - 0.375).abs() < 1e-6);
    }

    #[test]
    fn fit_rejects_single_class() {
        let data = Dataset::new(vec![vec![0.0], vec![1.0]], vec![1.0, 1.0], vec!["x".into()]).unwrap();
        assert!(matches!(fit_logistic(&data, 0.1, 10), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn fit_is_deterministic() {
        let rows: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64, (i % 3) as f64]).collect();
        let labels: Vec<f64> = (0..20).map(|i| if i >= 10 { 1.0 } else { 0.0 }).collect();
        let data = Dataset::new(rows, labels, vec!["a".into(), "b".into()]).unwrap();
        let a = fit_logistic(&data, 0.05, 300).unwrap();
        let b = fit_logistic(&data, 0.05, 300).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn csv_reports_row_and_column() {
        let text = "a,b,label\n1,2,0\n3,x,1\n";
        match Dataset::from_csv(text.as_bytes()) {
            Err(Error::Parse { row, column, .. }) => assert_eq!((row, column), (3, 2)),
            other => panic!("unexpected {other:?}"),
        }
        let bad_label = "a,label\n1,2\n";
        assert!(matches!(
            Dataset::from_csv(bad_label.as_bytes()),
            Err(Error::Parse { row: 2, column: 2, .. })
        ));
    }

    #[test]
    fn feature_names_must_be_unique() {
        assert!(FeatureVector::with_names(vec![1.0, 2.0], vec!["a".into(), "a".into()]).is_err());
        assert!(FeatureVector::with_names(vec![1.0], vec!["a".into(), "b".into()]).is_err());
    }

    proptest! {
        #[test]
        fn csv_roundtrip(rows in proptest::collection::vec(proptest::collection::vec(-1e6f64..1e6, 3), 1..20)) {
            let labels: Vec<f64> = (0..rows.len()).map(|i| (i % 2) as f64).collect();
            let names = vec!["Packet Loss (%)".to_string(), "b".into(), "c,d".into()];
            let data = Dataset::new(rows, labels, names).unwrap();
            let mut buf = Vec::new();
            data.write_csv(&mut buf).unwrap();
            let back = Dataset::from_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back, data);
        }
    }
}
