//! JSON run configuration and its resolution into concrete library inputs.
//!
//! Unknown keys anywhere in the document are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use fecf::analysis::{BenchConfig, Method, SweepGrid};
use fecf::baselines::{GradientCfConfig, SurrogateConfig};
use fecf::entropy::BoxDomain;
use fecf::iot;
use fecf::model::{fit_logistic, Dataset};
use fecf::{AnnealConfig, EnergyParams, EntropyModel, ModelHandle, Regularizer};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Scenario {
    /// `sigmoid(x_0 + x_1)` in two dimensions.
    ReferenceLandscape {
        #[serde(default = "default_reference_x0")]
        x0: Vec<f64>,
    },
    /// Logistic model fitted to generated IoT data, explained at one row.
    IotSynthetic {
        #[serde(default = "default_iot_rows")]
        n_rows: usize,
        #[serde(default)]
        data_seed: u64,
        #[serde(default = "default_l2")]
        l2: f64,
        #[serde(default = "default_fit_iters")]
        fit_iters: usize,
        /// Point to explain; the anomalous prototype when absent.
        #[serde(default)]
        x0: Option<Vec<f64>>,
    },
    /// Logistic model fitted to a CSV dataset, explained at `row` (0-based data row).
    Csv {
        path: PathBuf,
        #[serde(default)]
        row: usize,
        #[serde(default = "default_l2")]
        l2: f64,
        #[serde(default = "default_fit_iters")]
        fit_iters: usize,
    },
}

fn default_reference_x0() -> Vec<f64> {
    vec![3.0, 3.0]
}
fn default_iot_rows() -> usize {
    400
}
fn default_l2() -> f64 {
    1.0
}
fn default_fit_iters() -> usize {
    500
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario::ReferenceLandscape {
            x0: default_reference_x0(),
        }
    }
}

/// Energy block; absent sets fall back to the scenario's defaults and absent
/// weights are drawn from `U(1, 10)` with the run seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySection {
    pub lambda: f64,
    pub mu: f64,
    pub target_c: f64,
    #[serde(default)]
    pub critical_set: Option<Vec<usize>>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    #[serde(default)]
    pub regularizer: Regularizer,
    #[serde(default)]
    pub immutable_set: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeSection {
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default = "default_landscape_beta")]
    pub beta: f64,
    /// Falls back to the anneal search box, then to `[-10, 2]^2`.
    #[serde(default, rename = "box")]
    pub domain: Option<BoxDomain>,
}

fn default_resolution() -> usize {
    201
}
fn default_landscape_beta() -> f64 {
    0.01
}

impl Default for LandscapeSection {
    fn default() -> Self {
        Self {
            resolution: default_resolution(),
            beta: default_landscape_beta(),
            domain: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySection {
    pub features: [usize; 2],
    #[serde(default = "default_boundary_resolution")]
    pub resolution: usize,
    #[serde(default)]
    pub range_i: Option<[f64; 2]>,
    #[serde(default)]
    pub range_j: Option<[f64; 2]>,
}

fn default_boundary_resolution() -> usize {
    101
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    #[serde(default = "default_runs")]
    pub n_runs: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    #[serde(default)]
    pub gradient: Option<GradientCfConfig>,
    #[serde(default)]
    pub surrogate: Option<SurrogateConfig>,
    #[serde(default = "default_true")]
    pub reseed_weights: bool,
    #[serde(default)]
    pub boundary: Option<BoundarySection>,
}

fn default_runs() -> usize {
    20
}
fn default_methods() -> Vec<Method> {
    vec![Method::FreeEnergy, Method::Gradient, Method::Surrogate]
}
fn default_true() -> bool {
    true
}

impl Default for CompareSection {
    fn default() -> Self {
        Self {
            n_runs: default_runs(),
            methods: default_methods(),
            gradient: None,
            surrogate: None,
            reseed_weights: true,
            boundary: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenDataSection {
    #[serde(default = "default_gen_rows")]
    pub n_rows: usize,
}

fn default_gen_rows() -> usize {
    1000
}

impl Default for GenDataSection {
    fn default() -> Self {
        Self {
            n_rows: default_gen_rows(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub scenario: Scenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub energy: Option<EnergySection>,
    /// Its `seed` field is replaced by the run seed.
    #[serde(default)]
    pub anneal: Option<AnnealConfig>,
    #[serde(default)]
    pub entropy: Option<EntropyModel>,
    #[serde(default)]
    pub landscape: Option<LandscapeSection>,
    #[serde(default)]
    pub sweep: Option<SweepGrid>,
    #[serde(default)]
    pub compare: Option<CompareSection>,
    #[serde(default)]
    pub bench: Option<BenchConfig>,
    #[serde(default)]
    pub gen_data: Option<GenDataSection>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }
}

/// Model, explained point and fully populated parameter blocks.
pub struct Resolved {
    pub model: ModelHandle,
    pub x0: Vec<f64>,
    pub feature_names: Vec<String>,
    pub eparams: EnergyParams,
    pub anneal: AnnealConfig,
    pub entropy: EntropyModel,
    /// Per-feature scale for surrogate sampling.
    pub feature_scales: Option<Vec<f64>>,
    /// Critical weights came from the seeded draw rather than the config.
    pub weights_seeded: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    Reference,
    Iot,
    Csv,
}

impl Scenario {
    pub fn kind(&self) -> ScenarioKind {
        match self {
            Scenario::ReferenceLandscape { .. } => ScenarioKind::Reference,
            Scenario::IotSynthetic { .. } => ScenarioKind::Iot,
            Scenario::Csv { .. } => ScenarioKind::Csv,
        }
    }
}

fn input_err(e: fecf::Error) -> CliError {
    CliError::config(e.to_string())
}

fn fit(data: &Dataset, l2: f64, iters: usize) -> Result<ModelHandle, CliError> {
    fit_logistic(data, l2, iters).map_err(|e| CliError::config(format!("model fit: {e}")))
}

pub fn resolve(cfg: &RunConfig) -> Result<Resolved, CliError> {
    let (model, x0, feature_names, feature_scales) = match &cfg.scenario {
        Scenario::ReferenceLandscape { x0 } => {
            if x0.len() != 2 {
                return Err(CliError::config(format!("reference-landscape x0 must have 2 entries, got {}", x0.len())));
            }
            (ModelHandle::reference_landscape(), x0.clone(), vec!["x0".into(), "x1".into()], None)
        }
        Scenario::IotSynthetic {
            n_rows,
            data_seed,
            l2,
            fit_iters,
            x0,
        } => {
            let data = iot::generate_iot_data(*n_rows, *data_seed).map_err(input_err)?;
            let model = fit(&data, *l2, *fit_iters)?;
            let x0 = x0.clone().unwrap_or_else(|| iot::ANOMALOUS_PROTOTYPE.to_vec());
            (model, x0, iot::feature_names(), Some(iot::within_class_std().to_vec()))
        }
        Scenario::Csv { path, row, l2, fit_iters } => {
            let file = fs::File::open(path).map_err(|e| CliError::config(format!("cannot open {}: {e}", path.display())))?;
            let data = Dataset::from_csv(file).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
            let x0 = data
                .rows
                .get(*row)
                .cloned()
                .ok_or_else(|| CliError::config(format!("row {row} out of range for {} data rows", data.len())))?;
            let model = fit(&data, *l2, *fit_iters)?;
            (model, x0, data.feature_names.clone(), None)
        }
    };
    let d = x0.len();
    let kind = cfg.scenario.kind();

    let energy = cfg.energy.clone().unwrap_or_else(|| default_energy(kind));
    let critical = energy.critical_set.clone().unwrap_or_else(|| match kind {
        ScenarioKind::Reference => vec![0, 1],
        ScenarioKind::Iot => iot::CRITICAL_FEATURES.to_vec(),
        ScenarioKind::Csv => Vec::new(),
    });
    let immutable = energy.immutable_set.clone().unwrap_or_else(|| match kind {
        ScenarioKind::Iot => iot::IMMUTABLE_FEATURES.to_vec(),
        _ => Vec::new(),
    });
    let mut eparams = EnergyParams::new(energy.lambda, energy.mu, energy.target_c)
        .with_regularizer(energy.regularizer)
        .with_immutable(immutable);
    eparams = match &energy.weights {
        Some(w) => eparams.with_critical(critical, w.clone()),
        None => eparams.with_seeded_weights(critical, cfg.seed),
    };
    eparams.validate(d).map_err(input_err)?;

    let mut anneal = match &cfg.anneal {
        Some(a) => a.clone(),
        None => default_anneal(kind, &x0)?,
    };
    anneal.seed = cfg.seed;
    anneal.validate(d).map_err(input_err)?;

    let entropy = cfg.entropy.unwrap_or_default();
    entropy.validate().map_err(input_err)?;

    Ok(Resolved {
        model,
        x0,
        feature_names,
        eparams,
        anneal,
        entropy,
        feature_scales,
        weights_seeded: energy.weights.is_none(),
    })
}

fn default_energy(kind: ScenarioKind) -> EnergySection {
    let (lambda, mu, target_c) = match kind {
        ScenarioKind::Reference => (1.0, 1.0, 0.0),
        ScenarioKind::Iot => (0.1, 500.0, 0.5),
        ScenarioKind::Csv => (0.1, 10.0, 0.5),
    };
    EnergySection {
        lambda,
        mu,
        target_c,
        critical_set: None,
        weights: None,
        regularizer: Regularizer::WeightedL1,
        immutable_set: None,
    }
}

fn default_anneal(kind: ScenarioKind, x0: &[f64]) -> Result<AnnealConfig, CliError> {
    Ok(match kind {
        ScenarioKind::Reference => AnnealConfig::new(1e-3, 0.01, 1e-4, 500, 0).with_box(BoxDomain::cube(2, -10.0, 2.0).map_err(input_err)?),
        ScenarioKind::Iot => AnnealConfig::new(0.05, 10.0, 1e-3, 5000, 0).with_box(iot::plausibility_box(x0).map_err(input_err)?),
        ScenarioKind::Csv => AnnealConfig::new(0.01, 1.0, 1e-3, 5000, 0),
    })
}

/// Gradient baseline settings with harness defaults: small update noise and
/// the energy block's immutable features.
pub fn gradient_config(section: &CompareSection, r: &Resolved, kind: ScenarioKind) -> GradientCfConfig {
    section.gradient.clone().unwrap_or_else(|| {
        let alpha = if kind == ScenarioKind::Iot { 100.0 } else { 0.1 };
        let mut g = GradientCfConfig::new(alpha, r.eparams.target_c, r.anneal.max_iters, 0);
        g.noise_scale = 0.01;
        g.immutable_set = r.eparams.immutable_set.clone();
        g
    })
}

pub fn surrogate_config(section: &CompareSection, r: &Resolved) -> SurrogateConfig {
    section.surrogate.clone().unwrap_or_else(|| {
        let mut s = SurrogateConfig::new(500, 1.0, 1e-6, 0);
        s.feature_scales = r.feature_scales.clone();
        s.immutable_set = r.eparams.immutable_set.clone();
        s
    })
}
