//! One function per subcommand. Each stages every output file and commits
//! them together.

use std::path::Path;

use fecf::analysis::{boundary_grid, complexity_bench, method_variability, stability_sweep, BenchConfig, VariabilitySetup};
use fecf::entropy::BoxDomain;
use fecf::free_energy::landscape_grid;
use fecf::{find_counterfactual, iot, AnnealConfig, CounterfactualResult, EnergyParams, EntropyModel, FreeEnergyProblem, ModelHandle};
use serde::Serialize;

use crate::config::{gradient_config, resolve, surrogate_config, CompareSection, GenDataSection, LandscapeSection, Resolved, RunConfig, ScenarioKind};
use crate::output::{text, Csv, Stage};
use crate::CliError;

pub const EXIT_OK: i32 = 0;
pub const EXIT_NOT_CONVERGED: i32 = 2;
pub const EXIT_NOT_ROBUST: i32 = 3;

const LANDSCAPE_NOTE: &str = "entropy at each grid point is the Gaussian surrogate centered at that point with no trajectory history";

#[derive(Serialize)]
struct ResolvedMeta<'a> {
    model: &'a ModelHandle,
    x0: &'a [f64],
    feature_names: &'a [String],
    energy: &'a EnergyParams,
    anneal: &'a AnnealConfig,
    entropy: &'a EntropyModel,
}

#[derive(Serialize)]
struct IotConstants {
    anomalous_prototype: [f64; 12],
    benign_prototype: [f64; 12],
    within_class_std: [f64; 12],
    separation: f64,
    critical_features: [usize; 5],
    immutable_features: [usize; 2],
}

fn iot_constants() -> IotConstants {
    IotConstants {
        anomalous_prototype: iot::ANOMALOUS_PROTOTYPE,
        benign_prototype: iot::BENIGN_PROTOTYPE,
        within_class_std: iot::within_class_std(),
        separation: iot::SEPARATION,
        critical_features: iot::CRITICAL_FEATURES,
        immutable_features: iot::IMMUTABLE_FEATURES,
    }
}

#[derive(Serialize)]
struct Meta<'a> {
    artifact: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    config: RunConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    resolved: Option<ResolvedMeta<'a>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    iot: Option<IotConstants>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    notes: Vec<&'static str>,
}

fn meta<'a>(command: &'a str, cfg: &RunConfig, r: Option<&'a Resolved>, notes: Vec<&'static str>) -> Meta<'a> {
    let mut config = cfg.clone();
    config.output_dir = None;
    let uses_iot = cfg.scenario.kind() == ScenarioKind::Iot || command == "gen-data";
    Meta {
        artifact: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed: cfg.seed,
        config,
        resolved: r.map(|r| ResolvedMeta {
            model: &r.model,
            x0: &r.x0,
            feature_names: &r.feature_names,
            energy: &r.eparams,
            anneal: &r.anneal,
            entropy: &r.entropy,
        }),
        iot: uses_iot.then(iot_constants),
        notes,
    }
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn run_err(e: fecf::Error) -> CliError {
    match e {
        fecf::Error::NumericalFailure(_) | fecf::Error::SpectralFailure { .. } | fecf::Error::SingularSystem(_) => CliError::numerical(e.to_string()),
        _ => CliError::input(e.to_string()),
    }
}

pub fn trace_csv(result: &CounterfactualResult) -> Vec<u8> {
    let mut csv = Csv::new(&["iter", "free_energy", "energy", "entropy", "grad_norm", "alpha", "accepted", "uphill", "score"]);
    for t in &result.trace {
        csv.row(&[
            t.iter.to_string(),
            num(t.free_energy),
            num(t.energy),
            num(t.entropy),
            num(t.grad_norm),
            num(t.alpha),
            t.accepted.to_string(),
            t.uphill.to_string(),
            num(t.score),
        ]);
    }
    csv.into_bytes()
}

pub fn explain(cfg: &RunConfig, out: &Path) -> Result<i32, CliError> {
    let r = resolve(cfg)?;
    let mut stage = Stage::new(out)?;
    let result = find_counterfactual(&r.model, &r.x0, &r.eparams, &r.anneal, &r.entropy).map_err(run_err)?;
    stage.write_json("result.json", &result)?;
    stage.write("trace.csv", &trace_csv(&result))?;
    stage.write_json("meta.json", &meta("explain", cfg, Some(&r), Vec::new()))?;
    stage.commit()?;
    let robust = result.robustness.as_ref().is_some_and(|o| o.passed);
    Ok(if !result.converged {
        eprintln!(
            "ERROR not-converged: |f - c| = {} after {} iterations",
            (result.final_score - result.target_c).abs(),
            result.iterations_used
        );
        EXIT_NOT_CONVERGED
    } else if !robust {
        let dev = result.robustness.as_ref().map(|o| (o.max_f_deviation, o.tolerance));
        eprintln!("ERROR not-robust: probe deviation and tolerance {dev:?} after {} restarts", result.restarts);
        EXIT_NOT_ROBUST
    } else {
        EXIT_OK
    })
}

pub fn landscape(cfg: &RunConfig, out: &Path) -> Result<i32, CliError> {
    let r = resolve(cfg)?;
    let section = cfg.landscape.clone().unwrap_or_default();
    let domain = match (&section.domain, &r.anneal.search_box) {
        (Some(b), _) | (None, Some(b)) => b.clone(),
        (None, None) => BoxDomain::cube(2, -10.0, 2.0).map_err(run_err)?,
    };
    if !(section.beta > 0.0 && section.beta.is_finite()) {
        return Err(CliError::config(format!("landscape beta must be positive, got {}", section.beta)));
    }
    check_landscape(&section, &domain, r.x0.len())?;
    let mut stage = Stage::new(out)?;
    let problem = FreeEnergyProblem::new(&r.eparams, &r.model, &r.x0, &r.entropy).map_err(run_err)?;
    let grid = landscape_grid(&problem, &domain, section.resolution, section.beta).map_err(run_err)?;
    let mut csv = Csv::new(&["delta0", "delta1", "energy", "entropy", "free_energy"]);
    for p in &grid {
        csv.row(&[num(p.delta0), num(p.delta1), num(p.energy), num(p.entropy), num(p.free_energy)]);
    }
    stage.write("landscape.csv", &csv.into_bytes())?;
    stage.write_json("meta.json", &meta("landscape", cfg, Some(&r), vec![LANDSCAPE_NOTE]))?;
    stage.commit()?;
    Ok(EXIT_OK)
}

fn check_landscape(section: &LandscapeSection, domain: &BoxDomain, dim: usize) -> Result<(), CliError> {
    if dim != 2 || domain.dim() != 2 {
        return Err(CliError::config("landscape export needs a 2-D scenario and box"));
    }
    if section.resolution < 2 {
        return Err(CliError::config("landscape resolution must be at least 2"));
    }
    domain.validate().map_err(|e| CliError::config(e.to_string()))
}

pub fn sweep(cfg: &RunConfig, out: &Path) -> Result<i32, CliError> {
    let r = resolve(cfg)?;
    let grid = cfg.sweep.clone().ok_or_else(|| CliError::config("sweep command needs a `sweep` block"))?;
    grid.validate().map_err(|e| CliError::config(e.to_string()))?;
    if (1..grid.betas.len()).any(|i| grid.betas[..i].contains(&grid.betas[i])) {
        return Err(CliError::config("sweep betas must be distinct"));
    }
    let mut stage = Stage::new(out)?;
    let cells = stability_sweep(&r.model, &r.x0, &grid, &r.eparams, &r.anneal, &r.entropy).map_err(run_err)?;
    let mut curvature = Csv::new(&["lambda", "mu", "beta", "median_lambda_max"]);
    for &beta in &grid.betas {
        let mut csv = Csv::new(&["lambda", "mu", "stability", "success_rate", "dispersion"]);
        for c in cells.iter().filter(|c| c.beta == beta) {
            csv.row(&[num(c.lambda), num(c.mu), num(c.stability), num(c.success_rate), num(c.dispersion)]);
            curvature.row(&[num(c.lambda), num(c.mu), num(beta), num(c.median_lambda_max)]);
        }
        stage.write(&sweep_file(beta), &csv.into_bytes())?;
    }
    stage.write("sweep_curvature.csv", &curvature.into_bytes())?;
    stage.write_json("meta.json", &meta("sweep", cfg, Some(&r), Vec::new()))?;
    stage.commit()?;
    Ok(EXIT_OK)
}

pub fn sweep_file(beta: f64) -> String {
    format!("sweep_beta_{beta}.csv")
}

pub fn compare(cfg: &RunConfig, out: &Path) -> Result<i32, CliError> {
    let r = resolve(cfg)?;
    let kind = cfg.scenario.kind();
    let section = cfg.compare.clone().unwrap_or_default();
    let setup = compare_setup(&section, &r, kind);
    let d = r.x0.len();
    setup.gradient.validate(d).map_err(|e| CliError::config(e.to_string()))?;
    setup.surrogate.validate(d).map_err(|e| CliError::config(e.to_string()))?;
    if section.methods.is_empty() {
        return Err(CliError::config("compare needs at least one method"));
    }
    if section.n_runs < 2 {
        return Err(CliError::config("compare n_runs must be at least 2"));
    }
    let boundary = section.boundary.clone();
    if let Some(b) = &boundary {
        if b.features[0] >= d || b.features[1] >= d || b.features[0] == b.features[1] || b.resolution < 2 {
            return Err(CliError::config("boundary needs two distinct valid features and resolution >= 2"));
        }
    }

    let mut stage = Stage::new(out)?;
    let (rows, results) =
        method_variability(&r.model, &r.x0, &section.methods, &setup, &r.feature_names, section.n_runs, cfg.seed).map_err(run_err)?;
    let mut csv = Csv::new(&["feature", "method", "mean_abs_delta", "std_abs_delta"]);
    for row in &rows {
        csv.row(&[text(&row.feature), row.method.clone(), num(row.mean_abs_delta), num(row.std_abs_delta)]);
    }
    stage.write("variability.csv", &csv.into_bytes())?;

    let mut ends = Csv::new(&["method", "run", "seed", "converged", "final_score", "feature", "x_cf", "delta"]);
    for (k, res) in results.iter().enumerate() {
        let run = k % section.n_runs;
        for j in 0..d {
            ends.row(&[
                res.method.clone(),
                run.to_string(),
                cfg.seed.wrapping_add(run as u64).to_string(),
                res.converged.to_string(),
                num(res.final_score),
                text(&r.feature_names[j]),
                num(res.x_cf[j]),
                num(res.delta[j]),
            ]);
        }
    }
    stage.write("endpoints.csv", &ends.into_bytes())?;

    let (features, resolution, range_i, range_j) = match &boundary {
        Some(b) => (b.features, b.resolution, b.range_i, b.range_j),
        None => ([0, 1], 101, None, None),
    };
    let span = |j: usize| -> (f64, f64) {
        if let Some(b) = &r.anneal.search_box {
            return (r.x0[j] + b.lower[j], r.x0[j] + b.upper[j]);
        }
        let reach = results.iter().map(|res| res.delta[j].abs()).fold(0.0, f64::max);
        (r.x0[j] - reach - 1.0, r.x0[j] + reach + 1.0)
    };
    let ri = range_i.map(|v| (v[0], v[1])).unwrap_or_else(|| span(features[0]));
    let rj = range_j.map(|v| (v[0], v[1])).unwrap_or_else(|| span(features[1]));
    let grid = boundary_grid(&r.model, &r.x0, (features[0], features[1]), ri, rj, resolution).map_err(run_err)?;
    let mut bcsv = Csv::new(&[&text(&r.feature_names[features[0]]), &text(&r.feature_names[features[1]]), "score"]);
    for (a, b, s) in &grid {
        bcsv.row(&[num(*a), num(*b), num(*s)]);
    }
    stage.write("boundary.csv", &bcsv.into_bytes())?;
    stage.write_json("meta.json", &meta("compare", cfg, Some(&r), Vec::new()))?;
    stage.commit()?;
    Ok(EXIT_OK)
}

pub fn compare_setup(section: &CompareSection, r: &Resolved, kind: ScenarioKind) -> VariabilitySetup {
    VariabilitySetup {
        eparams: r.eparams.clone(),
        anneal: r.anneal.clone(),
        entropy: r.entropy,
        gradient: gradient_config(section, r, kind),
        surrogate: surrogate_config(section, r),
        epsilon: r.anneal.epsilon,
        reseed_weights: section.reseed_weights && r.weights_seeded,
    }
}

pub fn bench(cfg: &RunConfig, out: &Path) -> Result<i32, CliError> {
    let mut bc: BenchConfig = cfg.bench.clone().unwrap_or_default();
    bc.seed = cfg.seed;
    let mut stage = Stage::new(out)?;
    let report = complexity_bench(&bc).map_err(|e| match e {
        fecf::Error::InvalidInput(m) => CliError::config(m),
        other => run_err(other),
    })?;
    let mut csv = Csv::new(&["method", "axis", "value", "seconds_median", "seconds_mad"]);
    for row in &report.rows {
        csv.row(&[row.method.clone(), row.axis.clone(), row.value.to_string(), num(row.seconds_median), num(row.seconds_mad)]);
    }
    stage.write("bench.csv", &csv.into_bytes())?;
    let mut slopes = Csv::new(&["method", "axis", "slope"]);
    for s in &report.slopes {
        slopes.row(&[s.method.clone(), s.axis.clone(), num(s.slope)]);
    }
    stage.write("slopes.csv", &slopes.into_bytes())?;
    let mut m = meta("bench", cfg, None, vec!["free-energy timings use the Monte Carlo entropy estimator with the curvature guard disabled"]);
    m.config.bench = Some(bc);
    stage.write_json("meta.json", &m)?;
    stage.commit()?;
    Ok(EXIT_OK)
}

pub fn gen_data(cfg: &RunConfig, out: &Path) -> Result<i32, CliError> {
    let section: GenDataSection = cfg.gen_data.clone().unwrap_or_default();
    let data = iot::generate_iot_data(section.n_rows, cfg.seed).map_err(|e| CliError::config(e.to_string()))?;
    let mut stage = Stage::new(out)?;
    let mut bytes = Vec::new();
    data.write_csv(&mut bytes).map_err(run_err)?;
    stage.write("data.csv", &bytes)?;
    let mut m = meta("gen-data", cfg, None, Vec::new());
    m.config.gen_data = Some(section);
    stage.write_json("meta.json", &m)?;
    stage.commit()?;
    Ok(EXIT_OK)
}
