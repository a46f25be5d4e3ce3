//! The `fit`, `forecast`, `simulate`, `diagnose` and `transfer` workflows.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use super::artifact::{read_metadata, read_prior_file, transferred_priors, write_draws, write_file, write_prior_file, FitArtifact};
use super::config::{BackendKind, RegimeKind, RunConfig};
use super::data::{load_csv, read_drivers, write_dataset, CsvOptions};
use super::IoError;
use crate::advi::{self, AdviError};
use crate::density::{default_layout, DensityError, Formulation, ModelTarget, ParamLayout, PriorRegime, SlotPrior};
use crate::diagnostics::{gelman_rubin, posterior_predictive_check, DiagError, Metrics, ParamSummary, PpcStatistic, SummaryReport};
use crate::filtering::{fit_point, kalman_loglik, one_step_metrics, FilterError, PointMode};
use crate::forecast::{filtered_terminal, forecast, ForecastError, ForecastOptions, TerminalState};
use crate::linalg::Mat;
use crate::nuts::{self, NutsError};
use crate::samples::PosteriorSamples;
use crate::synthetic::generate_synthetic;
use crate::thermal::{build_matrices, Exogenous, ModelError, ModelKind, ParamName, ThermalParams, TimeSeriesDataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Fit,
    Forecast,
    Simulate,
    Diagnose,
    Transfer,
}

/// Failure of a workflow, classified for the process exit code.
#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl RunError {
    /// 1 usage/config, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 1,
            RunError::Data(_) => 2,
            RunError::Numerical(_) => 3,
        }
    }

    fn context(self, what: &str) -> Self {
        match self {
            RunError::Config(m) => RunError::Config(format!("{what}: {m}")),
            RunError::Data(m) => RunError::Data(format!("{what}: {m}")),
            RunError::Numerical(m) => RunError::Numerical(format!("{what}: {m}")),
        }
    }
}

impl From<IoError> for RunError {
    fn from(e: IoError) -> Self {
        match e {
            IoError::Config(_) => RunError::Config(e.to_string()),
            _ => RunError::Data(e.to_string()),
        }
    }
}

impl From<DensityError> for RunError {
    fn from(e: DensityError) -> Self {
        match e {
            DensityError::InvalidPrior(_) | DensityError::MissingPrior(_) | DensityError::IncompatibleData(_) => {
                RunError::Config(e.to_string())
            }
            _ => RunError::Numerical(e.to_string()),
        }
    }
}

impl From<ModelError> for RunError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::InvalidDataset(_) | ModelError::DimensionMismatch(_) => RunError::Data(e.to_string()),
            ModelError::MissingParameter(_) | ModelError::InvalidStep(_) => RunError::Config(e.to_string()),
            _ => RunError::Numerical(e.to_string()),
        }
    }
}

impl From<NutsError> for RunError {
    fn from(e: NutsError) -> Self {
        match e {
            NutsError::InvalidConfig(_) => RunError::Config(e.to_string()),
            _ => RunError::Numerical(e.to_string()),
        }
    }
}

impl From<AdviError> for RunError {
    fn from(e: AdviError) -> Self {
        match e {
            AdviError::InvalidConfig(_) | AdviError::DimensionMismatch(_) => RunError::Config(e.to_string()),
            _ => RunError::Numerical(e.to_string()),
        }
    }
}

impl From<FilterError> for RunError {
    fn from(e: FilterError) -> Self {
        match e {
            FilterError::InvalidInit(_) => RunError::Config(e.to_string()),
            _ => RunError::Numerical(e.to_string()),
        }
    }
}

impl From<DiagError> for RunError {
    fn from(e: DiagError) -> Self {
        RunError::Numerical(e.to_string())
    }
}

impl From<ForecastError> for RunError {
    fn from(e: ForecastError) -> Self {
        match e {
            ForecastError::MissingExogenous(_) | ForecastError::EmptyHistory => RunError::Data(e.to_string()),
            ForecastError::TooFewDraws(_) => RunError::Config(e.to_string()),
            ForecastError::Csv(_) | ForecastError::Io(_) => RunError::Data(e.to_string()),
            _ => RunError::Numerical(e.to_string()),
        }
    }
}

/// What a workflow produced.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub artifact: Option<FitArtifact>,
    pub files: Vec<PathBuf>,
}

fn params_from_map(map: &BTreeMap<String, f64>) -> Result<ThermalParams, RunError> {
    let mut p = ThermalParams::new();
    for (name, v) in map {
        let n: ParamName = name.parse().map_err(RunError::Config)?;
        p.set(n, *v);
    }
    Ok(p)
}

/// Parameter layout for the configured regime, overrides and fixed values.
pub fn build_layout(cfg: &RunConfig, binary_hvac: bool) -> Result<ParamLayout, RunError> {
    cfg.validate()?;
    let regime = match cfg.prior.regime {
        RegimeKind::Uninformed => PriorRegime::Uninformed,
        RegimeKind::Informed => PriorRegime::Informed {
            estimates: params_from_map(&cfg.prior.estimates)?.values,
            sd: cfg.prior.sd,
        },
        RegimeKind::Hyper => {
            let path = cfg.prior.metadata.as_ref().expect("validated");
            PriorRegime::Hyper(read_metadata(path).map_err(|e| RunError::Config(e.to_string()))?)
        }
        RegimeKind::Transferred => {
            let path = cfg.prior.transferred.as_ref().expect("validated");
            PriorRegime::Transferred(read_prior_file(path).map_err(|e| RunError::Config(e.to_string()))?)
        }
    };
    let mut layout = default_layout(cfg.model, &regime, binary_hvac);
    for (name, spec) in &cfg.prior.overrides {
        if layout.slot(name).is_none() {
            return Err(RunError::Config(format!("prior override for `{name}`, which is not inferred")));
        }
        layout = layout.with_prior(name, SlotPrior::Direct(spec.clone()));
    }
    let fixed: Vec<&str> = cfg.fixed.keys().map(String::as_str).collect();
    Ok(layout.without(&fixed))
}

/// Default starting values, overridden by `init` and `fixed`.
pub fn initial_params(kind: ModelKind, binary_hvac: bool, init: &BTreeMap<String, f64>) -> Result<ThermalParams, RunError> {
    let mut p = ThermalParams::new();
    for name in kind.parameter_names() {
        let v = if name.is_resistance() {
            5.0
        } else if *name == ParamName::Ch {
            1.0
        } else if name.is_capacitance() {
            10.0
        } else {
            1.0
        };
        p.set(*name, v);
    }
    if binary_hvac {
        p.set(ParamName::HeaterScale, 1.0);
    }
    for name in kind.process_noise_names() {
        p.set(*name, 0.1);
    }
    p.set(ParamName::SigmaObs, 0.1);
    for (name, v) in &params_from_map(init)?.values {
        p.set(*name, *v);
    }
    Ok(p)
}

fn load_data(cfg: &RunConfig) -> Result<TimeSeriesDataset, RunError> {
    let path = cfg
        .data
        .as_ref()
        .ok_or_else(|| RunError::Config("no data file configured".into()))?;
    let opts = CsvOptions {
        dt_hint: None,
        fahrenheit: cfg.fahrenheit,
        binary_hvac: cfg.binary_hvac,
        take: cfg.take,
    };
    let mut data = load_csv(path, &opts)?;
    if let Some(dt) = cfg.dt {
        data.dt = dt;
    }
    Ok(data)
}

fn is_state(name: &str) -> bool {
    name.starts_with("x[")
}

fn drop_states(samples: &PosteriorSamples) -> PosteriorSamples {
    let keep: Vec<usize> = (0..samples.dim()).filter(|i| !is_state(&samples.names[*i])).collect();
    let mut out = PosteriorSamples::new(
        keep.iter().map(|i| samples.names[*i].clone()).collect(),
        samples
            .draws
            .iter()
            .map(|chain| chain.iter().map(|d| keep.iter().map(|i| d[*i]).collect()).collect())
            .collect(),
    );
    out.stats = samples.stats.clone();
    out
}

/// Gaussian fit to the posterior draws of the final latent state.
fn latent_terminal(samples: &PosteriorSamples, n: usize, d: usize) -> Result<TerminalState, RunError> {
    let cols: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            samples
                .column(&format!("x[{}][{j}]", n - 1))
                .ok_or_else(|| RunError::Numerical("missing final latent state".into()))
        })
        .collect::<Result<_, _>>()?;
    let m = cols[0].len() as f64;
    let mean: Vec<f64> = cols.iter().map(|c| c.iter().sum::<f64>() / m).collect();
    let denom = (m - 1.0).max(1.0);
    let cov = (0..d)
        .map(|a| {
            (0..d)
                .map(|b| {
                    let s: f64 = cols[a].iter().zip(&cols[b]).map(|(x, y)| (x - mean[a]) * (y - mean[b])).sum();
                    s / denom + if a == b { 1e-12 } else { 0.0 }
                })
                .collect()
        })
        .collect();
    Ok(TerminalState::Gaussian { mean, cov })
}

fn point_summary(samples: &PosteriorSamples, kind: ModelKind) -> SummaryReport {
    let at = |v: f64| ParamSummary {
        mean: v,
        sd: 0.0,
        l95: v,
        u95: v,
        rhat: None,
    };
    let draw = samples.flat_draw(0);
    let parameters = samples.names.iter().cloned().zip(draw.iter().map(|v| at(*v))).collect();
    let totals = crate::thermal::composite_rc(kind, samples).ok();
    SummaryReport {
        parameters,
        divergences: 0,
        total_r: totals.as_ref().map(|(r, _)| at(r[0])),
        total_c: totals.as_ref().map(|(_, c)| at(c[0])),
        metrics: Metrics::default(),
    }
}

/// Posterior-mean thermal parameters merged over the fixed values.
pub fn posterior_mean_params(samples: &PosteriorSamples, fixed: &ThermalParams) -> ThermalParams {
    let mut p = fixed.clone();
    for name in &samples.names {
        if let (Ok(n), Some(m)) = (name.parse::<ParamName>(), samples.mean(name)) {
            p.set(n, m);
        }
    }
    p
}

/// Samples with constant columns appended for the fixed parameters.
pub fn with_fixed_columns(samples: &PosteriorSamples, fixed: &ThermalParams) -> PosteriorSamples {
    let extra: Vec<(String, f64)> = fixed
        .values
        .iter()
        .filter(|(n, _)| samples.index_of(n.as_str()).is_none())
        .map(|(n, v)| (n.to_string(), *v))
        .collect();
    let mut names = samples.names.clone();
    names.extend(extra.iter().map(|(n, _)| n.clone()));
    let draws = samples
        .draws
        .iter()
        .map(|chain| {
            chain
                .iter()
                .map(|d| d.iter().copied().chain(extra.iter().map(|(_, v)| *v)).collect())
                .collect()
        })
        .collect();
    let mut out = PosteriorSamples::new(names, draws);
    out.stats = samples.stats.clone();
    out
}

fn one_step_fit_metrics(kind: ModelKind, params: &ThermalParams, data: &TimeSeriesDataset) -> Metrics {
    let attempt = || -> Option<(f64, f64)> {
        let mats = build_matrices(kind, params, data.dt).ok()?;
        let d = mats.state_dim();
        let p0 = Mat::diag(&vec![crate::density::INITIAL_STATE_VARIANCE; d]);
        let (_, preds) = kalman_loglik(&mats, data, &vec![data.y[0]; d], &p0).ok()?;
        one_step_metrics(&preds, &data.y).ok()
    };
    match attempt() {
        Some((rmse, nrmse)) => Metrics {
            rmse: Some(rmse),
            nrmse: Some(nrmse),
            ..Metrics::default()
        },
        None => Metrics::default(),
    }
}

/// Fits `cfg` to an in-memory dataset.
pub fn fit_dataset(cfg: &RunConfig, data: &TimeSeriesDataset) -> Result<FitArtifact, RunError> {
    let start = Instant::now();
    let kind = cfg.model;
    let layout = build_layout(cfg, data.binary_hvac)?;
    let fixed = params_from_map(&cfg.fixed)?;
    let target = ModelTarget::new(kind, layout, data.clone(), cfg.formulation, fixed.clone())?;
    let init = initial_params(kind, data.binary_hvac, &cfg.backend.init)?;
    let mut u0 = target.unconstrain_params(&init)?;
    if cfg.formulation == Formulation::LatentStates {
        for y in &data.y {
            u0.extend(std::iter::repeat_n(*y, kind.state_dim()));
        }
    }

    let mut variational = None;
    let mut point = None;
    let raw = match cfg.backend.kind {
        BackendKind::Nuts => {
            let mut c = cfg.backend.nuts.clone().unwrap_or_default();
            c.seed = cfg.seed;
            c.init.get_or_insert(u0);
            nuts::sample(&target, &c)?
        }
        BackendKind::Advi => {
            let mut c = cfg.backend.advi.clone().unwrap_or_default();
            c.seed = cfg.seed;
            c.init_mean.get_or_insert(u0);
            let q = advi::fit(&target, &c)?;
            if q.diverged {
                return Err(RunError::Numerical("ADVI diverged".into()));
            }
            let draws = advi::draw(&q, cfg.backend.variational_draws, cfg.seed ^ 0xd4a3)?;
            variational = Some(q);
            draws
        }
        BackendKind::Mle | BackendKind::Map => {
            if cfg.formulation == Formulation::LatentStates {
                return Err(RunError::Config("MLE/MAP fits use the marginalized formulation".into()));
            }
            let mode = if cfg.backend.kind == BackendKind::Mle { PointMode::Mle } else { PointMode::Map };
            let est = fit_point(&target, &init, mode, &cfg.backend.optimizer.unwrap_or_default())?;
            let names: Vec<&str> = est.names.iter().map(String::as_str).collect();
            let s = PosteriorSamples::single_draw(&names, &est.theta);
            point = Some(est);
            s
        }
    };

    let terminal_latent = match cfg.formulation {
        Formulation::LatentStates => Some(latent_terminal(&raw, data.len(), kind.state_dim())?),
        Formulation::Marginalized => None,
    };
    let draws = drop_states(&raw);
    let mut summary = if point.is_some() {
        point_summary(&draws, kind)
    } else {
        SummaryReport::from_samples(&draws, Some(kind)).or_else(|_| SummaryReport::from_samples(&draws, None))?
    };
    let mean_params = posterior_mean_params(&draws, &fixed);
    summary.metrics = one_step_fit_metrics(kind, &mean_params, data);
    let terminal = match terminal_latent {
        Some(t) => t,
        None => filtered_terminal(kind, &mean_params, data)?,
    };
    let last = data.len() - 1;
    Ok(FitArtifact {
        version: env!("CARGO_PKG_VERSION").to_string(),
        model: kind,
        backend: cfg.backend.kind,
        summary,
        draws,
        variational,
        point,
        fixed: cfg.fixed.clone(),
        dt: data.dt,
        terminal,
        last_drivers: data.exo.at(last),
        config: cfg.clone(),
        wall_seconds: start.elapsed().as_secs_f64(),
    })
}

fn json<T: Serialize>(value: &T) -> Result<String, RunError> {
    serde_json::to_string_pretty(value).map_err(|e| RunError::Data(e.to_string()))
}

fn artifact_path(p: &Option<PathBuf>, section: &str) -> Result<PathBuf, RunError> {
    p.clone()
        .ok_or_else(|| RunError::Config(format!("{section}.artifact is not set")))
}

fn run_fit(cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    let data = load_data(cfg)?;
    let artifact = fit_dataset(cfg, &data)?;
    let out = &cfg.output;
    let fit_path = out.join("fit.json");
    let draws_path = out.join("draws.csv");
    let summary_path = out.join("summary.json");
    artifact.save(&fit_path)?;
    let mut buf = Vec::new();
    write_draws(&artifact.draws, &mut buf)?;
    write_file(&draws_path, &buf)?;
    write_file(&summary_path, json(&artifact.summary)?.as_bytes())?;
    Ok(RunOutcome {
        artifact: Some(artifact),
        files: vec![fit_path, draws_path, summary_path],
    })
}

/// Future drivers from a CSV, holding the last HVAC mode when the file has
/// no `phi_h` column.
pub fn future_drivers(path: &Path, fahrenheit: bool, last: [f64; 3]) -> Result<Exogenous, RunError> {
    let file = std::fs::File::open(path).map_err(|e| RunError::Data(format!("{}: {e}", path.display())))?;
    let (ta, phi_h, phi_s) = read_drivers(file, fahrenheit)?;
    match phi_h {
        Some(h) => Ok(Exogenous::new(ta, h, phi_s)?),
        None => {
            let template = Exogenous::constant(1, last[0], last[1], last[2]);
            Ok(crate::forecast::held_exogenous(&template, ta, phi_s)?)
        }
    }
}

fn run_forecast(cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    let fc = &cfg.forecast;
    let artifact = FitArtifact::load(&artifact_path(&fc.artifact, "forecast")?)?;
    let drivers = fc
        .drivers
        .as_ref()
        .ok_or_else(|| RunError::Config("forecast.drivers is not set".into()))?;
    let exo = future_drivers(drivers, cfg.fahrenheit, artifact.last_drivers)?;
    let options = ForecastOptions {
        process_noise: fc.process_noise,
        observation_noise: fc.observation_noise,
        clamp: fc.clamp,
        keep_paths: false,
    };
    let result = forecast(
        artifact.model,
        &artifact.draws,
        &artifact.fixed_params(),
        &artifact.terminal,
        &exo,
        artifact.dt,
        fc.n_draws,
        fc.band,
        cfg.seed,
        &options,
    )?;
    let path = cfg.output.join("forecast.csv");
    let mut buf = Vec::new();
    result.write_csv(&mut buf)?;
    write_file(&path, &buf)?;
    Ok(RunOutcome {
        artifact: None,
        files: vec![path],
    })
}

fn run_simulate(cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    let sim = &cfg.simulate;
    let theta = params_from_map(&sim.params)?;
    theta
        .validate(cfg.model)
        .map_err(|e| RunError::Config(format!("simulate.params: {e}")))?;
    let (data, _) = generate_synthetic(cfg.model, &theta, &sim.drivers, sim.steps, sim.dt, cfg.seed, sim.with_noise)?;
    let path = cfg.output.join("simulated.csv");
    let mut buf = Vec::new();
    write_dataset(&data, &mut buf)?;
    write_file(&path, &buf)?;
    Ok(RunOutcome {
        artifact: None,
        files: vec![path],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticReport {
    pub rhat: BTreeMap<String, f64>,
    pub max_rhat: Option<f64>,
    pub divergences: usize,
    /// Bayesian p-values; absent without data.
    pub ppc: Option<BTreeMap<PpcStatistic, f64>>,
}

pub fn diagnose_artifact(
    artifact: &FitArtifact,
    data: Option<&TimeSeriesDataset>,
    replicates: usize,
    seed: u64,
) -> Result<DiagnosticReport, RunError> {
    let mut rhat = BTreeMap::new();
    if artifact.draws.n_chains() >= 2 {
        for name in &artifact.draws.names {
            let chains = artifact.draws.chain_columns(name).expect("own name");
            if let Ok(r) = gelman_rubin(&chains, false) {
                rhat.insert(name.clone(), r);
            }
        }
    }
    let max_rhat = rhat.values().copied().reduce(f64::max);
    let ppc = match data {
        Some(d) => {
            let samples = with_fixed_columns(&artifact.draws, &artifact.fixed_params());
            Some(posterior_predictive_check(artifact.model, &samples, d, &PpcStatistic::ALL, replicates, seed)?)
        }
        None => None,
    };
    Ok(DiagnosticReport {
        rhat,
        max_rhat,
        divergences: artifact.draws.divergence_count(),
        ppc,
    })
}

fn run_diagnose(cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    let artifact = FitArtifact::load(&artifact_path(&cfg.diagnose.artifact, "diagnose")?)?;
    let data = match cfg.data {
        Some(_) => Some(load_data(cfg)?),
        None => None,
    };
    let report = diagnose_artifact(&artifact, data.as_ref(), cfg.diagnose.replicates, cfg.seed)?;
    let path = cfg.output.join("diagnostics.json");
    write_file(&path, json(&report)?.as_bytes())?;
    Ok(RunOutcome {
        artifact: None,
        files: vec![path],
    })
}

fn run_transfer(cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    let t = &cfg.transfer;
    let artifact = FitArtifact::load(&artifact_path(&t.artifact, "transfer")?)?;
    let priors = transferred_priors(&artifact.summary, &t.parameters, t.sd_scale)?;
    let path = cfg.output.join("transferred_priors.toml");
    write_prior_file(&priors, &path)?;
    Ok(RunOutcome {
        artifact: None,
        files: vec![path],
    })
}

/// Runs one workflow. All files are written after computation finishes.
pub fn run(command: Command, cfg: &RunConfig) -> Result<RunOutcome, RunError> {
    cfg.validate().map_err(RunError::from)?;
    let (name, result) = match command {
        Command::Fit => ("fit", run_fit(cfg)),
        Command::Forecast => ("forecast", run_forecast(cfg)),
        Command::Simulate => ("simulate", run_simulate(cfg)),
        Command::Diagnose => ("diagnose", run_diagnose(cfg)),
        Command::Transfer => ("transfer", run_transfer(cfg)),
    };
    result.map_err(|e| e.context(&format!("{name} ({} model)", cfg.model)))
}
