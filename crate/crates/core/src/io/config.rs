//! TOML run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::IoError;
use crate::advi::AdviConfig;
use crate::density::{Formulation, PriorSpec};
use crate::filtering::OptimizerConfig;
use crate::forecast::{BandMode, SetpointClamp};
use crate::nuts::NutsConfig;
use crate::synthetic::DriverSpec;
use crate::thermal::ModelKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegimeKind {
    Informed,
    Hyper,
    #[default]
    Uninformed,
    Transferred,
}

/// Prior choice for the resistances plus per-parameter overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    pub regime: RegimeKind,
    /// Audit estimates for the informed regime, keyed by parameter name.
    pub estimates: BTreeMap<String, f64>,
    /// Standard deviation of the informed priors.
    pub sd: f64,
    /// Mixture side file for the hyper regime.
    pub metadata: Option<PathBuf>,
    /// Prior file written by `transfer`.
    pub transferred: Option<PathBuf>,
    pub overrides: BTreeMap<String, PriorSpec>,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            regime: RegimeKind::Uninformed,
            estimates: BTreeMap::new(),
            sd: 1.0,
            metadata: None,
            transferred: None,
            overrides: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Nuts,
    Advi,
    Mle,
    Map,
}

/// Inference backend with its settings; only the section matching `kind`
/// may be present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    pub nuts: Option<NutsConfig>,
    pub advi: Option<AdviConfig>,
    pub optimizer: Option<OptimizerConfig>,
    /// Draws taken from the fitted variational posterior.
    pub variational_draws: usize,
    /// Starting values by parameter name; unspecified ones use defaults.
    pub init: BTreeMap<String, f64>,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Nuts,
            nuts: None,
            advi: None,
            optimizer: None,
            variational_draws: 1000,
            init: BTreeMap::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastConfig {
    /// Fit artifact supplying the posterior.
    pub artifact: Option<PathBuf>,
    /// Future drivers (`ta`, `phi_s`, optional `phi_h`).
    pub drivers: Option<PathBuf>,
    pub n_draws: usize,
    pub band: BandMode,
    pub clamp: Option<SetpointClamp>,
    pub process_noise: bool,
    pub observation_noise: bool,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig {
            artifact: None,
            drivers: None,
            n_draws: 500,
            band: BandMode::MinMax,
            clamp: None,
            process_noise: true,
            observation_noise: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    /// True parameter values by name.
    pub params: BTreeMap<String, f64>,
    pub steps: usize,
    pub dt: f64,
    pub with_noise: bool,
    pub drivers: DriverSpec,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        SimulateConfig {
            params: BTreeMap::new(),
            steps: 2000,
            dt: 0.5,
            with_noise: true,
            drivers: DriverSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnoseConfig {
    pub artifact: Option<PathBuf>,
    pub replicates: usize,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        DiagnoseConfig {
            artifact: None,
            replicates: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferConfig {
    pub artifact: Option<PathBuf>,
    /// Parameters to carry over; physical parameters and `Phi_h` when empty.
    pub parameters: Vec<String>,
    /// Multiplier on the posterior standard deviations.
    pub sd_scale: f64,
}

impl Default for TransferConfig {
    fn default() -> Self {
        TransferConfig {
            artifact: None,
            parameters: Vec::new(),
            sd_scale: 1.0,
        }
    }
}

fn default_output() -> PathBuf {
    PathBuf::from("rcfit-out")
}

fn default_formulation() -> Formulation {
    Formulation::Marginalized
}

/// One experiment: model, priors, backend, data and outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    #[serde(default)]
    pub seed: u64,
    /// Observed series for `fit` and the history for `forecast`.
    pub data: Option<PathBuf>,
    /// Sampling interval override in hours.
    pub dt: Option<f64>,
    /// Keep only the first rows of the data.
    pub take: Option<usize>,
    #[serde(default)]
    pub fahrenheit: bool,
    #[serde(default)]
    pub binary_hvac: bool,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_formulation")]
    pub formulation: Formulation,
    #[serde(default)]
    pub prior: PriorConfig,
    /// Parameters held fixed rather than inferred.
    #[serde(default)]
    pub fixed: BTreeMap<String, f64>,
    #[serde(default)]
    pub backend: BackendConfig,
    #[serde(default)]
    pub forecast: ForecastConfig,
    #[serde(default)]
    pub simulate: SimulateConfig,
    #[serde(default)]
    pub diagnose: DiagnoseConfig,
    #[serde(default)]
    pub transfer: TransferConfig,
}

impl RunConfig {
    pub fn new(model: ModelKind) -> Self {
        RunConfig {
            model,
            seed: 0,
            data: None,
            dt: None,
            take: None,
            fahrenheit: false,
            binary_hvac: false,
            output: default_output(),
            formulation: default_formulation(),
            prior: PriorConfig::default(),
            fixed: BTreeMap::new(),
            backend: BackendConfig::default(),
            forecast: ForecastConfig::default(),
            simulate: SimulateConfig::default(),
            diagnose: DiagnoseConfig::default(),
            transfer: TransferConfig::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self, IoError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| IoError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path).map_err(|e| IoError::File(path.display().to_string(), e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String, IoError> {
        toml::to_string(self).map_err(|e| IoError::Config(e.to_string()))
    }

    /// Structural checks that need no file access.
    pub fn validate(&self) -> Result<(), IoError> {
        let cfg = |m: String| Err(IoError::Config(m));
        let b = &self.backend;
        let wrong = match b.kind {
            BackendKind::Nuts => b.advi.is_some() || b.optimizer.is_some(),
            BackendKind::Advi => b.nuts.is_some() || b.optimizer.is_some(),
            BackendKind::Mle | BackendKind::Map => b.nuts.is_some() || b.advi.is_some(),
        };
        if wrong {
            return cfg(format!("backend settings do not match backend {:?}", b.kind));
        }
        if self.output.as_os_str().is_empty() {
            return cfg("output path is empty".into());
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return cfg(format!("dt must be positive, got {dt}"));
            }
        }
        match self.prior.regime {
            RegimeKind::Hyper if self.prior.metadata.is_none() => {
                return cfg("prior regime `hyper` needs a metadata file (prior.metadata)".into());
            }
            RegimeKind::Transferred if self.prior.transferred.is_none() => {
                return cfg("prior regime `transferred` needs a prior file (prior.transferred)".into());
            }
            RegimeKind::Informed if self.prior.estimates.is_empty() => {
                return cfg("prior regime `informed` needs prior.estimates".into());
            }
            _ => {}
        }
        if !(self.prior.sd > 0.0) {
            return cfg("prior.sd must be positive".into());
        }
        for (name, spec) in &self.prior.overrides {
            spec.validate().map_err(|e| IoError::Config(format!("prior override {name}: {e}")))?;
        }
        for name in self.prior.estimates.keys().chain(self.fixed.keys()).chain(self.backend.init.keys()) {
            if name.parse::<crate::thermal::ParamName>().is_err() && !name.starts_with("mu_") {
                return cfg(format!("unknown parameter `{name}`"));
            }
        }
        if self.forecast.n_draws < 2 {
            return cfg("forecast.n_draws must be at least 2".into());
        }
        if let BandMode::Quantile { alpha } = self.forecast.band {
            if !(alpha > 0.0 && alpha < 1.0) {
                return cfg(format!("band alpha must lie in (0, 1), got {alpha}"));
            }
        }
        if !(self.transfer.sd_scale > 0.0) {
            return cfg("transfer.sd_scale must be positive".into());
        }
        Ok(())
    }
}
