//! Fit artifacts, draw tables and prior side files.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::{BackendKind, RunConfig};
use super::IoError;
use crate::advi::VariationalPosterior;
use crate::density::{MixtureMetadata, TransferredPrior};
use crate::diagnostics::SummaryReport;
use crate::filtering::PointEstimate;
use crate::forecast::TerminalState;
use crate::samples::PosteriorSamples;
use crate::thermal::{ModelKind, ParamName, ThermalParams};

/// Everything a fit produced, enough to forecast, diagnose or seed a
/// transferred prior later.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitArtifact {
    pub version: String,
    pub model: ModelKind,
    pub backend: BackendKind,
    pub summary: SummaryReport,
    /// Posterior draws of the parameters (latent states dropped). Point
    /// fits store a single draw.
    pub draws: PosteriorSamples,
    pub variational: Option<VariationalPosterior>,
    pub point: Option<PointEstimate>,
    /// Parameters held fixed during the fit.
    pub fixed: BTreeMap<String, f64>,
    pub dt: f64,
    /// State distribution after the last observation.
    pub terminal: TerminalState,
    /// Drivers `[Ta, Φ_h, Φ_s]` at the last observation.
    pub last_drivers: [f64; 3],
    pub config: RunConfig,
    pub wall_seconds: f64,
}

impl FitArtifact {
    pub fn fixed_params(&self) -> ThermalParams {
        let mut p = ThermalParams::new();
        for (name, v) in &self.fixed {
            if let Ok(n) = name.parse::<ParamName>() {
                p.set(n, *v);
            }
        }
        p
    }

    pub fn to_json(&self) -> Result<String, IoError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self, IoError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), IoError> {
        write_file(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self, IoError> {
        let text = std::fs::read_to_string(path).map_err(|e| IoError::File(path.display().to_string(), e))?;
        Self::from_json(&text)
    }
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| IoError::File(dir.display().to_string(), e))?;
    }
    std::fs::write(path, bytes).map_err(|e| IoError::File(path.display().to_string(), e))
}

/// Draw table with columns `chain,draw,<parameters>`. Values use the
/// shortest round-tripping decimal form, so equal draws give equal bytes.
pub fn write_draws<W: Write>(samples: &PosteriorSamples, w: W) -> Result<(), IoError> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["chain".to_string(), "draw".to_string()];
    header.extend(samples.names.iter().cloned());
    out.write_record(&header)?;
    for (c, chain) in samples.draws.iter().enumerate() {
        for (d, draw) in chain.iter().enumerate() {
            let mut rec = vec![c.to_string(), d.to_string()];
            rec.extend(draw.iter().map(|v| v.to_string()));
            out.write_record(&rec)?;
        }
    }
    out.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Normal priors centered at posterior means with the posterior standard
/// deviation times `sd_scale`. An empty `parameters` list selects every
/// physical parameter and `Phi_h`.
pub fn transferred_priors(
    summary: &SummaryReport,
    parameters: &[String],
    sd_scale: f64,
) -> Result<BTreeMap<String, TransferredPrior>, IoError> {
    let selected: Vec<String> = if parameters.is_empty() {
        summary
            .parameters
            .keys()
            .filter(|n| n.parse::<ParamName>().map(|p| !p.is_noise()).unwrap_or(false))
            .cloned()
            .collect()
    } else {
        parameters.to_vec()
    };
    selected
        .into_iter()
        .map(|name| {
            let s = summary
                .get(&name)
                .ok_or_else(|| IoError::Config(format!("artifact has no summary for `{name}`")))?;
            if !(s.sd > 0.0) {
                return Err(IoError::Config(format!(
                    "`{name}` has zero posterior spread; point fits cannot seed a transferred prior"
                )));
            }
            Ok((name, TransferredPrior { mean: s.mean, sd: s.sd * sd_scale }))
        })
        .collect()
}

pub fn write_prior_file(priors: &BTreeMap<String, TransferredPrior>, path: &Path) -> Result<(), IoError> {
    let text = toml::to_string(priors).map_err(|e| IoError::Config(e.to_string()))?;
    write_file(path, text.as_bytes())
}

pub fn read_prior_file(path: &Path) -> Result<BTreeMap<String, TransferredPrior>, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::File(path.display().to_string(), e))?;
    let priors: BTreeMap<String, TransferredPrior> =
        toml::from_str(&text).map_err(|e| IoError::Config(format!("{}: {e}", path.display())))?;
    for (name, p) in &priors {
        if !(p.sd > 0.0 && p.mean.is_finite()) {
            return Err(IoError::Config(format!("{}: bad prior for `{name}`", path.display())));
        }
    }
    Ok(priors)
}

/// Mixture side file: TOML with `weights`, `mu` and `sigma` arrays.
pub fn read_metadata(path: &Path) -> Result<MixtureMetadata, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::File(path.display().to_string(), e))?;
    let meta: MixtureMetadata = toml::from_str(&text).map_err(|e| IoError::Config(format!("{}: {e}", path.display())))?;
    meta.prior()
        .validate()
        .map_err(|e| IoError::Config(format!("{}: {e}", path.display())))?;
    Ok(meta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::ParamSummary;

    fn summary() -> SummaryReport {
        let s = |mean, sd| ParamSummary {
            mean,
            sd,
            l95: mean - 2.0 * sd,
            u95: mean + 2.0 * sd,
            rhat: Some(1.001),
        };
        SummaryReport {
            parameters: [
                ("R_ia".to_string(), s(5.3, 0.2)),
                ("C_i".to_string(), s(25.0, 1.5)),
                ("sigma_i".to_string(), s(0.05, 0.01)),
            ]
            .into_iter()
            .collect(),
            divergences: 0,
            total_r: None,
            total_c: None,
            metrics: Default::default(),
        }
    }

    #[test]
    fn transfer_skips_noise_by_default() {
        let p = transferred_priors(&summary(), &[], 2.0).unwrap();
        assert_eq!(p.keys().collect::<Vec<_>>(), vec!["C_i", "R_ia"]);
        assert_eq!(p["R_ia"], TransferredPrior { mean: 5.3, sd: 0.4 });
        assert!(transferred_priors(&summary(), &["A_w".into()], 1.0).is_err());
    }

    #[test]
    fn prior_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("priors.toml");
        let p = transferred_priors(&summary(), &[], 1.0).unwrap();
        write_prior_file(&p, &path).unwrap();
        assert_eq!(read_prior_file(&path).unwrap(), p);
    }

    #[test]
    fn shipped_metadata_matches_default() {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/hyperprior.toml");
        assert_eq!(read_metadata(&path).unwrap(), MixtureMetadata::default());
    }

    #[test]
    fn draws_csv_layout() {
        let s = PosteriorSamples::new(
            vec!["R_ia".into(), "C_i".into()],
            vec![vec![vec![5.25, 25.0]], vec![vec![0.1, 1e-7]]],
        );
        let mut buf = Vec::new();
        write_draws(&s, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "chain,draw,R_ia,C_i\n0,0,5.25,25\n1,0,0.1,0.0000001\n"
        );
    }
}
