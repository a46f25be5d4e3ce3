//! Convergence diagnostics, interval summaries, posterior predictive checks
//! and forecast error metrics.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::INITIAL_STATE_VARIANCE;
use crate::filtering::kalman_filter;
use crate::linalg::{cholesky, Mat};
use crate::samples::PosteriorSamples;
use crate::thermal::{
    build_matrices, composite_rc, simulate, Exogenous, ModelError, ModelKind, StateSpaceMatrices, TimeSeriesDataset,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagError {
    #[error("every chain is constant; R-hat undefined")]
    ZeroWithinVariance,
    #[error("need {0}")]
    TooFewSamples(&'static str),
    #[error("observation {index} is zero; MAPE undefined")]
    ZeroObservation { index: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn sample_var(x: &[f64]) -> f64 {
    let m = mean(x);
    x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64
}

/// Potential scale reduction factor.
///
/// With `split`, each chain is halved first (an odd trailing draw is
/// dropped), which also catches within-chain drift.
pub fn gelman_rubin(chains: &[Vec<f64>], split: bool) -> Result<f64, DiagError> {
    let owned: Vec<&[f64]> = if split {
        chains
            .iter()
            .flat_map(|c| {
                let h = c.len() / 2;
                [&c[..h], &c[h..2 * h]]
            })
            .collect()
    } else {
        chains.iter().map(Vec::as_slice).collect()
    };
    if owned.len() < 2 {
        return Err(DiagError::TooFewSamples("at least 2 chains"));
    }
    let n = owned[0].len();
    if n < 2 {
        return Err(DiagError::TooFewSamples("at least 2 draws per chain"));
    }
    if let Some(c) = owned.iter().find(|c| c.len() != n) {
        return Err(DiagError::LengthMismatch(n, c.len()));
    }
    let nf = n as f64;
    let means: Vec<f64> = owned.iter().map(|c| mean(c)).collect();
    let w = owned.iter().map(|c| sample_var(c)).sum::<f64>() / owned.len() as f64;
    if w <= 0.0 {
        return Err(DiagError::ZeroWithinVariance);
    }
    let b = nf * sample_var(&means);
    Ok((((nf - 1.0) / nf * w + b / nf) / w).sqrt())
}

/// Linear-interpolation quantile of sorted data (type 7).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Equal-tailed `1 - alpha` interval.
pub fn credible_interval(samples: &[f64], alpha: f64) -> Result<(f64, f64), DiagError> {
    if samples.len() < 2 {
        return Err(DiagError::TooFewSamples("at least 2 samples"));
    }
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    Ok((quantile_sorted(&s, alpha / 2.0), quantile_sorted(&s, 1.0 - alpha / 2.0)))
}

/// Mean absolute percentage error as a fraction.
pub fn mape(y: &[f64], y_hat: &[f64]) -> Result<f64, DiagError> {
    if y.len() != y_hat.len() {
        return Err(DiagError::LengthMismatch(y.len(), y_hat.len()));
    }
    if let Some(index) = y.iter().position(|v| *v == 0.0) {
        return Err(DiagError::ZeroObservation { index });
    }
    Ok(y.iter().zip(y_hat).map(|(a, b)| ((a - b) / a).abs()).sum::<f64>() / y.len() as f64)
}

/// Percentage of observations inside `[low, high]`.
pub fn interval_coverage(y: &[f64], low: &[f64], high: &[f64]) -> Result<f64, DiagError> {
    if y.len() != low.len() || y.len() != high.len() {
        return Err(DiagError::LengthMismatch(y.len(), low.len().min(high.len())));
    }
    let inside = y
        .iter()
        .zip(low.iter().zip(high))
        .filter(|(v, (l, h))| **l <= **v && **v <= **h)
        .count();
    Ok(100.0 * inside as f64 / y.len() as f64)
}

fn ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|a, b| x[*a].total_cmp(&x[*b]));
    let mut r = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let avg = 0.5 * (i + j) as f64 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

/// Spearman rank correlation (ties get average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    let (rx, ry) = (ranks(x), ranks(y));
    let (mx, my) = (mean(&rx), mean(&ry));
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PpcStatistic {
    Mean,
    StdDev,
    Lag1Autocorr,
}

impl PpcStatistic {
    pub const ALL: [PpcStatistic; 3] = [PpcStatistic::Mean, PpcStatistic::StdDev, PpcStatistic::Lag1Autocorr];

    pub fn compute(self, y: &[f64]) -> f64 {
        let m = mean(y);
        match self {
            PpcStatistic::Mean => m,
            PpcStatistic::StdDev => sample_var(y).sqrt(),
            PpcStatistic::Lag1Autocorr => {
                let den: f64 = y.iter().map(|v| (v - m).powi(2)).sum();
                let num: f64 = y.windows(2).map(|w| (w[0] - m) * (w[1] - m)).sum();
                num / den
            }
        }
    }
}

fn initial_state_draw(
    mats: &StateSpaceMatrices,
    data: &TimeSeriesDataset,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>, DiagError> {
    let d = mats.state_dim();
    let p0 = Mat::diag(&vec![INITIAL_STATE_VARIANCE; d]);
    let [ta, ph, ps] = data.exo.at(0);
    let run = kalman_filter(mats, &data.y[..1], &Exogenous::constant(1, ta, ph, ps), &vec![data.y[0]; d], &p0, false)
        .map_err(|e| DiagError::Numerical(e.to_string()))?;
    let l = cholesky(&run.final_cov).ok_or_else(|| DiagError::Numerical("initial covariance not PSD".into()))?;
    let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut *rng)).collect();
    Ok(run.final_mean.iter().zip(l.matvec(&z)).map(|(m, e)| m + e).collect())
}

/// Bayesian p-values: the share of replicated datasets whose statistic is
/// at least the observed one.
///
/// Each replicate takes a uniformly chosen posterior draw, starts from the
/// filtered state distribution after the first observation (prior
/// `N(y_0, 25)` per state) and simulates with process and observation noise
/// over the observed drivers.
pub fn posterior_predictive_check(
    kind: ModelKind,
    samples: &PosteriorSamples,
    data: &TimeSeriesDataset,
    statistics: &[PpcStatistic],
    n_rep: usize,
    seed: u64,
) -> Result<BTreeMap<PpcStatistic, f64>, DiagError> {
    if n_rep < 100 {
        return Err(DiagError::TooFewSamples("at least 100 replicates"));
    }
    let total = samples.total_draws();
    if total == 0 {
        return Err(DiagError::TooFewSamples("a nonempty posterior"));
    }
    let observed: Vec<f64> = statistics.iter().map(|s| s.compute(&data.y)).collect();
    let mut exceed = vec![0usize; statistics.len()];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..n_rep {
        let k = rng.random_range(0..total);
        let theta = samples.thermal_params(samples.flat_draw(k));
        let mats = build_matrices(kind, &theta, data.dt)?;
        let x0 = initial_state_draw(&mats, data, &mut rng)?;
        let sim = simulate(&mats, &data.exo, &x0, rng.random(), true)?;
        for (i, s) in statistics.iter().enumerate() {
            if s.compute(&sim.observations) >= observed[i] {
                exceed[i] += 1;
            }
        }
    }
    Ok(statistics
        .iter()
        .zip(exceed)
        .map(|(s, e)| (*s, e as f64 / n_rep as f64))
        .collect())
}

/// Posterior summary of one quantity. `sd` is a standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamSummary {
    pub mean: f64,
    pub sd: f64,
    pub l95: f64,
    pub u95: f64,
    pub rhat: Option<f64>,
}

impl ParamSummary {
    pub fn from_chains(chains: &[Vec<f64>]) -> Result<Self, DiagError> {
        let all: Vec<f64> = chains.iter().flatten().copied().collect();
        let (l95, u95) = credible_interval(&all, 0.05)?;
        let rhat = if chains.len() >= 2 {
            gelman_rubin(chains, false).ok()
        } else {
            None
        };
        Ok(ParamSummary {
            mean: mean(&all),
            sd: sample_var(&all).sqrt(),
            l95,
            u95,
            rhat,
        })
    }

    pub fn width(&self) -> f64 {
        self.u95 - self.l95
    }
}

/// Fit quality numbers attached to a report.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub rmse: Option<f64>,
    /// Percent of the observed range.
    pub nrmse: Option<f64>,
    /// Fraction.
    pub mape: Option<f64>,
    /// Percent of observations inside the band.
    pub coverage: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryReport {
    pub parameters: BTreeMap<String, ParamSummary>,
    pub divergences: usize,
    pub total_r: Option<ParamSummary>,
    pub total_c: Option<ParamSummary>,
    #[serde(default)]
    pub metrics: Metrics,
}

impl SummaryReport {
    /// Summarizes every non-state coordinate, plus composite totals when
    /// `kind` is given.
    pub fn from_samples(samples: &PosteriorSamples, kind: Option<ModelKind>) -> Result<Self, DiagError> {
        let mut parameters = BTreeMap::new();
        for name in samples.names.iter().filter(|n| !n.starts_with("x[")) {
            let chains = samples.chain_columns(name).expect("name from samples");
            parameters.insert(name.clone(), ParamSummary::from_chains(&chains)?);
        }
        let (mut total_r, mut total_c) = (None, None);
        if let Some(kind) = kind {
            let (r, c) = composite_rc(kind, samples)?;
            // split the flat draws back into chains for R-hat
            let split = |v: Vec<f64>| -> Vec<Vec<f64>> {
                let mut out = Vec::new();
                let mut it = v.into_iter();
                for chain in &samples.draws {
                    out.push(it.by_ref().take(chain.len()).collect());
                }
                out
            };
            total_r = Some(ParamSummary::from_chains(&split(r))?);
            total_c = Some(ParamSummary::from_chains(&split(c))?);
        }
        Ok(SummaryReport {
            parameters,
            divergences: samples.divergence_count(),
            total_r,
            total_c,
            metrics: Metrics::default(),
        })
    }

    pub fn get(&self, name: &str) -> Option<&ParamSummary> {
        self.parameters.get(name)
    }
}
