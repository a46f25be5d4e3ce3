//! Monte-Carlo indoor-temperature forecasts from posterior draws.
//!
//! Each rollout picks a posterior draw, starts from the terminal state and
//! steps the state-space model through the future drivers. The forecast
//! mean is the per-step average over rollouts and the band is either the
//! min/max envelope or an equal-tailed quantile band.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::quantile_sorted;
use crate::filtering::kalman_filter;
use crate::linalg::{cholesky, Mat};
use crate::samples::PosteriorSamples;
use crate::thermal::{build_matrices, Exogenous, ModelError, ModelKind, StateSpaceMatrices, ThermalParams, TimeSeriesDataset};

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error("posterior has no draws")]
    EmptySamples,
    #[error("need at least 2 rollouts, got {0}")]
    TooFewDraws(usize),
    #[error("future drivers missing: {0}")]
    MissingExogenous(String),
    #[error("no history to hold the HVAC mode from")]
    EmptyHistory,
    #[error("terminal state: {0}")]
    Terminal(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Distribution of the state at the forecast origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TerminalState {
    Point(Vec<f64>),
    Gaussian { mean: Vec<f64>, cov: Vec<Vec<f64>> },
}

impl TerminalState {
    fn dim(&self) -> usize {
        match self {
            TerminalState::Point(x) => x.len(),
            TerminalState::Gaussian { mean, .. } => mean.len(),
        }
    }
}

/// Filtered state after the last observation under `params`, with the
/// default initial-state prior.
pub fn filtered_terminal(kind: ModelKind, params: &ThermalParams, data: &TimeSeriesDataset) -> Result<TerminalState, ForecastError> {
    let mats = build_matrices(kind, params, data.dt)?;
    let d = mats.state_dim();
    let p0 = Mat::diag(&vec![crate::density::INITIAL_STATE_VARIANCE; d]);
    let run = kalman_filter(&mats, &data.y, &data.exo, &vec![data.y[0]; d], &p0, false)
        .map_err(|e| ForecastError::Terminal(e.to_string()))?;
    Ok(TerminalState::Gaussian {
        mean: run.final_mean,
        cov: (0..d).map(|i| run.final_cov.row(i).to_vec()).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BandMode {
    MinMax,
    /// Equal-tailed `1 - alpha` band.
    Quantile { alpha: f64 },
}

/// Clamp every rollout into `setpoint ± hysteresis`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SetpointClamp {
    pub setpoint: f64,
    pub hysteresis: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastOptions {
    pub process_noise: bool,
    /// Add observation noise so the band describes measured temperatures.
    pub observation_noise: bool,
    pub clamp: Option<SetpointClamp>,
    pub keep_paths: bool,
}

impl Default for ForecastOptions {
    fn default() -> Self {
        ForecastOptions {
            process_noise: true,
            observation_noise: true,
            clamp: None,
            keep_paths: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub mean: Vec<f64>,
    pub low: Vec<f64>,
    pub high: Vec<f64>,
    pub band: BandMode,
    /// Future drivers the rollouts used.
    pub exo: Exogenous,
    pub paths: Option<Vec<Vec<f64>>>,
}

impl ForecastResult {
    pub fn horizon(&self) -> usize {
        self.mean.len()
    }

    /// CSV with columns `step,mean,low,high`; steps count from 1.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), ForecastError> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["step", "mean", "low", "high"])?;
        for k in 0..self.horizon() {
            out.serialize((k + 1, self.mean[k], self.low[k], self.high[k]))?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Repeats the last observed heater flux `k` times.
pub fn hvac_hold(template: &Exogenous, k: usize) -> Result<Vec<f64>, ForecastError> {
    let last = *template.phi_h.last().ok_or(ForecastError::EmptyHistory)?;
    Ok(vec![last; k])
}

/// Future drivers from forecast ambient and solar series with the HVAC held
/// in its last known mode.
pub fn held_exogenous(template: &Exogenous, ta: Vec<f64>, phi_s: Vec<f64>) -> Result<Exogenous, ForecastError> {
    if ta.len() != phi_s.len() {
        return Err(ForecastError::MissingExogenous(format!(
            "{} ambient values but {} solar values",
            ta.len(),
            phi_s.len()
        )));
    }
    let phi_h = hvac_hold(template, ta.len())?;
    Ok(Exogenous::new(ta, phi_h, phi_s)?)
}

fn mean_exact(v: &[f64]) -> f64 {
    // deviations from the first value keep identical inputs exact
    let first = v[0];
    first + v.iter().map(|x| x - first).sum::<f64>() / v.len() as f64
}

fn rollout(
    mats: &StateSpaceMatrices,
    x_t: &[f64],
    exo: &Exogenous,
    options: &ForecastOptions,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let d = mats.state_dim();
    let q_sd: Vec<f64> = (0..d).map(|i| mats.q[(i, i)].max(0.0).sqrt()).collect();
    let r_sd = mats.r_obs.max(0.0).sqrt();
    let mut x = x_t.to_vec();
    let mut path = Vec::with_capacity(exo.len());
    for k in 0..exo.len() {
        x = mats.propagate(&x, exo.at(k));
        if options.process_noise {
            for (xi, sd) in x.iter_mut().zip(&q_sd) {
                let z: f64 = StandardNormal.sample(rng);
                *xi += sd * z;
            }
        }
        let mut y = mats.observe(&x);
        if options.observation_noise {
            let z: f64 = StandardNormal.sample(rng);
            y += r_sd * z;
        }
        if let Some(c) = options.clamp {
            y = y.clamp(c.setpoint - c.hysteresis, c.setpoint + c.hysteresis);
        }
        path.push(y);
    }
    path
}

/// Runs `n_draws` rollouts over the future drivers `exo`.
///
/// Rollout `i` draws its parameters and noise from stream `i` of the seeded
/// generator, so a prefix of rollouts does not depend on `n_draws`. `fixed`
/// supplies parameters absent from the draws (for example noise scales held
/// fixed during the fit).
#[allow(clippy::too_many_arguments)]
pub fn forecast(
    kind: ModelKind,
    samples: &PosteriorSamples,
    fixed: &ThermalParams,
    terminal: &TerminalState,
    exo: &Exogenous,
    dt: f64,
    n_draws: usize,
    band: BandMode,
    seed: u64,
    options: &ForecastOptions,
) -> Result<ForecastResult, ForecastError> {
    let total = samples.total_draws();
    if total == 0 {
        return Err(ForecastError::EmptySamples);
    }
    if n_draws < 2 {
        return Err(ForecastError::TooFewDraws(n_draws));
    }
    if terminal.dim() != kind.state_dim() {
        return Err(ForecastError::Terminal(format!(
            "dimension {} for a {}-state model",
            terminal.dim(),
            kind.state_dim()
        )));
    }
    let chol = match terminal {
        TerminalState::Gaussian { cov, .. } => Some(
            cholesky(&Mat::from_rows(cov.clone()))
                .ok_or_else(|| ForecastError::Terminal("covariance is not positive semi-definite".into()))?,
        ),
        TerminalState::Point(_) => None,
    };
    let k = exo.len();
    let mut paths = Vec::with_capacity(n_draws);
    for i in 0..n_draws {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let idx = rng.random_range(0..total);
        let mut theta = fixed.clone();
        for (name, v) in samples.thermal_params(samples.flat_draw(idx)).values {
            theta.set(name, v);
        }
        let mats = build_matrices(kind, &theta, dt)?;
        let x_t = match (terminal, &chol) {
            (TerminalState::Point(x), _) => x.clone(),
            (TerminalState::Gaussian { mean, .. }, Some(l)) => {
                let z: Vec<f64> = (0..mean.len()).map(|_| StandardNormal.sample(&mut rng)).collect();
                mean.iter().zip(l.matvec(&z)).map(|(m, e)| m + e).collect()
            }
            _ => unreachable!(),
        };
        paths.push(rollout(&mats, &x_t, exo, options, &mut rng));
    }

    let mut mean = Vec::with_capacity(k);
    let mut low = Vec::with_capacity(k);
    let mut high = Vec::with_capacity(k);
    let mut column = vec![0.0; n_draws];
    for step in 0..k {
        for (c, p) in column.iter_mut().zip(&paths) {
            *c = p[step];
        }
        mean.push(mean_exact(&column));
        column.sort_by(f64::total_cmp);
        let (l, h) = match band {
            BandMode::MinMax => (column[0], column[n_draws - 1]),
            BandMode::Quantile { alpha } => (
                quantile_sorted(&column, alpha / 2.0),
                quantile_sorted(&column, 1.0 - alpha / 2.0),
            ),
        };
        low.push(l);
        high.push(h);
    }
    Ok(ForecastResult {
        mean,
        low,
        high,
        band,
        exo: exo.clone(),
        paths: options.keep_paths.then_some(paths),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermal::{simulate, ParamName};

    fn point_samples() -> PosteriorSamples {
        PosteriorSamples::single_draw(&["R_ia", "C_i", "A_w"], &[5.3, 25.0, 7.9])
    }

    fn noiseless() -> ThermalParams {
        ThermalParams::new()
            .with(ParamName::SigmaI, 0.0)
            .with(ParamName::SigmaObs, 0.0)
    }

    fn drivers(k: usize) -> Exogenous {
        let ta = (0..k).map(|i| 5.0 + (i as f64 * 0.3).sin()).collect();
        let phi_h = (0..k).map(|i| if i % 7 < 3 { 4.0 } else { 0.0 }).collect();
        let phi_s = (0..k).map(|i| 0.2 * (i as f64 * 0.1).cos().max(0.0)).collect();
        Exogenous::new(ta, phi_h, phi_s).unwrap()
    }

    #[test]
    fn point_mass_reproduces_deterministic_rollout() {
        let exo = drivers(48);
        let x_t = vec![19.5];
        let res = forecast(
            ModelKind::Ti,
            &point_samples(),
            &noiseless(),
            &TerminalState::Point(x_t.clone()),
            &exo,
            0.5,
            7,
            BandMode::MinMax,
            1,
            &ForecastOptions::default(),
        )
        .unwrap();
        // prepend a dummy first row: simulate starts its output at x0
        let mut padded = Exogenous::constant(1, 0.0, 0.0, 0.0);
        padded.ta.extend(&exo.ta);
        padded.phi_h.extend(&exo.phi_h);
        padded.phi_s.extend(&exo.phi_s);
        let theta = ThermalParams::ti(5.3, 25.0, 7.9).with_noise(ModelKind::Ti, 0.0, 0.0);
        let mats = build_matrices(ModelKind::Ti, &theta, 0.5).unwrap();
        let sim = simulate(&mats, &padded, &x_t, 0, false).unwrap();
        assert_eq!(res.mean, sim.observations[1..].to_vec());
        assert_eq!(res.low, res.mean);
        assert_eq!(res.high, res.mean);
    }

    fn noisy_run(n: usize, seed: u64, band: BandMode) -> ForecastResult {
        let draws = vec![vec![vec![5.0, 24.0, 7.0], vec![5.6, 26.0, 8.5], vec![5.2, 25.0, 8.0]]];
        let samples = PosteriorSamples::new(vec!["R_ia".into(), "C_i".into(), "A_w".into()], draws);
        let fixed = ThermalParams::new()
            .with(ParamName::SigmaI, 0.1)
            .with(ParamName::SigmaObs, 0.05);
        let terminal = TerminalState::Gaussian {
            mean: vec![20.0],
            cov: vec![vec![0.04]],
        };
        let opts = ForecastOptions {
            keep_paths: true,
            ..ForecastOptions::default()
        };
        forecast(ModelKind::Ti, &samples, &fixed, &terminal, &drivers(24), 0.5, n, band, seed, &opts).unwrap()
    }

    #[test]
    fn deterministic_by_seed() {
        let a = noisy_run(50, 3, BandMode::MinMax);
        let b = noisy_run(50, 3, BandMode::MinMax);
        assert_eq!(a, b);
        let c = noisy_run(50, 4, BandMode::MinMax);
        assert_ne!(a.mean, c.mean);
    }

    #[test]
    fn rollout_prefix_independent_of_count() {
        let small = noisy_run(20, 9, BandMode::MinMax);
        let large = noisy_run(80, 9, BandMode::MinMax);
        assert_eq!(small.paths.as_ref().unwrap()[..], large.paths.as_ref().unwrap()[..20]);
    }

    #[test]
    fn minmax_band_grows_with_more_rollouts() {
        let small = noisy_run(20, 9, BandMode::MinMax);
        let large = noisy_run(80, 9, BandMode::MinMax);
        for k in 0..small.horizon() {
            assert!(large.low[k] <= small.low[k]);
            assert!(large.high[k] >= small.high[k]);
        }
    }

    #[test]
    fn quantile_band_inside_minmax_and_brackets_mean() {
        let q = noisy_run(200, 5, BandMode::Quantile { alpha: 0.1 });
        let m = noisy_run(200, 5, BandMode::MinMax);
        for k in 0..q.horizon() {
            assert!(q.low[k] >= m.low[k] && q.high[k] <= m.high[k]);
            assert!(q.low[k] < q.mean[k] && q.mean[k] < q.high[k]);
        }
    }

    #[test]
    fn clamp_bounds_every_path() {
        let draws = vec![vec![vec![5.3, 25.0, 7.9]]];
        let samples = PosteriorSamples::new(vec!["R_ia".into(), "C_i".into(), "A_w".into()], draws);
        let fixed = ThermalParams::new()
            .with(ParamName::SigmaI, 0.5)
            .with(ParamName::SigmaObs, 0.1);
        let opts = ForecastOptions {
            clamp: Some(SetpointClamp { setpoint: 20.0, hysteresis: 0.5 }),
            ..ForecastOptions::default()
        };
        let exo = drivers(30);
        let res = forecast(ModelKind::Ti, &samples, &fixed, &TerminalState::Point(vec![20.0]), &exo, 0.5, 40, BandMode::MinMax, 0, &opts).unwrap();
        assert!(res.low.iter().all(|v| *v >= 19.5));
        assert!(res.high.iter().all(|v| *v <= 20.5));
    }

    #[test]
    fn hvac_hold_repeats_last_mode() {
        let hist = Exogenous::new(vec![1.0, 2.0, 3.0], vec![0.0, 4.0, 2.5], vec![0.0; 3]).unwrap();
        assert_eq!(hvac_hold(&hist, 3).unwrap(), vec![2.5, 2.5, 2.5]);
        assert_eq!(hvac_hold(&hist, 0).unwrap(), Vec::<f64>::new());
        let empty = Exogenous::default();
        assert!(matches!(hvac_hold(&empty, 2), Err(ForecastError::EmptyHistory)));
        let fut = held_exogenous(&hist, vec![4.0, 5.0], vec![0.1, 0.2]).unwrap();
        assert_eq!(fut.phi_h, vec![2.5, 2.5]);
        assert!(held_exogenous(&hist, vec![4.0], vec![]).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        let exo = drivers(5);
        let t = TerminalState::Point(vec![20.0, 19.0]);
        let r = forecast(ModelKind::Ti, &point_samples(), &noiseless(), &t, &exo, 0.5, 5, BandMode::MinMax, 0, &ForecastOptions::default());
        assert!(matches!(r, Err(ForecastError::Terminal(_))));
        let t = TerminalState::Point(vec![20.0]);
        let r = forecast(ModelKind::Ti, &point_samples(), &noiseless(), &t, &exo, 0.5, 1, BandMode::MinMax, 0, &ForecastOptions::default());
        assert!(matches!(r, Err(ForecastError::TooFewDraws(1))));
    }

    #[test]
    fn csv_has_expected_columns() {
        let res = noisy_run(10, 1, BandMode::MinMax);
        let mut buf = Vec::new();
        res.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("step,mean,low,high"));
        assert_eq!(lines.count(), res.horizon());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn three_draws() -> PosteriorSamples {
            let draws = vec![vec![vec![5.0, 24.0, 7.0], vec![5.6, 26.0, 8.5], vec![5.2, 25.0, 8.0]]];
            PosteriorSamples::new(vec!["R_ia".into(), "C_i".into(), "A_w".into()], draws)
        }

        fn quiet() -> ForecastOptions {
            ForecastOptions {
                process_noise: false,
                observation_noise: false,
                ..ForecastOptions::default()
            }
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn minmax_band_nested_in_rollout_count(seed in 0u64..10_000, n in 2usize..30, extra in 1usize..30) {
                let small = noisy_run(n, seed, BandMode::MinMax);
                let large = noisy_run(n + extra, seed, BandMode::MinMax);
                for k in 0..small.horizon() {
                    prop_assert!(large.low[k] <= small.low[k] && large.high[k] >= small.high[k]);
                }
            }

            #[test]
            fn point_mass_without_noise_has_zero_width(seed in 0u64..10_000, n in 2usize..40, alpha in 0.01..0.5f64) {
                let sigma = ThermalParams::new().with(ParamName::SigmaI, 0.3).with(ParamName::SigmaObs, 0.2);
                let res = forecast(
                    ModelKind::Ti, &point_samples(), &sigma, &TerminalState::Point(vec![19.0]), &drivers(12), 0.5,
                    n, BandMode::Quantile { alpha }, seed, &quiet(),
                ).unwrap();
                prop_assert_eq!(&res.low, &res.mean);
                prop_assert_eq!(&res.high, &res.mean);
            }

            #[test]
            fn noiseless_band_spans_parameter_rollouts_only(seed in 0u64..10_000, alpha in 0.01..0.5f64) {
                let exo = drivers(12);
                let terminal = TerminalState::Point(vec![19.0]);
                let samples = three_draws();
                let mut lo = vec![f64::INFINITY; 12];
                let mut hi = vec![f64::NEG_INFINITY; 12];
                for draw in samples.iter_draws() {
                    let one = PosteriorSamples::single_draw(&["R_ia", "C_i", "A_w"], draw);
                    let r = forecast(ModelKind::Ti, &one, &noiseless(), &terminal, &exo, 0.5, 2, BandMode::MinMax, 0, &quiet()).unwrap();
                    for k in 0..12 {
                        lo[k] = lo[k].min(r.mean[k]);
                        hi[k] = hi[k].max(r.mean[k]);
                    }
                }
                let res = forecast(
                    ModelKind::Ti, &samples, &noiseless(), &terminal, &exo, 0.5, 50, BandMode::Quantile { alpha }, seed, &quiet(),
                ).unwrap();
                for k in 0..12 {
                    prop_assert!(res.low[k] >= lo[k] && res.high[k] <= hi[k]);
                }
            }
        }
    }
}
