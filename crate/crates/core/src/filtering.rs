//! Discrete Kalman filter, one-step-ahead metrics and MLE/MAP point estimates.
//!
//! The in-scope thermal models are linear in their states once discretized,
//! so the plain Kalman recursion gives the exact marginal likelihood. The
//! filter is generic over [`Scalar`] so the same code path yields gradients
//! when run on the autodiff tape.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::Scalar;
use crate::density::{DensityError, LogDensity, ModelTarget, TargetMode};
use crate::linalg::Mat;
use crate::thermal::{Exogenous, StateSpaceMatrices, ThermalParams, TimeSeriesDataset};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FilterError {
    #[error("innovation variance {value} is not positive at step {step}")]
    SingularInnovation { step: usize, value: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("series have zero range, NRMSE undefined")]
    ZeroRange,
    #[error("initial point is not admissible: {0}")]
    InvalidInit(String),
    #[error(transparent)]
    Density(#[from] DensityError),
}

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// One-step-ahead predictive distribution of an observation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mean: f64,
    pub variance: f64,
}

/// Filtered moments after assimilating one observation.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterState {
    pub mean: Vec<f64>,
    pub cov: Mat<f64>,
    pub prediction: Prediction,
    pub loglik: f64,
}

#[derive(Debug, Clone)]
pub struct KalmanRun<T = f64> {
    pub loglik: T,
    pub predictions: Vec<Prediction>,
    pub final_mean: Vec<f64>,
    pub final_cov: Mat<f64>,
    /// Filtered states per step, populated when requested.
    pub states: Vec<FilterState>,
}

const MAX_STATES: usize = 3;

fn cov_values<T: Scalar>(p: &[[T; MAX_STATES]; MAX_STATES], d: usize) -> Mat<f64> {
    Mat::from_rows((0..d).map(|i| (0..d).map(|j| p[i][j].value()).collect()).collect())
}

/// Runs the predict/update recursion over `y`.
///
/// Step 0 only assimilates `y[0]` against the prior `(m0, p0)`; later steps
/// predict with `x_n = A x_{n-1} + B u_n` first. Covariance updates use the
/// Joseph form and are symmetrized every step.
pub fn kalman_filter<T: Scalar>(
    mats: &StateSpaceMatrices<T>,
    y: &[f64],
    exo: &Exogenous,
    m0: &[f64],
    p0: &Mat<f64>,
    keep_states: bool,
) -> Result<KalmanRun<T>, FilterError> {
    let d = mats.state_dim();
    if m0.len() != d || p0.rows != d || p0.cols != d {
        return Err(FilterError::DimensionMismatch(format!(
            "initial state must have dimension {d}"
        )));
    }
    if exo.len() != y.len() {
        return Err(FilterError::DimensionMismatch(format!(
            "{} observations but {} input rows",
            y.len(),
            exo.len()
        )));
    }
    assert!(d <= MAX_STATES, "at most {MAX_STATES} states");
    let c = &mats.c_obs;
    let a = |i: usize, j: usize| mats.a[(i, j)];
    let mut m = [T::zero(); MAX_STATES];
    let mut p = [[T::zero(); MAX_STATES]; MAX_STATES];
    for i in 0..d {
        m[i] = T::constant(m0[i]);
        for j in 0..d {
            p[i][j] = T::constant(p0[(i, j)]);
        }
    }
    let mut loglik = T::zero();
    let mut predictions = Vec::with_capacity(y.len());
    let mut states = Vec::new();
    let mut tmp = [[T::zero(); MAX_STATES]; MAX_STATES];

    for (n, &yn) in y.iter().enumerate() {
        if n > 0 {
            let u = exo.at(n);
            let mut next = [T::zero(); MAX_STATES];
            for i in 0..d {
                let mut acc = a(i, 0) * m[0];
                for k in 1..d {
                    acc += a(i, k) * m[k];
                }
                for (j, uj) in u.iter().enumerate() {
                    if *uj != 0.0 {
                        acc += mats.b[(i, j)] * *uj;
                    }
                }
                next[i] = acc;
            }
            m = next;
            // A P Aᵀ + Q
            for i in 0..d {
                for j in 0..d {
                    let mut acc = a(i, 0) * p[0][j];
                    for k in 1..d {
                        acc += a(i, k) * p[k][j];
                    }
                    tmp[i][j] = acc;
                }
            }
            for i in 0..d {
                for j in 0..d {
                    let mut acc = tmp[i][0] * a(j, 0);
                    for k in 1..d {
                        acc += tmp[i][k] * a(j, k);
                    }
                    p[i][j] = acc + mats.q[(i, j)];
                }
            }
        }
        let observe = |v: &[T]| {
            let mut acc: Option<T> = None;
            for (ci, vi) in c.iter().zip(v) {
                if *ci != 0.0 {
                    let term = *vi * *ci;
                    acc = Some(acc.map_or(term, |a| a + term));
                }
            }
            acc.unwrap_or_else(T::zero)
        };
        // P cᵀ
        let mut pc = [T::zero(); MAX_STATES];
        for i in 0..d {
            pc[i] = observe(&p[i][..d]);
        }
        let y_hat = observe(&m[..d]);
        let s = observe(&pc[..d]) + mats.r_obs;
        if !(s.value() > 0.0) || !s.value().is_finite() {
            return Err(FilterError::SingularInnovation {
                step: n,
                value: s.value(),
            });
        }
        let v = -y_hat + yn;
        let step_ll = (s.ln() + v.square() / s + LN_2PI) * -0.5;
        loglik += step_ll;
        predictions.push(Prediction {
            mean: y_hat.value(),
            variance: s.value(),
        });

        let mut k = [T::zero(); MAX_STATES];
        for i in 0..d {
            k[i] = pc[i] / s;
            m[i] += k[i] * v;
        }
        // Joseph form: (I - K c) P (I - K c)ᵀ + K r Kᵀ
        let mut ikc = [[T::zero(); MAX_STATES]; MAX_STATES];
        for i in 0..d {
            ikc[i][i] = T::constant(1.0);
            for (j, cj) in c.iter().enumerate() {
                if *cj != 0.0 {
                    ikc[i][j] -= k[i] * *cj;
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                let mut acc = ikc[i][0] * p[0][j];
                for l in 1..d {
                    acc += ikc[i][l] * p[l][j];
                }
                tmp[i][j] = acc;
            }
        }
        for i in 0..d {
            for j in 0..d {
                let mut acc = tmp[i][0] * ikc[j][0];
                for l in 1..d {
                    acc += tmp[i][l] * ikc[j][l];
                }
                p[i][j] = acc + k[i] * k[j] * mats.r_obs;
            }
        }
        for i in 0..d {
            for j in (i + 1)..d {
                let avg = (p[i][j] + p[j][i]) * 0.5;
                p[i][j] = avg;
                p[j][i] = avg;
            }
        }

        if keep_states {
            states.push(FilterState {
                mean: m[..d].iter().map(Scalar::value).collect(),
                cov: cov_values(&p, d),
                prediction: *predictions.last().unwrap(),
                loglik: step_ll.value(),
            });
        }
    }

    Ok(KalmanRun {
        loglik,
        predictions,
        final_mean: m[..d].iter().map(Scalar::value).collect(),
        final_cov: cov_values(&p, d),
        states,
    })
}

/// Marginal log-likelihood of `data` and the one-step-ahead predictions.
pub fn kalman_loglik(
    mats: &StateSpaceMatrices<f64>,
    data: &TimeSeriesDataset,
    m0: &[f64],
    p0: &Mat<f64>,
) -> Result<(f64, Vec<Prediction>), FilterError> {
    let run = kalman_filter(mats, &data.y, &data.exo, m0, p0, false)?;
    Ok((run.loglik, run.predictions))
}

/// One-step-ahead RMSE and NRMSE (percent of the observed range).
pub fn one_step_metrics(predictions: &[Prediction], y: &[f64]) -> Result<(f64, f64), FilterError> {
    if predictions.len() != y.len() || y.is_empty() {
        return Err(FilterError::DimensionMismatch(format!(
            "{} predictions for {} observations",
            predictions.len(),
            y.len()
        )));
    }
    let mse = predictions
        .iter()
        .zip(y)
        .map(|(p, yi)| (yi - p.mean).powi(2))
        .sum::<f64>()
        / y.len() as f64;
    let rmse = mse.sqrt();
    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(*v), hi.max(*v)));
    if hi - lo <= 0.0 {
        return Err(FilterError::ZeroRange);
    }
    Ok((rmse, 100.0 * rmse / (hi - lo)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PointMode {
    Mle,
    Map,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iterations: 500,
            gradient_tolerance: 1e-6,
        }
    }
}

/// Result of an MLE or MAP fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointEstimate {
    pub names: Vec<String>,
    /// Estimate in constrained space.
    pub theta: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
}

impl PointEstimate {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.theta[i])
    }

    pub fn thermal_params(&self) -> ThermalParams {
        let mut p = ThermalParams::new();
        for (n, v) in self.names.iter().zip(&self.theta) {
            if let Ok(pn) = n.parse() {
                p.set(pn, *v);
            }
        }
        p
    }
}

/// Maximizes the Kalman likelihood (MLE) or likelihood plus log-prior (MAP).
///
/// `target` supplies the parameter layout, transforms, priors and data; its
/// mode is overridden according to `mode`. `init` must name every layout
/// parameter. The search runs in unconstrained coordinates with BFGS and a
/// backtracking Armijo line search, stopping at gradient norm below the
/// tolerance or the iteration cap.
pub fn fit_point(
    target: &ModelTarget,
    init: &ThermalParams,
    mode: PointMode,
    config: &OptimizerConfig,
) -> Result<PointEstimate, FilterError> {
    let target = target.clone().with_mode(match mode {
        PointMode::Mle => TargetMode::Likelihood,
        PointMode::Map => TargetMode::PenalizedLikelihood,
    });
    let u0 = target
        .unconstrain_params(init)
        .map_err(|e| FilterError::InvalidInit(e.to_string()))?;
    let n = u0.len();

    // minimize phi = -objective
    let eval = |u: &[f64]| -> Result<(f64, Vec<f64>), DensityError> {
        let g = target.log_density_grad(u)?;
        Ok((-g.value, g.gradient.iter().map(|v| -v).collect()))
    };
    let (mut phi, mut g) = eval(&u0).map_err(|e| FilterError::InvalidInit(e.to_string()))?;
    let mut u = u0;
    let mut h_inv = Mat::<f64>::identity(n);
    let mut iterations = 0;
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let mut converged = norm(&g) < config.gradient_tolerance;
    let mut fresh_metric = true;

    while !converged && iterations < config.max_iterations {
        iterations += 1;
        let mut dir: Vec<f64> = h_inv.matvec(&g).iter().map(|v| -v).collect();
        let mut slope: f64 = dir.iter().zip(&g).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            h_inv = Mat::identity(n);
            dir = g.iter().map(|v| -v).collect();
            slope = -norm(&g).powi(2);
        }
        let dnorm = norm(&dir);
        let mut t = if dnorm > 1.0 { 1.0 / dnorm } else { 1.0 };
        if iterations > 1 {
            t = 1.0_f64.min(if dnorm > 10.0 { 10.0 / dnorm } else { 1.0 });
        }
        // below this the objective is dominated by rounding; accept steps
        // that reduce the directional derivative instead
        let noise = 1e-12 * phi.abs().max(1.0);
        let mut accepted = None;
        for _ in 0..40 {
            let trial: Vec<f64> = u.iter().zip(&dir).map(|(a, b)| a + t * b).collect();
            if let Ok((phi_t, g_t)) = eval(&trial) {
                let armijo = phi_t <= phi + 1e-4 * t * slope;
                let flat = phi_t <= phi + noise && {
                    let d_t: f64 = g_t.iter().zip(&dir).map(|(a, b)| a * b).sum();
                    d_t.abs() < 0.9 * slope.abs()
                };
                if phi_t.is_finite() && (armijo || flat) {
                    accepted = Some((trial, phi_t, g_t));
                    break;
                }
            }
            t *= 0.5;
        }
        let Some((u_new, phi_new, g_new)) = accepted else {
            if fresh_metric {
                break;
            }
            h_inv = Mat::identity(n);
            fresh_metric = true;
            continue;
        };
        fresh_metric = false;
        let s: Vec<f64> = u_new.iter().zip(&u).map(|(a, b)| a - b).collect();
        let yv: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy: f64 = s.iter().zip(&yv).map(|(a, b)| a * b).sum();
        if sy > 1e-12 {
            if iterations == 1 {
                let yy: f64 = yv.iter().map(|v| v * v).sum();
                h_inv = Mat::identity(n);
                for i in 0..n {
                    h_inv[(i, i)] = sy / yy;
                }
            }
            let rho = 1.0 / sy;
            let hy = h_inv.matvec(&yv);
            let yhy: f64 = yv.iter().zip(&hy).map(|(a, b)| a * b).sum();
            for i in 0..n {
                for j in 0..n {
                    h_inv[(i, j)] += -rho * (hy[i] * s[j] + s[i] * hy[j])
                        + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        u = u_new;
        phi = phi_new;
        g = g_new;
        converged = norm(&g) < config.gradient_tolerance;
    }

    Ok(PointEstimate {
        names: target.names(),
        theta: target.constrain(&u),
        objective: -phi,
        converged,
        iterations,
        gradient_norm: norm(&g),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{default_layout, Formulation, InitialStatePrior, PriorRegime};
    use crate::thermal::{build_matrices, simulate, ModelKind, ParamName};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn normal_logpdf(x: f64, m: f64, v: f64) -> f64 {
        -0.5 * (LN_2PI + v.ln() + (x - m).powi(2) / v)
    }

    #[test]
    fn static_state_reduces_to_iid_gaussian() {
        let mats = StateSpaceMatrices {
            a: Mat::identity(1),
            b: Mat::zeros(1, 3),
            c_obs: vec![1.0],
            q: Mat::zeros(1, 1),
            r_obs: 0.49,
            dt: 1.0,
        };
        let y = [1.0, 2.5, 3.0, 0.2];
        let exo = Exogenous::constant(4, 0.0, 0.0, 0.0);
        let run = kalman_filter(&mats, &y, &exo, &[2.0], &Mat::zeros(1, 1), false).unwrap();
        let expected: f64 = y.iter().map(|v| normal_logpdf(*v, 2.0, 0.49)).sum();
        assert_relative_eq!(run.loglik, expected, epsilon = 1e-12);
    }

    #[test]
    fn doubling_observation_noise_lowers_loglik_for_small_residuals() {
        let p = ThermalParams::ti(5.0, 25.0, 8.0).with_noise(ModelKind::Ti, 0.01, 0.5);
        let mats = build_matrices(ModelKind::Ti, &p, 1.0).unwrap();
        let exo = Exogenous::constant(30, 5.0, 1.0, 0.1);
        let sim = simulate(&mats, &exo, &[20.0], 0, false).unwrap();
        let ll = |r: f64| {
            let mut m = mats.clone();
            m.r_obs = r;
            kalman_filter(&m, &sim.observations, &exo, &[20.0], &Mat::zeros(1, 1), false)
                .unwrap()
                .loglik
        };
        assert!(ll(0.5) > ll(1.0));
    }

    #[test]
    fn singular_innovation_reported() {
        let mats = StateSpaceMatrices {
            a: Mat::identity(1),
            b: Mat::zeros(1, 3),
            c_obs: vec![1.0],
            q: Mat::zeros(1, 1),
            r_obs: 0.0,
            dt: 1.0,
        };
        let err = kalman_filter(
            &mats,
            &[1.0, 1.0],
            &Exogenous::constant(2, 0.0, 0.0, 0.0),
            &[1.0],
            &Mat::zeros(1, 1),
            false,
        )
        .unwrap_err();
        assert!(matches!(err, FilterError::SingularInnovation { step: 0, .. }));
    }

    #[test]
    fn metrics() {
        let pred = |v: &[f64]| -> Vec<Prediction> {
            v.iter().map(|m| Prediction { mean: *m, variance: 1.0 }).collect()
        };
        assert_eq!(one_step_metrics(&pred(&[1.0, 3.0]), &[1.0, 3.0]).unwrap(), (0.0, 0.0));
        let (rmse, nrmse) = one_step_metrics(&pred(&[1.0, 1.0]), &[0.0, 2.0]).unwrap();
        assert_relative_eq!(rmse, 1.0);
        assert_relative_eq!(nrmse, 50.0);
        assert_eq!(
            one_step_metrics(&pred(&[1.0, 1.0]), &[2.0, 2.0]).unwrap_err(),
            FilterError::ZeroRange
        );
    }

    #[test]
    fn covariance_stays_symmetric_psd() {
        let p = ThermalParams::titeth(2.0, 0.6, 0.25, 17.0, 2.0, 4.5, 5.0)
            .with_noise(ModelKind::TiTeTh, 0.05, 0.02);
        let mats = build_matrices(ModelKind::TiTeTh, &p, 0.05).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let exo = Exogenous {
            ta: (0..300).map(|_| rng.random_range(-5.0..10.0)).collect(),
            phi_h: (0..300).map(|_| rng.random_range(0.0..3.0)).collect(),
            phi_s: (0..300).map(|_| rng.random_range(0.0..0.5)).collect(),
        };
        let sim = simulate(&mats, &exo, &[20.0, 10.0, 25.0], 1, true).unwrap();
        let run = kalman_filter(
            &mats,
            &sim.observations,
            &exo,
            &[20.0; 3],
            &Mat::diag(&[25.0; 3]),
            true,
        )
        .unwrap();
        for st in &run.states {
            for i in 0..3 {
                for j in 0..3 {
                    assert!((st.cov[(i, j)] - st.cov[(j, i)]).abs() < 1e-10);
                }
            }
            assert!(crate::linalg::min_eigenvalue(&st.cov) > -1e-10);
            assert!(st.prediction.variance > 0.0);
        }
    }

    #[test]
    fn noiseless_limit_matches_simulation() {
        let p = ThermalParams::tite(1.7, 3.5, 21.0, 68.0, 10.0)
            .with_noise(ModelKind::TiTe, 0.0, 0.3);
        let mats = build_matrices(ModelKind::TiTe, &p, 0.5).unwrap();
        let exo = Exogenous::constant(40, 3.0, 2.0, 0.3);
        let sim = simulate(&mats, &exo, &[18.0, 12.0], 0, false).unwrap();
        // observations perturbed: predictions must ignore them when P stays 0
        let y: Vec<f64> = sim.observations.iter().enumerate().map(|(i, v)| v + (i % 3) as f64).collect();
        let run = kalman_filter(&mats, &y, &exo, &[18.0, 12.0], &Mat::zeros(2, 2), false).unwrap();
        for (pr, truth) in run.predictions.iter().zip(&sim.observations) {
            assert_relative_eq!(pr.mean, *truth, epsilon = 1e-10);
        }
    }

    #[test]
    fn permuted_state_order_same_loglik() {
        let p = ThermalParams::tite(1.7, 3.5, 21.0, 68.0, 10.0)
            .with_noise(ModelKind::TiTe, 0.1, 0.2);
        let mats = build_matrices(ModelKind::TiTe, &p, 0.5).unwrap();
        let exo = Exogenous::constant(25, 3.0, 2.0, 0.3);
        let sim = simulate(&mats, &exo, &[18.0, 12.0], 9, true).unwrap();
        let perm = |m: &Mat<f64>| {
            let mut out = m.clone();
            for i in 0..m.rows {
                for j in 0..m.cols {
                    let pi = if m.rows == 2 { 1 - i } else { i };
                    let pj = if m.cols == 2 { 1 - j } else { j };
                    out[(pi, pj)] = m[(i, j)];
                }
            }
            out
        };
        let mut swapped = mats.clone();
        swapped.a = perm(&mats.a);
        swapped.q = perm(&mats.q);
        swapped.b = Mat::from_rows(vec![mats.b.row(1).to_vec(), mats.b.row(0).to_vec()]);
        swapped.c_obs = vec![0.0, 1.0];
        let p0 = Mat::diag(&[4.0, 9.0]);
        let p0s = Mat::diag(&[9.0, 4.0]);
        let a = kalman_filter(&mats, &sim.observations, &exo, &[18.0, 15.0], &p0, false).unwrap();
        let b = kalman_filter(&swapped, &sim.observations, &exo, &[15.0, 18.0], &p0s, false).unwrap();
        assert_relative_eq!(a.loglik, b.loglik, epsilon = 1e-9);
    }

    fn ti_dataset(theta: &ThermalParams, n: usize, seed: u64, noise: bool) -> TimeSeriesDataset {
        crate::synthetic::generate_synthetic(
            ModelKind::Ti,
            theta,
            &crate::synthetic::DriverSpec::default(),
            n,
            0.5,
            seed,
            noise,
        )
        .unwrap()
        .0
    }

    #[test]
    fn fit_from_optimum_is_stationary() {
        let theta = ThermalParams::ti(5.3, 25.0, 7.9)
            .with(ParamName::SigmaI, 0.0)
            .with(ParamName::SigmaObs, 0.05);
        let data = ti_dataset(&theta, 300, 4, false);
        let fixed = ThermalParams::new()
            .with(ParamName::SigmaI, 0.0)
            .with(ParamName::SigmaObs, 0.05);
        let layout = default_layout(ModelKind::Ti, &PriorRegime::Uninformed, false)
            .without(&["sigma_i", "sigma_obs"]);
        let target = ModelTarget::new(ModelKind::Ti, layout, data, Formulation::Marginalized, fixed)
            .unwrap()
            .with_initial_state(InitialStatePrior {
                mean: Some(vec![20.0]),
                variance: 0.0,
            });
        let est = fit_point(&target, &ThermalParams::ti(5.3, 25.0, 7.9), PointMode::Mle, &OptimizerConfig::default())
            .unwrap();
        assert!(est.converged, "{est:?}");
        assert!(est.iterations <= 2);
        assert_relative_eq!(est.get("R_ia").unwrap(), 5.3, max_relative = 1e-9);
    }

    #[test]
    fn mle_recovers_ti_parameters() {
        let truth = ThermalParams::ti(5.3, 25.0, 7.9).with_noise(ModelKind::Ti, 0.02, 0.02);
        let mut rel_errors = Vec::new();
        for seed in 0..10 {
            let data = ti_dataset(&truth, 1500, 100 + seed, true);
            let layout = default_layout(ModelKind::Ti, &PriorRegime::Uninformed, false);
            let target = ModelTarget::marginalized(ModelKind::Ti, layout, data).unwrap();
            let init = ThermalParams::ti(5.3 * 1.5, 25.0 * 1.5, 7.9 * 1.5)
                .with_noise(ModelKind::Ti, 0.03, 0.03);
            let est = fit_point(&target, &init, PointMode::Mle, &OptimizerConfig::default()).unwrap();
            let worst = [("R_ia", 5.3), ("C_i", 25.0), ("A_w", 7.9)]
                .iter()
                .map(|(n, v)| (est.get(n).unwrap() - v).abs() / v)
                .fold(0.0, f64::max);
            rel_errors.push(worst);
        }
        rel_errors.sort_by(f64::total_cmp);
        let median = 0.5 * (rel_errors[4] + rel_errors[5]);
        assert!(median < 0.05, "median worst relative error {median}: {rel_errors:?}");
    }

    #[test]
    fn map_pulls_toward_tight_prior() {
        // data from a house with R = 6.2; prior insists on 5.3
        let truth = ThermalParams::ti(6.2, 25.0, 7.9).with_noise(ModelKind::Ti, 0.02, 0.02);
        let data = ti_dataset(&truth, 600, 21, true);
        let layout = default_layout(ModelKind::Ti, &PriorRegime::Uninformed, false).with_prior(
            "R_ia",
            crate::density::SlotPrior::Direct(crate::density::PriorSpec::Normal { mu: 5.3, sigma: 0.01 }),
        );
        let target = ModelTarget::marginalized(ModelKind::Ti, layout, data).unwrap();
        let init = truth.clone();
        let cfg = OptimizerConfig::default();
        let mle = fit_point(&target, &init, PointMode::Mle, &cfg).unwrap();
        let map = fit_point(&target, &init, PointMode::Map, &cfg).unwrap();
        let r_mle = mle.get("R_ia").unwrap();
        let r_map = map.get("R_ia").unwrap();
        assert!((r_map - 5.3).abs() < (r_mle - 5.3).abs(), "MAP {r_map}, MLE {r_mle}");
        assert!(mle.objective.is_finite() && map.converged);
    }
}
