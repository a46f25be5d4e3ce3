//! Mean-field automatic differentiation variational inference.
//!
//! The variational family is a diagonal Gaussian `N(μ, diag(exp(2ω)))` in
//! unconstrained space. Gradients of the ELBO come from the
//! reparameterization `u = μ + exp(ω)·z` and the tape, and the step size
//! follows the adaptive per-coordinate sequence
//! `ρ_k = η · k^(-1/2+ε) / (τ + sqrt(s_k))`, `s_k = α g_k² + (1 - α) s_{k-1}`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::{LogDensity, Transform};
use crate::samples::PosteriorSamples;

/// `½ log(2πe)`.
pub const GAUSSIAN_ENTROPY_UNIT: f64 = 1.418_938_533_204_672_7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdviError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("target not finite at the initial point")]
    InitFailure,
    #[error("target non-finite at all {0} drawn points")]
    NonFiniteTarget(usize),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdviConfig {
    pub max_iterations: usize,
    /// Monte-Carlo draws per gradient step.
    pub grad_samples: usize,
    pub eta: f64,
    pub tau: f64,
    /// Weight of the newest squared gradient in the running average.
    pub alpha: f64,
    /// Number of ELBO evaluations per convergence window.
    pub window: usize,
    pub tolerance: f64,
    pub seed: u64,
    /// Iterations between ELBO evaluations.
    pub eval_stride: usize,
    pub eval_samples: usize,
    /// Initial mean; the origin when absent.
    pub init_mean: Option<Vec<f64>>,
    pub init_log_sd: f64,
}

impl Default for AdviConfig {
    fn default() -> Self {
        AdviConfig {
            max_iterations: 180_000,
            grad_samples: 1,
            eta: 0.1,
            tau: 1.0,
            alpha: 0.1,
            window: 100,
            tolerance: 1e-4,
            seed: 0,
            eval_stride: 500,
            eval_samples: 100,
            init_mean: None,
            init_log_sd: 0.0,
        }
    }
}

impl AdviConfig {
    pub fn validate(&self) -> Result<(), AdviError> {
        let bad = |m: &str| Err(AdviError::InvalidConfig(m.into()));
        if self.max_iterations == 0 || self.grad_samples == 0 || self.window == 0 {
            return bad("iteration, sample and window counts must be positive");
        }
        if self.eval_stride == 0 || self.eval_samples == 0 {
            return bad("evaluation stride and samples must be positive");
        }
        if !(self.tolerance > 0.0) || !(self.eta > 0.0) || !(self.tau > 0.0) {
            return bad("tolerance, eta and tau must be positive");
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad("alpha must lie in (0, 1]");
        }
        Ok(())
    }
}

/// Fitted diagonal Gaussian in unconstrained space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalPosterior {
    pub names: Vec<String>,
    pub transforms: Vec<Transform>,
    pub mu: Vec<f64>,
    /// Log standard deviations.
    pub omega: Vec<f64>,
    pub elbo: f64,
    /// `(iteration, ELBO)` at every evaluation.
    pub elbo_trace: Vec<(usize, f64)>,
    pub iterations: usize,
    pub converged: bool,
    /// Set when optimization blew up; `mu`/`omega` then hold the best
    /// evaluated iterate.
    pub diverged: bool,
}

impl VariationalPosterior {
    /// Starting point for `target`.
    pub fn initial<D: LogDensity + ?Sized>(target: &D, mu: Vec<f64>, omega: f64) -> Self {
        let d = target.dim();
        VariationalPosterior {
            names: target.names(),
            transforms: target.transforms(),
            mu,
            omega: vec![omega; d],
            elbo: f64::NAN,
            elbo_trace: Vec::new(),
            iterations: 0,
            converged: false,
            diverged: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn entropy(&self) -> f64 {
        self.omega.iter().map(|w| w + GAUSSIAN_ENTROPY_UNIT).sum()
    }

    pub fn sd(&self) -> Vec<f64> {
        self.omega.iter().map(|w| w.exp()).collect()
    }
}

fn standard_normal_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(&mut *rng)).collect()
}

fn reparam(q: &VariationalPosterior, z: &[f64]) -> Vec<f64> {
    q.mu.iter()
        .zip(&q.omega)
        .zip(z)
        .map(|((m, w), z)| m + w.exp() * z)
        .collect()
}

fn elbo_with_draws<D: LogDensity + ?Sized>(
    target: &D,
    q: &VariationalPosterior,
    base: &[Vec<f64>],
) -> Result<f64, AdviError> {
    let n = base.len();
    let mut sum = 0.0;
    let mut used = 0usize;
    for z in base {
        let lp = target.log_density(&reparam(q, z));
        if lp.is_finite() {
            sum += lp;
            used += 1;
        }
    }
    if used == 0 {
        return Err(AdviError::NonFiniteTarget(n));
    }
    Ok(sum / used as f64 + q.entropy())
}

/// Monte-Carlo ELBO: mean log target at reparameterized draws plus the
/// closed-form Gaussian entropy. Draws where the target is not finite are
/// skipped.
pub fn elbo_estimate<D: LogDensity + ?Sized>(
    target: &D,
    q: &VariationalPosterior,
    n_samples: usize,
    seed: u64,
) -> Result<f64, AdviError> {
    if n_samples == 0 {
        return Err(AdviError::InvalidConfig("n_samples must be at least 1".into()));
    }
    if q.dim() != target.dim() {
        return Err(AdviError::DimensionMismatch(format!("q has {} coordinates, target {}", q.dim(), target.dim())));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let base: Vec<Vec<f64>> = (0..n_samples).map(|_| standard_normal_vec(&mut rng, q.dim())).collect();
    elbo_with_draws(target, q, &base)
}

/// Per-coordinate adaptive step sizes.
struct StepSchedule {
    s: Vec<f64>,
    started: bool,
    eta: f64,
    tau: f64,
    alpha: f64,
}

impl StepSchedule {
    fn new(d: usize, c: &AdviConfig) -> Self {
        StepSchedule {
            s: vec![0.0; d],
            started: false,
            eta: c.eta,
            tau: c.tau,
            alpha: c.alpha,
        }
    }

    fn step(&mut self, k: usize, g: &[f64], out: &mut [f64]) {
        if !self.started {
            for (s, g) in self.s.iter_mut().zip(g) {
                *s = g * g;
            }
            self.started = true;
        } else {
            for (s, g) in self.s.iter_mut().zip(g) {
                *s = self.alpha * g * g + (1.0 - self.alpha) * *s;
            }
        }
        let decay = (k as f64).powf(-0.5 + 1e-16);
        for ((o, s), g) in out.iter_mut().zip(&self.s).zip(g) {
            *o = self.eta * decay / (self.tau + s.sqrt()) * g;
        }
    }
}

/// Fits the mean-field Gaussian by stochastic gradient ascent on the ELBO.
///
/// Every `eval_stride` iterations the ELBO is estimated with `eval_samples`
/// draws; the same base draws are reused at every evaluation so successive
/// values differ only through `(μ, ω)`. The run has converged when the mean
/// of the latest `window` evaluations differs from the mean of the `window`
/// before it by less than `tolerance` relative to `max(|previous mean|, 1)`.
pub fn fit<D: LogDensity + ?Sized>(target: &D, config: &AdviConfig) -> Result<VariationalPosterior, AdviError> {
    config.validate()?;
    let d = target.dim();
    let mu0 = config.init_mean.clone().unwrap_or_else(|| vec![0.0; d]);
    if mu0.len() != d {
        return Err(AdviError::DimensionMismatch(format!("init has {} coordinates, target {d}", mu0.len())));
    }
    if !target.log_density(&mu0).is_finite() {
        return Err(AdviError::InitFailure);
    }
    let mut q = VariationalPosterior::initial(target, mu0, config.init_log_sd);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut sched_mu = StepSchedule::new(d, config);
    let mut sched_omega = StepSchedule::new(d, config);
    let mut g_mu = vec![0.0; d];
    let mut g_omega = vec![0.0; d];
    let mut delta = vec![0.0; d];
    let mut step_count = 0usize;
    let mut best: Option<(f64, Vec<f64>, Vec<f64>)> = None;
    let mut bad_evals = 0usize;
    let mut evals: Vec<f64> = Vec::new();
    let mut eval_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x5eed_e1b0);
    let eval_base: Vec<Vec<f64>> = (0..config.eval_samples)
        .map(|_| standard_normal_vec(&mut eval_rng, d))
        .collect();

    for it in 1..=config.max_iterations {
        q.iterations = it;
        g_mu.iter_mut().for_each(|v| *v = 0.0);
        g_omega.iter_mut().for_each(|v| *v = 0.0);
        let mut used = 0usize;
        for _ in 0..config.grad_samples {
            let z = standard_normal_vec(&mut rng, d);
            let u = reparam(&q, &z);
            let Ok(g) = target.log_density_grad(&u) else {
                continue;
            };
            if !g.value.is_finite() || g.gradient.iter().any(|v| !v.is_finite()) {
                continue;
            }
            used += 1;
            for i in 0..d {
                g_mu[i] += g.gradient[i];
                g_omega[i] += g.gradient[i] * z[i] * q.omega[i].exp();
            }
        }
        if used > 0 {
            let scale = 1.0 / used as f64;
            for i in 0..d {
                g_mu[i] *= scale;
                g_omega[i] = g_omega[i] * scale + 1.0;
            }
            step_count += 1;
            sched_mu.step(step_count, &g_mu, &mut delta);
            q.mu.iter_mut().zip(&delta).for_each(|(m, s)| *m += s);
            sched_omega.step(step_count, &g_omega, &mut delta);
            q.omega.iter_mut().zip(&delta).for_each(|(w, s)| *w += s);
        }

        let blown = q.mu.iter().chain(&q.omega).any(|v| !v.is_finite());
        if blown || it % config.eval_stride == 0 || it == config.max_iterations {
            let value = if blown {
                f64::NEG_INFINITY
            } else {
                elbo_with_draws(target, &q, &eval_base).unwrap_or(f64::NEG_INFINITY)
            };
            if value.is_finite() {
                bad_evals = 0;
                q.elbo_trace.push((it, value));
                evals.push(value);
                if best.as_ref().is_none_or(|(b, _, _)| value > *b) {
                    best = Some((value, q.mu.clone(), q.omega.clone()));
                }
            } else {
                bad_evals += 1;
            }
            if blown || bad_evals >= 10 {
                q.diverged = true;
                break;
            }
            let w = config.window;
            if evals.len() >= 2 * w {
                let recent = evals[evals.len() - w..].iter().sum::<f64>() / w as f64;
                let previous = evals[evals.len() - 2 * w..evals.len() - w].iter().sum::<f64>() / w as f64;
                if (recent - previous).abs() / previous.abs().max(1.0) < config.tolerance {
                    q.converged = true;
                    q.elbo = value;
                    break;
                }
            }
        }
    }

    if q.diverged {
        if let Some((v, mu, omega)) = best {
            q.mu = mu;
            q.omega = omega;
            q.elbo = v;
        } else {
            q.elbo = f64::NEG_INFINITY;
        }
    } else if !q.converged {
        q.elbo = q.elbo_trace.last().map_or(f64::NAN, |(_, v)| *v);
    }
    Ok(q)
}

/// `n` reparameterized draws mapped to constrained space, as one chain.
pub fn draw(q: &VariationalPosterior, n: usize, seed: u64) -> Result<PosteriorSamples, AdviError> {
    if n == 0 {
        return Err(AdviError::InvalidConfig("need at least one draw".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws = (0..n)
        .map(|_| {
            let z = standard_normal_vec(&mut rng, q.dim());
            reparam(q, &z)
                .iter()
                .zip(&q.transforms)
                .map(|(u, t)| t.constrain(*u))
                .collect()
        })
        .collect();
    Ok(PosteriorSamples::new(q.names.clone(), vec![draws]))
}
