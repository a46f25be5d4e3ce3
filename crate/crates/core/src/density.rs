//! Priors, unconstraining transforms and target log-densities.
//!
//! A target is a log-density over an unconstrained real vector `u`. Every
//! coordinate maps to its constrained value through a [`Transform`], and
//! the log-Jacobian of that map is added so that inference in `u`-space
//! reproduces the posterior in parameter space.
//!
//! Thermal targets come in two formulations:
//!
//! * **marginalized**: `u` holds parameters only and the likelihood is the
//!   Kalman marginal likelihood;
//! * **latent states**: `u` also holds every hidden state `x_{n,d}` and the
//!   log-joint is the sum of initial-state, transition and emission terms.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma as GammaDist};
use statrs::function::gamma::ln_gamma;
use thiserror::Error;

use crate::autodiff::{self, AdError, GradResult, Scalar};
use crate::filtering::{kalman_filter, FilterError};
use crate::linalg::Mat;
use crate::thermal::{assemble_matrices, ModelError, ModelKind, ParamName, ThermalParams, TimeSeriesDataset};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Shape and rate of the broad gamma priors.
pub const BROAD_GAMMA: f64 = 0.001;
/// Upper bound on every resistance.
pub const R_UPPER: f64 = 70.0;
/// Prior variance of the initial state (°C²).
pub const INITIAL_STATE_VARIANCE: f64 = 25.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DensityError {
    #[error("value {value} outside the support of the prior")]
    OutOfSupport { value: f64 },
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("no prior for parameter {0}")]
    MissingPrior(String),
    #[error("incompatible data: {0}")]
    IncompatibleData(String),
    #[error("target rejected the point: {0}")]
    Rejected(String),
    #[error(transparent)]
    Autodiff(#[from] AdError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl From<FilterError> for DensityError {
    fn from(e: FilterError) -> Self {
        DensityError::Rejected(e.to_string())
    }
}

/// Univariate prior distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum PriorSpec {
    Gamma {
        shape: f64,
        rate: f64,
    },
    /// Gamma truncated to `[lower, upper]` and renormalized.
    BoundedGamma {
        shape: f64,
        rate: f64,
        lower: f64,
        upper: f64,
    },
    LogNormal {
        mu: f64,
        sigma: f64,
    },
    LogNormalMixture {
        weights: Vec<f64>,
        mu: Vec<f64>,
        sigma: Vec<f64>,
    },
    Normal {
        mu: f64,
        sigma: f64,
    },
    Uniform {
        lower: f64,
        upper: f64,
    },
}

fn gamma_logpdf<T: Scalar>(x: T, shape: f64, rate: f64) -> T {
    x.ln() * (shape - 1.0) - x * rate + (shape * rate.ln() - ln_gamma(shape))
}

/// Gamma log-density with parameters that are themselves taped values.
pub fn gamma_logpdf_var<T: Scalar>(x: T, shape: T, rate: T) -> T {
    shape * rate.ln() - shape.ln_gamma() + x.ln() * (shape - 1.0) - rate * x
}

fn lognormal_logpdf<T: Scalar>(x: T, mu: f64, sigma: f64) -> T {
    let lx = x.ln();
    -lx - ((lx - mu) / sigma).square() * 0.5 - (sigma.ln() + 0.5 * LN_2PI)
}

impl PriorSpec {
    /// The R-value mixture fitted to building metadata.
    pub fn metadata_mixture() -> Self {
        PriorSpec::LogNormalMixture {
            weights: vec![0.5, 0.5],
            mu: vec![3.02, 3.43],
            sigma: vec![0.59, 0.50],
        }
    }

    pub fn broad_gamma() -> Self {
        PriorSpec::Gamma {
            shape: BROAD_GAMMA,
            rate: BROAD_GAMMA,
        }
    }

    /// Gamma with the given mean and standard deviation.
    pub fn gamma_from_moments(mean: f64, sd: f64) -> Self {
        let var = sd * sd;
        PriorSpec::Gamma {
            shape: mean * mean / var,
            rate: mean / var,
        }
    }

    pub fn validate(&self) -> Result<(), DensityError> {
        let bad = |msg: &str| Err(DensityError::InvalidPrior(format!("{msg}: {self:?}")));
        let pos = |v: f64| v > 0.0 && v.is_finite();
        match self {
            PriorSpec::Gamma { shape, rate } if !(pos(*shape) && pos(*rate)) => {
                bad("shape and rate must be positive")
            }
            PriorSpec::BoundedGamma {
                shape,
                rate,
                lower,
                upper,
            } => {
                if !(pos(*shape) && pos(*rate)) {
                    bad("shape and rate must be positive")
                } else if !(lower < upper) || *lower < 0.0 {
                    bad("need 0 <= lower < upper")
                } else {
                    Ok(())
                }
            }
            PriorSpec::LogNormal { sigma, .. } | PriorSpec::Normal { sigma, .. } if !pos(*sigma) => {
                bad("sigma must be positive")
            }
            PriorSpec::LogNormalMixture { weights, mu, sigma } => {
                if weights.is_empty() || weights.len() != mu.len() || weights.len() != sigma.len() {
                    return bad("mixture components must have matching lengths");
                }
                if weights.iter().any(|w| *w < 0.0) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-12 {
                    return bad("weights must be nonnegative and sum to 1");
                }
                if !sigma.iter().all(|s| pos(*s)) {
                    return bad("sigma must be positive");
                }
                Ok(())
            }
            PriorSpec::Uniform { lower, upper } if !(lower < upper) => bad("need lower < upper"),
            _ => Ok(()),
        }
    }

    /// Support as a closed interval.
    pub fn support(&self) -> (f64, f64) {
        match self {
            PriorSpec::Gamma { .. } | PriorSpec::LogNormal { .. } | PriorSpec::LogNormalMixture { .. } => {
                (0.0, f64::INFINITY)
            }
            PriorSpec::BoundedGamma { lower, upper, .. } | PriorSpec::Uniform { lower, upper } => {
                (*lower, *upper)
            }
            PriorSpec::Normal { .. } => (f64::NEG_INFINITY, f64::INFINITY),
        }
    }

    fn in_support(&self, x: f64) -> bool {
        let (lo, hi) = self.support();
        match self {
            PriorSpec::Gamma { .. } | PriorSpec::LogNormal { .. } | PriorSpec::LogNormalMixture { .. } => x > 0.0,
            _ => x >= lo && x <= hi,
        }
    }

    fn truncation_log_mass(shape: f64, rate: f64, lower: f64, upper: f64) -> f64 {
        let g = GammaDist::new(shape, rate).expect("validated gamma parameters");
        let mass = g.cdf(upper) - g.cdf(lower);
        mass.ln()
    }

    /// Log-density at a point known to lie inside the support.
    pub fn log_pdf<T: Scalar>(&self, x: T) -> T {
        match self {
            PriorSpec::Gamma { shape, rate } => gamma_logpdf(x, *shape, *rate),
            PriorSpec::BoundedGamma {
                shape,
                rate,
                lower,
                upper,
            } => gamma_logpdf(x, *shape, *rate) - Self::truncation_log_mass(*shape, *rate, *lower, *upper),
            PriorSpec::LogNormal { mu, sigma } => lognormal_logpdf(x, *mu, *sigma),
            PriorSpec::LogNormalMixture { weights, mu, sigma } => {
                let terms: Vec<T> = weights
                    .iter()
                    .zip(mu.iter().zip(sigma))
                    .filter(|(w, _)| **w > 0.0)
                    .map(|(w, (m, s))| lognormal_logpdf(x, *m, *s) + w.ln())
                    .collect();
                let shift = terms
                    .iter()
                    .map(Scalar::value)
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut acc = T::zero();
                for t in terms {
                    acc += (t - shift).exp();
                }
                acc.ln() + shift
            }
            PriorSpec::Normal { mu, sigma } => {
                ((x - *mu) / *sigma).square() * -0.5 - (sigma.ln() + 0.5 * LN_2PI)
            }
            PriorSpec::Uniform { lower, upper } => T::constant(-(upper - lower).ln()),
        }
    }

    /// Natural-log mean used to seed hierarchical priors.
    pub fn mean(&self) -> f64 {
        match self {
            PriorSpec::Gamma { shape, rate } => shape / rate,
            PriorSpec::BoundedGamma { shape, rate, .. } => shape / rate,
            PriorSpec::LogNormal { mu, sigma } => (mu + 0.5 * sigma * sigma).exp(),
            PriorSpec::LogNormalMixture { weights, mu, sigma } => weights
                .iter()
                .zip(mu.iter().zip(sigma))
                .map(|(w, (m, s))| w * (m + 0.5 * s * s).exp())
                .sum(),
            PriorSpec::Normal { mu, .. } => *mu,
            PriorSpec::Uniform { lower, upper } => 0.5 * (lower + upper),
        }
    }
}

/// Exact log-density of a prior at `theta`.
///
/// Points outside the support give [`DensityError::OutOfSupport`], kept
/// distinct from numerical failures so samplers can reject immediately.
pub fn log_prior(spec: &PriorSpec, theta: f64) -> Result<f64, DensityError> {
    spec.validate()?;
    if !theta.is_finite() || !spec.in_support(theta) {
        return Err(DensityError::OutOfSupport { value: theta });
    }
    Ok(spec.log_pdf(theta))
}

/// Bijection from the real line onto a parameter's support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Transform {
    /// `θ = exp(u)`.
    Log,
    /// `θ = lower + (upper - lower)·sigmoid(u)`.
    Interval { lower: f64, upper: f64 },
    Identity,
}

impl Transform {
    /// Constrained value and `log|dθ/du|`.
    pub fn apply<T: Scalar>(&self, u: T) -> (T, T) {
        match self {
            Transform::Log => (u.exp(), u),
            Transform::Interval { lower, upper } => {
                let width = upper - lower;
                let theta = u.sigmoid() * width + *lower;
                let log_j = u.ln_sigmoid() + (-u).ln_sigmoid() + width.ln();
                (theta, log_j)
            }
            Transform::Identity => (u, T::zero()),
        }
    }

    pub fn constrain(&self, u: f64) -> f64 {
        self.apply(u).0
    }

    pub fn unconstrain(&self, theta: f64) -> Result<f64, DensityError> {
        match self {
            Transform::Log if theta > 0.0 => Ok(theta.ln()),
            Transform::Interval { lower, upper } if theta > *lower && theta < *upper => {
                let p = (theta - lower) / (upper - lower);
                Ok((p / (1.0 - p)).ln())
            }
            Transform::Identity => Ok(theta),
            _ => Err(DensityError::OutOfSupport { value: theta }),
        }
    }
}

/// Constrained value and log-Jacobian of `t` at `u`.
pub fn transform_apply(t: &Transform, u: f64) -> (f64, f64) {
    t.apply(u)
}

/// How a slot's prior attaches to its value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SlotPrior {
    /// Prior on the value itself.
    Direct(PriorSpec),
    /// Prior on the square of the value (noise variances), with the
    /// `log 2σ` change-of-variables term.
    OnSquare(PriorSpec),
    /// `θ ~ Gamma(mean = m, var = 1)` where `m` is the slot named `hyper`.
    GammaUnitVariance { hyper: String },
}

/// One coordinate of a target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSlot {
    pub name: String,
    pub transform: Transform,
    pub prior: SlotPrior,
}

impl ParamSlot {
    pub fn new(name: impl Into<String>, transform: Transform, prior: SlotPrior) -> Self {
        ParamSlot {
            name: name.into(),
            transform,
            prior,
        }
    }
}

/// Ordered parameter slots of a target.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamLayout {
    pub slots: Vec<ParamSlot>,
}

impl ParamLayout {
    pub fn names(&self) -> Vec<String> {
        self.slots.iter().map(|s| s.name.clone()).collect()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.slots.iter().position(|s| s.name == name)
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    /// Drops the named slots (they must then be fixed on the target).
    pub fn without(mut self, names: &[&str]) -> Self {
        self.slots.retain(|s| !names.contains(&s.name.as_str()));
        self
    }

    /// Replaces the prior of one slot.
    pub fn with_prior(mut self, name: &str, prior: SlotPrior) -> Self {
        if let Some(s) = self.slots.iter_mut().find(|s| s.name == name) {
            s.prior = prior;
        }
        self
    }

    pub fn slot(&self, name: &str) -> Option<&ParamSlot> {
        self.slots.iter().find(|s| s.name == name)
    }

    pub fn validate(&self) -> Result<(), DensityError> {
        for s in &self.slots {
            match &s.prior {
                SlotPrior::Direct(p) | SlotPrior::OnSquare(p) => p.validate()?,
                SlotPrior::GammaUnitVariance { hyper } => {
                    if self.index_of(hyper).is_none() {
                        return Err(DensityError::MissingPrior(hyper.clone()));
                    }
                }
            }
        }
        Ok(())
    }

    /// Sum of log-priors and log-Jacobians; fills `theta` with constrained values.
    fn log_prior_and_jacobian<T: Scalar>(
        &self,
        u: &[T],
        theta: &mut Vec<T>,
        include_prior: bool,
        include_jacobian: bool,
    ) -> T {
        theta.clear();
        let mut lp = T::zero();
        for (slot, ui) in self.slots.iter().zip(u) {
            let (t, lj) = slot.transform.apply(*ui);
            if include_jacobian {
                lp += lj;
            }
            theta.push(t);
        }
        if include_prior {
            for (i, slot) in self.slots.iter().enumerate() {
                let t = theta[i];
                lp += match &slot.prior {
                    SlotPrior::Direct(p) => p.log_pdf(t),
                    SlotPrior::OnSquare(p) => p.log_pdf(t.square()) + (t * 2.0).ln(),
                    SlotPrior::GammaUnitVariance { hyper } => {
                        let m = theta[self.index_of(hyper).expect("validated layout")];
                        gamma_logpdf_var(t, m.square(), m)
                    }
                };
            }
        }
        lp
    }
}

/// Mixture parameters feeding the hyper-prior regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureMetadata {
    pub weights: Vec<f64>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
}

impl Default for MixtureMetadata {
    fn default() -> Self {
        MixtureMetadata {
            weights: vec![0.5, 0.5],
            mu: vec![3.02, 3.43],
            sigma: vec![0.59, 0.50],
        }
    }
}

impl MixtureMetadata {
    pub fn prior(&self) -> PriorSpec {
        PriorSpec::LogNormalMixture {
            weights: self.weights.clone(),
            mu: self.mu.clone(),
            sigma: self.sigma.clone(),
        }
    }
}

/// Normal prior carried over from an earlier fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferredPrior {
    pub mean: f64,
    pub sd: f64,
}

/// The prior regimes used for resistances.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorRegime {
    /// Gamma priors with mean at an audit estimate and standard deviation `sd`.
    Informed {
        estimates: BTreeMap<ParamName, f64>,
        sd: f64,
    },
    /// Resistance mean drawn from a lognormal mixture.
    Hyper(MixtureMetadata),
    /// Broad gamma priors everywhere.
    Uninformed,
    /// Normal priors from a previous posterior; parameters not listed keep
    /// the uninformed prior.
    Transferred(BTreeMap<String, TransferredPrior>),
}

/// Standard parameter layout for `kind` under a prior regime.
///
/// Resistances live on `(0, 70)` through an interval transform; everything
/// else is positive through a log transform. Capacitances, apertures and the
/// heater multiplier get broad gamma priors; noise scales get a broad gamma
/// prior on their variance.
pub fn default_layout(kind: ModelKind, regime: &PriorRegime, binary_hvac: bool) -> ParamLayout {
    let r_transform = Transform::Interval {
        lower: 0.0,
        upper: R_UPPER,
    };
    let broad_r = PriorSpec::BoundedGamma {
        shape: BROAD_GAMMA,
        rate: BROAD_GAMMA,
        lower: 0.0,
        upper: R_UPPER,
    };
    let mut slots = Vec::new();
    let mut hyper_slots = Vec::new();
    let mut names: Vec<ParamName> = kind.parameter_names().to_vec();
    if binary_hvac {
        names.push(ParamName::HeaterScale);
    }
    names.extend_from_slice(kind.process_noise_names());
    names.push(ParamName::SigmaObs);

    for name in names {
        let label = name.as_str().to_string();
        if let PriorRegime::Transferred(map) = regime {
            if let Some(tp) = map.get(&label) {
                let transform = if name.is_resistance() { r_transform } else { Transform::Log };
                slots.push(ParamSlot::new(
                    label,
                    transform,
                    SlotPrior::Direct(PriorSpec::Normal {
                        mu: tp.mean,
                        sigma: tp.sd,
                    }),
                ));
                continue;
            }
        }
        let slot = if name.is_resistance() {
            let prior = match regime {
                PriorRegime::Informed { estimates, sd } => match estimates.get(&name) {
                    Some(m) => {
                        let var = sd * sd;
                        SlotPrior::Direct(PriorSpec::BoundedGamma {
                            shape: m * m / var,
                            rate: m / var,
                            lower: 0.0,
                            upper: R_UPPER,
                        })
                    }
                    None => SlotPrior::Direct(broad_r.clone()),
                },
                PriorRegime::Hyper(meta) => {
                    let hyper = format!("mu_{label}");
                    hyper_slots.push(ParamSlot::new(
                        hyper.clone(),
                        Transform::Log,
                        SlotPrior::Direct(meta.prior()),
                    ));
                    SlotPrior::GammaUnitVariance { hyper }
                }
                _ => SlotPrior::Direct(broad_r.clone()),
            };
            ParamSlot::new(label, r_transform, prior)
        } else if name.is_noise() {
            ParamSlot::new(label, Transform::Log, SlotPrior::OnSquare(PriorSpec::broad_gamma()))
        } else {
            ParamSlot::new(label, Transform::Log, SlotPrior::Direct(PriorSpec::broad_gamma()))
        };
        slots.push(slot);
    }
    slots.extend(hyper_slots);
    ParamLayout { slots }
}

/// Target log-density over an unconstrained vector.
pub trait LogDensity: Sync {
    fn dim(&self) -> usize;
    /// Names of the constrained coordinates, in order.
    fn names(&self) -> Vec<String>;
    /// Log-density at `u`; `-inf` when the point is rejected.
    fn log_density(&self, u: &[f64]) -> f64;
    fn log_density_grad(&self, u: &[f64]) -> Result<GradResult, DensityError>;
    /// Maps an unconstrained vector to constrained values.
    fn constrain(&self, u: &[f64]) -> Vec<f64>;
    /// Bounds each constrained coordinate must satisfy.
    fn bounds(&self) -> Vec<(f64, f64)> {
        vec![(f64::NEG_INFINITY, f64::INFINITY); self.dim()]
    }
    /// Per-coordinate constraining maps.
    fn transforms(&self) -> Vec<Transform> {
        vec![Transform::Identity; self.dim()]
    }
}

/// A density written once against [`Scalar`]; gets [`LogDensity`] for free.
pub trait ScalarDensity: Sync {
    fn dim(&self) -> usize;
    fn names(&self) -> Vec<String>;
    fn eval<T: Scalar>(&self, u: &[T]) -> Result<T, DensityError>;
    fn constrain(&self, u: &[f64]) -> Vec<f64>;
    fn bounds(&self) -> Vec<(f64, f64)> {
        vec![(f64::NEG_INFINITY, f64::INFINITY); self.dim()]
    }
    fn transforms(&self) -> Vec<Transform> {
        vec![Transform::Identity; self.dim()]
    }
}

impl<D: ScalarDensity> LogDensity for D {
    fn dim(&self) -> usize {
        ScalarDensity::dim(self)
    }

    fn names(&self) -> Vec<String> {
        ScalarDensity::names(self)
    }

    fn log_density(&self, u: &[f64]) -> f64 {
        match self.eval(u) {
            Ok(v) if !v.is_nan() => v,
            _ => f64::NEG_INFINITY,
        }
    }

    fn log_density_grad(&self, u: &[f64]) -> Result<GradResult, DensityError> {
        let mut failure = None;
        let result = autodiff::grad(
            |x| match self.eval(x) {
                Ok(v) => v,
                Err(e) => {
                    failure = Some(e);
                    autodiff::Var::constant(0.0)
                }
            },
            u,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(result?)
    }

    fn constrain(&self, u: &[f64]) -> Vec<f64> {
        ScalarDensity::constrain(self, u)
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        ScalarDensity::bounds(self)
    }

    fn transforms(&self) -> Vec<Transform> {
        ScalarDensity::transforms(self)
    }
}

fn transform_bounds(t: &Transform) -> (f64, f64) {
    match t {
        Transform::Log => (0.0, f64::INFINITY),
        Transform::Interval { lower, upper } => (*lower, *upper),
        Transform::Identity => (f64::NEG_INFINITY, f64::INFINITY),
    }
}

/// Product of independent priors, each behind its own transform.
#[derive(Debug, Clone, PartialEq)]
pub struct IndependentTarget {
    pub layout: ParamLayout,
}

impl IndependentTarget {
    pub fn new(components: Vec<(&str, PriorSpec, Transform)>) -> Self {
        IndependentTarget {
            layout: ParamLayout {
                slots: components
                    .into_iter()
                    .map(|(n, p, t)| ParamSlot::new(n, t, SlotPrior::Direct(p)))
                    .collect(),
            },
        }
    }

    /// Standard normal in `dim` dimensions.
    pub fn standard_normal(dim: usize) -> Self {
        IndependentTarget {
            layout: ParamLayout {
                slots: (0..dim)
                    .map(|i| {
                        ParamSlot::new(
                            format!("x{i}"),
                            Transform::Identity,
                            SlotPrior::Direct(PriorSpec::Normal { mu: 0.0, sigma: 1.0 }),
                        )
                    })
                    .collect(),
            },
        }
    }
}

impl ScalarDensity for IndependentTarget {
    fn dim(&self) -> usize {
        self.layout.len()
    }

    fn names(&self) -> Vec<String> {
        self.layout.names()
    }

    fn eval<T: Scalar>(&self, u: &[T]) -> Result<T, DensityError> {
        let mut theta = Vec::with_capacity(u.len());
        Ok(self.layout.log_prior_and_jacobian(u, &mut theta, true, true))
    }

    fn constrain(&self, u: &[f64]) -> Vec<f64> {
        self.layout
            .slots
            .iter()
            .zip(u)
            .map(|(s, ui)| s.transform.constrain(*ui))
            .collect()
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        self.layout.slots.iter().map(|s| transform_bounds(&s.transform)).collect()
    }

    fn transforms(&self) -> Vec<Transform> {
        self.layout.slots.iter().map(|s| s.transform).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Formulation {
    LatentStates,
    Marginalized,
}

/// Which terms a model target includes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetMode {
    /// Log-prior + log-likelihood + log-Jacobian.
    Posterior,
    /// Log-likelihood only (MLE objective).
    Likelihood,
    /// Log-prior + log-likelihood without Jacobians (MAP objective).
    PenalizedLikelihood,
}

/// Gaussian prior on the first state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitialStatePrior {
    /// Mean per state; defaults to the first observation for every state.
    pub mean: Option<Vec<f64>>,
    /// Variance for every state (°C²).
    pub variance: f64,
}

impl Default for InitialStatePrior {
    fn default() -> Self {
        InitialStatePrior {
            mean: None,
            variance: INITIAL_STATE_VARIANCE,
        }
    }
}

/// Posterior (or likelihood) of a thermal model given a dataset.
#[derive(Debug, Clone)]
pub struct ModelTarget {
    pub kind: ModelKind,
    pub layout: ParamLayout,
    pub data: TimeSeriesDataset,
    pub formulation: Formulation,
    pub mode: TargetMode,
    /// Parameters held fixed instead of inferred.
    pub fixed: ThermalParams,
    pub initial_state: InitialStatePrior,
    slot_names: Vec<Option<ParamName>>,
}

impl ModelTarget {
    pub fn marginalized(kind: ModelKind, layout: ParamLayout, data: TimeSeriesDataset) -> Result<Self, DensityError> {
        build_target(kind, layout, data, Formulation::Marginalized)
    }

    /// Target with some parameters held fixed instead of inferred.
    pub fn new(
        kind: ModelKind,
        layout: ParamLayout,
        data: TimeSeriesDataset,
        formulation: Formulation,
        fixed: ThermalParams,
    ) -> Result<Self, DensityError> {
        let slot_names = layout.slots.iter().map(|s| s.name.parse::<ParamName>().ok()).collect();
        let target = ModelTarget {
            kind,
            layout,
            data,
            formulation,
            mode: TargetMode::Posterior,
            fixed,
            initial_state: InitialStatePrior::default(),
            slot_names,
        };
        target.check()?;
        Ok(target)
    }

    pub fn latent(kind: ModelKind, layout: ParamLayout, data: TimeSeriesDataset) -> Result<Self, DensityError> {
        build_target(kind, layout, data, Formulation::LatentStates)
    }

    pub fn with_mode(mut self, mode: TargetMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_initial_state(mut self, init: InitialStatePrior) -> Self {
        self.initial_state = init;
        self
    }

    /// Checks that every required parameter is inferred or fixed.
    pub fn check(&self) -> Result<(), DensityError> {
        self.layout.validate()?;
        let mut required: Vec<ParamName> = self.kind.parameter_names().to_vec();
        required.extend_from_slice(self.kind.process_noise_names());
        required.push(ParamName::SigmaObs);
        if self.data.binary_hvac {
            required.push(ParamName::HeaterScale);
        }
        for name in required {
            let inferred = self.layout.index_of(name.as_str()).is_some();
            let fixed = self.fixed.values.contains_key(&name);
            if !inferred && !fixed {
                if name == ParamName::HeaterScale {
                    return Err(DensityError::IncompatibleData(
                        "binary HVAC data needs a Phi_h heater multiplier".into(),
                    ));
                }
                return Err(DensityError::MissingPrior(name.to_string()));
            }
        }
        if self.formulation == Formulation::LatentStates {
            for name in self.kind.process_noise_names() {
                if let Some(v) = self.fixed.values.get(name) {
                    if *v <= 0.0 {
                        return Err(DensityError::IncompatibleData(format!(
                            "latent-state targets need positive {name}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn n_params(&self) -> usize {
        self.layout.len()
    }

    pub fn state_dim(&self) -> usize {
        self.kind.state_dim()
    }

    /// Slice of `u` holding latent states, if any.
    pub fn latent_range(&self) -> Option<std::ops::Range<usize>> {
        match self.formulation {
            Formulation::LatentStates => {
                Some(self.n_params()..self.n_params() + self.state_dim() * self.data.len())
            }
            Formulation::Marginalized => None,
        }
    }

    pub fn initial_mean(&self) -> Vec<f64> {
        self.initial_state
            .mean
            .clone()
            .unwrap_or_else(|| vec![self.data.y[0]; self.state_dim()])
    }

    pub fn initial_cov(&self) -> Mat<f64> {
        Mat::diag(&vec![self.initial_state.variance; self.state_dim()])
    }

    fn params_from<T: Scalar>(&self, theta: &[T]) -> ThermalParams<T> {
        let mut p = ThermalParams::<T>::new();
        for (name, v) in &self.fixed.values {
            p.set(*name, T::constant(*v));
        }
        for (name, t) in self.slot_names.iter().zip(theta) {
            if let Some(n) = name {
                p.set(*n, *t);
            }
        }
        p
    }

    /// Unconstrained parameter vector for the given values.
    pub fn unconstrain_params(&self, params: &ThermalParams) -> Result<Vec<f64>, DensityError> {
        self.layout
            .slots
            .iter()
            .zip(&self.slot_names)
            .map(|(slot, name)| {
                let v = match name {
                    Some(n) => params.get(*n)?,
                    None => {
                        // hyper-means start at the value of the parameter they govern
                        let governed = slot.name.trim_start_matches("mu_");
                        params.get(governed.parse().map_err(|_| DensityError::MissingPrior(slot.name.clone()))?)?
                    }
                };
                slot.transform.unconstrain(v)
            })
            .collect()
    }

    /// Constrained parameter values at `u` (latent states excluded).
    pub fn params_at(&self, u: &[f64]) -> ThermalParams {
        let theta: Vec<f64> = self
            .layout
            .slots
            .iter()
            .zip(u)
            .map(|(s, ui)| s.transform.constrain(*ui))
            .collect();
        self.params_from(&theta)
    }
}

/// Assembles a thermal target and checks priors cover every parameter.
pub fn build_target(
    kind: ModelKind,
    layout: ParamLayout,
    data: TimeSeriesDataset,
    formulation: Formulation,
) -> Result<ModelTarget, DensityError> {
    ModelTarget::new(kind, layout, data, formulation, ThermalParams::new())
}

/// Latent-state log-joint of states and observations for fixed matrices.
///
/// `states` is N×D, row-major. Covariances are diagonal.
pub fn latent_log_joint<T: Scalar>(
    mats: &crate::thermal::StateSpaceMatrices<T>,
    y: &[f64],
    exo: &crate::thermal::Exogenous,
    states: &[T],
    m0: &[f64],
    p0_var: f64,
) -> T {
    let d = mats.state_dim();
    let mut lp = T::zero();
    let x0 = &states[..d];
    if p0_var > 0.0 {
        for (xi, mi) in x0.iter().zip(m0) {
            lp += (*xi - *mi).square() * (-0.5 / p0_var) - 0.5 * (LN_2PI + p0_var.ln());
        }
    }
    let q_diag: Vec<T> = (0..d).map(|i| mats.q[(i, i)]).collect();
    let log_q: Vec<T> = q_diag.iter().map(|q| q.ln()).collect();
    let r_ln = mats.r_obs.ln();
    for n in 0..y.len() {
        let x = &states[n * d..(n + 1) * d];
        if n > 0 {
            let prev = &states[(n - 1) * d..n * d];
            let mean = mats.propagate(prev, exo.at(n));
            for i in 0..d {
                lp += ((x[i] - mean[i]).square() / q_diag[i] + log_q[i] + LN_2PI) * -0.5;
            }
        }
        let resid = -mats.observe(x) + y[n];
        lp += (resid.square() / mats.r_obs + r_ln + LN_2PI) * -0.5;
    }
    lp
}

impl ScalarDensity for ModelTarget {
    fn dim(&self) -> usize {
        self.n_params() + self.latent_range().map_or(0, |r| r.len())
    }

    fn names(&self) -> Vec<String> {
        let mut names = self.layout.names();
        if self.formulation == Formulation::LatentStates {
            for n in 0..self.data.len() {
                for d in 0..self.state_dim() {
                    names.push(format!("x[{n}][{d}]"));
                }
            }
        }
        names
    }

    fn eval<T: Scalar>(&self, u: &[T]) -> Result<T, DensityError> {
        let np = self.n_params();
        let (include_prior, include_jac) = match self.mode {
            TargetMode::Posterior => (true, true),
            TargetMode::Likelihood => (false, false),
            TargetMode::PenalizedLikelihood => (true, false),
        };
        let mut theta = Vec::with_capacity(np);
        let mut lp = self
            .layout
            .log_prior_and_jacobian(&u[..np], &mut theta, include_prior, include_jac);
        let params = self.params_from(&theta);
        let mats = assemble_matrices(self.kind, &params, self.data.dt)?;
        let m0 = self.initial_mean();
        match self.formulation {
            Formulation::Marginalized => {
                let run = kalman_filter(&mats, &self.data.y, &self.data.exo, &m0, &self.initial_cov(), false)?;
                lp += run.loglik;
            }
            Formulation::LatentStates => {
                lp += latent_log_joint(
                    &mats,
                    &self.data.y,
                    &self.data.exo,
                    &u[np..],
                    &m0,
                    self.initial_state.variance,
                );
            }
        }
        if !lp.value().is_finite() {
            return Err(DensityError::Rejected(format!("log density {}", lp.value())));
        }
        Ok(lp)
    }

    fn constrain(&self, u: &[f64]) -> Vec<f64> {
        let np = self.n_params();
        let mut out: Vec<f64> = self
            .layout
            .slots
            .iter()
            .zip(u)
            .map(|(s, ui)| s.transform.constrain(*ui))
            .collect();
        out.extend_from_slice(&u[np..]);
        out
    }

    fn transforms(&self) -> Vec<Transform> {
        let mut t: Vec<Transform> = self.layout.slots.iter().map(|s| s.transform).collect();
        t.resize(ScalarDensity::dim(self), Transform::Identity);
        t
    }

    fn bounds(&self) -> Vec<(f64, f64)> {
        let mut b: Vec<(f64, f64)> = self.layout.slots.iter().map(|s| transform_bounds(&s.transform)).collect();
        b.resize(ScalarDensity::dim(self), (f64::NEG_INFINITY, f64::INFINITY));
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thermal::{build_matrices, simulate, Exogenous};
    use approx::assert_relative_eq;

    #[test]
    fn gamma_at_one() {
        let v = log_prior(&PriorSpec::Gamma { shape: 2.0, rate: 1.0 }, 1.0).unwrap();
        assert_relative_eq!(v, -1.0, epsilon = 1e-14);
    }

    #[test]
    fn uniform_is_flat() {
        let v = log_prior(&PriorSpec::Uniform { lower: 0.0, upper: 70.0 }, 35.0).unwrap();
        assert_relative_eq!(v, (1.0f64 / 70.0).ln(), epsilon = 1e-14);
    }

    // Direct summation of the two lognormal pdfs, coded separately.
    #[test]
    fn mixture_matches_direct_sum() {
        let theta: f64 = 20.0;
        let pdf = |mu: f64, s: f64| {
            (-(theta.ln() - mu).powi(2) / (2.0 * s * s)).exp() / (theta * s * (2.0 * std::f64::consts::PI).sqrt())
        };
        let direct = (0.5 * pdf(3.02, 0.59) + 0.5 * pdf(3.43, 0.50)).ln();
        // frozen from the direct-sum oracle above
        assert_relative_eq!(direct, -3.487_747_062_814_29, epsilon = 1e-12);
        let v = log_prior(&PriorSpec::metadata_mixture(), theta).unwrap();
        assert_relative_eq!(v, direct, epsilon = 1e-12);
    }

    #[test]
    fn out_of_support_flagged() {
        assert!(matches!(
            log_prior(&PriorSpec::Gamma { shape: 2.0, rate: 1.0 }, -1.0),
            Err(DensityError::OutOfSupport { .. })
        ));
        assert!(matches!(
            log_prior(&PriorSpec::Uniform { lower: 0.0, upper: 70.0 }, 71.0),
            Err(DensityError::OutOfSupport { .. })
        ));
        assert!(matches!(
            log_prior(&PriorSpec::Gamma { shape: -2.0, rate: 1.0 }, 1.0),
            Err(DensityError::InvalidPrior(_))
        ));
        let bad_weights = PriorSpec::LogNormalMixture {
            weights: vec![0.5, 0.6],
            mu: vec![1.0, 2.0],
            sigma: vec![1.0, 1.0],
        };
        assert!(bad_weights.validate().is_err());
    }

    // Composite Simpson quadrature over the support.
    fn integrate(spec: &PriorSpec, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        let f = |x: f64| if spec.in_support(x) { spec.log_pdf(x).exp() } else { 0.0 };
        let mut s = f(lo) + f(hi);
        for i in 1..n {
            let x = lo + i as f64 * h;
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        s * h / 3.0
    }

    #[test]
    fn priors_integrate_to_one() {
        let cases = [
            (PriorSpec::Gamma { shape: 2.0, rate: 1.0 }, 1e-9, 60.0),
            (
                PriorSpec::BoundedGamma { shape: 3.0, rate: 0.2, lower: 0.0, upper: 70.0 },
                1e-9,
                70.0,
            ),
            (PriorSpec::LogNormal { mu: 1.0, sigma: 0.5 }, 1e-9, 100.0),
            (PriorSpec::metadata_mixture(), 1e-9, 2000.0),
            (PriorSpec::Normal { mu: 3.0, sigma: 2.0 }, -30.0, 36.0),
            (PriorSpec::Uniform { lower: 0.0, upper: 70.0 }, 0.0, 70.0),
        ];
        for (spec, lo, hi) in cases {
            let total = integrate(&spec, lo, hi, 400_000);
            assert!((total - 1.0).abs() < 1e-4, "{spec:?} integrates to {total}");
        }
    }

    #[test]
    fn transform_examples() {
        let (t, lj) = transform_apply(&Transform::Log, 0.0);
        assert_eq!((t, lj), (1.0, 0.0));
        let (t, lj) = transform_apply(&Transform::Interval { lower: 0.0, upper: 70.0 }, 0.0);
        assert_relative_eq!(t, 35.0);
        assert_relative_eq!(lj, 17.5f64.ln(), epsilon = 1e-14);
        let (t, lj) = transform_apply(&Transform::Log, 2.0);
        assert_relative_eq!(t, 2f64.exp());
        assert_eq!(lj, 2.0);
    }

    #[test]
    fn interval_jacobian_finite_in_tails() {
        let t = Transform::Interval { lower: 0.0, upper: 70.0 };
        for u in [-700.0, -50.0, 50.0, 700.0] {
            assert!(t.apply(u).1.is_finite());
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn transforms_round_trip(u in -20.0..20.0f64, lo in -5.0..5.0f64, w in 0.1..100.0f64) {
                for t in [Transform::Log, Transform::Identity, Transform::Interval { lower: lo, upper: lo + w }] {
                    let theta = t.constrain(u);
                    prop_assume!(match t { Transform::Interval { lower, upper } => theta > lower && theta < upper, _ => true });
                    let back = t.unconstrain(theta).unwrap();
                    prop_assert!((back - u).abs() < 1e-10 * (1.0 + u.abs()) || (u.abs() > 15.0 && matches!(t, Transform::Interval { .. })),
                        "{t:?}: {u} -> {theta} -> {back}");
                }
            }
        }
    }

    fn rw_mats(sigma: f64, r: f64) -> crate::thermal::StateSpaceMatrices<f64> {
        crate::thermal::StateSpaceMatrices {
            a: Mat::identity(1),
            b: Mat::zeros(1, 3),
            c_obs: vec![1.0],
            q: Mat::diag(&[sigma * sigma]),
            r_obs: r,
            dt: 1.0,
        }
    }

    #[test]
    fn latent_random_walk_reduces_to_gaussian_increments() {
        let mats = rw_mats(0.7, 0.3);
        let y = [1.0, 1.4, 0.9];
        let x = [1.1, 1.3, 1.0];
        let exo = Exogenous::constant(3, 0.0, 0.0, 0.0);
        let lp = latent_log_joint(&mats, &y, &exo, &x, &[1.0], 2.0);
        let norm = |v: f64, var: f64| -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + v * v / var);
        let hand = norm(x[0] - 1.0, 2.0)
            + norm(x[1] - x[0], 0.49)
            + norm(x[2] - x[1], 0.49)
            + y.iter().zip(&x).map(|(yi, xi)| norm(yi - xi, 0.3)).sum::<f64>();
        assert_relative_eq!(lp, hand, epsilon = 1e-12);
    }

    fn ti_data(n: usize) -> TimeSeriesDataset {
        let p = ThermalParams::ti(5.3, 25.0, 7.9).with_noise(ModelKind::Ti, 0.05, 0.05);
        let mats = build_matrices(ModelKind::Ti, &p, 0.5).unwrap();
        let exo = Exogenous {
            ta: (0..n).map(|i| 5.0 + 3.0 * (i as f64 * 0.3).sin()).collect(),
            phi_h: (0..n).map(|i| if i % 7 < 3 { 2.0 } else { 0.0 }).collect(),
            phi_s: (0..n).map(|i| 0.3 * (i as f64 * 0.2).cos().max(0.0)).collect(),
        };
        let sim = simulate(&mats, &exo, &[20.0], 11, true).unwrap();
        TimeSeriesDataset::from_series(0.5, sim.observations, exo, false).unwrap()
    }

    #[test]
    fn marginalized_is_kalman_plus_priors() {
        let data = ti_data(40);
        let layout = default_layout(ModelKind::Ti, &PriorRegime::Uninformed, false);
        let target = ModelTarget::marginalized(ModelKind::Ti, layout.clone(), data.clone())
            .unwrap()
            .with_mode(TargetMode::PenalizedLikelihood);
        let theta = ThermalParams::ti(5.0, 22.0, 7.0).with_noise(ModelKind::Ti, 0.06, 0.04);
        let u = target.unconstrain_params(&theta).unwrap();
        let value = target.log_density(&u);

        let mats = build_matrices(ModelKind::Ti, &theta, 0.5).unwrap();
        let (ll, _) = crate::filtering::kalman_loglik(&mats, &data, &[data.y[0]], &Mat::diag(&[25.0])).unwrap();
        let mut priors = 0.0;
        for slot in &layout.slots {
            let v = theta.get(slot.name.parse().unwrap()).unwrap();
            priors += match &slot.prior {
                SlotPrior::Direct(p) => log_prior(p, v).unwrap(),
                SlotPrior::OnSquare(p) => log_prior(p, v * v).unwrap() + (2.0 * v).ln(),
                _ => unreachable!(),
            };
        }
        assert_relative_eq!(value, ll + priors, epsilon = 1e-12 * ll.abs().max(1.0));
    }

    #[test]
    fn missing_prior_and_binary_data_rejected() {
        let data = ti_data(10);
        let layout = default_layout(ModelKind::Ti, &PriorRegime::Uninformed, false).without(&["C_i"]);
        assert!(matches!(
            ModelTarget::marginalized(ModelKind::Ti, layout, data.clone()),
            Err(DensityError::MissingPrior(_))
        ));
        let mut binary = data;
        binary.binary_hvac = true;
        let layout = default_layout(ModelKind::Ti, &PriorRegime::Uninformed, false);
        assert!(matches!(
            ModelTarget::marginalized(ModelKind::Ti, layout, binary),
            Err(DensityError::IncompatibleData(_))
        ));
    }

    #[test]
    fn layout_permutation_does_not_change_density() {
        let data = ti_data(30);
        let layout = default_layout(ModelKind::Ti, &PriorRegime::Uninformed, false);
        let mut rev = layout.clone();
        rev.slots.reverse();
        let a = ModelTarget::marginalized(ModelKind::Ti, layout, data.clone()).unwrap();
        let b = ModelTarget::marginalized(ModelKind::Ti, rev, data).unwrap();
        let theta = ThermalParams::ti(5.0, 22.0, 7.0).with_noise(ModelKind::Ti, 0.06, 0.04);
        let ua = a.unconstrain_params(&theta).unwrap();
        let ub = b.unconstrain_params(&theta).unwrap();
        assert_relative_eq!(a.log_density(&ua), b.log_density(&ub), epsilon = 1e-12);
        let mut ub_rev = ub.clone();
        ub_rev.reverse();
        assert_eq!(ua, ub_rev);
    }

    #[test]
    fn hyper_regime_adds_hyper_mean() {
        let layout = default_layout(ModelKind::TiTe, &PriorRegime::Hyper(MixtureMetadata::default()), false);
        assert!(layout.index_of("mu_R_ie").is_some());
        assert!(layout.index_of("mu_R_ea").is_some());
        layout.validate().unwrap();
        let data = ti_data(20);
        let t = ModelTarget::marginalized(ModelKind::TiTe, layout, data).unwrap();
        let theta = ThermalParams::tite(2.0, 3.0, 20.0, 60.0, 8.0).with_noise(ModelKind::TiTe, 0.05, 0.05);
        let u = t.unconstrain_params(&theta).unwrap();
        assert!(t.log_density(&u).is_finite());
        assert!(t.log_density_grad(&u).is_ok());
    }

    #[test]
    fn informed_prior_has_requested_moments() {
        let mut est = BTreeMap::new();
        est.insert(ParamName::Ria, 5.3);
        let layout = default_layout(ModelKind::Ti, &PriorRegime::Informed { estimates: est, sd: 1.0 }, false);
        match &layout.slot("R_ia").unwrap().prior {
            SlotPrior::Direct(PriorSpec::BoundedGamma { shape, rate, .. }) => {
                assert_relative_eq!(shape / rate, 5.3, epsilon = 1e-12);
                assert_relative_eq!(shape / (rate * rate), 1.0, epsilon = 1e-12);
            }
            other => panic!("unexpected prior {other:?}"),
        }
    }
}
