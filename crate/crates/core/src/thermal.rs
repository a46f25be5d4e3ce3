//! RC-network thermal models and their discrete state-space realizations.
//!
//! Three lumped models are supported:
//!
//! * `Ti`: one interior state coupled to ambient through `R_ia`.
//! * `TiTe`: interior and envelope states (`R_ie`, `R_ea`).
//! * `TiTeTh`: adds a heater state coupled to the interior through `R_ih`.
//!
//! Units are °C, kW, kWh/°C and hours throughout. Every `1/(R·C)` and `1/C`
//! coupling is multiplied by the sampling interval `dt`, so estimates do not
//! depend on the resampling rate. Inputs are ordered `[Ta, Φ_h, Φ_s]`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autodiff::Scalar;
use crate::linalg::Mat;
use crate::samples::PosteriorSamples;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("parameter {name} must be positive and finite, got {value}")]
    NonPositiveParameter { name: ParamName, value: f64 },
    #[error("unstable discretization: diagonal {index} of A is {value} (dt too large for the RC constants)")]
    UnstableDiscretization { index: usize, value: f64 },
    #[error("missing parameter {0}")]
    MissingParameter(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("dt must be positive, got {0}")]
    InvalidStep(f64),
}

/// Lumped thermal model variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    Ti,
    TiTe,
    TiTeTh,
}

/// Inputs are ambient temperature, heater flux and solar irradiance.
pub const INPUT_DIM: usize = 3;

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Ti, ModelKind::TiTe, ModelKind::TiTeTh];

    pub fn state_dim(self) -> usize {
        match self {
            ModelKind::Ti => 1,
            ModelKind::TiTe => 2,
            ModelKind::TiTeTh => 3,
        }
    }

    /// Physical parameters (resistances, capacitances, solar aperture).
    pub fn parameter_names(self) -> &'static [ParamName] {
        use ParamName::*;
        match self {
            ModelKind::Ti => &[Ria, Ci, Aw],
            ModelKind::TiTe => &[Rie, Rea, Ci, Ce, Aw],
            ModelKind::TiTeTh => &[Rie, Rea, Rih, Ci, Ce, Ch, Aw],
        }
    }

    pub fn resistances(self) -> &'static [ParamName] {
        use ParamName::*;
        match self {
            ModelKind::Ti => &[Ria],
            ModelKind::TiTe => &[Rie, Rea],
            ModelKind::TiTeTh => &[Rie, Rea, Rih],
        }
    }

    pub fn capacitances(self) -> &'static [ParamName] {
        use ParamName::*;
        match self {
            ModelKind::Ti => &[Ci],
            ModelKind::TiTe => &[Ci, Ce],
            ModelKind::TiTeTh => &[Ci, Ce, Ch],
        }
    }

    /// Process noise scale per state, in state order.
    pub fn process_noise_names(self) -> &'static [ParamName] {
        use ParamName::*;
        match self {
            ModelKind::Ti => &[SigmaI],
            ModelKind::TiTe => &[SigmaI, SigmaE],
            ModelKind::TiTeTh => &[SigmaI, SigmaE, SigmaH],
        }
    }

    /// Resistances on the interior-to-ambient path.
    pub fn ambient_path(self) -> &'static [ParamName] {
        use ParamName::*;
        match self {
            ModelKind::Ti => &[Ria],
            ModelKind::TiTe | ModelKind::TiTeTh => &[Rie, Rea],
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Ti => "Ti",
            ModelKind::TiTe => "TiTe",
            ModelKind::TiTeTh => "TiTeTh",
        })
    }
}

impl FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "ti" => Ok(ModelKind::Ti),
            "tite" => Ok(ModelKind::TiTe),
            "titeth" => Ok(ModelKind::TiTeTh),
            other => Err(format!("unknown model kind `{other}`")),
        }
    }
}

/// Name of a thermal parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ParamName {
    Ria,
    Rie,
    Rea,
    Rih,
    Ci,
    Ce,
    Ch,
    Aw,
    /// Envelope solar aperture; typed but unused by the in-scope kinds.
    Ae,
    /// Multiplier applied to a binary HVAC signal (kW).
    HeaterScale,
    SigmaI,
    SigmaE,
    SigmaH,
    SigmaObs,
}

impl ParamName {
    pub const ALL: [ParamName; 14] = [
        ParamName::Ria,
        ParamName::Rie,
        ParamName::Rea,
        ParamName::Rih,
        ParamName::Ci,
        ParamName::Ce,
        ParamName::Ch,
        ParamName::Aw,
        ParamName::Ae,
        ParamName::HeaterScale,
        ParamName::SigmaI,
        ParamName::SigmaE,
        ParamName::SigmaH,
        ParamName::SigmaObs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ParamName::Ria => "R_ia",
            ParamName::Rie => "R_ie",
            ParamName::Rea => "R_ea",
            ParamName::Rih => "R_ih",
            ParamName::Ci => "C_i",
            ParamName::Ce => "C_e",
            ParamName::Ch => "C_h",
            ParamName::Aw => "A_w",
            ParamName::Ae => "A_e",
            ParamName::HeaterScale => "Phi_h",
            ParamName::SigmaI => "sigma_i",
            ParamName::SigmaE => "sigma_e",
            ParamName::SigmaH => "sigma_h",
            ParamName::SigmaObs => "sigma_obs",
        }
    }

    pub fn is_resistance(self) -> bool {
        matches!(
            self,
            ParamName::Ria | ParamName::Rie | ParamName::Rea | ParamName::Rih
        )
    }

    pub fn is_capacitance(self) -> bool {
        matches!(self, ParamName::Ci | ParamName::Ce | ParamName::Ch)
    }

    pub fn is_noise(self) -> bool {
        matches!(
            self,
            ParamName::SigmaI | ParamName::SigmaE | ParamName::SigmaH | ParamName::SigmaObs
        )
    }
}

impl fmt::Display for ParamName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ParamName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ParamName::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| format!("unknown parameter `{s}`"))
    }
}

/// Physical and noise parameters of a thermal model.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalParams<T = f64> {
    pub values: BTreeMap<ParamName, T>,
}

impl<T: Scalar> Default for ThermalParams<T> {
    fn default() -> Self {
        ThermalParams {
            values: BTreeMap::new(),
        }
    }
}

impl<T: Scalar> ThermalParams<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: ParamName, value: T) -> Self {
        self.values.insert(name, value);
        self
    }

    pub fn set(&mut self, name: ParamName, value: T) {
        self.values.insert(name, value);
    }

    pub fn get(&self, name: ParamName) -> Result<T, ModelError> {
        self.values
            .get(&name)
            .copied()
            .ok_or_else(|| ModelError::MissingParameter(name.to_string()))
    }

    /// Heater multiplier, 1 when absent.
    pub fn heater_scale(&self) -> T {
        self.values
            .get(&ParamName::HeaterScale)
            .copied()
            .unwrap_or_else(|| T::constant(1.0))
    }

    pub fn to_f64(&self) -> ThermalParams<f64> {
        ThermalParams {
            values: self.values.iter().map(|(k, v)| (*k, v.value())).collect(),
        }
    }
}

impl ThermalParams<f64> {
    pub fn ti(r_ia: f64, c_i: f64, a_w: f64) -> Self {
        Self::new()
            .with(ParamName::Ria, r_ia)
            .with(ParamName::Ci, c_i)
            .with(ParamName::Aw, a_w)
    }

    pub fn tite(r_ie: f64, r_ea: f64, c_i: f64, c_e: f64, a_w: f64) -> Self {
        Self::new()
            .with(ParamName::Rie, r_ie)
            .with(ParamName::Rea, r_ea)
            .with(ParamName::Ci, c_i)
            .with(ParamName::Ce, c_e)
            .with(ParamName::Aw, a_w)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn titeth(
        r_ie: f64,
        r_ea: f64,
        r_ih: f64,
        c_i: f64,
        c_e: f64,
        c_h: f64,
        a_w: f64,
    ) -> Self {
        Self::tite(r_ie, r_ea, c_i, c_e, a_w)
            .with(ParamName::Rih, r_ih)
            .with(ParamName::Ch, c_h)
    }

    /// Sets one process noise scale for every state plus the observation noise.
    pub fn with_noise(mut self, kind: ModelKind, process: f64, observation: f64) -> Self {
        for name in kind.process_noise_names() {
            self.values.insert(*name, process);
        }
        self.values.insert(ParamName::SigmaObs, observation);
        self
    }

    /// Checks presence, finiteness and sign of every parameter `kind` needs.
    ///
    /// Resistances, capacitances and the heater multiplier must be strictly
    /// positive; apertures and noise scales nonnegative. Missing noise scales
    /// are read as zero.
    pub fn validate(&self, kind: ModelKind) -> Result<(), ModelError> {
        for name in kind.parameter_names() {
            let v = self.get(*name)?;
            let ok = if *name == ParamName::Aw {
                v >= 0.0
            } else {
                v > 0.0
            };
            if !ok || !v.is_finite() {
                return Err(ModelError::NonPositiveParameter {
                    name: *name,
                    value: v,
                });
            }
        }
        for (name, v) in &self.values {
            let ok = match name {
                ParamName::HeaterScale => *v > 0.0,
                _ if name.is_noise() || *name == ParamName::Ae => *v >= 0.0,
                _ => true,
            };
            if !ok || !v.is_finite() {
                return Err(ModelError::NonPositiveParameter {
                    name: *name,
                    value: *v,
                });
            }
        }
        Ok(())
    }
}

/// Discrete-time linear Gaussian realization of a thermal model.
#[derive(Debug, Clone, PartialEq)]
pub struct StateSpaceMatrices<T = f64> {
    /// D×D transition.
    pub a: Mat<T>,
    /// D×3 input matrix for `[Ta, Φ_h, Φ_s]`.
    pub b: Mat<T>,
    /// Observation row (length D).
    pub c_obs: Vec<f64>,
    /// D×D diagonal process covariance.
    pub q: Mat<T>,
    pub r_obs: T,
    pub dt: f64,
}

impl<T: Scalar> StateSpaceMatrices<T> {
    pub fn state_dim(&self) -> usize {
        self.a.rows
    }

    pub fn to_f64(&self) -> StateSpaceMatrices<f64> {
        StateSpaceMatrices {
            a: self.a.values(),
            b: self.b.values(),
            c_obs: self.c_obs.clone(),
            q: self.q.values(),
            r_obs: self.r_obs.value(),
            dt: self.dt,
        }
    }

    /// `A x + B u`.
    pub fn propagate(&self, x: &[T], u: [f64; INPUT_DIM]) -> Vec<T> {
        let mut next = self.a.matvec(x);
        for (i, xi) in next.iter_mut().enumerate() {
            for (j, uj) in u.iter().enumerate() {
                if *uj != 0.0 {
                    *xi += self.b[(i, j)] * *uj;
                }
            }
        }
        next
    }

    pub fn observe(&self, x: &[T]) -> T {
        let mut acc = T::zero();
        for (c, xi) in self.c_obs.iter().zip(x) {
            if *c != 0.0 {
                acc += *xi * *c;
            }
        }
        acc
    }
}

fn observation_row(d: usize) -> Vec<f64> {
    let mut c = vec![0.0; d];
    c[0] = 1.0;
    c
}

/// Assembles the matrices without validating parameter signs or stability.
///
/// Density evaluation uses this directly since its transforms already keep
/// parameters positive; [`build_matrices`] is the checked entry point.
pub fn assemble_matrices<T: Scalar>(
    kind: ModelKind,
    p: &ThermalParams<T>,
    dt: f64,
) -> Result<StateSpaceMatrices<T>, ModelError> {
    use ParamName::*;
    let d = kind.state_dim();
    let zero = T::zero();
    let one = T::constant(1.0);
    let heat = p.heater_scale();
    let sigma = |name: ParamName| p.values.get(&name).copied().unwrap_or(zero);
    let inv_rc = |r: ParamName, c: ParamName| -> Result<T, ModelError> {
        Ok((p.get(r)? * p.get(c)?).recip_scaled(dt))
    };

    let (a, b) = match kind {
        ModelKind::Ti => {
            let k = inv_rc(Ria, Ci)?;
            let inv_c = p.get(Ci)?.recip_scaled(dt);
            let a = Mat::from_rows(vec![vec![k.rsub(1.0)]]);
            let b = Mat::from_rows(vec![vec![k, inv_c * heat, inv_c * p.get(Aw)?]]);
            (a, b)
        }
        ModelKind::TiTe => {
            let k_ie_i = inv_rc(Rie, Ci)?;
            let k_ie_e = inv_rc(Rie, Ce)?;
            let k_ea_e = inv_rc(Rea, Ce)?;
            let inv_ci = p.get(Ci)?.recip_scaled(dt);
            let a = Mat::from_rows(vec![
                vec![k_ie_i.rsub(1.0), k_ie_i],
                vec![k_ie_e, one - k_ie_e - k_ea_e],
            ]);
            let b = Mat::from_rows(vec![
                vec![zero, inv_ci * heat, inv_ci * p.get(Aw)?],
                vec![k_ea_e, zero, zero],
            ]);
            (a, b)
        }
        ModelKind::TiTeTh => {
            let k_ie_i = inv_rc(Rie, Ci)?;
            let k_ih_i = inv_rc(Rih, Ci)?;
            let k_ie_e = inv_rc(Rie, Ce)?;
            let k_ea_e = inv_rc(Rea, Ce)?;
            let k_ih_h = inv_rc(Rih, Ch)?;
            let inv_ci = p.get(Ci)?.recip_scaled(dt);
            let inv_ch = p.get(Ch)?.recip_scaled(dt);
            let a = Mat::from_rows(vec![
                vec![one - k_ie_i - k_ih_i, k_ie_i, k_ih_i],
                vec![k_ie_e, one - k_ie_e - k_ea_e, zero],
                vec![k_ih_h, zero, k_ih_h.rsub(1.0)],
            ]);
            let b = Mat::from_rows(vec![
                vec![zero, zero, inv_ci * p.get(Aw)?],
                vec![k_ea_e, zero, zero],
                vec![zero, inv_ch * heat, zero],
            ]);
            (a, b)
        }
    };

    let q_diag: Vec<T> = kind
        .process_noise_names()
        .iter()
        .map(|n| sigma(*n).square())
        .collect();
    Ok(StateSpaceMatrices {
        a,
        b,
        c_obs: observation_row(d),
        q: Mat::diag(&q_diag),
        r_obs: sigma(SigmaObs).square(),
        dt,
    })
}

/// Converts physical parameters into a checked discrete state-space model.
pub fn build_matrices(
    kind: ModelKind,
    params: &ThermalParams<f64>,
    dt: f64,
) -> Result<StateSpaceMatrices<f64>, ModelError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(ModelError::InvalidStep(dt));
    }
    params.validate(kind)?;
    let m = assemble_matrices(kind, params, dt)?;
    for i in 0..m.state_dim() {
        let v = m.a[(i, i)];
        if v < 0.0 {
            return Err(ModelError::UnstableDiscretization { index: i, value: v });
        }
    }
    Ok(m)
}

/// Exogenous driver series `[Ta, Φ_h, Φ_s]`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Exogenous {
    pub ta: Vec<f64>,
    pub phi_h: Vec<f64>,
    pub phi_s: Vec<f64>,
}

impl Exogenous {
    pub fn new(ta: Vec<f64>, phi_h: Vec<f64>, phi_s: Vec<f64>) -> Result<Self, ModelError> {
        if ta.len() != phi_h.len() || ta.len() != phi_s.len() {
            return Err(ModelError::DimensionMismatch(format!(
                "exogenous lengths differ: ta={}, phi_h={}, phi_s={}",
                ta.len(),
                phi_h.len(),
                phi_s.len()
            )));
        }
        Ok(Exogenous { ta, phi_h, phi_s })
    }

    pub fn constant(n: usize, ta: f64, phi_h: f64, phi_s: f64) -> Self {
        Exogenous {
            ta: vec![ta; n],
            phi_h: vec![phi_h; n],
            phi_s: vec![phi_s; n],
        }
    }

    pub fn len(&self) -> usize {
        self.ta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ta.is_empty()
    }

    pub fn at(&self, n: usize) -> [f64; INPUT_DIM] {
        [self.ta[n], self.phi_h[n], self.phi_s[n]]
    }
}

/// Regularly sampled indoor temperature with its drivers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeriesDataset {
    /// Seconds since the Unix epoch (or any common origin).
    pub timestamps: Vec<f64>,
    /// Sampling interval in hours.
    pub dt: f64,
    pub y: Vec<f64>,
    pub exo: Exogenous,
    /// `phi_h` is a signed on/off signal to be scaled by `Phi_h`.
    pub binary_hvac: bool,
}

impl TimeSeriesDataset {
    pub fn new(
        timestamps: Vec<f64>,
        y: Vec<f64>,
        exo: Exogenous,
        binary_hvac: bool,
    ) -> Result<Self, ModelError> {
        let n = y.len();
        if n < 2 {
            return Err(ModelError::InvalidDataset(format!(
                "need at least 2 samples, got {n}"
            )));
        }
        if timestamps.len() != n || exo.len() != n {
            return Err(ModelError::InvalidDataset(format!(
                "series lengths differ: y={n}, time={}, exogenous={}",
                timestamps.len(),
                exo.len()
            )));
        }
        let all_finite = y
            .iter()
            .chain(&timestamps)
            .chain(&exo.ta)
            .chain(&exo.phi_h)
            .chain(&exo.phi_s)
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(ModelError::InvalidDataset("missing or non-finite values".into()));
        }
        let step = timestamps[1] - timestamps[0];
        if step <= 0.0 {
            return Err(ModelError::InvalidDataset(
                "timestamps must be strictly increasing".into(),
            ));
        }
        for (i, w) in timestamps.windows(2).enumerate() {
            let s = w[1] - w[0];
            if (s - step).abs() > 1e-9 * step {
                return Err(ModelError::InvalidDataset(format!(
                    "non-uniform sampling at row {}: step {s} s vs {step} s",
                    i + 1
                )));
            }
        }
        Ok(TimeSeriesDataset {
            timestamps,
            dt: step / 3600.0,
            y,
            exo,
            binary_hvac,
        })
    }

    /// Builds a dataset on a synthetic hourly-scaled time axis starting at 0.
    pub fn from_series(
        dt_hours: f64,
        y: Vec<f64>,
        exo: Exogenous,
        binary_hvac: bool,
    ) -> Result<Self, ModelError> {
        if !(dt_hours > 0.0 && dt_hours.is_finite()) {
            return Err(ModelError::InvalidStep(dt_hours));
        }
        let timestamps = (0..y.len()).map(|i| i as f64 * dt_hours * 3600.0).collect();
        let mut ds = Self::new(timestamps, y, exo, binary_hvac)?;
        ds.dt = dt_hours;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// First `n` rows (or all when shorter).
    pub fn take(&self, n: usize) -> Result<Self, ModelError> {
        let n = n.min(self.len());
        let mut out = Self::new(
            self.timestamps[..n].to_vec(),
            self.y[..n].to_vec(),
            Exogenous {
                ta: self.exo.ta[..n].to_vec(),
                phi_h: self.exo.phi_h[..n].to_vec(),
                phi_s: self.exo.phi_s[..n].to_vec(),
            },
            self.binary_hvac,
        )?;
        out.dt = self.dt;
        Ok(out)
    }

    /// Rows `start..end` as a new dataset.
    pub fn slice(&self, start: usize, end: usize) -> Result<Self, ModelError> {
        let mut out = Self::new(
            self.timestamps[start..end].to_vec(),
            self.y[start..end].to_vec(),
            Exogenous {
                ta: self.exo.ta[start..end].to_vec(),
                phi_h: self.exo.phi_h[start..end].to_vec(),
                phi_s: self.exo.phi_s[start..end].to_vec(),
            },
            self.binary_hvac,
        )?;
        out.dt = self.dt;
        Ok(out)
    }
}

/// Simulated trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    /// N×D states.
    pub states: Vec<Vec<f64>>,
    pub observations: Vec<f64>,
}

/// Runs the state-space recursion `x_n = A x_{n-1} + B u_n (+ w_n)`,
/// `y_n = C x_n (+ v_n)` with `x_0 = x0`.
///
/// Noise draws come from a ChaCha stream seeded with `seed`.
pub fn simulate(
    mats: &StateSpaceMatrices<f64>,
    inputs: &Exogenous,
    x0: &[f64],
    seed: u64,
    with_noise: bool,
) -> Result<Simulation, ModelError> {
    let d = mats.state_dim();
    if x0.len() != d {
        return Err(ModelError::DimensionMismatch(format!(
            "x0 has length {}, model has {d} states",
            x0.len()
        )));
    }
    let n = inputs.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q_sd: Vec<f64> = (0..d).map(|i| mats.q[(i, i)].max(0.0).sqrt()).collect();
    let r_sd = mats.r_obs.max(0.0).sqrt();

    let mut states = Vec::with_capacity(n);
    let mut observations = Vec::with_capacity(n);
    let mut x = x0.to_vec();
    for step in 0..n {
        if step > 0 {
            x = mats.propagate(&x, inputs.at(step));
            if with_noise {
                for (xi, sd) in x.iter_mut().zip(&q_sd) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *xi += sd * z;
                }
            }
        }
        let mut y = mats.observe(&x);
        if with_noise {
            let z: f64 = StandardNormal.sample(&mut rng);
            y += r_sd * z;
        }
        states.push(x.clone());
        observations.push(y);
    }
    Ok(Simulation {
        states,
        observations,
    })
}

/// Composite ambient-path resistance and total capacitance per draw.
///
/// Summing draw by draw realizes the density convolution of the component
/// parameters by Monte Carlo. The `TiTeTh` heater branch `R_ih` is not on the
/// ambient path and is excluded from the total resistance.
pub fn composite_rc(
    kind: ModelKind,
    samples: &PosteriorSamples,
) -> Result<(Vec<f64>, Vec<f64>), ModelError> {
    let sum_columns = |names: &[ParamName]| -> Result<Vec<f64>, ModelError> {
        let mut total: Option<Vec<f64>> = None;
        for name in names {
            let col = samples
                .column(name.as_str())
                .ok_or_else(|| ModelError::MissingParameter(name.to_string()))?;
            total = Some(match total {
                None => col,
                Some(t) => t.iter().zip(&col).map(|(a, b)| a + b).collect(),
            });
        }
        Ok(total.unwrap_or_default())
    };
    Ok((
        sum_columns(kind.ambient_path())?,
        sum_columns(kind.capacitances())?,
    ))
}
