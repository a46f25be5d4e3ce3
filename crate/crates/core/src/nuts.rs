//! No-U-Turn sampler with dual-averaging step size and diagonal mass adaptation.
//!
//! Trajectories are built by repeated doubling; the proposal is drawn
//! multinomially over the whole trajectory and doubling stops on the
//! generalized no-U-turn criterion, checked across every subtree boundary.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::density::LogDensity;
use crate::samples::{DrawStats, PosteriorSamples};

/// Energy error above which a transition is flagged divergent.
const MAX_DELTA_H: f64 = 1000.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NutsError {
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("chain {chain}: no finite starting point found ({reason})")]
    InitFailure { chain: usize, reason: String },
    #[error("non-finite gradient during integration")]
    NonFiniteGradient,
    #[error("step size adaptation failed: {0}")]
    StepSize(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassMatrix {
    Identity,
    Diagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NutsConfig {
    pub chains: usize,
    pub warmup: usize,
    pub draws: usize,
    pub target_accept: f64,
    pub max_tree_depth: u32,
    pub seed: u64,
    pub initial_step_size: f64,
    pub mass_matrix: MassMatrix,
    /// Starting point in unconstrained space; the origin when absent.
    pub init: Option<Vec<f64>>,
    /// Standard deviation of the per-chain jitter around the start.
    pub init_jitter: f64,
}

impl Default for NutsConfig {
    fn default() -> Self {
        NutsConfig {
            chains: 4,
            warmup: 5000,
            draws: 5000,
            target_accept: 0.8,
            max_tree_depth: 10,
            seed: 0,
            initial_step_size: 1.0,
            mass_matrix: MassMatrix::Diagonal,
            init: None,
            init_jitter: 0.1,
        }
    }
}

impl NutsConfig {
    pub fn validate(&self) -> Result<(), NutsError> {
        let bad = |m: &str| Err(NutsError::InvalidConfig(m.to_string()));
        if self.chains == 0 || self.draws == 0 {
            return bad("chains and draws must be at least 1");
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return bad("target acceptance must lie in (0, 1)");
        }
        if self.max_tree_depth == 0 {
            return bad("max tree depth must be at least 1");
        }
        if !(self.initial_step_size > 0.0 && self.initial_step_size.is_finite()) {
            return bad("initial step size must be positive");
        }
        if !(self.init_jitter >= 0.0) {
            return bad("jitter must be nonnegative");
        }
        Ok(())
    }
}

/// A point in phase space with its cached log-density and gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePoint {
    pub u: Vec<f64>,
    pub p: Vec<f64>,
    pub log_density: f64,
    pub grad: Vec<f64>,
}

impl PhasePoint {
    pub fn new<D: LogDensity + ?Sized>(target: &D, u: Vec<f64>, p: Vec<f64>) -> Result<Self, NutsError> {
        let g = target
            .log_density_grad(&u)
            .map_err(|_| NutsError::NonFiniteGradient)?;
        Ok(PhasePoint {
            u,
            p,
            log_density: g.value,
            grad: g.gradient,
        })
    }

    fn kinetic(&self, inv_mass: &[f64]) -> f64 {
        0.5 * self.p.iter().zip(inv_mass).map(|(p, m)| p * p * m).sum::<f64>()
    }

    fn hamiltonian(&self, inv_mass: &[f64]) -> f64 {
        -self.log_density + self.kinetic(inv_mass)
    }

    fn velocity(&self, inv_mass: &[f64]) -> Vec<f64> {
        self.p.iter().zip(inv_mass).map(|(p, m)| p * m).collect()
    }
}

/// One leapfrog step of size `eps` against `U(u) = -log_density(u)`.
pub fn leapfrog<D: LogDensity + ?Sized>(
    target: &D,
    z: &PhasePoint,
    eps: f64,
    inv_mass: &[f64],
) -> Result<PhasePoint, NutsError> {
    let half: Vec<f64> = z.p.iter().zip(&z.grad).map(|(p, g)| p + 0.5 * eps * g).collect();
    let u: Vec<f64> = z
        .u
        .iter()
        .zip(&half)
        .zip(inv_mass)
        .map(|((u, p), m)| u + eps * m * p)
        .collect();
    let g = target
        .log_density_grad(&u)
        .map_err(|_| NutsError::NonFiniteGradient)?;
    if !g.value.is_finite() {
        return Err(NutsError::NonFiniteGradient);
    }
    let p = half.iter().zip(&g.gradient).map(|(p, g)| p + 0.5 * eps * g).collect();
    Ok(PhasePoint {
        u,
        p,
        log_density: g.value,
        grad: g.gradient,
    })
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn no_u_turn(p_sharp_minus: &[f64], p_sharp_plus: &[f64], rho: &[f64]) -> bool {
    dot(p_sharp_plus, rho) > 0.0 && dot(p_sharp_minus, rho) > 0.0
}

/// Boundary quantities of a (sub)trajectory, in integration order.
struct Edge {
    p_sharp_beg: Vec<f64>,
    p_sharp_end: Vec<f64>,
    p_beg: Vec<f64>,
    p_end: Vec<f64>,
}

struct Transition<'a, D: ?Sized> {
    target: &'a D,
    eps: f64,
    inv_mass: &'a [f64],
    h0: f64,
    n_leapfrog: u32,
    sum_metro: f64,
    divergent: bool,
}

impl<D: LogDensity + ?Sized> Transition<'_, D> {
    /// Extends the trajectory from `z` by `2^depth` steps in direction `sign`.
    /// Returns `None` when the subtree diverged or turned.
    fn build_tree(
        &mut self,
        depth: u32,
        z: &mut PhasePoint,
        sign: f64,
        rng: &mut ChaCha8Rng,
    ) -> Option<(Edge, Vec<f64>, f64, PhasePoint)> {
        if depth == 0 {
            let next = match leapfrog(self.target, z, sign * self.eps, self.inv_mass) {
                Ok(n) => n,
                Err(_) => {
                    self.n_leapfrog += 1;
                    self.divergent = true;
                    return None;
                }
            };
            self.n_leapfrog += 1;
            let mut h = next.hamiltonian(self.inv_mass);
            if h.is_nan() {
                h = f64::INFINITY;
            }
            if h - self.h0 > MAX_DELTA_H {
                self.divergent = true;
            }
            let log_w = self.h0 - h;
            self.sum_metro += if log_w > 0.0 { 1.0 } else { log_w.exp() };
            *z = next;
            if self.divergent {
                return None;
            }
            let p_sharp = z.velocity(self.inv_mass);
            let edge = Edge {
                p_sharp_beg: p_sharp.clone(),
                p_sharp_end: p_sharp,
                p_beg: z.p.clone(),
                p_end: z.p.clone(),
            };
            return Some((edge, z.p.clone(), log_w, z.clone()));
        }

        let (left, rho_left, lw_left, prop_left) = self.build_tree(depth - 1, z, sign, rng)?;
        let (right, rho_right, lw_right, prop_right) = self.build_tree(depth - 1, z, sign, rng)?;

        let lw = log_sum_exp(lw_left, lw_right);
        let proposal = if lw_right > lw || rng.random::<f64>() < (lw_right - lw).exp() {
            prop_right
        } else {
            prop_left
        };
        let rho = add(&rho_left, &rho_right);
        let mut persist = no_u_turn(&left.p_sharp_beg, &right.p_sharp_end, &rho);
        persist &= no_u_turn(&left.p_sharp_beg, &right.p_sharp_beg, &add(&rho_left, &right.p_beg));
        persist &= no_u_turn(&left.p_sharp_end, &right.p_sharp_end, &add(&rho_right, &left.p_end));
        if !persist {
            return None;
        }
        let edge = Edge {
            p_sharp_beg: left.p_sharp_beg,
            p_sharp_end: right.p_sharp_end,
            p_beg: left.p_beg,
            p_end: right.p_end,
        };
        Some((edge, rho, lw, proposal))
    }
}

/// One NUTS transition from `z0`.
fn transition<D: LogDensity + ?Sized>(
    target: &D,
    z0: &PhasePoint,
    eps: f64,
    inv_mass: &[f64],
    max_depth: u32,
    rng: &mut ChaCha8Rng,
) -> (PhasePoint, DrawStats) {
    let mut z = z0.clone();
    z.p = inv_mass
        .iter()
        .map(|m| {
            let n: f64 = StandardNormal.sample(rng);
            n / m.sqrt()
        })
        .collect();
    let mut tr = Transition {
        target,
        eps,
        inv_mass,
        h0: z.hamiltonian(inv_mass),
        n_leapfrog: 0,
        sum_metro: 0.0,
        divergent: false,
    };

    let p_sharp = z.velocity(inv_mass);
    // backward edge of the whole trajectory and forward edge
    let mut bck = Edge {
        p_sharp_beg: p_sharp.clone(),
        p_sharp_end: p_sharp.clone(),
        p_beg: z.p.clone(),
        p_end: z.p.clone(),
    };
    let mut fwd = Edge {
        p_sharp_beg: p_sharp.clone(),
        p_sharp_end: p_sharp,
        p_beg: z.p.clone(),
        p_end: z.p.clone(),
    };
    let mut z_fwd = z.clone();
    let mut z_bck = z.clone();
    let mut sample = z.clone();
    let mut rho = z.p.clone();
    let mut log_w = 0.0;
    let mut depth = 0;

    while depth < max_depth {
        let forward = rng.random::<f64>() > 0.5;
        let (rho_fwd, rho_bck, lw_sub, proposal);
        if forward {
            let Some((edge, r, lw, prop)) = tr.build_tree(depth, &mut z_fwd, 1.0, rng) else {
                break;
            };
            // the old trajectory becomes the backward half
            bck = Edge {
                p_sharp_beg: bck.p_sharp_beg,
                p_sharp_end: fwd.p_sharp_end.clone(),
                p_beg: bck.p_beg,
                p_end: fwd.p_end.clone(),
            };
            fwd = edge;
            rho_bck = rho.clone();
            rho_fwd = r;
            lw_sub = lw;
            proposal = prop;
        } else {
            let Some((edge, r, lw, prop)) = tr.build_tree(depth, &mut z_bck, -1.0, rng) else {
                break;
            };
            // built backwards in time: its "begin" is nearest the old trajectory
            fwd = Edge {
                p_sharp_beg: bck.p_sharp_beg.clone(),
                p_sharp_end: fwd.p_sharp_end,
                p_beg: bck.p_beg.clone(),
                p_end: fwd.p_end,
            };
            bck = Edge {
                p_sharp_beg: edge.p_sharp_end,
                p_sharp_end: edge.p_sharp_beg,
                p_beg: edge.p_end,
                p_end: edge.p_beg,
            };
            rho_fwd = rho.clone();
            rho_bck = r;
            lw_sub = lw;
            proposal = prop;
        }
        depth += 1;
        if lw_sub > log_w || rng.random::<f64>() < (lw_sub - log_w).exp() {
            sample = proposal;
        }
        log_w = log_sum_exp(log_w, lw_sub);
        rho = add(&rho_bck, &rho_fwd);
        // full trajectory and the two cross-boundary checks
        let mut persist = no_u_turn(&bck.p_sharp_beg, &fwd.p_sharp_end, &rho);
        persist &= no_u_turn(&bck.p_sharp_beg, &fwd.p_sharp_beg, &add(&rho_bck, &fwd.p_beg));
        persist &= no_u_turn(&bck.p_sharp_end, &fwd.p_sharp_end, &add(&rho_fwd, &bck.p_end));
        if !persist {
            break;
        }
    }

    let stats = DrawStats {
        tree_depth: depth,
        divergent: tr.divergent,
        accept_stat: if tr.n_leapfrog > 0 {
            tr.sum_metro / tr.n_leapfrog as f64
        } else {
            0.0
        },
        step_size: eps,
        n_leapfrog: tr.n_leapfrog,
    };
    (sample, stats)
}

/// Dual-averaging step-size controller.
#[derive(Debug, Clone)]
struct DualAveraging {
    mu: f64,
    s_bar: f64,
    x_bar: f64,
    counter: f64,
    delta: f64,
}

impl DualAveraging {
    const GAMMA: f64 = 0.05;
    const T0: f64 = 10.0;
    const KAPPA: f64 = 0.75;

    fn new(eps: f64, delta: f64) -> Self {
        DualAveraging {
            mu: (10.0 * eps).ln(),
            s_bar: 0.0,
            x_bar: 0.0,
            counter: 0.0,
            delta,
        }
    }

    /// Returns the next step size to try.
    fn update(&mut self, accept: f64) -> f64 {
        self.counter += 1.0;
        let accept = accept.min(1.0);
        let eta = 1.0 / (self.counter + Self::T0);
        self.s_bar = (1.0 - eta) * self.s_bar + eta * (self.delta - accept);
        let x = self.mu - self.s_bar * self.counter.sqrt() / Self::GAMMA;
        let w = self.counter.powf(-Self::KAPPA);
        self.x_bar = (1.0 - w) * self.x_bar + w * x;
        x.exp()
    }

    fn final_step(&self) -> f64 {
        self.x_bar.exp()
    }
}

/// Doubles or halves `eps` until a single leapfrog step crosses 0.8 acceptance.
fn reasonable_step<D: LogDensity + ?Sized>(
    target: &D,
    z: &PhasePoint,
    mut eps: f64,
    inv_mass: &[f64],
    rng: &mut ChaCha8Rng,
) -> f64 {
    let log_target = 0.8f64.ln();
    let mut direction = 0.0;
    for _ in 0..100 {
        let mut z0 = z.clone();
        z0.p = inv_mass
            .iter()
            .map(|m| {
                let n: f64 = StandardNormal.sample(rng);
                n / m.sqrt()
            })
            .collect();
        let h0 = z0.hamiltonian(inv_mass);
        let delta_h = match leapfrog(target, &z0, eps, inv_mass) {
            Ok(z1) => {
                let h = z1.hamiltonian(inv_mass);
                if h.is_nan() { f64::NEG_INFINITY } else { h0 - h }
            }
            Err(_) => f64::NEG_INFINITY,
        };
        if direction == 0.0 {
            direction = if delta_h > log_target { 1.0 } else { -1.0 };
        }
        if direction > 0.0 && !(delta_h > log_target) {
            break;
        }
        if direction < 0.0 && !(delta_h < log_target) {
            break;
        }
        eps = if direction > 0.0 { eps * 2.0 } else { eps * 0.5 };
        if !(1e-12..=1e7).contains(&eps) {
            break;
        }
    }
    eps.clamp(1e-12, 1e7)
}

fn initial_point<D: LogDensity + ?Sized>(
    target: &D,
    config: &NutsConfig,
    chain: usize,
    rng: &mut ChaCha8Rng,
) -> Result<PhasePoint, NutsError> {
    let dim = target.dim();
    let base = config.init.clone().unwrap_or_else(|| vec![0.0; dim]);
    if base.len() != dim {
        return Err(NutsError::InvalidConfig(format!(
            "init has length {}, target has dimension {dim}",
            base.len()
        )));
    }
    let mut last = String::from("no attempt");
    for _ in 0..100 {
        let u: Vec<f64> = base
            .iter()
            .map(|b| {
                let n: f64 = StandardNormal.sample(rng);
                b + config.init_jitter * n
            })
            .collect();
        match PhasePoint::new(target, u, vec![0.0; dim]) {
            Ok(z) if z.log_density.is_finite() && z.grad.iter().all(|g| g.is_finite()) => return Ok(z),
            Ok(z) => last = format!("log density {}", z.log_density),
            Err(e) => last = e.to_string(),
        }
    }
    Err(NutsError::InitFailure { chain, reason: last })
}

/// Streaming mean/variance.
#[derive(Debug, Clone)]
struct Welford {
    n: f64,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl Welford {
    fn new(dim: usize) -> Self {
        Welford {
            n: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    fn push(&mut self, x: &[f64]) {
        self.n += 1.0;
        for i in 0..x.len() {
            let d = x[i] - self.mean[i];
            self.mean[i] += d / self.n;
            self.m2[i] += d * (x[i] - self.mean[i]);
        }
    }

    /// Variance shrunk toward 1e-3 as in common practice for small windows.
    fn regularized_variance(&self) -> Vec<f64> {
        let n = self.n;
        self.m2
            .iter()
            .map(|m2| {
                let var = m2 / (n - 1.0);
                (n / (n + 5.0)) * var + 1e-3 * (5.0 / (n + 5.0))
            })
            .collect()
    }
}

struct ChainOutput {
    draws: Vec<Vec<f64>>,
    stats: Vec<DrawStats>,
}

fn run_chain<D: LogDensity + ?Sized>(target: &D, config: &NutsConfig, chain: usize) -> Result<ChainOutput, NutsError> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(chain as u64));
    let dim = target.dim();
    let mut z = initial_point(target, config, chain, &mut rng)?;
    let mut inv_mass = vec![1.0; dim];
    let warmup = config.warmup;
    let mut eps = if warmup > 0 {
        reasonable_step(target, &z, config.initial_step_size, &inv_mass, &mut rng)
    } else {
        config.initial_step_size
    };
    let mut da = DualAveraging::new(eps, config.target_accept);

    // mass matrix estimated on [window_start, window_end), step size
    // re-tuned for the remaining warmup
    let adapt_mass = config.mass_matrix == MassMatrix::Diagonal && warmup >= 20;
    let window_start = warmup / 2;
    let window_end = warmup * 4 / 5;
    let mut welford = Welford::new(dim);

    for it in 0..warmup {
        let (next, stats) = transition(target, &z, eps, &inv_mass, config.max_tree_depth, &mut rng);
        z = next;
        eps = da.update(stats.accept_stat);
        if adapt_mass {
            if it >= window_start && it < window_end {
                welford.push(&z.u);
            }
            if it + 1 == window_end && welford.n >= 3.0 {
                inv_mass = welford.regularized_variance();
                eps = reasonable_step(target, &z, da.final_step(), &inv_mass, &mut rng);
                da = DualAveraging::new(eps, config.target_accept);
            }
        }
    }
    if warmup > 0 {
        eps = da.final_step();
    }

    let mut draws = Vec::with_capacity(config.draws);
    let mut stats_out = Vec::with_capacity(config.draws);
    for _ in 0..config.draws {
        let (next, stats) = transition(target, &z, eps, &inv_mass, config.max_tree_depth, &mut rng);
        z = next;
        draws.push(target.constrain(&z.u));
        stats_out.push(stats);
    }
    Ok(ChainOutput {
        draws,
        stats: stats_out,
    })
}

/// Runs `config.chains` independent chains in parallel and returns the
/// post-warmup draws in constrained space.
pub fn sample<D: LogDensity + ?Sized>(target: &D, config: &NutsConfig) -> Result<PosteriorSamples, NutsError> {
    config.validate()?;
    let outputs: Vec<Result<ChainOutput, NutsError>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..config.chains)
            .map(|c| s.spawn(move || run_chain(target, config, c)))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sampler thread panicked"))
            .collect()
    });
    let bounds = target.bounds();
    let mut draws = Vec::with_capacity(config.chains);
    let mut stats = Vec::with_capacity(config.chains);
    for out in outputs {
        let out = out?;
        debug_assert!(out
            .draws
            .iter()
            .all(|d| d.iter().zip(&bounds).all(|(v, (lo, hi))| *v >= *lo && *v <= *hi)));
        draws.push(out.draws);
        stats.push(out.stats);
    }
    Ok(PosteriorSamples {
        names: target.names(),
        draws,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::{IndependentTarget, PriorSpec, Transform};
    use approx::assert_relative_eq;

    fn normal1() -> IndependentTarget {
        IndependentTarget::standard_normal(1)
    }

    #[test]
    fn leapfrog_hand_arithmetic() {
        let t = normal1();
        let z = PhasePoint::new(&t, vec![0.0], vec![1.0]).unwrap();
        let z1 = leapfrog(&t, &z, 0.1, &[1.0]).unwrap();
        assert_relative_eq!(z1.u[0], 0.1, epsilon = 1e-15);
        assert_relative_eq!(z1.p[0], 0.995, epsilon = 1e-15);
        let same = leapfrog(&t, &z, 0.0, &[1.0]).unwrap();
        assert_eq!(same.u, z.u);
        assert_eq!(same.p, z.p);
    }

    // Exact flow of H = (u² + p²)/2 is a rotation.
    #[test]
    fn harmonic_flow() {
        let t = normal1();
        let mut z = PhasePoint::new(&t, vec![1.0], vec![0.0]).unwrap();
        let h0 = z.hamiltonian(&[1.0]);
        for k in 1..=100 {
            z = leapfrog(&t, &z, 0.01, &[1.0]).unwrap();
            let time = 0.01 * k as f64;
            assert!((z.u[0] - time.cos()).abs() < 1e-2);
            assert!((z.p[0] + time.sin()).abs() < 1e-2);
        }
        assert!((z.hamiltonian(&[1.0]) - h0).abs() < 1e-3);
    }

    fn quick(seed: u64) -> NutsConfig {
        NutsConfig {
            warmup: 1000,
            draws: 1000,
            seed,
            ..NutsConfig::default()
        }
    }

    #[test]
    fn standard_normal_10d_moments() {
        let t = IndependentTarget::standard_normal(10);
        let s = sample(&t, &quick(1)).unwrap();
        assert_eq!((s.n_chains(), s.n_draws(), s.dim()), (4, 1000, 10));
        for name in &s.names {
            let col = s.column(name).unwrap();
            let mean = col.iter().sum::<f64>() / col.len() as f64;
            let var = col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (col.len() - 1) as f64;
            assert!(mean.abs() < 0.1, "{name} mean {mean}");
            assert!((0.8..1.2).contains(&var), "{name} var {var}");
            let rhat = crate::diagnostics::gelman_rubin(&s.chain_columns(name).unwrap(), false).unwrap();
            assert!(rhat < 1.05, "{name} rhat {rhat}");
        }
        assert!((s.divergence_count() as f64) < 0.01 * s.total_draws() as f64);
    }

    #[test]
    fn gamma_under_log_transform() {
        let t = IndependentTarget::new(vec![(
            "g",
            PriorSpec::Gamma { shape: 2.0, rate: 1.0 },
            Transform::Log,
        )]);
        let s = sample(&t, &quick(2)).unwrap();
        let col = s.column("g").unwrap();
        assert!(col.iter().all(|v| *v > 0.0));
        let mean = col.iter().sum::<f64>() / col.len() as f64;
        assert!((mean - 2.0).abs() < 0.1, "mean {mean}");
    }

    #[test]
    fn ks_against_normal_cdf() {
        use statrs::distribution::{ContinuousCDF, Normal};
        let s = sample(&normal1(), &quick(3)).unwrap();
        let mut col = s.column("x0").unwrap();
        assert_eq!(col.len(), 4000);
        col.sort_by(f64::total_cmp);
        let n = col.len() as f64;
        let nd = Normal::new(0.0, 1.0).unwrap();
        let ks = col
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let f = nd.cdf(*x);
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.05, "KS {ks}");
    }

    #[test]
    fn deterministic_given_seed() {
        let t = IndependentTarget::standard_normal(3);
        let cfg = NutsConfig {
            warmup: 100,
            draws: 50,
            ..quick(9)
        };
        let a = sample(&t, &cfg).unwrap();
        let b = sample(&t, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn adapted_step_hits_target_acceptance() {
        let t = IndependentTarget::standard_normal(5);
        let s = sample(&t, &quick(4)).unwrap();
        let acc: f64 = s.stats.iter().flatten().map(|d| d.accept_stat).sum::<f64>() / s.total_draws() as f64;
        assert!((0.65..0.95).contains(&acc), "mean acceptance {acc}");
    }

    #[test]
    fn rejects_bad_config() {
        let t = normal1();
        for cfg in [
            NutsConfig { chains: 0, ..NutsConfig::default() },
            NutsConfig { target_accept: 1.0, ..NutsConfig::default() },
            NutsConfig { init: Some(vec![0.0, 0.0]), warmup: 1, draws: 1, ..NutsConfig::default() },
        ] {
            assert!(sample(&t, &cfg).is_err());
        }
    }
}
