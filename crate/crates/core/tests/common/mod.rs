#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thermal_bayes::autodiff::finite_difference;
use thermal_bayes::density::{default_layout, LogDensity, ModelTarget, PriorRegime};
use thermal_bayes::filtering::kalman_loglik;
use thermal_bayes::linalg::Mat;
use thermal_bayes::thermal::{
    build_matrices, Exogenous, ModelKind, ParamName, StateSpaceMatrices, ThermalParams, TimeSeriesDataset,
};

/// Log-density of `N(mean, cov)` at `x` by an in-place Cholesky factorization.
pub fn mvn_logpdf(x: &[f64], mean: &[f64], cov: &[Vec<f64>]) -> f64 {
    let n = x.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = cov[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                assert!(s > 0.0, "covariance not positive definite");
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    // solve L z = x - mean
    let mut z = vec![0.0; n];
    for i in 0..n {
        let mut s = x[i] - mean[i];
        for k in 0..i {
            s -= l[i][k] * z[k];
        }
        z[i] = s / l[i][i];
    }
    let logdet: f64 = (0..n).map(|i| 2.0 * l[i][i].ln()).sum();
    -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + z.iter().map(|v| v * v).sum::<f64>())
}

/// Random physically plausible parameters with positive noise scales.
pub fn random_params(kind: ModelKind, rng: &mut ChaCha8Rng) -> ThermalParams {
    let mut p = ThermalParams::new();
    for name in kind.parameter_names() {
        let v = if name.is_resistance() {
            rng.random_range(2.0..10.0)
        } else if *name == ParamName::Ch {
            rng.random_range(1.0..3.0)
        } else if name.is_capacitance() {
            rng.random_range(10.0..40.0)
        } else {
            rng.random_range(0.5..8.0)
        };
        p.set(*name, v);
    }
    for name in kind.process_noise_names() {
        p.set(*name, rng.random_range(0.05..0.5));
    }
    p.set(ParamName::SigmaObs, rng.random_range(0.05..0.5));
    p
}

pub fn random_exo(n: usize, rng: &mut ChaCha8Rng) -> Exogenous {
    Exogenous::new(
        (0..n).map(|_| rng.random_range(-5.0..15.0)).collect(),
        (0..n).map(|_| if rng.random_bool(0.5) { rng.random_range(0.0..6.0) } else { 0.0 }).collect(),
        (0..n).map(|_| rng.random_range(0.0..0.6)).collect(),
    )
    .unwrap()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random data and parameters for `kind`.
pub fn dataset(kind: ModelKind, n: usize, seed: u64) -> (TimeSeriesDataset, ThermalParams) {
    let mut rng = seeded(seed);
    let theta = random_params(kind, &mut rng);
    let exo = random_exo(n, &mut rng);
    let y = (0..n).map(|_| rng.random_range(17.0..23.0)).collect();
    (TimeSeriesDataset::from_series(0.25, y, exo, false).unwrap(), theta)
}

type Dense = Vec<Vec<f64>>;

fn dense(m: &Mat<f64>) -> Dense {
    (0..m.rows).map(|i| m.row(i).to_vec()).collect()
}

fn mul(a: &Dense, b: &Dense) -> Dense {
    let (n, k, m) = (a.len(), b.len(), b[0].len());
    (0..n)
        .map(|i| (0..m).map(|j| (0..k).map(|l| a[i][l] * b[l][j]).sum()).collect())
        .collect()
}

fn transpose(a: &Dense) -> Dense {
    (0..a[0].len()).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

/// Joint Gaussian of `y_0..y_{N-1}` built from the stacked state moments.
pub fn joint_loglik(mats: &StateSpaceMatrices, data: &TimeSeriesDataset, m0: &[f64], p0: f64) -> f64 {
    let d = mats.state_dim();
    let n = data.len();
    let a = dense(&mats.a);
    let at = transpose(&a);
    let q = dense(&mats.q);
    let c = &mats.c_obs;
    let mut mu = vec![m0.to_vec()];
    for k in 1..n {
        let u = data.exo.at(k);
        mu.push(
            (0..d)
                .map(|i| {
                    (0..d).map(|j| a[i][j] * mu[k - 1][j]).sum::<f64>()
                        + (0..3).map(|j| mats.b[(i, j)] * u[j]).sum::<f64>()
                })
                .collect(),
        );
    }
    // cross[k][l] = Cov(x_k, x_l) for l <= k
    let mut cross: Vec<Vec<Dense>> = Vec::new();
    for k in 0..n {
        let mut row = Vec::new();
        for l in 0..k {
            row.push(mul(&a, &cross[k - 1][l]));
        }
        let diag = if k == 0 {
            (0..d).map(|i| (0..d).map(|j| if i == j { p0 } else { 0.0 }).collect()).collect()
        } else {
            let prev = mul(&mul(&a, &cross[k - 1][k - 1]), &at);
            (0..d).map(|i| (0..d).map(|j| prev[i][j] + q[i][j]).collect()).collect()
        };
        row.push(diag);
        cross.push(row);
    }
    let quad = |s: &Dense| -> f64 { (0..d).map(|i| (0..d).map(|j| c[i] * s[i][j] * c[j]).sum::<f64>()).sum() };
    let mut cov = vec![vec![0.0; n]; n];
    for k in 0..n {
        for l in 0..=k {
            let v = quad(&cross[k][l]);
            cov[k][l] = v;
            cov[l][k] = v;
        }
        cov[k][k] += mats.r_obs;
    }
    let mean: Vec<f64> = mu.iter().map(|m| (0..d).map(|i| c[i] * m[i]).sum()).collect();
    mvn_logpdf(&data.y, &mean, &cov)
}

/// Largest `|filter - joint Gaussian|` over random instances.
pub fn kalman_oracle_gap(kind: ModelKind, instances: u64, n: usize) -> f64 {
    let mut worst: f64 = 0.0;
    let mut rng = seeded(17 + kind.state_dim() as u64);
    for inst in 0..instances {
        let theta = random_params(kind, &mut rng);
        let dt = 0.25;
        let mats = build_matrices(kind, &theta, dt).unwrap();
        let exo = random_exo(n, &mut rng);
        let y: Vec<f64> = (0..n).map(|i| 18.0 + (i as f64) * 0.3 + (inst as f64) * 0.01).collect();
        let data = TimeSeriesDataset::from_series(dt, y, exo, false).unwrap();
        let m0 = vec![data.y[0]; kind.state_dim()];
        let p0 = 25.0;
        let (ll, _) = kalman_loglik(&mats, &data, &m0, &Mat::diag(&vec![p0; kind.state_dim()])).unwrap();
        let oracle = joint_loglik(&mats, &data, &m0, p0);
        worst = worst.max((ll - oracle).abs());
    }
    worst
}

/// Worst per-coordinate `|ad - fd| / max(|ad|, 1)` of the latent log-joint.
pub fn max_gradient_error(kind: ModelKind, points: u64) -> f64 {
    let mut worst: f64 = 0.0;
    for p in 0..points {
        let (data, theta) = dataset(kind, 10, 100 + p);
        let layout = default_layout(kind, &PriorRegime::Uninformed, false);
        let target = ModelTarget::latent(kind, layout, data.clone()).unwrap();
        let mut rng = seeded(500 + p);
        let mut u = target.unconstrain_params(&theta).unwrap();
        for y in &data.y {
            for _ in 0..kind.state_dim() {
                u.push(y + rng.random_range(-0.3..0.3));
            }
        }
        let ad = target.log_density_grad(&u).unwrap();
        let fd = finite_difference(|x| target.log_density(x), &u, 1e-5);
        for (a, b) in ad.gradient.iter().zip(&fd) {
            worst = worst.max((a - b).abs() / a.abs().max(1.0));
        }
    }
    worst
}
