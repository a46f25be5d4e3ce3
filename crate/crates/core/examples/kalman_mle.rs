//! Kalman likelihood, one-step predictions and MLE/MAP point fits.

use thermal_bayes::density::{default_layout, ModelTarget, PriorRegime};
use thermal_bayes::filtering::{fit_point, kalman_loglik, one_step_metrics, OptimizerConfig, PointMode};
use thermal_bayes::linalg::Mat;
use thermal_bayes::synthetic::{generate_synthetic, DriverSpec};
use thermal_bayes::thermal::{build_matrices, ModelKind, ThermalParams};

fn main() {
    let truth = ThermalParams::ti(5.3, 25.0, 7.9).with_noise(ModelKind::Ti, 0.1, 0.1);
    let (data, _) = generate_synthetic(ModelKind::Ti, &truth, &DriverSpec::default(), 1000, 0.5, 3, true).unwrap();

    let mats = build_matrices(ModelKind::Ti, &truth, data.dt).unwrap();
    let (ll, preds) = kalman_loglik(&mats, &data, &[data.y[0]], &Mat::diag(&[25.0])).unwrap();
    let (rmse, nrmse) = one_step_metrics(&preds, &data.y).unwrap();
    let range = data.y.iter().copied().fold(f64::NEG_INFINITY, f64::max) - data.y.iter().copied().fold(f64::INFINITY, f64::min);
    println!("log-likelihood at the truth {ll:.2}; one-step RMSE {rmse:.3} °C, NRMSE {nrmse:.2}% of a {range:.2} °C range");

    let layout = default_layout(ModelKind::Ti, &PriorRegime::Uninformed, false);
    let target = ModelTarget::marginalized(ModelKind::Ti, layout, data).unwrap();
    let init = ThermalParams::ti(2.0, 10.0, 1.0).with_noise(ModelKind::Ti, 0.5, 0.5);
    for mode in [PointMode::Mle, PointMode::Map] {
        let est = fit_point(&target, &init, mode, &OptimizerConfig::default()).unwrap();
        println!(
            "{mode:?}: R_ia {:.3}, C_i {:.2}, A_w {:.2}, sigma_i {:.3}, sigma_obs {:.3} ({} iterations, converged {})",
            est.get("R_ia").unwrap(),
            est.get("C_i").unwrap(),
            est.get("A_w").unwrap(),
            est.get("sigma_i").unwrap(),
            est.get("sigma_obs").unwrap(),
            est.iterations,
            est.converged
        );
    }
}
