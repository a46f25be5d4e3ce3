//! R-hat, credible intervals and posterior predictive checks.

use thermal_bayes::diagnostics::{credible_interval, gelman_rubin};
use thermal_bayes::io::run::diagnose_artifact;
use thermal_bayes::io::{fit_dataset, RunConfig};
use thermal_bayes::nuts::NutsConfig;
use thermal_bayes::synthetic::{generate_synthetic, DriverSpec};
use thermal_bayes::thermal::{ModelKind, ThermalParams};

fn main() {
    let a: Vec<f64> = (0..100).map(|i| (i as f64 * 0.7).sin()).collect();
    let shifted: Vec<f64> = a.iter().map(|v| v + 2.0).collect();
    println!("R-hat, identical chains: {:.6}", gelman_rubin(&[a.clone(), a.clone()], false).unwrap());
    println!("R-hat, shifted chains:   {:.3}", gelman_rubin(&[a.clone(), shifted], false).unwrap());
    println!("50% interval of {{0, 1}}: {:?}", credible_interval(&[0.0, 1.0], 0.5).unwrap());

    let truth = ThermalParams::ti(5.3, 25.0, 7.9).with_noise(ModelKind::Ti, 0.1, 0.1);
    let (data, _) = generate_synthetic(ModelKind::Ti, &truth, &DriverSpec::default(), 600, 0.5, 2, true).unwrap();
    let mut cfg = RunConfig::new(ModelKind::Ti);
    cfg.backend.nuts = Some(NutsConfig {
        chains: 4,
        warmup: 300,
        draws: 300,
        ..NutsConfig::default()
    });
    let fit = fit_dataset(&cfg, &data).unwrap();
    let report = diagnose_artifact(&fit, Some(&data), 200, 9).unwrap();
    for (name, r) in &report.rhat {
        println!("R-hat {name:<10} {r:.4}");
    }
    println!("divergences: {}", report.divergences);
    for (stat, p) in report.ppc.unwrap() {
        println!("posterior predictive p-value, {stat:?}: {p:.3}");
    }
}
