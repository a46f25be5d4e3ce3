//! NUTS posterior for the Ti model on synthetic data.

use thermal_bayes::diagnostics::SummaryReport;
use thermal_bayes::io::{fit_dataset, RunConfig};
use thermal_bayes::nuts::NutsConfig;
use thermal_bayes::synthetic::{generate_synthetic, DriverSpec};
use thermal_bayes::thermal::{ModelKind, ThermalParams};

fn print_summary(report: &SummaryReport) {
    println!("{:<10} {:>9} {:>8} {:>9} {:>9} {:>7}", "param", "mean", "sd", "2.5%", "97.5%", "R-hat");
    for (name, s) in &report.parameters {
        let rhat = s.rhat.map_or("-".to_string(), |r| format!("{r:.3}"));
        println!("{name:<10} {:>9.3} {:>8.3} {:>9.3} {:>9.3} {rhat:>7}", s.mean, s.sd, s.l95, s.u95);
    }
    if let Some(r) = report.total_r {
        println!("{:<10} {:>9.3} {:>8.3} {:>9.3} {:>9.3}", "totalR", r.mean, r.sd, r.l95, r.u95);
    }
}

fn main() {
    let truth = ThermalParams::ti(5.3, 25.0, 7.9).with_noise(ModelKind::Ti, 0.1, 0.1);
    let (data, _) = generate_synthetic(ModelKind::Ti, &truth, &DriverSpec::default(), 1000, 0.5, 1, true).unwrap();

    let mut cfg = RunConfig::new(ModelKind::Ti);
    cfg.seed = 42;
    cfg.backend.nuts = Some(NutsConfig {
        chains: 2,
        warmup: 500,
        draws: 500,
        ..NutsConfig::default()
    });
    let fit = fit_dataset(&cfg, &data).unwrap();
    println!("truth: R_ia 5.3, C_i 25, A_w 7.9, sigma_i 0.1, sigma_obs 0.1");
    print_summary(&fit.summary);
    println!(
        "{} divergences; one-step NRMSE {:.2}%; {:.1} s",
        fit.summary.divergences,
        fit.summary.metrics.nrmse.unwrap_or(f64::NAN),
        fit.wall_seconds
    );
}
