//! Informed, hyper and uninformed priors on a short record.

use std::collections::BTreeMap;
use std::path::Path;

use thermal_bayes::io::{fit_dataset, RegimeKind, RunConfig};
use thermal_bayes::nuts::NutsConfig;
use thermal_bayes::synthetic::{generate_synthetic, DriverSpec};
use thermal_bayes::thermal::{ModelKind, ThermalParams};

fn main() {
    let truth = ThermalParams::ti(5.3, 25.0, 7.9).with_noise(ModelKind::Ti, 0.1, 0.1);
    let (data, _) = generate_synthetic(ModelKind::Ti, &truth, &DriverSpec::default(), 200, 0.5, 11, true).unwrap();
    let metadata = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/hyperprior.toml");

    println!("{:<12} {:>8} {:>8} {:>8} {:>8}", "regime", "mean", "2.5%", "97.5%", "width");
    for regime in [RegimeKind::Informed, RegimeKind::Hyper, RegimeKind::Uninformed] {
        let mut cfg = RunConfig::new(ModelKind::Ti);
        cfg.seed = 5;
        cfg.prior.regime = regime;
        match regime {
            // an audit estimate, one unit of sd around it
            RegimeKind::Informed => cfg.prior.estimates = BTreeMap::from([("R_ia".into(), 5.0)]),
            RegimeKind::Hyper => cfg.prior.metadata = Some(metadata.clone()),
            _ => {}
        }
        cfg.backend.nuts = Some(NutsConfig {
            chains: 2,
            warmup: 500,
            draws: 500,
            ..NutsConfig::default()
        });
        let fit = fit_dataset(&cfg, &data).unwrap();
        let r = fit.summary.get("R_ia").unwrap();
        println!("{:<12} {:>8.3} {:>8.3} {:>8.3} {:>8.3}", format!("{regime:?}"), r.mean, r.l95, r.u95, r.width());
    }
}
