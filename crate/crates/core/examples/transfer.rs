//! Season-to-season transfer: a cooling-season posterior becomes the
//! prior for a short heating-season record.

use thermal_bayes::io::{fit_dataset, transferred_priors, write_prior_file, RegimeKind, RunConfig};
use thermal_bayes::nuts::NutsConfig;
use thermal_bayes::synthetic::{generate_synthetic, DriverSpec};
use thermal_bayes::thermal::{ModelKind, ThermalParams};

fn config(seed: u64) -> RunConfig {
    let mut cfg = RunConfig::new(ModelKind::Ti);
    cfg.seed = seed;
    cfg.backend.nuts = Some(NutsConfig {
        chains: 2,
        warmup: 400,
        draws: 400,
        ..NutsConfig::default()
    });
    cfg
}

fn main() {
    let truth = ThermalParams::ti(5.3, 25.0, 7.9).with_noise(ModelKind::Ti, 0.1, 0.1);
    let (summer, _) = generate_synthetic(ModelKind::Ti, &truth, &DriverSpec::cooling_season(), 1500, 0.5, 1, true).unwrap();
    let (winter, _) = generate_synthetic(ModelKind::Ti, &truth, &DriverSpec::default(), 150, 0.5, 2, true).unwrap();

    let first = fit_dataset(&config(1), &summer).unwrap();
    let priors = transferred_priors(&first.summary, &[], 1.0).unwrap();
    let dir = std::env::temp_dir().join("thermal-bayes-transfer");
    let path = dir.join("priors.toml");
    write_prior_file(&priors, &path).unwrap();
    println!("{}:\n{}", path.display(), std::fs::read_to_string(&path).unwrap());

    let mut cfg = config(2);
    cfg.prior.regime = RegimeKind::Transferred;
    cfg.prior.transferred = Some(path);
    let transferred = fit_dataset(&cfg, &winter).unwrap();
    let uninformed = fit_dataset(&config(2), &winter).unwrap();
    for (label, fit) in [("transferred", &transferred), ("uninformed", &uninformed)] {
        let r = fit.summary.get("R_ia").unwrap();
        println!("{label:<12} R_ia {:.3} [{:.3}, {:.3}], |error| {:.3}", r.mean, r.l95, r.u95, (r.mean - 5.3).abs());
    }
}
