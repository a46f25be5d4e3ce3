//! Mean-field ADVI next to NUTS on the same data.

use thermal_bayes::advi::AdviConfig;
use thermal_bayes::io::{fit_dataset, BackendKind, RunConfig};
use thermal_bayes::nuts::NutsConfig;
use thermal_bayes::synthetic::{generate_synthetic, DriverSpec};
use thermal_bayes::thermal::{ModelKind, ThermalParams};

fn main() {
    let truth = ThermalParams::ti(5.3, 25.0, 7.9).with_noise(ModelKind::Ti, 0.1, 0.1);
    let (data, _) = generate_synthetic(ModelKind::Ti, &truth, &DriverSpec::default(), 1000, 0.5, 1, true).unwrap();

    let mut vi = RunConfig::new(ModelKind::Ti);
    vi.backend.kind = BackendKind::Advi;
    vi.backend.advi = Some(AdviConfig {
        eval_stride: 100,
        window: 5,
        ..AdviConfig::default()
    });
    let advi = fit_dataset(&vi, &data).unwrap();
    let q = advi.variational.as_ref().unwrap();
    println!("ADVI: {} iterations, converged {}, final ELBO {:.2}", q.iterations, q.converged, q.elbo);
    for (it, elbo) in q.elbo_trace.iter().step_by((q.elbo_trace.len() / 8).max(1)) {
        println!("  iteration {it:>6}  ELBO {elbo:>10.2}");
    }

    let mut hmc = RunConfig::new(ModelKind::Ti);
    hmc.backend.nuts = Some(NutsConfig {
        chains: 2,
        warmup: 500,
        draws: 500,
        ..NutsConfig::default()
    });
    let nuts = fit_dataset(&hmc, &data).unwrap();

    println!("{:<10} {:>16} {:>16}", "param", "NUTS mean±sd", "ADVI mean±sd");
    for name in ["R_ia", "C_i", "A_w", "sigma_i", "sigma_obs"] {
        let (a, b) = (nuts.summary.get(name).unwrap(), advi.summary.get(name).unwrap());
        println!("{name:<10} {:>9.3}±{:<6.3} {:>9.3}±{:<6.3}", a.mean, a.sd, b.mean, b.sd);
    }
    println!("wall time: NUTS {:.1} s, ADVI {:.1} s", nuts.wall_seconds, advi.wall_seconds);
}
