//! Day-ahead forecast with a 95% band from posterior draws.

use thermal_bayes::diagnostics::{interval_coverage, mape};
use thermal_bayes::forecast::{forecast, BandMode, ForecastOptions, SetpointClamp};
use thermal_bayes::io::{fit_dataset, RunConfig};
use thermal_bayes::nuts::NutsConfig;
use thermal_bayes::synthetic::{generate_synthetic, DriverSpec};
use thermal_bayes::thermal::{ModelKind, ThermalParams};

fn main() {
    let (history_len, k) = (400, 48);
    let truth = ThermalParams::ti(5.3, 25.0, 7.9).with_noise(ModelKind::Ti, 0.1, 0.1);
    let drivers = DriverSpec::default();
    let (all, _) = generate_synthetic(ModelKind::Ti, &truth, &drivers, history_len + k, 0.5, 4, true).unwrap();
    let history = all.take(history_len).unwrap();
    let future = all.slice(history_len, history_len + k).unwrap();

    let mut cfg = RunConfig::new(ModelKind::Ti);
    cfg.backend.nuts = Some(NutsConfig {
        chains: 2,
        warmup: 300,
        draws: 300,
        ..NutsConfig::default()
    });
    let fit = fit_dataset(&cfg, &history).unwrap();

    let run = |band, options: &ForecastOptions| {
        forecast(
            ModelKind::Ti,
            &fit.draws,
            &fit.fixed_params(),
            &fit.terminal,
            &future.exo,
            history.dt,
            500,
            band,
            1,
            options,
        )
        .unwrap()
    };
    let res = run(BandMode::Quantile { alpha: 0.05 }, &ForecastOptions::default());
    println!("{:>4} {:>7} {:>7} {:>7} {:>7}", "step", "actual", "mean", "low", "high");
    for i in (0..k).step_by(6) {
        println!("{:>4} {:>7.2} {:>7.2} {:>7.2} {:>7.2}", i + 1, future.y[i], res.mean[i], res.low[i], res.high[i]);
    }
    println!(
        "MAPE {:.4}, {:.0}% of observations inside the band",
        mape(&future.y, &res.mean).unwrap(),
        interval_coverage(&future.y, &res.low, &res.high).unwrap()
    );

    let clamped = run(
        BandMode::MinMax,
        &ForecastOptions {
            clamp: Some(SetpointClamp {
                setpoint: drivers.setpoint,
                hysteresis: drivers.deadband,
            }),
            ..ForecastOptions::default()
        },
    );
    let lo = clamped.low.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = clamped.high.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    println!("with a thermostat clamp the min/max band stays in [{lo:.2}, {hi:.2}]");
}
