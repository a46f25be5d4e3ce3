//! Discretized RC models: matrices, a deterministic step response and a
//! noisy synthetic dataset written as CSV.

use thermal_bayes::io::write_dataset;
use thermal_bayes::synthetic::{generate_synthetic, DriverSpec};
use thermal_bayes::thermal::{build_matrices, simulate, Exogenous, ModelKind, ThermalParams};

fn main() {
    let dt = 0.5;
    let ti = ThermalParams::ti(5.3, 25.0, 7.9).with_noise(ModelKind::Ti, 0.1, 0.1);
    let mats = build_matrices(ModelKind::Ti, &ti, dt).unwrap();
    println!("Ti: A = {:?}, B = {:?}", mats.a.row(0), mats.b.row(0));

    let tite = ThermalParams::tite(2.0, 3.3, 10.0, 60.0, 5.0).with_noise(ModelKind::TiTe, 0.1, 0.1);
    let mats = build_matrices(ModelKind::TiTe, &tite, dt).unwrap();
    for i in 0..2 {
        println!("TiTe row {i}: A = {:?}, B = {:?}", mats.a.row(i), mats.b.row(i));
    }

    // 3 kW heater switched on in a 0 °C house
    let inputs = Exogenous::constant(200, 0.0, 3.0, 0.0);
    let step = simulate(&build_matrices(ModelKind::Ti, &ti, dt).unwrap(), &inputs, &[0.0], 0, false).unwrap();
    let last = step.observations.last().unwrap();
    println!("step response after {} h: {last:.2} °C (steady state R·Φ_h = {:.2})", 200.0 * dt, 5.3 * 3.0);

    let (data, _) = generate_synthetic(ModelKind::Ti, &ti, &DriverSpec::default(), 48, dt, 7, true).unwrap();
    let mut out = Vec::new();
    write_dataset(&data, &mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    for line in text.lines().take(6) {
        println!("{line}");
    }
}
