//! The file-based workflow: CSV in, TOML config, artifacts out.

use thermal_bayes::io::{load_csv, run, write_dataset, Command, CsvOptions, RunConfig};
use thermal_bayes::synthetic::{generate_synthetic, DriverSpec};
use thermal_bayes::thermal::{ModelKind, ThermalParams};

fn main() {
    let dir = std::env::temp_dir().join("thermal-bayes-csv");
    std::fs::create_dir_all(&dir).unwrap();
    let csv = dir.join("house.csv");
    let truth = ThermalParams::ti(5.3, 25.0, 7.9).with_noise(ModelKind::Ti, 0.1, 0.1);
    let (data, _) = generate_synthetic(ModelKind::Ti, &truth, &DriverSpec::default(), 500, 0.5, 1, true).unwrap();
    write_dataset(&data, std::fs::File::create(&csv).unwrap()).unwrap();

    let loaded = load_csv(&csv, &CsvOptions::default()).unwrap();
    println!("{}: {} rows, dt {} h", csv.display(), loaded.len(), loaded.dt);

    let toml = format!(
        r#"
model = "Ti"
seed = 3
data = "{}"
output = "{}"

[backend]
kind = "map"
"#,
        csv.display(),
        dir.join("out").display()
    );
    let cfg = RunConfig::from_toml(&toml).unwrap();
    let outcome = run(Command::Fit, &cfg).unwrap();
    for f in &outcome.files {
        println!("wrote {}", f.display());
    }
    let point = outcome.artifact.unwrap().point.unwrap();
    for (n, v) in point.names.iter().zip(&point.theta) {
        println!("  {n} = {v:.4}");
    }
    println!("round-tripped config:\n{}", cfg.to_toml().unwrap());

    let bad = RunConfig::from_toml("model = \"Ti\"\n[prior]\nregime = \"hyper\"\n");
    println!("hyper without metadata: {}", bad.unwrap_err());
}
