use std::path::{Path, PathBuf};
use std::process::Command as Process;

use thermal_bayes::density::{PriorSpec, SlotPrior};
use thermal_bayes::io::run::build_layout;
use thermal_bayes::io::{run, write_dataset, Command, FitArtifact, RegimeKind, RunConfig};
use thermal_bayes::synthetic::{generate_synthetic, DriverSpec};
use thermal_bayes::thermal::{ModelKind, ThermalParams};

fn write_synthetic(dir: &Path, name: &str, n: usize, seed: u64, drivers: &DriverSpec) -> PathBuf {
    let theta = ThermalParams::ti(5.3, 25.0, 7.9).with_noise(ModelKind::Ti, 0.05, 0.05);
    let (data, _) = generate_synthetic(ModelKind::Ti, &theta, drivers, n, 0.5, seed, true).unwrap();
    let path = dir.join(name);
    let mut buf = Vec::new();
    write_dataset(&data, &mut buf).unwrap();
    std::fs::write(&path, buf).unwrap();
    path
}

fn advi_config(data: &Path, out: &Path) -> RunConfig {
    RunConfig::from_toml(&format!(
        r#"
model = "Ti"
seed = 4
data = "{}"
output = "{}"
[backend]
kind = "advi"
variational_draws = 400
[backend.advi]
max_iterations = 20000
eval_stride = 100
window = 5
"#,
        data.display(),
        out.display()
    ))
    .unwrap()
}

fn nuts_toml(data: &Path, out: &Path) -> String {
    format!(
        r#"
model = "Ti"
seed = 11
data = "{}"
output = "{}"
[backend.nuts]
chains = 2
warmup = 200
draws = 200
"#,
        data.display(),
        out.display()
    )
}

#[test]
fn advi_fit_writes_artifact_that_reloads_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_synthetic(dir.path(), "a.csv", 400, 1, &DriverSpec::default());
    let cfg = advi_config(&data, &dir.path().join("out"));
    let outcome = run(Command::Fit, &cfg).unwrap();
    let artifact = outcome.artifact.unwrap();
    for name in ["R_ia", "C_i", "A_w"] {
        let s = artifact.summary.get(name).unwrap();
        assert!(s.l95 < s.mean && s.mean < s.u95, "{name}: {s:?}");
    }
    let reloaded = FitArtifact::load(&dir.path().join("out/fit.json")).unwrap();
    assert_eq!(reloaded, artifact);
    assert_eq!(reloaded.to_json().unwrap(), artifact.to_json().unwrap());
    assert!(dir.path().join("out/draws.csv").exists());
    assert!(dir.path().join("out/summary.json").exists());
}

#[test]
fn identical_config_gives_identical_draws_csv() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_synthetic(dir.path(), "d.csv", 300, 2, &DriverSpec::default());
    let mut outputs = Vec::new();
    for run_id in 0..2 {
        let out = dir.path().join(format!("run{run_id}"));
        let cfg_path = dir.path().join(format!("cfg{run_id}.toml"));
        std::fs::write(&cfg_path, nuts_toml(&data, &out)).unwrap();
        let status = Process::new(env!("CARGO_BIN_EXE_rcfit"))
            .arg("fit")
            .arg(&cfg_path)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
        outputs.push(std::fs::read(out.join("draws.csv")).unwrap());
    }
    assert!(!outputs[0].is_empty());
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("never");
    let cfg = dir.path().join("hyper.toml");
    std::fs::write(
        &cfg,
        format!("model = \"Ti\"\ndata = \"x.csv\"\noutput = \"{}\"\n[prior]\nregime = \"hyper\"\n", out.display()),
    )
    .unwrap();
    let bin = env!("CARGO_BIN_EXE_rcfit");
    let code = |args: &[&str]| Process::new(bin).args(args).output().unwrap().status.code();
    assert_eq!(code(&["fit", cfg.to_str().unwrap()]), Some(1));
    assert!(!out.exists(), "nothing is written on a configuration error");

    let missing = dir.path().join("missing.toml");
    std::fs::write(&missing, nuts_toml(&dir.path().join("nope.csv"), &out)).unwrap();
    assert_eq!(code(&["fit", missing.to_str().unwrap()]), Some(2));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "time,y,ta,phi_h,phi_s\n0,20,5,1,0\n300,20,5,1,0\n900,20,5,1,0\n").unwrap();
    std::fs::write(&missing, nuts_toml(&bad, &out)).unwrap();
    assert_eq!(code(&["fit", missing.to_str().unwrap()]), Some(2));

    assert_eq!(code(&["frobnicate"]), Some(1));
    assert_eq!(code(&["--help"]), Some(0));
}

#[test]
fn transfer_centers_new_priors_on_first_season_means() {
    let dir = tempfile::tempdir().unwrap();
    let season_a = write_synthetic(dir.path(), "a.csv", 400, 3, &DriverSpec::cooling_season());
    let mut cfg = advi_config(&season_a, &dir.path().join("a"));
    let first = run(Command::Fit, &cfg).unwrap().artifact.unwrap();

    cfg.transfer.artifact = Some(dir.path().join("a/fit.json"));
    cfg.output = dir.path().join("t");
    run(Command::Transfer, &cfg).unwrap();
    let prior_file = dir.path().join("t/transferred_priors.toml");

    let season_b = write_synthetic(dir.path(), "b.csv", 200, 4, &DriverSpec::default());
    let mut cfg_b = advi_config(&season_b, &dir.path().join("b"));
    cfg_b.prior.regime = RegimeKind::Transferred;
    cfg_b.prior.transferred = Some(prior_file);
    let layout = build_layout(&cfg_b, false).unwrap();
    for name in ["R_ia", "C_i", "A_w"] {
        let s = first.summary.get(name).unwrap();
        match &layout.slot(name).unwrap().prior {
            SlotPrior::Direct(PriorSpec::Normal { mu, sigma }) => {
                assert_eq!(*mu, s.mean);
                assert_eq!(*sigma, s.sd);
            }
            other => panic!("{name}: {other:?}"),
        }
    }
    let second = run(Command::Fit, &cfg_b).unwrap().artifact.unwrap();
    assert!(second.summary.get("R_ia").is_some());
}

#[test]
fn vague_transferred_priors_match_uninformed_fit() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_synthetic(dir.path(), "d.csv", 600, 5, &DriverSpec::default());
    let base = RunConfig::from_toml(&nuts_toml(&data, &dir.path().join("u"))).unwrap();
    let uninformed = run(Command::Fit, &base).unwrap().artifact.unwrap();

    let mut t = base.clone();
    t.transfer.artifact = Some(dir.path().join("u/fit.json"));
    t.transfer.sd_scale = 1e6;
    t.output = dir.path().join("t");
    run(Command::Transfer, &t).unwrap();

    let mut vague = base.clone();
    vague.output = dir.path().join("v");
    vague.prior.regime = RegimeKind::Transferred;
    vague.prior.transferred = Some(dir.path().join("t/transferred_priors.toml"));
    let refit = run(Command::Fit, &vague).unwrap().artifact.unwrap();
    for name in ["R_ia", "C_i", "A_w"] {
        let (a, b) = (uninformed.summary.get(name).unwrap(), refit.summary.get(name).unwrap());
        assert!(
            (a.mean - b.mean).abs() < 0.5 * a.sd.max(b.sd),
            "{name}: uninformed {a:?} vs vague transferred {b:?}"
        );
    }
}

#[test]
fn forecast_and_diagnose_from_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_synthetic(dir.path(), "d.csv", 400, 6, &DriverSpec::default());
    let mut cfg = RunConfig::from_toml(&nuts_toml(&data, &dir.path().join("fit"))).unwrap();
    run(Command::Fit, &cfg).unwrap();

    let drivers = dir.path().join("future.csv");
    let rows: String = (0..24).map(|i| format!("{},{}\n", 5.0 + (i as f64 * 0.2).sin(), 0.0)).collect();
    std::fs::write(&drivers, format!("ta,phi_s\n{rows}")).unwrap();
    cfg.output = dir.path().join("fc");
    cfg.forecast.artifact = Some(dir.path().join("fit/fit.json"));
    cfg.forecast.drivers = Some(drivers);
    cfg.diagnose.artifact = Some(dir.path().join("fit/fit.json"));
    run(Command::Forecast, &cfg).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("fc/forecast.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("step,mean,low,high"));
    assert_eq!(csv.lines().count(), 25);

    run(Command::Diagnose, &cfg).unwrap();
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("fc/diagnostics.json")).unwrap()).unwrap();
    assert!(report["max_rhat"].as_f64().unwrap() < 1.1);
    for stat in ["mean", "std_dev", "lag1_autocorr"] {
        let p = report["ppc"][stat].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }
}
