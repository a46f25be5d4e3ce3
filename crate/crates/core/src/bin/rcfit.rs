use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thermal_bayes::io::{run, Command, RunConfig, RunError};

const CONFIG_HELP: &str = r#"CONFIGURATION (TOML; defaults in brackets)
  model = "Ti" | "TiTe" | "TiTeTh"
  seed = [0]                 seeds every backend and forecast
  data = "house.csv"         columns time,y,ta,phi_h,phi_s
  dt = [from timestamps]     sampling interval override (hours)
  take = [all rows]          keep the first N rows
  fahrenheit = [false]       y and ta are in °F
  binary_hvac = [false]      phi_h is an on/off signal scaled by Phi_h
  output = ["rcfit-out"]     output directory
  formulation = ["marginalized"] | "latent_states"

  [prior]  regime = ["uninformed"] | "informed" | "hyper" | "transferred"
           estimates = { R_ia = 5.0 }    informed means, sd = [1.0]
           metadata = "hyperprior.toml"  required for hyper
           transferred = "priors.toml"   required for transferred
  [prior.overrides.C_i]  family = "gamma", shape = 2.0, rate = 0.1
  [fixed]    sigma_obs = 0.05            parameters held fixed
  [backend]  kind = ["nuts"] | "advi" | "mle" | "map"
             variational_draws = [1000]
  [backend.nuts]  chains=[4] warmup=[5000] draws=[5000] target_accept=[0.8]
                  max_tree_depth=[10] mass_matrix=["diagonal"]
  [backend.advi]  max_iterations=[180000] eta=[0.1] tau=[1] alpha=[0.1]
                  eval_stride=[500] eval_samples=[100] window=[100] tolerance=[1e-4]
  [backend.optimizer]  max_iterations=[500] gradient_tolerance=[1e-6]
  [forecast] artifact, drivers (ta,phi_s[,phi_h]), n_draws=[500],
             band=[{type="min_max"}] | {type="quantile", alpha=0.05},
             clamp={setpoint, hysteresis}, process_noise=[true], observation_noise=[true]
  [simulate] params={...}, steps=[2000], dt=[0.5], with_noise=[true], [simulate.drivers]
  [diagnose] artifact, replicates=[200]
  [transfer] artifact, parameters=[physical + Phi_h], sd_scale=[1.0]

EXIT CODES  0 success, 1 usage/config, 2 data, 3 numerical failure"#;

#[derive(Parser)]
#[command(name = "rcfit", version, about = "Bayesian fitting and forecasting of RC building thermal models", after_long_help = CONFIG_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Fit a model; writes fit.json, draws.csv and summary.json
    Fit(Common),
    /// Forecast from a fit artifact; writes forecast.csv
    Forecast(Common),
    /// Generate a synthetic dataset; writes simulated.csv
    Simulate(Common),
    /// R-hat and posterior predictive checks for a fit artifact
    Diagnose(Common),
    /// Turn a fit artifact into a prior file for the next fit
    Transfer(Common),
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML)
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Keep only the first N rows of the data
    #[arg(long)]
    take: Option<usize>,
    #[arg(long)]
    output: Option<PathBuf>,
    /// Fit artifact for forecast, diagnose and transfer
    #[arg(long)]
    artifact: Option<PathBuf>,
}

fn execute(cli: Cli) -> Result<Vec<PathBuf>, RunError> {
    let (command, common) = match cli.command {
        Cmd::Fit(c) => (Command::Fit, c),
        Cmd::Forecast(c) => (Command::Forecast, c),
        Cmd::Simulate(c) => (Command::Simulate, c),
        Cmd::Diagnose(c) => (Command::Diagnose, c),
        Cmd::Transfer(c) => (Command::Transfer, c),
    };
    let mut cfg = RunConfig::load(&common.config)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if common.data.is_some() {
        cfg.data = common.data;
    }
    if common.take.is_some() {
        cfg.take = common.take;
    }
    if let Some(o) = common.output {
        cfg.output = o;
    }
    if let Some(a) = common.artifact {
        cfg.forecast.artifact = Some(a.clone());
        cfg.diagnose.artifact = Some(a.clone());
        cfg.transfer.artifact = Some(a);
    }
    Ok(run(command, &cfg)?.files)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("rcfit: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
