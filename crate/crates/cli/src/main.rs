use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use jetthrust::pipeline::{
    cmd_estimate, cmd_evaluate, cmd_fit_static, cmd_identify, cmd_simulate, ExperimentConfig, Quantity, StaticMap,
};
use jetthrust::Error;

#[derive(Parser)]
#[command(name = "jetthrust", version, about = "Turbojet model identification and thrust estimation")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: config `output_dir`, else `out`].
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Noise seed, overriding the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Engine preset (P160, P220) or engine file, overriding the configuration.
    #[arg(long, global = true)]
    engine: Option<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the plant and write `simulation.csv` and `manifest.toml`.
    Simulate,
    /// Identify the speed model from a recorded dataset.
    Identify {
        /// Dataset CSV with `time,u,omega` (or `omega_meas`).
        dataset: PathBuf,
        /// Held-out record for validation [default: synthesized from the configuration].
        #[arg(long)]
        validation: Option<PathBuf>,
    },
    /// Fit a static power-law map to an `x,y` table.
    FitStatic {
        /// Two-column CSV with a header row.
        table: PathBuf,
        #[arg(value_enum)]
        which: Which,
    },
    /// Run the thrust observer over a measurement file.
    Estimate {
        /// Measurement CSV with `time,u,omega_meas` and optional `thrust_true`.
        measurement: PathBuf,
        /// Speed model file [default: the engine's model].
        #[arg(long)]
        model: Option<PathBuf>,
        /// Thrust map file [default: the engine's map].
        #[arg(long)]
        thrust_map: Option<PathBuf>,
    },
    /// Error metrics between two CSV columns.
    Evaluate {
        reference: PathBuf,
        estimate: PathBuf,
        #[arg(value_enum)]
        quantity: QuantityArg,
        /// Reference column [default: `thrust_true` or `omega_true`].
        #[arg(long)]
        reference_column: Option<String>,
        /// Estimate column [default: `thrust_hat` or `omega_hat`].
        #[arg(long)]
        estimate_column: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Which {
    #[value(name = "omega_u", alias = "omega-u")]
    OmegaU,
    #[value(name = "thrust_omega", alias = "thrust-omega")]
    ThrustOmega,
}

#[derive(Clone, Copy, ValueEnum)]
enum QuantityArg {
    Speed,
    Thrust,
}

fn load_config(common: &Common) -> jetthrust::Result<ExperimentConfig> {
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(engine) = &common.engine {
        config.engine.clone_from(engine);
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> jetthrust::Result<bool> {
    let config = load_config(&cli.common)?;
    let out = cli
        .common
        .out
        .clone()
        .or_else(|| config.output_dir.clone())
        .unwrap_or_else(|| PathBuf::from("out"));
    match cli.command {
        Command::Simulate => {
            let run = cmd_simulate(&config, &out)?;
            println!(
                "engine = {}\nsamples = {}\nseed = {}\nwrote {}",
                run.manifest.engine,
                run.log.len(),
                config.seed,
                out.join("simulation.csv").display()
            );
        }
        Command::Identify { dataset, validation } => {
            let id = cmd_identify(&dataset, validation.as_deref(), &config, &out)?;
            print!("{}", id.report());
            println!("wrote {}", out.join("model.toml").display());
        }
        Command::FitStatic { table, which } => {
            let which = match which {
                Which::OmegaU => StaticMap::OmegaU,
                Which::ThrustOmega => StaticMap::ThrustOmega,
            };
            let fit = cmd_fit_static(&table, which, &config, &out)?;
            print!("{}", fit.report());
            if !fit.converged {
                eprintln!("error: the power-law fit did not converge");
                return Ok(false);
            }
        }
        Command::Estimate { measurement, model, thrust_map } => {
            let est = cmd_estimate(&measurement, model.as_deref(), thrust_map.as_deref(), &config, &out)?;
            if let Some(m) = &est.metrics {
                print!("{}", m.report());
            }
            println!("wrote {}", out.join("estimate.csv").display());
        }
        Command::Evaluate {
            reference,
            estimate,
            quantity,
            reference_column,
            estimate_column,
        } => {
            let (quantity, default_ref, default_est) = match quantity {
                QuantityArg::Speed => (Quantity::Speed, "omega_true", "omega_hat"),
                QuantityArg::Thrust => (Quantity::Thrust, "thrust_true", "thrust_hat"),
            };
            let spec = config.engine()?.spec;
            let m = cmd_evaluate(
                (&reference, reference_column.as_deref().unwrap_or(default_ref)),
                (&estimate, estimate_column.as_deref().unwrap_or(default_est)),
                quantity,
                &spec,
            )?;
            print!("{}", m.report());
        }
    }
    Ok(true)
}

fn exit_code(e: &Error) -> ExitCode {
    if e.is_numerical() {
        ExitCode::from(2)
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
