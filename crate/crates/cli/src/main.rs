use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use society_sim::{cmd_run, cmd_sweep, cmd_validate, summary_line, CliError, SweepSpec};

/// Society spectrum market simulator.
#[derive(Debug, Parser)]
#[command(name = "society-sim", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a scenario file and the market it describes.
    Validate { file: PathBuf },
    /// Run one scenario and write metrics.csv and summary.json.
    Run {
        file: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the scenario length.
        #[arg(long)]
        epochs: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a scenario over a grid of values for one numeric field.
    Sweep {
        file: PathBuf,
        /// Grid file with `param`, `from`, `to`, `steps` and `seeds`.
        #[arg(long, conflicts_with_all = ["param", "from", "to", "steps", "seeds"])]
        spec: Option<PathBuf>,
        /// Dotted field path, e.g. `spectrum.w`.
        #[arg(long, required_unless_present = "spec")]
        param: Option<String>,
        #[arg(long, required_unless_present = "spec")]
        from: Option<f64>,
        #[arg(long, required_unless_present = "spec")]
        to: Option<f64>,
        #[arg(long, required_unless_present = "spec")]
        steps: Option<usize>,
        /// Runs per grid point [default: 3].
        #[arg(long)]
        seeds: Option<u32>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to one per core.
        #[arg(long)]
        jobs: Option<usize>,
    },
}

fn execute(command: Command) -> Result<(), CliError> {
    match command {
        Command::Validate { file } => {
            let config = cmd_validate(&file)?;
            println!("{}: ok ({})", file.display(), config.name);
        }
        Command::Run {
            file,
            seed,
            epochs,
            out,
        } => {
            let (summary, _) = cmd_run(&file, seed, epochs, &out)?;
            println!("{}", summary_line(&summary));
        }
        Command::Sweep {
            file,
            spec,
            param,
            from,
            to,
            steps,
            seeds,
            out,
            jobs,
        } => {
            let spec = match spec {
                Some(path) => SweepSpec::from_path(&path)?,
                // clap guarantees these are present without --spec.
                None => SweepSpec {
                    param: param.unwrap_or_default(),
                    from: from.unwrap_or_default(),
                    to: to.unwrap_or_default(),
                    steps: steps.unwrap_or_default(),
                    seeds: seeds.unwrap_or(3),
                },
            };
            let summary = cmd_sweep(&file, &spec, &out, jobs)?;
            for p in summary.ordered() {
                let eq = p
                    .equilibrium_epoch
                    .map_or_else(|| "none".to_owned(), |e| e.to_string());
                println!(
                    "{}={} society_share={:.3} mean_price={:.4} equilibrium_epoch={}",
                    summary.param,
                    p.value,
                    p.society_share.unwrap_or(f64::NAN),
                    p.mean_price.unwrap_or(f64::NAN),
                    eq
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SOCIETY_SIM_LOG", "warn"))
        .init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
