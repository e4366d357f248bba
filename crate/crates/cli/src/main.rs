use clap::{Args, Parser, Subcommand};
use dfrc_cli::commands::{design, evaluate, evaluate_beampattern, verify, SavedDesign};
use dfrc_cli::config::TargetSpec;
use dfrc_cli::experiments::run;
use dfrc_cli::{CliError, ConfigFile, ExperimentConfig, ExperimentId, Format};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "dfrc",
    version,
    about = "CRB-optimal DFRC transmit beamforming"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON file with ExperimentConfig keys; missing keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Run a figure sweep.
    Run {
        #[arg(long, value_enum)]
        experiment: Option<ExperimentId>,
        #[arg(long)]
        trials: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Design beamformers for one scenario and save them as JSON.
    Design {
        #[arg(long, conflicts_with = "extended")]
        point: bool,
        #[arg(long)]
        extended: bool,
        /// Number of users.
        #[arg(long)]
        k: Option<usize>,
        /// Common SINR threshold in dB.
        #[arg(long)]
        sinr_db: Option<f64>,
        #[command(flatten)]
        common: Common,
    },
    /// Recompute metrics of a saved design.
    Evaluate {
        design: PathBuf,
        #[arg(long)]
        beampattern: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Check optimality conditions of a saved design.
    Verify {
        design: PathBuf,
        /// Accepted for symmetry; KKT residuals are always reported.
        #[arg(long)]
        kkt: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(common: &Common, fallback: ExperimentId) -> Result<ExperimentConfig, CliError> {
    let mut file = match &common.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    if common.seed.is_some() {
        file.seed = common.seed;
    }
    ExperimentConfig::resolve(file, fallback)
}

fn emit(text: &str, out: &Option<PathBuf>) -> Result<(), CliError> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            experiment,
            trials,
            common,
        } => {
            let mut cfg = load_config(&common, experiment.unwrap_or(ExperimentId::Custom))?;
            if let Some(e) = experiment {
                cfg.experiment = e;
            }
            if let Some(t) = trials {
                cfg.trials = t;
            }
            let cfg = cfg.revalidate()?;
            emit(&run(&cfg)?.render(common.format)?, &common.out)
        }
        Command::Design {
            point,
            extended,
            k,
            sinr_db,
            common,
        } => {
            let mut cfg = load_config(&common, ExperimentId::Custom)?;
            if let Some(k) = k {
                cfg.users = k;
            }
            if let Some(g) = sinr_db {
                cfg.sinr_db = g;
            }
            if extended {
                cfg.target = TargetSpec::Extended;
            } else if point && cfg.target == TargetSpec::Extended {
                cfg.target = TargetSpec::Point { theta_deg: 0.0 };
            }
            let cfg = cfg.revalidate()?;
            emit(&design(&cfg)?.to_json(), &common.out)
        }
        Command::Evaluate {
            design,
            beampattern,
            common,
        } => {
            let cfg = load_config(&common, ExperimentId::Custom)?;
            let saved = SavedDesign::load(&design)?;
            let table = if beampattern {
                evaluate_beampattern(&saved, &cfg)
            } else {
                evaluate(&saved, &cfg)?
            };
            emit(&table.render(common.format)?, &common.out)
        }
        Command::Verify {
            design,
            kkt: _,
            out,
        } => {
            let saved = SavedDesign::load(&design)?;
            let report = verify(&saved)?;
            emit(
                &(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"),
                &out,
            )
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dfrc: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
