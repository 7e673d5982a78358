use std::fs::File;
use std::io::{self, BufReader};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use harvest_core::harness::{run_monte_carlo, run_scenario, write_monte_carlo, write_run, HarnessError, RunConfig};
use harvest_core::perception::{evaluate_box_rows, read_box_rows, write_metrics_csv, AssocRule};

/// Input or config problems; the only failures that give a nonzero exit.
const EXIT_CONFIG: u8 = 2;
/// Internal faults such as a state-machine contract violation.
const EXIT_INTERNAL: u8 = 1;

#[derive(Parser)]
#[command(name = "harvest", version, about = "Trellis fruit-harvesting simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one row and write logs and reports.
    Run {
        /// JSON run config; defaults apply to omitted fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate seeds seed..seed+runs and pool the outcomes.
    Montecarlo {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        runs: u32,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score predicted boxes against ground truth.
    Evaldet {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Fraction of a truth box a detection must cover.
        #[arg(long)]
        min_overlap: Option<f64>,
        /// With --height, ignores boxes touching the image border.
        #[arg(long, requires = "height")]
        width: Option<u32>,
        #[arg(long, requires = "width")]
        height: Option<u32>,
        /// Detector name in the output row.
        #[arg(long, default_value = "detector")]
        name: String,
        /// Writes the metrics CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    Config(String),
    Internal(String),
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        match e {
            HarnessError::Config(_) | HarnessError::Io(_) => Failure::Config(e.to_string()),
            other => Failure::Internal(other.to_string()),
        }
    }
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<RunConfig, Failure> {
    let mut cfg = match path {
        Some(p) => RunConfig::from_file(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn read_rows(path: &Path) -> Result<Vec<harvest_core::perception::BoxRow>, Failure> {
    let file = File::open(path).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    read_box_rows(BufReader::new(file)).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let cfg = load_config(config.as_deref(), seed)?;
            let result = run_scenario(&cfg)?;
            write_run(&out, &cfg, &result)?;
            print!("{}", result.report.summary_table());
        }
        Command::Montecarlo { config, runs, seed, out } => {
            let cfg = load_config(config.as_deref(), seed)?;
            let result = run_monte_carlo(&cfg, runs)?;
            write_monte_carlo(&out, &cfg, &result)?;
            print!("{}", result.report.summary_table());
        }
        Command::Evaldet {
            pred,
            truth,
            min_overlap,
            width,
            height,
            name,
            out,
        } => {
            let mut rule = AssocRule::default();
            if let Some(m) = min_overlap {
                if !(m > 0.0 && m <= 1.0) {
                    return Err(Failure::Config(format!("min-overlap {m} must lie in (0, 1]")));
                }
                rule.min_overlap = m;
            }
            rule.image_size = width.zip(height);
            let metrics = evaluate_box_rows(&read_rows(&pred)?, &read_rows(&truth)?, &rule);
            let rows = [(name, metrics)];
            let written = match out {
                Some(p) => {
                    let f = File::create(&p).map_err(|e| Failure::Config(format!("{}: {e}", p.display())))?;
                    write_metrics_csv(f, &rows)
                }
                None => write_metrics_csv(io::stdout().lock(), &rows),
            };
            written.map_err(|e| Failure::Internal(e.to_string()))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_CONFIG)
        }
        Err(Failure::Internal(msg)) => {
            eprintln!("internal error: {msg}");
            ExitCode::from(EXIT_INTERNAL)
        }
    }
}
