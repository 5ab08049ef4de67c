//! `spinbench`: run benchmarking experiments from a JSON config.

mod config;
mod scenarios;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::Value;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] spinbench::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use spinbench::Error as E;
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) => match e {
                E::InvalidArgument(_) | E::InsufficientData(_) | E::Parse(_) | E::Io(_) | E::Json(_) => 2,
                _ => 3,
            },
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "spinbench", version, about = "Randomized benchmarking simulator for spin ensembles")]
struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true, env = "SPINBENCH_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GateChoice {
    X90,
    X180,
    Grape,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the scenario described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override a config entry, e.g. `--set rb.n_g=3`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Fit only lengths up to this value.
        #[arg(long)]
        max_l: Option<usize>,
    },
    /// Fit `α(1−p)^l` to a decay CSV.
    Fit {
        decay_csv: PathBuf,
        #[arg(long)]
        max_l: Option<usize>,
        /// Directory for fit.json; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a gate waveform (input and delivered field) as CSV.
    ExportWaveform {
        #[arg(long, value_enum, default_value = "x90")]
        gate: GateChoice,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load_doc(path: Option<&PathBuf>, sets: &[String], seed: Option<u64>, default_scenario: &str) -> Result<Value, CliError> {
    let mut doc = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?
        }
        None => serde_json::json!({ "scenario": default_scenario }),
    };
    if !doc.is_object() {
        return Err(CliError::Usage("config must be a JSON object".into()));
    }
    for s in sets {
        config::apply_override(&mut doc, s)?;
    }
    if let Some(seed) = seed {
        doc["seed"] = Value::from(seed);
    }
    Ok(doc)
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, set, out, seed, max_l } => {
            let mut doc = load_doc(Some(&config), &set, seed, "rb")?;
            if let Some(m) = max_l {
                config::apply_override(&mut doc, &format!("rb.max_l={m}"))?;
            }
            scenarios::run(&doc, config.parent(), &out)
        }
        Command::Fit { decay_csv, max_l, out } => scenarios::fit(&decay_csv, max_l, out.as_deref()),
        Command::ExportWaveform { gate, config, set, out, seed } => {
            let doc = load_doc(config.as_ref(), &set, seed, "grape")?;
            let gate = match gate {
                GateChoice::X90 => scenarios::Gate::X90,
                GateChoice::X180 => scenarios::Gate::X180,
                GateChoice::Grape => scenarios::Gate::Grape,
            };
            scenarios::export_waveform(&doc, gate, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
