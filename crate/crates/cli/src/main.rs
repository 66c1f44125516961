use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use irsnoma_cli::{read_records, run_experiment, summarize, to_csv, ExperimentSpec};
use irsnoma_core::Algorithm;

#[derive(Parser)]
#[command(name = "irsnoma", version, about = "Resource allocation experiments for IRS-assisted NOMA downlinks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (sweep value, trial) cell of a spec and write JSON-lines records.
    Run {
        spec: PathBuf,
        /// Base seed; trial t uses seed + t.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        /// Comma-separated algorithm labels.
        #[arg(long, value_delimiter = ',')]
        algorithms: Option<Vec<String>>,
        /// Records file; stdout when neither this nor the spec names one.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Per-(value, algorithm) mean/stddev table in CSV form.
    Summarize {
        records: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and check a spec without running it.
    Validate {
        spec: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        algorithms: Option<Vec<String>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load(
    path: &std::path::Path,
    seed: Option<u64>,
    trials: Option<usize>,
    algorithms: Option<Vec<String>>,
    out: Option<PathBuf>,
) -> anyhow::Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::from_path(path)?;
    if let Some(s) = seed {
        spec.base_seed = s;
    }
    if let Some(t) = trials {
        spec.trials = t;
    }
    if let Some(a) = algorithms {
        spec.algorithms = a.iter().map(|s| s.parse::<Algorithm>()).collect::<Result<_, _>>()?;
    }
    if out.is_some() {
        spec.output = out;
    }
    spec.validate()?;
    Ok(spec)
}

fn write_to(path: Option<&PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(std::io::stdout()),
    })
}

fn main() -> ExitCode {
    match real_main() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Run { spec, seed, trials, algorithms, out } => {
            let spec = load(&spec, seed, trials, algorithms, out)?;
            let mut sink = write_to(spec.output.as_ref())?;
            let n = run_experiment(&spec, &mut sink)?;
            sink.flush()?;
            eprintln!("{n} records written");
        }
        Command::Summarize { records, out } => {
            let text = std::fs::read_to_string(&records).with_context(|| format!("reading {}", records.display()))?;
            let csv = to_csv(&summarize(&read_records(&text)?)?);
            write_to(out.as_ref())?.write_all(csv.as_bytes())?;
        }
        Command::Validate { spec, seed, trials, algorithms, out } => {
            let s = load(&spec, seed, trials, algorithms, out)?;
            let labels: Vec<&str> = s.algorithms.iter().map(|a| a.label()).collect();
            println!(
                "ok: sweep {} over {:?}, {} trials from seed {}, algorithms {}",
                s.sweep,
                s.values,
                s.trials,
                s.base_seed,
                labels.join(",")
            );
        }
    }
    Ok(())
}
