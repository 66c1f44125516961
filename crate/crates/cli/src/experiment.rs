//! Monte-Carlo runs over a sweep, one JSON record per line.

use std::collections::BTreeMap;
use std::io::Write;
use std::sync::mpsc;
use std::time::Instant;

use irsnoma_core::pipeline::run;
use irsnoma_core::scenario::sample_channels;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::spec::{ExperimentSpec, SweepVariable};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub sweep: SweepVariable,
    pub value: f64,
    pub trial: usize,
    pub seed: u64,
    pub algorithm: String,
    /// bit/s/Hz
    pub throughput: f64,
    pub feasible: bool,
    pub min_rate_met: bool,
    pub outer_iterations: usize,
    pub converged: bool,
    pub wall_time_s: f64,
    /// Rate of every user on its channel, indexed by user, bit/s/Hz.
    pub rates: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Runs one (sweep value, trial) cell: a single realization shared by every algorithm.
pub fn run_cell(spec: &ExperimentSpec, value: f64, trial: usize) -> Result<Vec<TrialRecord>, CliError> {
    let mut config = spec.sweep.apply(&spec.base, value)?;
    let seed = spec.base_seed + trial as u64;
    config.seed = seed;
    let chan = sample_channels(&config, seed)?;
    spec.algorithms
        .iter()
        .map(|&a| {
            let start = Instant::now();
            let sol = run(a, &chan, &config)?;
            let wall_time_s = start.elapsed().as_secs_f64();
            let rates = (0..chan.n_users)
                .map(|k| sol.assignment.channel_of(k).map_or(0.0, |n| sol.rates[n][k]))
                .collect();
            Ok(TrialRecord {
                sweep: spec.sweep,
                value,
                trial,
                seed,
                algorithm: a.label().to_string(),
                throughput: sol.throughput,
                feasible: sol.feasible,
                min_rate_met: sol.min_rate_met,
                outer_iterations: sol.outer_iterations,
                converged: sol.converged,
                wall_time_s,
                rates,
                note: sol.note,
            })
        })
        .collect()
}

/// Runs every cell, concurrently, writing records in (value, trial) order and
/// flushing after each cell. Records written before a failure stay in `out`.
pub fn run_experiment<W: Write>(spec: &ExperimentSpec, out: &mut W) -> Result<usize, CliError> {
    spec.validate()?;
    let cells: Vec<(usize, f64, usize)> = spec
        .values
        .iter()
        .flat_map(|&v| (0..spec.trials).map(move |t| (v, t)))
        .enumerate()
        .map(|(i, (v, t))| (i, v, t))
        .collect();
    let (tx, rx) = mpsc::channel();
    let mut written = 0;
    let mut failure = None;
    std::thread::scope(|s| {
        s.spawn(move || {
            cells.into_par_iter().for_each_with(tx, |tx, (i, v, t)| {
                let _ = tx.send((i, run_cell(spec, v, t)));
            });
        });
        let mut pending = BTreeMap::new();
        let mut next = 0;
        for (i, result) in rx {
            pending.insert(i, result);
            while let Some(result) = pending.remove(&next) {
                next += 1;
                if failure.is_some() {
                    continue;
                }
                let emitted = result.and_then(|records| {
                    for r in &records {
                        serde_json::to_writer(&mut *out, r)?;
                        out.write_all(b"\n").map_err(|e| CliError::Io("output".into(), e))?;
                    }
                    out.flush().map_err(|e| CliError::Io("output".into(), e))?;
                    Ok(records.len())
                });
                match emitted {
                    Ok(n) => written += n,
                    Err(e) => failure = Some(e),
                }
            }
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(written),
    }
}

pub fn read_records(text: &str) -> Result<Vec<TrialRecord>, CliError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| CliError::Spec(format!("record line {}: {e}", i + 1))))
        .collect()
}
