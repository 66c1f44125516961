use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::experiment::TrialRecord;
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub value: f64,
    pub algorithm: String,
    pub trials: usize,
    pub feasible: usize,
    /// Over feasible trials; `None` when every trial was infeasible.
    pub mean: Option<f64>,
    /// Population standard deviation over feasible trials.
    pub stddev: Option<f64>,
    pub infeasible_rate: f64,
    pub mean_outer_iterations: f64,
}

/// Per-(value, algorithm) statistics, rows ordered by value then first appearance of the algorithm.
pub fn summarize(records: &[TrialRecord]) -> Result<Vec<SummaryRow>, CliError> {
    if records.is_empty() {
        return Err(CliError::Spec("no records to summarize".into()));
    }
    let mut algo_rank: Vec<&str> = Vec::new();
    for r in records {
        if !algo_rank.contains(&r.algorithm.as_str()) {
            algo_rank.push(&r.algorithm);
        }
    }
    let mut cells: BTreeMap<(u64, usize), Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        let rank = algo_rank.iter().position(|a| *a == r.algorithm).unwrap();
        // total order key for finite values
        let bits = r.value.to_bits();
        let key = if r.value.is_sign_negative() { !bits } else { bits | (1 << 63) };
        cells.entry((key, rank)).or_default().push(r);
    }
    Ok(cells
        .into_values()
        .map(|rs| {
            let ok: Vec<f64> = rs.iter().filter(|r| r.feasible).map(|r| r.throughput).collect();
            let n = ok.len() as f64;
            let mean = (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / n);
            let stddev = mean.map(|m| (ok.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n).sqrt());
            SummaryRow {
                value: rs[0].value,
                algorithm: rs[0].algorithm.clone(),
                trials: rs.len(),
                feasible: ok.len(),
                mean,
                stddev,
                infeasible_rate: 1.0 - ok.len() as f64 / rs.len() as f64,
                mean_outer_iterations: rs.iter().map(|r| r.outer_iterations as f64).sum::<f64>() / rs.len() as f64,
            }
        })
        .collect())
}

pub fn to_csv(rows: &[SummaryRow]) -> String {
    let mut s = String::from("value,algorithm,trials,feasible,mean,stddev,infeasible_rate,mean_outer_iterations\n");
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.6}"));
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{:.4},{:.3}",
            r.value,
            r.algorithm,
            r.trials,
            r.feasible,
            opt(r.mean),
            opt(r.stddev),
            r.infeasible_rate,
            r.mean_outer_iterations
        );
    }
    s
}
