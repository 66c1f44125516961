//! Experiment specification files.
//!
//! A spec is a flat TOML document of dotted keys:
//!
//! ```toml
//! experiment.sweep = "n_elements"
//! experiment.values = [4, 8, 16]
//! experiment.algorithms = ["ThreeStep-IRS-NOMA", "NOMA-noIRS"]
//! experiment.trials = 50
//! experiment.seed = 0
//! experiment.output = "records.jsonl"
//! scenario.p_max_dbm = 15
//! solver.tol_gap = 1e-6
//! ```
//!
//! Every key is optional except `experiment.sweep` and `experiment.values`.
//! Power-like keys ending in `_dbm` / `_db` are converted to linear units here.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use irsnoma_core::scenario::{db_to_linear, dbm_to_watts, MatchingReflection};
use irsnoma_core::{Algorithm, SystemConfig};
use serde::{Deserialize, Serialize};
use toml::Value;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    NElements,
    PMaxDbm,
    NChannels,
    IrsXCoordinate,
}

impl SweepVariable {
    pub fn key(self) -> &'static str {
        match self {
            SweepVariable::NElements => "n_elements",
            SweepVariable::PMaxDbm => "p_max_dbm",
            SweepVariable::NChannels => "n_channels",
            SweepVariable::IrsXCoordinate => "irs_x_coordinate",
        }
    }

    /// `base` with the swept quantity set to `value`.
    pub fn apply(self, base: &SystemConfig, value: f64) -> Result<SystemConfig, CliError> {
        let count = || {
            if value >= 0.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(CliError::Spec(format!("{} must be a non-negative integer, got {value}", self.key())))
            }
        };
        let mut c = base.clone();
        match self {
            SweepVariable::NElements => c.n_elements = count()?,
            SweepVariable::PMaxDbm => c.p_max = dbm_to_watts(value),
            SweepVariable::NChannels => {
                let per_channel = base.channel_bandwidth();
                c.n_channels = count()?;
                c.total_bandwidth = per_channel * c.n_channels as f64;
            }
            SweepVariable::IrsXCoordinate => c = c.with_irs_on_axis(value),
        }
        Ok(c)
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for SweepVariable {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        [SweepVariable::NElements, SweepVariable::PMaxDbm, SweepVariable::NChannels, SweepVariable::IrsXCoordinate]
            .into_iter()
            .find(|v| v.key() == s)
            .ok_or_else(|| CliError::Spec(format!("unknown sweep variable `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub base: SystemConfig,
    pub sweep: SweepVariable,
    pub values: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
    pub trials: usize,
    pub base_seed: u64,
    pub output: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.values.is_empty() {
            return Err(CliError::Spec("experiment.values is empty".into()));
        }
        if self.values.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(CliError::Spec("experiment.values must be strictly increasing".into()));
        }
        if self.trials == 0 {
            return Err(CliError::Spec("experiment.trials must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(CliError::Spec("experiment.algorithms is empty".into()));
        }
        for &v in &self.values {
            self.sweep.apply(&self.base, v)?.validate()?;
        }
        Ok(())
    }

    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.display().to_string(), e))?;
        text.parse()
    }
}

impl FromStr for ExperimentSpec {
    type Err = CliError;

    fn from_str(text: &str) -> Result<Self, CliError> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| CliError::Spec(e.to_string()))?;
        let mut flat = Vec::new();
        flatten("", &Value::Table(table), &mut flat);

        let mut base = SystemConfig::default();
        let mut sweep = None;
        let mut values = None;
        let mut algorithms = Algorithm::ALL.to_vec();
        let mut trials = 50;
        let mut base_seed = 0;
        let mut output = None;
        for (key, value) in &flat {
            let v = Field { key, value };
            match key.as_str() {
                "experiment.sweep" => sweep = Some(v.string()?.parse()?),
                "experiment.values" => values = Some(v.array()?.iter().map(|x| Field { key, value: x }.float()).collect::<Result<_, _>>()?),
                "experiment.algorithms" => {
                    algorithms = v
                        .array()?
                        .iter()
                        .map(|x| Ok(Field { key, value: x }.string()?.parse::<Algorithm>()?))
                        .collect::<Result<_, CliError>>()?
                }
                "experiment.trials" => trials = v.count()?,
                "experiment.seed" => base_seed = v.count()? as u64,
                "experiment.output" => output = Some(PathBuf::from(v.string()?)),
                other => match other.strip_prefix("scenario.") {
                    Some(k) => set_scenario(&mut base, k, &v)?,
                    None => match other.strip_prefix("solver.") {
                        Some(k) => set_solver(&mut base, k, &v)?,
                        None => return Err(CliError::Spec(format!("unknown key `{other}`"))),
                    },
                },
            }
        }
        let spec = ExperimentSpec {
            base,
            sweep: sweep.ok_or_else(|| CliError::Spec("missing experiment.sweep".into()))?,
            values: values.ok_or_else(|| CliError::Spec("missing experiment.values".into()))?,
            algorithms,
            trials,
            base_seed,
            output,
        };
        Ok(spec)
    }
}

fn flatten(prefix: &str, value: &Value, out: &mut Vec<(String, Value)>) {
    match value {
        Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        other => out.push((prefix.to_string(), other.clone())),
    }
}

struct Field<'a> {
    key: &'a str,
    value: &'a Value,
}

impl Field<'_> {
    fn bad(&self, want: &str) -> CliError {
        CliError::Spec(format!("`{}` must be {want}, got {}", self.key, self.value))
    }

    fn float(&self) -> Result<f64, CliError> {
        match self.value {
            Value::Float(x) => Ok(*x),
            Value::Integer(i) => Ok(*i as f64),
            _ => Err(self.bad("a number")),
        }
    }

    fn count(&self) -> Result<usize, CliError> {
        match self.value {
            Value::Integer(i) if *i >= 0 => Ok(*i as usize),
            _ => Err(self.bad("a non-negative integer")),
        }
    }

    fn boolean(&self) -> Result<bool, CliError> {
        self.value.as_bool().ok_or_else(|| self.bad("a boolean"))
    }

    fn string(&self) -> Result<&str, CliError> {
        self.value.as_str().ok_or_else(|| self.bad("a string"))
    }

    fn array(&self) -> Result<&Vec<Value>, CliError> {
        self.value.as_array().ok_or_else(|| self.bad("an array"))
    }

    fn point(&self) -> Result<[f64; 3], CliError> {
        let a = self.array()?;
        if a.len() != 3 {
            return Err(self.bad("a 3-element array"));
        }
        let mut p = [0.0; 3];
        for (slot, v) in p.iter_mut().zip(a) {
            *slot = Field { key: self.key, value: v }.float()?;
        }
        Ok(p)
    }
}

fn set_scenario(c: &mut SystemConfig, key: &str, v: &Field) -> Result<(), CliError> {
    match key {
        "n_channels" => c.n_channels = v.count()?,
        "n_users" => c.n_users = v.count()?,
        "per_channel_cap" => c.per_channel_cap = v.count()?,
        "p_max_dbm" => c.p_max = dbm_to_watts(v.float()?),
        "r_min" => c.r_min = v.float()?,
        "noise_dbm" => c.noise_power = dbm_to_watts(v.float()?),
        "total_bandwidth_hz" => c.total_bandwidth = v.float()?,
        "bs_pos" => c.bs_pos = v.point()?,
        "irs_pos" => c.irs_pos = v.point()?,
        "user_center" => c.user_center = v.point()?,
        "user_radius" => c.user_radius = v.float()?,
        "pl_exp_bs_user" => c.pl_exp_bs_user = v.float()?,
        "pl_exp_bs_irs" => c.pl_exp_bs_irs = v.float()?,
        "pl_exp_irs_user" => c.pl_exp_irs_user = v.float()?,
        "rician_factor_db" => c.rician_factor = db_to_linear(v.float()?),
        "n_elements" => c.n_elements = v.count()?,
        "n_candidates" => c.n_candidates = v.count()?,
        "matching_reflection" => {
            c.matching_reflection = match v.string()? {
                "all_ones" => MatchingReflection::AllOnes,
                "off" => MatchingReflection::Off,
                _ => return Err(v.bad("\"all_ones\" or \"off\"")),
            }
        }
        "warm_start_reflection" => c.warm_start_reflection = v.boolean()?,
        "max_assignments" => c.max_assignments = v.count()? as u128,
        "max_order_combinations" => c.max_order_combinations = v.count()? as u128,
        _ => return Err(CliError::Spec(format!("unknown key `scenario.{key}`"))),
    }
    Ok(())
}

fn set_solver(c: &mut SystemConfig, key: &str, v: &Field) -> Result<(), CliError> {
    let t = &mut c.tolerances;
    match key {
        "tol_slack" => t.slack = v.float()?,
        "tol_gap" => t.gap = v.float()?,
        "barrier_growth" => t.barrier_growth = v.float()?,
        "newton_cap" => t.newton_cap = v.count()?,
        "order_margin" => t.order_margin = v.float()?,
        "tol_sca" => t.sca = v.float()?,
        "power_iter_cap" => t.power_iter_cap = v.count()?,
        "feasibility_iter_cap" => t.feasibility_iter_cap = v.count()?,
        "feasibility_threshold" => t.feasibility_threshold = v.float()?,
        "reflection_tol" => t.reflection_tol = v.float()?,
        "reflection_iter_cap" => t.reflection_iter_cap = v.count()?,
        "tol_outer" => t.outer_tol = v.float()?,
        "outer_iter_cap" => t.outer_iter_cap = v.count()?,
        "swap_margin" => t.swap_margin = v.float()?,
        "rank_one_ratio" => t.rank_one_ratio = v.float()?,
        "chi_floor" => t.chi_floor = v.float()?,
        _ => return Err(CliError::Spec(format!("unknown key `solver.{key}`"))),
    }
    Ok(())
}
