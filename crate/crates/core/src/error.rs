use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("subproblem infeasible: {0}")]
    Infeasible(String),

    #[error("{solver} did not converge after {iterations} iterations (gap {gap:.3e})")]
    NonConvergence {
        solver: &'static str,
        iterations: usize,
        gap: f64,
    },

    #[error("search space of {count} candidates exceeds the configured cap of {cap}")]
    SearchTooLarge { count: u128, cap: u128 },

    #[error("swap limit of {0} exceeded while refining the matching")]
    SwapLimit(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
