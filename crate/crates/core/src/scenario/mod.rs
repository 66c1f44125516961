//! Geometry, fading, combined gains and NOMA rate expressions.
//!
//! All quantities are linear-scale. Gains are powers (watts per watt), rates are
//! bit/s/Hz; multiply by [`SystemConfig::channel_bandwidth`] for bit/s.

mod channel;
mod config;
mod rate;
mod types;

pub use channel::{combined_gain, distance, path_loss, sample_channels, ChannelRealization};
pub use config::{db_to_linear, dbm_to_watts, watts_to_dbm, MatchingReflection, SystemConfig, Tolerances};
pub use rate::{
    ascending_order, cross_rate, gain_matrix, rates, rates_from_gains, sic_feasible,
    sic_feasible_from_gains, sinr_from_gains, sum_rate, zero_matrix, UserMatrix,
};
pub use types::{Assignment, DecodingOrder, ReflectionVector};
