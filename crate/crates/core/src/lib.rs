//! Resource allocation for IRS-assisted multi-channel NOMA downlinks.
//!
//! The pipeline assigns users to channels by many-to-one matching with swap
//! refinement, fixes SIC decoding orders from a semidefinite relaxation of the
//! sum of combined gains, then alternates SCA power allocation with SCA
//! reflection design. OMA, no-IRS, random-order and exhaustive baselines share
//! the same building blocks.

pub mod decode_order;
pub mod error;
pub mod matching;
pub mod pipeline;
pub mod power_alloc;
pub mod reflect_design;
pub mod scenario;
pub mod subsolvers;

pub use error::{Error, Result};
pub use pipeline::{Algorithm, Solution};
pub use scenario::{
    Assignment, ChannelRealization, DecodingOrder, ReflectionVector, SystemConfig, Tolerances,
};
