//! Shared fixtures for the benchmarks in `benches/`.

use irsnoma_core::scenario::sample_channels;
use irsnoma_core::{ChannelRealization, SystemConfig};

/// Default configuration with `n_elements` reflecting elements and its realization for `seed`.
pub fn instance(n_elements: usize, seed: u64) -> (SystemConfig, ChannelRealization) {
    let config = SystemConfig { n_elements, ..SystemConfig::default() };
    let chan = sample_channels(&config, seed).expect("default config samples");
    (config, chan)
}
