use super::channel::{combined_gain, ChannelRealization};
use super::types::{DecodingOrder, ReflectionVector};
use crate::error::{Error, Result};

/// Dense per-(channel, user) table; entries of unassigned pairs are zero.
pub type UserMatrix = Vec<Vec<f64>>;

pub fn zero_matrix(n_channels: usize, n_users: usize) -> UserMatrix {
    vec![vec![0.0; n_users]; n_channels]
}

/// Combined gains of every (channel, user) pair.
pub fn gain_matrix(chan: &ChannelRealization, e: &ReflectionVector) -> UserMatrix {
    (0..chan.n_channels)
        .map(|n| (0..chan.n_users).map(|k| combined_gain(chan, n, k, e)).collect())
        .collect()
}

/// Interference power seen by the user at `pos` in a channel's decoding list:
/// the sum of powers of users decoded after it.
fn later_power(order: &[usize], pos: usize, n: usize, p: &UserMatrix) -> f64 {
    order[pos + 1..].iter().map(|&i| p[n][i]).sum()
}

/// SINR of every assigned user given precomputed gains.
pub fn sinr_from_gains(
    gains: &UserMatrix,
    order: &DecodingOrder,
    p: &UserMatrix,
    noise: f64,
) -> UserMatrix {
    let n_users = gains.first().map_or(0, Vec::len);
    let mut out = zero_matrix(order.n_channels(), n_users);
    for n in 0..order.n_channels() {
        let list = order.channel(n);
        for (pos, &k) in list.iter().enumerate() {
            let g = gains[n][k];
            out[n][k] = p[n][k] * g / (g * later_power(list, pos, n, p) + noise);
        }
    }
    out
}

pub fn rates_from_gains(
    gains: &UserMatrix,
    order: &DecodingOrder,
    p: &UserMatrix,
    noise: f64,
) -> UserMatrix {
    let mut r = sinr_from_gains(gains, order, p, noise);
    for row in r.iter_mut() {
        for v in row.iter_mut() {
            *v = v.ln_1p() / std::f64::consts::LN_2;
        }
    }
    r
}

/// NOMA rate of every user, bit/s/Hz. Users decoded later interfere with earlier ones.
pub fn rates(
    chan: &ChannelRealization,
    order: &DecodingOrder,
    p: &UserMatrix,
    e: &ReflectionVector,
) -> UserMatrix {
    rates_from_gains(&gain_matrix(chan, e), order, p, chan.noise_power)
}

pub fn sum_rate(r: &UserMatrix) -> f64 {
    r.iter().flatten().sum()
}

/// Rate at which `decoder` can decode `target`'s signal on their shared channel.
pub fn cross_rate(
    chan: &ChannelRealization,
    order: &DecodingOrder,
    p: &UserMatrix,
    e: &ReflectionVector,
    decoder: usize,
    target: usize,
) -> Result<f64> {
    let n = (0..order.n_channels())
        .find(|&n| order.channel(n).contains(&target))
        .ok_or_else(|| Error::Domain(format!("user {target} is not assigned")))?;
    let list = order.channel(n);
    let pos_decoder = list.iter().position(|&u| u == decoder).ok_or_else(|| {
        Error::Domain(format!("users {decoder} and {target} are on different channels"))
    })?;
    let pos_target = list.iter().position(|&u| u == target).expect("found above");
    if pos_target > pos_decoder {
        return Err(Error::Domain(format!(
            "user {decoder} is decoded before {target} and cannot cancel it"
        )));
    }
    let g = combined_gain(chan, n, decoder, e);
    let sinr = p[n][target] * g / (g * later_power(list, pos_target, n, p) + chan.noise_power);
    Ok(sinr.ln_1p() / std::f64::consts::LN_2)
}

/// True when every later-decoded user's gain exceeds every earlier one's by at least `margin`.
pub fn sic_feasible_from_gains(gains: &UserMatrix, order: &DecodingOrder, margin: f64) -> bool {
    (0..order.n_channels()).all(|n| {
        let list = order.channel(n);
        list.iter().enumerate().all(|(i, &k)| {
            list[i + 1..].iter().all(|&later| gains[n][later] - gains[n][k] >= margin)
        })
    })
}

pub fn sic_feasible(
    chan: &ChannelRealization,
    order: &DecodingOrder,
    e: &ReflectionVector,
    margin: f64,
) -> bool {
    sic_feasible_from_gains(&gain_matrix(chan, e), order, margin)
}

/// Ascending-gain decoding order with ties broken by lower user index.
pub fn ascending_order(gains: &UserMatrix, channels: &[Vec<usize>]) -> DecodingOrder {
    DecodingOrder::new(
        channels
            .iter()
            .enumerate()
            .map(|(n, users)| {
                let mut u = users.clone();
                u.sort_by(|&a, &b| gains[n][a].total_cmp(&gains[n][b]).then(a.cmp(&b)));
                u
            })
            .collect(),
    )
}
