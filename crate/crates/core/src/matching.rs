//! Many-to-one user/channel matching.
//!
//! Users propose to channels in order of combined gain, channels keep their
//! strongest proposers up to capacity, and the resulting matching is refined
//! by swapping pairs of users on different channels until no swap improves
//! every involved player.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::{gain_matrix, Assignment, ChannelRealization, MatchingReflection, ReflectionVector, SystemConfig, UserMatrix};

/// How users sharing a channel are served.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AccessMode {
    /// Superposition with SIC in ascending-gain order.
    Noma,
    /// Equal time shares.
    Oma,
}

/// Fixed gains, power and access rule used to score candidate matchings.
#[derive(Debug, Clone, PartialEq)]
pub struct UtilityContext {
    pub gains: UserMatrix,
    pub noise_power: f64,
    /// Power of every user while matching.
    pub power: f64,
    pub mode: AccessMode,
}

impl UtilityContext {
    /// Gains at the configured matching reflection and an equal split of the budget.
    pub fn new(chan: &ChannelRealization, config: &SystemConfig, mode: AccessMode) -> Self {
        let e = match config.matching_reflection {
            MatchingReflection::AllOnes => ReflectionVector::ones(chan.n_elements),
            MatchingReflection::Off => ReflectionVector::zeros(chan.n_elements),
        };
        Self {
            gains: gain_matrix(chan, &e),
            noise_power: chan.noise_power,
            power: config.p_max / chan.n_users as f64,
            mode,
        }
    }

    pub fn from_gains(gains: UserMatrix, noise_power: f64, power: f64, mode: AccessMode) -> Self {
        Self { gains, noise_power, power, mode }
    }

    pub fn n_channels(&self) -> usize {
        self.gains.len()
    }

    pub fn n_users(&self) -> usize {
        self.gains.first().map_or(0, Vec::len)
    }

    /// Rate of every user in `users` when exactly that set shares channel `n`.
    pub fn user_utilities(&self, n: usize, users: &[usize]) -> Vec<(usize, f64)> {
        let g = &self.gains[n];
        let p = self.power;
        match self.mode {
            AccessMode::Oma => {
                let share = 1.0 / users.len().max(1) as f64;
                users.iter().map(|&k| (k, share * (p * g[k] / self.noise_power).log2_1p())).collect()
            }
            AccessMode::Noma => {
                let mut sorted = users.to_vec();
                sorted.sort_by(|&a, &b| g[a].total_cmp(&g[b]).then(a.cmp(&b)));
                let len = sorted.len();
                sorted
                    .iter()
                    .enumerate()
                    .map(|(pos, &k)| {
                        let later = p * (len - pos - 1) as f64;
                        (k, (p * g[k] / (g[k] * later + self.noise_power)).log2_1p())
                    })
                    .collect()
            }
        }
    }

    pub fn user_utility(&self, n: usize, users: &[usize], k: usize) -> f64 {
        self.user_utilities(n, users)
            .into_iter()
            .find(|&(u, _)| u == k)
            .map_or(0.0, |(_, r)| r)
    }

    pub fn channel_utility(&self, n: usize, users: &[usize]) -> f64 {
        self.user_utilities(n, users).iter().map(|&(_, r)| r).sum()
    }

    pub fn total_utility(&self, assignment: &Assignment) -> f64 {
        (0..assignment.n_channels()).map(|n| self.channel_utility(n, assignment.users(n))).sum()
    }
}

trait Log2OnePlus {
    fn log2_1p(self) -> f64;
}

impl Log2OnePlus for f64 {
    fn log2_1p(self) -> f64 {
        self.ln_1p() / std::f64::consts::LN_2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Matching {
    user_channel: Vec<Option<usize>>,
    channel_users: Vec<Vec<usize>>,
    /// Users rejected by each channel.
    pub rejected_users: Vec<Vec<usize>>,
    /// Channels that rejected each user.
    pub rejected_channels: Vec<Vec<usize>>,
    pub proposal_rounds: usize,
    pub swaps: usize,
    /// Total utility after initialization and after every executed swap.
    pub utility_trace: Vec<f64>,
}

impl Matching {
    pub fn channel_of(&self, k: usize) -> Option<usize> {
        self.user_channel[k]
    }

    pub fn users(&self, n: usize) -> &[usize] {
        &self.channel_users[n]
    }

    pub fn unmatched(&self) -> Vec<usize> {
        (0..self.user_channel.len()).filter(|&k| self.user_channel[k].is_none()).collect()
    }

    pub fn assignment(&self) -> Assignment {
        Assignment::new(self.channel_users.clone(), self.user_channel.len())
            .expect("matching keeps each user on at most one channel")
    }

    /// Checks that the user and channel views agree and capacities hold.
    pub fn check_consistency(&self, cap: usize) -> Result<()> {
        for (n, users) in self.channel_users.iter().enumerate() {
            if users.len() > cap {
                return Err(Error::Domain(format!("channel {n} holds {} users", users.len())));
            }
            for &k in users {
                if self.user_channel[k] != Some(n) {
                    return Err(Error::Domain(format!("user {k} listed on channel {n} but mapped elsewhere")));
                }
            }
        }
        for (k, ch) in self.user_channel.iter().enumerate() {
            if let Some(n) = *ch {
                if !self.channel_users[n].contains(&k) {
                    return Err(Error::Domain(format!("user {k} mapped to channel {n} but not listed")));
                }
            }
        }
        Ok(())
    }

    fn swap(&mut self, k: usize, other: usize) {
        let (n, m) = (self.user_channel[k].unwrap(), self.user_channel[other].unwrap());
        for u in self.channel_users[n].iter_mut() {
            if *u == k {
                *u = other;
            }
        }
        for u in self.channel_users[m].iter_mut() {
            if *u == other {
                *u = k;
            }
        }
        self.channel_users[n].sort_unstable();
        self.channel_users[m].sort_unstable();
        self.user_channel[k] = Some(m);
        self.user_channel[other] = Some(n);
    }
}

/// Proposal/rejection rounds on combined gain until every user holds a channel.
pub fn init_matching(ctx: &UtilityContext, cap: usize) -> Result<Matching> {
    let (nc, nu) = (ctx.n_channels(), ctx.n_users());
    let mut m = Matching {
        user_channel: vec![None; nu],
        channel_users: vec![Vec::new(); nc],
        rejected_users: vec![Vec::new(); nc],
        rejected_channels: vec![Vec::new(); nu],
        proposal_rounds: 0,
        swaps: 0,
        utility_trace: Vec::new(),
    };
    loop {
        let free = m.unmatched();
        if free.is_empty() {
            break;
        }
        m.proposal_rounds += 1;
        if m.proposal_rounds > nu * nc + 1 {
            return Err(Error::Domain("proposal rounds exceeded users x channels".into()));
        }
        let mut proposals = vec![Vec::new(); nc];
        for &k in &free {
            let best = (0..nc)
                .filter(|n| !m.rejected_channels[k].contains(n))
                .fold(None, |best: Option<usize>, n| match best {
                    Some(b) if ctx.gains[b][k] >= ctx.gains[n][k] => Some(b),
                    _ => Some(n),
                });
            let Some(n) = best else {
                return Err(Error::Domain(format!("user {k} was rejected by every channel")));
            };
            proposals[n].push(k);
        }
        for (n, props) in proposals.into_iter().enumerate() {
            if props.is_empty() {
                continue;
            }
            let mut pool = m.channel_users[n].clone();
            pool.extend(props);
            pool.sort_by(|&a, &b| ctx.gains[n][b].total_cmp(&ctx.gains[n][a]).then(a.cmp(&b)));
            let rejected = pool.split_off(cap.min(pool.len()));
            for &k in &rejected {
                m.user_channel[k] = None;
                m.rejected_users[n].push(k);
                m.rejected_channels[k].push(n);
            }
            for &k in &pool {
                m.user_channel[k] = Some(n);
            }
            pool.sort_unstable();
            m.channel_users[n] = pool;
        }
    }
    m.utility_trace.push(ctx.total_utility(&m.assignment()));
    Ok(m)
}

/// Whether exchanging users `k` and `other` leaves all four players no worse
/// and at least one better by more than `margin`.
///
/// The strict gain must show up in a channel's utility. With continuous gains
/// a user cannot improve while both channel sums stay exactly equal, so this
/// only matters for exact ties, where user-only improvements could cycle.
pub fn is_swap_blocking(m: &Matching, k: usize, other: usize, ctx: &UtilityContext, margin: f64) -> Result<bool> {
    let (Some(n), Some(n2)) = (m.channel_of(k), m.channel_of(other)) else {
        return Err(Error::Domain("both users must be matched".into()));
    };
    if n == n2 {
        return Err(Error::Domain(format!("users {k} and {other} share channel {n}")));
    }
    let before_n = m.users(n);
    let before_n2 = m.users(n2);
    let after_n: Vec<usize> = before_n.iter().map(|&u| if u == k { other } else { u }).collect();
    let after_n2: Vec<usize> = before_n2.iter().map(|&u| if u == other { k } else { u }).collect();
    let before = [
        ctx.user_utility(n, before_n, k),
        ctx.user_utility(n2, before_n2, other),
        ctx.channel_utility(n, before_n),
        ctx.channel_utility(n2, before_n2),
    ];
    let after = [
        ctx.user_utility(n2, &after_n2, k),
        ctx.user_utility(n, &after_n, other),
        ctx.channel_utility(n, &after_n),
        ctx.channel_utility(n2, &after_n2),
    ];
    let weak = before.iter().zip(&after).all(|(b, a)| a >= b);
    let strict = before[2..].iter().zip(&after[2..]).any(|(b, a)| a - b > margin);
    Ok(weak && strict)
}

/// Every swap-blocking pair `(k, other)` with `k < other`.
pub fn blocking_pairs(m: &Matching, ctx: &UtilityContext, margin: f64) -> Vec<(usize, usize)> {
    let nu = ctx.n_users();
    let mut out = Vec::new();
    for k in 0..nu {
        for other in k + 1..nu {
            match (m.channel_of(k), m.channel_of(other)) {
                (Some(a), Some(b)) if a != b => {
                    if is_swap_blocking(m, k, other, ctx, margin).unwrap_or(false) {
                        out.push((k, other));
                    }
                }
                _ => {}
            }
        }
    }
    out
}

const SWAP_SAFETY: usize = 16;

/// Proposal initialization followed by swap refinement to a two-sided stable matching.
pub fn assign_channels(ctx: &UtilityContext, cap: usize, margin: f64) -> Result<Matching> {
    let mut m = init_matching(ctx, cap)?;
    let nu = ctx.n_users();
    let limit = SWAP_SAFETY * nu * nu;
    loop {
        let mut swapped = false;
        for k in 0..nu {
            for other in k + 1..nu {
                let (Some(a), Some(b)) = (m.channel_of(k), m.channel_of(other)) else {
                    continue;
                };
                if a == b || !is_swap_blocking(&m, k, other, ctx, margin)? {
                    continue;
                }
                m.swap(k, other);
                m.swaps += 1;
                if m.swaps > limit {
                    return Err(Error::SwapLimit(limit));
                }
                m.utility_trace.push(ctx.total_utility(&m.assignment()));
                swapped = true;
            }
        }
        if !swapped {
            return Ok(m);
        }
    }
}

/// Number of ways to place `n_users` distinguishable users on `n_channels`
/// distinguishable channels holding at most `cap` users each.
pub fn assignment_count(n_users: usize, n_channels: usize, cap: usize) -> u128 {
    let mut binom = vec![vec![0u128; n_users + 1]; n_users + 1];
    for i in 0..=n_users {
        binom[i][0] = 1;
        for j in 1..=i {
            binom[i][j] = binom[i - 1][j - 1] + binom[i - 1][j];
        }
    }
    // ways[r] = ways to distribute the users so that r remain unplaced
    let mut ways = vec![0u128; n_users + 1];
    ways[n_users] = 1;
    for _ in 0..n_channels {
        let mut next = vec![0u128; n_users + 1];
        for r in 0..=n_users {
            if ways[r] == 0 {
                continue;
            }
            for take in 0..=cap.min(r) {
                next[r - take] = next[r - take].saturating_add(ways[r].saturating_mul(binom[r][take]));
            }
        }
        ways = next;
    }
    ways[0]
}

/// Every complete assignment respecting the capacity, refusing beyond `max_count`.
pub fn enumerate_assignments(n_users: usize, n_channels: usize, cap: usize, max_count: u128) -> Result<Vec<Assignment>> {
    let count = assignment_count(n_users, n_channels, cap);
    if count > max_count {
        return Err(Error::SearchTooLarge { count, cap: max_count });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut channels = vec![Vec::new(); n_channels];
    fn place(k: usize, n_users: usize, cap: usize, channels: &mut Vec<Vec<usize>>, out: &mut Vec<Assignment>) {
        if k == n_users {
            out.push(Assignment::new(channels.clone(), n_users).expect("users placed once"));
            return;
        }
        for n in 0..channels.len() {
            if channels[n].len() < cap {
                channels[n].push(k);
                place(k + 1, n_users, cap, channels, out);
                channels[n].pop();
            }
        }
    }
    place(0, n_users, cap, &mut channels, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ctx(gains: UserMatrix) -> UtilityContext {
        UtilityContext::from_gains(gains, 1.0, 1.0, AccessMode::Noma)
    }

    #[test]
    fn single_channel_keeps_strongest() {
        let c = ctx(vec![vec![1.0, 5.0, 3.0, 4.0]]);
        let m = init_matching(&c, 4).unwrap();
        assert_eq!(m.users(0), &[0, 1, 2, 3]);
        let c = ctx(vec![vec![1.0, 5.0, 3.0], vec![0.5, 0.5, 0.5]]);
        let m = init_matching(&c, 2).unwrap();
        assert_eq!(m.users(0), &[1, 2]);
        assert_eq!(m.users(1), &[0]);
    }

    #[test]
    fn two_by_two_example() {
        // gains[n][k]: user 0 prefers channel 0 (3 > 2), user 1 prefers channel 1 (5 > 1)
        let c = ctx(vec![vec![3.0, 1.0], vec![2.0, 5.0]]);
        let m = assign_channels(&c, 1, 1e-9).unwrap();
        assert_eq!(m.channel_of(0), Some(0));
        assert_eq!(m.channel_of(1), Some(1));
    }

    #[test]
    fn identical_gains_are_deterministic_and_not_blocking() {
        let c = ctx(vec![vec![2.0; 4], vec![2.0; 4]]);
        let a = assign_channels(&c, 2, 1e-9).unwrap();
        let b = assign_channels(&c, 2, 1e-9).unwrap();
        assert_eq!(a, b);
        assert!(blocking_pairs(&a, &c, 1e-9).is_empty());
        a.check_consistency(2).unwrap();
    }

    #[test]
    fn same_channel_pair_is_an_error() {
        let c = ctx(vec![vec![2.0, 3.0], vec![1.0, 1.0]]);
        let m = init_matching(&c, 2).unwrap();
        assert!(is_swap_blocking(&m, 0, 1, &c, 1e-9).is_err());
    }

    #[test]
    fn counts() {
        assert_eq!(assignment_count(4, 2, 2), 6);
        assert_eq!(assignment_count(6, 3, 2), 90);
        assert_eq!(assignment_count(3, 1, 3), 1);
        assert_eq!(enumerate_assignments(4, 2, 2, 100).unwrap().len(), 6);
        assert!(matches!(enumerate_assignments(6, 3, 2, 10), Err(Error::SearchTooLarge { count: 90, .. })));
    }
}
