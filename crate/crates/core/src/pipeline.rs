//! End-to-end allocation: the three-step algorithm, its baselines and the
//! exhaustive oracles used to judge it.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decode_order::optimize_decoding_order;
use crate::error::{Error, Result};
use crate::matching::{assign_channels, enumerate_assignments, AccessMode, UtilityContext};
use crate::power_alloc::{find_feasible, optimize_power, tight_state, PowerState};
use crate::reflect_design::optimize_reflection;
use crate::scenario::{
    gain_matrix, rates, sic_feasible, sum_rate, zero_matrix, Assignment, ChannelRealization, DecodingOrder,
    ReflectionVector, SystemConfig, UserMatrix,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Algorithm {
    ExhaustIrsNoma,
    ThreeStepIrsNoma,
    RandomIrsNoma,
    ExhaustIrsOma,
    TwoStepIrsOma,
    NomaNoIrs,
    OmaNoIrs,
}

impl Algorithm {
    pub const ALL: [Algorithm; 7] = [
        Algorithm::ExhaustIrsNoma,
        Algorithm::ThreeStepIrsNoma,
        Algorithm::RandomIrsNoma,
        Algorithm::ExhaustIrsOma,
        Algorithm::TwoStepIrsOma,
        Algorithm::NomaNoIrs,
        Algorithm::OmaNoIrs,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Algorithm::ExhaustIrsNoma => "Exhaust-IRS-NOMA",
            Algorithm::ThreeStepIrsNoma => "ThreeStep-IRS-NOMA",
            Algorithm::RandomIrsNoma => "Random-IRS-NOMA",
            Algorithm::ExhaustIrsOma => "Exhaust-IRS-OMA",
            Algorithm::TwoStepIrsOma => "TwoStep-IRS-OMA",
            Algorithm::NomaNoIrs => "NOMA-noIRS",
            Algorithm::OmaNoIrs => "OMA-noIRS",
        }
    }

    pub fn mode(self) -> AccessMode {
        match self {
            Algorithm::ExhaustIrsOma | Algorithm::TwoStepIrsOma | Algorithm::OmaNoIrs => AccessMode::Oma,
            _ => AccessMode::Noma,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.label().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown algorithm label `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    pub algorithm: Algorithm,
    pub assignment: Assignment,
    pub order: DecodingOrder,
    /// Power per (channel, user), watts.
    pub power: UserMatrix,
    pub reflection: ReflectionVector,
    /// Rate per (channel, user), bit/s/Hz.
    pub rates: UserMatrix,
    pub throughput: f64,
    /// Objective at the start of the joint step and after every outer iteration.
    pub trace: Vec<f64>,
    pub outer_iterations: usize,
    pub converged: bool,
    pub feasible: bool,
    pub min_rate_met: bool,
    /// Why the solution is infeasible, if it is.
    pub note: Option<String>,
}

/// Independent random streams, so changing how much one consumer draws never
/// shifts another.
#[derive(Debug, Clone, Copy)]
enum Stream {
    Joint = 1,
    Randomization = 2,
    RandomOrder = 3,
}

fn rng(config: &SystemConfig, stream: Stream) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(config.seed);
    r.set_stream(stream as u64);
    r
}

const RATE_TOL: f64 = 1e-6;

/// Rates on every channel with equal time shares among its users.
pub fn oma_rates(chan: &ChannelRealization, assignment: &Assignment, p: &UserMatrix, e: &ReflectionVector) -> UserMatrix {
    let gains = gain_matrix(chan, e);
    let mut r = zero_matrix(chan.n_channels, chan.n_users);
    for n in 0..assignment.n_channels() {
        let users = assignment.users(n);
        let share = 1.0 / users.len().max(1) as f64;
        for &k in users {
            r[n][k] = share * (p[n][k] * gains[n][k] / chan.noise_power).ln_1p() / std::f64::consts::LN_2;
        }
    }
    r
}

fn min_rate_met(r: &UserMatrix, assignment: &Assignment, r_min: f64) -> bool {
    (0..assignment.n_channels()).all(|n| assignment.users(n).iter().all(|&k| r[n][k] >= r_min - RATE_TOL))
}

fn within_budget(p: &UserMatrix, p_max: f64) -> bool {
    p.iter().flatten().all(|&x| x >= 0.0) && p.iter().flatten().sum::<f64>() <= p_max * (1.0 + RATE_TOL) + 1e-300
}

/// Result of the joint power/reflection step.
struct Joint {
    power: UserMatrix,
    reflection: ReflectionVector,
    trace: Vec<f64>,
    converged: bool,
    note: Option<String>,
}

fn infeasible_solution(
    algorithm: Algorithm,
    chan: &ChannelRealization,
    assignment: Assignment,
    order: DecodingOrder,
    reflection: ReflectionVector,
    note: String,
) -> Solution {
    Solution {
        algorithm,
        assignment,
        order,
        power: zero_matrix(chan.n_channels, chan.n_users),
        reflection,
        rates: zero_matrix(chan.n_channels, chan.n_users),
        throughput: 0.0,
        trace: Vec::new(),
        outer_iterations: 0,
        converged: false,
        feasible: false,
        min_rate_met: false,
        note: Some(note),
    }
}

/// Alternating power and reflection optimization for a fixed assignment and
/// decoding order. Each update is kept only if the sum rate does not drop and
/// the decoding order stays consistent with the gains.
fn joint_noma(
    chan: &ChannelRealization,
    order: &DecodingOrder,
    e0: ReflectionVector,
    reflect: bool,
    config: &SystemConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Joint> {
    let tol = &config.tolerances;
    let init = find_feasible(chan, order, &e0, config, rng)?;
    let objective = |p: &UserMatrix, e: &ReflectionVector| sum_rate(&rates(chan, order, p, e));
    let mut e = e0;
    let mut p = init.p.clone();
    let mut obj = objective(&p, &e);
    let mut trace = vec![obj];
    let mut start: PowerState = init;
    let mut converged = false;
    let mut note = None;
    for _ in 0..tol.outer_iter_cap {
        let prev = obj;
        match optimize_power(chan, order, &e, &start, config) {
            Ok(st) => {
                let cand = objective(&st.p, &e);
                if cand >= obj {
                    p = st.p;
                    obj = cand;
                }
            }
            Err(err) => note = Some(format!("power step stopped: {err}")),
        }
        if reflect {
            let chi = tight_state(chan, order, &e, &p, tol.chi_floor).chi;
            match optimize_reflection(chan, order, &p, &chi, &e, config) {
                Ok(out) if !out.fallback => {
                    let cand = objective(&p, &out.e);
                    if cand >= obj - 1e-9 * obj.abs() && sic_feasible(chan, order, &out.e, 0.0) {
                        e = out.e;
                        obj = cand.max(obj);
                    }
                }
                Ok(_) => {}
                Err(err) => note = Some(format!("reflection step stopped: {err}")),
            }
        }
        trace.push(obj);
        start = tight_state(chan, order, &e, &p, tol.chi_floor);
        if note.is_some() {
            break;
        }
        if (obj - prev).abs() <= tol.outer_tol * prev.abs().max(1e-12) {
            converged = true;
            break;
        }
    }
    Ok(Joint { power: p, reflection: e, trace, converged, note })
}

fn finish_noma(
    algorithm: Algorithm,
    chan: &ChannelRealization,
    assignment: Assignment,
    order: DecodingOrder,
    joint: Joint,
    config: &SystemConfig,
) -> Solution {
    let r = rates(chan, &order, &joint.power, &joint.reflection);
    let min_ok = min_rate_met(&r, &assignment, config.r_min);
    let sic_ok = sic_feasible(chan, &order, &joint.reflection, 0.0);
    let budget_ok = within_budget(&joint.power, config.p_max);
    let unit_ok = joint.reflection.max_modulus() <= 1.0 + 1e-12;
    let feasible = min_ok && sic_ok && budget_ok && unit_ok;
    let note = if feasible {
        None
    } else if !sic_ok {
        Some("decoding order inconsistent with final gains".into())
    } else if !min_ok {
        Some("minimum rate not met".into())
    } else {
        Some("budget or reflection constraint violated".into())
    };
    Solution {
        algorithm,
        assignment,
        order,
        throughput: sum_rate(&r),
        rates: r,
        power: joint.power,
        reflection: joint.reflection,
        outer_iterations: joint.trace.len().saturating_sub(1),
        trace: joint.trace,
        converged: joint.converged,
        feasible,
        min_rate_met: min_ok,
        note: note.or(joint.note),
    }
}

fn initial_reflection(chan: &ChannelRealization, config: &SystemConfig, theta: &ReflectionVector, rng: &mut ChaCha8Rng) -> ReflectionVector {
    let random = ReflectionVector::random_phases(chan.n_elements, rng);
    if config.warm_start_reflection {
        theta.clone()
    } else {
        random
    }
}

/// Joint step for a fixed assignment and order, reporting infeasibility in the solution.
pub fn solve_fixed_order(
    algorithm: Algorithm,
    chan: &ChannelRealization,
    assignment: &Assignment,
    order: &DecodingOrder,
    theta: &ReflectionVector,
    config: &SystemConfig,
) -> Result<Solution> {
    order.validate_against(assignment)?;
    let mut rng = rng(config, Stream::Joint);
    let e0 = initial_reflection(chan, config, theta, &mut rng);
    let reflect = algorithm != Algorithm::NomaNoIrs;
    match joint_noma(chan, order, e0.clone(), reflect, config, &mut rng) {
        Ok(joint) => Ok(finish_noma(algorithm, chan, assignment.clone(), order.clone(), joint, config)),
        Err(Error::Infeasible(msg)) => Ok(infeasible_solution(algorithm, chan, assignment.clone(), order.clone(), e0, msg)),
        Err(err) => Err(err),
    }
}

fn noma_downstream(algorithm: Algorithm, chan: &ChannelRealization, assignment: &Assignment, config: &SystemConfig) -> Result<Solution> {
    let mut sdr_rng = rng(config, Stream::Randomization);
    let sdr = optimize_decoding_order(chan, assignment, config, &mut sdr_rng)?;
    solve_fixed_order(algorithm, chan, assignment, &sdr.order, &sdr.theta, config)
}

fn matched_assignment(chan: &ChannelRealization, config: &SystemConfig, mode: AccessMode) -> Result<Assignment> {
    let ctx = UtilityContext::new(chan, config, mode);
    Ok(assign_channels(&ctx, config.per_channel_cap, config.tolerances.swap_margin)?.assignment())
}

/// Matching, SDR decoding order, then alternating power and reflection design.
pub fn three_step(chan: &ChannelRealization, config: &SystemConfig) -> Result<Solution> {
    let assignment = matched_assignment(chan, config, AccessMode::Noma)?;
    noma_downstream(Algorithm::ThreeStepIrsNoma, chan, &assignment, config)
}

/// As [`three_step`] but with a uniformly random decoding order on every channel.
pub fn random_order_variant(chan: &ChannelRealization, config: &SystemConfig) -> Result<Solution> {
    let assignment = matched_assignment(chan, config, AccessMode::Noma)?;
    let mut order_rng = rng(config, Stream::RandomOrder);
    let order = DecodingOrder::new(
        assignment
            .channels()
            .iter()
            .map(|users| {
                let mut u = users.clone();
                u.shuffle(&mut order_rng);
                u
            })
            .collect(),
    );
    let theta = ReflectionVector::ones(chan.n_elements);
    solve_fixed_order(Algorithm::RandomIrsNoma, chan, &assignment, &order, &theta, config)
}

/// Classical water-filling: `p_i = (mu - floor_i)+` with `sum p = budget`.
/// Slots with an infinite floor get nothing.
pub fn water_fill(floors: &[f64], budget: f64) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..floors.len()).filter(|&i| floors[i].is_finite()).collect();
    idx.sort_by(|&a, &b| floors[a].total_cmp(&floors[b]));
    let mut out = vec![0.0; floors.len()];
    if budget <= 0.0 || idx.is_empty() {
        return out;
    }
    let mut level = 0.0;
    let mut sum = 0.0;
    for (j, &i) in idx.iter().enumerate() {
        sum += floors[i];
        let mu = (budget + sum) / (j + 1) as f64;
        let next = idx.get(j + 1).map_or(f64::INFINITY, |&n| floors[n]);
        if mu <= next {
            level = mu;
            break;
        }
    }
    for &i in &idx {
        out[i] = (level - floors[i]).max(0.0);
    }
    out
}

fn oma_power(chan: &ChannelRealization, assignment: &Assignment, e: &ReflectionVector, p_max: f64) -> UserMatrix {
    let gains = gain_matrix(chan, e);
    let pairs: Vec<(usize, usize)> = (0..assignment.n_channels())
        .flat_map(|n| assignment.users(n).iter().map(move |&k| (n, k)))
        .collect();
    let floors: Vec<f64> = pairs
        .iter()
        .map(|&(n, k)| if gains[n][k] > 0.0 { chan.noise_power / gains[n][k] } else { f64::INFINITY })
        .collect();
    let p = water_fill(&floors, p_max);
    let mut out = zero_matrix(chan.n_channels, chan.n_users);
    for (&(n, k), &x) in pairs.iter().zip(&p) {
        out[n][k] = x;
    }
    out
}

/// Time-shared OMA on a fixed assignment: water-filling power alternated with
/// reflection design that raises every user's gain.
pub fn oma_fixed_assignment(algorithm: Algorithm, chan: &ChannelRealization, assignment: &Assignment, config: &SystemConfig) -> Result<Solution> {
    let tol = &config.tolerances;
    let mut rng = rng(config, Stream::Joint);
    let mut e = ReflectionVector::random_phases(chan.n_elements, &mut rng);
    let reflect = algorithm != Algorithm::OmaNoIrs;
    // One user per "channel": no ordering pairs, SINR surrogate = SNR, no interference.
    let singles = DecodingOrder::new(
        (0..assignment.n_channels())
            .map(|n| assignment.users(n).to_vec())
            .flat_map(|users| users.into_iter().map(|k| vec![k]))
            .collect(),
    );
    let single_chan = split_channels(chan, assignment);
    let objective = |p: &UserMatrix, e: &ReflectionVector| sum_rate(&oma_rates(chan, assignment, p, e));
    let mut p = oma_power(chan, assignment, &e, config.p_max);
    let mut obj = objective(&p, &e);
    let mut trace = vec![obj];
    let mut converged = false;
    let mut note = None;
    for _ in 0..tol.outer_iter_cap {
        let prev = obj;
        if reflect {
            let ps = spread(&p, assignment, &singles);
            let chi = tight_state(&single_chan, &singles, &e, &ps, tol.chi_floor).chi;
            match optimize_reflection(&single_chan, &singles, &ps, &chi, &e, config) {
                Ok(out) if !out.fallback => {
                    let cand = objective(&p, &out.e);
                    if cand >= obj {
                        e = out.e;
                        obj = cand;
                    }
                }
                Ok(_) => {}
                Err(err) => note = Some(format!("reflection step stopped: {err}")),
            }
        }
        let cand_p = oma_power(chan, assignment, &e, config.p_max);
        let cand = objective(&cand_p, &e);
        if cand >= obj {
            p = cand_p;
            obj = cand;
        }
        trace.push(obj);
        if note.is_some() {
            break;
        }
        if (obj - prev).abs() <= tol.outer_tol * prev.abs().max(1e-12) {
            converged = true;
            break;
        }
    }
    let r = oma_rates(chan, assignment, &p, &e);
    let min_ok = min_rate_met(&r, assignment, config.r_min);
    let feasible = min_ok && within_budget(&p, config.p_max) && e.max_modulus() <= 1.0 + 1e-12;
    Ok(Solution {
        algorithm,
        assignment: assignment.clone(),
        order: DecodingOrder::identity(assignment),
        throughput: sum_rate(&r),
        rates: r,
        power: p,
        reflection: e,
        outer_iterations: trace.len() - 1,
        trace,
        converged,
        feasible,
        min_rate_met: min_ok,
        note: if feasible { note } else { Some("minimum rate not met".into()) },
    })
}

/// Realization with one virtual channel per assigned user, used to run the
/// reflection design without any pairing between users.
fn split_channels(chan: &ChannelRealization, assignment: &Assignment) -> ChannelRealization {
    let mut out = chan.clone();
    out.h.clear();
    out.g.clear();
    out.f.clear();
    out.f_los.clear();
    out.f_nlos.clear();
    for n in 0..assignment.n_channels() {
        for _ in assignment.users(n) {
            out.h.push(chan.h[n].clone());
            out.g.push(chan.g[n].clone());
            out.f.push(chan.f[n].clone());
            out.f_los.push(chan.f_los[n].clone());
            out.f_nlos.push(chan.f_nlos[n].clone());
        }
    }
    out.n_channels = out.h.len();
    out
}

fn spread(p: &UserMatrix, assignment: &Assignment, singles: &DecodingOrder) -> UserMatrix {
    let n_users = p.first().map_or(0, Vec::len);
    let mut out = zero_matrix(singles.n_channels(), n_users);
    let mut v = 0;
    for n in 0..assignment.n_channels() {
        for &k in assignment.users(n) {
            out[v][k] = p[n][k];
            v += 1;
        }
    }
    out
}

/// Matching with OMA utilities, then water-filling alternated with reflection design.
pub fn oma_waterfill(chan: &ChannelRealization, config: &SystemConfig) -> Result<Solution> {
    let assignment = matched_assignment(chan, config, AccessMode::Oma)?;
    oma_fixed_assignment(Algorithm::TwoStepIrsOma, chan, &assignment, config)
}

/// The NOMA or OMA pipeline with the reflection path removed.
pub fn no_irs_variant(chan: &ChannelRealization, config: &SystemConfig, mode: AccessMode) -> Result<Solution> {
    let plain = chan.without_irs();
    let assignment = matched_assignment(&plain, config, mode)?;
    let mut sol = match mode {
        AccessMode::Noma => noma_downstream(Algorithm::NomaNoIrs, &plain, &assignment, config)?,
        AccessMode::Oma => oma_fixed_assignment(Algorithm::OmaNoIrs, &plain, &assignment, config)?,
    };
    sol.reflection = ReflectionVector::zeros(chan.n_elements);
    Ok(sol)
}

fn better(a: &Solution, b: &Solution) -> bool {
    (a.feasible, a.throughput) > (b.feasible, b.throughput)
}

/// Runs the downstream steps on every capacity-respecting assignment and keeps the best.
pub fn exhaustive_assignment(chan: &ChannelRealization, config: &SystemConfig, mode: AccessMode) -> Result<Solution> {
    let all = enumerate_assignments(chan.n_users, chan.n_channels, config.per_channel_cap, config.max_assignments)?;
    let mut best: Option<Solution> = None;
    for a in &all {
        let sol = match mode {
            AccessMode::Noma => noma_downstream(Algorithm::ExhaustIrsNoma, chan, a, config)?,
            AccessMode::Oma => oma_fixed_assignment(Algorithm::ExhaustIrsOma, chan, a, config)?,
        };
        if best.as_ref().is_none_or(|b| better(&sol, b)) {
            best = Some(sol);
        }
    }
    best.ok_or_else(|| Error::Domain("no assignment to enumerate".into()))
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head);
            out.push(tail);
        }
    }
    out
}

/// Every combination of per-channel decoding orders for `assignment`.
pub fn enumerate_orders(assignment: &Assignment, max_count: u128) -> Result<Vec<DecodingOrder>> {
    let count = assignment
        .channels()
        .iter()
        .map(|u| (1..=u.len() as u128).product::<u128>())
        .try_fold(1u128, |acc, c| acc.checked_mul(c))
        .unwrap_or(u128::MAX);
    if count > max_count {
        return Err(Error::SearchTooLarge { count, cap: max_count });
    }
    let mut combos: Vec<Vec<Vec<usize>>> = vec![Vec::new()];
    for users in assignment.channels() {
        let perms = permutations(users);
        combos = combos
            .into_iter()
            .flat_map(|prefix| {
                perms.iter().map(move |p| {
                    let mut next = prefix.clone();
                    next.push(p.clone());
                    next
                })
            })
            .collect();
    }
    Ok(combos.into_iter().map(DecodingOrder::new).collect())
}

/// Runs the joint step for every decoding-order combination and keeps the best.
pub fn exhaustive_order(chan: &ChannelRealization, assignment: &Assignment, config: &SystemConfig) -> Result<(DecodingOrder, Solution)> {
    let orders = enumerate_orders(assignment, config.max_order_combinations)?;
    let theta = ReflectionVector::ones(chan.n_elements);
    let mut best: Option<Solution> = None;
    for order in &orders {
        let sol = solve_fixed_order(Algorithm::ThreeStepIrsNoma, chan, assignment, order, &theta, config)?;
        if best.as_ref().is_none_or(|b| better(&sol, b)) {
            best = Some(sol);
        }
    }
    let sol = best.expect("at least one order");
    Ok((sol.order.clone(), sol))
}

/// Best over every assignment and every decoding order: the full search oracle.
pub fn exhaustive_joint(chan: &ChannelRealization, config: &SystemConfig) -> Result<Solution> {
    let all = enumerate_assignments(chan.n_users, chan.n_channels, config.per_channel_cap, config.max_assignments)?;
    let mut best: Option<Solution> = None;
    for a in &all {
        let (_, sol) = exhaustive_order(chan, a, config)?;
        if best.as_ref().is_none_or(|b| better(&sol, b)) {
            best = Some(sol);
        }
    }
    best.ok_or_else(|| Error::Domain("no assignment to enumerate".into()))
}

/// Large-scale reflected-plus-direct gain with the IRS on the BS-user segment,
/// `1e-6 (d (D - d))^-a + 1e-3 D^-b` for BS-IRS distance `d` and BS-user distance `D`.
pub fn placement_gain_approx(d_bs_irs: f64, d_bs_user: f64, reflect_exponent: f64, direct_exponent: f64) -> Result<f64> {
    if !(d_bs_irs > 0.0 && d_bs_irs < d_bs_user) || !d_bs_user.is_finite() {
        return Err(Error::Domain(format!(
            "IRS distance {d_bs_irs} must lie strictly between 0 and the user distance {d_bs_user}"
        )));
    }
    Ok(1e-6 * (d_bs_irs * (d_bs_user - d_bs_irs)).powf(-reflect_exponent) + 1e-3 * d_bs_user.powf(-direct_exponent))
}

/// Runs `algorithm` on one realization.
pub fn run(algorithm: Algorithm, chan: &ChannelRealization, config: &SystemConfig) -> Result<Solution> {
    match algorithm {
        Algorithm::ThreeStepIrsNoma => three_step(chan, config),
        Algorithm::RandomIrsNoma => random_order_variant(chan, config),
        Algorithm::ExhaustIrsNoma => exhaustive_assignment(chan, config, AccessMode::Noma),
        Algorithm::ExhaustIrsOma => exhaustive_assignment(chan, config, AccessMode::Oma),
        Algorithm::TwoStepIrsOma => oma_waterfill(chan, config),
        Algorithm::NomaNoIrs => no_irs_variant(chan, config, AccessMode::Noma),
        Algorithm::OmaNoIrs => no_irs_variant(chan, config, AccessMode::Oma),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::sample_channels;

    #[test]
    fn labels_round_trip() {
        for a in Algorithm::ALL {
            assert_eq!(a.label().parse::<Algorithm>().unwrap(), a);
        }
        assert!("nope".parse::<Algorithm>().is_err());
    }

    #[test]
    fn water_fill_closed_form() {
        let p = water_fill(&[0.25, 1.0], 1.0);
        assert!((p[0] - 0.875).abs() < 1e-12 && (p[1] - 0.125).abs() < 1e-12);
        let p = water_fill(&[0.5; 3], 0.9);
        assert!(p.iter().all(|&x| (x - 0.3).abs() < 1e-12));
        let p = water_fill(&[0.1, 10.0], 1.0);
        assert_eq!(p[1], 0.0);
        assert!((p[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn order_counts() {
        let a = Assignment::new(vec![vec![0, 1], vec![2, 3]], 4).unwrap();
        assert_eq!(enumerate_orders(&a, 100).unwrap().len(), 4);
        let single = Assignment::new(vec![vec![0], vec![1]], 2).unwrap();
        assert_eq!(enumerate_orders(&single, 100).unwrap().len(), 1);
        let big = Assignment::new(vec![vec![0, 1, 2, 3, 4]], 5).unwrap();
        assert!(enumerate_orders(&big, 100).is_err());
    }

    #[test]
    fn placement_is_symmetric_and_rejects_bad_distances() {
        let a = placement_gain_approx(10.0, 50.0, 2.5, 3.0).unwrap();
        let b = placement_gain_approx(40.0, 50.0, 2.5, 3.0).unwrap();
        assert!((a - b).abs() <= 1e-15 * a);
        assert!(a > placement_gain_approx(25.0, 50.0, 2.5, 3.0).unwrap());
        assert!(placement_gain_approx(0.0, 50.0, 2.5, 3.0).is_err());
        assert!(placement_gain_approx(50.0, 50.0, 2.5, 3.0).is_err());
    }

    #[test]
    fn three_step_default_instance() {
        let config = SystemConfig { seed: 3, ..SystemConfig::default() };
        let chan = sample_channels(&config, 3).unwrap();
        let sol = three_step(&chan, &config).unwrap();
        assert!(sol.feasible, "{:?}", sol.note);
        for w in sol.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-6);
        }
    }
}
