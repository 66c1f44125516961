//! SCA power allocation and the feasible-start search that seeds it.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scenario::{
    gain_matrix, sinr_from_gains, zero_matrix, Assignment, ChannelRealization, DecodingOrder, ReflectionVector,
    SystemConfig, UserMatrix,
};
use crate::subsolvers::power::surrogate_objective;
use crate::subsolvers::{solve_p3, solve_p4, BarrierSettings, PowerSubproblem};

/// Per-user SCA fixed points; `None` for the last-decoded user of a channel,
/// whose interference sum is empty.
pub type AlphaMatrix = Vec<Vec<Option<f64>>>;

#[derive(Debug, Clone, PartialEq)]
pub struct PowerState {
    /// Power per (channel, user), watts. Zero for unassigned pairs.
    pub p: UserMatrix,
    /// SINR surrogate per (channel, user).
    pub chi: UserMatrix,
    pub alpha: AlphaMatrix,
    /// Final infeasibility indicator of the feasibility search (zero otherwise).
    pub z_slack: f64,
    pub iterations: usize,
    /// Surrogate objective per power iteration, or indicator per feasibility round.
    pub trace: Vec<f64>,
}

impl PowerState {
    pub fn objective(&self) -> f64 {
        surrogate_objective(&self.chi.iter().flatten().copied().collect::<Vec<_>>())
    }

    pub fn total_power(&self) -> f64 {
        self.p.iter().flatten().sum()
    }
}

/// Flattening of the assigned (channel, user) pairs in decoding order.
struct Slots {
    pairs: Vec<(usize, usize)>,
    groups: Vec<Vec<usize>>,
}

impl Slots {
    fn new(order: &DecodingOrder) -> Self {
        let mut pairs = Vec::new();
        let mut groups = Vec::new();
        for n in 0..order.n_channels() {
            let mut g = Vec::new();
            for &k in order.channel(n) {
                g.push(pairs.len());
                pairs.push((n, k));
            }
            groups.push(g);
        }
        Self { pairs, groups }
    }

    fn gather(&self, m: &UserMatrix) -> Vec<f64> {
        self.pairs.iter().map(|&(n, k)| m[n][k]).collect()
    }

    fn scatter(&self, v: &[f64], n_channels: usize, n_users: usize) -> UserMatrix {
        let mut m = zero_matrix(n_channels, n_users);
        for (&(n, k), &x) in self.pairs.iter().zip(v) {
            m[n][k] = x;
        }
        m
    }
}

/// `alpha = (sum of later-decoded powers) / chi`, with `chi` floored at `chi_floor`.
pub fn update_alpha(order: &DecodingOrder, p: &UserMatrix, chi: &UserMatrix, chi_floor: f64) -> AlphaMatrix {
    let n_users = p.first().map_or(0, Vec::len);
    let mut alpha = vec![vec![None; n_users]; order.n_channels()];
    for n in 0..order.n_channels() {
        let list = order.channel(n);
        for (pos, &k) in list.iter().enumerate() {
            if pos + 1 == list.len() {
                continue;
            }
            let s: f64 = list[pos + 1..].iter().map(|&j| p[n][j]).sum();
            alpha[n][k] = Some(s / chi[n][k].max(chi_floor));
        }
    }
    alpha
}

fn noise_ratios(chan: &ChannelRealization, slots: &Slots, e: &ReflectionVector) -> Result<(UserMatrix, Vec<f64>)> {
    let gains = gain_matrix(chan, e);
    let nu = slots
        .pairs
        .iter()
        .map(|&(n, k)| {
            let g = gains[n][k];
            if g > 0.0 && g.is_finite() {
                Ok(chan.noise_power / g)
            } else {
                Err(Error::Domain(format!("combined gain of user {k} on channel {n} is zero")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((gains, nu))
}

/// Builds the subproblem around `(p, chi)` with fixed points refreshed at that point.
fn subproblem(
    slots: &Slots,
    order: &DecodingOrder,
    nu: &[f64],
    p: &UserMatrix,
    chi: &UserMatrix,
    config: &SystemConfig,
) -> Result<PowerSubproblem> {
    let alpha = update_alpha(order, p, chi, config.tolerances.chi_floor);
    // A zero interference sum would give alpha = 0; any small positive value keeps
    // the bound valid and nearly tight.
    let floor = 1e-12 * if config.p_max > 0.0 { config.p_max } else { 1.0 };
    let a: Vec<f64> = slots
        .pairs
        .iter()
        .map(|&(n, k)| alpha[n][k].map_or(1.0, |a| a.max(floor)))
        .collect();
    PowerSubproblem::new(
        slots.groups.clone(),
        nu.to_vec(),
        a,
        config.r_min,
        config.p_max,
        slots.gather(p),
        slots.gather(chi),
    )
}

fn validate_inputs(chan: &ChannelRealization, order: &DecodingOrder, e: &ReflectionVector) -> Result<()> {
    if order.n_channels() != chan.n_channels {
        return Err(Error::Domain("decoding order and channel realization disagree".into()));
    }
    if e.len() != chan.n_elements {
        return Err(Error::Domain("reflection vector length differs from element count".into()));
    }
    Assignment::new(order.channels().to_vec(), chan.n_users).map(|_| ())
}

/// Searches for a point strictly feasible for the power subproblem by driving
/// the shared infeasibility indicator to zero from a random start.
pub fn find_feasible<R: Rng + ?Sized>(
    chan: &ChannelRealization,
    order: &DecodingOrder,
    e: &ReflectionVector,
    config: &SystemConfig,
    rng: &mut R,
) -> Result<PowerState> {
    validate_inputs(chan, order, e)?;
    let tol = &config.tolerances;
    let slots = Slots::new(order);
    let (nc, nu_users) = (chan.n_channels, chan.n_users);
    let (gains, nu) = noise_ratios(chan, &slots, e)?;
    let settings = BarrierSettings::from_tolerances(tol);

    let share = config.p_max / slots.pairs.len().max(1) as f64;
    let p0: Vec<f64> = slots
        .pairs
        .iter()
        .map(|_| share * (1.0 - rng.random::<f64>()))
        .collect();
    let mut p = slots.scatter(&p0, nc, nu_users);
    let sinr = sinr_from_gains(&gains, order, &p, chan.noise_power);
    let mut chi: UserMatrix = sinr.iter().map(|r| r.iter().map(|s| 0.5 * s).collect()).collect();

    let mut trace = Vec::new();
    for round in 1..=tol.feasibility_iter_cap {
        let sub = subproblem(&slots, order, &nu, &p, &chi, config)?;
        let out = solve_p4(&sub, &settings)?;
        p = slots.scatter(&out.p, nc, nu_users);
        chi = slots.scatter(&out.chi, nc, nu_users);
        trace.push(out.z);
        if out.z < tol.feasibility_threshold {
            return Ok(PowerState {
                alpha: update_alpha(order, &p, &chi, tol.chi_floor),
                p,
                chi,
                z_slack: out.z,
                iterations: round,
                trace,
            });
        }
    }
    Err(Error::Infeasible(format!(
        "feasibility indicator stayed at {:.3e} after {} rounds",
        trace.last().copied().unwrap_or(f64::INFINITY),
        tol.feasibility_iter_cap
    )))
}

/// SCA power loop: refresh the fixed points, solve the convexified problem,
/// repeat until the surrogate sum rate settles.
///
/// An iterate is only accepted if it does not lower the objective, so the
/// returned trace is non-decreasing even when a subproblem solve is inexact.
pub fn optimize_power(
    chan: &ChannelRealization,
    order: &DecodingOrder,
    e: &ReflectionVector,
    init: &PowerState,
    config: &SystemConfig,
) -> Result<PowerState> {
    validate_inputs(chan, order, e)?;
    let tol = &config.tolerances;
    let slots = Slots::new(order);
    let (nc, nu_users) = (chan.n_channels, chan.n_users);
    let (_, nu) = noise_ratios(chan, &slots, e)?;
    let settings = BarrierSettings::from_tolerances(tol);

    let mut p = init.p.clone();
    let mut chi = init.chi.clone();
    let mut obj = init.objective();
    let mut trace = vec![obj];
    let mut iterations = 0;
    while iterations < tol.power_iter_cap {
        iterations += 1;
        let sub = subproblem(&slots, order, &nu, &p, &chi, config)?;
        let out = solve_p3(&sub, &settings).map_err(|err| match err {
            Error::Infeasible(msg) => Error::Infeasible(format!("power iteration {iterations}: {msg}")),
            other => other,
        })?;
        if out.objective < obj {
            break;
        }
        let change = (out.objective - obj).abs() / obj.abs().max(1e-12);
        p = slots.scatter(&out.p, nc, nu_users);
        chi = slots.scatter(&out.chi, nc, nu_users);
        obj = out.objective;
        trace.push(obj);
        if change < tol.sca {
            break;
        }
    }
    Ok(PowerState {
        alpha: update_alpha(order, &p, &chi, tol.chi_floor),
        p,
        chi,
        z_slack: 0.0,
        iterations,
        trace,
    })
}

/// Power state whose surrogate equals the achieved SINR at `p`.
pub fn tight_state(chan: &ChannelRealization, order: &DecodingOrder, e: &ReflectionVector, p: &UserMatrix, chi_floor: f64) -> PowerState {
    let gains = gain_matrix(chan, e);
    let chi = sinr_from_gains(&gains, order, p, chan.noise_power);
    PowerState {
        alpha: update_alpha(order, p, &chi, chi_floor),
        p: p.clone(),
        chi,
        z_slack: 0.0,
        iterations: 0,
        trace: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::sample_channels;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn alpha_arithmetic() {
        let order = DecodingOrder::new(vec![vec![0, 1, 2]]);
        let p = vec![vec![1.0, 1.5, 0.5]];
        let chi = vec![vec![0.5, 0.25, 1.0]];
        let a = update_alpha(&order, &p, &chi, 1e-12);
        assert_eq!(a[0][0], Some(4.0));
        assert_eq!(a[0][1], Some(2.0));
        assert_eq!(a[0][2], None);
    }

    #[test]
    fn bound_is_tight_at_fixed_point() {
        let (s, chi) = (2.0f64, 0.5f64);
        let a = s / chi;
        let bound = s * s / (2.0 * a) + a * chi * chi / 2.0;
        assert!((bound - chi * s).abs() < 1e-15);
    }

    #[test]
    fn default_instance_becomes_feasible_then_improves() {
        let config = SystemConfig::default();
        let chan = sample_channels(&config, 7).unwrap();
        let a = Assignment::new(vec![vec![0, 1], vec![2, 3]], 4).unwrap();
        let e = ReflectionVector::ones(config.n_elements);
        let order = crate::scenario::ascending_order(&gain_matrix(&chan, &e), a.channels());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let init = find_feasible(&chan, &order, &e, &config, &mut rng).unwrap();
        assert!(init.z_slack < 1e-6);
        assert!(init.iterations <= 10);
        for w in init.trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
        let out = optimize_power(&chan, &order, &e, &init, &config).unwrap();
        assert!(out.objective() >= init.objective());
        for w in out.trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
        assert!(out.total_power() <= config.p_max * (1.0 + 1e-6));
    }

    #[test]
    fn zero_budget_is_infeasible() {
        let config = SystemConfig { p_max: 0.0, ..SystemConfig::default() };
        let chan = sample_channels(&config, 3).unwrap();
        let order = DecodingOrder::new(vec![vec![0, 1], vec![2, 3]]);
        let e = ReflectionVector::ones(config.n_elements);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(matches!(find_feasible(&chan, &order, &e, &config, &mut rng), Err(Error::Infeasible(_))));
    }
}
