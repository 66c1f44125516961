//! SCA over the reflection vector.
//!
//! Each combined gain `|z e + h|^2` is written as `kappa^2 + xi^2` with
//! `kappa`, `xi` affine in the real and imaginary parts of `e`. Where a gain
//! must be large it is replaced by its tangent plane at the previous iterate,
//! which is a global lower bound, so every iterate satisfies the original
//! ordering and SINR constraints.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::scenario::{zero_matrix, ChannelRealization, DecodingOrder, ReflectionVector, SystemConfig, UserMatrix};
use crate::subsolvers::{max_min_slack, BarrierSettings, ReflectionSubproblem, ReflectionUser};

/// Tangent-plane lower bound of `kappa^2 + xi^2` at `(kappa_lin, xi_lin)`.
pub fn phi_lower_bound(kappa: f64, xi: f64, kappa_lin: f64, xi_lin: f64) -> f64 {
    kappa_lin * kappa_lin + xi_lin * xi_lin + 2.0 * kappa_lin * (kappa - kappa_lin) + 2.0 * xi_lin * (xi - xi_lin)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionScaState {
    pub e: ReflectionVector,
    /// Real and imaginary parts of `z e + h` per (channel, user), noise-normalized.
    pub kappa: UserMatrix,
    pub xi: UserMatrix,
    pub kappa_lin: UserMatrix,
    pub xi_lin: UserMatrix,
    pub iteration: usize,
}

impl ReflectionScaState {
    pub fn new(chan: &ChannelRealization, order: &DecodingOrder, e: ReflectionVector) -> Self {
        let mut s = Self {
            e,
            kappa: zero_matrix(chan.n_channels, chan.n_users),
            xi: zero_matrix(chan.n_channels, chan.n_users),
            kappa_lin: zero_matrix(chan.n_channels, chan.n_users),
            xi_lin: zero_matrix(chan.n_channels, chan.n_users),
            iteration: 0,
        };
        s.evaluate(chan, order);
        s.refresh_linearization();
        s
    }

    /// Recomputes `kappa`, `xi` at the current `e`.
    fn evaluate(&mut self, chan: &ChannelRealization, order: &DecodingOrder) {
        let amp = chan.noise_power.sqrt();
        for n in 0..order.n_channels() {
            for &k in order.channel(n) {
                let v = chan.effective(n, k, &self.e) / amp;
                self.kappa[n][k] = v.re;
                self.xi[n][k] = v.im;
            }
        }
    }

    /// Moves the linearization point to the current iterate.
    pub fn refresh_linearization(&mut self) {
        self.kappa_lin.clone_from(&self.kappa);
        self.xi_lin.clone_from(&self.xi);
    }

    /// Noise-normalized combined gain of `(n, k)` at the current `e`.
    pub fn gain(&self, n: usize, k: usize) -> f64 {
        self.kappa[n][k].powi(2) + self.xi[n][k].powi(2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionOutcome {
    pub e: ReflectionVector,
    /// Set when no iterate satisfied the constraints and `e_init` was kept.
    pub fallback: bool,
    pub iterations: usize,
}

/// Per-user SINR constraint coefficients at the given power point, in
/// noise-normalized gain units: `beta * G + rhs <= G`.
fn sinr_terms(order: &DecodingOrder, n: usize, pos: usize, p: &UserMatrix, chi: &UserMatrix) -> (f64, f64) {
    let list = order.channel(n);
    let k = list[pos];
    let later: f64 = list[pos + 1..].iter().map(|&j| p[n][j]).sum();
    let pk = p[n][k].max(f64::MIN_POSITIVE);
    (chi[n][k] * later / pk, chi[n][k] / pk)
}

/// Alternates linearization and the convexified reflection problem at fixed
/// `(p, chi)` until `e` and the effective coefficients settle.
pub fn optimize_reflection(
    chan: &ChannelRealization,
    order: &DecodingOrder,
    p: &UserMatrix,
    chi: &UserMatrix,
    e_init: &ReflectionVector,
    config: &SystemConfig,
) -> Result<ReflectionOutcome> {
    let m = chan.n_elements;
    if e_init.len() != m {
        return Err(Error::Domain("reflection vector length differs from element count".into()));
    }
    let tol = &config.tolerances;
    let unchanged = ReflectionOutcome { e: e_init.clone(), fallback: false, iterations: 0 };
    let amp = chan.noise_power.sqrt();
    let mut slots = Vec::new();
    for n in 0..order.n_channels() {
        for (pos, &k) in order.channel(n).iter().enumerate() {
            slots.push((n, pos, k));
        }
    }
    let rows: Vec<Vec<Complex64>> =
        slots.iter().map(|&(n, _, k)| chan.cascade(n, k).iter().map(|z| z / amp).collect()).collect();
    if m == 0 || rows.iter().flatten().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return Ok(unchanged);
    }
    let mut pairs = Vec::new();
    let mut base = 0;
    for n in 0..order.n_channels() {
        let len = order.channel(n).len();
        pairs.extend((1..len).map(|j| (base + j - 1, base + j)));
        base += len;
    }

    let settings = BarrierSettings::from_tolerances(tol).with_gap(tol.gap * 1e-3);
    let mut state = ReflectionScaState::new(chan, order, e_init.clone());
    // Rows are in noise-normalized gain units; the ordering margin is the natural
    // resolution for them.
    let slack_tol = tol.order_margin;
    let mut feasible = false;
    let mut best_slack: Option<f64> = None;
    while state.iteration < tol.reflection_iter_cap {
        state.refresh_linearization();
        let users = slots
            .iter()
            .zip(&rows)
            .map(|(&(n, pos, k), z)| {
                let (beta, rhs) = sinr_terms(order, n, pos, p, chi);
                ReflectionUser {
                    z: z.clone(),
                    h: chan.h[n][k] / amp,
                    kappa_lin: state.kappa_lin[n][k],
                    xi_lin: state.xi_lin[n][k],
                    beta,
                    rhs,
                }
            })
            .collect();
        let sub = ReflectionSubproblem {
            n_elements: m,
            users,
            pairs: pairs.clone(),
            order_margin: tol.order_margin,
            start: state.e.as_slice().to_vec(),
        };
        let sol = max_min_slack(&sub, &settings)?;
        if sol.min_slack < -slack_tol {
            // Keep moving the linearization point only while the start is still
            // infeasible and the best slack keeps improving.
            let improving = !feasible && best_slack.is_none_or(|b| sol.min_slack > b + 1e-9 * (1.0 + b.abs()));
            if !improving {
                break;
            }
            best_slack = Some(sol.min_slack);
        } else {
            feasible = true;
        }
        let new_e = ReflectionVector::clamped(sol.e);
        let de: f64 = new_e.as_slice().iter().zip(state.e.as_slice()).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let norm: f64 = state.e.as_slice().iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        let (old_k, old_x) = (state.kappa.clone(), state.xi.clone());
        state.e = new_e;
        state.evaluate(chan, order);
        state.iteration += 1;
        let mut change = de / norm.max(1e-12);
        for &(n, _, k) in &slots {
            let scale = old_k[n][k].hypot(old_x[n][k]).max(1e-12);
            change = change
                .max((state.kappa[n][k] - old_k[n][k]).abs() / scale)
                .max((state.xi[n][k] - old_x[n][k]).abs() / scale);
        }
        if feasible && change < tol.reflection_tol {
            break;
        }
    }
    if !feasible {
        return Ok(ReflectionOutcome { e: e_init.clone(), fallback: true, iterations: state.iteration });
    }
    Ok(ReflectionOutcome { e: state.e, fallback: false, iterations: state.iteration })
}
