//! Convex power subproblems of the SCA power loop.
//!
//! Variables are one power and one SINR surrogate per assigned user ("slot").
//! For the slot decoded at position j on its channel, the interference term
//! `chi * S` (S = power of users decoded after it) is replaced by the convex
//! upper bound `S^2 / (2 alpha) + alpha chi^2 / 2`, tight at `alpha = S / chi`.
//! Powers are rescaled by the budget internally so every quantity is O(1).

use nalgebra::{DMatrix, DVector};

use super::barrier::{minimize, strictly_feasible, BarrierProblem, BarrierSettings};
use crate::error::{Error, Result};

const LN2: f64 = std::f64::consts::LN_2;

/// Power allocation subproblem at a fixed reflection vector.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSubproblem {
    /// Slot indices per channel, in decoding order.
    pub groups: Vec<Vec<usize>>,
    /// Noise-to-gain ratio per slot, watts.
    pub nu: Vec<f64>,
    /// SCA fixed point per slot; ignored for the last-decoded slot of a channel.
    pub alpha: Vec<f64>,
    pub r_min: f64,
    pub p_max: f64,
    /// Current power per slot, watts.
    pub p: Vec<f64>,
    /// Current SINR surrogate per slot.
    pub chi: Vec<f64>,
    later: Vec<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerPoint {
    pub p: Vec<f64>,
    pub chi: Vec<f64>,
    /// Sum of `log2(1 + chi)`.
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityPoint {
    pub p: Vec<f64>,
    pub chi: Vec<f64>,
    /// Infeasibility indicator. Power-type violations are measured relative to
    /// the budget (absolute watts when the budget is zero), rate violations in bit/s/Hz.
    pub z: f64,
}

pub fn surrogate_objective(chi: &[f64]) -> f64 {
    chi.iter().map(|c| c.ln_1p() / LN2).sum()
}

impl PowerSubproblem {
    pub fn new(
        groups: Vec<Vec<usize>>,
        nu: Vec<f64>,
        alpha: Vec<f64>,
        r_min: f64,
        p_max: f64,
        p: Vec<f64>,
        chi: Vec<f64>,
    ) -> Result<Self> {
        let slots = nu.len();
        if alpha.len() != slots || p.len() != slots || chi.len() != slots {
            return Err(Error::Domain("power subproblem vectors disagree in length".into()));
        }
        let mut later = vec![Vec::new(); slots];
        let mut seen = vec![false; slots];
        for g in &groups {
            for (j, &s) in g.iter().enumerate() {
                if s >= slots || seen[s] {
                    return Err(Error::Domain("groups must partition the slots".into()));
                }
                seen[s] = true;
                later[s] = g[j + 1..].to_vec();
            }
        }
        if seen.iter().any(|&b| !b) {
            return Err(Error::Domain("groups must partition the slots".into()));
        }
        for s in 0..slots {
            if !(nu[s] > 0.0) || !nu[s].is_finite() {
                return Err(Error::Domain(format!("nu[{s}] must be positive and finite")));
            }
            if !later[s].is_empty() && (!(alpha[s] > 0.0) || !alpha[s].is_finite()) {
                return Err(Error::Domain(format!("alpha[{s}] must be positive and finite")));
            }
        }
        if !(p_max >= 0.0) {
            return Err(Error::Domain("p_max must be non-negative".into()));
        }
        Ok(Self { groups, nu, alpha, r_min, p_max, p, chi, later })
    }

    pub fn slots(&self) -> usize {
        self.nu.len()
    }

    pub fn later(&self, slot: usize) -> &[usize] {
        &self.later[slot]
    }

    pub fn chi_min(&self) -> f64 {
        2f64.powf(self.r_min) - 1.0
    }

    /// Sum of powers of slots decoded after `slot`.
    pub fn interference(&self, p: &[f64], slot: usize) -> f64 {
        self.later[slot].iter().map(|&j| p[j]).sum()
    }

    fn scale(&self) -> f64 {
        if self.p_max > 0.0 {
            self.p_max
        } else {
            1.0
        }
    }

    /// Right-hand side of the convexified SINR constraint, watts.
    pub fn power_bound(&self, p: &[f64], chi: &[f64], slot: usize) -> f64 {
        let s = self.interference(p, slot);
        let base = chi[slot] * self.nu[slot];
        if self.later[slot].is_empty() {
            base
        } else {
            let a = self.alpha[slot];
            s * s / (2.0 * a) + a * chi[slot] * chi[slot] / 2.0 + base
        }
    }

    /// Largest violation of the P3 constraints at `(p, chi)`; power terms in watts.
    pub fn max_violation(&self, p: &[f64], chi: &[f64]) -> f64 {
        let chi_min = self.chi_min();
        let mut v = p.iter().sum::<f64>() - self.p_max;
        for s in 0..self.slots() {
            v = v.max(chi_min - chi[s]);
            v = v.max(self.power_bound(p, chi, s) - p[s]);
        }
        v
    }

    fn to_normalized(&self, p: &[f64], chi: &[f64]) -> DVector<f64> {
        let sc = self.scale();
        let n = self.slots();
        let mut x = DVector::zeros(2 * n);
        for s in 0..n {
            x[s] = p[s] / sc;
            x[n + s] = chi[s];
        }
        x
    }

    fn denormalize(&self, x: &DVector<f64>) -> (Vec<f64>, Vec<f64>) {
        let sc = self.scale();
        let n = self.slots();
        ((0..n).map(|s| x[s] * sc).collect(), (0..n).map(|s| x[n + s]).collect())
    }

    /// Normalized bound constraint value and derivatives for `slot`, written
    /// against variable layout `[p (n), chi (n), ...]`.
    fn bound_terms(
        &self,
        slot: usize,
        x: &DVector<f64>,
        grad: Option<(&mut DVector<f64>, &mut DMatrix<f64>, f64)>,
    ) -> f64 {
        let n = self.slots();
        let sc = self.scale();
        let nu = self.nu[slot] / sc;
        let chi = x[n + slot];
        let later = &self.later[slot];
        let mut value = nu * chi - x[slot];
        let (a, s) = if later.is_empty() {
            (0.0, 0.0)
        } else {
            let a = self.alpha[slot] / sc;
            let s: f64 = later.iter().map(|&j| x[j]).sum();
            value += s * s / (2.0 * a) + a * chi * chi / 2.0;
            (a, s)
        };
        if let Some((g, h, scale)) = grad {
            g.fill(0.0);
            g[slot] = -1.0;
            g[n + slot] = nu + a * chi;
            if !later.is_empty() {
                for &j in later {
                    g[j] += s / a;
                    for &i in later {
                        h[(i, j)] += scale / a;
                    }
                }
                h[(n + slot, n + slot)] += scale * a;
            }
        }
        value
    }
}

/// P3 in normalized variables `[p (n), chi (n)]`.
struct P3<'a> {
    sub: &'a PowerSubproblem,
}

impl P3<'_> {
    fn n(&self) -> usize {
        self.sub.slots()
    }
}

impl BarrierProblem for P3<'_> {
    fn dim(&self) -> usize {
        2 * self.n()
    }
    fn num_constraints(&self) -> usize {
        2 * self.n() + 1
    }
    fn objective(&self, x: &DVector<f64>) -> f64 {
        let n = self.n();
        -(0..n).map(|s| x[n + s].ln_1p()).sum::<f64>() / LN2
    }
    fn objective_derivs(&self, x: &DVector<f64>, g: &mut DVector<f64>, h: &mut DMatrix<f64>, scale: f64) {
        let n = self.n();
        g.fill(0.0);
        for s in 0..n {
            let d = 1.0 + x[n + s];
            g[n + s] = -1.0 / (d * LN2);
            h[(n + s, n + s)] += scale / (d * d * LN2);
        }
    }
    fn constraint(&self, i: usize, x: &DVector<f64>) -> f64 {
        let n = self.n();
        if i < n {
            self.sub.bound_terms(i, x, None)
        } else if i < 2 * n {
            self.sub.chi_min() - x[n + (i - n)]
        } else {
            (0..n).map(|s| x[s]).sum::<f64>() - self.sub.p_max / self.sub.scale()
        }
    }
    fn constraint_derivs(&self, i: usize, x: &DVector<f64>, g: &mut DVector<f64>, h: &mut DMatrix<f64>, scale: f64) {
        let n = self.n();
        if i < n {
            self.sub.bound_terms(i, x, Some((g, h, scale)));
        } else if i < 2 * n {
            g.fill(0.0);
            g[n + (i - n)] = -1.0;
        } else {
            g.fill(0.0);
            for s in 0..n {
                g[s] = 1.0;
            }
        }
    }
}

/// P4 in normalized variables `[p (n), chi (n), z]`.
struct P4<'a> {
    sub: &'a PowerSubproblem,
}

impl P4<'_> {
    fn n(&self) -> usize {
        self.sub.slots()
    }
}

impl BarrierProblem for P4<'_> {
    fn dim(&self) -> usize {
        2 * self.n() + 1
    }
    fn num_constraints(&self) -> usize {
        // rate, bound, budget, z >= 0, p >= 0, chi >= 0
        4 * self.n() + 2
    }
    fn objective(&self, x: &DVector<f64>) -> f64 {
        x[2 * self.n()]
    }
    fn objective_derivs(&self, _x: &DVector<f64>, g: &mut DVector<f64>, _h: &mut DMatrix<f64>, _s: f64) {
        g.fill(0.0);
        g[2 * self.n()] = 1.0;
    }
    fn constraint(&self, i: usize, x: &DVector<f64>) -> f64 {
        let n = self.n();
        let z = x[2 * n];
        match i {
            i if i < n => self.sub.r_min - x[n + i].ln_1p() / LN2 - z,
            i if i < 2 * n => self.sub.bound_terms(i - n, x, None) - z,
            i if i == 2 * n => (0..n).map(|s| x[s]).sum::<f64>() - self.sub.p_max / self.sub.scale() - z,
            i if i == 2 * n + 1 => -z,
            i if i < 3 * n + 2 => -x[i - (2 * n + 2)],
            i => -x[n + i - (3 * n + 2)],
        }
    }
    fn constraint_derivs(&self, i: usize, x: &DVector<f64>, g: &mut DVector<f64>, h: &mut DMatrix<f64>, scale: f64) {
        let n = self.n();
        match i {
            i if i < n => {
                g.fill(0.0);
                let d = 1.0 + x[n + i];
                g[n + i] = -1.0 / (d * LN2);
                g[2 * n] = -1.0;
                h[(n + i, n + i)] += scale / (d * d * LN2);
            }
            i if i < 2 * n => {
                self.sub.bound_terms(i - n, x, Some((g, h, scale)));
                g[2 * n] = -1.0;
            }
            i if i == 2 * n => {
                g.fill(0.0);
                for s in 0..n {
                    g[s] = 1.0;
                }
                g[2 * n] = -1.0;
            }
            i if i == 2 * n + 1 => {
                g.fill(0.0);
                g[2 * n] = -1.0;
            }
            i if i < 3 * n + 2 => {
                g.fill(0.0);
                g[i - (2 * n + 2)] = -1.0;
            }
            i => {
                g.fill(0.0);
                g[n + i - (3 * n + 2)] = -1.0;
            }
        }
    }
}

/// Maximizes the surrogate sum rate over the convexified feasible set.
///
/// The subproblem's current point seeds the search; if it is not strictly
/// interior a phase-I search looks for one and reports infeasibility if none exists.
pub fn solve_p3(sub: &PowerSubproblem, settings: &BarrierSettings) -> Result<PowerPoint> {
    let problem = P3 { sub };
    let x0 = sub.to_normalized(&sub.p, &sub.chi);
    let start = strictly_feasible(&problem, &x0, settings).map_err(|v| {
        Error::Infeasible(format!("power subproblem has no interior point (violation {v:.3e})"))
    })?;
    match minimize(&problem, start, settings) {
        Ok(out) => {
            let (p, chi) = sub.denormalize(&out.x);
            Ok(PowerPoint { objective: surrogate_objective(&chi), p, chi })
        }
        Err(out) => Err(Error::NonConvergence {
            solver: "power subproblem",
            iterations: out.newton_steps,
            gap: out.gap,
        }),
    }
}

/// Minimizes the shared slack `z` that makes every P3 constraint family satisfiable.
pub fn solve_p4(sub: &PowerSubproblem, settings: &BarrierSettings) -> Result<FeasibilityPoint> {
    let n = sub.slots();
    let sc = sub.scale();
    let problem = P4 { sub };
    let mut x0 = DVector::zeros(2 * n + 1);
    for s in 0..n {
        x0[s] = (sub.p[s] / sc).max(1e-6);
        x0[n + s] = sub.chi[s].max(1e-6);
    }
    x0[2 * n] = 0.0;
    let worst = (0..problem.num_constraints())
        .filter(|&i| i != 2 * n + 1)
        .map(|i| problem.constraint(i, &x0))
        .fold(0.0f64, f64::max);
    if !worst.is_finite() {
        return Err(Error::Numerical("feasibility subproblem start is not finite".into()));
    }
    x0[2 * n] = worst + 1.0;
    match minimize(&problem, x0, settings) {
        Ok(out) | Err(out) if out.converged || out.gap < 1e-6 => {
            let (p, chi) = sub.denormalize(&out.x);
            Ok(FeasibilityPoint { p, chi, z: out.x[2 * n] })
        }
        Ok(out) | Err(out) => Err(Error::NonConvergence {
            solver: "feasibility subproblem",
            iterations: out.newton_steps,
            gap: out.gap,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Tolerances;

    fn settings() -> BarrierSettings {
        BarrierSettings::from_tolerances(&Tolerances::default()).with_gap(1e-10)
    }

    #[test]
    fn single_user_uses_full_budget() {
        let sub = PowerSubproblem::new(vec![vec![0]], vec![1.0], vec![1.0], 0.0, 3.0, vec![1.0], vec![0.5]).unwrap();
        let out = solve_p3(&sub, &settings()).unwrap();
        assert!((out.p[0] - 3.0).abs() < 1e-6);
        assert!((out.chi[0] - 3.0).abs() < 1e-6);
        assert!((out.objective - 2.0).abs() < 1e-6);
    }

    #[test]
    fn unreachable_rate_is_infeasible() {
        let sub = PowerSubproblem::new(vec![vec![0]], vec![1.0], vec![1.0], 10.0, 3.0, vec![1.0], vec![0.5]).unwrap();
        assert!(matches!(solve_p3(&sub, &settings()), Err(Error::Infeasible(_))));
    }

    #[test]
    fn feasible_start_gives_zero_indicator() {
        let sub = PowerSubproblem::new(
            vec![vec![0, 1]],
            vec![0.1, 0.05],
            vec![2.0, 1.0],
            0.1,
            1.0,
            vec![0.6, 0.3],
            vec![0.2, 0.5],
        )
        .unwrap();
        assert!(sub.max_violation(&sub.p, &sub.chi) < 0.0);
        let out = solve_p4(&sub, &settings()).unwrap();
        assert!(out.z < 1e-6, "z = {}", out.z);
    }

    #[test]
    fn zero_budget_needs_positive_indicator() {
        let sub = PowerSubproblem::new(vec![vec![0]], vec![1.0], vec![1.0], 0.5, 0.0, vec![0.1], vec![0.1]).unwrap();
        let out = solve_p4(&sub, &settings()).unwrap();
        assert!(out.z > 1e-3);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(PowerSubproblem::new(vec![vec![0]], vec![0.0], vec![1.0], 0.0, 1.0, vec![0.1], vec![0.1]).is_err());
        assert!(PowerSubproblem::new(vec![vec![0, 1]], vec![1.0, 1.0], vec![-1.0, 1.0], 0.0, 1.0, vec![0.1; 2], vec![0.1; 2]).is_err());
        assert!(PowerSubproblem::new(vec![vec![0]], vec![1.0; 2], vec![1.0; 2], 0.0, 1.0, vec![0.1; 2], vec![0.1; 2]).is_err());
    }
}
