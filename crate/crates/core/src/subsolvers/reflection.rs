//! Convexified reflection subproblem.
//!
//! The effective coefficient `z e + h` of each user is affine in the real and
//! imaginary parts of `e`. Constraints that need a combined gain to be *large*
//! use its first-order lower bound at the linearization point, constraints that
//! need it to be *small* keep the exact convex square. The program maximizes
//! the smallest slack over those constraints inside the unit-disc box, so a
//! non-negative optimum certifies feasibility and the returned point is
//! interior whenever the feasible set has an interior.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::barrier::{minimize, BarrierProblem, BarrierSettings};
use crate::error::{Error, Result};

/// One user's data, in noise-normalized units (coefficients divided by the noise amplitude).
#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionUser {
    /// Cascaded row `g^H diag(f)`.
    pub z: Vec<Complex64>,
    pub h: Complex64,
    /// Linearization point: real and imaginary part of `z e + h` at the previous iterate.
    pub kappa_lin: f64,
    pub xi_lin: f64,
    /// Multiplier of the user's own gain on the right of its SINR constraint.
    pub beta: f64,
    /// Constant right-hand term of the SINR constraint (surrogate SINR times normalized noise).
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionSubproblem {
    pub n_elements: usize,
    pub users: Vec<ReflectionUser>,
    /// `(earlier, later)` user index pairs that must keep their gain ordering.
    pub pairs: Vec<(usize, usize)>,
    /// Required gain separation for each ordered pair.
    pub order_margin: f64,
    /// Starting reflection vector.
    pub start: Vec<Complex64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectionSolution {
    pub e: Vec<Complex64>,
    /// Smallest slack over the linearized ordering and SINR constraints.
    pub min_slack: f64,
}

/// Real-variable form of `z e + h`: value = (re_h + a.x, im_h + b.x).
struct Affine {
    a: DVector<f64>,
    b: DVector<f64>,
    h: Complex64,
}

impl Affine {
    fn new(z: &[Complex64], h: Complex64, dim: usize) -> Self {
        let m = z.len();
        let mut a = DVector::zeros(dim);
        let mut b = DVector::zeros(dim);
        for (i, zi) in z.iter().enumerate() {
            a[i] = zi.re;
            a[m + i] = -zi.im;
            b[i] = zi.im;
            b[m + i] = zi.re;
        }
        Self { a, b, h }
    }

    fn eval(&self, x: &DVector<f64>) -> (f64, f64) {
        let n = self.a.len();
        let xs = x.rows(0, n);
        (self.h.re + self.a.dot(&xs), self.h.im + self.b.dot(&xs))
    }
}

enum Row {
    Sinr { user: usize },
    Order { earlier: usize, later: usize },
    Element { m: usize },
}

struct P6<'a> {
    sub: &'a ReflectionSubproblem,
    maps: Vec<Affine>,
    rows: Vec<Row>,
    /// Slack coefficient per slack row, so that the slack reads as a relative gain margin.
    weights: Vec<f64>,
    m: usize,
}

impl<'a> P6<'a> {
    fn new(sub: &'a ReflectionSubproblem) -> Self {
        let m = sub.n_elements;
        let maps = sub.users.iter().map(|u| Affine::new(&u.z, u.h, 2 * m + 1)).collect();
        let mut rows: Vec<Row> = (0..sub.users.len()).map(|user| Row::Sinr { user }).collect();
        rows.extend(sub.pairs.iter().map(|&(earlier, later)| Row::Order { earlier, later }));
        rows.extend((0..m).map(|m| Row::Element { m }));
        let lin = |u: &ReflectionUser| u.kappa_lin.powi(2) + u.xi_lin.powi(2);
        let weights = rows
            .iter()
            .filter_map(|r| match *r {
                Row::Sinr { user } => {
                    let u = &sub.users[user];
                    Some(((1.0 - u.beta) * lin(u)).max(u.rhs))
                }
                Row::Order { later, .. } => Some(lin(&sub.users[later])),
                Row::Element { .. } => None,
            })
            .map(|w| if w.is_finite() && w > 0.0 { w } else { 1.0 })
            .collect();
        Self { sub, maps, rows, weights, m }
    }

    fn n_slack_rows(&self) -> usize {
        self.sub.users.len() + self.sub.pairs.len()
    }

    /// Linearized lower bound of user `u`'s gain and its gradient direction.
    fn lower_bound(&self, u: usize, x: &DVector<f64>) -> f64 {
        let usr = &self.sub.users[u];
        let (k, xi) = self.maps[u].eval(x);
        2.0 * usr.kappa_lin * k + 2.0 * usr.xi_lin * xi - usr.kappa_lin.powi(2) - usr.xi_lin.powi(2)
    }

    fn gain(&self, u: usize, x: &DVector<f64>) -> f64 {
        let (k, xi) = self.maps[u].eval(x);
        k * k + xi * xi
    }

    /// Constraint value without the slack variable.
    fn raw(&self, i: usize, x: &DVector<f64>) -> f64 {
        match self.rows[i] {
            Row::Sinr { user } => {
                let u = &self.sub.users[user];
                u.beta * self.gain(user, x) + u.rhs - self.lower_bound(user, x)
            }
            Row::Order { earlier, later } => {
                self.gain(earlier, x) + self.sub.order_margin - self.lower_bound(later, x)
            }
            Row::Element { m } => x[m] * x[m] + x[self.m + m] * x[self.m + m] - 1.0,
        }
    }

    fn add_gain_derivs(&self, u: usize, x: &DVector<f64>, w: f64, g: &mut DVector<f64>, h: &mut DMatrix<f64>, scale: f64) {
        let map = &self.maps[u];
        let (k, xi) = map.eval(x);
        g.axpy(2.0 * w * k, &map.a, 1.0);
        g.axpy(2.0 * w * xi, &map.b, 1.0);
        h.ger(2.0 * w * scale, &map.a, &map.a, 1.0);
        h.ger(2.0 * w * scale, &map.b, &map.b, 1.0);
    }

    fn sub_lower_bound_grad(&self, u: usize, g: &mut DVector<f64>) {
        let usr = &self.sub.users[u];
        let map = &self.maps[u];
        g.axpy(-2.0 * usr.kappa_lin, &map.a, 1.0);
        g.axpy(-2.0 * usr.xi_lin, &map.b, 1.0);
    }
}

impl BarrierProblem for P6<'_> {
    fn dim(&self) -> usize {
        2 * self.m + 1
    }
    fn num_constraints(&self) -> usize {
        self.rows.len()
    }
    fn objective(&self, x: &DVector<f64>) -> f64 {
        -x[2 * self.m]
    }
    fn objective_derivs(&self, _x: &DVector<f64>, g: &mut DVector<f64>, _h: &mut DMatrix<f64>, _s: f64) {
        g.fill(0.0);
        g[2 * self.m] = -1.0;
    }
    fn constraint(&self, i: usize, x: &DVector<f64>) -> f64 {
        let v = self.raw(i, x);
        if i < self.n_slack_rows() {
            v + self.weights[i] * x[2 * self.m]
        } else {
            v
        }
    }
    fn constraint_derivs(&self, i: usize, x: &DVector<f64>, g: &mut DVector<f64>, h: &mut DMatrix<f64>, scale: f64) {
        g.fill(0.0);
        match self.rows[i] {
            Row::Sinr { user } => {
                let beta = self.sub.users[user].beta;
                if beta != 0.0 {
                    self.add_gain_derivs(user, x, beta, g, h, scale);
                }
                self.sub_lower_bound_grad(user, g);
                g[2 * self.m] = self.weights[i];
            }
            Row::Order { earlier, later } => {
                self.add_gain_derivs(earlier, x, 1.0, g, h, scale);
                self.sub_lower_bound_grad(later, g);
                g[2 * self.m] = self.weights[i];
            }
            Row::Element { m } => {
                let (re, im) = (m, self.m + m);
                g[re] = 2.0 * x[re];
                g[im] = 2.0 * x[im];
                h[(re, re)] += 2.0 * scale;
                h[(im, im)] += 2.0 * scale;
            }
        }
    }
}

/// Largest minimum slack over the linearized constraints, with `|e[m]| <= 1`.
///
/// Returns [`Error::Infeasible`] when that slack is below `-slack_tol`.
pub fn solve_p6(
    sub: &ReflectionSubproblem,
    settings: &BarrierSettings,
    slack_tol: f64,
) -> Result<ReflectionSolution> {
    let sol = max_min_slack(sub, settings)?;
    if sol.min_slack < -slack_tol {
        return Err(Error::Infeasible(format!(
            "reflection subproblem best minimum slack {:.3e} is negative",
            sol.min_slack
        )));
    }
    Ok(sol)
}

/// The max-min-slack point itself, whatever the sign of its slack.
pub fn max_min_slack(sub: &ReflectionSubproblem, settings: &BarrierSettings) -> Result<ReflectionSolution> {
    let m = sub.n_elements;
    if sub.start.len() != m || sub.users.iter().any(|u| u.z.len() != m) {
        return Err(Error::Domain("reflection subproblem dimensions disagree".into()));
    }
    for &(a, b) in &sub.pairs {
        if a >= sub.users.len() || b >= sub.users.len() || a == b {
            return Err(Error::Domain("ordering pair out of range".into()));
        }
    }
    let problem = P6::new(sub);
    let rows = problem.n_slack_rows();
    let min_slack = |x: &DVector<f64>| {
        (0..rows).map(|i| -problem.raw(i, x)).fold(f64::INFINITY, f64::min)
    };

    let mut x0 = DVector::zeros(2 * m + 1);
    const INSET: f64 = 1.0 - 1e-7;
    for (i, e) in sub.start.iter().enumerate() {
        let r = e.norm();
        let e = if r > INSET { e * (INSET / r) } else { *e };
        x0[i] = e.re;
        x0[m + i] = e.im;
    }
    if rows == 0 {
        return Ok(ReflectionSolution { e: sub.start.clone(), min_slack: f64::INFINITY });
    }
    x0[2 * m] = (0..rows).map(|i| -problem.raw(i, &x0) / problem.weights[i]).fold(f64::INFINITY, f64::min) - 1.0;

    // Barrier iterates stay strictly inside, so a stalled centering still yields a
    // valid point; its slack is measured below rather than trusted.
    let out = match minimize(&problem, x0, settings) {
        Ok(out) => out,
        Err(out) if out.x.iter().all(|v| v.is_finite()) => out,
        Err(out) => {
            return Err(Error::NonConvergence {
                solver: "reflection subproblem",
                iterations: out.newton_steps,
                gap: out.gap,
            })
        }
    };
    let e: Vec<Complex64> = (0..m).map(|i| Complex64::new(out.x[i], out.x[m + i])).collect();
    Ok(ReflectionSolution { e, min_slack: min_slack(&out.x) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Tolerances;

    fn settings() -> BarrierSettings {
        BarrierSettings::from_tolerances(&Tolerances::default())
    }

    fn user(z: Vec<Complex64>, h: Complex64, e: &[Complex64], beta: f64, rhs: f64) -> ReflectionUser {
        let v: Complex64 = z.iter().zip(e).map(|(a, b)| a * b).sum::<Complex64>() + h;
        ReflectionUser { z, h, kappa_lin: v.re, xi_lin: v.im, beta, rhs }
    }

    #[test]
    fn single_user_gain_does_not_drop() {
        let m = 16;
        let z: Vec<Complex64> = (0..m).map(|i| Complex64::from_polar(0.3, 0.7 * i as f64)).collect();
        let h = Complex64::new(1.0, 0.5);
        let start = vec![Complex64::new(0.0, 0.0); m];
        let u = user(z.clone(), h, &start, 0.0, 0.5 * h.norm_sqr());
        let sub = ReflectionSubproblem { n_elements: m, users: vec![u], pairs: vec![], order_margin: 0.0, start };
        let sol = solve_p6(&sub, &settings(), 1e-9).unwrap();
        let v: Complex64 = z.iter().zip(&sol.e).map(|(a, b)| a * b).sum::<Complex64>() + h;
        assert!(v.norm_sqr() >= h.norm_sqr());
        assert!(sol.e.iter().all(|e| e.norm() <= 1.0));
        let ceiling = (z.iter().map(|x| x.norm()).sum::<f64>() + h.norm()).powi(2);
        assert!(v.norm_sqr() <= ceiling + 1e-9);
    }

    #[test]
    fn identical_users_cannot_be_strictly_ordered() {
        let m = 4;
        let z: Vec<Complex64> = (0..m).map(|i| Complex64::from_polar(0.2, i as f64)).collect();
        let h = Complex64::new(0.8, -0.1);
        let start = vec![Complex64::new(0.5, 0.0); m];
        let a = user(z.clone(), h, &start, 0.0, 0.0);
        let b = user(z, h, &start, 0.0, 0.0);
        let sub = ReflectionSubproblem {
            n_elements: m,
            users: vec![a, b],
            pairs: vec![(0, 1)],
            order_margin: 1e-3,
            start,
        };
        assert!(matches!(solve_p6(&sub, &settings(), 1e-9), Err(Error::Infeasible(_))));
    }
}
