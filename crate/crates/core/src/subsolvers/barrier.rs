//! Log-barrier Newton method for small dense convex programs
//!
//! minimize f(x) subject to g_i(x) <= 0, with f and g_i twice differentiable
//! and convex. Each centering step minimizes `t f(x) - sum ln(-g_i(x))` by
//! damped Newton with backtracking; `t` grows geometrically until the
//! surrogate duality gap `m / t` is small.

use std::ops::AddAssign;

use nalgebra::{Cholesky, DMatrix, DVector};

pub(crate) trait BarrierProblem {
    fn dim(&self) -> usize;
    fn num_constraints(&self) -> usize;
    fn objective(&self, x: &DVector<f64>) -> f64;
    /// Writes the objective gradient into `grad` and adds `scale` times its Hessian to `hess`.
    fn objective_derivs(&self, x: &DVector<f64>, grad: &mut DVector<f64>, hess: &mut DMatrix<f64>, scale: f64);
    fn constraint(&self, i: usize, x: &DVector<f64>) -> f64;
    /// Writes the gradient of constraint `i` into `grad` and adds `scale` times its Hessian to `hess`.
    fn constraint_derivs(
        &self,
        i: usize,
        x: &DVector<f64>,
        grad: &mut DVector<f64>,
        hess: &mut DMatrix<f64>,
        scale: f64,
    );

    fn max_constraint(&self, x: &DVector<f64>) -> f64 {
        (0..self.num_constraints())
            .map(|i| self.constraint(i, x))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct BarrierSettings {
    /// Stop when `m / t <= gap_tol * (1 + |f|)`.
    pub gap_tol: f64,
    pub growth: f64,
    pub newton_cap: usize,
    pub t0: f64,
}

impl BarrierSettings {
    pub fn from_tolerances(tol: &crate::scenario::Tolerances) -> Self {
        Self {
            gap_tol: tol.gap,
            growth: tol.barrier_growth,
            newton_cap: tol.newton_cap,
            t0: 1.0,
        }
    }

    pub fn with_gap(mut self, gap_tol: f64) -> Self {
        self.gap_tol = gap_tol;
        self
    }
}

#[derive(Debug, Clone)]
pub struct BarrierOutcome {
    pub x: DVector<f64>,
    pub objective: f64,
    /// Surrogate duality gap `m / t` at the returned point.
    pub gap: f64,
    pub newton_steps: usize,
    pub converged: bool,
}

const DECREMENT_TOL: f64 = 1e-12;
const MAX_T: f64 = 1e16;

fn barrier_value<P: BarrierProblem>(p: &P, x: &DVector<f64>, t: f64) -> Option<f64> {
    let mut v = t * p.objective(x);
    for i in 0..p.num_constraints() {
        let g = p.constraint(i, x);
        if !(g < 0.0) {
            return None;
        }
        v -= (-g).ln();
    }
    v.is_finite().then_some(v)
}

pub(crate) fn solve_newton(h: DMatrix<f64>, rhs: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = Cholesky::new(h.clone()) {
        return Some(ch.solve(rhs));
    }
    let scale = h.diagonal().iter().fold(0.0f64, |a, &d| a.max(d.abs())).max(1e-300);
    let mut delta = 1e-12 * scale;
    for _ in 0..12 {
        let mut reg = h.clone();
        for i in 0..reg.nrows() {
            reg[(i, i)] += delta;
        }
        if let Some(ch) = Cholesky::new(reg) {
            return Some(ch.solve(rhs));
        }
        delta *= 100.0;
    }
    None
}

/// One centering step. Returns the number of Newton iterations taken and
/// whether the Newton decrement fell below tolerance.
fn center<P: BarrierProblem>(p: &P, x: &mut DVector<f64>, t: f64, cap: usize) -> (usize, bool) {
    let n = p.dim();
    let m = p.num_constraints();
    let mut grad = DVector::zeros(n);
    let mut cgrad = DVector::zeros(n);
    for step in 0..cap {
        let mut hess = DMatrix::zeros(n, n);
        p.objective_derivs(x, &mut grad, &mut hess, t);
        grad *= t;
        for i in 0..m {
            let g = p.constraint(i, x);
            let inv = -1.0 / g;
            p.constraint_derivs(i, x, &mut cgrad, &mut hess, inv);
            grad.axpy(inv, &cgrad, 1.0);
            hess.ger(inv * inv, &cgrad, &cgrad, 1.0);
        }
        let Some(dx) = solve_newton(hess, &(-&grad)) else {
            return (step, false);
        };
        let slope = grad.dot(&dx);
        let Some(f0) = barrier_value(p, x, t) else {
            return (step, false);
        };
        // Decrements below the rounding level of the barrier value cannot be resolved.
        if -slope / 2.0 <= DECREMENT_TOL.max(8.0 * f64::EPSILON * f0.abs()) {
            return (step, true);
        }
        let mut s = 1.0;
        loop {
            let trial = &*x + s * &dx;
            if let Some(f1) = barrier_value(p, &trial, t) {
                if f1 <= f0 + 0.25 * s * slope {
                    *x = trial;
                    break;
                }
            }
            s *= 0.5;
            if s < 1e-20 {
                // No representable progress at this t; the point is centered as far as
                // floating point allows.
                return (step, true);
            }
        }
    }
    (cap, false)
}

/// Runs the barrier method from a strictly feasible `x0`.
pub(crate) fn minimize<P: BarrierProblem>(
    p: &P,
    x0: DVector<f64>,
    settings: &BarrierSettings,
) -> Result<BarrierOutcome, BarrierOutcome> {
    minimize_until(p, x0, settings, |_, _| false)
}

/// Like [`minimize`], but returns as soon as `stop(x, f(x))` holds after a centering step.
pub(crate) fn minimize_until<P: BarrierProblem>(
    p: &P,
    x0: DVector<f64>,
    settings: &BarrierSettings,
    stop: impl Fn(&DVector<f64>, f64) -> bool,
) -> Result<BarrierOutcome, BarrierOutcome> {
    let m = p.num_constraints() as f64;
    let mut x = x0;
    debug_assert!(p.max_constraint(&x) < 0.0, "barrier start must be strictly feasible");
    let mut t = settings.t0;
    let mut steps = 0;
    loop {
        let (k, ok) = center(p, &mut x, t, settings.newton_cap);
        steps += k;
        let f = p.objective(&x);
        let gap = m / t;
        let out = BarrierOutcome {
            x: x.clone(),
            objective: f,
            gap,
            newton_steps: steps,
            converged: ok,
        };
        if !ok {
            return Err(out);
        }
        if stop(&x, f) || gap <= settings.gap_tol * (1.0 + f.abs()) || m == 0.0 {
            return Ok(out);
        }
        if t > MAX_T {
            return Err(BarrierOutcome { converged: false, ..out });
        }
        t *= settings.growth;
    }
}

/// Phase-I wrapper: minimize s subject to g_i(x) - s <= 0 over (x, s).
struct PhaseOne<'a, P> {
    inner: &'a P,
}

impl<P: BarrierProblem> BarrierProblem for PhaseOne<'_, P> {
    fn dim(&self) -> usize {
        self.inner.dim() + 1
    }
    fn num_constraints(&self) -> usize {
        self.inner.num_constraints()
    }
    fn objective(&self, x: &DVector<f64>) -> f64 {
        x[self.inner.dim()]
    }
    fn objective_derivs(&self, _x: &DVector<f64>, grad: &mut DVector<f64>, _h: &mut DMatrix<f64>, _s: f64) {
        grad.fill(0.0);
        grad[self.inner.dim()] = 1.0;
    }
    fn constraint(&self, i: usize, x: &DVector<f64>) -> f64 {
        let n = self.inner.dim();
        self.inner.constraint(i, &x.rows(0, n).into_owned()) - x[n]
    }
    fn constraint_derivs(
        &self,
        i: usize,
        x: &DVector<f64>,
        grad: &mut DVector<f64>,
        hess: &mut DMatrix<f64>,
        scale: f64,
    ) {
        let n = self.inner.dim();
        let xi = x.rows(0, n).into_owned();
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);
        self.inner.constraint_derivs(i, &xi, &mut g, &mut h, scale);
        grad.rows_mut(0, n).copy_from(&g);
        grad[n] = -1.0;
        hess.view_mut((0, 0), (n, n)).add_assign(&h);
    }
}


/// Returns a strictly feasible point, starting from `x0`. On failure returns
/// the smallest achievable maximum violation found.
pub(crate) fn strictly_feasible<P: BarrierProblem>(
    p: &P,
    x0: &DVector<f64>,
    settings: &BarrierSettings,
) -> Result<DVector<f64>, f64> {
    let v0 = p.max_constraint(x0);
    if v0 < 0.0 && v0.is_finite() {
        return Ok(x0.clone());
    }
    if !v0.is_finite() {
        return Err(f64::INFINITY);
    }
    let n = p.dim();
    let mut z = DVector::zeros(n + 1);
    z.rows_mut(0, n).copy_from(x0);
    z[n] = v0.abs().max(1.0) + v0;
    let phase = PhaseOne { inner: p };
    let res = minimize_until(&phase, z, settings, |_, s| s < 0.0);
    let out = match res {
        Ok(o) | Err(o) => o,
    };
    if out.objective < 0.0 {
        let x = out.x.rows(0, n).into_owned();
        if p.max_constraint(&x) < 0.0 {
            return Ok(x);
        }
    }
    Err(out.objective.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// minimize (x-3)^2 + (y+1)^2 subject to x^2 + y^2 <= 1
    struct Disc;
    impl BarrierProblem for Disc {
        fn dim(&self) -> usize {
            2
        }
        fn num_constraints(&self) -> usize {
            1
        }
        fn objective(&self, x: &DVector<f64>) -> f64 {
            (x[0] - 3.0).powi(2) + (x[1] + 1.0).powi(2)
        }
        fn objective_derivs(&self, x: &DVector<f64>, g: &mut DVector<f64>, h: &mut DMatrix<f64>, s: f64) {
            g[0] = 2.0 * (x[0] - 3.0);
            g[1] = 2.0 * (x[1] + 1.0);
            h[(0, 0)] += 2.0 * s;
            h[(1, 1)] += 2.0 * s;
        }
        fn constraint(&self, _i: usize, x: &DVector<f64>) -> f64 {
            x[0] * x[0] + x[1] * x[1] - 1.0
        }
        fn constraint_derivs(&self, _i: usize, x: &DVector<f64>, g: &mut DVector<f64>, h: &mut DMatrix<f64>, s: f64) {
            g[0] = 2.0 * x[0];
            g[1] = 2.0 * x[1];
            h[(0, 0)] += 2.0 * s;
            h[(1, 1)] += 2.0 * s;
        }
    }

    #[test]
    fn projects_onto_disc() {
        let settings = BarrierSettings { gap_tol: 1e-10, growth: 10.0, newton_cap: 200, t0: 1.0 };
        let out = minimize(&Disc, DVector::from_vec(vec![0.0, 0.0]), &settings).unwrap_or_else(|o| panic!("{o:?}"));
        let r = 10f64.sqrt();
        assert!((out.x[0] - 3.0 / r).abs() < 1e-6);
        assert!((out.x[1] + 1.0 / r).abs() < 1e-6);
    }

    #[test]
    fn phase_one_recovers_interior_point() {
        let settings = BarrierSettings { gap_tol: 1e-10, growth: 10.0, newton_cap: 200, t0: 1.0 };
        let x = strictly_feasible(&Disc, &DVector::from_vec(vec![5.0, -4.0]), &settings).unwrap();
        assert!(Disc.max_constraint(&x) < 0.0);
    }
}
