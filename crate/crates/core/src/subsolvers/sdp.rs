//! Lifted reflection problem:
//!
//! ```text
//! maximize   Re Tr(C E)
//! subject to E[m, m] <= 1  (m < M),  E[M, M] = 1,  E PSD
//! ```
//!
//! The dual has one variable per diagonal entry,
//! `minimize sum(y)` s.t. `diag(y) - C PSD`, `y[m] >= 0` for `m < M`,
//! so the path-following iteration runs Newton on the (M+1)-dimensional dual
//! barrier and reads a primal point off the central path as `S^{-1} / t`.
//! A diagonal rescaling makes that point exactly feasible, and the gap between
//! the two objectives certifies optimality.

use nalgebra::{Cholesky, DMatrix, DVector};
use num_complex::Complex64;

use super::barrier::{solve_newton, BarrierSettings};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct SdpSolution {
    /// Optimal lifted matrix, `(M+1) x (M+1)` Hermitian PSD.
    pub e: DMatrix<Complex64>,
    pub objective: f64,
    /// Dual objective; an upper bound on the optimum.
    pub dual_objective: f64,
    pub newton_steps: usize,
}

struct DualState {
    y: DVector<f64>,
    /// Inverse of `diag(y) - C`.
    w: DMatrix<Complex64>,
    value: f64,
}

fn dual_state(c: &DMatrix<Complex64>, y: &DVector<f64>, t: f64, bounded: usize) -> Option<DualState> {
    let n = c.nrows();
    for i in 0..bounded {
        if !(y[i] > 0.0) {
            return None;
        }
    }
    let mut s = -c.clone();
    for i in 0..n {
        s[(i, i)] += Complex64::new(y[i], 0.0);
    }
    let (logdet, w) = hermitian_factor(&s)?;
    let value = t * y.sum() - logdet - (0..bounded).map(|i| y[i].ln()).sum::<f64>();
    if !value.is_finite() {
        return None;
    }
    Some(DualState { y: y.clone(), w, value })
}

/// Log-determinant and inverse of a Hermitian positive definite matrix, or
/// `None` if it is not positive definite.
///
/// Works on the real embedding `[[A, -B], [B, A]]` of `A + iB`: complex square
/// roots never fail, so a complex Cholesky cannot detect indefiniteness.
fn hermitian_factor(s: &DMatrix<Complex64>) -> Option<(f64, DMatrix<Complex64>)> {
    let n = s.nrows();
    let mut r = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = s[(i, j)];
            r[(i, j)] = z.re;
            r[(n + i, n + j)] = z.re;
            r[(i, n + j)] = -z.im;
            r[(n + i, j)] = z.im;
        }
    }
    let chol = Cholesky::new(r)?;
    // The embedding's determinant is the square of the Hermitian one.
    let logdet = chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>();
    let inv = chol.inverse();
    let w = DMatrix::from_fn(n, n, |i, j| Complex64::new(inv[(i, j)], inv[(n + i, j)]));
    Some((logdet, w))
}

/// Scales the central-path primal point onto the feasible set.
fn feasible_primal(w: &DMatrix<Complex64>, t: f64) -> DMatrix<Complex64> {
    let n = w.nrows();
    let mut e = w / Complex64::new(t, 0.0);
    let d: Vec<f64> = (0..n)
        .map(|i| {
            let eii = e[(i, i)].re.max(1e-300);
            if i + 1 == n {
                1.0 / eii.sqrt()
            } else {
                (1.0 / eii.sqrt()).min(1.0)
            }
        })
        .collect();
    for i in 0..n {
        for j in 0..n {
            e[(i, j)] *= d[i] * d[j];
        }
    }
    // Enforce exact Hermitian symmetry.
    let eh = e.adjoint();
    (e + eh) / Complex64::new(2.0, 0.0)
}

fn trace_product(c: &DMatrix<Complex64>, e: &DMatrix<Complex64>) -> f64 {
    // Re Tr(C E) = sum_ij Re(C_ij E_ji)
    let n = c.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (c[(i, j)] * e[(j, i)]).re;
        }
    }
    acc
}

/// Maximizes `Re Tr(V E)` over the lifted feasible set.
pub fn solve_p9(v_sum: &DMatrix<Complex64>, settings: &BarrierSettings) -> Result<SdpSolution> {
    let n = v_sum.nrows();
    if n == 0 || v_sum.ncols() != n {
        return Err(Error::Domain("lifted cost must be a non-empty square matrix".into()));
    }
    let bounded = n - 1;
    let scale = (0..n)
        .map(|i| (0..n).map(|j| v_sum[(i, j)].norm()).sum::<f64>())
        .fold(0.0f64, f64::max);
    if scale == 0.0 {
        return Ok(SdpSolution {
            e: DMatrix::identity(n, n),
            objective: 0.0,
            dual_objective: 0.0,
            newton_steps: 0,
        });
    }
    let c = v_sum / Complex64::new(scale, 0.0);
    let c = (&c + c.adjoint()) / Complex64::new(2.0, 0.0);

    // Gershgorin: diag(y) - C is positive definite once y exceeds every row sum.
    let mut t = settings.t0;
    let mut state = dual_state(&c, &DVector::from_element(n, 2.0), t, bounded)
        .ok_or_else(|| Error::Numerical("could not build an interior dual start".into()))?;
    let mut steps = 0;
    let mut best: Option<(DMatrix<Complex64>, f64, f64)> = None;

    loop {
        // Newton centering at fixed t.
        let mut centered = false;
        for _ in 0..settings.newton_cap {
            let w = &state.w;
            let y = &state.y;
            let mut grad = DVector::zeros(n);
            let mut hess = DMatrix::zeros(n, n);
            for i in 0..n {
                grad[i] = t - w[(i, i)].re;
                for j in 0..n {
                    hess[(i, j)] = w[(i, j)].norm_sqr();
                }
                if i < bounded {
                    grad[i] -= 1.0 / y[i];
                    hess[(i, i)] += 1.0 / (y[i] * y[i]);
                }
            }
            steps += 1;
            let Some(dy) = solve_newton(hess, &(-&grad)) else {
                break;
            };
            let slope = grad.dot(&dy);
            if -slope / 2.0 <= 1e-12f64.max(8.0 * f64::EPSILON * state.value.abs()) {
                centered = true;
                break;
            }
            let mut s = 1.0;
            let next = loop {
                if let Some(cand) = dual_state(&c, &(&state.y + s * &dy), t, bounded) {
                    if cand.value <= state.value + 0.25 * s * slope {
                        break Some(cand);
                    }
                }
                s *= 0.5;
                if s < 1e-20 {
                    break None;
                }
            };
            match next {
                Some(nx) => state = nx,
                None => {
                    centered = true;
                    break;
                }
            }
        }

        let e = feasible_primal(&state.w, t);
        let primal = trace_product(&c, &e);
        let dual = state.y.sum();
        if best.as_ref().is_none_or(|b| primal > b.1) {
            best = Some((e.clone(), primal, dual));
        }
        let gap = dual - primal;
        if gap <= settings.gap_tol * (1.0 + primal.abs()) {
            return Ok(SdpSolution {
                e,
                objective: primal * scale,
                dual_objective: dual * scale,
                newton_steps: steps,
            });
        }
        if !centered || t > 1e16 {
            let (_, p, d) = best.expect("at least one primal point evaluated");
            return Err(Error::NonConvergence {
                solver: "lifted reflection SDP",
                iterations: steps,
                gap: (d - p) * scale,
            });
        }
        t *= settings.growth;
        state = dual_state(&c, &state.y, t, bounded)
            .ok_or_else(|| Error::Numerical("dual iterate left the cone".into()))?;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::Tolerances;

    fn settings() -> BarrierSettings {
        BarrierSettings::from_tolerances(&Tolerances::default())
    }

    #[test]
    fn single_element_phase_alignment() {
        let v = DMatrix::from_element(2, 2, Complex64::new(1.0, 0.0));
        let sol = solve_p9(&v, &settings()).unwrap();
        assert!((sol.objective - 4.0).abs() < 1e-5);
        for i in 0..2 {
            for j in 0..2 {
                assert!((sol.e[(i, j)] - Complex64::new(1.0, 0.0)).norm() < 1e-3);
            }
        }
    }

    #[test]
    fn zero_cost_gives_zero() {
        let v = DMatrix::<Complex64>::zeros(3, 3);
        let sol = solve_p9(&v, &settings()).unwrap();
        assert_eq!(sol.objective, 0.0);
        assert_eq!(sol.e[(2, 2)], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn returned_matrix_is_feasible() {
        let v_vec = [
            Complex64::new(0.3, -0.2),
            Complex64::new(-0.1, 0.4),
            Complex64::new(0.2, 0.1),
            Complex64::new(1.5, 0.3),
        ];
        let v = DVector::from_column_slice(&v_vec);
        let w = DVector::from_column_slice(&[
            Complex64::new(0.1, 0.2),
            Complex64::new(0.3, 0.0),
            Complex64::new(-0.2, 0.2),
            Complex64::new(0.9, -0.4),
        ]);
        let c = v.conjugate() * v.transpose() + w.conjugate() * w.transpose();
        let sol = solve_p9(&c, &settings()).unwrap();
        let n = 4;
        for i in 0..n - 1 {
            assert!(sol.e[(i, i)].re <= 1.0 + 1e-9);
        }
        assert!((sol.e[(n - 1, n - 1)].re - 1.0).abs() < 1e-9);
        let eig = nalgebra::SymmetricEigen::new(sol.e.clone());
        assert!(eig.eigenvalues.iter().all(|&l| l > -1e-9));
        assert!(sol.dual_objective - sol.objective <= 1e-6 * (1.0 + sol.objective.abs()) + 1e-12);
    }
}
