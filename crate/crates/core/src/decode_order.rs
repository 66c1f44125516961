//! Decoding orders from the reflection that maximizes the sum of combined gains.
//!
//! The gain sum is a Hermitian quadratic form in `[e; 1]`, so lifting to
//! `E = [e; 1][e; 1]^H` and dropping the rank constraint gives a small SDP.
//! A rank-one optimum is read off directly; otherwise Gaussian randomization
//! draws unit-modulus candidates and keeps the best. Users are then ranked by
//! ascending combined gain at the chosen reflection.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::scenario::{ascending_order, gain_matrix, Assignment, ChannelRealization, DecodingOrder, ReflectionVector, SystemConfig};
use crate::subsolvers::{solve_p9, BarrierSettings};

#[derive(Debug, Clone)]
pub struct SdrInstance {
    /// Assigned (channel, user) pairs in channel order.
    pub pairs: Vec<(usize, usize)>,
    /// `v = [g^H diag(f), h]` per pair, length `M + 1`.
    pub v: Vec<DVector<Complex64>>,
    /// Sum of `v^H v` over all pairs.
    pub v_sum: DMatrix<Complex64>,
}

impl SdrInstance {
    /// `Re Tr(V_sum E)`.
    pub fn objective(&self, e: &DMatrix<Complex64>) -> f64 {
        (&self.v_sum * e).trace().re
    }

    /// Sum of combined gains at reflection vector `e` (the lifted objective at `E = [e; 1][e; 1]^H`).
    pub fn gain_sum(&self, e: &ReflectionVector) -> f64 {
        self.v
            .iter()
            .map(|v| {
                let m = e.len();
                let s: Complex64 = (0..m).map(|i| v[i] * e.as_slice()[i]).sum::<Complex64>() + v[m];
                s.norm_sqr()
            })
            .sum()
    }
}

/// Lifted vector `[e; 1]`.
pub fn lift(e: &ReflectionVector) -> DVector<Complex64> {
    DVector::from_iterator(e.len() + 1, e.as_slice().iter().copied().chain(std::iter::once(Complex64::new(1.0, 0.0))))
}

pub fn build_v(chan: &ChannelRealization, assignment: &Assignment) -> SdrInstance {
    let m = chan.n_elements;
    let mut pairs = Vec::new();
    let mut v = Vec::new();
    let mut v_sum = DMatrix::zeros(m + 1, m + 1);
    for n in 0..assignment.n_channels() {
        for &k in assignment.users(n) {
            let row = DVector::from_iterator(m + 1, chan.cascade(n, k).into_iter().chain(std::iter::once(chan.h[n][k])));
            // (v^H v)_ij = conj(v_i) v_j
            v_sum += row.conjugate() * row.transpose();
            pairs.push((n, k));
            v.push(row);
        }
    }
    SdrInstance { pairs, v, v_sum }
}

#[derive(Debug, Clone)]
pub struct Candidate {
    /// Randomized vector `U Lambda^{1/2} r`.
    pub e_tilde: DVector<Complex64>,
    /// Unit-modulus reflection with phases of `e_tilde[m] / e_tilde[M]`.
    pub theta: ReflectionVector,
}

/// Clamped eigendecomposition of a Hermitian matrix, eigenvalues descending.
fn eigen(e: &DMatrix<Complex64>) -> (Vec<f64>, DMatrix<Complex64>) {
    let eig = SymmetricEigen::new(e.clone());
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let vals = idx.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let vecs = DMatrix::from_columns(&idx.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>());
    (vals, vecs)
}

pub fn gaussian_randomize<R: Rng + ?Sized>(e_star: &DMatrix<Complex64>, l: usize, rng: &mut R) -> Result<Vec<Candidate>> {
    let n = e_star.nrows();
    if n == 0 || e_star.ncols() != n {
        return Err(Error::Domain("lifted matrix must be square and non-empty".into()));
    }
    if l == 0 {
        return Err(Error::Domain("at least one candidate is required".into()));
    }
    let (vals, vecs) = eigen(e_star);
    let root = DMatrix::from_diagonal(&DVector::from_iterator(n, vals.iter().map(|v| Complex64::new(v.sqrt(), 0.0))));
    let factor = vecs * root;
    let mut out = Vec::with_capacity(l);
    let mut attempts = 0;
    while out.len() < l {
        attempts += 1;
        if attempts > 100 * l {
            return Err(Error::Numerical("randomization kept producing a zero reference entry".into()));
        }
        let r = DVector::from_iterator(n, (0..n).map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU))));
        let e_tilde = &factor * r;
        let reference = e_tilde[n - 1];
        if reference.norm() == 0.0 {
            continue;
        }
        let phases: Vec<f64> = (0..n - 1).map(|i| (e_tilde[i] / reference).arg()).collect();
        out.push(Candidate { e_tilde, theta: ReflectionVector::from_phases(&phases) });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct OrderOutcome {
    pub order: DecodingOrder,
    /// Reflection used to rank the users.
    pub theta: ReflectionVector,
    /// Certified upper bound on the gain sum of any feasible reflection.
    pub sdp_objective: f64,
    pub rank_one: bool,
}

pub fn optimize_decoding_order<R: Rng + ?Sized>(
    chan: &ChannelRealization,
    assignment: &Assignment,
    config: &SystemConfig,
    rng: &mut R,
) -> Result<OrderOutcome> {
    let m = chan.n_elements;
    let inst = build_v(chan, assignment);
    let (theta, sdp_objective, rank_one) = if m == 0 {
        let theta = ReflectionVector::zeros(0);
        let obj = inst.gain_sum(&theta);
        (theta, obj, true)
    } else {
        let settings = BarrierSettings::from_tolerances(&config.tolerances);
        let c = &inst.v_sum / Complex64::new(chan.noise_power, 0.0);
        let sol = solve_p9(&c, &settings)?;
        let (vals, vecs) = eigen(&sol.e);
        let rank_one = vals.len() < 2 || vals[1] < config.tolerances.rank_one_ratio * vals[0];
        let theta = if rank_one {
            let top = vecs.column(0) * Complex64::new(vals[0].sqrt(), 0.0);
            let reference = top[m];
            let unit = if reference.norm() > 0.0 { reference.conj() / reference.norm() } else { Complex64::new(1.0, 0.0) };
            ReflectionVector::clamped((0..m).map(|i| top[i] * unit).collect())
        } else {
            let cands = gaussian_randomize(&sol.e, config.n_candidates.max(1), rng)?;
            cands
                .into_iter()
                .map(|c| (inst.gain_sum(&c.theta), c.theta))
                .fold(None, |best: Option<(f64, ReflectionVector)>, (v, t)| match best {
                    Some(b) if b.0 >= v => Some(b),
                    _ => Some((v, t)),
                })
                .map(|b| b.1)
                .expect("at least one candidate")
        };
        (theta, sol.dual_objective * chan.noise_power, rank_one)
    };
    let gains = gain_matrix(chan, &theta);
    let order = ascending_order(&gains, assignment.channels());
    Ok(OrderOutcome { order, theta, sdp_objective, rank_one })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{combined_gain, sample_channels};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn lifted_form_reproduces_gains() {
        let config = SystemConfig::default();
        let chan = sample_channels(&config, 11).unwrap();
        let a = Assignment::new(vec![vec![0, 1], vec![2, 3]], 4).unwrap();
        let inst = build_v(&chan, &a);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..5 {
            let e = ReflectionVector::random_phases(config.n_elements, &mut rng);
            let ebar = lift(&e);
            let lifted = inst.objective(&(&ebar * ebar.adjoint()));
            let direct: f64 = inst.pairs.iter().map(|&(n, k)| combined_gain(&chan, n, k, &e)).sum();
            assert!((lifted - direct).abs() <= 1e-12 * direct);
        }
        let off = lift(&ReflectionVector::zeros(config.n_elements));
        let direct: f64 = inst.pairs.iter().map(|&(n, k)| chan.h[n][k].norm_sqr()).sum();
        assert!((inst.objective(&(&off * off.adjoint())) - direct).abs() <= 1e-12 * direct);
    }

    #[test]
    fn randomization_preserves_trace_and_modulus() {
        let v = DVector::from_column_slice(&[Complex64::new(0.5, 0.5), Complex64::new(-0.2, 0.9), Complex64::new(1.0, 0.0)]);
        let w = DVector::from_column_slice(&[Complex64::new(0.1, -0.3), Complex64::new(0.6, 0.1), Complex64::new(0.2, 0.4)]);
        let e = &v * v.adjoint() + &w * w.adjoint();
        let tr = e.trace().re;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for c in gaussian_randomize(&e, 50, &mut rng).unwrap() {
            assert!((c.e_tilde.norm_squared() - tr).abs() < 1e-8);
            assert!(c.theta.as_slice().iter().all(|t| (t.norm() - 1.0).abs() < 1e-12));
        }
    }

    #[test]
    fn rank_one_candidates_share_phases() {
        let v = DVector::from_column_slice(&[Complex64::from_polar(1.0, 0.4), Complex64::from_polar(1.0, -1.3), Complex64::from_polar(1.0, 2.0)]);
        let e = &v * v.adjoint();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for c in gaussian_randomize(&e, 10, &mut rng).unwrap() {
            let t = c.theta.as_slice();
            assert!((t[0] - Complex64::from_polar(1.0, 0.4 - 2.0)).norm() < 1e-6);
            assert!((t[1] - Complex64::from_polar(1.0, -1.3 - 2.0)).norm() < 1e-6);
        }
    }

    #[test]
    fn order_is_ascending_in_gain() {
        let config = SystemConfig::default();
        let chan = sample_channels(&config, 2).unwrap();
        let a = Assignment::new(vec![vec![0, 3], vec![1, 2]], 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = optimize_decoding_order(&chan, &a, &config, &mut rng).unwrap();
        out.order.validate_against(&a).unwrap();
        let g = gain_matrix(&chan, &out.theta);
        for n in 0..2 {
            let list = out.order.channel(n);
            assert!(g[n][list[0]] <= g[n][list[1]]);
        }
        let inst = build_v(&chan, &a);
        assert!(inst.gain_sum(&out.theta) <= out.sdp_objective * (1.0 + 1e-6), "{} {} {}", inst.gain_sum(&out.theta), out.sdp_objective, out.rank_one);
    }
}
