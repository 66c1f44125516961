use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// IRS reflection coefficients, one complex entry per element with modulus at most one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflectionVector(Vec<Complex64>);

impl ReflectionVector {
    /// Modulus slack tolerated by [`ReflectionVector::new`].
    pub const MODULUS_TOL: f64 = 1e-9;

    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        for (m, e) in entries.iter().enumerate() {
            if !e.re.is_finite() || !e.im.is_finite() {
                return Err(Error::Domain(format!("reflection entry {m} is not finite")));
            }
            if e.norm() > 1.0 + Self::MODULUS_TOL {
                return Err(Error::Domain(format!(
                    "reflection entry {m} has modulus {} > 1",
                    e.norm()
                )));
            }
        }
        Ok(Self(entries))
    }

    /// Projects each entry onto the closed unit disc.
    pub fn clamped(entries: Vec<Complex64>) -> Self {
        Self(
            entries
                .into_iter()
                .map(|e| {
                    let r = e.norm();
                    if r > 1.0 {
                        e / r
                    } else {
                        e
                    }
                })
                .collect(),
        )
    }

    pub fn zeros(m: usize) -> Self {
        Self(vec![Complex64::new(0.0, 0.0); m])
    }

    pub fn ones(m: usize) -> Self {
        Self(vec![Complex64::new(1.0, 0.0); m])
    }

    pub fn from_phases(phases: &[f64]) -> Self {
        Self(phases.iter().map(|&t| Complex64::from_polar(1.0, t)).collect())
    }

    /// Unit-amplitude entries with independent uniform phases.
    pub fn random_phases<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Self {
        Self(
            (0..m)
                .map(|_| Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    pub fn max_modulus(&self) -> f64 {
        self.0.iter().map(|e| e.norm()).fold(0.0, f64::max)
    }
}

/// Channel-to-users map. Every user appears on at most one channel.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Assignment {
    channels: Vec<Vec<usize>>,
}

impl Assignment {
    /// Builds an assignment, sorting each channel's user list.
    pub fn new(mut channels: Vec<Vec<usize>>, n_users: usize) -> Result<Self> {
        let mut seen = vec![false; n_users];
        for (n, users) in channels.iter_mut().enumerate() {
            users.sort_unstable();
            for &k in users.iter() {
                if k >= n_users {
                    return Err(Error::Domain(format!("user {k} on channel {n} out of range")));
                }
                if seen[k] {
                    return Err(Error::Domain(format!("user {k} assigned twice")));
                }
                seen[k] = true;
            }
        }
        Ok(Self { channels })
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn users(&self, n: usize) -> &[usize] {
        &self.channels[n]
    }

    pub fn channels(&self) -> &[Vec<usize>] {
        &self.channels
    }

    pub fn channel_of(&self, k: usize) -> Option<usize> {
        self.channels.iter().position(|u| u.contains(&k))
    }

    pub fn n_assigned(&self) -> usize {
        self.channels.iter().map(Vec::len).sum()
    }
}

/// Per-channel SIC decoding order: `order.channel(n)[0]` is decoded first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DecodingOrder {
    channels: Vec<Vec<usize>>,
}

impl DecodingOrder {
    pub fn new(channels: Vec<Vec<usize>>) -> Self {
        Self { channels }
    }

    /// Checks that each channel's order is a permutation of that channel's users.
    pub fn validate_against(&self, assignment: &Assignment) -> Result<()> {
        if self.channels.len() != assignment.n_channels() {
            return Err(Error::Domain("decoding order and assignment disagree on N".into()));
        }
        for (n, order) in self.channels.iter().enumerate() {
            let mut sorted = order.clone();
            sorted.sort_unstable();
            if sorted != assignment.users(n) {
                return Err(Error::Domain(format!(
                    "order on channel {n} is not a permutation of its users"
                )));
            }
        }
        Ok(())
    }

    /// Users sorted by index on every channel.
    pub fn identity(assignment: &Assignment) -> Self {
        Self::new(assignment.channels().to_vec())
    }

    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, n: usize) -> &[usize] {
        &self.channels[n]
    }

    pub fn channels(&self) -> &[Vec<usize>] {
        &self.channels
    }

    /// 1-based decoding position of user `k` on channel `n`.
    pub fn position(&self, n: usize, k: usize) -> Option<usize> {
        self.channels[n].iter().position(|&u| u == k).map(|p| p + 1)
    }

    pub fn assignment(&self, n_users: usize) -> Assignment {
        Assignment::new(self.channels.clone(), n_users).expect("decoding order lists each user once")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflection_vector_rejects_modulus_above_one() {
        assert!(ReflectionVector::new(vec![Complex64::new(1.0, 0.1)]).is_err());
        assert!(ReflectionVector::new(vec![Complex64::new(0.6, 0.8)]).is_ok());
        let c = ReflectionVector::clamped(vec![Complex64::new(3.0, 4.0)]);
        assert!((c.as_slice()[0] - Complex64::new(0.6, 0.8)).norm() < 1e-15);
    }

    #[test]
    fn assignment_rejects_duplicates() {
        assert!(Assignment::new(vec![vec![0, 1], vec![1]], 3).is_err());
        assert!(Assignment::new(vec![vec![0, 5]], 3).is_err());
        let a = Assignment::new(vec![vec![2, 0], vec![1]], 3).unwrap();
        assert_eq!(a.users(0), &[0, 2]);
        assert_eq!(a.channel_of(1), Some(1));
    }

    #[test]
    fn order_positions_are_one_based() {
        let a = Assignment::new(vec![vec![0, 1, 2]], 3).unwrap();
        let o = DecodingOrder::new(vec![vec![2, 0, 1]]);
        o.validate_against(&a).unwrap();
        assert_eq!(o.position(0, 2), Some(1));
        assert_eq!(o.position(0, 1), Some(3));
        assert!(DecodingOrder::new(vec![vec![2, 0]]).validate_against(&a).is_err());
    }
}
