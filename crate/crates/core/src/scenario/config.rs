use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Converts a power in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Numerical knobs shared by the solvers and the outer loops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    /// Absolute constraint slack accepted on returned points.
    pub slack: f64,
    /// Relative duality gap at which the interior-point solvers stop.
    pub gap: f64,
    /// Barrier parameter growth factor between centering steps.
    pub barrier_growth: f64,
    /// Newton iterations allowed per centering step.
    pub newton_cap: usize,
    /// Minimum separation of normalized combined gains between consecutively decoded users.
    pub order_margin: f64,
    /// Relative objective change that ends the power SCA loop.
    pub sca: f64,
    pub power_iter_cap: usize,
    pub feasibility_iter_cap: usize,
    /// Infeasibility indicator level below which a power point counts as feasible.
    pub feasibility_threshold: f64,
    pub reflection_tol: f64,
    pub reflection_iter_cap: usize,
    pub outer_tol: f64,
    pub outer_iter_cap: usize,
    /// Strict-improvement margin used by the swap-blocking test.
    pub swap_margin: f64,
    /// Ratio of second to first eigenvalue below which a lifted solution is treated as rank one.
    pub rank_one_ratio: f64,
    /// Floor applied to SINR surrogates before dividing by them.
    pub chi_floor: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            slack: 1e-6,
            gap: 1e-6,
            barrier_growth: 10.0,
            newton_cap: 200,
            order_margin: 1e-8,
            sca: 1e-4,
            power_iter_cap: 50,
            feasibility_iter_cap: 50,
            feasibility_threshold: 1e-6,
            reflection_tol: 1e-4,
            reflection_iter_cap: 30,
            outer_tol: 1e-3,
            outer_iter_cap: 30,
            swap_margin: 1e-9,
            rank_one_ratio: 1e-6,
            chi_floor: 1e-12,
        }
    }
}

/// Reflection vector used when evaluating matching utilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MatchingReflection {
    /// Every element at unit amplitude and zero phase.
    #[default]
    AllOnes,
    /// Reflection path switched off.
    Off,
}

/// Every scenario parameter, in linear units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n_channels: usize,
    pub n_users: usize,
    /// Maximum number of users per channel (identical for every channel).
    pub per_channel_cap: usize,
    /// Total transmit power budget, watts.
    pub p_max: f64,
    /// Minimum rate per user, bit/s/Hz.
    pub r_min: f64,
    /// Noise power, watts.
    pub noise_power: f64,
    /// Total bandwidth, Hz.
    pub total_bandwidth: f64,
    pub bs_pos: [f64; 3],
    pub irs_pos: [f64; 3],
    pub user_center: [f64; 3],
    pub user_radius: f64,
    pub pl_exp_bs_user: f64,
    pub pl_exp_bs_irs: f64,
    pub pl_exp_irs_user: f64,
    /// Rician factor of the BS-IRS link, linear. `f64::INFINITY` gives a pure LoS link.
    pub rician_factor: f64,
    pub n_elements: usize,
    pub seed: u64,
    /// Gaussian randomization candidates drawn when the lifted solution is not rank one.
    pub n_candidates: usize,
    pub matching_reflection: MatchingReflection,
    /// Start the joint power/reflection step from the decoding-order reflection
    /// instead of a random one.
    pub warm_start_reflection: bool,
    pub max_assignments: u128,
    pub max_order_combinations: u128,
    pub tolerances: Tolerances,
}

impl Default for SystemConfig {
    /// Desk-scale version of the reference deployment: two channels, two users
    /// per channel, eight reflecting elements.
    fn default() -> Self {
        let n_channels = 2;
        Self {
            n_channels,
            n_users: 4,
            per_channel_cap: 2,
            p_max: dbm_to_watts(15.0),
            r_min: 0.01,
            noise_power: dbm_to_watts(-80.0),
            total_bandwidth: 15e3 * n_channels as f64,
            bs_pos: [0.0, 0.0, 15.0],
            irs_pos: [50.0, 50.0, 15.0],
            user_center: [50.0, 45.0, 0.0],
            user_radius: 5.0,
            pl_exp_bs_user: 3.0,
            pl_exp_bs_irs: 2.2,
            pl_exp_irs_user: 2.5,
            rician_factor: db_to_linear(3.0),
            n_elements: 8,
            seed: 0,
            n_candidates: 100,
            matching_reflection: MatchingReflection::AllOnes,
            warm_start_reflection: false,
            max_assignments: 10_000,
            max_order_combinations: 1_000,
            tolerances: Tolerances::default(),
        }
    }
}

impl SystemConfig {
    pub fn channel_bandwidth(&self) -> f64 {
        self.total_bandwidth / self.n_channels as f64
    }

    /// Minimum SINR implied by the minimum rate.
    pub fn chi_min(&self) -> f64 {
        2f64.powf(self.r_min) - 1.0
    }

    /// Moves the BS to the origin and the IRS onto the BS-user axis at `x`,
    /// with user center 50 m away and both reflection-path exponents 2.5.
    pub fn with_irs_on_axis(mut self, x: f64) -> Self {
        self.bs_pos = [0.0, 0.0, 0.0];
        self.irs_pos = [x, 0.0, 0.0];
        self.user_center = [50.0, 0.0, 0.0];
        self.pl_exp_bs_irs = 2.5;
        self.pl_exp_irs_user = 2.5;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n_channels == 0 || self.n_users == 0 || self.per_channel_cap == 0 {
            return fail("channel, user and per-channel counts must be positive".into());
        }
        if self.n_users > self.n_channels * self.per_channel_cap {
            return fail(format!(
                "{} users cannot fit on {} channels of capacity {}",
                self.n_users, self.n_channels, self.per_channel_cap
            ));
        }
        let positive = [
            ("p_max", self.p_max),
            ("noise_power", self.noise_power),
            ("total_bandwidth", self.total_bandwidth),
            ("user_radius", self.user_radius),
            ("pl_exp_bs_user", self.pl_exp_bs_user),
            ("pl_exp_bs_irs", self.pl_exp_bs_irs),
            ("pl_exp_irs_user", self.pl_exp_irs_user),
            ("rician_factor", self.rician_factor),
        ];
        for (name, v) in positive {
            // p_max = 0 is allowed so infeasible budgets can be expressed
            if name == "p_max" && v == 0.0 {
                continue;
            }
            if v.is_nan() || v <= 0.0 {
                return fail(format!("{name} must be strictly positive, got {v}"));
            }
        }
        if !(self.r_min >= 0.0) || !self.r_min.is_finite() {
            return fail(format!("r_min must be finite and non-negative, got {}", self.r_min));
        }
        if self.n_candidates == 0 {
            return fail("n_candidates must be at least 1".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_conversions() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((dbm_to_watts(-80.0) - 1e-11).abs() < 1e-24);
        assert!((watts_to_dbm(dbm_to_watts(15.0)) - 15.0).abs() < 1e-12);
        assert!((db_to_linear(3.0) - 1.9952623149688795).abs() < 1e-12);
    }

    #[test]
    fn default_config_is_valid_and_fully_occupied() {
        let c = SystemConfig::default();
        c.validate().unwrap();
        assert_eq!(c.n_channels * c.per_channel_cap, c.n_users);
        assert!((c.channel_bandwidth() - 15e3).abs() < 1e-9);
    }

    #[test]
    fn rejects_overfull_and_nonpositive() {
        let mut c = SystemConfig::default();
        c.n_users = 5;
        assert!(c.validate().is_err());
        let mut c = SystemConfig::default();
        c.user_radius = 0.0;
        assert!(c.validate().is_err());
        let mut c = SystemConfig::default();
        c.r_min = -0.1;
        assert!(c.validate().is_err());
    }
}
