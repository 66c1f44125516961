use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::config::SystemConfig;
use super::types::ReflectionVector;
use crate::error::{Error, Result};

/// Large-scale path loss `1e-3 * d^-exponent` as a linear power gain.
pub fn path_loss(distance: f64, exponent: f64) -> Result<f64> {
    if !(distance > 0.0) || !distance.is_finite() {
        return Err(Error::Domain(format!("path loss distance must be positive, got {distance}")));
    }
    if !(exponent > 0.0) {
        return Err(Error::Domain(format!("path loss exponent must be positive, got {exponent}")));
    }
    Ok(1e-3 * distance.powf(-exponent))
}

pub fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

// Independent sub-streams so that changing one dimension (M, K, IRS position)
// leaves the draws of the others untouched.
const STREAM_POSITIONS: u64 = 1;
const STREAM_DIRECT: u64 = 2;
const STREAM_BS_IRS: u64 = 1 << 20;
const STREAM_IRS_USER: u64 = 1 << 40;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Unit-variance circularly-symmetric complex Gaussian sample.
pub(crate) fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// One draw of every link in the system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub n_channels: usize,
    pub n_users: usize,
    pub n_elements: usize,
    pub noise_power: f64,
    pub user_positions: Vec<[f64; 3]>,
    /// Direct BS-user coefficients, `h[n][k]`.
    pub h: Vec<Vec<Complex64>>,
    /// IRS-user coefficients, `g[n][k][m]`.
    pub g: Vec<Vec<Vec<Complex64>>>,
    /// BS-IRS coefficients, `f[n][m]`.
    pub f: Vec<Vec<Complex64>>,
    /// LoS component of `f`, path-loss scaled.
    pub f_los: Vec<Vec<Complex64>>,
    /// NLoS component of `f`, path-loss scaled.
    pub f_nlos: Vec<Vec<Complex64>>,
}

/// Uniform point on a horizontal disc (sqrt-radius correction).
fn sample_disc<R: Rng + ?Sized>(rng: &mut R, center: [f64; 3], radius: f64) -> [f64; 3] {
    let r = radius * rng.random::<f64>().sqrt();
    let t = rng.random_range(0.0..std::f64::consts::TAU);
    [center[0] + r * t.cos(), center[1] + r * t.sin(), center[2]]
}

/// Draws a realization; a pure function of `(config, seed)`.
pub fn sample_channels(config: &SystemConfig, seed: u64) -> Result<ChannelRealization> {
    config.validate()?;
    let (n_ch, n_users, m) = (config.n_channels, config.n_users, config.n_elements);

    let mut pos_rng = stream(seed, STREAM_POSITIONS);
    let user_positions: Vec<[f64; 3]> = (0..n_users)
        .map(|_| sample_disc(&mut pos_rng, config.user_center, config.user_radius))
        .collect();

    let pl_direct = user_positions
        .iter()
        .map(|&u| path_loss(distance(config.bs_pos, u), config.pl_exp_bs_user))
        .collect::<Result<Vec<_>>>()?;
    let pl_irs_user = user_positions
        .iter()
        .map(|&u| path_loss(distance(config.irs_pos, u), config.pl_exp_irs_user))
        .collect::<Result<Vec<_>>>()?;
    let pl_bs_irs = path_loss(distance(config.bs_pos, config.irs_pos), config.pl_exp_bs_irs)?;

    let mut direct_rng = stream(seed, STREAM_DIRECT);
    let h = (0..n_ch)
        .map(|_| {
            (0..n_users)
                .map(|k| complex_normal(&mut direct_rng) * pl_direct[k].sqrt())
                .collect()
        })
        .collect();

    // Steering-style LoS vector from the BS direction seen at the IRS.
    let dx = config.bs_pos[0] - config.irs_pos[0];
    let d = distance(config.bs_pos, config.irs_pos);
    let sin_phi = if d > 0.0 { dx / d } else { 0.0 };
    let los: Vec<Complex64> = (0..m)
        .map(|i| Complex64::from_polar(1.0, std::f64::consts::PI * i as f64 * sin_phi))
        .collect();

    let kappa = config.rician_factor;
    let (w_los, w_nlos) = if kappa.is_infinite() {
        (1.0, 0.0)
    } else {
        ((kappa / (1.0 + kappa)).sqrt(), (1.0 / (1.0 + kappa)).sqrt())
    };
    let amp = pl_bs_irs.sqrt();

    let mut f = Vec::with_capacity(n_ch);
    let mut f_los = Vec::with_capacity(n_ch);
    let mut f_nlos = Vec::with_capacity(n_ch);
    for n in 0..n_ch {
        let mut rng = stream(seed, STREAM_BS_IRS | n as u64);
        let los_n: Vec<Complex64> = los.iter().map(|&a| a * amp).collect();
        let nlos_n: Vec<Complex64> = (0..m).map(|_| complex_normal(&mut rng) * amp).collect();
        f.push(
            los_n
                .iter()
                .zip(&nlos_n)
                .map(|(&l, &r)| l * w_los + r * w_nlos)
                .collect(),
        );
        f_los.push(los_n);
        f_nlos.push(nlos_n);
    }

    let g = (0..n_ch)
        .map(|n| {
            (0..n_users)
                .map(|k| {
                    let mut rng = stream(seed, STREAM_IRS_USER | ((n as u64) << 20) | k as u64);
                    let a = pl_irs_user[k].sqrt();
                    (0..m).map(|_| complex_normal(&mut rng) * a).collect()
                })
                .collect()
        })
        .collect();

    Ok(ChannelRealization {
        n_channels: n_ch,
        n_users,
        n_elements: m,
        noise_power: config.noise_power,
        user_positions,
        h,
        g,
        f,
        f_los,
        f_nlos,
    })
}

impl ChannelRealization {
    /// Cascaded row vector `g^H diag(f)` of user `k` on channel `n`.
    pub fn cascade(&self, n: usize, k: usize) -> Vec<Complex64> {
        self.g[n][k]
            .iter()
            .zip(&self.f[n])
            .map(|(g, f)| g.conj() * f)
            .collect()
    }

    /// Effective channel coefficient `g^H diag(e) f + h`.
    pub fn effective(&self, n: usize, k: usize, e: &ReflectionVector) -> Complex64 {
        let reflected: Complex64 = self.g[n][k]
            .iter()
            .zip(&self.f[n])
            .zip(e.as_slice())
            .map(|((g, f), e)| g.conj() * e * f)
            .sum();
        reflected + self.h[n][k]
    }

    /// Same realization with the reflection path removed.
    pub fn without_irs(&self) -> Self {
        let mut out = self.clone();
        out.n_elements = 0;
        for n in 0..self.n_channels {
            out.f[n].clear();
            out.f_los[n].clear();
            out.f_nlos[n].clear();
            for k in 0..self.n_users {
                out.g[n][k].clear();
            }
        }
        out
    }
}

/// Combined channel gain `|z e + h|^2` of user `k` on channel `n`.
pub fn combined_gain(chan: &ChannelRealization, n: usize, k: usize, e: &ReflectionVector) -> f64 {
    chan.effective(n, k, e).norm_sqr()
}
