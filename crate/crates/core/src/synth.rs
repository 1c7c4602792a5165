//! Seeded generators with known ground truth.
//!
//! Every stream comes from xoshiro256** seeded through SplitMix64, both
//! written out below so that any implementation can reproduce the exact
//! sequence:
//!
//! ```text
//! splitmix64(state):
//!     state += 0x9E3779B97F4A7C15
//!     z = state
//!     z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//!     z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//!     return z ^ (z >> 31)
//!
//! seed: s[0..4] = four successive splitmix64 outputs from state = seed
//!
//! xoshiro256**:
//!     result = rotl(s1 * 5, 7) * 9
//!     t = s1 << 17
//!     s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3
//!     s2 ^= t;  s3 = rotl(s3, 45)
//!     return result
//! ```
//!
//! (all arithmetic wrapping mod 2⁶⁴). Uniforms on (0, 1] are
//! `((x >> 11) + 1) · 2⁻⁵³`; standard normals use the Box–Muller transform,
//! consuming two uniforms per pair and emitting the cosine branch first.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed(pub u64);

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct Xoshiro256 {
    s: [u64; 4],
}

impl Xoshiro256 {
    pub fn new(seed: Seed) -> Self {
        let mut state = seed.0;
        let s = std::array::from_fn(|_| splitmix64(&mut state));
        Xoshiro256 { s }
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.s;
        let result = s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform on (0, 1], never 0 so that logs and negative powers stay finite.
    pub fn uniform_open0(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Standard normal deviates by Box–Muller.
#[derive(Debug, Clone)]
pub struct StandardNormal {
    rng: Xoshiro256,
    spare: Option<f64>,
}

impl StandardNormal {
    pub fn new(seed: Seed) -> Self {
        StandardNormal {
            rng: Xoshiro256::new(seed),
            spare: None,
        }
    }

    pub fn sample(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = self.rng.uniform_open0();
        let u2 = self.rng.uniform_open0();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

/// Pareto samples with density `∝ x^alpha` on `[x_min, ∞)`, `alpha < -1`,
/// by inverse transform `x_min · u^(1/(alpha+1))`. The CCDF of the output
/// has slope `alpha + 1` on log-log axes.
pub fn gen_power_law(n: usize, alpha: f64, x_min: f64, seed: Seed) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    if !(alpha < -1.0) {
        return Err(Error::InvalidInput(format!(
            "density exponent {alpha} must be below -1"
        )));
    }
    if !(x_min.is_finite() && x_min > 0.0) {
        return Err(Error::InvalidInput(format!(
            "x_min {x_min} must be positive"
        )));
    }
    let mut rng = Xoshiro256::new(seed);
    let inv = 1.0 / (alpha + 1.0);
    Ok((0..n)
        .map(|_| (x_min * rng.uniform_open0().powf(inv)).max(x_min))
        .collect())
}

/// `exp(mu + sigma · Z)` for standard normal `Z`.
pub fn gen_lognormal(n: usize, mu: f64, sigma: f64, seed: Seed) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    if !(sigma.is_finite() && sigma > 0.0) || !mu.is_finite() {
        return Err(Error::InvalidInput(format!(
            "need finite mu and positive sigma, got mu={mu}, sigma={sigma}"
        )));
    }
    let mut normal = StandardNormal::new(seed);
    Ok((0..n)
        .map(|_| (mu + sigma * normal.sample()).exp())
        .collect())
}

/// I.i.d. standard normal series of length `t`.
pub fn gen_white_noise(t: usize, seed: Seed) -> Result<Vec<f64>> {
    if t < 4 {
        return Err(Error::InvalidInput(format!("length {t} below 4")));
    }
    let mut normal = StandardNormal::new(seed);
    Ok((0..t).map(|_| normal.sample()).collect())
}

/// `amplitude · cos(2π t / period) + noise_sd · Z_t` for `t = 0..T`.
pub fn gen_sinusoid(
    t: usize,
    period: f64,
    amplitude: f64,
    noise_sd: f64,
    seed: Seed,
) -> Result<Vec<f64>> {
    if t < 4 {
        return Err(Error::InvalidInput(format!("length {t} below 4")));
    }
    if !(period.is_finite() && period >= 2.0) {
        return Err(Error::InvalidInput(format!(
            "period {period} must be at least 2"
        )));
    }
    if !(noise_sd.is_finite() && noise_sd >= 0.0) || !amplitude.is_finite() {
        return Err(Error::InvalidInput(format!(
            "need finite amplitude and non-negative noise, got {amplitude}, {noise_sd}"
        )));
    }
    let mut normal = StandardNormal::new(seed);
    let w = 2.0 * std::f64::consts::PI / period;
    Ok((0..t)
        .map(|i| {
            let clean = amplitude * (w * i as f64).cos();
            if noise_sd == 0.0 {
                clean
            } else {
                clean + noise_sd * normal.sample()
            }
        })
        .collect())
}
