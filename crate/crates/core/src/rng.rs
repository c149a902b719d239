//! Deterministic random streams and zero-mean samplers.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::matrix::RowVector;

/// Role tags mixed into child-stream seeds so that the input vector and
/// the write-noise draws of one trial never share a stream.
pub mod role {
    pub const INPUT: u64 = 0x1;
    pub const NOISE: u64 = 0x2;
    pub const MATRIX: u64 = 0x3;
}

/// SplitMix64 finalizer (Stafford variant 13).
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for `(master, index, role)`. Each component passes through the
/// avalanche mix before being folded in, so neighbouring indices or roles
/// yield uncorrelated seeds.
pub fn child_seed(master: u64, index: u64, role: u64) -> u64 {
    const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
    let h = mix64(master.wrapping_add(GOLDEN));
    let h = mix64(h ^ index.wrapping_mul(GOLDEN).wrapping_add(1));
    mix64(h ^ role.wrapping_mul(0xd1b5_4a32_d192_ed03))
}

/// Single-lane deterministic pseudorandom stream (ChaCha8).
#[derive(Debug, Clone)]
pub struct RandomStream {
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn from_seed(seed: u64) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Independent stream for trial `index` and purpose `role`.
    pub fn child(master: u64, index: u64, role: u64) -> Self {
        Self::from_seed(child_seed(master, index, role))
    }

    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform on `[0, 1)`.
    pub fn unit_uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Fills `buf` with i.i.d. zero-mean draws of the given variance.
    pub fn fill_zero_mean(&mut self, buf: &mut [f64], variance: f64, dist: Distribution) {
        match dist {
            Distribution::Gaussian => {
                let sd = variance.sqrt();
                for x in buf {
                    *x = sd * self.standard_normal();
                }
            }
            Distribution::Uniform => {
                let half = (3.0 * variance).sqrt();
                for x in buf {
                    *x = half * (2.0 * self.unit_uniform() - 1.0);
                }
            }
        }
    }
}

/// Zero-mean distribution family used for inputs and write noise.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Distribution {
    #[default]
    Gaussian,
    /// Uniform on `[-√(3σ²), √(3σ²)]`.
    Uniform,
}

impl fmt::Display for Distribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Distribution::Gaussian => "gaussian",
            Distribution::Uniform => "uniform",
        })
    }
}

impl FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Distribution::Gaussian),
            "uniform" => Ok(Distribution::Uniform),
            other => Err(invalid(format!("unknown distribution {other:?} (expected gaussian|uniform)"))),
        }
    }
}

/// Random input `b` of length `m` with `Cov(b) = σ_b² I`.
pub fn sample_input(m: usize, sigma_b_sq: f64, dist: Distribution, rng: &mut RandomStream) -> Result<RowVector> {
    if m == 0 {
        return Err(invalid("input length must be positive"));
    }
    if !(sigma_b_sq.is_finite() && sigma_b_sq > 0.0) {
        return Err(invalid(format!("input variance must be positive, got {sigma_b_sq}")));
    }
    let mut v = vec![0.0; m];
    rng.fill_zero_mean(&mut v, sigma_b_sq, dist);
    Ok(RowVector::from_vec_unchecked(v))
}
