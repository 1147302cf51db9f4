//! Counter-keyed Gaussian increments.
//!
//! Every Brownian increment is a pure function of `(seed, path, step,
//! channel)`: the key is hashed into the state of a small splitmix-style
//! generator, which then drives a standard-normal sampler.  No generator
//! state is shared across paths or steps, so ensembles are bit-identical no
//! matter how path generation is scheduled across threads.
//!
//! Three channels per (path, step):
//!
//! ```text
//! dW = sqrt(dt) N0                                    (holdings noise)
//! dZ = sqrt(dt) (rho N0 + sqrt(1 - rho^2) N1)         (impact noise, corr rho with dW)
//! dB = sqrt(dt) N2                                    (base-price noise, independent)
//! ```

use crate::params::ModelParams;
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};

const CHANNEL_HOLDINGS: u64 = 0;
const CHANNEL_IMPACT: u64 = 1;
const CHANNEL_PRICE: u64 = 2;

/// splitmix64 finalizer: a high-quality 64-bit mixing function.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stateless stream key: absorbs each coordinate through the mixer, with
/// distinct odd multipliers decorrelating the coordinates.
#[inline]
fn stream_key(seed: u64, path: u64, step: u64, channel: u64) -> u64 {
    let mut k = mix(seed ^ 0xA076_1D64_78BD_642F);
    k = mix(k ^ path.wrapping_mul(0xE703_7ED1_A0B4_28DB));
    k = mix(k ^ step.wrapping_mul(0x8EBC_6AF0_9C88_C6E3));
    mix(k ^ channel.wrapping_mul(0x5899_65CC_7537_4CC3))
}

/// Minimal splitmix64 generator seeded from a stream key.  Implements
/// [`RngCore`] so distribution samplers from `rand_distr` can consume it.
#[derive(Debug, Clone)]
pub struct CounterRng {
    state: u64,
}

impl CounterRng {
    /// Generator for one `(seed, path, step, channel)` stream.
    pub fn from_key(seed: u64, path: u64, step: u64, channel: u64) -> Self {
        Self {
            state: stream_key(seed, path, step, channel),
        }
    }

    /// Uniform draw in [0, 1) with 53-bit resolution.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
    }

    /// One standard-normal draw.
    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(self)
    }
}

impl RngCore for CounterRng {
    fn next_u32(&mut self) -> u32 {
        (self.next_u64() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        mix(self.state)
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        for chunk in dest.chunks_mut(8) {
            let bytes = self.next_u64().to_le_bytes();
            chunk.copy_from_slice(&bytes[..chunk.len()]);
        }
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.fill_bytes(dest);
        Ok(())
    }
}

/// One step's Brownian increments.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepNoise {
    /// Holdings-noise increment `dW`.
    pub dw: f64,
    /// Impact-noise increment `dZ`, correlation `rho` with `dW`.
    pub dz: f64,
    /// Base-price increment `dB`, independent of the others.
    pub db: f64,
}

/// Deterministic description of every increment an ensemble will use.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisePlan {
    pub seed: u64,
    pub n_paths: usize,
    pub n_steps: usize,
    /// Correlation between `dW` and `dZ` (from the model parameters).
    pub correlation: f64,
    /// Step length `dt = horizon / n_steps`.
    pub dt: f64,
}

impl NoisePlan {
    pub fn new(seed: u64, n_paths: usize, n_steps: usize, params: &ModelParams) -> Self {
        assert!(n_paths > 0, "need at least one path");
        assert!(n_steps > 0, "need at least one step");
        Self {
            seed,
            n_paths,
            n_steps,
            correlation: params.correlation,
            dt: params.horizon / n_steps as f64,
        }
    }

    /// The increments for `(path, step)` — a pure function of the plan.
    pub fn increments(&self, path: usize, step: usize) -> StepNoise {
        debug_assert!(path < self.n_paths && step < self.n_steps);
        let sdt = self.dt.sqrt();
        let n0 = CounterRng::from_key(self.seed, path as u64, step as u64, CHANNEL_HOLDINGS)
            .standard_normal();
        let n1 = CounterRng::from_key(self.seed, path as u64, step as u64, CHANNEL_IMPACT)
            .standard_normal();
        let n2 = CounterRng::from_key(self.seed, path as u64, step as u64, CHANNEL_PRICE)
            .standard_normal();
        let rho = self.correlation;
        StepNoise {
            dw: sdt * n0,
            dz: sdt * (rho * n0 + (1.0 - rho * rho).max(0.0).sqrt() * n1),
            db: sdt * n2,
        }
    }
}
