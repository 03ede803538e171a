//! Counter-based reproducible random streams.
//!
//! Every noise value is a pure function of
//! `(master_seed, stream_id, replica, channel, particle, block, lane)`,
//! hashed through SplitMix64. No generator state is shared between
//! particles, replicas, or workers, so trajectories are bit-identical for
//! any worker count and permuting particle stream keys permutes the noise
//! exactly.

use serde::{Deserialize, Serialize};

/// Master seed plus a stream discriminator; the root of every derivation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedLineage {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl SeedLineage {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        SeedLineage {
            master_seed,
            stream_id,
        }
    }
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Folds a list of fields into one well-mixed 64-bit key.
#[inline]
pub fn mix_key(parts: &[u64]) -> u64 {
    let mut state = 0x6a09e667f3bcc909u64;
    let mut acc = 0u64;
    for &p in parts {
        state ^= p;
        acc ^= splitmix64(&mut state);
    }
    acc
}

/// Splittable noise source; children are derived, never iterated.
#[derive(Debug, Clone, Copy)]
pub struct NoiseStreams {
    base: u64,
}

impl NoiseStreams {
    pub fn from_lineage(lineage: SeedLineage) -> Self {
        NoiseStreams {
            base: mix_key(&[lineage.master_seed, lineage.stream_id]),
        }
    }

    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self::from_lineage(SeedLineage::new(master_seed, stream_id))
    }

    /// Stream for one replica of an experiment.
    pub fn replica(&self, r: u64) -> NoiseStreams {
        NoiseStreams {
            base: mix_key(&[self.base, 0x7265706c69636173, r]),
        }
    }

    /// Independent channel inside a stream (position vs velocity noise,
    /// burn-in vs sampling, and so on).
    pub fn channel(&self, c: u64) -> NoiseStreams {
        NoiseStreams {
            base: mix_key(&[self.base, 0x6368616e6e656c73, c]),
        }
    }

    #[inline]
    fn word(&self, particle: u64, block: u64, lane: u64) -> u64 {
        let mut state = mix_key(&[self.base, particle, block, lane]);
        splitmix64(&mut state)
    }

    /// Uniform in (0, 1]; never returns exactly zero.
    #[inline]
    pub fn uniform(&self, particle: u64, block: u64, lane: u64) -> f64 {
        let u = self.word(particle, block, lane);
        ((u >> 11) + 1) as f64 * (1.0 / 9007199254740992.0)
    }

    /// Fills `out` with standard normals via Box-Muller pairs.
    pub fn fill_standard_normals(&self, particle: u64, block: u64, out: &mut [f64]) {
        let mut lane = 0u64;
        let mut i = 0usize;
        while i < out.len() {
            let u1 = self.uniform(particle, block, lane);
            let u2 = self.uniform(particle, block, lane + 1);
            lane += 2;
            let r = (-2.0 * u1.ln()).sqrt();
            let theta = 2.0 * std::f64::consts::PI * u2;
            out[i] = r * theta.cos();
            i += 1;
            if i < out.len() {
                out[i] = r * theta.sin();
                i += 1;
            }
        }
    }

    /// One standard normal.
    pub fn standard_normal(&self, particle: u64, block: u64) -> f64 {
        let mut z = [0.0];
        self.fill_standard_normals(particle, block, &mut z);
        z[0]
    }
}

/// Summation over a fixed pairwise tree: the result only depends on the
/// slice contents, never on worker count or chunking.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 8 {
        let mut acc = 0.0;
        for x in xs {
            acc += x;
        }
        acc
    } else {
        let mid = xs.len() / 2;
        pairwise_sum(&xs[..mid]) + pairwise_sum(&xs[mid..])
    }
}
