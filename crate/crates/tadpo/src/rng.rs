//! Deterministic randomness: seed derivation and Gaussian sampling.
//!
//! Every stochastic component in the crate draws from its own ChaCha8 stream,
//! derived from a single master seed by hashing a purpose tag and an index.
//! Streams never share state, so adding draws to one (say, the teacher-pool
//! shuffle) cannot shift another (the environment), and runs that disable a
//! component reproduce runs that never had it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// splitmix64 finalizer; good avalanche, cheap, stable across platforms.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over the tag bytes, so distinct purpose strings land in distinct
/// stream families regardless of index.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Derive a child seed from `(master, tag, index)`.
pub fn derive_seed(master: u64, tag: &str, index: u64) -> u64 {
    splitmix64(master ^ fnv1a(tag.as_bytes()) ^ splitmix64(index.wrapping_mul(0x9e37_79b9_7f4a_7c15)))
}

/// A fresh ChaCha8 stream for `(master, tag, index)`.
pub fn stream(master: u64, tag: &str, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, tag, index))
}

/// Standard normal draw via Box–Muller; two uniforms per call, no state.
pub fn randn(rng: &mut impl Rng) -> f64 {
    // Open interval keeps ln() finite.
    let u1: f64 = loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            break u;
        }
    };
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// `n` independent standard normal draws.
pub fn randn_vec(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| randn(rng)).collect()
}

/// The named streams a training run owns. One master seed fans out into
/// non-interacting substreams; a stream that is never drawn from leaves the
/// others bit-identical to a run without it.
#[derive(Clone, Debug)]
pub struct TrainStreams {
    /// Environment resets and any world-side noise.
    pub env: ChaCha8Rng,
    /// Action sampling during rollout collection.
    pub policy: ChaCha8Rng,
    /// Minibatch shuffling of the on-policy buffer.
    pub schedule: ChaCha8Rng,
    /// The per-step student-vs-teacher branch draw.
    pub decision: ChaCha8Rng,
    /// Teacher-pool shuffling (without-replacement draws).
    pub teacher_pool: ChaCha8Rng,
}

impl TrainStreams {
    pub fn new(master: u64) -> Self {
        TrainStreams {
            env: stream(master, "env", 0),
            policy: stream(master, "policy", 0),
            schedule: stream(master, "schedule", 0),
            decision: stream(master, "decision", 0),
            teacher_pool: stream(master, "teacher_pool", 0),
        }
    }
}
