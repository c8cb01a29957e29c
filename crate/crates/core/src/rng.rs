//! Seed plumbing.
//!
//! Two kinds of randomness are used in the simulator:
//!
//! * bulk generators (shuffles, synthetic data) are `ChaCha8Rng` instances
//!   seeded from a per-component seed, and
//! * per-element draws (the Poisson pixel sampler) come from a stateless
//!   counter-based generator: a `(key, counter)` pair is hashed into a
//!   uniform variate, so any element can be sampled independently of the
//!   order in which others are visited.
//!
//! Component seeds are derived from a master seed by hashing the component
//! name, which keeps results independent of module execution order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;
const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = FNV_OFFSET;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

/// Incremental FNV-1a, for hashing a canonical serialization without
/// materializing it.
#[derive(Debug, Clone)]
pub struct Fnv1a(u64);

impl Default for Fnv1a {
    fn default() -> Self {
        Fnv1a(FNV_OFFSET)
    }
}

impl Fnv1a {
    pub fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= u64::from(b);
            self.0 = self.0.wrapping_mul(FNV_PRIME);
        }
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}

/// Derive a component seed from `(master_seed, name)`.
pub fn derive_seed(master_seed: u64, component: &str) -> u64 {
    let mut h = Fnv1a::default();
    h.write(&master_seed.to_le_bytes());
    h.write(component.as_bytes());
    mix64(h.finish())
}

/// Fold a sequence of words into a single stream key.
pub fn stream_key(parts: &[u64]) -> u64 {
    parts.iter().fold(GOLDEN_GAMMA, |acc, &p| {
        mix64(acc.wrapping_add(GOLDEN_GAMMA) ^ mix64(p.wrapping_add(GOLDEN_GAMMA)))
    })
}

/// Seeded bulk generator for a component.
pub fn component_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Stateless counter-based uniform source.
///
/// `uniform(i)` is a pure function of `(key, i)` and lies in `[0, 1)`;
/// `open_uniform(i)` lies in `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Substream {
    key: u64,
}

impl Substream {
    pub fn new(key: u64) -> Self {
        Substream { key }
    }

    pub fn key(&self) -> u64 {
        self.key
    }

    /// Child stream for element `index`.
    pub fn child(&self, index: u64) -> Substream {
        Substream::new(stream_key(&[self.key, index]))
    }

    #[inline]
    pub fn bits(&self, counter: u64) -> u64 {
        mix64(
            self.key
                ^ mix64(
                    counter
                        .wrapping_mul(GOLDEN_GAMMA)
                        .wrapping_add(GOLDEN_GAMMA),
                ),
        )
    }

    #[inline]
    pub fn uniform(&self, counter: u64) -> f64 {
        (self.bits(counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    #[inline]
    pub fn open_uniform(&self, counter: u64) -> f64 {
        ((self.bits(counter) >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller on counters `2c` and `2c + 1`.
    pub fn normal(&self, counter: u64) -> f64 {
        let u1 = self.open_uniform(counter.wrapping_mul(2));
        let u2 = self.uniform(counter.wrapping_mul(2).wrapping_add(1));
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
