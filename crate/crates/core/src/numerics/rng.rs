//! Seeded random stream with a fixed, documented algorithm.
//!
//! The generator is **xoshiro256++** (Blackman & Vigna). Its 256-bit state
//! is filled from the 64-bit seed by four successive outputs of
//! **SplitMix64**. Both algorithms are pure integer arithmetic, so a given
//! seed produces the same stream on every platform. Floating-point draws
//! use the `rand` 0.9 conversions (53 high bits for uniforms, ziggurat
//! for normals), which are also integer-exact.

use rand::rand_core::{impls, RngCore};
use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// One SplitMix64 step: advances `state` and returns the mixed output.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN_GAMMA);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a base seed with a path of stream identifiers into a new seed.
/// Used to give every (layer, probe, objective) job its own stream.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    let mut state = base;
    let mut out = splitmix64(&mut state);
    for &p in path {
        state ^= p.wrapping_mul(GOLDEN_GAMMA) ^ out;
        out = splitmix64(&mut state);
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Rng {
    seed: u64,
    s: [u64; 4],
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let s = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        Self { seed, s }
    }

    /// Starts from a raw xoshiro state, bypassing SplitMix64 seeding.
    /// The state must not be all zeros.
    pub fn from_state(s: [u64; 4]) -> Self {
        debug_assert!(s != [0; 4]);
        Self { seed: 0, s }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent child stream, reproducible from (`self.seed`, `stream`).
    pub fn fork(&self, stream: u64) -> Rng {
        Rng::new(derive_seed(self.seed, &[stream]))
    }

    fn step(&mut self) -> u64 {
        let s = &mut self.s;
        let result = s[0].wrapping_add(s[3]).rotate_left(23).wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.random::<f64>()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn normal(&mut self) -> f64 {
        StandardNormal.sample(self)
    }

    /// Uniform integer in `[0, n)`. `n` must be positive.
    pub fn below(&mut self, n: usize) -> usize {
        self.random_range(0..n)
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        items.shuffle(self);
    }

    /// Draws an index from a discrete distribution by inverse CDF.
    /// Falls back to the last positive-mass index on rounding shortfall.
    pub fn categorical(&mut self, probs: &[f64]) -> usize {
        let u = self.uniform();
        let mut acc = 0.0;
        let mut last = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p <= 0.0 {
                continue;
            }
            acc += p;
            last = i;
            if u < acc {
                return i;
            }
        }
        last
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        (self.step() >> 32) as u32
    }

    fn next_u64(&mut self) -> u64 {
        self.step()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        impls::fill_bytes_via_next(self, dst)
    }
}
