//! Small deterministic PRNG used everywhere randomness is needed.
//!
//! Everything in this crate that takes a seed must be bit-reproducible across
//! runs and platforms, so we keep the generator in-tree instead of depending
//! on an external crate whose stream might change between versions. The core
//! is SplitMix64 (Steele et al.), which has full 64-bit avalanche in its
//! finalizer — good enough for Zobrist keys and for driving Box-Muller.

/// SplitMix64 finalizer. Maps any 64-bit value to a well-mixed 64-bit value.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Sequential SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct Rng {
    state: u64,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Rng { state: seed }
    }

    /// Derives an independent stream from a master seed, a stream label and an
    /// index. Used so that e.g. the training window at step `k` never depends
    /// on how many random numbers earlier steps consumed.
    pub fn derive(seed: u64, label: u64, index: u64) -> Self {
        let s = mix64(seed ^ mix64(label)).wrapping_add(mix64(index));
        Rng::new(mix64(s))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, bound)` without modulo bias (rejection sampling).
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "next_below(0)");
        let zone = u64::MAX - (u64::MAX % bound);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % bound;
            }
        }
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal via Box-Muller.
    pub fn next_normal(&mut self) -> f64 {
        let u1 = loop {
            let u = self.next_f64();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    /// Picks a uniformly random element of a non-empty slice.
    pub fn choose<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.next_below(items.len() as u64) as usize]
    }
}

/// Stream labels for [`Rng::derive`]. Kept in one place so two subsystems
/// never collide on the same derived stream.
pub mod stream {
    pub const INIT: u64 = 0x696e6974; // "init"
    pub const WINDOW: u64 = 0x77696e64; // "wind"
    pub const SAMPLE: u64 = 0x73616d70; // "samp"
    pub const BASELINE: u64 = 0x62617365; // "base"
    pub const FIXTURE: u64 = 0x66697874; // "fixt"
}
