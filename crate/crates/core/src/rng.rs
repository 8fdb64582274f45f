//! Counter-based random bits keyed by `(seed, index)`.
//!
//! Every draw is a pure function of its key, so a thinned set does not
//! depend on the order in which indices are visited and chunks of a scan
//! can be processed on different threads.

/// SplitMix64 finalizer (Steele, Lea, Flood 2014).
#[inline]
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A stream of independent uniforms addressed by an integer counter.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KeyedRng {
    key: u64,
}

impl KeyedRng {
    pub fn new(seed: u64) -> Self {
        KeyedRng {
            key: splitmix64(seed ^ 0x6a09_e667_f3bc_c909),
        }
    }

    /// Derives an independent stream, e.g. one per construction stage.
    pub fn split(&self, stream: u64) -> Self {
        KeyedRng {
            key: splitmix64(self.key ^ splitmix64(stream.wrapping_add(0x3c6e_f372_fe94_f82b))),
        }
    }

    #[inline]
    pub fn bits(&self, counter: u64) -> u64 {
        splitmix64(splitmix64(self.key.wrapping_add(counter)) ^ self.key)
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    #[inline]
    pub fn uniform(&self, counter: u64) -> f64 {
        (self.bits(counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Bernoulli draw with success probability `p`; `p >= 1` always succeeds.
    #[inline]
    pub fn bernoulli(&self, counter: u64, p: f64) -> bool {
        p >= 1.0 || self.uniform(counter) < p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn draws_depend_only_on_key() {
        let a = KeyedRng::new(42);
        let b = KeyedRng::new(42);
        let forward: Vec<u64> = (0..100).map(|i| a.bits(i)).collect();
        let backward: Vec<u64> = (0..100).rev().map(|i| b.bits(i)).collect();
        assert!(forward.iter().eq(backward.iter().rev()));
        assert_ne!(KeyedRng::new(43).bits(0), a.bits(0));
        assert_ne!(a.split(1).bits(0), a.split(2).bits(0));
    }

    #[test]
    fn uniform_mean_and_bernoulli_edges() {
        let rng = KeyedRng::new(7);
        let n = 200_000;
        let mean = (0..n).map(|i| rng.uniform(i)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 5e-3);
        assert!((0..1000).all(|i| rng.bernoulli(i, 1.0)));
        assert!((0..1000).all(|i| !rng.bernoulli(i, 0.0)));
    }
}
