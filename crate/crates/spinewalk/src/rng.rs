//! Counter-based, splittable random number streams.
//!
//! Every stochastic routine in this crate takes an explicit [`Stream`].
//! Streams are derived from a master seed by hashing labels and indices,
//! so replicas can run in any parallel schedule and still produce
//! bit-identical aggregates: replica `i` of experiment `"pathwise"` always
//! sees the same bits.
//!
//! The core generator is SplitMix64: the state advances by a fixed odd
//! constant and the output is a bijective finalizer of the state, i.e. the
//! k-th output is a pure function of (key, k).

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// A node in the seed-derivation tree. Children are addressed by label or
/// index; the derivation is deterministic and collision-resistant enough
/// for Monte Carlo work.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedTree {
    key: u64,
}

impl SeedTree {
    pub fn root(seed: u64) -> Self {
        SeedTree { key: mix(seed ^ GOLDEN) }
    }

    /// Named substream, e.g. `"tilted-walk"`, `"pairs"`.
    pub fn child(&self, label: &str) -> Self {
        SeedTree { key: mix(self.key ^ fnv1a(label.as_bytes())) }
    }

    /// Indexed substream, e.g. one per replica.
    pub fn index(&self, i: u64) -> Self {
        SeedTree { key: mix(self.key ^ i.wrapping_mul(GOLDEN).wrapping_add(0x6A09_E667_F3BC_C909)) }
    }

    pub fn stream(&self) -> Stream {
        Stream { state: self.key }
    }
}

/// A single SplitMix64 stream.
#[derive(Clone, Debug)]
pub struct Stream {
    state: u64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        SeedTree::root(seed).stream()
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix(self.state)
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        const DEN: f64 = (1u64 << 53) as f64;
        ((self.next_u64() >> 11) as f64) / DEN
    }

    /// Uniform in (0, 1); never returns 0 (safe for logs).
    #[inline]
    pub fn next_open01(&mut self) -> f64 {
        const DEN: f64 = (1u64 << 53) as f64;
        (((self.next_u64() >> 11) as f64) + 0.5) / DEN
    }

    /// Unbiased uniform integer in [0, bound) via Lemire's method.
    #[inline]
    pub fn next_below(&mut self, bound: u64) -> u64 {
        debug_assert!(bound > 0);
        let mut x = self.next_u64();
        let mut m = (x as u128) * (bound as u128);
        let mut lo = m as u64;
        if lo < bound {
            let t = bound.wrapping_neg() % bound;
            while lo < t {
                x = self.next_u64();
                m = (x as u128) * (bound as u128);
                lo = m as u64;
            }
        }
        (m >> 64) as u64
    }

    #[inline]
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Binomial(n, p) by counting Bernoulli trials. Exact; O(n).
    pub fn binomial(&mut self, n: u64, p: f64) -> u64 {
        if p <= 0.0 {
            return 0;
        }
        if p >= 1.0 {
            return n;
        }
        // Threshold comparison on raw 53-bit uniforms keeps the inner loop tight.
        let thresh = (p * (1u64 << 53) as f64) as u64;
        let mut k = 0u64;
        for _ in 0..n {
            if (self.next_u64() >> 11) < thresh {
                k += 1;
            }
        }
        k
    }

    /// Exp(1).
    #[inline]
    pub fn exponential(&mut self) -> f64 {
        -self.next_open01().ln()
    }

    /// Geometric on {0,1,...} with success probability `p`: P(k) = (1-p)^k p.
    #[inline]
    pub fn geometric(&mut self, p: f64) -> u64 {
        debug_assert!(p > 0.0 && p <= 1.0);
        if p >= 1.0 {
            return 0;
        }
        let u = self.next_open01();
        (u.ln() / (1.0 - p).ln()).floor() as u64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a = SeedTree::root(7).child("walk").index(3);
        let b = SeedTree::root(7).child("walk").index(3);
        let c = SeedTree::root(7).child("walk").index(4);
        let d = SeedTree::root(7).child("pairs").index(3);
        let mut sa = a.stream();
        let mut sb = b.stream();
        let mut sc = c.stream();
        let mut sd = d.stream();
        let xa: Vec<u64> = (0..8).map(|_| sa.next_u64()).collect();
        let xb: Vec<u64> = (0..8).map(|_| sb.next_u64()).collect();
        let xc: Vec<u64> = (0..8).map(|_| sc.next_u64()).collect();
        let xd: Vec<u64> = (0..8).map(|_| sd.next_u64()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
        assert_ne!(xa, xd);
    }

    #[test]
    fn next_below_is_unbiased_on_small_range() {
        let mut s = Stream::new(11);
        let mut counts = [0u64; 3];
        let n = 300_000;
        for _ in 0..n {
            counts[s.next_below(3) as usize] += 1;
        }
        for &c in &counts {
            let z = (c as f64 - n as f64 / 3.0) / (n as f64 / 3.0 * (2.0 / 3.0)).sqrt();
            assert!(z.abs() < 4.0, "count {c} too far from uniform");
        }
    }

    #[test]
    fn geometric_mean_matches() {
        let mut s = Stream::new(5);
        let p = 2.0 / 3.0;
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| s.geometric(p) as f64).sum::<f64>() / n as f64;
        let expect = (1.0 - p) / p;
        let sd = ((1.0 - p) / (p * p) / n as f64).sqrt();
        assert!((mean - expect).abs() < 4.0 * sd);
    }

    #[test]
    fn binomial_matches_moments() {
        let mut s = Stream::new(9);
        let (n_tr, p) = (40u64, 0.3);
        let reps = 100_000;
        let mean: f64 = (0..reps).map(|_| s.binomial(n_tr, p) as f64).sum::<f64>() / reps as f64;
        let sd = (n_tr as f64 * p * (1.0 - p) / reps as f64).sqrt();
        assert!((mean - n_tr as f64 * p).abs() < 4.0 * sd);
    }
}
