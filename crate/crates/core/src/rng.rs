//! Seeded pseudo-random numbers with a fully specified recurrence.
//!
//! The generator is xoshiro256** seeded through SplitMix64, so any port that
//! follows the two recurrences below reproduces the exact same stream:
//!
//! ```text
//! splitmix64(s):  s += 0x9E3779B97F4A7C15
//!                 z = s
//!                 z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
//!                 z = (z ^ (z >> 27)) * 0x94D049BB133111EB
//!                 return z ^ (z >> 31)
//!
//! state[0..4] = four successive splitmix64 outputs from the seed
//!
//! next():         result = rotl(state[1] * 5, 7) * 9
//!                 t = state[1] << 17
//!                 state[2] ^= state[0]; state[3] ^= state[1]
//!                 state[1] ^= state[2]; state[0] ^= state[3]
//!                 state[2] ^= t;        state[3] = rotl(state[3], 45)
//! ```
//!
//! Uniform reals take the top 53 bits: `(next() >> 11) * 2^-53`, giving `[0, 1)`.
//! Child generators for parallel or per-item work use
//! `seed = splitmix64(parent_seed ^ splitmix64(index))`.

use crate::error::{Error, Result};

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a seed with an index into a new, decorrelated seed.
pub fn derive_seed(parent: u64, index: u64) -> u64 {
    let mut s = index;
    let mixed = splitmix64(&mut s);
    let mut p = parent ^ mixed;
    splitmix64(&mut p)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rng {
    seed: u64,
    state: [u64; 4],
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        let mut sm = seed;
        let state = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        Rng { seed, state }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent generator for the `index`-th child of this generator's seed.
    pub fn child(&self, index: u64) -> Rng {
        Rng::new(derive_seed(self.seed, index))
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.state;
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

    /// Uniform draw in `[0, 1)`.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64> {
        if !(lo < hi) {
            return Err(Error::contract(format!(
                "uniform bounds must satisfy lo < hi, got [{lo}, {hi})"
            )));
        }
        let x = lo + (hi - lo) * self.next_f64();
        // rounding can land exactly on hi for very wide ranges
        Ok(if x < hi { x } else { lo })
    }

    /// Uniform integer in `0..n` (n > 0), by rejection to avoid modulo bias.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let v = self.next_u64();
            if v < zone {
                return v % n;
            }
        }
    }

    /// Standard normal draw (Box-Muller, one value per call).
    pub fn normal(&mut self) -> f64 {
        // 1 - u keeps the log argument in (0, 1]
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
    }

    pub fn gaussian(&mut self, mean: f64, std: f64) -> f64 {
        mean + std * self.normal()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
