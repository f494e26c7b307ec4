//! Deterministic random streams.
//!
//! Every randomized decision (augmentation draws, split assignment) comes
//! from a [`DetRng`]: a ChaCha20 stream (RFC 8439 block function, 20
//! rounds, stream id 0) whose 32-byte key is
//!
//! ```text
//! SHA-256( "spotcheck/v1" 0x00
//!          || domain 0x00
//!          || global_seed as u64 little-endian
//!          || for each part: len(part) as u64 little-endian || part )
//! ```
//!
//! Streams are therefore independent of scheduling order and reproducible
//! from any language with SHA-256 and ChaCha20. Derived values:
//!
//! * `next_u64`: two consecutive 32-bit words, low word first.
//! * `uniform`: `(next_u64 >> 11) * 2^-53`, in `[0, 1)`.
//! * `below(n)`: rejection sampling on `next_u64` against the largest
//!   multiple of `n`, then `% n`.
//! * `normal`: Box–Muller from two uniforms `u1, u2`:
//!   `sqrt(-2 ln(1 - u1)) * cos(2π u2)`.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use sha2::{Digest, Sha256};

const KEY_PREFIX: &[u8] = b"spotcheck/v1\0";

/// Derives the 32-byte stream key for `(domain, global_seed, parts)`.
pub fn derive_key(domain: &str, global_seed: u64, parts: &[&[u8]]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(KEY_PREFIX);
    h.update(domain.as_bytes());
    h.update([0u8]);
    h.update(global_seed.to_le_bytes());
    for part in parts {
        h.update((part.len() as u64).to_le_bytes());
        h.update(part);
    }
    h.finalize().into()
}

#[derive(Debug, Clone)]
pub struct DetRng {
    inner: ChaCha20Rng,
}

impl DetRng {
    pub fn derive(domain: &str, global_seed: u64, parts: &[&[u8]]) -> Self {
        Self::from_key(derive_key(domain, global_seed, parts))
    }

    pub fn from_key(key: [u8; 32]) -> Self {
        Self {
            inner: ChaCha20Rng::from_seed(key),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// Uniform integer in `0..n`. `n` must be non-zero.
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

    pub fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Fisher–Yates, swapping each position `i` (from the end) with
    /// `below(i + 1)`.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}
