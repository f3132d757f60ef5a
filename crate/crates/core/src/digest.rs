//! Deterministic 64-bit digests.
//!
//! Identifiers are simulated content digests: a run-scoped counter pushed
//! through a bijective mixer, so distinct counters can never collide. The same
//! mixer provides tie-breaking hashes for reality selection.

/// SplitMix64 finaliser. Bijective on `u64`.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Digest of the concatenation of two 64-bit words.
#[inline]
pub fn digest_pair(a: u64, b: u64) -> u64 {
    mix64(mix64(a).rotate_left(23) ^ b.wrapping_add(0x9e37_79b9_7f4a_7c15))
}

/// Fixed-point representation of a fraction in `[0, 1]`, used so that every
/// party hashing the same beacon value hashes the same bits.
#[inline]
pub fn quantize_fraction(x: f64) -> u64 {
    (x.clamp(0.0, 1.0) * (1u64 << 52) as f64).round() as u64
}

/// Run-scoped identifier generator.
#[derive(Debug, Clone)]
pub struct IdGen {
    salt: u64,
    next: u64,
}

impl IdGen {
    pub fn new(salt: u64) -> Self {
        Self { salt, next: 0 }
    }

    /// Returns a fresh digest. Digests from one generator never repeat.
    pub fn next_digest(&mut self) -> u64 {
        let c = self.next;
        self.next += 1;
        mix64(c ^ self.salt)
    }

    pub fn issued(&self) -> u64 {
        self.next
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn generator_never_collides() {
        let mut g = IdGen::new(7);
        let ids: HashSet<u64> = (0..100_000).map(|_| g.next_digest()).collect();
        assert_eq!(ids.len(), 100_000);
    }

    #[test]
    fn quantization_is_stable() {
        assert_eq!(quantize_fraction(0.5), 1u64 << 51);
        assert_eq!(quantize_fraction(0.6), quantize_fraction(0.6));
        assert_ne!(digest_pair(1, quantize_fraction(0.6)), digest_pair(1, quantize_fraction(0.61)));
    }
}
