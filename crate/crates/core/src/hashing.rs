//! Stable, platform-independent hashes used for fingerprints and layout
//! identity. Never use `std::hash` for anything persisted.

use sha2::{Digest, Sha256};

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Incremental structural hasher with explicit, length-prefixed field
/// encoding so that distinct field sequences cannot collide by concatenation.
#[derive(Default, Clone)]
pub struct StableHasher {
    inner: Sha256,
}

impl StableHasher {
    pub fn new(domain: &str) -> Self {
        let mut h = Self::default();
        h.str(domain);
        h
    }

    pub fn u8(&mut self, v: u8) -> &mut Self {
        self.inner.update([v]);
        self
    }

    pub fn u64(&mut self, v: u64) -> &mut Self {
        self.inner.update(v.to_le_bytes());
        self
    }

    pub fn i64(&mut self, v: i64) -> &mut Self {
        self.inner.update(v.to_le_bytes());
        self
    }

    pub fn str(&mut self, s: &str) -> &mut Self {
        self.u64(s.len() as u64);
        self.inner.update(s.as_bytes());
        self
    }

    pub fn finish(&self) -> u64 {
        let digest = self.inner.clone().finalize();
        let mut first = [0u8; 8];
        first.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(first)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_values() {
        assert_eq!(fnv1a64(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a64(b"a"), 0xaf63_dc4c_8601_ec8c);
    }

    #[test]
    fn length_prefix_separates_fields() {
        let a = StableHasher::new("t").str("ab").str("c").finish();
        let b = StableHasher::new("t").str("a").str("bc").finish();
        assert_ne!(a, b);
    }
}
