//! Deterministic seed derivation.

use sha2::{Digest, Sha256};

/// Mixes a base seed with a label into an independent 64-bit seed.
pub fn derive_seed(base: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update(label.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}
