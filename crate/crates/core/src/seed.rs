//! Deterministic seed splitting: every random stream is keyed by the root
//! seed, a scenario name and a tuple of indices.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// First eight bytes (little endian) of
/// `SHA-256(seed_le ‖ scenario ‖ 0x00 ‖ index_le…)`.
pub fn child_seed(seed: u64, scenario: &str, indices: &[u64]) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(scenario.as_bytes());
    h.update([0u8]);
    for i in indices {
        h.update(i.to_le_bytes());
    }
    let digest = h.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

pub fn child_rng(seed: u64, scenario: &str, indices: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(child_seed(seed, scenario, indices))
}
