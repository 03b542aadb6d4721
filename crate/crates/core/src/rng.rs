//! Seed-derived random streams.
//!
//! Every unit of parallel work (a block of Monte-Carlo samples, one learning
//! trial) draws from its own ChaCha8 stream: the 64-bit experiment seed
//! selects the key and the unit's index selects the stream. Results never
//! depend on how units are spread across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Stream `index` under `seed`.
pub fn substream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Seed for a named sub-experiment, e.g. one `(kind, N)` cell, so cells
/// sharing an experiment seed still draw unrelated streams.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(label.as_bytes());
    let out = h.finalize();
    u64::from_le_bytes(out[..8].try_into().expect("8 bytes"))
}
