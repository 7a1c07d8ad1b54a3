//! Counter-based random streams: every (seed, purpose, replicate) triple maps
//! to its own ChaCha8 stream, so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type Stream = ChaCha8Rng;

/// Stream for one replicate. The key is derived from the master seed and the
/// purpose tag; the replicate id selects the ChaCha stream under that key.
pub fn rng_stream(seed: u64, purpose: &str, replicate: u64) -> Stream {
    let mut h = Sha256::new();
    h.update(b"kacou-stream-v1");
    h.update(seed.to_le_bytes());
    h.update(purpose.as_bytes());
    let key: [u8; 32] = h.finalize().into();
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(replicate);
    rng
}
