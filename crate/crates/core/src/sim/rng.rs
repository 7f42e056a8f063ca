use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Generator used for every random stream in a run.
pub type SimRng = ChaCha8Rng;

/// Identifier written into run metadata so results can be tied to the
/// generator and the stream-derivation scheme.
pub const RNG_ALGORITHM: &str = "chacha8 (seed = sha256(le64(seed) || label))";

/// Derive an independent deterministic stream from a run seed and a label.
///
/// Each consumer in a run (a talker's wake jitter, a bridge's forwarding
/// latency, a link's loss process) gets its own label, so the draws one
/// consumer makes never shift the sequence another consumer sees.
pub fn rng_fork(seed: u64, stream_label: &str) -> SimRng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(stream_label.as_bytes());
    let digest = h.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}
