//! Seedable, platform-independent random streams.
//!
//! All stochastic stages (bootstrap resampling, Dirichlet weight draws, tau
//! calibration) draw from ChaCha8 generators. Parallel work derives one
//! substream per task from `(seed, label, index)` via SHA-256, so results do
//! not depend on scheduling or thread count. Only internal determinism is
//! guaranteed; the streams are not compatible with any other tool-chain.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// A single sequential stream for the given seed.
pub fn stream(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent substream for one parallel task.
///
/// The stream depends only on `(seed, label, index)`, never on execution
/// order, so a computation split over any number of threads reproduces the
/// single-threaded result bit for bit.
pub fn substream(seed: u64, label: &str, index: u64) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update([0u8]);
    hasher.update(label.as_bytes());
    hasher.update([0u8]);
    hasher.update(index.to_le_bytes());
    let digest = hasher.finalize();
    let mut key = [0u8; 32];
    key.copy_from_slice(&digest);
    ChaCha8Rng::from_seed(key)
}
