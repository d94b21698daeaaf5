//! Seed derivation and random streams.
//!
//! Every random quantity in the crate is drawn from a ChaCha stream whose
//! seed is derived from a root seed plus a domain tag and indices. Clients
//! and the server can therefore regenerate masks from seeds alone.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha12Rng;

/// Domain tags keep mask, noise and rotation streams disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Mask = 1,
    Noise = 2,
    Rotation = 3,
    Trial = 4,
    Shuffle = 5,
    Data = 6,
}

/// Keyed hash of `(root, purpose, indices)` truncated to 64 bits.
pub fn derive_seed(root: u64, purpose: Purpose, indices: &[u64]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(b"sparsedp/seed/v1");
    hasher.update(root.to_le_bytes());
    hasher.update([purpose as u8]);
    for idx in indices {
        hasher.update(idx.to_le_bytes());
    }
    let digest = hasher.finalize();
    let mut bytes = [0u8; 8];
    bytes.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(bytes)
}

/// Seed for the mask of `client` in `round`.
pub fn mask_seed(root: u64, round: u64, client: u64) -> u64 {
    derive_seed(root, Purpose::Mask, &[round, client])
}

pub fn rng_from_seed(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}
