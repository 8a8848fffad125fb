//! Counter-based seed derivation. Every randomized stage draws from a
//! stream keyed by (master seed, label, index), so generation order and
//! worker count never change the output.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf29ce484222325u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Stable 64-bit hash of a string (FNV-1a). Also used by the frozen text
/// embedding table.
pub fn stable_hash(s: &str) -> u64 {
    fnv1a(s.as_bytes())
}

/// A ChaCha stream fully determined by `(master, label, index)`.
pub fn derive_rng(master: u64, label: &str, index: u64) -> ChaCha12Rng {
    let mut state = master ^ fnv1a(label.as_bytes()).rotate_left(17) ^ index.wrapping_mul(0xd1342543de82ef95);
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha12Rng::from_seed(seed)
}
