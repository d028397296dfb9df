//! Stable seed derivation.
//!
//! `std::hash` hashers are not stable across releases, so per-unit seeds
//! (per dialogue, per turn, per paraphrase index) are derived with FNV-1a
//! followed by a splitmix64 finalizer. Parallel and serial runs call this with
//! the same keys and therefore see the same RNG streams.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut state: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        state ^= u64::from(b);
        state = state.wrapping_mul(FNV_PRIME);
    }
    state
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Derives a child seed from a base seed and a list of string keys.
pub fn derive_seed(base: u64, keys: &[&str]) -> u64 {
    let mut state = fnv1a(FNV_OFFSET, &base.to_le_bytes());
    for key in keys {
        state = fnv1a(state, key.as_bytes());
        state = fnv1a(state, &[0xff]); // key separator
    }
    splitmix64(state)
}
