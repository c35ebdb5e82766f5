//! Derivation of independent RNG streams from one experiment seed.
//!
//! Every randomized component (weight init, batch shuffling, mobility,
//! partitioning) draws from its own ChaCha stream, seeded by mixing the
//! global seed with a stream tag and indices. This keeps components
//! decoupled: adding draws to one stream never perturbs another.

/// Stream tag: per-device weight initialization.
pub const STREAM_INIT: u64 = 0x01;
/// Stream tag: per-device per-epoch batch shuffling.
pub const STREAM_TRAIN: u64 = 0x02;
/// Stream tag: Non-IID partition assignment.
pub const STREAM_PARTITION: u64 = 0x03;
/// Stream tag: train/validation split.
pub const STREAM_SPLIT: u64 = 0x04;
/// Stream tag: per-node waypoint mobility.
pub const STREAM_MOBILITY: u64 = 0x05;
/// Stream tag: dirty-case sample swapping.
pub const STREAM_DIRTY: u64 = 0x06;
/// Stream tag: synthetic blob generation.
pub const STREAM_BLOBS: u64 = 0x07;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a base seed with a sequence of stream tags / indices into a
/// well-scrambled 64-bit seed. Pure function; stable across platforms.
pub fn derive(base: u64, parts: &[u64]) -> u64 {
    let mut s = splitmix64(base);
    for &p in parts {
        s = splitmix64(s ^ p);
    }
    s
}
