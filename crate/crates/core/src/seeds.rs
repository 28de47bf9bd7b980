//! Deterministic seed derivation.
//!
//! Every random draw in the library is seeded through these helpers so a
//! single master seed reproduces an entire experiment bit for bit.

/// SplitMix64 finalizer. One-to-one on `u64`, good avalanche behavior.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mix a tagged component into a seed.
pub fn mix(seed: u64, tag: u64) -> u64 {
    splitmix64(seed ^ splitmix64(tag))
}

/// Seed of one sweep cell, a pure function of (master seed, size index,
/// noise index). Recorded in the sweep reports.
pub fn cell_seed(master: u64, size_idx: usize, noise_idx: usize) -> u64 {
    let s = mix(master, 0xce11);
    let s = mix(s, size_idx as u64);
    mix(s, (noise_idx as u64) << 32)
}

/// Noise seed for one noise level; independent of reservoir size so every
/// cell in a sweep column sees the identical noisy measurement series.
pub fn noise_seed(master: u64, noise_idx: usize) -> u64 {
    mix(mix(master, 0x0153), noise_idx as u64)
}
