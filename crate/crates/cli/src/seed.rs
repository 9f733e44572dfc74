//! Counter-based stream derivation: replication `i` of a run with a given
//! master seed always receives the same PCG64 stream, independent of thread
//! schedule and platform.

use rand_pcg::Pcg64;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a reproducible, independent-quality stream for one replication
/// index: four SplitMix64 outputs of `(master, index)` form the 128-bit
/// state and stream-selector of PCG64.
pub fn seed_stream(master_seed: u64, index: u64) -> Pcg64 {
    let a = splitmix64(master_seed ^ splitmix64(index));
    let b = splitmix64(a);
    let c = splitmix64(b);
    let d = splitmix64(c);
    let state = (a as u128) << 64 | b as u128;
    let stream = (c as u128) << 64 | d as u128;
    Pcg64::new(state, stream | 1)
}
