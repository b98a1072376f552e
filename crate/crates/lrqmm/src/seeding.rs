//! Seed derivation for independent deterministic streams.
//!
//! Every randomized component of an experiment (matrix A, matrix B, the two
//! sketches) draws its seed from one trial seed through `derive_seed`, so a
//! single integer reproduces a whole trial bit for bit.

/// SplitMix64 step; the standard finalizer constants.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic sub-seed for stream `stream` of master seed `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream.wrapping_add(0x6a09e667f3bcc909)))
}
