//! Deterministic seed derivation.
//!
//! Every random stream in a study descends from one 64-bit base seed. A child
//! seed is a hash of its parent and a label, so any sub-stream (a trial, a
//! cloud, a corruption draw) can be regenerated on its own without replaying
//! the others. The hash is spelled out here rather than borrowed from
//! `std::hash`, whose output is not stable across Rust releases.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for every stochastic operation in the workspace.
pub type Rng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

/// Child seed for `label` under `parent`.
pub fn derive(parent: u64, label: &str) -> u64 {
    splitmix64(splitmix64(parent) ^ fnv1a(label.as_bytes()))
}

/// Child seed for the `index`-th member of a labelled family.
pub fn derive_indexed(parent: u64, label: &str, index: u64) -> u64 {
    splitmix64(derive(parent, label) ^ splitmix64(index.wrapping_add(0x632b_e59b_d9b4_e019)))
}

pub fn rng(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}

/// Generator for a labelled child of `parent`.
pub fn child_rng(parent: u64, label: &str) -> Rng {
    rng(derive(parent, label))
}
