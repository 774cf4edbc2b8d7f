//! Deterministic fan-out of one user seed into independent stream seeds.
//!
//! `derive_seed(base, stream)` is two rounds of SplitMix64 over
//! `base ^ (stream * GOLDEN)`. Named streams hash their label with FNV-1a
//! first. Both are fixed forever so recorded seeds stay reproducible.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive_seed(base: u64, stream: u64) -> u64 {
    splitmix64(splitmix64(base ^ stream.wrapping_mul(GOLDEN)))
}

pub fn named_seed(base: u64, name: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in name.bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    derive_seed(base, h)
}
