//! Stateless seed derivation: every replicate of every stage gets its own
//! generator stream, independent of scheduling.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over the UTF-8 bytes of `tag`.
pub fn tag_hash(tag: &str) -> u64 {
    tag.bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

/// The splitmix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for replicate `replicate` of stage `tag` under master seed `master`.
pub fn derive_seed(master: u64, tag: &str, replicate: u64) -> u64 {
    const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
    let a = mix64(master.wrapping_add(GOLDEN));
    let b = mix64(a ^ tag_hash(tag));
    mix64(b ^ replicate.wrapping_mul(GOLDEN).wrapping_add(GOLDEN))
}
