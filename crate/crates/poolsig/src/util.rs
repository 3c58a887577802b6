//! Seed derivation and formatting helpers.
//!
//! All randomized components of the crate derive their RNG streams from a
//! single master seed through [`derive_seed`], keyed by stable 64-bit values
//! (hashes of topic ids, method labels, repetition indices). Streams derived
//! this way do not depend on scheduling order, worker counts, or the
//! in-memory order of collections, which is what makes experiment outputs
//! byte-identical across runs.

/// FNV-1a 64-bit hash. Stable across platforms and Rust versions, unlike
/// `DefaultHasher`.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// SplitMix64 finalizer: bijective 64-bit mixing.
pub fn mix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Derives a child seed from a base seed and a sequence of key parts.
///
/// The derivation is order-sensitive in `parts` and collision-resistant
/// enough for stream separation (not cryptographic).
pub fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    let mut h = mix64(base);
    for &p in parts {
        h = mix64(h ^ mix64(p));
    }
    h
}

/// Renders a value with 10 significant digits in plain decimal notation,
/// the precision used by all CSV exports.
///
/// The decimal exponent is read back from the exact scientific rendering
/// rather than from `log10`, so the output is identical on every platform.
pub fn format_score(v: f64) -> String {
    if v == 0.0 || !v.is_finite() {
        return format!("{v:.9}");
    }
    let sci = format!("{:e}", v.abs());
    let exp: i32 = sci.split('e').nth(1).expect("scientific form").parse().expect("exponent");
    let decimals = (9 - exp).max(0) as usize;
    format!("{v:.decimals$}")
}
