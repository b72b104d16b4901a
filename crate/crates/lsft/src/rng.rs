//! Deterministic counter-based random streams.
//!
//! Every draw is a pure function of `(seed, index)`, so streams are splittable
//! and reproducible byte-for-byte from this definition alone:
//!
//! - `raw(seed, i) = mix64(seed + (i + 1) * 0x9E3779B97F4A7C15)` with `mix64`
//!   the SplitMix64 finalizer (xor-shift 30 / multiply 0xBF58476D1CE4E5B9 /
//!   xor-shift 27 / multiply 0x94D049BB133111EB / xor-shift 31), all wrapping.
//! - `uniform(seed, i) = ((raw(seed, i) >> 11) + 0.5) * 2^-53`, open on both
//!   ends of (0, 1).
//! - Standard normals come from Box-Muller on consecutive uniform pairs:
//!   draw `2k` and `2k + 1` give `r = sqrt(-2 ln u1)`, `theta = 2 pi u2`, and
//!   normals `r cos(theta)` (even index) and `r sin(theta)` (odd index).
//! - Substreams are derived as `derive(seed, tag) = mix64(seed ^ mix64(tag))`.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix64(mut z: u64) -> u64 {
    z ^= z >> 30;
    z = z.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z ^= z >> 27;
    z = z.wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^= z >> 31;
    z
}

#[inline]
pub fn raw(seed: u64, index: u64) -> u64 {
    mix64(seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Uniform in the open interval (0, 1).
#[inline]
pub fn uniform(seed: u64, index: u64) -> f64 {
    ((raw(seed, index) >> 11) as f64 + 0.5) * (1.0 / 9_007_199_254_740_992.0)
}

/// The `index`-th standard normal of the stream.
#[inline]
pub fn normal(seed: u64, index: u64) -> f64 {
    let pair = index / 2;
    let u1 = uniform(seed, 2 * pair);
    let u2 = uniform(seed, 2 * pair + 1);
    let r = (-2.0 * u1.ln()).sqrt();
    let theta = 2.0 * std::f64::consts::PI * u2;
    if index % 2 == 0 {
        r * theta.cos()
    } else {
        r * theta.sin()
    }
}

/// Fill a buffer with consecutive normals starting at draw index 0.
pub fn fill_normal(seed: u64, out: &mut [f64]) {
    let pairs = out.len() / 2;
    for p in 0..pairs {
        let u1 = uniform(seed, 2 * p as u64);
        let u2 = uniform(seed, 2 * p as u64 + 1);
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        out[2 * p] = r * theta.cos();
        out[2 * p + 1] = r * theta.sin();
    }
    if out.len() % 2 == 1 {
        let i = out.len() - 1;
        out[i] = normal(seed, i as u64);
    }
}

/// Derive an independent substream seed from a parent seed and a tag.
#[inline]
pub fn derive(seed: u64, tag: u64) -> u64 {
    mix64(seed ^ mix64(tag))
}
