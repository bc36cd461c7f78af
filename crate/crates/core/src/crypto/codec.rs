//! Fixed-point encoding of gradient statistics for ciphertext arithmetic.
//!
//! Additively homomorphic ciphertexts carry integers, so every float is
//! scaled by `2^scale_bits` and rounded before encryption. Addition of
//! encodings then matches addition of the originals up to one rounding
//! step per operand: a sum of `n` encoded values decodes to within
//! `n * 2^-(scale_bits+1)` of the exact sum.

use serde::{Deserialize, Serialize};

/// Default scale: 40 fractional bits.
pub const DEFAULT_SCALE_BITS: u32 = 40;

/// Largest magnitude the codec accepts; inputs are clamped to this.
/// Logistic-loss gradients lie in [-1, 1] and hessians in [0, 0.25], so
/// the clamp only guards against misuse.
pub const MAX_ABS_VALUE: f64 = (1u64 << 20) as f64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FixedPointCodec {
    pub scale_bits: u32,
}

impl Default for FixedPointCodec {
    fn default() -> Self {
        FixedPointCodec { scale_bits: DEFAULT_SCALE_BITS }
    }
}

impl FixedPointCodec {
    pub fn new(scale_bits: u32) -> Self {
        FixedPointCodec { scale_bits }
    }

    fn scale(&self) -> f64 {
        (self.scale_bits as f64).exp2()
    }

    /// Scale, round to nearest, and clamp. NaN encodes as zero.
    pub fn encode(&self, v: f64) -> i128 {
        if v.is_nan() {
            return 0;
        }
        (v.clamp(-MAX_ABS_VALUE, MAX_ABS_VALUE) * self.scale()).round() as i128
    }

    pub fn decode(&self, m: i128) -> f64 {
        m as f64 / self.scale()
    }

    /// Worst-case round-trip error of a single encoded value.
    pub fn unit_error(&self) -> f64 {
        0.5 / self.scale()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn round_trip_error_is_within_half_step() {
        let codec = FixedPointCodec::default();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let v: f64 = rng.gen_range(-4.0..4.0);
            let err = (codec.decode(codec.encode(v)) - v).abs();
            assert!(err <= codec.unit_error(), "v={v} err={err}");
        }
    }

    #[test]
    fn encoded_sums_decode_to_near_exact_sums() {
        let codec = FixedPointCodec::default();
        let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(4);
        let vals: Vec<f64> = (0..1000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let enc_sum: i128 = vals.iter().map(|&v| codec.encode(v)).sum();
        let exact: f64 = vals.iter().sum();
        assert!((codec.decode(enc_sum) - exact).abs() <= 1000.0 * codec.unit_error());
    }

    #[test]
    fn magnitudes_beyond_the_cap_clamp() {
        let codec = FixedPointCodec::default();
        assert_eq!(codec.decode(codec.encode(1e9)), MAX_ABS_VALUE);
        assert_eq!(codec.decode(codec.encode(-1e9)), -MAX_ABS_VALUE);
        assert_eq!(codec.encode(f64::NAN), 0);
    }

    #[test]
    fn zero_and_sign_are_exact() {
        let codec = FixedPointCodec::default();
        assert_eq!(codec.encode(0.0), 0);
        assert_eq!(codec.encode(-1.0), -codec.encode(1.0));
        // 2^-40 multiples are representable exactly at scale 40
        let v = 3.0 + 7.0 / 1024.0;
        assert_eq!(codec.decode(codec.encode(v)), v);
    }
}
