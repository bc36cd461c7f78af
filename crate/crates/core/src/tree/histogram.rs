//! Per-feature gradient histograms.
//!
//! A histogram accumulates the gradient and hessian sums of every bin of
//! one feature over a node's rows. The plaintext form is what the label
//! holder computes locally; the encrypted form is what a passive party
//! accumulates from ciphertext gradients it cannot read. Bin counts are
//! plain integers in both forms — they carry no label information beyond
//! the node sizes the protocol already reveals.

use rand::RngCore;

use crate::crypto::{Decryptor, EncScalar, Encryptor};
use crate::dataset::{BinnedColumn, FeatureCode};
use crate::error::{Error, Result};
use crate::tree::grad::GradPair;

/// Plaintext histogram of one feature.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureHistogram {
    pub feature: FeatureCode,
    pub g: Vec<f64>,
    pub h: Vec<f64>,
    pub counts: Vec<usize>,
}

impl FeatureHistogram {
    pub fn n_bins(&self) -> usize {
        self.g.len()
    }
}

/// Ciphertext histogram of one feature; counts stay plain.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EncFeatureHistogram {
    pub feature: FeatureCode,
    pub g: Vec<EncScalar>,
    pub h: Vec<EncScalar>,
    pub counts: Vec<usize>,
}

fn check_rows(rows: &[usize], n_rows: usize, grads_len: usize) -> Result<()> {
    if rows.is_empty() {
        return Err(Error::EmptyRows);
    }
    if rows.len() != grads_len {
        return Err(Error::InvalidConfig(format!(
            "row list ({}) and gradient list ({grads_len}) differ in length",
            rows.len()
        )));
    }
    if let Some(&bad) = rows.iter().find(|&&r| r >= n_rows) {
        return Err(Error::RowOutOfRange { row: bad, rows: n_rows });
    }
    Ok(())
}

/// Accumulate plaintext gradients into bins. `grads[i]` belongs to
/// `rows[i]`; accumulation runs in row order starting from zero.
pub fn build_histogram(
    column: &BinnedColumn,
    rows: &[usize],
    grads: &[GradPair],
) -> Result<FeatureHistogram> {
    check_rows(rows, column.bins.len(), grads.len())?;
    let n_bins = column.n_bins as usize;
    let mut g = vec![0.0f64; n_bins];
    let mut h = vec![0.0f64; n_bins];
    let mut counts = vec![0usize; n_bins];
    for (&row, gp) in rows.iter().zip(grads) {
        let b = column.bins[row] as usize;
        g[b] += gp.g;
        h[b] += gp.h;
        counts[b] += 1;
    }
    Ok(FeatureHistogram { feature: column.code, g, h, counts })
}

/// Accumulate ciphertext gradients into bins, same order as the plaintext
/// builder. The encryptor only adds; nothing is opened here.
pub fn build_enc_histogram(
    column: &BinnedColumn,
    rows: &[usize],
    enc_grads: &[(EncScalar, EncScalar)],
    encryptor: &Encryptor,
    rng: &mut dyn RngCore,
) -> Result<EncFeatureHistogram> {
    check_rows(rows, column.bins.len(), enc_grads.len())?;
    let n_bins = column.n_bins as usize;
    let mut g: Vec<EncScalar> = (0..n_bins).map(|_| encryptor.zero(rng)).collect();
    let mut h: Vec<EncScalar> = (0..n_bins).map(|_| encryptor.zero(rng)).collect();
    let mut counts = vec![0usize; n_bins];
    for (&row, (eg, eh)) in rows.iter().zip(enc_grads) {
        let b = column.bins[row] as usize;
        g[b] = encryptor.add(&g[b], eg)?;
        h[b] = encryptor.add(&h[b], eh)?;
        counts[b] += 1;
    }
    Ok(EncFeatureHistogram { feature: column.code, g, h, counts })
}

/// Open an encrypted histogram with the private key.
pub fn decrypt_histogram(
    enc: &EncFeatureHistogram,
    decryptor: &Decryptor,
) -> Result<FeatureHistogram> {
    Ok(FeatureHistogram {
        feature: enc.feature,
        g: enc.g.iter().map(|e| decryptor.decrypt(e)).collect::<Result<_>>()?,
        h: enc.h.iter().map(|e| decryptor.decrypt(e)).collect::<Result<_>>()?,
        counts: enc.counts.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{generate_keys, BackendChoice, FixedPointCodec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn toy_column() -> BinnedColumn {
        BinnedColumn { code: FeatureCode(3), n_bins: 4, bins: vec![0, 1, 0, 2, 3, 1] }
    }

    fn toy_grads() -> Vec<GradPair> {
        vec![
            GradPair { g: 0.5, h: 0.25 },
            GradPair { g: -0.5, h: 0.25 },
            GradPair { g: 0.1, h: 0.09 },
            GradPair { g: -0.2, h: 0.16 },
            GradPair { g: 0.3, h: 0.21 },
            GradPair { g: -0.4, h: 0.24 },
        ]
    }

    #[test]
    fn bins_accumulate_expected_sums() {
        let hist = build_histogram(&toy_column(), &[0, 1, 2, 3, 4, 5], &toy_grads()).unwrap();
        assert_eq!(hist.counts, vec![2, 2, 1, 1]);
        assert!((hist.g[0] - 0.6).abs() < 1e-15); // 0.5 + 0.1
        assert!((hist.g[1] - (-0.9)).abs() < 1e-15); // -0.5 - 0.4
        assert_eq!(hist.g[2], -0.2);
        assert_eq!(hist.g[3], 0.3);
        assert!((hist.h[0] - 0.34).abs() < 1e-15);
        assert_eq!(hist.counts.iter().sum::<usize>(), 6);
    }

    #[test]
    fn row_subsets_only_touch_their_bins() {
        let grads = toy_grads();
        let hist = build_histogram(&toy_column(), &[1, 4], &[grads[1], grads[4]]).unwrap();
        assert_eq!(hist.counts, vec![0, 1, 0, 1]);
        assert_eq!(hist.g[1], -0.5);
        assert_eq!(hist.g[3], 0.3);
    }

    #[test]
    fn mismatched_lengths_and_bad_rows_error() {
        let grads = toy_grads();
        assert!(build_histogram(&toy_column(), &[0, 1], &grads[..1]).is_err());
        assert!(matches!(
            build_histogram(&toy_column(), &[99], &grads[..1]),
            Err(Error::RowOutOfRange { row: 99, .. })
        ));
        assert!(matches!(build_histogram(&toy_column(), &[], &[]), Err(Error::EmptyRows)));
    }

    #[test]
    fn mock_encrypted_histogram_is_bit_identical_to_plain() {
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        let (enc, dec) =
            generate_keys(BackendChoice::Mock, FixedPointCodec::default(), &mut rng).unwrap();
        let grads = toy_grads();
        let rows: Vec<usize> = (0..6).collect();
        let enc_grads: Vec<_> = grads
            .iter()
            .map(|gp| (enc.encrypt(gp.g, &mut rng), enc.encrypt(gp.h, &mut rng)))
            .collect();
        let eh = build_enc_histogram(&toy_column(), &rows, &enc_grads, &enc, &mut rng).unwrap();
        let opened = decrypt_histogram(&eh, &dec).unwrap();
        let plain = build_histogram(&toy_column(), &rows, &grads).unwrap();
        assert_eq!(opened.counts, plain.counts);
        for b in 0..4 {
            assert_eq!(opened.g[b].to_bits(), plain.g[b].to_bits());
            assert_eq!(opened.h[b].to_bits(), plain.h[b].to_bits());
        }
    }

    #[test]
    fn paillier_histogram_agrees_within_codec_error() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let codec = FixedPointCodec::default();
        let (enc, dec) =
            generate_keys(BackendChoice::Paillier { key_bits: 512 }, codec, &mut rng).unwrap();
        let n = 60usize;
        let column = BinnedColumn {
            code: FeatureCode(0),
            n_bins: 5,
            bins: (0..n).map(|i| (i % 5) as u16).collect(),
        };
        let grads: Vec<GradPair> = (0..n)
            .map(|_| GradPair { g: rng.gen_range(-1.0..1.0), h: rng.gen_range(0.0..0.25) })
            .collect();
        let rows: Vec<usize> = (0..n).collect();
        let enc_grads: Vec<_> = grads
            .iter()
            .map(|gp| (enc.encrypt(gp.g, &mut rng), enc.encrypt(gp.h, &mut rng)))
            .collect();
        let eh = build_enc_histogram(&column, &rows, &enc_grads, &enc, &mut rng).unwrap();
        let opened = decrypt_histogram(&eh, &dec).unwrap();
        let plain = build_histogram(&column, &rows, &grads).unwrap();
        for b in 0..5 {
            // one rounding step per addend plus the zero seed
            let bound = (plain.counts[b] + 1) as f64 * codec.unit_error();
            assert!((opened.g[b] - plain.g[b]).abs() <= bound);
            assert!((opened.h[b] - plain.h[b]).abs() <= bound);
        }
    }
}
