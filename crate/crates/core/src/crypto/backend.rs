//! Pluggable cipher backend for gradient aggregation.
//!
//! Two backends share one interface. `Paillier` is the real thing:
//! fixed-point encode, encrypt, multiply ciphertexts to add. `Mock` keeps
//! the exact f64 in a guarded wrapper tagged with a key id — no codec, no
//! noise — so fast runs remain bit-identical to plaintext training while
//! still exercising every key-handling code path. Both backends refuse to
//! combine values from different key pairs, and only the holder of the
//! decryption half can open a value.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::crypto::codec::FixedPointCodec;
use crate::crypto::paillier::{self, Ciphertext, PaillierPrivateKey, PaillierPublicKey};
use crate::error::{Error, Result};

/// Which backend an experiment runs on.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum BackendChoice {
    #[default]
    Mock,
    Paillier { key_bits: u32 },
}

/// An additively homomorphic value in transit between parties.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EncScalar {
    /// Guarded plaintext used by the mock backend. The value is carried
    /// exactly; the key id still gates decryption and addition.
    Mock { key_id: u64, value: f64 },
    /// Fixed-point Paillier ciphertext.
    Paillier(Ciphertext),
}

impl EncScalar {
    pub fn key_id(&self) -> u64 {
        match self {
            EncScalar::Mock { key_id, .. } => *key_id,
            EncScalar::Paillier(c) => c.key_id,
        }
    }
}

#[derive(Debug, Clone)]
enum EncryptorKind {
    Mock { key_id: u64 },
    Paillier { public: PaillierPublicKey },
}

/// The public half of a backend key pair: encrypt and add, never decrypt.
/// This is what the active party hands to passive parties.
#[derive(Debug, Clone)]
pub struct Encryptor {
    codec: FixedPointCodec,
    kind: EncryptorKind,
}

impl Encryptor {
    pub fn key_id(&self) -> u64 {
        match &self.kind {
            EncryptorKind::Mock { key_id } => *key_id,
            EncryptorKind::Paillier { public } => public.key_id,
        }
    }

    pub fn backend_name(&self) -> &'static str {
        match &self.kind {
            EncryptorKind::Mock { .. } => "mock",
            EncryptorKind::Paillier { .. } => "paillier",
        }
    }

    pub fn encrypt(&self, v: f64, rng: &mut dyn RngCore) -> EncScalar {
        match &self.kind {
            EncryptorKind::Mock { key_id } => EncScalar::Mock { key_id: *key_id, value: v },
            EncryptorKind::Paillier { public } => {
                EncScalar::Paillier(public.encrypt_signed(self.codec.encode(v), rng))
            }
        }
    }

    /// Additive identity, used to seed histogram accumulators.
    pub fn zero(&self, rng: &mut dyn RngCore) -> EncScalar {
        self.encrypt(0.0, rng)
    }

    pub fn add(&self, a: &EncScalar, b: &EncScalar) -> Result<EncScalar> {
        if a.key_id() != self.key_id() || b.key_id() != self.key_id() {
            return Err(Error::CrossKeyOperation);
        }
        match (&self.kind, a, b) {
            (EncryptorKind::Mock { key_id }, EncScalar::Mock { value: x, .. }, EncScalar::Mock { value: y, .. }) => {
                Ok(EncScalar::Mock { key_id: *key_id, value: x + y })
            }
            (EncryptorKind::Paillier { public }, EncScalar::Paillier(x), EncScalar::Paillier(y)) => {
                Ok(EncScalar::Paillier(public.add(x, y)?))
            }
            _ => Err(Error::CrossKeyOperation),
        }
    }
}

#[derive(Debug, Clone)]
enum DecryptorKind {
    Mock { key_id: u64 },
    Paillier { private: PaillierPrivateKey },
}

/// The private half: opens values. Only the active party holds one.
#[derive(Debug, Clone)]
pub struct Decryptor {
    codec: FixedPointCodec,
    kind: DecryptorKind,
}

impl Decryptor {
    pub fn key_id(&self) -> u64 {
        match &self.kind {
            DecryptorKind::Mock { key_id } => *key_id,
            DecryptorKind::Paillier { private } => private.public.key_id,
        }
    }

    pub fn decrypt(&self, e: &EncScalar) -> Result<f64> {
        if e.key_id() != self.key_id() {
            return Err(Error::CrossKeyOperation);
        }
        match (&self.kind, e) {
            (DecryptorKind::Mock { .. }, EncScalar::Mock { value, .. }) => Ok(*value),
            (DecryptorKind::Paillier { private }, EncScalar::Paillier(c)) => {
                Ok(self.codec.decode(private.decrypt_signed(c)?))
            }
            _ => Err(Error::CrossKeyOperation),
        }
    }
}

/// Generate a key pair for the chosen backend. The mock key id is drawn
/// from the RNG so two mock federations can never mix values either.
pub fn generate_keys(
    choice: BackendChoice,
    codec: FixedPointCodec,
    rng: &mut dyn RngCore,
) -> Result<(Encryptor, Decryptor)> {
    match choice {
        BackendChoice::Mock => {
            let key_id = rng.next_u64();
            Ok((
                Encryptor { codec, kind: EncryptorKind::Mock { key_id } },
                Decryptor { codec, kind: DecryptorKind::Mock { key_id } },
            ))
        }
        BackendChoice::Paillier { key_bits } => {
            let (public, private) = paillier::generate_keypair(key_bits, rng)?;
            Ok((
                Encryptor { codec, kind: EncryptorKind::Paillier { public } },
                Decryptor { codec, kind: DecryptorKind::Paillier { private } },
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn mock_round_trip_is_bit_exact() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let (enc, dec) =
            generate_keys(BackendChoice::Mock, FixedPointCodec::default(), &mut rng).unwrap();
        for v in [0.0, -0.25, 1.0 / 3.0, 1e-300, f64::MAX] {
            let opened = dec.decrypt(&enc.encrypt(v, &mut rng)).unwrap();
            assert_eq!(opened.to_bits(), v.to_bits());
        }
    }

    #[test]
    fn mock_sum_equals_plain_sum_exactly() {
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let (enc, dec) =
            generate_keys(BackendChoice::Mock, FixedPointCodec::default(), &mut rng).unwrap();
        let vals: Vec<f64> = (0..257).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let mut acc = enc.zero(&mut rng);
        let mut plain = 0.0f64;
        for &v in &vals {
            acc = enc.add(&acc, &enc.encrypt(v, &mut rng)).unwrap();
            plain += v;
        }
        assert_eq!(dec.decrypt(&acc).unwrap().to_bits(), plain.to_bits());
    }

    #[test]
    fn paillier_sum_stays_within_codec_error() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let codec = FixedPointCodec::default();
        let (enc, dec) =
            generate_keys(BackendChoice::Paillier { key_bits: 512 }, codec, &mut rng).unwrap();
        let vals: Vec<f64> = (0..40).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let mut acc = enc.zero(&mut rng);
        let mut exact = 0.0f64;
        for &v in &vals {
            acc = enc.add(&acc, &enc.encrypt(v, &mut rng)).unwrap();
            exact += v;
        }
        let opened = dec.decrypt(&acc).unwrap();
        let bound = (vals.len() + 1) as f64 * codec.unit_error();
        assert!((opened - exact).abs() <= bound, "err {}", (opened - exact).abs());
    }

    #[test]
    fn separate_federations_cannot_mix_values() {
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        let (enc1, dec1) =
            generate_keys(BackendChoice::Mock, FixedPointCodec::default(), &mut rng).unwrap();
        let (enc2, _) =
            generate_keys(BackendChoice::Mock, FixedPointCodec::default(), &mut rng).unwrap();
        let a = enc1.encrypt(1.0, &mut rng);
        let b = enc2.encrypt(2.0, &mut rng);
        assert!(matches!(enc1.add(&a, &b), Err(Error::CrossKeyOperation)));
        assert!(matches!(dec1.decrypt(&b), Err(Error::CrossKeyOperation)));
    }

    #[test]
    fn backend_kinds_cannot_mix_either() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let codec = FixedPointCodec::default();
        let (enc_m, _) = generate_keys(BackendChoice::Mock, codec, &mut rng).unwrap();
        let (enc_p, dec_p) =
            generate_keys(BackendChoice::Paillier { key_bits: 512 }, codec, &mut rng).unwrap();
        let a = enc_m.encrypt(1.0, &mut rng);
        let b = enc_p.encrypt(2.0, &mut rng);
        assert!(enc_p.add(&a, &b).is_err());
        assert!(dec_p.decrypt(&a).is_err());
    }
}
