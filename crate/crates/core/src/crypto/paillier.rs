//! Paillier additive homomorphic encryption.
//!
//! Textbook scheme with the usual `g = n + 1` simplification: encryption
//! is `(1 + m*n) * r^n mod n^2`, so no modpow in `g` is needed, and the
//! product of two ciphertexts decrypts to the sum of their plaintexts.
//! Key sizes are restricted to 512 (test only), 1024 and 2048 bits.
//!
//! Signed plaintexts ride on the usual half-range convention: residues
//! above `n/2` decode as negative.

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SUPPORTED_KEY_BITS: [u32; 3] = [512, 1024, 2048];

const MILLER_RABIN_ROUNDS: u32 = 40;

const SMALL_PRIMES: [u32; 25] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89,
    97,
];

/// The public half of a key: enough to encrypt and to add ciphertexts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaillierPublicKey {
    pub n: BigUint,
    pub n_squared: BigUint,
    pub key_bits: u32,
    /// Fingerprint of `n`; every ciphertext carries it so that values
    /// from different key pairs can never be combined silently.
    pub key_id: u64,
}

/// The private half; holds the Carmichael exponent and its inverse.
#[derive(Debug, Clone)]
pub struct PaillierPrivateKey {
    pub public: PaillierPublicKey,
    lambda: BigUint,
    mu: BigUint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ciphertext {
    pub value: BigUint,
    pub key_id: u64,
}

fn fingerprint(n: &BigUint) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in n.to_bytes_le() {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Uniform integer with exactly `bits` bits (top bit set).
fn random_bits(bits: u64, rng: &mut dyn RngCore) -> BigUint {
    assert!(bits >= 2);
    let n_bytes = bits.div_ceil(8) as usize;
    let mut buf = vec![0u8; n_bytes];
    rng.fill_bytes(&mut buf);
    let mut x = BigUint::from_bytes_le(&buf);
    // trim to width, then pin the top bit
    x &= (BigUint::one() << bits) - BigUint::one();
    x |= BigUint::one() << (bits - 1);
    x
}

/// Uniform integer in `[0, bound)` by rejection.
fn random_below(bound: &BigUint, rng: &mut dyn RngCore) -> BigUint {
    let bits = bound.bits();
    let n_bytes = bits.div_ceil(8) as usize;
    let mask = (BigUint::one() << bits) - BigUint::one();
    loop {
        let mut buf = vec![0u8; n_bytes];
        rng.fill_bytes(&mut buf);
        let x = BigUint::from_bytes_le(&buf) & &mask;
        if &x < bound {
            return x;
        }
    }
}

/// Miller-Rabin with random bases; composite detection is certain, the
/// prime verdict is wrong with probability at most 4^-rounds.
fn is_probable_prime(n: &BigUint, rounds: u32, rng: &mut dyn RngCore) -> bool {
    for p in SMALL_PRIMES {
        let p = BigUint::from(p);
        if n == &p {
            return true;
        }
        if (n % &p).is_zero() {
            return false;
        }
    }

    let one = BigUint::one();
    let two = &one + &one;
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;

    'witness: for _ in 0..rounds {
        // base in [2, n-2]
        let a = random_below(&(n - &two - &one), rng) + &two;
        let mut x = a.modpow(&d, n);
        if x == one || x == n_minus_1 {
            continue;
        }
        for _ in 1..s {
            x = x.modpow(&two, n);
            if x == n_minus_1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

fn generate_prime(bits: u64, rng: &mut dyn RngCore) -> BigUint {
    loop {
        let mut candidate = random_bits(bits, rng);
        // odd, and second-highest bit set so p*q reaches full width
        candidate |= BigUint::one();
        candidate |= BigUint::one() << (bits - 2);
        if is_probable_prime(&candidate, MILLER_RABIN_ROUNDS, rng) {
            return candidate;
        }
    }
}

fn modinv(a: &BigUint, m: &BigUint) -> Option<BigUint> {
    let a = BigInt::from_biguint(Sign::Plus, a.clone());
    let m_int = BigInt::from_biguint(Sign::Plus, m.clone());
    let ext = a.extended_gcd(&m_int);
    if !ext.gcd.is_one() {
        return None;
    }
    let x = ext.x.mod_floor(&m_int);
    Some(x.to_biguint().expect("mod_floor of positive modulus is non-negative"))
}

/// Generate a fresh key pair. `key_bits` is the modulus width and must be
/// one of [`SUPPORTED_KEY_BITS`].
pub fn generate_keypair(
    key_bits: u32,
    rng: &mut dyn RngCore,
) -> Result<(PaillierPublicKey, PaillierPrivateKey)> {
    if !SUPPORTED_KEY_BITS.contains(&key_bits) {
        return Err(Error::UnsupportedKeyBits(key_bits));
    }
    let half = u64::from(key_bits) / 2;
    let (n, lambda) = loop {
        let p = generate_prime(half, rng);
        let q = generate_prime(half, rng);
        if p == q {
            continue;
        }
        let n = &p * &q;
        if n.bits() != u64::from(key_bits) {
            continue;
        }
        let p1 = &p - BigUint::one();
        let q1 = &q - BigUint::one();
        break (n, p1.lcm(&q1));
    };
    let mu = modinv(&lambda, &n).expect("lambda is coprime to n by construction");
    let public = PaillierPublicKey {
        n_squared: &n * &n,
        key_id: fingerprint(&n),
        key_bits,
        n,
    };
    Ok((public.clone(), PaillierPrivateKey { public, lambda, mu }))
}

impl PaillierPublicKey {
    /// Encrypt a residue `m` in `[0, n)`.
    pub fn encrypt(&self, m: &BigUint, rng: &mut dyn RngCore) -> Ciphertext {
        debug_assert!(m < &self.n);
        // r uniform in [1, n); a multiple of p or q is astronomically
        // unlikely and would amount to factoring n
        let r = loop {
            let r = random_below(&self.n, rng);
            if !r.is_zero() {
                break r;
            }
        };
        let gm = (BigUint::one() + m * &self.n) % &self.n_squared;
        let rn = r.modpow(&self.n, &self.n_squared);
        Ciphertext { value: (gm * rn) % &self.n_squared, key_id: self.key_id }
    }

    /// Encrypt a signed integer using the half-range embedding.
    pub fn encrypt_signed(&self, m: i128, rng: &mut dyn RngCore) -> Ciphertext {
        let residue = if m >= 0 {
            BigUint::from(m as u128)
        } else {
            &self.n - BigUint::from(m.unsigned_abs())
        };
        self.encrypt(&residue, rng)
    }

    /// Homomorphic addition: the product of ciphertexts encrypts the sum.
    pub fn add(&self, a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
        if a.key_id != b.key_id || a.key_id != self.key_id {
            return Err(Error::CrossKeyOperation);
        }
        Ok(Ciphertext { value: (&a.value * &b.value) % &self.n_squared, key_id: self.key_id })
    }
}

impl PaillierPrivateKey {
    /// Decrypt to a residue in `[0, n)`.
    pub fn decrypt(&self, c: &Ciphertext) -> Result<BigUint> {
        if c.key_id != self.public.key_id {
            return Err(Error::CrossKeyOperation);
        }
        let n = &self.public.n;
        let x = c.value.modpow(&self.lambda, &self.public.n_squared);
        // L(x) = (x - 1) / n
        let l = (x - BigUint::one()) / n;
        Ok((l * &self.mu) % n)
    }

    /// Decrypt under the half-range signed embedding.
    pub fn decrypt_signed(&self, c: &Ciphertext) -> Result<i128> {
        let m = self.decrypt(c)?;
        let n = &self.public.n;
        let half = n >> 1u32;
        let signed = if m > half {
            BigInt::from_biguint(Sign::Plus, m) - BigInt::from_biguint(Sign::Plus, n.clone())
        } else {
            BigInt::from_biguint(Sign::Plus, m)
        };
        signed.to_i128().ok_or_else(|| {
            Error::CipherDecode(format!("plaintext magnitude {} exceeds i128", signed.abs()))
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn test_keys() -> (PaillierPublicKey, PaillierPrivateKey) {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        generate_keypair(512, &mut rng).unwrap()
    }

    #[test]
    fn keygen_rejects_unsupported_sizes() {
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        assert!(matches!(generate_keypair(256, &mut rng), Err(Error::UnsupportedKeyBits(256))));
        assert!(matches!(generate_keypair(513, &mut rng), Err(Error::UnsupportedKeyBits(513))));
    }

    #[test]
    fn modulus_has_requested_width() {
        let (pk, _) = test_keys();
        assert_eq!(pk.n.bits(), 512);
        assert_eq!(pk.n_squared, &pk.n * &pk.n);
    }

    #[test]
    fn round_trip_small_values() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        let (pk, sk) = test_keys();
        for m in [0u64, 1, 2, 94, 1 << 40, u64::MAX] {
            let m = BigUint::from(m);
            let c = pk.encrypt(&m, &mut rng);
            assert_eq!(sk.decrypt(&c).unwrap(), m);
        }
    }

    #[test]
    fn signed_round_trip_covers_negatives() {
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        let (pk, sk) = test_keys();
        for m in [0i128, 1, -1, 12345, -12345, i64::MAX as i128, -(1i128 << 100)] {
            let c = pk.encrypt_signed(m, &mut rng);
            assert_eq!(sk.decrypt_signed(&c).unwrap(), m, "m={m}");
        }
    }

    #[test]
    fn ciphertexts_are_randomized() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let (pk, _) = test_keys();
        let m = BigUint::from(5u32);
        let c1 = pk.encrypt(&m, &mut rng);
        let c2 = pk.encrypt(&m, &mut rng);
        assert_ne!(c1.value, c2.value);
    }

    #[test]
    fn homomorphic_sum_matches_plain_sum() {
        let mut rng = ChaCha12Rng::seed_from_u64(10);
        let (pk, sk) = test_keys();
        let values: Vec<i128> = vec![17, -40, 3, 0, 99, -99, 1 << 30];
        let mut acc = pk.encrypt_signed(0, &mut rng);
        for &v in &values {
            let c = pk.encrypt_signed(v, &mut rng);
            acc = pk.add(&acc, &c).unwrap();
        }
        assert_eq!(sk.decrypt_signed(&acc).unwrap(), values.iter().sum::<i128>());
    }

    #[test]
    fn cross_key_addition_is_rejected() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let (pk1, _) = generate_keypair(512, &mut rng).unwrap();
        let (pk2, sk2) = generate_keypair(512, &mut rng).unwrap();
        let a = pk1.encrypt_signed(1, &mut rng);
        let b = pk2.encrypt_signed(2, &mut rng);
        assert!(matches!(pk1.add(&a, &b), Err(Error::CrossKeyOperation)));
        assert!(matches!(sk2.decrypt(&a), Err(Error::CrossKeyOperation)));
    }

    #[test]
    fn miller_rabin_agrees_with_known_primes_and_composites() {
        let mut rng = ChaCha12Rng::seed_from_u64(12);
        for p in [2u32, 3, 5, 97, 7919, 104729] {
            assert!(is_probable_prime(&BigUint::from(p), 40, &mut rng), "{p} is prime");
        }
        // Carmichael numbers fool Fermat but not Miller-Rabin
        for c in [561u32, 1105, 1729, 41041, 825265] {
            assert!(!is_probable_prime(&BigUint::from(c), 40, &mut rng), "{c} is composite");
        }
    }
}
