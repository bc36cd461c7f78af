//! Homomorphic building blocks: fixed-point codec, Paillier keys and
//! ciphertexts, and the backend abstraction the protocol trains against.

pub mod backend;
pub mod codec;
pub mod paillier;

pub use backend::{generate_keys, BackendChoice, Decryptor, EncScalar, Encryptor};
pub use codec::FixedPointCodec;
