//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("csv parse error at row {row}, column `{column}`: {message}")]
    CsvParse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("label at row {row} is {value}, expected 0 or 1")]
    NonBinaryLabel { row: usize, value: f64 },

    #[error("partition plan assigns {got} feature columns, table has {expected}")]
    PartitionPlan { expected: usize, got: usize },

    #[error("no sample id is present at every party")]
    EmptyIdIntersection,

    #[error("party {party} has duplicate sample id {id}")]
    DuplicateSampleId { party: u16, id: u64 },

    #[error("operation requires a non-empty row set")]
    EmptyRows,

    #[error("bin count must be at least 1, got {0}")]
    InvalidBinCount(usize),

    #[error("unsupported key size {0} (expected 512, 1024 or 2048)")]
    UnsupportedKeyBits(u32),

    #[error("ciphertexts from different key pairs cannot be combined")]
    CrossKeyOperation,

    #[error("party {party} holds no private key; decryption denied")]
    DecryptAccessDenied { party: u16 },

    #[error("ciphertext decode failed: {0}")]
    CipherDecode(String),

    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),

    #[error("boosting round {round} outside [1, {total}]")]
    ScheduleRoundOutOfRange { round: u32, total: u32 },

    #[error("row index {row} outside dataset of {rows} rows")]
    RowOutOfRange { row: usize, rows: usize },

    #[error("leaf weight undefined: hessian sum plus lambda is {0}")]
    NonPositiveHessian(f64),

    #[error("party {party} has no lookup entry {id}")]
    UnknownLookupId { party: u16, id: u64 },

    #[error("protocol violation: {0}")]
    ProtocolViolation(String),

    #[error("sampling produced an empty {0} subset; increase the rate")]
    EmptySample(&'static str),

    #[error("metric requires both classes present")]
    SingleClassMetric,

    #[error("reference value must be positive, got {0}")]
    NonPositiveReference(f64),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),

    #[error("config write error: {0}")]
    TomlWrite(#[from] toml::ser::Error),
}
