//! The federated training protocol: messages, parties, transport and the
//! auditable transcript.

pub mod federation;
pub mod messages;
pub mod party;
pub mod transcript;

pub use federation::Federation;
pub use messages::{exposures_of, Exposure, GradPayload, Message, TreeFeatures};
pub use party::{PartyCrypto, PassiveParty};
pub use transcript::{AuditReport, AuditViolation, Transcript, TranscriptEntry};
