//! Wire messages between the label holder and feature holders.
//!
//! The training protocol per boosting layer:
//!
//! 1. `SampleNotify` — the layer's row union and, per tree, which of the
//!    receiver's features were sampled.
//! 2. `EncGrads` — encrypted gradient/hessian pairs aligned with the row
//!    union. Passives accumulate these; they cannot open them.
//! 3. `HistRequest`/`HistResponse` — per-node histogram exchange. The
//!    response's sums stay under encryption; bin counts are plain.
//! 4. `SplitNotify`/`SplitAck` — the label holder names a winning
//!    (feature, bin); the owner privately records the real threshold and
//!    returns an opaque lookup id.
//! 5. `PartitionRequest`/`PartitionResponse` — rows routed through an
//!    owned split, during growth and at prediction time.
//!
//! Every message is analyzed for privacy exposures when it enters the
//! transcript. `GradPayload::Plain` exists so tests can demonstrate that
//! an unencrypted gradient message is caught; the engine never sends it.

use serde::{Deserialize, Serialize};

use crate::crypto::EncScalar;
use crate::dataset::FeatureCode;
use crate::tree::grad::GradPair;
use crate::tree::histogram::EncFeatureHistogram;

/// Feature codes one tree may split on at the receiving party.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeFeatures {
    pub tree: u32,
    pub features: Vec<FeatureCode>,
}

/// Gradient transport. Only the `Encrypted` form is protocol-legal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GradPayload {
    Encrypted(Vec<(EncScalar, EncScalar)>),
    Plain(Vec<GradPair>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Message {
    SampleNotify { layer: u32, union_rows: Vec<usize>, trees: Vec<TreeFeatures> },
    EncGrads { layer: u32, payload: GradPayload },
    HistRequest { tree: u32, rows: Vec<usize> },
    HistResponse { histograms: Vec<EncFeatureHistogram> },
    SplitNotify { tree: u32, feature: FeatureCode, bin: u16, default_left: bool },
    SplitAck { lookup_id: u64 },
    PartitionRequest { lookup_id: u64, rows: Vec<usize> },
    PartitionResponse { left_rows: Vec<usize> },
    Ack,
}

impl Message {
    pub fn kind(&self) -> &'static str {
        match self {
            Message::SampleNotify { .. } => "sample_notify",
            Message::EncGrads { .. } => "enc_grads",
            Message::HistRequest { .. } => "hist_request",
            Message::HistResponse { .. } => "hist_response",
            Message::SplitNotify { .. } => "split_notify",
            Message::SplitAck { .. } => "split_ack",
            Message::PartitionRequest { .. } => "partition_request",
            Message::PartitionResponse { .. } => "partition_response",
            Message::Ack => "ack",
        }
    }
}

/// Privacy problems a message can carry. Anything listed here on a sent
/// message is a protocol violation the audit will surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Exposure {
    /// Per-row gradient values outside ciphertext. Gradients determine
    /// labels up to the margin, so this leaks the label holder's data.
    PlaintextGradients,
}

/// Content inspection run on every message entering the transcript.
/// New message kinds must be classified here before they can be sent.
pub fn exposures_of(msg: &Message) -> Vec<Exposure> {
    match msg {
        Message::EncGrads { payload: GradPayload::Plain(_), .. } => {
            vec![Exposure::PlaintextGradients]
        }
        _ => Vec::new(),
    }
}
