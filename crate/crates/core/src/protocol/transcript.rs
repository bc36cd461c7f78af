//! Auditable message log.
//!
//! The transcript records metadata about every message the federation
//! carried — never payload content. Each entry keeps the exposure flags
//! computed when the message was sent, so a later audit needs nothing but
//! the log itself. The log serializes to one JSON object per line.

use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::PartyId;
use crate::error::Result;
use crate::protocol::messages::Exposure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub seq: u64,
    /// Request this entry answers, when it is a response.
    pub correlation: Option<u64>,
    pub sender: PartyId,
    pub receiver: PartyId,
    pub kind: String,
    pub payload_bytes: usize,
    pub exposures: Vec<Exposure>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
}

/// One flagged message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditViolation {
    pub seq: u64,
    pub sender: PartyId,
    pub receiver: PartyId,
    pub kind: String,
    pub exposures: Vec<Exposure>,
}

/// Outcome of scanning a transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub total_messages: usize,
    pub total_bytes: usize,
    pub violations: Vec<AuditViolation>,
}

impl AuditReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

impl Transcript {
    pub fn record(&mut self, entry: TranscriptEntry) {
        self.entries.push(entry);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Scan every entry and report the ones carrying exposures.
    pub fn audit(&self) -> AuditReport {
        AuditReport {
            total_messages: self.entries.len(),
            total_bytes: self.entries.iter().map(|e| e.payload_bytes).sum(),
            violations: self
                .entries
                .iter()
                .filter(|e| !e.exposures.is_empty())
                .map(|e| AuditViolation {
                    seq: e.seq,
                    sender: e.sender,
                    receiver: e.receiver,
                    kind: e.kind.clone(),
                    exposures: e.exposures.clone(),
                })
                .collect(),
        }
    }

    /// Write as JSON lines.
    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for entry in &self.entries {
            serde_json::to_writer(&mut out, entry)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        Ok(())
    }

    /// Read a JSON-lines transcript back.
    pub fn load<P: AsRef<Path>>(path: P) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let mut entries = Vec::new();
        for line in std::io::BufReader::new(file).lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            entries.push(serde_json::from_str(&line)?);
        }
        Ok(Transcript { entries })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(seq: u64, kind: &str, exposures: Vec<Exposure>) -> TranscriptEntry {
        TranscriptEntry {
            seq,
            correlation: None,
            sender: PartyId::active(),
            receiver: PartyId::passive(1),
            kind: kind.into(),
            payload_bytes: 100,
            exposures,
        }
    }

    #[test]
    fn clean_transcript_audits_clean() {
        let mut t = Transcript::default();
        t.record(entry(0, "enc_grads", vec![]));
        t.record(entry(1, "hist_request", vec![]));
        let report = t.audit();
        assert!(report.is_clean());
        assert_eq!(report.total_messages, 2);
        assert_eq!(report.total_bytes, 200);
    }

    #[test]
    fn flagged_entries_become_violations() {
        let mut t = Transcript::default();
        t.record(entry(0, "enc_grads", vec![]));
        t.record(entry(1, "enc_grads", vec![Exposure::PlaintextGradients]));
        let report = t.audit();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].seq, 1);
        assert_eq!(report.violations[0].exposures, vec![Exposure::PlaintextGradients]);
    }

    #[test]
    fn save_load_round_trip() {
        let mut t = Transcript::default();
        t.record(entry(0, "sample_notify", vec![]));
        t.record(entry(1, "enc_grads", vec![Exposure::PlaintextGradients]));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("transcript.log");
        t.save(&path).unwrap();
        let back = Transcript::load(&path).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.audit(), t.audit());
    }
}
