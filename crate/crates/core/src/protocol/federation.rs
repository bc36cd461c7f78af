//! In-process message transport with a recording transcript.
//!
//! The federation carries every message between the label holder and the
//! passive parties, stamping each with a sequence number, measuring its
//! serialized size, and running exposure analysis before delivery.
//! Request/response exchanges share a correlation id. A configurable
//! per-message latency accumulates on a simulated clock so experiments
//! can model slow links without sleeping.

use std::collections::HashMap;

use crate::dataset::PartyId;
use crate::error::{Error, Result};
use crate::protocol::messages::{exposures_of, Message};
use crate::protocol::party::PassiveParty;
use crate::protocol::transcript::{Transcript, TranscriptEntry};

pub struct Federation {
    passives: HashMap<u16, PassiveParty>,
    transcript: Transcript,
    next_seq: u64,
    /// Simulated one-way latency added to the clock per message.
    pub link_latency_ms: f64,
    /// Simulated time spent on the wire so far.
    pub simulated_ms: f64,
}

impl Federation {
    pub fn new(passives: Vec<PassiveParty>) -> Self {
        Federation {
            passives: passives.into_iter().map(|p| (p.id().index, p)).collect(),
            transcript: Transcript::default(),
            next_seq: 0,
            link_latency_ms: 0.0,
            simulated_ms: 0.0,
        }
    }

    pub fn transcript(&self) -> &Transcript {
        &self.transcript
    }

    pub fn passive(&self, party: PartyId) -> Option<&PassiveParty> {
        self.passives.get(&party.index)
    }

    pub fn passive_ids(&self) -> Vec<PartyId> {
        let mut ids: Vec<PartyId> = self.passives.values().map(|p| p.id()).collect();
        ids.sort_by_key(|p| p.index);
        ids
    }

    fn record(
        &mut self,
        sender: PartyId,
        receiver: PartyId,
        msg: &Message,
        correlation: Option<u64>,
    ) -> Result<u64> {
        let seq = self.next_seq;
        self.next_seq += 1;
        self.simulated_ms += self.link_latency_ms;
        self.transcript.record(TranscriptEntry {
            seq,
            correlation,
            sender,
            receiver,
            kind: msg.kind().to_string(),
            payload_bytes: serde_json::to_vec(msg)?.len(),
            exposures: exposures_of(msg),
        });
        Ok(seq)
    }

    /// Round trip: deliver a request from the label holder to a passive
    /// party and return its reply. Both legs enter the transcript.
    pub fn call(&mut self, sender: PartyId, receiver: PartyId, msg: Message) -> Result<Message> {
        let seq = self.record(sender, receiver, &msg, None)?;
        let reply = self
            .passives
            .get_mut(&receiver.index)
            .ok_or_else(|| Error::ProtocolViolation(format!("no such party {receiver}")))?
            .handle(&msg)?;
        self.record(receiver, sender, &reply, Some(seq))?;
        Ok(reply)
    }

    /// Transport-level escape hatch: put a message on the wire without
    /// any sender-side checks. The transcript still sees and analyzes
    /// it — this is how tests demonstrate that the audit catches protocol
    /// breaches. The receiver's verdict is returned but not recorded.
    pub fn send_raw(
        &mut self,
        sender: PartyId,
        receiver: PartyId,
        msg: Message,
    ) -> Result<Result<Message>> {
        self.record(sender, receiver, &msg, None)?;
        Ok(match self.passives.get_mut(&receiver.index) {
            Some(party) => party.handle(&msg),
            None => Err(Error::ProtocolViolation(format!("no such party {receiver}"))),
        })
    }

    /// Hand each passive party's private lookup table to the caller for
    /// model export. Out-of-band by design; see
    /// [`PassiveParty::export_lookup`].
    pub fn export_lookups(
        &self,
    ) -> HashMap<u16, &HashMap<u64, crate::tree::model::SplitRule>> {
        self.passives.iter().map(|(&idx, p)| (idx, p.export_lookup())).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{generate_keys, BackendChoice, FixedPointCodec};
    use crate::dataset::{FeatureCode, FeatureColumn, PartyTable};
    use crate::protocol::messages::{GradPayload, TreeFeatures};
    use crate::protocol::party::PartyCrypto;
    use crate::tree::grad::GradPair;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn small_federation() -> (Federation, crate::crypto::Encryptor) {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        let (enc, _dec) =
            generate_keys(BackendChoice::Mock, FixedPointCodec::default(), &mut rng).unwrap();
        let table = PartyTable {
            party: PartyId::passive(1),
            sample_ids: (0..4).collect(),
            features: vec![FeatureColumn {
                code: FeatureCode(0),
                name: "x0".into(),
                values: vec![1.0, 2.0, 3.0, 4.0],
            }],
            labels: None,
        };
        let party =
            PassiveParty::new(table, PartyCrypto::public_only(PartyId::passive(1), enc.clone()), 4, 9);
        (Federation::new(vec![party]), enc)
    }

    #[test]
    fn calls_record_both_directions_with_correlation() {
        let (mut fed, _) = small_federation();
        let reply = fed
            .call(
                PartyId::active(),
                PartyId::passive(1),
                Message::SampleNotify {
                    layer: 1,
                    union_rows: vec![0, 1, 2, 3],
                    trees: vec![TreeFeatures { tree: 0, features: vec![FeatureCode(0)] }],
                },
            )
            .unwrap();
        assert_eq!(reply, Message::Ack);
        let t = fed.transcript();
        assert_eq!(t.len(), 2);
        assert_eq!(t.entries[0].kind, "sample_notify");
        assert_eq!(t.entries[1].kind, "ack");
        assert_eq!(t.entries[1].correlation, Some(t.entries[0].seq));
        assert!(t.entries[0].payload_bytes > 0);
    }

    #[test]
    fn unknown_receiver_is_an_error() {
        let (mut fed, _) = small_federation();
        assert!(fed.call(PartyId::active(), PartyId::passive(9), Message::Ack).is_err());
    }

    #[test]
    fn raw_sends_are_recorded_even_when_refused() {
        let (mut fed, _) = small_federation();
        let verdict = fed
            .send_raw(
                PartyId::active(),
                PartyId::passive(1),
                Message::EncGrads {
                    layer: 1,
                    payload: GradPayload::Plain(vec![GradPair { g: 0.5, h: 0.25 }]),
                },
            )
            .unwrap();
        assert!(verdict.is_err(), "receiver must refuse plaintext gradients");
        let report = fed.transcript().audit();
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].kind, "enc_grads");
    }

    #[test]
    fn latency_accumulates_on_the_simulated_clock() {
        let (mut fed, _) = small_federation();
        fed.link_latency_ms = 3.0;
        fed.call(
            PartyId::active(),
            PartyId::passive(1),
            Message::SampleNotify { layer: 1, union_rows: vec![0], trees: vec![] },
        )
        .unwrap();
        assert_eq!(fed.simulated_ms, 6.0); // request + reply
    }
}
