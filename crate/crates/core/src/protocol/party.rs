//! Party-side state: key material access and the passive message handler.
//!
//! A passive party owns feature columns but no labels and no private key.
//! It answers the label holder's messages: it re-bins its columns for each
//! layer's row union, accumulates ciphertext gradients into histograms,
//! records committed splits in a private lookup table, and routes rows
//! through those splits. The real thresholds never leave this struct
//! during training; [`PassiveParty::export_lookup`] is the explicit
//! model-export step parties run after training by agreement.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::crypto::{Decryptor, EncScalar, Encryptor};
use crate::dataset::{apply_bins, compute_bins, BinnedDataset, FeatureCode, PartyId, PartyTable, QuantileBins};
use crate::error::{Error, Result};
use crate::protocol::messages::{GradPayload, Message, TreeFeatures};
use crate::tree::histogram::build_enc_histogram;
use crate::tree::model::SplitRule;

/// A party's key material. Every party can encrypt and add; only the
/// label holder is constructed with the decryption half.
#[derive(Debug, Clone)]
pub struct PartyCrypto {
    pub party: PartyId,
    pub encryptor: Encryptor,
    decryptor: Option<Decryptor>,
}

impl PartyCrypto {
    pub fn with_private_key(party: PartyId, encryptor: Encryptor, decryptor: Decryptor) -> Self {
        PartyCrypto { party, encryptor, decryptor: Some(decryptor) }
    }

    pub fn public_only(party: PartyId, encryptor: Encryptor) -> Self {
        PartyCrypto { party, encryptor, decryptor: None }
    }

    /// The decryption half, if this party is entitled to it.
    pub fn decryptor(&self) -> Result<&Decryptor> {
        self.decryptor.as_ref().ok_or(Error::DecryptAccessDenied { party: self.party.index })
    }
}

/// Per-layer state a passive party keeps between messages.
struct LayerState {
    bins: Vec<QuantileBins>,
    binned: BinnedDataset,
    /// Which of this party's features each tree sampled.
    tree_features: HashMap<u32, Vec<FeatureCode>>,
    /// Position of a global row inside the gradient vectors.
    row_pos: HashMap<usize, usize>,
    enc_grads: Vec<(EncScalar, EncScalar)>,
}

/// A feature holder and its message handler.
pub struct PassiveParty {
    crypto: PartyCrypto,
    table: PartyTable,
    n_bins: usize,
    rng: ChaCha12Rng,
    layer: Option<LayerState>,
    lookup: HashMap<u64, SplitRule>,
    next_lookup: u64,
}

impl PassiveParty {
    /// `n_bins` is the quantile bin budget per feature; `seed` feeds the
    /// party's encryption randomness.
    pub fn new(table: PartyTable, crypto: PartyCrypto, n_bins: usize, seed: u64) -> Self {
        PassiveParty {
            crypto,
            table,
            n_bins,
            rng: ChaCha12Rng::seed_from_u64(seed),
            layer: None,
            lookup: HashMap::new(),
            next_lookup: 1,
        }
    }

    pub fn id(&self) -> PartyId {
        self.crypto.party
    }

    pub fn feature_codes(&self) -> Vec<FeatureCode> {
        self.table.feature_codes()
    }

    /// Reveal the private split rules. This is the out-of-band model
    /// export parties perform together after training; it is not a
    /// protocol message and never appears in the transcript.
    pub fn export_lookup(&self) -> &HashMap<u64, SplitRule> {
        &self.lookup
    }

    pub fn handle(&mut self, msg: &Message) -> Result<Message> {
        match msg {
            Message::SampleNotify { union_rows, trees, .. } => {
                self.begin_layer(union_rows, trees)?;
                Ok(Message::Ack)
            }
            Message::EncGrads { payload, .. } => {
                self.receive_grads(payload)?;
                Ok(Message::Ack)
            }
            Message::HistRequest { tree, rows } => {
                Ok(Message::HistResponse { histograms: self.build_histograms(*tree, rows)? })
            }
            Message::SplitNotify { feature, bin, default_left, .. } => {
                Ok(Message::SplitAck {
                    lookup_id: self.commit_split(*feature, *bin, *default_left)?,
                })
            }
            Message::PartitionRequest { lookup_id, rows } => {
                Ok(Message::PartitionResponse { left_rows: self.partition(*lookup_id, rows)? })
            }
            other => Err(Error::ProtocolViolation(format!(
                "passive party cannot handle `{}`",
                other.kind()
            ))),
        }
    }

    fn begin_layer(&mut self, union_rows: &[usize], trees: &[TreeFeatures]) -> Result<()> {
        let bins = compute_bins(&self.table, self.n_bins, union_rows)?;
        let binned = apply_bins(&self.table, &bins)?;
        let mut tree_features = HashMap::new();
        for tf in trees {
            for code in &tf.features {
                if self.table.feature(*code).is_none() {
                    return Err(Error::ProtocolViolation(format!(
                        "feature {code} is not held by {}",
                        self.id()
                    )));
                }
            }
            tree_features.insert(tf.tree, tf.features.clone());
        }
        self.layer = Some(LayerState {
            bins,
            binned,
            tree_features,
            row_pos: union_rows.iter().enumerate().map(|(i, &r)| (r, i)).collect(),
            enc_grads: Vec::new(),
        });
        Ok(())
    }

    fn layer(&self) -> Result<&LayerState> {
        self.layer
            .as_ref()
            .ok_or_else(|| Error::ProtocolViolation("no layer announced yet".into()))
    }

    fn receive_grads(&mut self, payload: &GradPayload) -> Result<()> {
        let pairs = match payload {
            GradPayload::Encrypted(pairs) => pairs.clone(),
            GradPayload::Plain(_) => {
                return Err(Error::ProtocolViolation(
                    "refusing plaintext gradients; the protocol requires ciphertext".into(),
                ))
            }
        };
        let expected = self.layer()?.row_pos.len();
        if pairs.len() != expected {
            return Err(Error::ProtocolViolation(format!(
                "expected {expected} gradient pairs for the layer union, got {}",
                pairs.len()
            )));
        }
        self.layer.as_mut().expect("checked above").enc_grads = pairs;
        Ok(())
    }

    fn build_histograms(
        &mut self,
        tree: u32,
        rows: &[usize],
    ) -> Result<Vec<crate::tree::histogram::EncFeatureHistogram>> {
        let layer = self
            .layer
            .as_ref()
            .ok_or_else(|| Error::ProtocolViolation("no layer announced yet".into()))?;
        if layer.enc_grads.is_empty() {
            return Err(Error::ProtocolViolation("no gradients received for this layer".into()));
        }
        let features = layer.tree_features.get(&tree).cloned().unwrap_or_default();

        let mut grads = Vec::with_capacity(rows.len());
        for &row in rows {
            let &pos = layer.row_pos.get(&row).ok_or_else(|| {
                Error::ProtocolViolation(format!("row {row} is outside the layer union"))
            })?;
            grads.push(layer.enc_grads[pos].clone());
        }

        let mut histograms = Vec::with_capacity(features.len());
        for code in features {
            let column = layer
                .binned
                .column(code)
                .ok_or_else(|| Error::ProtocolViolation(format!("no binned column for {code}")))?;
            histograms.push(build_enc_histogram(
                column,
                rows,
                &grads,
                &self.crypto.encryptor,
                &mut self.rng,
            )?);
        }
        Ok(histograms)
    }

    fn commit_split(&mut self, feature: FeatureCode, bin: u16, default_left: bool) -> Result<u64> {
        let layer = self.layer()?;
        let qb = layer
            .bins
            .iter()
            .find(|b| b.feature == feature)
            .ok_or_else(|| Error::ProtocolViolation(format!("no bins for feature {feature}")))?;
        let threshold = qb.cut_value(bin).ok_or_else(|| {
            Error::ProtocolViolation(format!("bin {bin} of feature {feature} has no cut point"))
        })?;
        let id = self.next_lookup;
        self.next_lookup += 1;
        self.lookup.insert(id, SplitRule { feature, bin, threshold, default_left });
        Ok(id)
    }

    fn partition(&self, lookup_id: u64, rows: &[usize]) -> Result<Vec<usize>> {
        let rule = self
            .lookup
            .get(&lookup_id)
            .ok_or(Error::UnknownLookupId { party: self.id().index, id: lookup_id })?;
        let column = self
            .table
            .feature(rule.feature)
            .ok_or_else(|| Error::ProtocolViolation(format!("feature {} left the table", rule.feature)))?;
        let n_rows = self.table.n_rows();
        let mut left = Vec::new();
        for &row in rows {
            let v = *column
                .values
                .get(row)
                .ok_or(Error::RowOutOfRange { row, rows: n_rows })?;
            let goes_left = if v.is_nan() { rule.default_left } else { v <= rule.threshold };
            if goes_left {
                left.push(row);
            }
        }
        Ok(left)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crypto::{generate_keys, BackendChoice, FixedPointCodec};
    use crate::dataset::FeatureColumn;
    use crate::tree::grad::GradPair;

    fn keys() -> (Encryptor, Decryptor) {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        generate_keys(BackendChoice::Mock, FixedPointCodec::default(), &mut rng).unwrap()
    }

    fn passive_table() -> PartyTable {
        PartyTable {
            party: PartyId::passive(1),
            sample_ids: (0..8).collect(),
            features: vec![FeatureColumn {
                code: FeatureCode(2),
                name: "x2".into(),
                values: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, f64::NAN],
            }],
            labels: None,
        }
    }

    fn ready_party() -> (PassiveParty, Encryptor, Decryptor) {
        let (enc, dec) = keys();
        let crypto = PartyCrypto::public_only(PartyId::passive(1), enc.clone());
        let mut party = PassiveParty::new(passive_table(), crypto, 4, 7);
        let union: Vec<usize> = (0..8).collect();
        party
            .handle(&Message::SampleNotify {
                layer: 1,
                union_rows: union.clone(),
                trees: vec![TreeFeatures { tree: 0, features: vec![FeatureCode(2)] }],
            })
            .unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let pairs: Vec<_> = (0..8)
            .map(|i| {
                let gp = GradPair { g: if i < 4 { -0.5 } else { 0.5 }, h: 0.25 };
                (enc.encrypt(gp.g, &mut rng), enc.encrypt(gp.h, &mut rng))
            })
            .collect();
        party
            .handle(&Message::EncGrads { layer: 1, payload: GradPayload::Encrypted(pairs) })
            .unwrap();
        (party, enc, dec)
    }

    #[test]
    fn passive_parties_hold_no_private_key() {
        let (enc, dec) = keys();
        let passive = PartyCrypto::public_only(PartyId::passive(3), enc.clone());
        assert!(matches!(
            passive.decryptor(),
            Err(Error::DecryptAccessDenied { party: 3 })
        ));
        let active = PartyCrypto::with_private_key(PartyId::active(), enc, dec);
        assert!(active.decryptor().is_ok());
    }

    #[test]
    fn plaintext_gradients_are_refused() {
        let (mut party, ..) = ready_party();
        let err = party
            .handle(&Message::EncGrads {
                layer: 1,
                payload: GradPayload::Plain(vec![GradPair { g: 0.1, h: 0.2 }]),
            })
            .unwrap_err();
        assert!(matches!(err, Error::ProtocolViolation(_)));
    }

    #[test]
    fn histograms_cover_requested_rows_only() {
        let (mut party, _, dec) = ready_party();
        let reply = party
            .handle(&Message::HistRequest { tree: 0, rows: vec![0, 1, 6] })
            .unwrap();
        let Message::HistResponse { histograms } = reply else { panic!("wrong reply") };
        assert_eq!(histograms.len(), 1);
        let counts_total: usize = histograms[0].counts.iter().sum();
        assert_eq!(counts_total, 3);
        let g_total: f64 = histograms[0]
            .g
            .iter()
            .map(|e| dec.decrypt(e).unwrap())
            .sum();
        assert!((g_total - (-0.5 - 0.5 + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn rows_outside_the_union_are_rejected() {
        let (mut party, ..) = ready_party();
        let err =
            party.handle(&Message::HistRequest { tree: 0, rows: vec![95] }).unwrap_err();
        assert!(matches!(err, Error::ProtocolViolation(_)));
    }

    #[test]
    fn split_commit_then_partition_uses_private_threshold() {
        let (mut party, ..) = ready_party();
        // values 1..=7 + NaN, 4 bins: cuts at 25/50/75% quantiles
        let reply = party
            .handle(&Message::SplitNotify {
                tree: 0,
                feature: FeatureCode(2),
                bin: 1,
                default_left: false,
            })
            .unwrap();
        let Message::SplitAck { lookup_id } = reply else { panic!("wrong reply") };

        let reply = party
            .handle(&Message::PartitionRequest { lookup_id, rows: (0..8).collect() })
            .unwrap();
        let Message::PartitionResponse { left_rows } = reply else { panic!("wrong reply") };
        // median of 1..=7 is 4: rows with value <= 4 go left; NaN goes right
        assert_eq!(left_rows, vec![0, 1, 2, 3]);
    }

    #[test]
    fn unknown_lookup_ids_error() {
        let (mut party, ..) = ready_party();
        let err = party
            .handle(&Message::PartitionRequest { lookup_id: 999, rows: vec![0] })
            .unwrap_err();
        assert!(matches!(err, Error::UnknownLookupId { id: 999, .. }));
    }

    #[test]
    fn foreign_features_in_the_plan_are_rejected() {
        let (enc, _) = keys();
        let crypto = PartyCrypto::public_only(PartyId::passive(1), enc);
        let mut party = PassiveParty::new(passive_table(), crypto, 4, 7);
        let err = party
            .handle(&Message::SampleNotify {
                layer: 1,
                union_rows: vec![0, 1],
                trees: vec![TreeFeatures { tree: 0, features: vec![FeatureCode(99)] }],
            })
            .unwrap_err();
        assert!(matches!(err, Error::ProtocolViolation(_)));
    }
}
