//! Federated training context: the label holder's side of the protocol.
//!
//! The context embeds the active party (labels, own columns, the only
//! private key) and a [`Federation`] of passive parties. Gradients leave
//! the active party only under encryption; remote histograms come back as
//! ciphertext and are opened here; splits on remote features are known
//! here only as (owner, lookup id) pairs. Every exchange lands in the
//! federation's transcript for the privacy audit.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::crypto::{generate_keys, BackendChoice, EncScalar, FixedPointCodec};
use crate::dataset::{
    apply_bins, compute_bins, BinnedDataset, FeatureCode, PartyId, PartyTable, QuantileBins,
};
use crate::engine::{resolve_with, BoostContext, ProtocolModel, TreePlan};
use crate::error::{Error, Result};
use crate::protocol::messages::{GradPayload, Message, TreeFeatures};
use crate::protocol::party::{PartyCrypto, PassiveParty};
use crate::protocol::Federation;
use crate::tree::grad::GradPair;
use crate::tree::histogram::{build_histogram, decrypt_histogram, FeatureHistogram};
use crate::tree::model::{ResolvedModel, SplitRecord, SplitRule};
use crate::tree::split::SplitCandidate;

/// Keygen draws from a stream separated from the sampling stream so that
/// federated and centralized runs of the same seed sample identically.
const KEY_STREAM_SALT: u64 = 0x9e3779b97f4a7c15;

struct LayerState {
    bins: Vec<QuantileBins>,
    binned: BinnedDataset,
    /// Active-held features per tree.
    own_features: HashMap<u32, Vec<FeatureCode>>,
    /// Passive parties holding at least one sampled feature, per tree.
    remote_parties: HashMap<u32, Vec<PartyId>>,
    row_pos: HashMap<usize, usize>,
    grads: Vec<GradPair>,
}

/// The active party plus its federation of passive parties.
pub struct FederatedContext {
    federation: Federation,
    crypto: PartyCrypto,
    table: PartyTable,
    labels: Vec<f64>,
    names: Vec<String>,
    code_owner: HashMap<FeatureCode, PartyId>,
    n_features_total: usize,
    n_bins: usize,
    rng: ChaCha12Rng,
    layer: Option<LayerState>,
    lookup: HashMap<u64, SplitRule>,
    next_lookup: u64,
}

impl FederatedContext {
    /// Stand up a federation from aligned party tables. Exactly one table
    /// must be the labeled active party. Key material is generated here:
    /// the decryption half stays with the active party.
    pub fn new(
        tables: Vec<PartyTable>,
        backend: BackendChoice,
        codec: FixedPointCodec,
        n_bins: usize,
        seed: u64,
    ) -> Result<Self> {
        let active_idx = {
            let labeled: Vec<usize> = tables
                .iter()
                .enumerate()
                .filter(|(_, t)| t.party.is_active() && t.labels.is_some())
                .map(|(i, _)| i)
                .collect();
            if labeled.len() != 1 {
                return Err(Error::InvalidConfig(format!(
                    "expected exactly one labeled active party, found {}",
                    labeled.len()
                )));
            }
            labeled[0]
        };
        for t in &tables {
            if t.sample_ids != tables[active_idx].sample_ids {
                return Err(Error::InvalidConfig(
                    "party tables must be aligned before federation setup".into(),
                ));
            }
        }

        let mut key_rng = ChaCha12Rng::seed_from_u64(seed ^ KEY_STREAM_SALT);
        let (encryptor, decryptor) = generate_keys(backend, codec, &mut key_rng)?;

        let n_features_total = tables.iter().map(|t| t.features.len()).sum();
        let mut names = vec![String::new(); n_features_total];
        let mut code_owner = HashMap::new();
        for t in &tables {
            for f in &t.features {
                let idx = f.code.0 as usize;
                if idx >= n_features_total || !names[idx].is_empty() {
                    return Err(Error::InvalidConfig(format!(
                        "feature codes must be unique and dense; {} is not",
                        f.code
                    )));
                }
                names[idx] = f.name.clone();
                code_owner.insert(f.code, t.party);
            }
        }

        let mut active_table = None;
        let mut passives = Vec::new();
        for (i, table) in tables.into_iter().enumerate() {
            if i == active_idx {
                active_table = Some(table);
            } else {
                let party = table.party;
                let party_seed = seed ^ KEY_STREAM_SALT.wrapping_mul(u64::from(party.index) + 2);
                passives.push(PassiveParty::new(
                    table,
                    PartyCrypto::public_only(party, encryptor.clone()),
                    n_bins,
                    party_seed,
                ));
            }
        }
        let table = active_table.expect("active index found above");
        let labels = table.labels.clone().expect("active table is labeled");

        Ok(FederatedContext {
            federation: Federation::new(passives),
            crypto: PartyCrypto::with_private_key(table.party, encryptor, decryptor),
            table,
            labels,
            names,
            code_owner,
            n_features_total,
            n_bins,
            rng: ChaCha12Rng::seed_from_u64(seed ^ KEY_STREAM_SALT.rotate_left(17)),
            layer: None,
            lookup: HashMap::new(),
            next_lookup: 1,
        })
    }

    pub fn federation(&self) -> &Federation {
        &self.federation
    }

    /// Mutable transport access, used by tests to inject raw messages.
    pub fn federation_mut(&mut self) -> &mut Federation {
        &mut self.federation
    }

    fn active_id(&self) -> PartyId {
        self.crypto.party
    }

    fn layer(&self) -> Result<&LayerState> {
        self.layer.as_ref().ok_or_else(|| Error::InvalidConfig("no layer begun".into()))
    }

    fn owner_of(&self, feature: FeatureCode) -> Result<PartyId> {
        self.code_owner
            .get(&feature)
            .copied()
            .ok_or_else(|| Error::InvalidConfig(format!("unknown feature {feature}")))
    }

    fn expect_ack(reply: Message) -> Result<()> {
        match reply {
            Message::Ack => Ok(()),
            other => {
                Err(Error::ProtocolViolation(format!("expected ack, got `{}`", other.kind())))
            }
        }
    }
}

impl BoostContext for FederatedContext {
    fn n_rows(&self) -> usize {
        self.table.n_rows()
    }

    fn n_features(&self) -> usize {
        self.n_features_total
    }

    fn labels(&self) -> &[f64] {
        &self.labels
    }

    fn feature_names(&self) -> Vec<String> {
        self.names.clone()
    }

    fn begin_layer(
        &mut self,
        layer: u32,
        union_rows: &[usize],
        plans: &[TreePlan],
        grads: &[GradPair],
    ) -> Result<()> {
        // local bins over the layer's row union, own columns only
        let bins = compute_bins(&self.table, self.n_bins, union_rows)?;
        let binned = apply_bins(&self.table, &bins)?;

        // slice each tree's feature plan by owner
        let mut own_features: HashMap<u32, Vec<FeatureCode>> = HashMap::new();
        let mut remote_parties: HashMap<u32, Vec<PartyId>> = HashMap::new();
        let mut per_party: HashMap<u16, Vec<TreeFeatures>> = HashMap::new();
        for (t, plan) in plans.iter().enumerate() {
            let t = t as u32;
            let mut by_party: HashMap<u16, Vec<FeatureCode>> = HashMap::new();
            for &code in &plan.features {
                let owner = self.owner_of(code)?;
                if owner == self.active_id() {
                    own_features.entry(t).or_default().push(code);
                } else {
                    by_party.entry(owner.index).or_default().push(code);
                }
            }
            let mut parties: Vec<u16> = by_party.keys().copied().collect();
            parties.sort_unstable();
            remote_parties
                .insert(t, parties.iter().map(|&i| PartyId::passive(i)).collect());
            for (idx, features) in by_party {
                per_party.entry(idx).or_default().push(TreeFeatures { tree: t, features });
            }
        }

        // announce the layer to every passive party, whether or not it
        // holds sampled features this round (it must refresh its bins)
        for party in self.federation.passive_ids() {
            let mut trees = per_party.remove(&party.index).unwrap_or_default();
            trees.sort_by_key(|tf| tf.tree);
            let reply = self.federation.call(
                self.active_id(),
                party,
                Message::SampleNotify { layer, union_rows: union_rows.to_vec(), trees },
            )?;
            Self::expect_ack(reply)?;
        }

        // encrypt once, broadcast to all
        let pairs: Vec<(EncScalar, EncScalar)> = grads
            .iter()
            .map(|gp| {
                (
                    self.crypto.encryptor.encrypt(gp.g, &mut self.rng),
                    self.crypto.encryptor.encrypt(gp.h, &mut self.rng),
                )
            })
            .collect();
        for party in self.federation.passive_ids() {
            let reply = self.federation.call(
                self.active_id(),
                party,
                Message::EncGrads { layer, payload: GradPayload::Encrypted(pairs.clone()) },
            )?;
            Self::expect_ack(reply)?;
        }

        self.layer = Some(LayerState {
            bins,
            binned,
            own_features,
            remote_parties,
            row_pos: union_rows.iter().enumerate().map(|(i, &r)| (r, i)).collect(),
            grads: grads.to_vec(),
        });
        Ok(())
    }

    fn grad_of(&self, row: usize) -> Result<GradPair> {
        let layer = self.layer()?;
        let &pos = layer
            .row_pos
            .get(&row)
            .ok_or(Error::RowOutOfRange { row, rows: self.table.n_rows() })?;
        Ok(layer.grads[pos])
    }

    fn node_histograms(&mut self, tree: u32, rows: &[usize]) -> Result<Vec<FeatureHistogram>> {
        let layer = self.layer()?;
        let own = layer.own_features.get(&tree).cloned().unwrap_or_default();
        let remotes = layer.remote_parties.get(&tree).cloned().unwrap_or_default();

        // own features: plaintext accumulation, same arithmetic as the
        // passive side runs under the mock cipher
        let mut grads = Vec::with_capacity(rows.len());
        for &row in rows {
            let &pos = layer
                .row_pos
                .get(&row)
                .ok_or(Error::RowOutOfRange { row, rows: self.table.n_rows() })?;
            grads.push(layer.grads[pos]);
        }
        let mut hists = Vec::new();
        for code in own {
            let column = layer
                .binned
                .column(code)
                .ok_or_else(|| Error::InvalidConfig(format!("no column for {code}")))?;
            hists.push(build_histogram(column, rows, &grads)?);
        }

        // remote features: ciphertext histograms, opened with the only
        // private key in the federation
        for party in remotes {
            let reply = self.federation.call(
                self.active_id(),
                party,
                Message::HistRequest { tree, rows: rows.to_vec() },
            )?;
            let Message::HistResponse { histograms } = reply else {
                return Err(Error::ProtocolViolation("expected hist_response".into()));
            };
            let decryptor = self.crypto.decryptor()?;
            for enc in &histograms {
                hists.push(decrypt_histogram(enc, decryptor)?);
            }
        }
        Ok(hists)
    }

    fn register_split(&mut self, tree: u32, cand: &SplitCandidate) -> Result<SplitRecord> {
        let owner = self.owner_of(cand.feature)?;
        if owner == self.active_id() {
            let layer = self.layer()?;
            let qb = layer
                .bins
                .iter()
                .find(|b| b.feature == cand.feature)
                .ok_or_else(|| Error::InvalidConfig(format!("no bins for {}", cand.feature)))?;
            let threshold = qb.cut_value(cand.bin).ok_or_else(|| {
                Error::InvalidConfig(format!("bin {} of {} has no cut", cand.bin, cand.feature))
            })?;
            let id = self.next_lookup;
            self.next_lookup += 1;
            self.lookup.insert(
                id,
                SplitRule {
                    feature: cand.feature,
                    bin: cand.bin,
                    threshold,
                    default_left: cand.default_left,
                },
            );
            return Ok(SplitRecord { owner, lookup_id: id, gain: cand.gain });
        }

        let reply = self.federation.call(
            self.active_id(),
            owner,
            Message::SplitNotify {
                tree,
                feature: cand.feature,
                bin: cand.bin,
                default_left: cand.default_left,
            },
        )?;
        let Message::SplitAck { lookup_id } = reply else {
            return Err(Error::ProtocolViolation("expected split_ack".into()));
        };
        Ok(SplitRecord { owner, lookup_id, gain: cand.gain })
    }

    fn partition(
        &mut self,
        record: &SplitRecord,
        rows: &[usize],
    ) -> Result<(Vec<usize>, Vec<usize>)> {
        if record.owner == self.active_id() {
            let rule = self
                .lookup
                .get(&record.lookup_id)
                .ok_or(Error::UnknownLookupId { party: 0, id: record.lookup_id })?;
            let column = self
                .table
                .feature(rule.feature)
                .ok_or_else(|| Error::InvalidConfig(format!("feature {} missing", rule.feature)))?;
            let mut left = Vec::new();
            let mut right = Vec::new();
            for &row in rows {
                let v = *column
                    .values
                    .get(row)
                    .ok_or(Error::RowOutOfRange { row, rows: self.table.n_rows() })?;
                let goes_left = if v.is_nan() { rule.default_left } else { v <= rule.threshold };
                if goes_left {
                    left.push(row);
                } else {
                    right.push(row);
                }
            }
            return Ok((left, right));
        }

        let reply = self.federation.call(
            self.active_id(),
            record.owner,
            Message::PartitionRequest { lookup_id: record.lookup_id, rows: rows.to_vec() },
        )?;
        let Message::PartitionResponse { left_rows } = reply else {
            return Err(Error::ProtocolViolation("expected partition_response".into()));
        };
        let left_set: std::collections::HashSet<usize> = left_rows.iter().copied().collect();
        let mut left = Vec::with_capacity(left_rows.len());
        let mut right = Vec::with_capacity(rows.len() - left_rows.len());
        for &row in rows {
            if left_set.contains(&row) {
                left.push(row);
            } else {
                right.push(row);
            }
        }
        Ok((left, right))
    }

    fn resolve(&self, model: &ProtocolModel) -> Result<ResolvedModel> {
        let remote = self.federation.export_lookups();
        resolve_with(model, self.feature_names(), &|record: &SplitRecord| {
            if record.owner == self.active_id() {
                return self
                    .lookup
                    .get(&record.lookup_id)
                    .copied()
                    .ok_or(Error::UnknownLookupId { party: 0, id: record.lookup_id });
            }
            remote
                .get(&record.owner.index)
                .and_then(|table| table.get(&record.lookup_id))
                .copied()
                .ok_or(Error::UnknownLookupId {
                    party: record.owner.index,
                    id: record.lookup_id,
                })
        })
    }
}
