//! Plaintext training context over the unioned columns.
//!
//! This is the reference the federated run is measured against: the same
//! trainer and grow loop run directly on all columns with no parties, no
//! encryption and no messages. Accumulation order matches the federated
//! path bin for bin, so under the exact mock backend the two contexts
//! produce byte-identical resolved models.

use std::collections::HashMap;

use crate::dataset::{
    apply_bins, compute_bins, BinnedDataset, FeatureCode, PartyId, PartyTable, QuantileBins,
    RawTable,
};
use crate::engine::{resolve_with, BoostContext, ProtocolModel, TreePlan};
use crate::error::{Error, Result};
use crate::tree::grad::GradPair;
use crate::tree::histogram::{build_histogram, FeatureHistogram};
use crate::tree::model::{ResolvedModel, SplitRecord, SplitRule};
use crate::tree::split::SplitCandidate;

struct LayerState {
    bins: Vec<QuantileBins>,
    binned: BinnedDataset,
    tree_features: HashMap<u32, Vec<FeatureCode>>,
    row_pos: HashMap<usize, usize>,
    grads: Vec<GradPair>,
}

/// Single-process context holding every column and the labels.
pub struct CentralizedContext {
    table: PartyTable,
    labels: Vec<f64>,
    n_bins: usize,
    layer: Option<LayerState>,
    lookup: HashMap<u64, SplitRule>,
    next_lookup: u64,
}

impl CentralizedContext {
    /// Train directly on a labeled table.
    pub fn from_table(table: &RawTable, n_bins: usize) -> Result<Self> {
        let labels = table
            .labels
            .clone()
            .ok_or_else(|| Error::InvalidConfig("training needs a labeled table".into()))?;
        let party = PartyTable {
            party: PartyId::active(),
            sample_ids: table.sample_ids.clone(),
            features: table
                .features
                .iter()
                .enumerate()
                .map(|(i, c)| crate::dataset::FeatureColumn {
                    code: FeatureCode(i as u32),
                    name: c.name.clone(),
                    values: c.values.clone(),
                })
                .collect(),
            labels: Some(labels.clone()),
        };
        Ok(CentralizedContext {
            table: party,
            labels,
            n_bins,
            layer: None,
            lookup: HashMap::new(),
            next_lookup: 1,
        })
    }

    /// Union already-partitioned party tables back into one plaintext
    /// table — the "as if no federation existed" reference.
    pub fn from_parties(tables: &[PartyTable], n_bins: usize) -> Result<Self> {
        let active = tables
            .iter()
            .find(|t| t.party.is_active() && t.labels.is_some())
            .ok_or_else(|| Error::InvalidConfig("no labeled active party table".into()))?;
        let mut features: Vec<crate::dataset::FeatureColumn> =
            tables.iter().flat_map(|t| t.features.iter().cloned()).collect();
        features.sort_by_key(|f| f.code);
        for t in tables {
            if t.sample_ids != active.sample_ids {
                return Err(Error::InvalidConfig(
                    "party tables must be aligned before training".into(),
                ));
            }
        }
        Ok(CentralizedContext {
            table: PartyTable {
                party: PartyId::active(),
                sample_ids: active.sample_ids.clone(),
                features,
                labels: active.labels.clone(),
            },
            labels: active.labels.clone().expect("checked above"),
            n_bins,
            layer: None,
            lookup: HashMap::new(),
            next_lookup: 1,
        })
    }

    fn layer(&self) -> Result<&LayerState> {
        self.layer.as_ref().ok_or_else(|| Error::InvalidConfig("no layer begun".into()))
    }
}

impl BoostContext for CentralizedContext {
    fn n_rows(&self) -> usize {
        self.table.n_rows()
    }

    fn n_features(&self) -> usize {
        self.table.features.len()
    }

    fn labels(&self) -> &[f64] {
        &self.labels
    }

    fn feature_names(&self) -> Vec<String> {
        self.table.features.iter().map(|f| f.name.clone()).collect()
    }

    fn begin_layer(
        &mut self,
        _layer: u32,
        union_rows: &[usize],
        plans: &[TreePlan],
        grads: &[GradPair],
    ) -> Result<()> {
        let bins = compute_bins(&self.table, self.n_bins, union_rows)?;
        let binned = apply_bins(&self.table, &bins)?;
        self.layer = Some(LayerState {
            bins,
            binned,
            tree_features: plans
                .iter()
                .enumerate()
                .map(|(t, p)| (t as u32, p.features.clone()))
                .collect(),
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
        let features = layer.tree_features.get(&tree).cloned().unwrap_or_default();
        let mut grads = Vec::with_capacity(rows.len());
        for &row in rows {
            let &pos = layer
                .row_pos
                .get(&row)
                .ok_or(Error::RowOutOfRange { row, rows: self.table.n_rows() })?;
            grads.push(layer.grads[pos]);
        }
        features
            .iter()
            .map(|&code| {
                let column = layer
                    .binned
                    .column(code)
                    .ok_or_else(|| Error::InvalidConfig(format!("no column for {code}")))?;
                build_histogram(column, rows, &grads)
            })
            .collect()
    }

    fn register_split(&mut self, _tree: u32, cand: &SplitCandidate) -> Result<SplitRecord> {
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
        Ok(SplitRecord { owner: PartyId::active(), lookup_id: id, gain: cand.gain })
    }

    fn partition(
        &mut self,
        record: &SplitRecord,
        rows: &[usize],
    ) -> Result<(Vec<usize>, Vec<usize>)> {
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
        Ok((left, right))
    }

    fn resolve(&self, model: &ProtocolModel) -> Result<ResolvedModel> {
        resolve_with(model, self.feature_names(), &|record: &SplitRecord| {
            self.lookup
                .get(&record.lookup_id)
                .copied()
                .ok_or(Error::UnknownLookupId { party: 0, id: record.lookup_id })
        })
    }
}
