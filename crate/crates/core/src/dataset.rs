//! Tabular ingestion, vertical partitioning, sample-id alignment and
//! quantile binning.
//!
//! A dataset enters as one CSV, is split column-wise across parties (the
//! active party keeps the label), aligned on the shared sample-id column,
//! and finally reduced per feature to small bin indices against quantile
//! cut points. Missing cells are carried as NaN all the way to a dedicated
//! missing bin instead of being dropped.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Opaque feature identifier, unique across all parties of an experiment.
///
/// Codes are assigned in column order at partition time; the code-to-name
/// mapping stays with the owning party.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FeatureCode(pub u32);

impl fmt::Display for FeatureCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "f{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PartyRole {
    Active,
    Passive,
}

/// Identity of one participant. Index 0 is the active party by convention.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PartyId {
    pub index: u16,
    pub role: PartyRole,
}

impl PartyId {
    pub fn active() -> Self {
        PartyId { index: 0, role: PartyRole::Active }
    }

    pub fn passive(index: u16) -> Self {
        PartyId { index, role: PartyRole::Passive }
    }

    pub fn is_active(&self) -> bool {
        self.role == PartyRole::Active
    }
}

impl fmt::Display for PartyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.role {
            PartyRole::Active => write!(f, "active#{}", self.index),
            PartyRole::Passive => write!(f, "passive#{}", self.index),
        }
    }
}

/// Column roles for CSV ingestion. Columns not named here are features.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CsvSchema {
    /// Sample-id column name. When absent, row order becomes the id.
    pub id_column: Option<String>,
    /// Binary {0,1} label column name. When absent the table is unlabeled.
    pub label_column: Option<String>,
}

/// One feature column; missing cells are NaN.
#[derive(Debug, Clone)]
pub struct RawColumn {
    pub name: String,
    pub values: Vec<f64>,
}

impl RawColumn {
    pub fn missing_count(&self) -> usize {
        self.values.iter().filter(|v| v.is_nan()).count()
    }
}

/// Typed table produced by [`load_csv`]: one id per row, feature columns,
/// and an optional binary label column.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub sample_ids: Vec<u64>,
    pub features: Vec<RawColumn>,
    pub labels: Option<Vec<f64>>,
    pub label_name: Option<String>,
}

impl RawTable {
    pub fn n_rows(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.len()
    }

    /// Row subset in the order given; used for train/test splits.
    pub fn select_rows(&self, rows: &[usize]) -> Result<RawTable> {
        let pick = |v: &[f64]| -> Vec<f64> { rows.iter().map(|&r| v[r]).collect() };
        for &r in rows {
            if r >= self.n_rows() {
                return Err(Error::RowOutOfRange { row: r, rows: self.n_rows() });
            }
        }
        Ok(RawTable {
            sample_ids: rows.iter().map(|&r| self.sample_ids[r]).collect(),
            features: self
                .features
                .iter()
                .map(|c| RawColumn { name: c.name.clone(), values: pick(&c.values) })
                .collect(),
            labels: self.labels.as_deref().map(pick),
            label_name: self.label_name.clone(),
        })
    }
}

fn is_missing_token(s: &str) -> bool {
    let t = s.trim();
    t.is_empty() || t.eq_ignore_ascii_case("na") || t.eq_ignore_ascii_case("nan") || t == "?"
}

/// Stable 64-bit FNV-1a, used to map non-numeric sample ids into the id
/// space shared by all parties.
fn hash_id(s: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in s.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

fn parse_sample_id(s: &str) -> u64 {
    let t = s.trim();
    t.parse::<u64>().unwrap_or_else(|_| hash_id(t))
}

/// Read a CSV (header row, UTF-8) into a typed table.
///
/// Missing cells (empty, `NA`, `NaN`, `?`) are flagged as NaN, not dropped.
/// The label column must contain only 0 or 1.
pub fn load_csv<P: AsRef<Path>>(path: P, schema: &CsvSchema) -> Result<RawTable> {
    let file = std::fs::File::open(path.as_ref())?;
    load_csv_reader(file, schema)
}

/// Same as [`load_csv`] over any reader.
pub fn load_csv_reader<R: Read>(reader: R, schema: &CsvSchema) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);

    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::CsvParse { row: 1, column: String::new(), message: e.to_string() })?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let id_idx = match &schema.id_column {
        Some(name) => Some(headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::CsvParse {
                row: 1,
                column: name.clone(),
                message: "id column not found in header".into(),
            }
        })?),
        None => None,
    };
    let label_idx = match &schema.label_column {
        Some(name) => Some(headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::CsvParse {
                row: 1,
                column: name.clone(),
                message: "label column not found in header".into(),
            }
        })?),
        None => None,
    };

    let feature_idx: Vec<usize> = (0..headers.len())
        .filter(|i| Some(*i) != id_idx && Some(*i) != label_idx)
        .collect();

    let mut sample_ids = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    let mut features: Vec<RawColumn> = feature_idx
        .iter()
        .map(|&i| RawColumn { name: headers[i].clone(), values: Vec::new() })
        .collect();

    for (rec_no, record) in rdr.records().enumerate() {
        // header is file row 1, first data record is file row 2
        let file_row = rec_no + 2;
        let record = record.map_err(|e| Error::CsvParse {
            row: file_row,
            column: String::new(),
            message: e.to_string(),
        })?;

        match id_idx {
            Some(i) => sample_ids.push(parse_sample_id(&record[i])),
            None => sample_ids.push(rec_no as u64),
        }

        if let Some(i) = label_idx {
            let cell = record[i].trim();
            if is_missing_token(cell) {
                return Err(Error::NonBinaryLabel { row: file_row, value: f64::NAN });
            }
            let v: f64 = cell.parse().map_err(|_| Error::CsvParse {
                row: file_row,
                column: headers[i].clone(),
                message: format!("cannot parse `{cell}` as a number"),
            })?;
            if v != 0.0 && v != 1.0 {
                return Err(Error::NonBinaryLabel { row: file_row, value: v });
            }
            labels.push(v);
        }

        for (slot, &i) in feature_idx.iter().enumerate() {
            let cell = record[i].trim();
            let v = if is_missing_token(cell) {
                f64::NAN
            } else {
                cell.parse().map_err(|_| Error::CsvParse {
                    row: file_row,
                    column: headers[i].clone(),
                    message: format!("cannot parse `{cell}` as a number"),
                })?
            };
            features[slot].values.push(v);
        }
    }

    Ok(RawTable {
        sample_ids,
        features,
        labels: label_idx.map(|_| labels),
        label_name: label_idx.map(|i| headers[i].clone()),
    })
}

/// One feature column owned by a party, addressed by its opaque code.
#[derive(Debug, Clone)]
pub struct FeatureColumn {
    pub code: FeatureCode,
    pub name: String,
    pub values: Vec<f64>,
}

/// The slice of the dataset one party holds: its feature columns, the
/// shared sample-id column, and (active party only) the labels.
#[derive(Debug, Clone)]
pub struct PartyTable {
    pub party: PartyId,
    pub sample_ids: Vec<u64>,
    pub features: Vec<FeatureColumn>,
    pub labels: Option<Vec<f64>>,
}

impl PartyTable {
    pub fn n_rows(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn feature_codes(&self) -> Vec<FeatureCode> {
        self.features.iter().map(|f| f.code).collect()
    }

    pub fn feature(&self, code: FeatureCode) -> Option<&FeatureColumn> {
        self.features.iter().find(|f| f.code == code)
    }
}

/// Which feature codes each party owns.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerticalPartition {
    pub party_id: PartyId,
    pub feature_codes: Vec<FeatureCode>,
    pub column_count: usize,
}

/// Split a table column-wise across parties.
///
/// `plan[i]` is the number of feature columns party `i` receives, in the
/// table's column order. Party 0 is the active party and keeps the label;
/// every party keeps the sample-id column.
pub fn partition_vertically(table: &RawTable, plan: &[usize]) -> Result<Vec<PartyTable>> {
    let total: usize = plan.iter().sum();
    if plan.is_empty() || total != table.n_features() {
        return Err(Error::PartitionPlan { expected: table.n_features(), got: total });
    }

    let mut parties = Vec::with_capacity(plan.len());
    let mut next = 0usize;
    for (idx, &count) in plan.iter().enumerate() {
        let party = if idx == 0 {
            PartyId::active()
        } else {
            PartyId::passive(idx as u16)
        };
        let features = (next..next + count)
            .map(|col| FeatureColumn {
                code: FeatureCode(col as u32),
                name: table.features[col].name.clone(),
                values: table.features[col].values.clone(),
            })
            .collect();
        next += count;
        parties.push(PartyTable {
            party,
            sample_ids: table.sample_ids.clone(),
            features,
            labels: if idx == 0 { table.labels.clone() } else { None },
        });
    }
    Ok(parties)
}

/// The sample ids common to all parties, in the shared deterministic order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignedIndex {
    pub sample_ids: Vec<u64>,
}

impl AlignedIndex {
    pub fn row_count(&self) -> usize {
        self.sample_ids.len()
    }
}

/// Intersect all parties' id sets and keep only the aligned rows,
/// reordered identically (ascending id) at every party.
///
/// This simulates the private-set-intersection step: only hashed ids are
/// compared, never feature values.
pub fn align_ids(tables: Vec<PartyTable>) -> Result<(AlignedIndex, Vec<PartyTable>)> {
    let mut common: Option<HashSet<u64>> = None;
    for t in &tables {
        let mut set = HashSet::with_capacity(t.sample_ids.len());
        for &id in &t.sample_ids {
            if !set.insert(id) {
                return Err(Error::DuplicateSampleId { party: t.party.index, id });
            }
        }
        common = Some(match common {
            None => set,
            Some(prev) => prev.intersection(&set).copied().collect(),
        });
    }
    let common = common.unwrap_or_default();
    if common.is_empty() {
        return Err(Error::EmptyIdIntersection);
    }

    let mut ordered: Vec<u64> = common.into_iter().collect();
    ordered.sort_unstable();

    let aligned = AlignedIndex { sample_ids: ordered.clone() };
    let tables = tables
        .into_iter()
        .map(|t| {
            let pos: HashMap<u64, usize> =
                t.sample_ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
            let take: Vec<usize> = ordered.iter().map(|id| pos[id]).collect();
            PartyTable {
                party: t.party,
                sample_ids: ordered.clone(),
                features: t
                    .features
                    .iter()
                    .map(|f| FeatureColumn {
                        code: f.code,
                        name: f.name.clone(),
                        values: take.iter().map(|&i| f.values[i]).collect(),
                    })
                    .collect(),
                labels: t
                    .labels
                    .as_ref()
                    .map(|l| take.iter().map(|&i| l[i]).collect()),
            }
        })
        .collect();

    Ok((aligned, tables))
}

/// Quantile cut points of one feature. Values bin to the smallest cut not
/// below them; values above the last cut go to the overflow bin and NaN to
/// the trailing missing bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileBins {
    pub feature: FeatureCode,
    /// Strictly ascending interior thresholds.
    pub cut_points: Vec<f64>,
}

impl QuantileBins {
    /// Number of non-missing bins: one per cut plus the overflow bin.
    pub fn value_bins(&self) -> u16 {
        (self.cut_points.len() + 1) as u16
    }

    pub fn missing_bin(&self) -> u16 {
        self.value_bins()
    }

    /// Total bin count including the missing bin.
    pub fn bin_count(&self) -> u16 {
        self.value_bins() + 1
    }

    /// Bin index for a raw value: smallest `i` with `v <= cut_points[i]`,
    /// the overflow bin past the last cut, the missing bin for NaN.
    pub fn bin_of(&self, v: f64) -> u16 {
        if v.is_nan() {
            return self.missing_bin();
        }
        // cut_points is ascending, so partition_point finds the first cut >= v
        self.cut_points.partition_point(|c| *c < v) as u16
    }

    /// Threshold value recorded for a split at `bin` (must be an interior bin).
    pub fn cut_value(&self, bin: u16) -> Option<f64> {
        self.cut_points.get(bin as usize).copied()
    }
}

/// Empirical quantile with linear interpolation between order statistics.
/// `sorted` must be ascending and non-empty, `q` in [0,1].
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = q * (n - 1) as f64;
    let lo = h.floor() as usize;
    if lo + 1 >= n {
        return sorted[n - 1];
    }
    sorted[lo] + (h - lo as f64) * (sorted[lo + 1] - sorted[lo])
}

/// Compute per-feature quantile cut points from the given rows.
///
/// Cuts sit at fractions i/L for i = 1..L-1 over the non-missing values,
/// deduplicated to stay strictly ascending. An all-missing feature yields
/// no cuts, so every row lands in its missing bin.
pub fn compute_bins(table: &PartyTable, l: usize, rows: &[usize]) -> Result<Vec<QuantileBins>> {
    if l < 1 {
        return Err(Error::InvalidBinCount(l));
    }
    if rows.is_empty() {
        return Err(Error::EmptyRows);
    }
    let n_rows = table.n_rows();
    if let Some(&bad) = rows.iter().find(|&&r| r >= n_rows) {
        return Err(Error::RowOutOfRange { row: bad, rows: n_rows });
    }

    let mut out = Vec::with_capacity(table.features.len());
    for feat in &table.features {
        let mut vals: Vec<f64> = rows
            .iter()
            .map(|&r| feat.values[r])
            .filter(|v| !v.is_nan())
            .collect();
        vals.sort_unstable_by(|a, b| a.partial_cmp(b).expect("no NaN after filter"));

        let mut cuts = Vec::new();
        if !vals.is_empty() {
            for i in 1..l {
                let c = quantile_sorted(&vals, i as f64 / l as f64);
                if cuts.last().is_none_or(|&prev| c > prev) {
                    cuts.push(c);
                }
            }
            if cuts.is_empty() {
                // constant column: a single cut at the constant keeps one
                // populated bin plus an (empty) overflow bin
                cuts.push(vals[0]);
            }
        }
        out.push(QuantileBins { feature: feat.code, cut_points: cuts });
    }
    Ok(out)
}

/// One feature column reduced to bin indices.
#[derive(Debug, Clone)]
pub struct BinnedColumn {
    pub code: FeatureCode,
    pub n_bins: u16,
    pub bins: Vec<u16>,
}

/// A party's feature matrix as bin indices, row-aligned with the
/// [`AlignedIndex`]. Immutable once built.
#[derive(Debug, Clone)]
pub struct BinnedDataset {
    pub party: PartyId,
    pub columns: Vec<BinnedColumn>,
    pub row_count: usize,
}

impl BinnedDataset {
    pub fn column(&self, code: FeatureCode) -> Option<&BinnedColumn> {
        self.columns.iter().find(|c| c.code == code)
    }
}

/// Map every value of the party's table to its bin index.
pub fn apply_bins(table: &PartyTable, bins: &[QuantileBins]) -> Result<BinnedDataset> {
    let columns = table
        .features
        .iter()
        .map(|feat| {
            let qb = bins
                .iter()
                .find(|b| b.feature == feat.code)
                .ok_or_else(|| Error::InvalidConfig(format!("no bins for feature {}", feat.code)))?;
            Ok(BinnedColumn {
                code: feat.code,
                n_bins: qb.bin_count(),
                bins: feat.values.iter().map(|&v| qb.bin_of(v)).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BinnedDataset { party: table.party, columns, row_count: table.n_rows() })
}
