//! Dataset ingestion, `[1, 2]` normalization, one-hot targets and the
//! stratified 3:1 hold-out split.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Train sizes for the benchmark datasets at a 3:1 split. These win over
/// `round(3n/4)` when both name and pattern count match.
const KNOWN_TRAIN_SIZES: [(&str, usize, usize); 5] = [
    ("balance", 625, 469),
    ("cancer", 699, 525),
    ("pima", 768, 576),
    ("hypothyroid", 3772, 2829),
    ("waveform", 5000, 3750),
];

pub const DEFAULT_TRAIN_RATIO: f64 = 0.75;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ColumnRef {
    Index(usize),
    Name(String),
}

/// Describes how to read a delimited dataset file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub name: String,
    pub target_column: ColumnRef,
    /// Class labels in class-index order.
    pub class_labels: Vec<String>,
    #[serde(default)]
    pub categorical_columns: Vec<ColumnRef>,
    #[serde(default)]
    pub ignore_columns: Vec<ColumnRef>,
    #[serde(default = "default_true")]
    pub header: bool,
    /// Autodetected from the first line when absent (`,` or `;`).
    #[serde(default)]
    pub delimiter: Option<char>,
}

fn default_true() -> bool {
    true
}

impl Schema {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::ingestion(None, format!("bad schema: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::ingestion(None, format!("cannot read schema {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawDataset {
    pub name: String,
    pub feature_names: Vec<String>,
    pub class_labels: Vec<String>,
    /// `n` rows of `k` features.
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

impl RawDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_inputs(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_labels.len()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.n_classes()];
        for &c in &self.labels {
            counts[c] += 1;
        }
        counts
    }
}

fn is_missing(field: &str) -> bool {
    matches!(field, "" | "?" | "NA" | "na" | "NaN" | "nan")
}

fn resolve_column(col: &ColumnRef, header: Option<&[String]>, width: usize) -> Result<usize> {
    let idx = match col {
        ColumnRef::Index(i) => *i,
        ColumnRef::Name(name) => header
            .and_then(|h| h.iter().position(|c| c == name))
            .ok_or_else(|| Error::ingestion(None, format!("column {name:?} not found in header")))?,
    };
    if idx >= width {
        return Err(Error::ingestion(
            None,
            format!("column index {idx} out of range ({width} columns)"),
        ));
    }
    Ok(idx)
}

/// Reads a delimited file according to `schema`. Categorical columns are
/// expanded one-of-k (categories in sorted order) and class labels are
/// mapped to indices in schema order. Error rows are reported by 1-based
/// line number.
pub fn load_csv(path: impl AsRef<Path>, schema: &Schema) -> Result<RawDataset> {
    let path = path.as_ref();
    let text =
        fs::read_to_string(path).map_err(|e| Error::ingestion(None, format!("cannot read {}: {e}", path.display())))?;
    parse_delimited(&text, schema)
}

pub fn parse_delimited(text: &str, schema: &Schema) -> Result<RawDataset> {
    let delimiter = schema.delimiter.unwrap_or_else(|| {
        let first = text.lines().next().unwrap_or("");
        if first.matches(';').count() > first.matches(',').count() {
            ';'
        } else {
            ','
        }
    });
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .delimiter(delimiter as u8)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let mut records: Vec<(usize, Vec<String>)> = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let line = i + 1;
        let rec = rec.map_err(|e| Error::ingestion(Some(line), e.to_string()))?;
        if rec.iter().all(|f| f.is_empty()) {
            continue;
        }
        records.push((line, rec.iter().map(str::to_owned).collect()));
    }
    let header = if schema.header {
        if records.is_empty() {
            return Err(Error::ingestion(None, "file has no header"));
        }
        Some(records.remove(0).1)
    } else {
        None
    };
    if records.is_empty() {
        return Err(Error::ingestion(None, "file has no data rows"));
    }
    let width = header.as_ref().map_or(records[0].1.len(), Vec::len);
    let target = resolve_column(&schema.target_column, header.as_deref(), width)?;
    let categorical: BTreeSet<usize> = schema
        .categorical_columns
        .iter()
        .map(|c| resolve_column(c, header.as_deref(), width))
        .collect::<Result<_>>()?;
    let ignored: BTreeSet<usize> = schema
        .ignore_columns
        .iter()
        .map(|c| resolve_column(c, header.as_deref(), width))
        .collect::<Result<_>>()?;
    let label_index: HashMap<&str, usize> = schema
        .class_labels
        .iter()
        .enumerate()
        .map(|(i, l)| (l.as_str(), i))
        .collect();
    if schema.class_labels.len() < 2 {
        return Err(Error::ingestion(None, "schema must list at least 2 class labels"));
    }

    for (line, rec) in &records {
        if rec.len() != width {
            return Err(Error::ingestion(
                Some(*line),
                format!("expected {width} fields, found {}", rec.len()),
            ));
        }
        if let Some((col, _)) = rec.iter().enumerate().find(|(_, f)| is_missing(f)) {
            return Err(Error::ingestion(Some(*line), format!("missing value in column {col}")));
        }
    }

    let column_name = |c: usize| header.as_ref().map_or_else(|| format!("x{c}"), |h| h[c].clone());
    let categories: HashMap<usize, Vec<String>> = categorical
        .iter()
        .map(|&c| {
            let values: BTreeSet<&str> = records.iter().map(|(_, r)| r[c].as_str()).collect();
            (c, values.into_iter().map(str::to_owned).collect())
        })
        .collect();

    let feature_columns: Vec<usize> = (0..width).filter(|c| *c != target && !ignored.contains(c)).collect();
    let mut feature_names = Vec::new();
    for &c in &feature_columns {
        match categories.get(&c) {
            Some(values) => {
                for v in values {
                    feature_names.push(format!("{}={v}", column_name(c)));
                }
            }
            None => feature_names.push(column_name(c)),
        }
    }
    if feature_names.is_empty() {
        return Err(Error::ingestion(None, "no feature columns"));
    }

    let mut features = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    for (line, rec) in &records {
        let label = *label_index
            .get(rec[target].as_str())
            .ok_or_else(|| Error::ingestion(Some(*line), format!("unknown class label {:?}", rec[target])))?;
        let mut row = Vec::with_capacity(feature_names.len());
        for &c in &feature_columns {
            match categories.get(&c) {
                Some(values) => row.extend(values.iter().map(|v| f64::from(u8::from(*v == rec[c])))),
                None => {
                    let v: f64 = rec[c].parse().map_err(|_| {
                        Error::ingestion(
                            Some(*line),
                            format!("column {c}: cannot parse {:?} as a number", rec[c]),
                        )
                    })?;
                    if !v.is_finite() {
                        return Err(Error::ingestion(Some(*line), format!("column {c}: non-finite value")));
                    }
                    row.push(v);
                }
            }
        }
        features.push(row);
        labels.push(label);
    }

    Ok(RawDataset {
        name: schema.name.clone(),
        feature_names,
        class_labels: schema.class_labels.clone(),
        features,
        labels,
    })
}

/// `n x l` one-hot matrix.
pub fn one_hot(labels: &[usize], n_classes: usize) -> Result<Vec<Vec<f64>>> {
    labels
        .iter()
        .enumerate()
        .map(|(i, &c)| {
            if c >= n_classes {
                return Err(Error::precondition(format!(
                    "label {c} at row {i} outside [0, {n_classes})"
                )));
            }
            let mut row = vec![0.0; n_classes];
            row[c] = 1.0;
            Ok(row)
        })
        .collect()
}

/// Number of training patterns for a split of `n` patterns.
pub fn train_size(name: &str, n: usize, ratio: f64) -> usize {
    if (ratio - DEFAULT_TRAIN_RATIO).abs() < 1e-12 {
        let lower = name.to_ascii_lowercase();
        if let Some(&(_, _, train)) = KNOWN_TRAIN_SIZES
            .iter()
            .find(|(known, total, _)| *known == lower && *total == n)
        {
            return train;
        }
    }
    (ratio * n as f64).round() as usize
}

/// Splits class counts into train quotas proportional to class size
/// (largest remainder, ties to the lower class index).
pub fn stratified_quotas(class_counts: &[usize], train_total: usize) -> Vec<usize> {
    let n: usize = class_counts.iter().sum();
    let exact: Vec<f64> = class_counts
        .iter()
        .map(|&c| c as f64 * train_total as f64 / n as f64)
        .collect();
    let mut quotas: Vec<usize> = exact.iter().map(|q| q.floor() as usize).collect();
    let mut remaining = train_total - quotas.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..class_counts.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = exact[a] - exact[a].floor();
        let rb = exact[b] - exact[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &c in order.iter().cycle() {
        if remaining == 0 {
            break;
        }
        if quotas[c] < class_counts[c] {
            quotas[c] += 1;
            remaining -= 1;
        }
    }
    quotas
}

/// Stratified shuffle split. Returns sorted train and test index lists.
///
/// Every class must land at least one pattern in the training set. When
/// the test set is large enough to hold one pattern per class, every
/// class must also appear there.
pub fn holdout_split(raw: &RawDataset, ratio: f64, seed: u64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = raw.len();
    let l = raw.n_classes();
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::precondition(format!("split ratio {ratio} outside (0, 1)")));
    }
    if n < l {
        return Err(Error::precondition(format!("{n} patterns cannot cover {l} classes")));
    }
    let train_total = train_size(&raw.name, n, ratio);
    let test_total = n - train_total;
    let counts = raw.class_counts();
    let quotas = stratified_quotas(&counts, train_total);
    for (c, (&count, &quota)) in counts.iter().zip(&quotas).enumerate() {
        if quota == 0 {
            return Err(Error::precondition(format!(
                "class {:?} gets no training patterns",
                raw.class_labels[c]
            )));
        }
        if quota == count && test_total >= l {
            return Err(Error::precondition(format!(
                "class {:?} gets no test patterns",
                raw.class_labels[c]
            )));
        }
    }

    let mut rng = rng::seeded(seed);
    let mut train = Vec::with_capacity(train_total);
    let mut test = Vec::with_capacity(test_total);
    for (c, &quota) in quotas.iter().enumerate() {
        let mut members: Vec<usize> = (0..n).filter(|&i| raw.labels[i] == c).collect();
        members.shuffle(&mut rng);
        train.extend_from_slice(&members[..quota]);
        test.extend_from_slice(&members[quota..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

/// Per-feature affine map of the training range onto `[1, 2]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

impl Normalizer {
    pub fn fit(features: &[Vec<f64>], train: &[usize]) -> Result<Self> {
        let k = features.first().map_or(0, Vec::len);
        if train.is_empty() {
            return Err(Error::precondition("cannot normalize from an empty training set"));
        }
        let mut min = vec![f64::INFINITY; k];
        let mut max = vec![f64::NEG_INFINITY; k];
        for &i in train {
            for (j, &v) in features[i].iter().enumerate() {
                min[j] = min[j].min(v);
                max[j] = max[j].max(v);
            }
        }
        Ok(Normalizer { min, max })
    }

    /// Maps one value; values outside the training range are clamped and a
    /// constant training feature maps to 1.
    pub fn apply_one(&self, j: usize, x: f64) -> f64 {
        let span = self.max[j] - self.min[j];
        if span <= 0.0 {
            return 1.0;
        }
        (1.0 + (x - self.min[j]) / span).clamp(1.0, 2.0)
    }

    pub fn apply(&self, row: &[f64]) -> Vec<f64> {
        row.iter().enumerate().map(|(j, &x)| self.apply_one(j, x)).collect()
    }

    pub fn invert_one(&self, j: usize, y: f64) -> f64 {
        self.min[j] + (y - 1.0) * (self.max[j] - self.min[j])
    }
}

/// Normalized features plus targets for one side of a split. Also keeps
/// `ln x` for every feature so the forward pass needs one `exp` per
/// product unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PartitionRepr", into = "PartitionRepr")]
pub struct Partition {
    n_inputs: usize,
    n_classes: usize,
    features: Vec<f64>,
    log_features: Vec<f64>,
    targets: Vec<f64>,
    labels: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct PartitionRepr {
    n_inputs: usize,
    n_classes: usize,
    features: Vec<Vec<f64>>,
    targets: Vec<Vec<u8>>,
}

impl TryFrom<PartitionRepr> for Partition {
    type Error = Error;

    fn try_from(repr: PartitionRepr) -> Result<Self> {
        let mut labels = Vec::with_capacity(repr.targets.len());
        for (i, row) in repr.targets.iter().enumerate() {
            let valid = row.len() == repr.n_classes
                && row.iter().all(|&v| v <= 1)
                && row.iter().map(|&v| v as usize).sum::<usize>() == 1;
            if !valid {
                return Err(Error::ingestion(Some(i), "target row is not one-hot"));
            }
            labels.push(row.iter().position(|&v| v == 1).unwrap_or(0));
        }
        Partition::new(repr.n_inputs, repr.n_classes, repr.features, labels)
    }
}

impl From<Partition> for PartitionRepr {
    fn from(p: Partition) -> Self {
        PartitionRepr {
            n_inputs: p.n_inputs,
            n_classes: p.n_classes,
            features: p.features.chunks(p.n_inputs).map(<[f64]>::to_vec).collect(),
            targets: p
                .labels
                .iter()
                .map(|&c| (0..p.n_classes).map(|j| u8::from(j == c)).collect())
                .collect(),
        }
    }
}

impl Partition {
    /// `rows` must already be normalized (strictly positive).
    pub fn new(n_inputs: usize, n_classes: usize, rows: Vec<Vec<f64>>, labels: Vec<usize>) -> Result<Self> {
        if rows.len() != labels.len() {
            return Err(Error::precondition("feature and label counts differ"));
        }
        let targets: Vec<f64> = one_hot(&labels, n_classes)?.into_iter().flatten().collect();
        let mut features = Vec::with_capacity(rows.len() * n_inputs);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != n_inputs {
                return Err(Error::ingestion(
                    Some(i),
                    format!("expected {n_inputs} features, found {}", row.len()),
                ));
            }
            if let Some((index, &value)) = row.iter().enumerate().find(|(_, &v)| !(v > 0.0 && v.is_finite())) {
                return Err(Error::Domain { index, value });
            }
            features.extend(row);
        }
        let log_features = features.iter().map(|v| v.ln()).collect();
        Ok(Partition {
            n_inputs,
            n_classes,
            features,
            log_features,
            targets,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_inputs..(i + 1) * self.n_inputs]
    }

    pub(crate) fn log_row(&self, i: usize) -> &[f64] {
        &self.log_features[i * self.n_inputs..(i + 1) * self.n_inputs]
    }

    pub fn target_row(&self, i: usize) -> &[f64] {
        &self.targets[i * self.n_classes..(i + 1) * self.n_classes]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.features.chunks(self.n_inputs)
    }
}

/// A normalized train/test split, serialized as JSON so every worker loads
/// the same bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDataset {
    pub name: String,
    pub feature_names: Vec<String>,
    pub class_labels: Vec<String>,
    pub split_seed: u64,
    pub train_indices: Vec<usize>,
    pub test_indices: Vec<usize>,
    pub normalizer: Normalizer,
    pub train: Partition,
    pub test: Partition,
}

impl SplitDataset {
    /// Normalizes with training statistics and builds both partitions.
    pub fn from_indices(
        raw: &RawDataset,
        train_idx: Vec<usize>,
        test_idx: Vec<usize>,
        split_seed: u64,
    ) -> Result<Self> {
        let normalizer = Normalizer::fit(&raw.features, &train_idx)?;
        let build = |idx: &[usize]| {
            Partition::new(
                raw.n_inputs(),
                raw.n_classes(),
                idx.iter().map(|&i| normalizer.apply(&raw.features[i])).collect(),
                idx.iter().map(|&i| raw.labels[i]).collect(),
            )
        };
        let train = build(&train_idx)?;
        let test = build(&test_idx)?;
        Ok(SplitDataset {
            name: raw.name.clone(),
            feature_names: raw.feature_names.clone(),
            class_labels: raw.class_labels.clone(),
            split_seed,
            train_indices: train_idx,
            test_indices: test_idx,
            normalizer,
            train,
            test,
        })
    }

    pub fn from_raw(raw: &RawDataset, ratio: f64, seed: u64) -> Result<Self> {
        let (train, test) = holdout_split(raw, ratio, seed)?;
        Self::from_indices(raw, train, test, seed)
    }

    pub fn n_inputs(&self) -> usize {
        self.feature_names.len()
    }

    pub fn n_classes(&self) -> usize {
        self.class_labels.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)
            .map_err(|e| Error::ingestion(None, format!("cannot read split {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|e| Error::ingestion(None, format!("bad split {}: {e}", path.display())))
    }
}
