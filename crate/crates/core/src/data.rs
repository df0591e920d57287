//! Datasets, meta-sets and accuracy targets.
//!
//! A dataset is represented by the softmax outputs of the evaluated classifier,
//! one row per instance. Labels are optional: they exist for synthetic or
//! validation-derived meta-sets and are absent for the unlabeled sets whose
//! accuracy we want to predict.
//!
//! On disk a dataset is a CSV file (`label,c0,...` or `c0,...`), and a corpus
//! of meta-sets is a directory of such files plus a JSON manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accepted deviation of a row sum from 1.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;

/// Rows closer to 1 than this are kept as-is; others are divided by their sum.
const RENORMALIZE_THRESHOLD: f64 = 1e-12;

pub const MANIFEST_FORMAT_VERSION: u64 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";

/// N×C row-stochastic matrix of softmax outputs.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceMatrix {
    values: Vec<f64>,
    num_instances: usize,
    num_categories: usize,
}

#[derive(Debug)]
enum RowProblem {
    Entry(String),
    Sum(f64),
}

fn check_row(row: &[f64]) -> std::result::Result<f64, RowProblem> {
    for (c, &v) in row.iter().enumerate() {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(RowProblem::Entry(format!("entry c{c} = {v} outside [0,1]")));
        }
    }
    let sum: f64 = row.iter().sum();
    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(RowProblem::Sum(sum));
    }
    Ok(sum)
}

fn renormalize(row: &mut [f64], sum: f64) {
    if (sum - 1.0).abs() > RENORMALIZE_THRESHOLD {
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
}

impl ConfidenceMatrix {
    /// Builds a matrix from row-major values, validating every row.
    pub fn new(values: Vec<f64>, num_instances: usize, num_categories: usize) -> Result<Self> {
        if num_categories < 2 {
            return Err(Error::TooFewCategories {
                got: num_categories,
            });
        }
        if num_instances < 3 {
            return Err(Error::TooFewInstances { got: num_instances });
        }
        if values.len() != num_instances * num_categories {
            return Err(Error::LengthMismatch {
                what: "matrix values vs N*C",
                left: values.len(),
                right: num_instances * num_categories,
            });
        }
        let mut values = values;
        for (i, row) in values.chunks_mut(num_categories).enumerate() {
            match check_row(row) {
                Ok(sum) => renormalize(row, sum),
                Err(RowProblem::Entry(msg)) => {
                    return Err(Error::InvalidMatrix(format!("row {i}: {msg}")))
                }
                Err(RowProblem::Sum(sum)) => {
                    return Err(Error::InvalidMatrix(format!(
                        "row {i}: row-sum violation, sums to {sum}"
                    )))
                }
            }
        }
        Ok(Self {
            values,
            num_instances,
            num_categories,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let c = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != c) {
            return Err(Error::LengthMismatch {
                what: "row width",
                left: bad.len(),
                right: c,
            });
        }
        Self::new(rows.concat(), rows.len(), c)
    }

    pub fn num_instances(&self) -> usize {
        self.num_instances
    }

    pub fn num_categories(&self) -> usize {
        self.num_categories
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.num_categories;
        &self.values[i * c..(i + 1) * c]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks(self.num_categories)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Predicted category of instance `i`; ties go to the lowest index.
    pub fn predicted(&self, i: usize) -> usize {
        argmax(self.row(i))
    }

    /// Returns the matrix with rows reordered so that row `k` is old row `order[k]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for &i in order {
            values.extend_from_slice(self.row(i));
        }
        Self {
            values,
            num_instances: order.len(),
            num_categories: self.num_categories,
        }
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (c, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = c;
        }
    }
    best
}

/// Ground-truth category indices, 0-based.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelVector(Vec<usize>);

impl LabelVector {
    pub fn new(labels: Vec<usize>, num_categories: usize) -> Result<Self> {
        if let Some((i, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= num_categories) {
            return Err(Error::LabelOutOfRange {
                line: i as u64,
                label,
                num_categories,
            });
        }
        Ok(Self(labels))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Per-category and overall accuracy. `None` marks a category that has no
/// instances (or, for estimators, no evidence) and is excluded from losses
/// and error metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyVector {
    pub per_category: Vec<Option<f64>>,
    pub overall: f64,
}

impl AccuracyVector {
    pub fn num_categories(&self) -> usize {
        self.per_category.len()
    }

    pub fn defined_categories(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.per_category
            .iter()
            .enumerate()
            .filter_map(|(c, a)| a.map(|a| (c, a)))
    }
}

/// Accuracy of argmax predictions against `labels`.
pub fn compute_accuracy(matrix: &ConfidenceMatrix, labels: &LabelVector) -> Result<AccuracyVector> {
    if labels.len() != matrix.num_instances() {
        return Err(Error::LengthMismatch {
            what: "labels vs matrix rows",
            left: labels.len(),
            right: matrix.num_instances(),
        });
    }
    let c = matrix.num_categories();
    let mut totals = vec![0usize; c];
    let mut hits = vec![0usize; c];
    for (i, &y) in labels.as_slice().iter().enumerate() {
        if y >= c {
            return Err(Error::LabelOutOfRange {
                line: i as u64,
                label: y,
                num_categories: c,
            });
        }
        totals[y] += 1;
        if matrix.predicted(i) == y {
            hits[y] += 1;
        }
    }
    let correct: usize = hits.iter().sum();
    Ok(AccuracyVector {
        per_category: totals
            .iter()
            .zip(&hits)
            .map(|(&t, &h)| (t > 0).then(|| h as f64 / t as f64))
            .collect(),
        overall: correct as f64 / matrix.num_instances() as f64,
    })
}

/// One dataset variant: confidences, optional labels, and its accuracy.
#[derive(Debug, Clone, PartialEq)]
pub struct MetaSet {
    pub id: String,
    pub matrix: ConfidenceMatrix,
    pub labels: Option<LabelVector>,
    pub accuracy: Option<AccuracyVector>,
}

impl MetaSet {
    /// A labeled meta-set; the accuracy is derived from the labels.
    pub fn labeled(id: impl Into<String>, matrix: ConfidenceMatrix, labels: LabelVector) -> Result<Self> {
        let accuracy = compute_accuracy(&matrix, &labels)?;
        Ok(Self {
            id: id.into(),
            matrix,
            labels: Some(labels),
            accuracy: Some(accuracy),
        })
    }

    pub fn unlabeled(id: impl Into<String>, matrix: ConfidenceMatrix) -> Self {
        Self {
            id: id.into(),
            matrix,
            labels: None,
            accuracy: None,
        }
    }

    pub fn num_categories(&self) -> usize {
        self.matrix.num_categories()
    }
}

/// Reads a confidence CSV. The label column is optional and, when present,
/// must be the first column named `label`.
pub fn load_confidence_csv(path: impl AsRef<Path>) -> Result<MetaSet> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_confidence_csv(&text, id)
}

/// Parses confidence CSV text; see [`load_confidence_csv`].
pub fn parse_confidence_csv(text: &str, id: impl Into<String>) -> Result<MetaSet> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    let has_label = header.get(0) == Some("label");
    let offset = usize::from(has_label);
    let num_categories = header.len().saturating_sub(offset);
    for (c, name) in header.iter().skip(offset).enumerate() {
        if name != format!("c{c}") {
            return Err(Error::MalformedRow {
                line: 1,
                reason: format!("header column {} is {name:?}, expected \"c{c}\"", c + offset),
            });
        }
    }
    if num_categories < 2 {
        return Err(Error::TooFewCategories { got: num_categories });
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut record = csv::StringRecord::new();
    loop {
        let line = reader.position().line() + 1;
        if !reader.read_record(&mut record)? {
            break;
        }
        let line = record.position().map_or(line, |p| p.line());
        if record.len() != header.len() {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        if has_label {
            let raw = &record[0];
            let label: usize = raw.parse().map_err(|_| Error::MalformedRow {
                line,
                reason: format!("label {raw:?} is not a non-negative integer"),
            })?;
            if label >= num_categories {
                return Err(Error::LabelOutOfRange {
                    line,
                    label,
                    num_categories,
                });
            }
            labels.push(label);
        }
        let start = values.len();
        for field in record.iter().skip(offset) {
            let v: f64 = field.parse().map_err(|_| Error::MalformedRow {
                line,
                reason: format!("{field:?} is not a number"),
            })?;
            values.push(v);
        }
        let row = &mut values[start..];
        match check_row(row) {
            Ok(sum) => renormalize(row, sum),
            Err(RowProblem::Entry(reason)) => return Err(Error::MalformedRow { line, reason }),
            Err(RowProblem::Sum(sum)) => return Err(Error::RowSum { line, sum }),
        }
    }

    let n = values.len() / num_categories;
    if n < 3 {
        return Err(Error::TooFewInstances { got: n });
    }
    let matrix = ConfidenceMatrix::new(values, n, num_categories)?;
    if has_label {
        MetaSet::labeled(id, matrix, LabelVector(labels))
    } else {
        Ok(MetaSet::unlabeled(id, matrix))
    }
}

/// Renders a meta-set as confidence CSV text. Values use the shortest
/// representation that parses back to the identical `f64`.
pub fn confidence_csv_string(set: &MetaSet) -> String {
    let c = set.matrix.num_categories();
    let mut out = String::new();
    let names: Vec<String> = (0..c).map(|k| format!("c{k}")).collect();
    if set.labels.is_some() {
        out.push_str("label,");
    }
    out.push_str(&names.join(","));
    out.push('\n');
    for (i, row) in set.matrix.rows().enumerate() {
        if let Some(labels) = &set.labels {
            out.push_str(&labels.as_slice()[i].to_string());
            out.push(',');
        }
        let fields: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn save_confidence_csv(set: &MetaSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, confidence_csv_string(set)).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub path: String,
    pub overall_acc: Option<f64>,
    pub category_acc: Vec<Option<f64>>,
}

impl ManifestEntry {
    pub fn accuracy(&self) -> Option<AccuracyVector> {
        self.overall_acc.map(|overall| AccuracyVector {
            per_category: self.category_acc.clone(),
            overall,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u64,
    pub num_categories: usize,
    pub meta_sets: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        if manifest.format_version != MANIFEST_FORMAT_VERSION {
            return Err(Error::Version {
                found: manifest.format_version,
                expected: MANIFEST_FORMAT_VERSION,
            });
        }
        Ok(manifest)
    }

    pub fn entry(&self, id: &str) -> Option<&ManifestEntry> {
        self.meta_sets.iter().find(|e| e.id == id)
    }
}

/// Builds the manifest describing `corpus`, with one CSV path per set.
pub fn manifest_for(corpus: &[MetaSet]) -> Result<Manifest> {
    let first = corpus.first().ok_or(Error::EmptyCorpus)?.num_categories();
    if let Some(other) = corpus.iter().map(MetaSet::num_categories).find(|&c| c != first) {
        return Err(Error::MixedCategories { first, other });
    }
    Ok(Manifest {
        format_version: MANIFEST_FORMAT_VERSION,
        num_categories: first,
        meta_sets: corpus
            .iter()
            .map(|set| ManifestEntry {
                id: set.id.clone(),
                path: format!("{}.csv", set.id),
                overall_acc: set.accuracy.as_ref().map(|a| a.overall),
                category_acc: set
                    .accuracy
                    .as_ref()
                    .map_or_else(|| vec![None; first], |a| a.per_category.clone()),
            })
            .collect(),
    })
}

/// Writes one CSV per meta-set plus `manifest.json` into `dir`, returning the
/// manifest path.
pub fn save_corpus(corpus: &[MetaSet], dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    let manifest = manifest_for(corpus)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (set, entry) in corpus.iter().zip(&manifest.meta_sets) {
        save_confidence_csv(set, dir.join(&entry.path))?;
    }
    let path = dir.join(MANIFEST_FILE);
    write_json(&path, &manifest)?;
    Ok(path)
}

/// Loads a corpus from a manifest file or a directory containing one.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<(Manifest, Vec<MetaSet>)> {
    let path = path.as_ref();
    let manifest_path = if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    };
    let manifest = Manifest::load(&manifest_path)?;
    let base = manifest_path.parent().unwrap_or(Path::new("."));
    let mut sets = Vec::with_capacity(manifest.meta_sets.len());
    for entry in &manifest.meta_sets {
        let mut set = load_confidence_csv(base.join(&entry.path))?;
        set.id = entry.id.clone();
        if set.num_categories() != manifest.num_categories {
            return Err(Error::MixedCategories {
                first: manifest.num_categories,
                other: set.num_categories(),
            });
        }
        match (&set.accuracy, entry.accuracy()) {
            (Some(computed), Some(listed)) if *computed != listed => {
                return Err(Error::Config(format!(
                    "manifest accuracy for {} disagrees with its labels",
                    entry.id
                )))
            }
            (None, listed) => set.accuracy = listed,
            _ => {}
        }
        sets.push(set);
    }
    Ok((manifest, sets))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
