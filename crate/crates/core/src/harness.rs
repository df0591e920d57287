//! Evaluation: RMSE reports, representation caches, prediction files, and the
//! synthetic benchmark / ablation drivers built on top of them.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::Baseline;
use crate::data::{write_json, AccuracyVector, MetaSet};
use crate::error::{Error, Result};
use crate::metaset::{generate_corpus, CorpusConfig};
use crate::regressor::{train, ModelConfig, MultiBranchModel, TrainConfig, TrainOutcome};
use crate::representation::{extract_representation, ConfidenceGroup, GroupConfig, SetRepresentation};

pub const CATEGORY_POOLING: &str = "pooled over all (meta-set, defined category) pairs";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetResidual {
    pub id: String,
    /// Predicted minus true overall accuracy.
    pub overall: f64,
    pub categories: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub name: String,
    pub overall_rmse_pct: f64,
    pub category_rmse_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub overall_rmse_pct: f64,
    pub category_rmse_pct: f64,
    pub num_sets: usize,
    pub num_category_pairs: usize,
    /// Pairs with a defined truth but no prediction (estimators that saw no
    /// evidence for the category).
    pub skipped_category_pairs: usize,
    pub category_pooling: String,
    pub per_category_rmse_pct: Vec<Option<f64>>,
    pub residuals: Vec<SetResidual>,
    pub comparisons: Vec<ComparisonRow>,
    pub config: serde_json::Value,
}

fn rmse_pct(sum_sq: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        100.0 * (sum_sq / n as f64).sqrt()
    }
}

/// RMSE (in percentage points) of `predictions` against `truths`, matched by
/// position; residual ids are the positions.
pub fn evaluate(predictions: &[AccuracyVector], truths: &[AccuracyVector]) -> Result<EvalReport> {
    let ids: Vec<String> = (0..truths.len()).map(|i| i.to_string()).collect();
    evaluate_sets(&ids, predictions, truths)
}

pub fn evaluate_sets(ids: &[String], predictions: &[AccuracyVector], truths: &[AccuracyVector]) -> Result<EvalReport> {
    if predictions.len() != truths.len() {
        return Err(Error::LengthMismatch {
            what: "predictions vs truths",
            left: predictions.len(),
            right: truths.len(),
        });
    }
    if ids.len() != truths.len() {
        return Err(Error::LengthMismatch {
            what: "ids vs truths",
            left: ids.len(),
            right: truths.len(),
        });
    }
    let c = truths.first().map_or(0, AccuracyVector::num_categories);
    let mut overall_sq = 0.0;
    let mut pooled_sq = 0.0;
    let mut pairs = 0usize;
    let mut skipped = 0usize;
    let mut per_cat_sq = vec![0.0; c];
    let mut per_cat_n = vec![0usize; c];
    let mut residuals = Vec::with_capacity(truths.len());
    for ((id, pred), truth) in ids.iter().zip(predictions).zip(truths) {
        if pred.num_categories() != c || truth.num_categories() != c {
            return Err(Error::LengthMismatch {
                what: "category count",
                left: pred.num_categories().max(truth.num_categories()),
                right: c,
            });
        }
        let overall = pred.overall - truth.overall;
        overall_sq += overall * overall;
        let mut categories = vec![None; c];
        for (k, a) in truth.defined_categories() {
            match pred.per_category[k] {
                Some(p) => {
                    let r = p - a;
                    pooled_sq += r * r;
                    pairs += 1;
                    per_cat_sq[k] += r * r;
                    per_cat_n[k] += 1;
                    categories[k] = Some(r);
                }
                None => skipped += 1,
            }
        }
        residuals.push(SetResidual {
            id: id.clone(),
            overall,
            categories,
        });
    }
    Ok(EvalReport {
        overall_rmse_pct: rmse_pct(overall_sq, truths.len()),
        category_rmse_pct: rmse_pct(pooled_sq, pairs),
        num_sets: truths.len(),
        num_category_pairs: pairs,
        skipped_category_pairs: skipped,
        category_pooling: CATEGORY_POOLING.into(),
        per_category_rmse_pct: per_cat_sq
            .iter()
            .zip(&per_cat_n)
            .map(|(&s, &n)| (n > 0).then(|| rmse_pct(s, n)))
            .collect(),
        residuals,
        comparisons: Vec::new(),
        config: serde_json::Value::Null,
    })
}

impl EvalReport {
    pub fn row(&self, name: impl Into<String>) -> ComparisonRow {
        ComparisonRow {
            name: name.into(),
            overall_rmse_pct: self.overall_rmse_pct,
            category_rmse_pct: self.category_rmse_pct,
        }
    }

    /// Aligned text table: this report first, then the comparison rows.
    pub fn to_table(&self, name: &str) -> String {
        let mut rows = vec![self.row(name)];
        rows.extend(self.comparisons.iter().cloned());
        format_table(&rows)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), self)
    }
}

pub fn format_table(rows: &[ComparisonRow]) -> String {
    let width = rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(6);
    let mut out = format!("{:<width$}  {:>14}  {:>15}\n", "method", "overall RMSE %", "category RMSE %");
    for r in rows {
        let _ = writeln!(
            out,
            "{:<width$}  {:>14.2}  {:>15.2}",
            r.name, r.overall_rmse_pct, r.category_rmse_pct
        );
    }
    out
}

/// Representations of every meta-set, in input order.
pub fn extract_all(sets: &[MetaSet], cfg: &GroupConfig) -> Result<Vec<SetRepresentation>> {
    sets.par_iter()
        .map(|s| extract_representation(&s.matrix, cfg))
        .collect()
}

pub const REPS_FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedRepresentation {
    pub id: String,
    #[serde(flatten)]
    pub representation: SetRepresentation,
}

/// Cache of extracted representations for a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepresentationFile {
    pub format_version: u64,
    pub num_categories: usize,
    pub group_config: GroupConfig,
    pub representations: Vec<NamedRepresentation>,
}

impl RepresentationFile {
    pub fn build(sets: &[MetaSet], cfg: &GroupConfig) -> Result<Self> {
        let num_categories = sets.first().ok_or(Error::EmptyCorpus)?.num_categories();
        let reps = extract_all(sets, cfg)?;
        Ok(Self {
            format_version: REPS_FORMAT_VERSION,
            num_categories,
            group_config: cfg.clone(),
            representations: sets
                .iter()
                .zip(reps)
                .map(|(s, representation)| NamedRepresentation {
                    id: s.id.clone(),
                    representation,
                })
                .collect(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let version = value.get("format_version").and_then(serde_json::Value::as_u64);
        if version != Some(REPS_FORMAT_VERSION) {
            return Err(Error::Version {
                found: version.unwrap_or(0),
                expected: REPS_FORMAT_VERSION,
            });
        }
        let file: Self = serde_json::from_value(value)?;
        let g = file.group_config.num_groups();
        for r in &file.representations {
            r.representation.check_shape(g, file.num_categories)?;
        }
        Ok(file)
    }
}

/// Prediction rows as written to / read from a predictions CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRow {
    pub id: String,
    pub accuracy: AccuracyVector,
}

/// `id,overall,a0,...`; undefined per-category estimates are empty fields.
pub fn predictions_csv_string(rows: &[PredictionRow]) -> String {
    let c = rows.first().map_or(0, |r| r.accuracy.num_categories());
    let mut out = String::from("id,overall");
    for k in 0..c {
        let _ = write!(out, ",a{k}");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(out, "{},{:?}", r.id, r.accuracy.overall);
        for a in &r.accuracy.per_category {
            match a {
                Some(v) => {
                    let _ = write!(out, ",{v:?}");
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

pub fn save_predictions(rows: &[PredictionRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, predictions_csv_string(rows)).map_err(|e| Error::io(path, e))
}

pub fn load_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionRow>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(text.as_bytes());
    let header = reader.headers()?.clone();
    if header.get(0) != Some("id") || header.get(1) != Some("overall") {
        return Err(Error::MalformedRow {
            line: 1,
            reason: "predictions header must start with id,overall".into(),
        });
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != header.len() {
            return Err(Error::MalformedRow {
                line,
                reason: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        let number = |s: &str| {
            s.trim().parse::<f64>().map_err(|_| Error::MalformedRow {
                line,
                reason: format!("{s:?} is not a number"),
            })
        };
        let per_category = record
            .iter()
            .skip(2)
            .map(|f| if f.trim().is_empty() { Ok(None) } else { number(f).map(Some) })
            .collect::<Result<_>>()?;
        rows.push(PredictionRow {
            id: record[0].to_string(),
            accuracy: AccuracyVector {
                per_category,
                overall: number(&record[1])?,
            },
        });
    }
    Ok(rows)
}

/// Pairs each representation with its meta-set's accuracy.
pub fn training_pairs(reps: Vec<SetRepresentation>, sets: &[MetaSet]) -> Result<Vec<(SetRepresentation, AccuracyVector)>> {
    reps.into_iter()
        .zip(sets)
        .map(|(rep, set)| {
            let acc = set
                .accuracy
                .clone()
                .ok_or_else(|| Error::Config(format!("meta-set {} has no accuracy", set.id)))?;
            Ok((rep, acc))
        })
        .collect()
}

pub fn predict_all(model: &MultiBranchModel, reps: &[SetRepresentation]) -> Result<Vec<AccuracyVector>> {
    reps.par_iter().map(|r| model.predict(r)).collect()
}

pub fn truths(sets: &[MetaSet]) -> Result<Vec<AccuracyVector>> {
    sets.iter()
        .map(|s| {
            s.accuracy
                .clone()
                .ok_or_else(|| Error::Config(format!("meta-set {} has no accuracy", s.id)))
        })
        .collect()
}

pub fn ids(sets: &[MetaSet]) -> Vec<String> {
    sets.iter().map(|s| s.id.clone()).collect()
}

/// The five threshold/confidence baselines reported alongside the model.
pub fn standard_baselines() -> Vec<Baseline> {
    vec![
        Baseline::Ps { tau1: 0.8 },
        Baseline::Ps { tau1: 0.9 },
        Baseline::Es { tau2: 0.2 },
        Baseline::Es { tau2: 0.3 },
        Baseline::Ac,
    ]
}

pub fn evaluate_baseline(baseline: &Baseline, sets: &[MetaSet]) -> Result<EvalReport> {
    let preds: Vec<AccuracyVector> = sets.par_iter().map(|s| baseline.estimate(&s.matrix)).collect();
    evaluate_sets(&ids(sets), &preds, &truths(sets)?)
}

/// Trains on `train_sets` and evaluates on `test_sets` with one group
/// configuration.
pub fn train_and_evaluate(
    train_sets: &[MetaSet],
    test_sets: &[MetaSet],
    groups: &GroupConfig,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<(TrainOutcome, EvalReport)> {
    let mut mcfg = model_cfg.clone();
    mcfg.groups = groups.groups().to_vec();
    let pairs = training_pairs(extract_all(train_sets, groups)?, train_sets)?;
    let outcome = train(&pairs, train_cfg, &mcfg)?;
    let test_reps = extract_all(test_sets, groups)?;
    let preds = predict_all(&outcome.model, &test_reps)?;
    let mut report = evaluate_sets(&ids(test_sets), &preds, &truths(test_sets)?)?;
    report.config = serde_json::json!({
        "model_config": outcome.model.config,
        "group_config": groups,
        "train_config": train_cfg,
    });
    Ok((outcome, report))
}

/// Synthetic train/test benchmark: one generated corpus split into a
/// training prefix and a held-out suffix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Benchmark {
    pub corpus: CorpusConfig,
    pub num_train: usize,
    pub groups: GroupConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
}

impl Benchmark {
    /// Seed 42; 300 training and 100 test meta-sets; C = 10; N = 1000.
    pub fn standard() -> Self {
        let corpus = CorpusConfig {
            num_meta_sets: 400,
            num_instances: 1000,
            num_categories: 10,
            seed: 42,
            ..CorpusConfig::default()
        };
        Self {
            model: ModelConfig::new(corpus.num_categories, &ConfidenceGroup::ALL),
            corpus,
            num_train: 300,
            groups: GroupConfig::default(),
            train: TrainConfig {
                seed: 42,
                ..TrainConfig::default()
            },
        }
    }

    pub fn generate(&self) -> Result<(Vec<MetaSet>, Vec<MetaSet>)> {
        if self.num_train == 0 || self.num_train >= self.corpus.num_meta_sets {
            return Err(Error::Config(format!(
                "num_train must lie in 1..{}",
                self.corpus.num_meta_sets
            )));
        }
        let mut sets = generate_corpus(&self.corpus)?.sets;
        let test = sets.split_off(self.num_train);
        Ok((sets, test))
    }

    /// Trains the model and evaluates it and the standard baselines on the
    /// test split. Baseline rows are attached as comparisons.
    pub fn run(&self) -> Result<BenchmarkOutcome> {
        let (train_sets, test_sets) = self.generate()?;
        let (outcome, mut report) = train_and_evaluate(&train_sets, &test_sets, &self.groups, &self.model, &self.train)?;
        let mut baselines = Vec::new();
        for b in standard_baselines() {
            let r = evaluate_baseline(&b, &test_sets)?;
            report.comparisons.push(r.row(b.to_string()));
            baselines.push((b, r));
        }
        Ok(BenchmarkOutcome {
            model: outcome.model,
            loss_trace: outcome.loss_trace,
            report,
            baselines,
        })
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkOutcome {
    pub model: MultiBranchModel,
    pub loss_trace: Vec<f64>,
    pub report: EvalReport,
    pub baselines: Vec<(Baseline, EvalReport)>,
}

impl BenchmarkOutcome {
    pub fn baseline(&self, b: &Baseline) -> Option<&EvalReport> {
        self.baselines.iter().find(|(x, _)| x == b).map(|(_, r)| r)
    }
}

/// All seven nonempty subsets of {High, Medium, Low}, singletons first.
pub fn group_subsets() -> Vec<Vec<ConfidenceGroup>> {
    use ConfidenceGroup::*;
    vec![
        vec![High],
        vec![Medium],
        vec![Low],
        vec![Medium, Low],
        vec![High, Low],
        vec![High, Medium],
        vec![High, Medium, Low],
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub name: String,
    pub groups: Vec<ConfidenceGroup>,
    pub use_mean: bool,
    pub use_cov: bool,
    pub use_var: bool,
    pub overall_rmse_pct: f64,
    pub category_rmse_pct: f64,
}

impl AblationRow {
    fn from_report(name: String, mcfg: &ModelConfig, report: &EvalReport) -> Self {
        Self {
            name,
            groups: mcfg.groups.clone(),
            use_mean: mcfg.use_mean,
            use_cov: mcfg.use_cov,
            use_var: mcfg.use_var,
            overall_rmse_pct: report.overall_rmse_pct,
            category_rmse_pct: report.category_rmse_pct,
        }
    }

    pub fn comparison(&self) -> ComparisonRow {
        ComparisonRow {
            name: self.name.clone(),
            overall_rmse_pct: self.overall_rmse_pct,
            category_rmse_pct: self.category_rmse_pct,
        }
    }
}

/// One row per nonempty subset of confidence groups.
pub fn group_ablation(
    train_sets: &[MetaSet],
    test_sets: &[MetaSet],
    base: &GroupConfig,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<Vec<AblationRow>> {
    group_subsets()
        .into_iter()
        .map(|subset| {
            let groups = GroupConfig::new(base.split, &subset)?;
            let (outcome, report) = train_and_evaluate(train_sets, test_sets, &groups, model_cfg, train_cfg)?;
            let name = subset.iter().map(ToString::to_string).collect::<Vec<_>>().join("+");
            Ok(AblationRow::from_report(name, &outcome.model.config, &report))
        })
        .collect()
}

/// Full model and the three "without branch" variants.
pub fn branch_ablation(
    train_sets: &[MetaSet],
    test_sets: &[MetaSet],
    groups: &GroupConfig,
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
) -> Result<Vec<AblationRow>> {
    type Tweak = fn(&mut ModelConfig);
    let variants: [(&str, Tweak); 4] = [
        ("w/o mean", |c| c.use_mean = false),
        ("w/o cov", |c| c.use_cov = false),
        ("w/o var", |c| c.use_var = false),
        ("full", |_| {}),
    ];
    variants
        .iter()
        .map(|(name, tweak)| {
            let mut mcfg = model_cfg.clone();
            tweak(&mut mcfg);
            let (outcome, report) = train_and_evaluate(train_sets, test_sets, groups, &mcfg, train_cfg)?;
            Ok(AblationRow::from_report(name.to_string(), &outcome.model.config, &report))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn acc(overall: f64, cats: &[Option<f64>]) -> AccuracyVector {
        AccuracyVector {
            per_category: cats.to_vec(),
            overall,
        }
    }

    #[test]
    fn identical_predictions_have_zero_error() {
        let t = vec![acc(0.7, &[Some(0.6), Some(0.8)]), acc(0.4, &[None, Some(0.1)])];
        let r = evaluate(&t, &t).unwrap();
        assert_eq!(r.overall_rmse_pct, 0.0);
        assert_eq!(r.category_rmse_pct, 0.0);
        assert_eq!(r.num_category_pairs, 3);
    }

    #[test]
    fn single_set_error_in_points() {
        let r = evaluate(&[acc(0.8, &[Some(0.5), Some(0.5)])], &[acc(0.7, &[Some(0.5), Some(0.5)])]).unwrap();
        assert!((r.overall_rmse_pct - 10.0).abs() < 1e-12);
    }

    #[test]
    fn two_set_rmse() {
        let truth = [acc(0.5, &[Some(0.5), Some(0.5)]), acc(0.5, &[Some(0.5), Some(0.5)])];
        let pred = [acc(0.53, &[Some(0.5), Some(0.5)]), acc(0.46, &[Some(0.5), Some(0.5)])];
        let r = evaluate(&pred, &truth).unwrap();
        let expected = 100.0 * ((0.0009f64 + 0.0016) / 2.0).sqrt();
        assert!((r.overall_rmse_pct - expected).abs() < 1e-9, "{}", r.overall_rmse_pct);
        assert!((r.overall_rmse_pct - 3.5355).abs() < 1e-4);
    }

    #[test]
    fn category_pairs_are_pooled() {
        let truth = [acc(0.5, &[Some(0.5), None]), acc(0.5, &[Some(0.5), Some(0.5)])];
        let pred = [acc(0.5, &[Some(0.6), Some(0.9)]), acc(0.5, &[Some(0.5), None])];
        let r = evaluate(&pred, &truth).unwrap();
        assert_eq!(r.num_category_pairs, 2);
        assert_eq!(r.skipped_category_pairs, 1);
        let expected = 100.0 * (0.01f64 / 2.0).sqrt();
        assert!((r.category_rmse_pct - expected).abs() < 1e-9);
        assert_eq!(r.per_category_rmse_pct[1], None);
    }

    #[test]
    fn length_mismatch_rejected() {
        let t = vec![acc(0.7, &[Some(0.6), Some(0.8)])];
        assert!(matches!(evaluate(&[], &t), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn predictions_csv_round_trip() {
        let rows = vec![
            PredictionRow {
                id: "a".into(),
                accuracy: acc(0.1 + 0.2, &[Some(1.0 / 3.0), None]),
            },
            PredictionRow {
                id: "b".into(),
                accuracy: acc(0.5, &[Some(0.0), Some(1.0)]),
            },
        ];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.csv");
        save_predictions(&rows, &path).unwrap();
        assert!(fs::read_to_string(&path).unwrap().starts_with("id,overall,a0,a1\n"));
        assert_eq!(load_predictions(&path).unwrap(), rows);
    }

    #[test]
    fn table_has_one_line_per_row() {
        let mut r = evaluate(&[acc(0.8, &[Some(0.5), Some(0.5)])], &[acc(0.7, &[Some(0.5), Some(0.5)])]).unwrap();
        r.comparisons.push(ComparisonRow {
            name: "AC".into(),
            overall_rmse_pct: 1.234,
            category_rmse_pct: 5.0,
        });
        let table = r.to_table("model");
        assert_eq!(table.lines().count(), 3);
        assert!(table.contains("10.00"));
        assert!(table.contains("1.23"));
    }

    #[test]
    fn seven_group_subsets() {
        let subsets = group_subsets();
        assert_eq!(subsets.len(), 7);
        let mut sorted = subsets.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 7);
    }
}
