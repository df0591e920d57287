//! Synthetic meta-sets from a parametric model of classifier outputs.
//!
//! Each instance gets a label from the class prior and logits
//! `signal * e_y + beta * B[y, :] + noise * eps` with standard normal `eps`;
//! its confidence vector is `softmax(logits / temperature)`. Sampling the
//! shift parameters per meta-set yields corpora whose true accuracies range
//! from near chance to near perfect.

use std::fs;
use std::path::Path;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{manifest_for, ConfidenceMatrix, LabelVector, Manifest, MetaSet};
use crate::error::{Error, Result};

const MAX_LABEL_DRAWS: usize = 10_000;

/// Parameters of one simulated distribution shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftParams {
    /// Logit boost of the true category.
    pub signal: f64,
    /// Standard deviation of per-coordinate logit noise.
    pub noise: f64,
    pub temperature: f64,
    /// Scale applied to `confusion`.
    pub confusion_strength: f64,
    /// C×C with zero diagonal; row `y` is added to the logits of label `y`.
    pub confusion: Vec<Vec<f64>>,
    pub prior: Vec<f64>,
}

/// `B[y, (y + 1) mod C] = 1`, zero elsewhere.
pub fn ring_confusion(num_categories: usize) -> Vec<Vec<f64>> {
    (0..num_categories)
        .map(|y| {
            let mut row = vec![0.0; num_categories];
            row[(y + 1) % num_categories] = 1.0;
            row
        })
        .collect()
}

pub fn uniform_prior(num_categories: usize) -> Vec<f64> {
    vec![1.0 / num_categories as f64; num_categories]
}

fn check_confusion(confusion: &[Vec<f64>], c: usize) -> Result<()> {
    if confusion.len() != c || confusion.iter().any(|r| r.len() != c) {
        return Err(Error::Config(format!("confusion matrix must be {c}x{c}")));
    }
    if confusion.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Config("confusion matrix entries must be finite".into()));
    }
    if (0..c).any(|y| confusion[y][y] != 0.0) {
        return Err(Error::Config("confusion matrix must have a zero diagonal".into()));
    }
    Ok(())
}

fn check_prior(prior: &[f64], c: usize) -> Result<()> {
    if prior.len() != c || prior.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
        return Err(Error::Config(format!("prior must be {c} non-negative weights")));
    }
    let sum: f64 = prior.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::Config(format!("prior sums to {sum}, expected 1")));
    }
    Ok(())
}

impl ShiftParams {
    /// Ring confusion and uniform prior.
    pub fn new(num_categories: usize, signal: f64, noise: f64, temperature: f64, confusion_strength: f64) -> Self {
        Self {
            signal,
            noise,
            temperature,
            confusion_strength,
            confusion: ring_confusion(num_categories),
            prior: uniform_prior(num_categories),
        }
    }

    pub fn num_categories(&self) -> usize {
        self.prior.len()
    }

    pub fn validate(&self) -> Result<()> {
        let c = self.num_categories();
        if c < 2 {
            return Err(Error::TooFewCategories { got: c });
        }
        let nonneg = |x: f64| x >= 0.0 && x.is_finite();
        if !nonneg(self.signal) || !nonneg(self.noise) || !nonneg(self.confusion_strength) {
            return Err(Error::Config("signal, noise and confusion strength must be >= 0".into()));
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return Err(Error::Config("temperature must be > 0".into()));
        }
        check_confusion(&self.confusion, c)?;
        check_prior(&self.prior, c)
    }
}

fn softmax_into(logits: &[f64], temperature: f64, out: &mut Vec<f64>) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let start = out.len();
    out.extend(logits.iter().map(|&l| ((l - max) / temperature).exp()));
    let row = &mut out[start..];
    let sum: f64 = row.iter().sum();
    row.iter_mut().for_each(|v| *v /= sum);
}

fn draw_labels(prior: &[f64], n: usize, ensure_all: bool, rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let c = prior.len();
    if ensure_all && n < c {
        return Err(Error::Config(format!(
            "cannot place all {c} categories among {n} instances"
        )));
    }
    let dist = WeightedIndex::new(prior).map_err(|e| Error::Config(format!("prior: {e}")))?;
    for _ in 0..MAX_LABEL_DRAWS {
        let labels: Vec<usize> = (0..n).map(|_| dist.sample(rng)).collect();
        if !ensure_all {
            return Ok(labels);
        }
        let mut seen = vec![false; c];
        labels.iter().for_each(|&y| seen[y] = true);
        if seen.iter().all(|&s| s) {
            return Ok(labels);
        }
    }
    Err(Error::Config(format!(
        "no label draw covered every category after {MAX_LABEL_DRAWS} attempts"
    )))
}

/// Simulates one labeled meta-set of `n` instances. With `ensure_all`, label
/// vectors are redrawn until every category occurs at least once.
pub fn generate_metaset(
    params: &ShiftParams,
    n: usize,
    seed: u64,
    ensure_all: bool,
    id: impl Into<String>,
) -> Result<MetaSet> {
    params.validate()?;
    let c = params.num_categories();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = draw_labels(&params.prior, n, ensure_all, &mut rng)?;

    let mut values = Vec::with_capacity(n * c);
    let mut logits = vec![0.0; c];
    for &y in &labels {
        for (k, l) in logits.iter_mut().enumerate() {
            let eps: f64 = rng.sample(StandardNormal);
            *l = params.confusion_strength * params.confusion[y][k] + params.noise * eps;
        }
        logits[y] += params.signal;
        softmax_into(&logits, params.temperature, &mut values);
    }
    let matrix = ConfidenceMatrix::new(values, n, c)?;
    MetaSet::labeled(id, matrix, LabelVector::new(labels, c)?)
}

/// Closed interval sampled uniformly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range(pub f64, pub f64);

impl Range {
    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.0 == self.1 {
            self.0
        } else {
            rng.random_range(self.0..=self.1)
        }
    }

    fn check(&self, name: &str, positive: bool) -> Result<()> {
        let Range(lo, hi) = *self;
        let ok = lo.is_finite() && hi.is_finite() && lo <= hi && if positive { lo > 0.0 } else { lo >= 0.0 };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid {name} range [{lo}, {hi}]")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShiftRanges {
    pub signal: Range,
    pub noise: Range,
    pub temperature: Range,
    pub confusion: Range,
}

impl Default for ShiftRanges {
    fn default() -> Self {
        Self {
            signal: Range(0.5, 4.0),
            noise: Range(0.2, 3.0),
            temperature: Range(0.5, 3.0),
            confusion: Range(0.0, 2.0),
        }
    }
}

/// Corpus settings, readable from a TOML file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    pub num_meta_sets: usize,
    pub num_instances: usize,
    pub num_categories: usize,
    pub seed: u64,
    pub ensure_all_categories: bool,
    pub id_prefix: String,
    pub ranges: ShiftRanges,
    /// Defaults to uniform.
    pub prior: Option<Vec<f64>>,
    /// Defaults to [`ring_confusion`].
    pub confusion_matrix: Option<Vec<Vec<f64>>>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            num_meta_sets: 300,
            num_instances: 1000,
            num_categories: 10,
            seed: 42,
            ensure_all_categories: true,
            id_prefix: "set".into(),
            ranges: ShiftRanges::default(),
            prior: None,
            confusion_matrix: None,
        }
    }
}

impl CorpusConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: CorpusConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_meta_sets == 0 {
            return Err(Error::Config("num_meta_sets must be at least 1".into()));
        }
        if self.num_instances < 3 {
            return Err(Error::TooFewInstances { got: self.num_instances });
        }
        if self.num_categories < 2 {
            return Err(Error::TooFewCategories { got: self.num_categories });
        }
        let r = &self.ranges;
        r.signal.check("signal", false)?;
        r.noise.check("noise", false)?;
        r.temperature.check("temperature", true)?;
        r.confusion.check("confusion", false)?;
        if let Some(p) = &self.prior {
            check_prior(p, self.num_categories)?;
        }
        if let Some(b) = &self.confusion_matrix {
            check_confusion(b, self.num_categories)?;
        }
        Ok(())
    }

    fn sample_params(&self, rng: &mut ChaCha8Rng) -> ShiftParams {
        let c = self.num_categories;
        ShiftParams {
            signal: self.ranges.signal.sample(rng),
            noise: self.ranges.noise.sample(rng),
            temperature: self.ranges.temperature.sample(rng),
            confusion_strength: self.ranges.confusion.sample(rng),
            confusion: self.confusion_matrix.clone().unwrap_or_else(|| ring_confusion(c)),
            prior: self.prior.clone().unwrap_or_else(|| uniform_prior(c)),
        }
    }
}

/// SplitMix64 finalizer; derives independent stream seeds.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Seed of stream `index` under `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    splitmix64(splitmix64(seed) ^ splitmix64(index.wrapping_add(0x5851_F42D_4C95_7F2D)))
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub sets: Vec<MetaSet>,
    pub params: Vec<ShiftParams>,
    pub manifest: Manifest,
}

/// Generates `num_meta_sets` independent meta-sets. Each set draws its shift
/// parameters and instances from its own derived stream, so the result does
/// not depend on how the work is scheduled.
pub fn generate_corpus(cfg: &CorpusConfig) -> Result<Corpus> {
    cfg.validate()?;
    let width = cfg.num_meta_sets.saturating_sub(1).to_string().len().max(4);
    let generated: Vec<(MetaSet, ShiftParams)> = (0..cfg.num_meta_sets)
        .into_par_iter()
        .map(|i| {
            let stream = derive_seed(cfg.seed, i as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(stream);
            let params = cfg.sample_params(&mut rng);
            let id = format!("{}{:0width$}", cfg.id_prefix, i);
            let set = generate_metaset(
                &params,
                cfg.num_instances,
                splitmix64(stream),
                cfg.ensure_all_categories,
                id,
            )?;
            Ok((set, params))
        })
        .collect::<Result<_>>()?;
    let (sets, params): (Vec<_>, Vec<_>) = generated.into_iter().unzip();
    let manifest = manifest_for(&sets)?;
    Ok(Corpus { sets, params, manifest })
}
