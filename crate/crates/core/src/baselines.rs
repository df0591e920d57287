//! Confidence-score baselines: prediction score (PS), entropy score (ES) and
//! average confidence (AC).
//!
//! Per-category estimates condition on the predicted category, since labels
//! are not available for the sets being evaluated.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{argmax, AccuracyVector, ConfidenceMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Baseline {
    /// Fraction of instances whose top confidence reaches `tau1`.
    Ps { tau1: f64 },
    /// Fraction of instances whose normalized entropy is at most `tau2`.
    Es { tau2: f64 },
    /// Mean top confidence.
    Ac,
}

impl Baseline {
    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, t: f64| {
            if t > 0.0 && t < 1.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in (0, 1), got {t}")))
            }
        };
        match *self {
            Baseline::Ps { tau1 } => check("tau1", tau1),
            Baseline::Es { tau2 } => check("tau2", tau2),
            Baseline::Ac => Ok(()),
        }
    }

    pub fn estimate(&self, matrix: &ConfidenceMatrix) -> AccuracyVector {
        match *self {
            Baseline::Ps { tau1 } => prediction_score(matrix, tau1),
            Baseline::Es { tau2 } => entropy_score(matrix, tau2),
            Baseline::Ac => average_confidence(matrix),
        }
    }
}

impl fmt::Display for Baseline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Baseline::Ps { tau1 } => write!(f, "PS(tau1={tau1})"),
            Baseline::Es { tau2 } => write!(f, "ES(tau2={tau2})"),
            Baseline::Ac => f.write_str("AC"),
        }
    }
}

impl FromStr for Baseline {
    type Err = Error;

    /// Parses `ps`, `es` or `ac` with default thresholds 0.8 and 0.2.
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ps" => Ok(Baseline::Ps { tau1: 0.8 }),
            "es" => Ok(Baseline::Es { tau2: 0.2 }),
            "ac" => Ok(Baseline::Ac),
            other => Err(Error::Config(format!("unknown baseline {other:?}"))),
        }
    }
}

/// Mean with a compensated sum and a residual correction, so short inputs
/// like `[0.5, 0.7, 0.9]` give the correctly rounded result.
fn accurate_mean(values: &[f64]) -> f64 {
    let mut sum = 0.0_f64;
    let mut comp = 0.0_f64;
    for &v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    let n = values.len() as f64;
    let q = sum / n;
    q + ((-q).mul_add(n, sum) + comp) / n
}

/// Averages a per-instance score overall and within each predicted category.
/// Scores are summed in sorted order so the result ignores instance order.
fn pool(matrix: &ConfidenceMatrix, score: impl Fn(&[f64]) -> f64) -> AccuracyVector {
    let c = matrix.num_categories();
    let mut scored: Vec<(usize, f64)> = matrix.rows().map(|row| (argmax(row), score(row))).collect();
    scored.sort_by(|a, b| a.1.total_cmp(&b.1));
    let mut by_category = vec![Vec::new(); c];
    for &(k, s) in &scored {
        by_category[k].push(s);
    }
    let all: Vec<f64> = scored.iter().map(|&(_, s)| s).collect();
    AccuracyVector {
        per_category: by_category
            .iter()
            .map(|v| (!v.is_empty()).then(|| accurate_mean(v)))
            .collect(),
        overall: accurate_mean(&all),
    }
}

fn max_confidence(row: &[f64]) -> f64 {
    row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Entropy in nats divided by `ln C`, with `0 ln 0 = 0`.
pub fn normalized_entropy(row: &[f64]) -> f64 {
    let h: f64 = row
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum();
    (h / (row.len() as f64).ln()).clamp(0.0, 1.0)
}

pub fn prediction_score(matrix: &ConfidenceMatrix, tau1: f64) -> AccuracyVector {
    pool(matrix, |row| f64::from(u8::from(max_confidence(row) >= tau1)))
}

pub fn entropy_score(matrix: &ConfidenceMatrix, tau2: f64) -> AccuracyVector {
    pool(matrix, |row| f64::from(u8::from(normalized_entropy(row) <= tau2)))
}

pub fn average_confidence(matrix: &ConfidenceMatrix) -> AccuracyVector {
    pool(matrix, max_confidence)
}
