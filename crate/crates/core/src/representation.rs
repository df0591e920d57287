//! Confidence-group set representation of a dataset.
//!
//! For every category `d` all instances are ranked by their confidence for
//! `d` and bucketed into High / Medium / Low groups. Each group is summarized
//! by three C-vectors: the mean confidence vector, the covariance of every
//! coordinate with coordinate `d`, and the coordinatewise variance. Stacking
//! these over groups and categories gives the fixed-shape tensors consumed by
//! the regressor:
//!
//! * `f_mean[g, d, :]`  mean of group `g` of category `d`
//! * `f_cov[g, d, :]`   covariance against coordinate `d` of the same group
//! * `f_var_all[c][g, d]` variance of coordinate `c` in group `g` of category `d`

use std::cmp::Ordering;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{write_json, ConfidenceMatrix};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ConfidenceGroup {
    High,
    Medium,
    Low,
}

impl ConfidenceGroup {
    pub const ALL: [ConfidenceGroup; 3] = [Self::High, Self::Medium, Self::Low];

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for ConfidenceGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::High => "high",
            Self::Medium => "medium",
            Self::Low => "low",
        })
    }
}

impl FromStr for ConfidenceGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "high" | "h" => Ok(Self::High),
            "medium" | "m" => Ok(Self::Medium),
            "low" | "l" => Ok(Self::Low),
            other => Err(Error::Config(format!("unknown confidence group {other:?}"))),
        }
    }
}

/// How instances are assigned to groups.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum SplitMode {
    #[default]
    /// Contiguous tertiles of the descending ranking, sizes
    /// `h = ceil(N/3)`, `m = ceil((N-h)/2)`, `l = N-h-m`.
    Quantile,
    /// High if score >= `t_high`, Low if score < `t_low`, Medium otherwise.
    Fixed { t_low: f64, t_high: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupConfig {
    pub split: SplitMode,
    groups: Vec<ConfidenceGroup>,
}

impl Default for GroupConfig {
    fn default() -> Self {
        Self {
            split: SplitMode::Quantile,
            groups: ConfidenceGroup::ALL.to_vec(),
        }
    }
}

impl GroupConfig {
    /// Validates the split and stores the enabled groups in High, Medium, Low order.
    pub fn new(split: SplitMode, groups: &[ConfidenceGroup]) -> Result<Self> {
        let mut groups = groups.to_vec();
        groups.sort();
        groups.dedup();
        if groups.is_empty() {
            return Err(Error::Config("at least one confidence group must be enabled".into()));
        }
        if let SplitMode::Fixed { t_low, t_high } = split {
            let open_unit = |t: f64| t > 0.0 && t < 1.0;
            if !(open_unit(t_low) && open_unit(t_high) && t_low < t_high) {
                return Err(Error::Config(format!(
                    "fixed thresholds must satisfy 0 < t_low < t_high < 1 (got {t_low}, {t_high})"
                )));
            }
        }
        Ok(Self { split, groups })
    }

    pub fn quantile(groups: &[ConfidenceGroup]) -> Result<Self> {
        Self::new(SplitMode::Quantile, groups)
    }

    pub fn fixed(t_low: f64, t_high: f64) -> Result<Self> {
        Self::new(SplitMode::Fixed { t_low, t_high }, &ConfidenceGroup::ALL)
    }

    pub fn groups(&self) -> &[ConfidenceGroup] {
        &self.groups
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }
}

/// Sizes of the High, Medium and Low blocks in quantile mode.
pub fn quantile_sizes(n: usize) -> [usize; 3] {
    let high = n.div_ceil(3);
    let medium = (n - high).div_ceil(2);
    [high, medium, n - high - medium]
}

/// Group membership by instance index, `members[category][k]` for the k-th
/// enabled group. Members are listed in ranking order (descending score).
#[derive(Debug, Clone, PartialEq)]
pub struct GroupSplit {
    pub groups: Vec<ConfidenceGroup>,
    pub members: Vec<Vec<Vec<usize>>>,
}

/// Instances ordered by descending confidence for `category`. Equal scores
/// fall back to the full rows (so identical rows are the only remaining ties)
/// and finally to the instance index.
fn ranking(matrix: &ConfidenceMatrix, category: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..matrix.num_instances()).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (matrix.row(a), matrix.row(b));
        rb[category]
            .total_cmp(&ra[category])
            .then_with(|| {
                ra.iter()
                    .zip(rb)
                    .map(|(x, y)| y.total_cmp(x))
                    .find(|o| *o != Ordering::Equal)
                    .unwrap_or(Ordering::Equal)
            })
            .then(a.cmp(&b))
    });
    order
}

pub fn split_groups(matrix: &ConfidenceMatrix, cfg: &GroupConfig) -> Result<GroupSplit> {
    let n = matrix.num_instances();
    if matches!(cfg.split, SplitMode::Quantile) && n < 3 {
        return Err(Error::TooFewInstances { got: n });
    }
    let members = (0..matrix.num_categories())
        .map(|category| {
            let order = ranking(matrix, category);
            let mut buckets: [Vec<usize>; 3] = Default::default();
            match cfg.split {
                SplitMode::Quantile => {
                    let [h, m, _] = quantile_sizes(n);
                    buckets[0] = order[..h].to_vec();
                    buckets[1] = order[h..h + m].to_vec();
                    buckets[2] = order[h + m..].to_vec();
                }
                SplitMode::Fixed { t_low, t_high } => {
                    for i in order {
                        let score = matrix.row(i)[category];
                        let slot = if score >= t_high {
                            0
                        } else if score < t_low {
                            2
                        } else {
                            1
                        };
                        buckets[slot].push(i);
                    }
                }
            }
            cfg.groups
                .iter()
                .map(|g| std::mem::take(&mut buckets[g.slot()]))
                .collect()
        })
        .collect();
    Ok(GroupSplit {
        groups: cfg.groups.clone(),
        members,
    })
}

/// Mean confidence vector of a group.
pub fn group_mean(group: &[&[f64]]) -> Result<Vec<f64>> {
    let first = group.first().ok_or(Error::EmptyGroup)?;
    let mut mean = vec![0.0; first.len()];
    for z in group {
        for (m, v) in mean.iter_mut().zip(z.iter()) {
            *m += v;
        }
    }
    let n = group.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(mean)
}

fn group_cov_with_mean(group: &[&[f64]], mean: &[f64], category: usize) -> Vec<f64> {
    let mut cov = vec![0.0; mean.len()];
    for z in group {
        let pivot = z[category] - mean[category];
        for ((s, v), m) in cov.iter_mut().zip(z.iter()).zip(mean) {
            *s += (v - m) * pivot;
        }
    }
    let n = group.len() as f64;
    cov.iter_mut().for_each(|s| *s /= n);
    cov
}

fn group_var_with_mean(group: &[&[f64]], mean: &[f64]) -> Vec<f64> {
    let mut var = vec![0.0; mean.len()];
    for z in group {
        for ((s, v), m) in var.iter_mut().zip(z.iter()).zip(mean) {
            let d = v - m;
            *s += d * d;
        }
    }
    let n = group.len() as f64;
    var.iter_mut().for_each(|s| *s /= n);
    var
}

/// Biased covariance of every coordinate with coordinate `category`.
pub fn group_cov(group: &[&[f64]], category: usize) -> Result<Vec<f64>> {
    let mean = group_mean(group)?;
    if category >= mean.len() {
        return Err(Error::Shape(format!(
            "category {category} out of range for {}-vectors",
            mean.len()
        )));
    }
    Ok(group_cov_with_mean(group, &mean, category))
}

/// Biased coordinatewise variance.
pub fn group_var(group: &[&[f64]]) -> Result<Vec<f64>> {
    let mean = group_mean(group)?;
    Ok(group_var_with_mean(group, &mean))
}

/// Statistics of one category: rows are enabled groups, columns coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryStats {
    pub mean: Vec<Vec<f64>>,
    pub cov: Vec<Vec<f64>>,
    pub var: Vec<Vec<f64>>,
    pub present: Vec<bool>,
}

fn category_stats(matrix: &ConfidenceMatrix, members: &[Vec<usize>], category: usize) -> CategoryStats {
    let c = matrix.num_categories();
    let mut stats = CategoryStats {
        mean: Vec::with_capacity(members.len()),
        cov: Vec::with_capacity(members.len()),
        var: Vec::with_capacity(members.len()),
        present: Vec::with_capacity(members.len()),
    };
    for idx in members {
        let rows: Vec<&[f64]> = idx.iter().map(|&i| matrix.row(i)).collect();
        match group_mean(&rows) {
            Ok(mean) => {
                stats.cov.push(group_cov_with_mean(&rows, &mean, category));
                stats.var.push(group_var_with_mean(&rows, &mean));
                stats.mean.push(mean);
                stats.present.push(true);
            }
            Err(_) => {
                stats.mean.push(vec![0.0; c]);
                stats.cov.push(vec![0.0; c]);
                stats.var.push(vec![0.0; c]);
                stats.present.push(false);
            }
        }
    }
    stats
}

/// Dense row-major 3-tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    shape: [usize; 3],
    data: Vec<f64>,
}

impl Tensor3 {
    pub fn zeros(shape: [usize; 3]) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: [usize; 3], data: Vec<f64>) -> Result<Self> {
        if data.len() != shape.iter().product::<usize>() {
            return Err(Error::Shape(format!(
                "{} values do not fill a {shape:?} tensor",
                data.len()
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    fn offset(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.shape[1] + j) * self.shape[2] + k
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.offset(i, j, k)]
    }

    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let o = self.offset(i, j, k);
        self.data[o] = v;
    }

    /// Contiguous `[i, :, :]` block.
    pub fn slab(&self, i: usize) -> &[f64] {
        let len = self.shape[1] * self.shape[2];
        &self.data[i * len..(i + 1) * len]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<f64>>> {
        let [a, b, _] = self.shape;
        (0..a)
            .map(|i| (0..b).map(|j| self.slab(i)[j * self.shape[2]..(j + 1) * self.shape[2]].to_vec()).collect())
            .collect()
    }

    pub fn from_nested(nested: &[Vec<Vec<f64>>]) -> Result<Self> {
        let a = nested.len();
        let b = nested.first().map_or(0, Vec::len);
        let c = nested.first().and_then(|x| x.first()).map_or(0, Vec::len);
        let mut data = Vec::with_capacity(a * b * c);
        for plane in nested {
            if plane.len() != b {
                return Err(Error::Shape("ragged tensor".into()));
            }
            for row in plane {
                if row.len() != c {
                    return Err(Error::Shape("ragged tensor".into()));
                }
                data.extend_from_slice(row);
            }
        }
        Self::from_vec([a, b, c], data)
    }
}

impl Serialize for Tensor3 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_nested().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Tensor3 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let nested = Vec::<Vec<Vec<f64>>>::deserialize(d)?;
        Tensor3::from_nested(&nested).map_err(serde::de::Error::custom)
    }
}

/// Fixed-shape dataset summary fed to the regressor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SetRepresentation {
    /// `[g, d, :]` group means.
    pub f_mean: Tensor3,
    /// `[g, d, :]` covariances against coordinate `d`.
    pub f_cov: Tensor3,
    /// `[c, g, d]` variance of coordinate `c`.
    pub f_var_all: Tensor3,
    /// `[d][g]` false when the group was empty (fixed mode only).
    pub group_presence: Vec<Vec<bool>>,
}

impl SetRepresentation {
    pub fn num_groups(&self) -> usize {
        self.f_mean.shape()[0]
    }

    pub fn num_categories(&self) -> usize {
        self.f_mean.shape()[1]
    }

    /// The `g × C` variance slice used when predicting category `c`.
    pub fn var_slice(&self, c: usize) -> &[f64] {
        self.f_var_all.slab(c)
    }

    pub fn check_shape(&self, groups: usize, categories: usize) -> Result<()> {
        let (g, c) = (groups, categories);
        let ok = self.f_mean.shape() == [g, c, c]
            && self.f_cov.shape() == [g, c, c]
            && self.f_var_all.shape() == [c, g, c]
            && self.group_presence.len() == c
            && self.group_presence.iter().all(|p| p.len() == g);
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "representation shapes {:?}/{:?}/{:?} do not match g={g}, C={c}",
                self.f_mean.shape(),
                self.f_cov.shape(),
                self.f_var_all.shape()
            )))
        }
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        write_json(path.as_ref(), self)
    }
}

pub fn extract_representation(matrix: &ConfidenceMatrix, cfg: &GroupConfig) -> Result<SetRepresentation> {
    let split = split_groups(matrix, cfg)?;
    let c = matrix.num_categories();
    let g = cfg.num_groups();
    let stats: Vec<CategoryStats> = split
        .members
        .par_iter()
        .enumerate()
        .map(|(d, members)| category_stats(matrix, members, d))
        .collect();

    let mut f_mean = Tensor3::zeros([g, c, c]);
    let mut f_cov = Tensor3::zeros([g, c, c]);
    let mut f_var_all = Tensor3::zeros([c, g, c]);
    for (d, s) in stats.iter().enumerate() {
        for k in 0..g {
            for coord in 0..c {
                f_mean.set(k, d, coord, s.mean[k][coord]);
                f_cov.set(k, d, coord, s.cov[k][coord]);
                f_var_all.set(coord, k, d, s.var[k][coord]);
            }
        }
    }
    Ok(SetRepresentation {
        f_mean,
        f_cov,
        f_var_all,
        group_presence: stats.into_iter().map(|s| s.present).collect(),
    })
}
