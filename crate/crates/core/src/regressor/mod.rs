//! Multi-branch accuracy regressor.
//!
//! Two branch networks read the standardized mean and covariance tensors and
//! their outputs are concatenated into the global feature. A global head
//! regresses overall accuracy from it. One category head, shared across
//! categories, reads the global feature together with the variance slice of
//! the category being predicted.
//!
//! The branch networks and the global head form the main branch. They only
//! receive gradient from the overall-accuracy loss; the category loss sees
//! the global feature as a constant.

mod io;
mod mlp;
mod train;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::AccuracyVector;
use crate::error::{Error, Result};
use crate::representation::{ConfidenceGroup, SetRepresentation};

pub use io::{load_model, save_model, MODEL_FORMAT_VERSION};
pub use mlp::{Dense, Mlp, MlpTrace};
pub use train::{fit_standardization, train, FeatureStats, Standardization, TrainConfig, TrainOutcome};

/// Standard deviations below this are clamped.
pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub num_categories: usize,
    pub groups: Vec<ConfidenceGroup>,
    pub use_mean: bool,
    pub use_cov: bool,
    pub use_var: bool,
    /// Hidden widths of Network1/Network2; the last entry is the branch output.
    pub branch_hidden: Vec<usize>,
    pub global_hidden: Vec<usize>,
    pub category_hidden: Vec<usize>,
    /// Weight of the category term in the loss.
    pub lambda: f64,
}

impl ModelConfig {
    pub fn new(num_categories: usize, groups: &[ConfidenceGroup]) -> Self {
        Self {
            num_categories,
            groups: groups.to_vec(),
            use_mean: true,
            use_cov: true,
            use_var: true,
            branch_hidden: vec![256, 64],
            global_hidden: vec![64],
            category_hidden: vec![64],
            lambda: 1.0,
        }
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn branch_input(&self) -> usize {
        self.num_groups() * self.num_categories * self.num_categories
    }

    pub fn branch_output(&self) -> usize {
        *self.branch_hidden.last().unwrap_or(&0)
    }

    pub fn global_size(&self) -> usize {
        2 * self.branch_output()
    }

    pub fn var_size(&self) -> usize {
        self.num_groups() * self.num_categories
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_categories < 2 {
            return Err(Error::Config("num_categories must be at least 2".into()));
        }
        if self.groups.is_empty() {
            return Err(Error::Config("at least one confidence group is required".into()));
        }
        if !(self.use_mean || self.use_cov) {
            return Err(Error::Config("at least one of the mean and cov branches must be enabled".into()));
        }
        let widths = self
            .branch_hidden
            .iter()
            .chain(&self.global_hidden)
            .chain(&self.category_hidden);
        if self.branch_hidden.is_empty() || widths.clone().any(|&w| w == 0) {
            return Err(Error::Config("layer widths must be positive".into()));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        Ok(())
    }

    fn branch_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.branch_input()];
        sizes.extend(&self.branch_hidden);
        sizes
    }

    fn global_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.global_size()];
        sizes.extend(&self.global_hidden);
        sizes.push(1);
        sizes
    }

    fn category_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![self.global_size() + self.var_size()];
        sizes.extend(&self.category_hidden);
        sizes.push(1);
        sizes
    }
}

/// Network1 (mean branch), Network2 (cov branch) and Network3 (global head).
#[derive(Debug, Clone, PartialEq)]
pub struct MainBranch {
    pub network1: Option<Mlp>,
    pub network2: Option<Mlp>,
    pub network3: Mlp,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameters {
    pub main: MainBranch,
    pub category_head: Mlp,
}

/// Gradients laid out exactly like [`Parameters`]; `main` holds the
/// main-branch group and `category_head` the category-branch group.
pub type GradientBundle = Parameters;

impl Parameters {
    pub fn init<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Self {
        let network1 = cfg.use_mean.then(|| Mlp::init(&cfg.branch_sizes(), rng));
        let network2 = cfg.use_cov.then(|| Mlp::init(&cfg.branch_sizes(), rng));
        let network3 = Mlp::init(&cfg.global_sizes(), rng);
        let category_head = Mlp::init(&cfg.category_sizes(), rng);
        Self {
            main: MainBranch {
                network1,
                network2,
                network3,
            },
            category_head,
        }
    }

    pub fn zeros(cfg: &ModelConfig) -> Self {
        Self {
            main: MainBranch {
                network1: cfg.use_mean.then(|| Mlp::zeros(&cfg.branch_sizes())),
                network2: cfg.use_cov.then(|| Mlp::zeros(&cfg.branch_sizes())),
                network3: Mlp::zeros(&cfg.global_sizes()),
            },
            category_head: Mlp::zeros(&cfg.category_sizes()),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            main: MainBranch {
                network1: self.main.network1.as_ref().map(Mlp::zeros_like),
                network2: self.main.network2.as_ref().map(Mlp::zeros_like),
                network3: self.main.network3.zeros_like(),
            },
            category_head: self.category_head.zeros_like(),
        }
    }

    /// Named networks in a fixed order.
    pub fn networks(&self) -> Vec<(&'static str, &Mlp)> {
        let mut out = Vec::with_capacity(4);
        if let Some(n) = &self.main.network1 {
            out.push(("network1", n));
        }
        if let Some(n) = &self.main.network2 {
            out.push(("network2", n));
        }
        out.push(("network3", &self.main.network3));
        out.push(("category_head", &self.category_head));
        out
    }

    fn networks_mut(&mut self) -> Vec<&mut Mlp> {
        let mut out = Vec::with_capacity(4);
        if let Some(n) = &mut self.main.network1 {
            out.push(n);
        }
        if let Some(n) = &mut self.main.network2 {
            out.push(n);
        }
        out.push(&mut self.main.network3);
        out.push(&mut self.category_head);
        out
    }

    pub fn tensors(&self) -> Vec<&Vec<f64>> {
        self.networks().into_iter().flat_map(|(_, n)| n.tensors()).collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Vec<f64>> {
        self.networks_mut().into_iter().flat_map(Mlp::tensors_mut).collect()
    }

    /// Main-branch tensors (Network1, Network2, Network3).
    pub fn main_tensors(&self) -> Vec<&Vec<f64>> {
        self.networks()
            .into_iter()
            .filter(|(name, _)| *name != "category_head")
            .flat_map(|(_, n)| n.tensors())
            .collect()
    }

    pub fn category_tensors(&self) -> Vec<&Vec<f64>> {
        self.category_head.tensors().collect()
    }

    pub fn add_assign(&mut self, other: &Parameters) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for n in self.networks_mut() {
            n.scale(factor);
        }
    }

    pub fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiBranchModel {
    pub config: ModelConfig,
    pub standardization: Standardization,
    pub params: Parameters,
}

/// Outputs of a forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Forward {
    pub overall: f64,
    pub categories: Vec<f64>,
    pub global_feature: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    /// `(overall_pred - A)^2`.
    pub overall: f64,
    /// Mean squared error over defined categories, before weighting by lambda.
    pub category: f64,
    pub total: f64,
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

struct Inputs {
    mean: Option<Vec<f64>>,
    cov: Option<Vec<f64>>,
    var: Vec<Vec<f64>>,
}

struct Trace {
    branch1: Option<MlpTrace>,
    branch2: Option<MlpTrace>,
    head3: MlpTrace,
    heads: Vec<MlpTrace>,
    overall_logit: f64,
    category_logits: Vec<f64>,
    global: Vec<f64>,
}

impl MultiBranchModel {
    /// Model with freshly initialized weights and identity standardization.
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let params = Parameters::init(&config, rng);
        Ok(Self {
            standardization: Standardization::identity(&config),
            config,
            params,
        })
    }

    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            standardization: Standardization::identity(&config),
            params: Parameters::zeros(&config),
            config,
        })
    }

    fn inputs(&self, rep: &SetRepresentation) -> Result<Inputs> {
        let cfg = &self.config;
        rep.check_shape(cfg.num_groups(), cfg.num_categories)?;
        let s = &self.standardization;
        Ok(Inputs {
            mean: cfg.use_mean.then(|| s.mean.apply(rep.f_mean.as_slice())),
            cov: cfg.use_cov.then(|| s.cov.apply(rep.f_cov.as_slice())),
            var: (0..cfg.num_categories)
                .map(|c| {
                    if cfg.use_var {
                        s.var.apply(rep.var_slice(c))
                    } else {
                        vec![0.0; cfg.var_size()]
                    }
                })
                .collect(),
        })
    }

    fn trace(&self, rep: &SetRepresentation) -> Result<Trace> {
        let inputs = self.inputs(rep)?;
        let width = self.config.branch_output();
        let main = &self.params.main;
        let run = |net: &Option<Mlp>, x: &Option<Vec<f64>>| match (net, x) {
            (Some(net), Some(x)) => {
                let (out, trace) = net.forward(x);
                (out, Some(trace))
            }
            _ => (vec![0.0; width], None),
        };
        let (out1, branch1) = run(&main.network1, &inputs.mean);
        let (out2, branch2) = run(&main.network2, &inputs.cov);
        let mut global = out1;
        global.extend(out2);
        let (logit, head3) = main.network3.forward(&global);

        let mut heads = Vec::with_capacity(self.config.num_categories);
        let mut category_logits = Vec::with_capacity(self.config.num_categories);
        let mut fused = global.clone();
        for v in &inputs.var {
            fused.truncate(global.len());
            fused.extend_from_slice(v);
            let (out, trace) = self.params.category_head.forward(&fused);
            category_logits.push(out[0]);
            heads.push(trace);
        }
        Ok(Trace {
            branch1,
            branch2,
            head3,
            heads,
            overall_logit: logit[0],
            category_logits,
            global,
        })
    }

    pub fn forward(&self, rep: &SetRepresentation) -> Result<Forward> {
        let t = self.trace(rep)?;
        Ok(Forward {
            overall: sigmoid(t.overall_logit),
            categories: t.category_logits.iter().map(|&z| sigmoid(z)).collect(),
            global_feature: t.global,
        })
    }

    pub fn predict(&self, rep: &SetRepresentation) -> Result<AccuracyVector> {
        let f = self.forward(rep)?;
        Ok(AccuracyVector {
            per_category: f.categories.into_iter().map(Some).collect(),
            overall: f.overall,
        })
    }

    /// Loss terms for one meta-set.
    pub fn loss(&self, rep: &SetRepresentation, target: &AccuracyVector, lambda: f64) -> Result<LossBreakdown> {
        let f = self.forward(rep)?;
        loss(f.overall, &f.categories, target, lambda)
    }

    /// Gradients for one meta-set. Main-branch entries come from the overall
    /// term alone; category-head entries from the weighted category term.
    pub fn backward(
        &self,
        rep: &SetRepresentation,
        target: &AccuracyVector,
        lambda: f64,
    ) -> Result<(GradientBundle, LossBreakdown)> {
        let mut grads = self.params.zeros_like();
        let breakdown = self.accumulate_gradients(rep, target, lambda, &mut grads)?;
        Ok((grads, breakdown))
    }

    pub(crate) fn accumulate_gradients(
        &self,
        rep: &SetRepresentation,
        target: &AccuracyVector,
        lambda: f64,
        grads: &mut GradientBundle,
    ) -> Result<LossBreakdown> {
        let t = self.trace(rep)?;
        let overall = sigmoid(t.overall_logit);
        let categories: Vec<f64> = t.category_logits.iter().map(|&z| sigmoid(z)).collect();
        let breakdown = loss(overall, &categories, target, lambda)?;

        // Overall term through Network3 and into the branches.
        let d_logit = 2.0 * (overall - target.overall) * overall * (1.0 - overall);
        let main = &self.params.main;
        let d_global = main.network3.backward(&t.head3, &[d_logit], &mut grads.main.network3);
        let width = self.config.branch_output();
        if let (Some(net), Some(trace), Some(g)) = (&main.network1, &t.branch1, &mut grads.main.network1) {
            net.backward(trace, &d_global[..width], g);
        }
        if let (Some(net), Some(trace), Some(g)) = (&main.network2, &t.branch2, &mut grads.main.network2) {
            net.backward(trace, &d_global[width..], g);
        }

        // Category term stops at the head's input.
        let defined = target.defined_categories().count();
        if lambda > 0.0 && defined > 0 {
            let weight = lambda / defined as f64;
            for (c, a) in target.defined_categories() {
                let q = categories[c];
                let d = weight * 2.0 * (q - a) * q * (1.0 - q);
                self.params.category_head.backward(&t.heads[c], &[d], &mut grads.category_head);
            }
        }
        Ok(breakdown)
    }
}

/// Squared-error loss with undefined categories excluded.
pub fn loss(overall: f64, categories: &[f64], target: &AccuracyVector, lambda: f64) -> Result<LossBreakdown> {
    if categories.len() != target.num_categories() {
        return Err(Error::LengthMismatch {
            what: "category predictions vs target",
            left: categories.len(),
            right: target.num_categories(),
        });
    }
    let overall_term = (overall - target.overall).powi(2);
    let mut sum = 0.0;
    let mut count = 0usize;
    for (c, a) in target.defined_categories() {
        sum += (categories[c] - a).powi(2);
        count += 1;
    }
    let category = if count == 0 { 0.0 } else { sum / count as f64 };
    Ok(LossBreakdown {
        overall: overall_term,
        category,
        total: overall_term + lambda * category,
    })
}
