use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{GradientBundle, LossBreakdown, ModelConfig, MultiBranchModel, Parameters, STD_FLOOR};
use crate::data::AccuracyVector;
use crate::error::{Error, Result};
use crate::representation::SetRepresentation;

/// Per-feature mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    pub fn identity(len: usize) -> Self {
        Self {
            mean: vec![0.0; len],
            std: vec![1.0; len],
        }
    }

    /// Population statistics over `samples`, deviations floored at [`STD_FLOOR`].
    pub fn fit<'a>(len: usize, samples: impl Iterator<Item = &'a [f64]> + Clone) -> Self {
        let mut mean = vec![0.0; len];
        let mut count = 0usize;
        for s in samples.clone() {
            mean.iter_mut().zip(s).for_each(|(m, v)| *m += v);
            count += 1;
        }
        let n = count.max(1) as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; len];
        for s in samples {
            for ((acc, v), m) in var.iter_mut().zip(s).zip(&mean) {
                *acc += (v - m) * (v - m);
            }
        }
        let std = var.iter().map(|v| (v / n).sqrt().max(STD_FLOOR)).collect();
        Self { mean, std }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }
}

/// Input standardization frozen into a trained model. Variance slices share
/// one set of statistics pooled over every (meta-set, category) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: FeatureStats,
    pub cov: FeatureStats,
    pub var: FeatureStats,
}

impl Standardization {
    pub fn identity(cfg: &ModelConfig) -> Self {
        Self {
            mean: FeatureStats::identity(cfg.branch_input()),
            cov: FeatureStats::identity(cfg.branch_input()),
            var: FeatureStats::identity(cfg.var_size()),
        }
    }
}

pub fn fit_standardization(cfg: &ModelConfig, reps: &[&SetRepresentation]) -> Standardization {
    let c = cfg.num_categories;
    Standardization {
        mean: FeatureStats::fit(cfg.branch_input(), reps.iter().map(|r| r.f_mean.as_slice())),
        cov: FeatureStats::fit(cfg.branch_input(), reps.iter().map(|r| r.f_cov.as_slice())),
        var: FeatureStats::fit(
            cfg.var_size(),
            reps.iter().flat_map(move |r| (0..c).map(move |k| r.var_slice(k))),
        ),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 200,
            batch_size: 32,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let rate = |x: f64| x > 0.0 && x.is_finite();
        let decay = |x: f64| (0.0..1.0).contains(&x);
        if !rate(self.learning_rate) || !rate(self.epsilon) || self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config(
                "learning rate, epsilon, epochs and batch size must be positive".into(),
            ));
        }
        if !decay(self.beta1) || !decay(self.beta2) {
            return Err(Error::Config("moment decay rates must lie in [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: MultiBranchModel,
    /// Mean total loss over the corpus after each epoch.
    pub loss_trace: Vec<f64>,
}

struct Adam {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: i32,
}

impl Adam {
    fn new(params: &Parameters) -> Self {
        let zeros: Vec<Vec<f64>> = params.tensors().iter().map(|t| vec![0.0; t.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }

    fn update(&mut self, params: &mut Parameters, grads: &GradientBundle, cfg: &TrainConfig) {
        self.step += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.step);
        let c2 = 1.0 - cfg.beta2.powi(self.step);
        let tensors = params.tensors_mut().into_iter().zip(grads.tensors());
        for ((p, g), (m, v)) in tensors.zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for i in 0..p.len() {
                m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
                v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
            }
        }
    }
}

/// Meta-sets per parallel work unit. Fixed so that gradient sums do not
/// depend on the thread count.
const CHUNK: usize = 4;

fn batch_gradient(
    model: &MultiBranchModel,
    corpus: &[(SetRepresentation, AccuracyVector)],
    batch: &[usize],
    lambda: f64,
) -> Result<GradientBundle> {
    let partials: Vec<GradientBundle> = batch
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut acc = model.params.zeros_like();
            for &i in chunk {
                let (rep, target) = &corpus[i];
                model.accumulate_gradients(rep, target, lambda, &mut acc)?;
            }
            Ok(acc)
        })
        .collect::<Result<_>>()?;
    let mut iter = partials.into_iter();
    let mut total = iter.next().expect("non-empty batch");
    for p in iter {
        total.add_assign(&p);
    }
    total.scale(1.0 / batch.len() as f64);
    Ok(total)
}

/// Mean loss over the corpus, summed in corpus order.
pub(crate) fn corpus_loss(
    model: &MultiBranchModel,
    corpus: &[(SetRepresentation, AccuracyVector)],
    lambda: f64,
) -> Result<LossBreakdown> {
    let terms: Vec<LossBreakdown> = corpus
        .par_iter()
        .map(|(rep, target)| model.loss(rep, target, lambda))
        .collect::<Result<_>>()?;
    let n = terms.len() as f64;
    let mut sum = LossBreakdown::default();
    for t in &terms {
        sum.overall += t.overall;
        sum.category += t.category;
        sum.total += t.total;
    }
    Ok(LossBreakdown {
        overall: sum.overall / n,
        category: sum.category / n,
        total: sum.total / n,
    })
}

/// Trains a model on `(representation, accuracy)` pairs with minibatch
/// adaptive-moment updates. Identical inputs and seed give bit-identical
/// parameters.
pub fn train(
    corpus: &[(SetRepresentation, AccuracyVector)],
    cfg: &TrainConfig,
    mcfg: &ModelConfig,
) -> Result<TrainOutcome> {
    if corpus.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    cfg.validate()?;
    mcfg.validate()?;
    for (rep, target) in corpus {
        rep.check_shape(mcfg.num_groups(), mcfg.num_categories)?;
        if target.num_categories() != mcfg.num_categories {
            return Err(Error::Shape(format!(
                "target has {} categories, model expects {}",
                target.num_categories(),
                mcfg.num_categories
            )));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let reps: Vec<&SetRepresentation> = corpus.iter().map(|(r, _)| r).collect();
    let mut model = MultiBranchModel::new(mcfg.clone(), &mut rng)?;
    model.standardization = fit_standardization(mcfg, &reps);

    let mut adam = Adam::new(&model.params);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut loss_trace = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(cfg.batch_size) {
            let grads = batch_gradient(&model, corpus, batch, mcfg.lambda)?;
            adam.update(&mut model.params, &grads, cfg);
        }
        loss_trace.push(corpus_loss(&model, corpus, mcfg.lambda)?.total);
    }
    Ok(TrainOutcome { model, loss_trace })
}
