//! Test-only oracles, kept independent of the library's code paths.
#![allow(dead_code, clippy::needless_range_loop, clippy::manual_div_ceil)]

use autoeval::regressor::{ModelConfig, MultiBranchModel};
use autoeval::{AccuracyVector, ConfidenceMatrix, SetRepresentation};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random simplex rows; `quantum > 0` rounds raw weights to create ties.
pub fn random_matrix(rng: &mut ChaCha8Rng, n: usize, c: usize, quantum: f64) -> ConfidenceMatrix {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let raw: Vec<f64> = (0..c)
                .map(|_| {
                    let v: f64 = rng.random_range(0.0..1.0);
                    let v = if quantum > 0.0 { (v / quantum).round() * quantum } else { v };
                    v.powi(3) + 1e-3
                })
                .collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v / s).collect()
        })
        .collect();
    ConfidenceMatrix::from_rows(&rows).unwrap()
}

/// Plain-loop implementation of the grouped statistics and their stacking.
/// Group membership is decided by counting ranks rather than sorting.
pub struct OracleRep {
    pub f_mean: Vec<Vec<Vec<f64>>>,
    pub f_cov: Vec<Vec<Vec<f64>>>,
    pub f_var_all: Vec<Vec<Vec<f64>>>,
}

pub fn oracle_representation(m: &ConfidenceMatrix, groups: &[usize]) -> OracleRep {
    let n = m.num_instances();
    let c = m.num_categories();
    let g = groups.len();
    let h = (n + 2) / 3;
    let mid = (n - h + 1) / 2;
    let mut f_mean = vec![vec![vec![0.0; c]; c]; g];
    let mut f_cov = vec![vec![vec![0.0; c]; c]; g];
    let mut f_var_all = vec![vec![vec![0.0; c]; g]; c];
    for d in 0..c {
        // rank[i] = number of instances that come before i.
        let mut rank = vec![0usize; n];
        for i in 0..n {
            for j in 0..n {
                if j == i {
                    continue;
                }
                let (zi, zj) = (m.row(i), m.row(j));
                let before = if zj[d] != zi[d] {
                    zj[d] > zi[d]
                } else {
                    let mut decided = None;
                    for k in 0..c {
                        if zj[k] != zi[k] {
                            decided = Some(zj[k] > zi[k]);
                            break;
                        }
                    }
                    decided.unwrap_or(j < i)
                };
                if before {
                    rank[i] += 1;
                }
            }
        }
        for (slot, &grp) in groups.iter().enumerate() {
            let (lo, hi) = match grp {
                0 => (0, h),
                1 => (h, h + mid),
                _ => (h + mid, n),
            };
            let members: Vec<usize> = (0..n).filter(|&i| rank[i] >= lo && rank[i] < hi).collect();
            let size = members.len() as f64;
            let mut mu = vec![0.0; c];
            for &i in &members {
                for k in 0..c {
                    mu[k] += m.row(i)[k] / size;
                }
            }
            for k in 0..c {
                let mut cov = 0.0;
                let mut var = 0.0;
                for &i in &members {
                    let z = m.row(i);
                    cov += (z[k] - mu[k]) * (z[d] - mu[d]);
                    var += (z[k] - mu[k]).powi(2);
                }
                f_mean[slot][d][k] = mu[k];
                f_cov[slot][d][k] = cov / size;
                f_var_all[k][slot][d] = var / size;
            }
        }
    }
    OracleRep { f_mean, f_cov, f_var_all }
}

pub fn max_abs_diff(rep: &SetRepresentation, oracle: &OracleRep) -> f64 {
    let mut worst: f64 = 0.0;
    let pairs = [
        (&rep.f_mean, &oracle.f_mean),
        (&rep.f_cov, &oracle.f_cov),
        (&rep.f_var_all, &oracle.f_var_all),
    ];
    for (t, o) in pairs {
        let [a, b, c] = t.shape();
        assert_eq!([a, b, c], [o.len(), o[0].len(), o[0][0].len()]);
        for i in 0..a {
            for j in 0..b {
                for k in 0..c {
                    worst = worst.max((t.get(i, j, k) - o[i][j][k]).abs());
                }
            }
        }
    }
    worst
}

pub fn small_config(c: usize) -> ModelConfig {
    let mut cfg = ModelConfig::new(c, &autoeval::ConfidenceGroup::ALL);
    cfg.branch_hidden = vec![12, 6];
    cfg.global_hidden = vec![5];
    cfg.category_hidden = vec![5];
    cfg
}

/// Model with every parameter (biases included) drawn at random.
pub fn random_model(cfg: ModelConfig, rng: &mut ChaCha8Rng) -> MultiBranchModel {
    let mut model = MultiBranchModel::new(cfg, rng).unwrap();
    for t in model.params.tensors_mut() {
        for v in t.iter_mut() {
            *v = rng.random_range(-0.6..0.6);
        }
    }
    model
}

pub fn random_target(rng: &mut ChaCha8Rng, c: usize) -> AccuracyVector {
    AccuracyVector {
        per_category: (0..c)
            .map(|k| (k != 1).then(|| rng.random_range(0.05..0.95)))
            .collect(),
        overall: rng.random_range(0.05..0.95),
    }
}

#[derive(Debug)]
pub struct GradCheck {
    pub checked: usize,
    pub worst_rel: f64,
}

pub const FD_STEP: f64 = 1e-5;
/// Denominator floor of the relative error.
pub const REL_FLOOR: f64 = 1e-7;

/// Compares analytic gradients with central differences. Main-branch entries
/// are checked against the overall term alone and category-head entries
/// against the weighted category term.
pub fn grad_check(model: &MultiBranchModel, rep: &SetRepresentation, target: &AccuracyVector, lambda: f64) -> GradCheck {
    let (grads, _) = model.backward(rep, target, lambda).unwrap();
    let analytic: Vec<Vec<f64>> = grads.tensors().into_iter().cloned().collect();
    let num_main = model.params.main_tensors().len();
    let mut probe = model.clone();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (t, a_tensor) in analytic.iter().enumerate() {
        for i in 0..a_tensor.len() {
            let original = probe.params.tensors()[t][i];
            let objective = |m: &MultiBranchModel| {
                let l = m.loss(rep, target, lambda).unwrap();
                if t < num_main {
                    l.overall
                } else {
                    lambda * l.category
                }
            };
            probe.params.tensors_mut()[t][i] = original + FD_STEP;
            let up = objective(&probe);
            probe.params.tensors_mut()[t][i] = original - FD_STEP;
            let down = objective(&probe);
            probe.params.tensors_mut()[t][i] = original;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let a = a_tensor[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    GradCheck {
        checked,
        worst_rel: worst,
    }
}

pub const SMALL_CORPUS_TOML: &str = "num_meta_sets = 24\nnum_instances = 120\nnum_categories = 4\nseed = 3\n";

/// Runs the installed binary and returns (success, stdout, stderr).
pub fn autoeval(args: &[&str]) -> (bool, String, String) {
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_autoeval"))
        .args(args)
        .output()
        .expect("binary runs");
    (
        out.status.success(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

pub fn autoeval_ok(args: &[&str]) -> String {
    let (ok, stdout, stderr) = autoeval(args);
    assert!(ok, "autoeval {args:?} failed: {stderr}");
    stdout
}

/// gen → extract → train → predict → baseline → eval inside `dir`.
pub fn run_pipeline(dir: &std::path::Path, extra_train: &[&str]) {
    let p = |name: &str| dir.join(name).to_string_lossy().into_owned();
    std::fs::write(dir.join("corpus.toml"), SMALL_CORPUS_TOML).unwrap();
    autoeval_ok(&["gen", "--config", &p("corpus.toml"), "--out", &p("data"), "--seed", "3"]);
    autoeval_ok(&["extract", "--data", &p("data"), "--out", &p("reps.json"), "--seed", "3"]);
    let mut train = vec![
        "train", "--reps", &p("reps.json") as &str, "--manifest", &p("data"), "--model-out", &p("model.json"),
        "--epochs", "15", "--batch", "8", "--seed", "3",
    ]
    .into_iter()
    .map(String::from)
    .collect::<Vec<_>>();
    train.extend(extra_train.iter().map(|s| s.to_string()));
    autoeval_ok(&train.iter().map(String::as_str).collect::<Vec<_>>());
    autoeval_ok(&["predict", "--model", &p("model.json"), "--reps", &p("reps.json"), "--out", &p("pred.csv"), "--seed", "3"]);
    autoeval_ok(&["baseline", "--data", &p("data"), "--method", "ac", "--out", &p("ac.csv"), "--seed", "3"]);
    autoeval_ok(&[
        "eval", "--pred", &p("pred.csv"), "--manifest", &p("data"), "--out", &p("report.json"),
        "--compare", &p("ac.csv"), "--seed", "3",
    ]);
}
