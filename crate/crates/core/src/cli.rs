//! Command-line pipeline: `gen`, `extract`, `train`, `predict`, `baseline`, `eval`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use crate::baselines::Baseline;
use crate::data::{load_corpus, save_corpus, write_json, Manifest};
use crate::error::{Error, Result};
use crate::harness::{
    evaluate_sets, load_predictions, save_predictions, ComparisonRow, PredictionRow, RepresentationFile,
};
use crate::metaset::{generate_corpus, CorpusConfig};
use crate::regressor::{load_model, save_model, train, ModelConfig, TrainConfig};
use crate::representation::{ConfidenceGroup, GroupConfig, SplitMode};

#[derive(Debug, Parser)]
#[command(name = "autoeval", version, about = "Predict classifier accuracy on unlabeled sets")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic labeled corpus of meta-sets.
    Gen(GenArgs),
    /// Extract set representations for every meta-set of a corpus.
    Extract(ExtractArgs),
    /// Train the multi-branch regressor.
    Train(TrainArgs),
    /// Predict accuracies from cached representations.
    Predict(PredictArgs),
    /// Run a confidence-score baseline.
    Baseline(BaselineArgs),
    /// Compare predictions with manifest accuracies.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// TOML corpus configuration; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModeArg {
    Quantile,
    Fixed,
}

#[derive(Debug, Args)]
pub struct ExtractArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "high,medium,low")]
    pub groups: Vec<String>,
    #[arg(long, value_enum, default_value = "quantile")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 1.0 / 3.0)]
    pub t_low: f64,
    #[arg(long, default_value_t = 2.0 / 3.0)]
    pub t_high: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Branch {
    Mean,
    Cov,
    Var,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub reps: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub model_out: PathBuf,
    /// Loss trace CSV; defaults to the model path with a `.loss.csv` suffix.
    #[arg(long)]
    pub trace_out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub ablate: Vec<Branch>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub reps: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum MethodArg {
    Ps,
    Es,
    Ac,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum)]
    pub method: MethodArg,
    #[arg(long, default_value_t = 0.8)]
    pub tau1: f64,
    #[arg(long, default_value_t = 0.2)]
    pub tau2: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Further prediction files (e.g. baselines) reported as comparison rows.
    #[arg(long)]
    pub compare: Vec<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Sidecar describing how a predictions CSV was produced.
pub fn sidecar_path(predictions: &Path) -> PathBuf {
    predictions.with_extension("config.json")
}

fn echo(command: &str, config: &serde_json::Value) {
    println!("{command} config: {config}");
}

fn resolve_manifest(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(crate::data::MANIFEST_FILE)
    } else {
        path.to_path_buf()
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Gen(a) => run_gen(a),
        Command::Extract(a) => run_extract(a),
        Command::Train(a) => run_train(a),
        Command::Predict(a) => run_predict(a),
        Command::Baseline(a) => run_baseline(a),
        Command::Eval(a) => run_eval(a),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run_from_args<I, T>(args: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| Error::Config(e.to_string()))?;
    run(cli)
}

fn run_gen(a: GenArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => CorpusConfig::load(p)?,
        None => CorpusConfig::default(),
    };
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    echo("gen", &serde_json::to_value(&cfg)?);
    let corpus = generate_corpus(&cfg)?;
    let manifest = save_corpus(&corpus.sets, &a.out)?;
    println!("wrote {} meta-sets, manifest {}", corpus.sets.len(), manifest.display());
    Ok(())
}

fn run_extract(a: ExtractArgs) -> Result<()> {
    let groups: Vec<ConfidenceGroup> = a.groups.iter().map(|g| g.parse()).collect::<Result<_>>()?;
    let split = match a.mode {
        ModeArg::Quantile => SplitMode::Quantile,
        ModeArg::Fixed => SplitMode::Fixed {
            t_low: a.t_low,
            t_high: a.t_high,
        },
    };
    let cfg = GroupConfig::new(split, &groups)?;
    echo("extract", &json!({ "data": a.data, "group_config": cfg, "seed": a.seed }));
    let (_, sets) = load_corpus(&a.data)?;
    let file = RepresentationFile::build(&sets, &cfg)?;
    file.save(&a.out)?;
    println!("wrote {} representations to {}", file.representations.len(), a.out.display());
    Ok(())
}

fn run_train(a: TrainArgs) -> Result<()> {
    let reps = RepresentationFile::load(&a.reps)?;
    let manifest = Manifest::load(resolve_manifest(&a.manifest))?;
    let mut mcfg = ModelConfig::new(reps.num_categories, reps.group_config.groups());
    for b in &a.ablate {
        match b {
            Branch::Mean => mcfg.use_mean = false,
            Branch::Cov => mcfg.use_cov = false,
            Branch::Var => mcfg.use_var = false,
        }
    }
    if let Some(l) = a.lambda {
        mcfg.lambda = l;
    }
    let defaults = TrainConfig::default();
    let tcfg = TrainConfig {
        learning_rate: a.lr.unwrap_or(defaults.learning_rate),
        epochs: a.epochs.unwrap_or(defaults.epochs),
        batch_size: a.batch.unwrap_or(defaults.batch_size),
        seed: a.seed.unwrap_or(defaults.seed),
        ..defaults
    };
    echo("train", &json!({ "model_config": mcfg, "train_config": tcfg }));

    let corpus = reps
        .representations
        .into_iter()
        .map(|r| {
            let acc = manifest
                .entry(&r.id)
                .and_then(|e| e.accuracy())
                .ok_or_else(|| Error::Config(format!("manifest has no accuracy for {}", r.id)))?;
            Ok((r.representation, acc))
        })
        .collect::<Result<Vec<_>>>()?;
    let outcome = train(&corpus, &tcfg, &mcfg)?;
    save_model(&outcome.model, &a.model_out)?;

    let trace_path = a
        .trace_out
        .unwrap_or_else(|| a.model_out.with_extension("loss.csv"));
    let mut trace = String::from("epoch,loss\n");
    for (epoch, loss) in outcome.loss_trace.iter().enumerate() {
        trace.push_str(&format!("{},{loss:?}\n", epoch + 1));
    }
    fs::write(&trace_path, trace).map_err(|e| Error::io(&trace_path, e))?;
    println!(
        "final loss {:.6}; model {}; trace {}",
        outcome.loss_trace.last().copied().unwrap_or(f64::NAN),
        a.model_out.display(),
        trace_path.display()
    );
    Ok(())
}

fn run_predict(a: PredictArgs) -> Result<()> {
    let model = load_model(&a.model)?;
    let reps = RepresentationFile::load(&a.reps)?;
    if reps.group_config.groups() != model.config.groups.as_slice() {
        return Err(Error::Config(format!(
            "representations use groups {:?}, model expects {:?}",
            reps.group_config.groups(),
            model.config.groups
        )));
    }
    let config = json!({
        "source": "model",
        "model": a.model,
        "model_config": model.config,
        "group_config": reps.group_config,
        "seed": a.seed,
    });
    echo("predict", &config);
    let rows = reps
        .representations
        .iter()
        .map(|r| {
            Ok(PredictionRow {
                id: r.id.clone(),
                accuracy: model.predict(&r.representation)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    save_predictions(&rows, &a.out)?;
    write_json(&sidecar_path(&a.out), &config)?;
    println!("wrote {} predictions to {}", rows.len(), a.out.display());
    Ok(())
}

fn run_baseline(a: BaselineArgs) -> Result<()> {
    let baseline = match a.method {
        MethodArg::Ps => Baseline::Ps { tau1: a.tau1 },
        MethodArg::Es => Baseline::Es { tau2: a.tau2 },
        MethodArg::Ac => Baseline::Ac,
    };
    baseline.validate()?;
    let config = json!({ "source": "baseline", "name": baseline.to_string(), "baseline": baseline, "seed": a.seed });
    echo("baseline", &config);
    let (_, sets) = load_corpus(&a.data)?;
    let rows: Vec<PredictionRow> = sets
        .iter()
        .map(|s| PredictionRow {
            id: s.id.clone(),
            accuracy: baseline.estimate(&s.matrix),
        })
        .collect();
    save_predictions(&rows, &a.out)?;
    write_json(&sidecar_path(&a.out), &config)?;
    println!("wrote {} baseline estimates to {}", rows.len(), a.out.display());
    Ok(())
}

fn read_sidecar(predictions: &Path) -> serde_json::Value {
    fs::read_to_string(sidecar_path(predictions))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or(serde_json::Value::Null)
}

fn label_for(path: &Path, sidecar: &serde_json::Value) -> String {
    match sidecar.get("name").and_then(serde_json::Value::as_str) {
        Some(name) => name.to_string(),
        None => path
            .file_stem()
            .map_or_else(|| "predictions".into(), |s| s.to_string_lossy().into_owned()),
    }
}

fn evaluate_file(pred: &Path, manifest: &Manifest) -> Result<crate::harness::EvalReport> {
    let rows = load_predictions(pred)?;
    if rows.len() != manifest.meta_sets.len() {
        return Err(Error::LengthMismatch {
            what: "predictions vs manifest entries",
            left: rows.len(),
            right: manifest.meta_sets.len(),
        });
    }
    let mut ids = Vec::with_capacity(rows.len());
    let mut preds = Vec::with_capacity(rows.len());
    let mut truths = Vec::with_capacity(rows.len());
    for entry in &manifest.meta_sets {
        let row = rows
            .iter()
            .find(|r| r.id == entry.id)
            .ok_or_else(|| Error::Config(format!("no prediction for meta-set {}", entry.id)))?;
        let truth = entry
            .accuracy()
            .ok_or_else(|| Error::Config(format!("manifest has no accuracy for {}", entry.id)))?;
        ids.push(entry.id.clone());
        preds.push(row.accuracy.clone());
        truths.push(truth);
    }
    evaluate_sets(&ids, &preds, &truths)
}

fn run_eval(a: EvalArgs) -> Result<()> {
    let manifest = Manifest::load(resolve_manifest(&a.manifest))?;
    let sidecar = read_sidecar(&a.pred);
    let mut report = evaluate_file(&a.pred, &manifest)?;
    for path in &a.compare {
        let r = evaluate_file(path, &manifest)?;
        let ComparisonRow {
            overall_rmse_pct,
            category_rmse_pct,
            ..
        } = r.row("");
        report.comparisons.push(ComparisonRow {
            name: label_for(path, &read_sidecar(path)),
            overall_rmse_pct,
            category_rmse_pct,
        });
    }
    report.config = json!({
        "predictions": a.pred,
        "manifest": a.manifest,
        "seed": a.seed,
        "prediction_config": sidecar,
        "category_pooling": crate::harness::CATEGORY_POOLING,
    });
    echo("eval", &report.config);
    report.save_json(&a.out)?;
    print!("{}", report.to_table(&label_for(&a.pred, &sidecar)));
    Ok(())
}
