//! Trains the regressor on a small synthetic corpus, saves and reloads the
//! model, then predicts accuracies on held-out meta-sets.
//!
//! ```bash
//! cargo run --release -p autoeval --example train_and_predict
//! ```

use autoeval::harness::{evaluate_sets, extract_all, ids, predict_all, training_pairs, truths};
use autoeval::metaset::{generate_corpus, CorpusConfig};
use autoeval::regressor::{load_model, save_model, train};
use autoeval::{ConfidenceGroup, GroupConfig, ModelConfig, TrainConfig};

fn main() -> autoeval::Result<()> {
    let cfg = CorpusConfig { num_meta_sets: 120, num_instances: 400, num_categories: 5, seed: 3, ..CorpusConfig::default() };
    let mut sets = generate_corpus(&cfg)?.sets;
    let test = sets.split_off(90);

    let groups = GroupConfig::default();
    let pairs = training_pairs(extract_all(&sets, &groups)?, &sets)?;
    let mcfg = ModelConfig::new(cfg.num_categories, &ConfidenceGroup::ALL);
    let tcfg = TrainConfig { epochs: 100, batch_size: 16, seed: 3, ..TrainConfig::default() };
    let outcome = train(&pairs, &tcfg, &mcfg)?;
    println!(
        "{} parameters; loss {:.5} -> {:.5}",
        outcome.model.params.num_parameters(),
        outcome.loss_trace[0],
        outcome.loss_trace.last().unwrap()
    );

    let path = std::env::temp_dir().join("autoeval-example-model.json");
    save_model(&outcome.model, &path)?;
    let model = load_model(&path)?;

    let preds = predict_all(&model, &extract_all(&test, &groups)?)?;
    let truth = truths(&test)?;
    for ((id, p), t) in ids(&test).iter().zip(&preds).zip(&truth).take(5) {
        println!("{id}: predicted {:.3}, true {:.3}", p.overall, t.overall);
    }
    let report = evaluate_sets(&ids(&test), &preds, &truth)?;
    print!("{}", report.to_table("regressor"));
    Ok(())
}
