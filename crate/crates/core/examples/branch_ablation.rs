//! Compares the full model with variants that drop the mean, covariance or
//! variance input.
//!
//! ```bash
//! cargo run --release -p autoeval --example branch_ablation
//! ```

use autoeval::harness::{branch_ablation, format_table};
use autoeval::metaset::{generate_corpus, CorpusConfig};
use autoeval::{ConfidenceGroup, GroupConfig, ModelConfig, TrainConfig};

fn main() -> autoeval::Result<()> {
    let cfg = CorpusConfig { num_meta_sets: 160, num_instances: 500, num_categories: 6, seed: 12, ..CorpusConfig::default() };
    let mut train = generate_corpus(&cfg)?.sets;
    let test = train.split_off(120);
    let mcfg = ModelConfig::new(cfg.num_categories, &ConfidenceGroup::ALL);
    let tcfg = TrainConfig { epochs: 80, batch_size: 16, seed: 12, ..TrainConfig::default() };
    let rows = branch_ablation(&train, &test, &GroupConfig::default(), &mcfg, &tcfg)?;
    print!("{}", format_table(&rows.iter().map(|r| r.comparison()).collect::<Vec<_>>()));
    Ok(())
}
