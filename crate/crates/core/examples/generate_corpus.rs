//! Generates a labeled synthetic corpus from a TOML config and writes it as
//! CSV files plus a manifest.
//!
//! ```bash
//! cargo run --release -p autoeval --example generate_corpus -- crates/core/configs/small_corpus.toml /tmp/corpus
//! ```

use std::path::PathBuf;

use autoeval::data::{load_corpus, save_corpus};
use autoeval::metaset::{generate_corpus, CorpusConfig};

fn main() -> autoeval::Result<()> {
    let mut args = std::env::args().skip(1);
    let cfg = match args.next() {
        Some(path) => CorpusConfig::load(path)?,
        None => CorpusConfig { num_meta_sets: 20, num_instances: 300, ..CorpusConfig::default() },
    };
    let out = args.next().map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("autoeval-corpus"));

    let corpus = generate_corpus(&cfg)?;
    let manifest = save_corpus(&corpus.sets, &out)?;
    println!("{} meta-sets written, manifest at {}", corpus.sets.len(), manifest.display());

    let mut rows: Vec<_> = corpus.sets.iter().zip(&corpus.params).collect();
    rows.sort_by(|a, b| a.0.accuracy.as_ref().unwrap().overall.total_cmp(&b.0.accuracy.as_ref().unwrap().overall));
    println!("{:<10} {:>8} {:>7} {:>7} {:>7} {:>7}", "id", "accuracy", "signal", "noise", "temp", "conf");
    for (set, p) in rows.iter().take(3).chain(rows.iter().rev().take(3)) {
        println!(
            "{:<10} {:>8.4} {:>7.3} {:>7.3} {:>7.3} {:>7.3}",
            set.id,
            set.accuracy.as_ref().unwrap().overall,
            p.signal,
            p.noise,
            p.temperature,
            p.confusion_strength
        );
    }

    let (_, reloaded) = load_corpus(&manifest)?;
    assert_eq!(reloaded, corpus.sets);
    println!("reloaded corpus matches exactly");
    Ok(())
}
