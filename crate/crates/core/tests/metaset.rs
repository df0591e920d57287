use autoeval::compute_accuracy;
use autoeval::metaset::{generate_corpus, generate_metaset, CorpusConfig, Range, ShiftParams};

fn small(seed: u64) -> CorpusConfig {
    CorpusConfig {
        num_meta_sets: 12,
        num_instances: 80,
        num_categories: 5,
        seed,
        ..CorpusConfig::default()
    }
}

#[test]
fn default_corpus_spans_easy_and_hard_sets() {
    let corpus = generate_corpus(&CorpusConfig::default()).unwrap();
    assert_eq!(corpus.sets.len(), 300);
    let accs: Vec<f64> = corpus.sets.iter().map(|s| s.accuracy.as_ref().unwrap().overall).collect();
    let min = accs.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = accs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    println!("overall accuracy range [{min:.4}, {max:.4}]");
    assert!(min < 0.4, "min {min}");
    assert!(max > 0.9, "max {max}");
}

#[test]
fn same_seed_same_corpus() {
    let a = generate_corpus(&small(5)).unwrap();
    let b = generate_corpus(&small(5)).unwrap();
    assert_eq!(a.sets, b.sets);
    assert_eq!(a.params, b.params);
    let c = generate_corpus(&small(6)).unwrap();
    assert_ne!(a.sets, c.sets);
}

#[test]
fn rows_are_simplex_points_and_manifest_is_exact() {
    let corpus = generate_corpus(&small(9)).unwrap();
    for (set, entry) in corpus.sets.iter().zip(&corpus.manifest.meta_sets) {
        for row in set.matrix.rows() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            assert!(row.iter().all(|v| *v >= 0.0));
        }
        let truth = compute_accuracy(&set.matrix, set.labels.as_ref().unwrap()).unwrap();
        assert_eq!(entry.accuracy(), Some(truth.clone()));
        assert!(truth.per_category.iter().all(Option::is_some));
    }
}

#[test]
fn single_set_corpus_has_one_manifest_entry() {
    let cfg = CorpusConfig { num_meta_sets: 1, ..small(1) };
    assert_eq!(generate_corpus(&cfg).unwrap().manifest.meta_sets.len(), 1);
}

#[test]
fn more_noise_does_not_raise_mean_accuracy() {
    let grid: Vec<f64> = (0..10).map(|i| 0.2 + 0.3 * i as f64).collect();
    let means: Vec<f64> = grid
        .iter()
        .map(|&noise| {
            let p = ShiftParams::new(10, 2.0, noise, 1.0, 1.0);
            (0..50u64)
                .map(|seed| generate_metaset(&p, 200, seed, true, "m").unwrap().accuracy.unwrap().overall)
                .sum::<f64>()
                / 50.0
        })
        .collect();
    let violations = means.windows(2).filter(|w| w[1] > w[0]).count();
    println!("mean accuracy over noise grid: {means:?}");
    assert!(violations <= 2, "{violations} violations");
}

#[test]
fn all_equal_logits_predict_category_zero() {
    let p = ShiftParams::new(4, 0.0, 0.0, 1.0, 0.0);
    let set = generate_metaset(&p, 40, 3, true, "t").unwrap();
    let zeros = set.labels.as_ref().unwrap().as_slice().iter().filter(|&&y| y == 0).count();
    assert_eq!(set.accuracy.unwrap().overall, zeros as f64 / 40.0);
}

#[test]
fn temperature_changes_confidence_but_not_accuracy() {
    let cold = generate_metaset(&ShiftParams::new(4, 1.5, 0.0, 0.5, 0.7), 30, 4, true, "c").unwrap();
    let warm = generate_metaset(&ShiftParams::new(4, 1.5, 0.0, 2.5, 0.7), 30, 4, true, "w").unwrap();
    assert_eq!(cold.labels, warm.labels);
    assert_eq!(cold.accuracy, warm.accuracy);
    assert_ne!(cold.matrix, warm.matrix);
}

#[test]
fn toml_config_overrides_defaults() {
    let text = r#"
num_meta_sets = 4
num_instances = 50
num_categories = 3
seed = 7

[ranges]
noise = [0.1, 0.5]
"#;
    let cfg = CorpusConfig::from_toml_str(text).unwrap();
    assert_eq!(cfg.num_meta_sets, 4);
    assert_eq!(cfg.ranges.noise, Range(0.1, 0.5));
    assert_eq!(cfg.ranges.signal, Range(0.5, 4.0));
    assert!(CorpusConfig::from_toml_str("bogus_key = 1").is_err());
    assert!(CorpusConfig::from_toml_str("num_instances = 2").is_err());
}

#[test]
fn presence_enforcement_needs_enough_instances() {
    let p = ShiftParams::new(6, 1.0, 1.0, 1.0, 0.0);
    assert!(generate_metaset(&p, 4, 0, true, "x").is_err());
    assert!(generate_metaset(&p, 4, 0, false, "x").is_ok());
}
