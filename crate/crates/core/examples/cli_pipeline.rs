//! Drives the command-line pipeline in-process: gen, extract, train,
//! predict, baseline and eval inside a temporary directory.
//!
//! ```bash
//! cargo run --release -p autoeval --example cli_pipeline
//! ```

use autoeval::cli::run_from_args;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let p = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    std::fs::write(
        dir.path().join("corpus.toml"),
        "num_meta_sets = 80\nnum_instances = 300\nnum_categories = 5\nseed = 1\n",
    )?;

    let steps: Vec<Vec<String>> = vec![
        vec!["gen", "--config", &p("corpus.toml"), "--out", &p("data")],
        vec!["extract", "--data", &p("data"), "--out", &p("reps.json")],
        vec!["train", "--reps", &p("reps.json"), "--manifest", &p("data"), "--model-out", &p("model.json"), "--epochs", "60", "--batch", "16"],
        vec!["predict", "--model", &p("model.json"), "--reps", &p("reps.json"), "--out", &p("pred.csv")],
        vec!["baseline", "--data", &p("data"), "--method", "ps", "--tau1", "0.8", "--out", &p("ps.csv")],
        vec!["baseline", "--data", &p("data"), "--method", "ac", "--out", &p("ac.csv")],
        vec!["eval", "--pred", &p("pred.csv"), "--manifest", &p("data"), "--out", &p("report.json"), "--compare", &p("ps.csv"), "--compare", &p("ac.csv")],
    ]
    .into_iter()
    .map(|s| s.into_iter().map(String::from).collect())
    .collect();

    for args in steps {
        println!("\n$ autoeval {}", args.join(" "));
        run_from_args(std::iter::once("autoeval".to_string()).chain(args))?;
    }
    println!("\n(training-set evaluation; see train_and_predict for a held-out split)");
    Ok(())
}
