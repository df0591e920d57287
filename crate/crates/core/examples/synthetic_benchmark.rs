//! Seed-42 synthetic benchmark: 300 training and 100 held-out meta-sets with
//! 10 categories and 1000 instances each. Trains the multi-branch regressor
//! and compares it with the score baselines on the held-out sets.
//!
//! ```bash
//! cargo run --release -p autoeval --example synthetic_benchmark
//! ```

use std::time::Instant;

use autoeval::harness::Benchmark;

fn main() -> autoeval::Result<()> {
    let bench = Benchmark::standard();
    let start = Instant::now();
    let outcome = bench.run()?;
    let trace = &outcome.loss_trace;
    println!(
        "trained {} epochs in {:.1?}; loss {:.5} -> {:.5}",
        trace.len(),
        start.elapsed(),
        trace.first().copied().unwrap_or(f64::NAN),
        trace.last().copied().unwrap_or(f64::NAN)
    );
    print!("{}", outcome.report.to_table("multi-branch regressor"));
    Ok(())
}
