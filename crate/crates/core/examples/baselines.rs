//! Confidence-score baselines on a few synthetic meta-sets of varying
//! difficulty.
//!
//! ```bash
//! cargo run -p autoeval --example baselines
//! ```

use autoeval::baselines::Baseline;
use autoeval::harness::{evaluate_baseline, format_table, standard_baselines};
use autoeval::metaset::{generate_metaset, ShiftParams};

fn main() -> autoeval::Result<()> {
    let methods = standard_baselines();
    let sets = [(3.5, 0.3), (2.0, 1.0), (1.0, 2.5)]
        .iter()
        .enumerate()
        .map(|(i, &(signal, noise))| generate_metaset(&ShiftParams::new(6, signal, noise, 1.0, 0.5), 500, i as u64, true, format!("s{i}")))
        .collect::<autoeval::Result<Vec<_>>>()?;

    print!("{:<8} {:>8}", "set", "truth");
    for m in &methods {
        print!(" {:>13}", m.to_string());
    }
    println!();
    for set in &sets {
        print!("{:<8} {:>8.3}", set.id, set.accuracy.as_ref().unwrap().overall);
        for m in &methods {
            print!(" {:>13.3}", m.estimate(&set.matrix).overall);
        }
        println!();
    }

    let ac = Baseline::Ac.estimate(&sets[1].matrix);
    println!("\nAC per predicted category on {}: {:?}", sets[1].id, ac.per_category);

    let rows = methods
        .iter()
        .map(|m| Ok(evaluate_baseline(m, &sets)?.row(m.to_string())))
        .collect::<autoeval::Result<Vec<_>>>()?;
    print!("\n{}", format_table(&rows));
    Ok(())
}
