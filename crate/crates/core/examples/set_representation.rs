//! Splits one meta-set into High/Medium/Low confidence groups per category
//! and prints the resulting statistics.
//!
//! ```bash
//! cargo run -p autoeval --example set_representation
//! ```

use autoeval::metaset::{generate_metaset, ShiftParams};
use autoeval::representation::{split_groups, SplitMode};
use autoeval::{extract_representation, ConfidenceGroup, GroupConfig};

fn main() -> autoeval::Result<()> {
    let params = ShiftParams::new(4, 2.0, 1.0, 1.0, 0.5);
    let set = generate_metaset(&params, 30, 1, true, "demo")?;
    println!("true accuracy: {:?}", set.accuracy.as_ref().unwrap());

    let quantile = GroupConfig::default();
    let rep = extract_representation(&set.matrix, &quantile)?;
    let split = split_groups(&set.matrix, &quantile)?;
    for (g, group) in quantile.groups().iter().enumerate() {
        println!("\n{group} group (category 0 members: {:?})", split.members[0][g]);
        for d in 0..4 {
            let mean: Vec<String> = (0..4).map(|k| format!("{:.3}", rep.f_mean.get(g, d, k))).collect();
            let cov: Vec<String> = (0..4).map(|k| format!("{:+.4}", rep.f_cov.get(g, d, k))).collect();
            println!("  by category {d}: mean [{}]  cov [{}]", mean.join(" "), cov.join(" "));
        }
    }
    println!("\nvariance slice for category 2 (groups x categories):");
    for g in 0..3 {
        let row: Vec<String> = (0..4).map(|d| format!("{:.4}", rep.f_var_all.get(2, g, d))).collect();
        println!("  {}", row.join(" "));
    }

    let fixed = GroupConfig::new(SplitMode::Fixed { t_low: 0.3, t_high: 0.7 }, &ConfidenceGroup::ALL)?;
    let rep = extract_representation(&set.matrix, &fixed)?;
    println!("\nfixed thresholds 0.3/0.7, nonempty groups per category: {:?}", rep.group_presence);
    Ok(())
}
