//! Many-to-one and grand-mean contrast matrices and the correlation of
//! their t statistics for an unbalanced design.
//!
//! ```bash
//! cargo run --example contrasts
//! ```

use dunnett_ctp::contrasts::{correlation, dunnett_contrasts, grand_mean_contrasts, Subset};
use dunnett_ctp::design::{fit_one_way, Dataset};

fn main() -> dunnett_ctp::error::Result<()> {
    // Group sizes (8, 5, 5, 2); only the sizes matter for the correlation.
    let samples: Vec<Vec<f64>> = [8, 5, 5, 2].iter().map(|&n| (0..n).map(|j| j as f64).collect()).collect();
    let fit = fit_one_way(&Dataset::from_samples(&samples)?)?;

    let du = dunnett_contrasts(4, Subset::full(3))?;
    println!("many-to-one contrasts:");
    for (label, row) in du.labels.iter().zip(&du.rows) {
        println!("  {label:>8}  {row:?}");
    }
    println!("correlation:\n{}", correlation(&du, &fit)?.matrix());

    // Grand-mean rows for the compared set {0, 1, 3}.
    let gm = grand_mean_contrasts(4, Subset::from_indices([1, 3])?)?;
    println!("grand-mean contrasts on {{0, 1, 3}}:");
    for (label, row) in gm.labels.iter().zip(&gm.rows) {
        println!("  {label:>16}  {:?}", row.iter().map(|x| format!("{x:+.2}")).collect::<Vec<_>>());
    }
    println!("correlation:\n{}", correlation(&gm, &fit)?.matrix());
    Ok(())
}
