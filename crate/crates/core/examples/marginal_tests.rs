//! The local tests used at closure nodes, applied to one data set.
//!
//! ```bash
//! cargo run --release --example marginal_tests
//! ```

use dunnett_ctp::contrasts::{dunnett_contrasts, grand_mean_contrasts, Subset};
use dunnett_ctp::design::{fit_one_way, Dataset};
use dunnett_ctp::marginal::{anova_f, mct_maxtest, two_sample_t, ElementaryMode, FDenominator, Sidedness, TwoSampleDf};
use dunnett_ctp::mvt::MvtOptions;

fn main() -> dunnett_ctp::error::Result<()> {
    let data = Dataset::from_samples(&[
        vec![9.8, 10.4, 10.1, 9.5, 10.9],
        vec![10.2, 11.0, 10.6, 9.9, 10.8],
        vec![11.9, 12.4, 11.1, 12.8, 11.6],
    ])?;
    let fit = fit_one_way(&data)?;
    let side = Sidedness::TwoSided;
    let opts = MvtOptions::default();
    println!("means {:?}, s2 {:.4}, df {}", fit.means, fit.s2, fit.df);

    let all = Subset::full(2);
    let du = mct_maxtest(&dunnett_contrasts(3, all)?, &fit, side, &opts, 1)?;
    println!("max-t, many-to-one: max |t| {:.3}, p {:.4}", du.statistic, du.p);
    for row in du.per_row.iter().flatten() {
        println!("  {:>6}: t {:+.3}, adjusted p {:.4}", row.label, row.t, row.p_adjusted);
    }
    let gm = mct_maxtest(&grand_mean_contrasts(3, all)?, &fit, side, &opts, 1)?;
    println!("max-t, grand mean: max |t| {:.3}, p {:.4}", gm.statistic, gm.p);
    let f = anova_f(all, &fit, ElementaryMode::SubsetF, FDenominator::SubsetRefit, side)?;
    println!("F test: F {:.3} on df {}, p {:.4}", f.statistic, f.df_used, f.p);
    for i in 1..=2 {
        let t = two_sample_t(i, &fit, side, TwoSampleDf::PooledFull)?;
        println!("t test 0 vs {i}: t {:+.3}, p {:.4}", t.statistic, t.p);
    }
    Ok(())
}
