//! Multivariate t box probabilities and equicoordinate critical values.
//!
//! ```bash
//! cargo run --release --example mvt_probability
//! ```

use dunnett_ctp::contrasts::CorrelationMatrix;
use dunnett_ctp::mvt::{equicoordinate_quantile, mvt_cdf_box, MvtOptions, MvtProblem, Tail};

fn main() -> dunnett_ctp::error::Result<()> {
    let opts = MvtOptions::default();
    let r = CorrelationMatrix::equicorrelated(3, 0.5)?;

    let inf = f64::INFINITY;
    let box_ = MvtProblem::new(vec![-1.0, -inf, 0.5], vec![2.0, 1.5, inf], r.clone(), 12.0)?;
    let p = mvt_cdf_box(&box_, &opts, 1)?;
    println!("P(-1 < T1 < 2, T2 < 1.5, T3 > 0.5), df 12 = {:.5} +- {:.1e} ({} points)", p.value, p.abs_error, p.n_samples);

    // Dunnett critical values for three balanced comparisons.
    for df in [10.0, 30.0, 0.0] {
        let one = equicoordinate_quantile(&r, df, 0.95, Tail::OneSided, &opts, 7)?;
        let two = equicoordinate_quantile(&r, df, 0.95, Tail::TwoSided, &opts, 7)?;
        let label = if df == 0.0 { "normal".to_string() } else { format!("df {df}") };
        println!("{label:>8}: one-sided {one:.4}, two-sided {two:.4}");
    }
    Ok(())
}
