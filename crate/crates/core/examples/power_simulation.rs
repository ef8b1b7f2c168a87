//! Power of the four procedures for one design, and the CSV table row.
//!
//! ```bash
//! cargo run --release --example power_simulation
//! ```
//!
//! Whole scenario files run from the command line:
//!
//! ```bash
//! dunnett-ctp simulate crates/core/data/reference_designs.toml --out rates.csv
//! ```

use dunnett_ctp::simulation::{emit_csv, emit_text, simulate, Precision, Scenario, SimulationOptions};

fn main() -> dunnett_ctp::error::Result<()> {
    // Unbalanced design with two active doses.
    let sc = Scenario::new(vec![8, 5, 5, 2], vec![10.0, 10.0, 13.0, 13.0], vec![2.0; 4]).with_runs(4000).with_seed(1);
    let report = simulate(&sc, &SimulationOptions::default())?;
    println!("{:?} error rate under the true nulls {:?}", report.fwer_type, sc.true_nulls());
    for r in &report.procedures {
        println!(
            "{:>8}: per pair {:?}, any pair {:.3}, error rate {:.3} +- {:.3}",
            r.procedure.name(),
            r.per_pair.iter().map(|p| format!("{p:.3}")).collect::<Vec<_>>(),
            r.any_pair,
            r.fwer,
            r.fwer_se
        );
    }
    println!();
    print!("{}", emit_text(std::slice::from_ref(&report))?);
    println!();
    print!("{}", emit_csv(&[report], Precision::Significant)?);
    Ok(())
}
