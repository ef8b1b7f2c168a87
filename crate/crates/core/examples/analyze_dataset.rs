//! Adjusted p-values of all four procedures for a dose-finding data set
//! with a gender block (additive model).
//!
//! ```bash
//! cargo run --release --example analyze_dataset
//! ```
//!
//! The same analysis from the command line:
//!
//! ```bash
//! dunnett-ctp analyze examples/data/dose_gender.csv --group-column dose \
//!     --response-column pain --block-column gender --format text
//! ```

use dunnett_ctp::closure::{run_closure, ClosureOptions, Procedure};
use dunnett_ctp::design::{fit_additive, summarize};
use dunnett_ctp::io::{read_dataset, CsvSchema};

fn main() -> dunnett_ctp::error::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/dose_gender.csv");
    let schema = CsvSchema {
        group_column: "dose".into(),
        response_column: "pain".into(),
        block_column: Some("gender".into()),
        control_label: None,
    };
    let data = read_dataset(path, &schema)?;
    for g in summarize(&data) {
        println!("dose {}: n {}, mean {:.3}, sd {:.3}", g.label, g.n, g.mean, g.sd);
    }
    let fit = fit_additive(&data)?;
    println!("additive fit: s2 {:.4} on {} df", fit.s2, fit.df);

    let opts = ClosureOptions::default();
    println!("{:>10} {:>8} {:>8} {:>8} {:>8}", "method", "dose 1", "dose 2", "dose 3", "dose 4");
    for p in Procedure::ALL {
        let r = run_closure(&fit, p, &opts, 20240501)?;
        let cells: Vec<String> = r
            .adjusted
            .iter()
            .enumerate()
            .map(|(i, a)| format!("{a:.4}{}", if r.rejected(0.05).contains(&(i + 1)) { "*" } else { " " }))
            .collect();
        println!("{:>10} {}", p.name(), cells.join(" "));
    }
    println!("* rejected at 0.05");
    Ok(())
}
