//! Closed testing of three treatments and its hypothesis tree in DOT.
//!
//! ```bash
//! cargo run --release --example closure_tree > ctp_du.dot
//! dot -Tsvg ctp_du.dot -o ctp_du.svg
//! ```

use dunnett_ctp::closure::{export_tree, run_closure, ClosureOptions, Procedure};
use dunnett_ctp::design::{fit_one_way, Dataset};

fn main() -> dunnett_ctp::error::Result<()> {
    let data = Dataset::from_samples(&[
        vec![4.1, 5.0, 4.6, 5.3, 4.4, 4.9],
        vec![4.8, 5.6, 5.1, 5.9, 5.2, 4.7],
        vec![5.9, 6.3, 5.4, 6.8, 6.1, 5.7],
        vec![6.2, 7.1, 6.6, 5.8, 6.9, 6.4],
    ])?;
    let fit = fit_one_way(&data)?;
    let r = run_closure(&fit, Procedure::CtpDu, &ClosureOptions::default(), 3)?;
    for node in &r.nodes {
        eprintln!("H{:?}: local p {:.4}", node.subset.indices(), node.local_p);
    }
    eprintln!("adjusted {:?}", r.adjusted);
    print!("{}", export_tree(&r));
    Ok(())
}
