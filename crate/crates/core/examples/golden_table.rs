//! Optimal values of choice matching games against the reference table.

use wlc::harness::golden_table;
use wlc::optimizer::OptimizerConfig;

fn main() -> wlc::Result<()> {
    let cells = golden_table(
        &[1, 2, 3, 4, 5, 6, 7, 8, 9],
        &OptimizerConfig::default(),
        1e-6,
    )?;
    for c in &cells {
        println!(
            "{} m={} {:<20} {:<16} {}",
            if c.pass { "ok  " } else { "FAIL" },
            c.m,
            c.quantity,
            c.expected,
            c.computed
        );
    }
    Ok(())
}
