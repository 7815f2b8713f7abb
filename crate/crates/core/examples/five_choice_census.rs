//! The 5-choice census with pruning and checkpoints. Pass a directory to
//! keep the checkpoints between runs.

use std::time::Instant;

use wlc::enumeration::{greatest_optimal_ect, CensusConfig, Method};

fn main() -> wlc::Result<()> {
    let checkpoint = std::env::args().nth(1).map(Into::into);
    let start = Instant::now();
    let cfg = CensusConfig {
        checkpoint,
        compute_gct: false,
        ..CensusConfig::five_choice_reductions()
    };
    let best = greatest_optimal_ect(5, &cfg, 1e-6)?;
    let count = |m: Method| best.census.entries.iter().filter(|e| e.method == m).count();
    println!(
        "{} games: {} won in one round, {} bounded by wait-or-move, {} optimized",
        best.census.entries.len(),
        count(Method::OneRound),
        count(Method::WmBound),
        count(Method::Optimizer)
    );
    println!(
        "greatest optimal ECT {:.9} at {:?} in {:.1?}",
        best.value,
        best.witnesses,
        start.elapsed()
    );
    Ok(())
}
