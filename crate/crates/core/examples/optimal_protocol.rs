//! Optimal structural protocols: value, guaranteed time, policy table and
//! the uniqueness probe.

use wlc::catalog;
use wlc::optimizer::{optimal_ect, optimal_gct, uniqueness_probe, OptimizerConfig};

fn main() -> wlc::Result<()> {
    let cfg = OptimizerConfig::default();
    for (name, game) in [
        ("CM_4", catalog::choice_matching(4)),
        ("CM_5", catalog::choice_matching(5)),
        ("Z", catalog::z_game()),
    ] {
        let opt = optimal_ect(&game, &cfg)?;
        let gct = optimal_gct(&game, &cfg)?;
        println!(
            "{name}: ECT {:.9}, GCT {}, {} quotient states, {} iterations",
            opt.value,
            gct.value,
            opt.space.len(),
            opt.diagnostics.iterations
        );
        if name.starts_with("CM") {
            let probe = uniqueness_probe(&opt, 1e-9, &cfg)?;
            println!("  touched mass after the first miss: {:?}", probe.verdict);
        }
    }
    let table = optimal_ect(&catalog::choice_matching(5), &cfg)?.policy_table(&cfg.symmetry)?;
    println!("{}", table.to_json());
    Ok(())
}
