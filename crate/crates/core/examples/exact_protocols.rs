//! Exact coordination times of uniform play, wait-or-move and loop
//! avoidance on choice matching games.

use wlc::analysis::{analyze, build_chain, AnalysisConfig};
use wlc::catalog::choice_matching;
use wlc::protocols::{LoopAvoidance, Protocol, Uniform, WaitOrMove};
use wlc::symmetry::SymmetryConfig;

fn main() -> wlc::Result<()> {
    let cfg = AnalysisConfig::default();
    let protocols: Vec<Box<dyn Protocol>> = vec![
        Box::new(Uniform),
        Box::new(WaitOrMove::new()),
        Box::new(LoopAvoidance::new(SymmetryConfig::default())),
    ];
    for m in 2..=7 {
        for pr in &protocols {
            match analyze(&choice_matching(m), pr.as_ref(), &cfg) {
                Ok(report) => println!("CM_{m}  {report}"),
                Err(e) => println!("CM_{m}  {}: {e}", pr.name()),
            }
        }
    }
    let chain = build_chain(
        &choice_matching(3),
        &LoopAvoidance::new(SymmetryConfig::default()),
        &cfg,
    )?;
    println!("{}", chain.dump_json());
    Ok(())
}
