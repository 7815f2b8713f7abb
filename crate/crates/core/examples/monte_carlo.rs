//! Simulated coordination times next to exact values.

use wlc::analysis::{exact_ect, AnalysisConfig};
use wlc::catalog::choice_matching;
use wlc::harness::{simulate, SimConfig};
use wlc::protocols::{LoopAvoidance, WaitOrMove};
use wlc::symmetry::SymmetryConfig;

fn main() -> wlc::Result<()> {
    let cfg = SimConfig {
        episodes: 100_000,
        seed: 42,
        ..SimConfig::default()
    };
    let la = LoopAvoidance::new(SymmetryConfig::default());
    let wm = WaitOrMove::new();
    for (m, pr) in [(5, &la as &dyn wlc::protocols::Protocol), (6, &wm)] {
        let game = choice_matching(m);
        let exact = exact_ect(&game, pr, &AnalysisConfig::default())?;
        let r = simulate(&game, pr, &cfg)?;
        println!(
            "CM_{m} {}: exact {exact} ({:.5}), simulated {:.5} +- {:.5}",
            pr.name(),
            exact.to_f64(),
            r.mean,
            r.stderr
        );
        println!(
            "  rounds: {:?}",
            r.histogram.iter().take(6).collect::<Vec<_>>()
        );
    }
    Ok(())
}
