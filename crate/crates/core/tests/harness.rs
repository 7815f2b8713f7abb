use wlc::analysis::{exact_ect, AnalysisConfig};
use wlc::catalog::choice_matching;
use wlc::harness::*;
use wlc::optimizer::OptimizerConfig;
use wlc::protocols::{LoopAvoidance, Protocol, Uniform, WaitOrMove};
use wlc::symmetry::SymmetryConfig;

#[test]
fn golden_rows_for_larger_m() {
    let cells = golden_table(&[5, 6, 7, 8, 9], &OptimizerConfig::default(), 1e-6).unwrap();
    for c in &cells {
        assert!(c.pass, "{c:?}");
    }
    assert!(cells
        .iter()
        .any(|c| c.m == 6 && c.quantity == "optimal protocol"));
}

fn check(m: usize, pr: &dyn Protocol, episodes: u64, seed: u64) {
    let exact = exact_ect(&choice_matching(m), pr, &AnalysisConfig::default())
        .unwrap()
        .to_f64();
    let r = simulate(
        &choice_matching(m),
        pr,
        &SimConfig {
            episodes,
            seed,
            ..SimConfig::default()
        },
    )
    .unwrap();
    assert!(
        r.agrees_with(exact, 4.0),
        "CM_{m} {}: mean {} ± {} vs {exact}",
        pr.name(),
        r.mean,
        r.stderr
    );
}

#[test]
fn monte_carlo_matches_exact_values() {
    check(
        5,
        &LoopAvoidance::new(SymmetryConfig::default()),
        100_000,
        11,
    );
    check(2, &WaitOrMove::new(), 100_000, 12);
    let r = simulate(
        &choice_matching(2),
        &WaitOrMove::new(),
        &SimConfig {
            episodes: 100_000,
            seed: 12,
            max_rounds: 10_000,
        },
    )
    .unwrap();
    assert_eq!(r.truncations, 0);
    for m in 2..=7 {
        check(m, &WaitOrMove::new(), 20_000, 100 + m as u64);
        check(m, &Uniform, 20_000, 200 + m as u64);
    }
    for m in [3, 5, 7] {
        check(
            m,
            &LoopAvoidance::new(SymmetryConfig::default()),
            20_000,
            300 + m as u64,
        );
    }
}
