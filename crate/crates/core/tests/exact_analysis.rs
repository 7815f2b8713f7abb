use num_rational::BigRational;
use wlc::analysis::{analyze, build_chain, AnalysisConfig, Extended};
use wlc::catalog::choice_matching;
use wlc::protocols::{LoopAvoidance, WaitOrMove};
use wlc::symmetry::SymmetryConfig;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

#[test]
fn wm_is_three_minus_two_over_m() {
    for m in 2..=9 {
        let r = analyze(
            &choice_matching(m),
            &WaitOrMove::new(),
            &AnalysisConfig::default(),
        )
        .unwrap();
        assert_eq!(
            r.ect,
            Extended::Finite(q(3 * m as i64 - 2, m as i64)),
            "m={m}"
        );
        assert_eq!(r.gct, Extended::Infinite);
    }
}

#[test]
fn la_golden_values() {
    let cfg = AnalysisConfig::default();
    for (m, ect) in [(3, q(5, 3)), (5, q(7, 3)), (7, q(3, 1)), (9, q(11, 3))] {
        let r = analyze(
            &choice_matching(m),
            &LoopAvoidance::new(SymmetryConfig::default()),
            &cfg,
        )
        .unwrap();
        assert_eq!(r.ect, Extended::Finite(ect), "m={m}");
        assert_eq!(r.gct, Extended::Finite(m.div_ceil(2) as u64), "m={m}");
    }
    for m in [2, 4, 6, 8] {
        let r = analyze(
            &choice_matching(m),
            &LoopAvoidance::new(SymmetryConfig::default()),
            &cfg,
        )
        .unwrap();
        assert_eq!(r.gct, Extended::Infinite, "m={m}");
    }
}

#[test]
fn chains_are_stochastic() {
    for m in 1..=6 {
        let la = LoopAvoidance::new(SymmetryConfig::default());
        for pr in [
            &WaitOrMove::new() as &dyn wlc::protocols::Protocol,
            &la,
            &wlc::protocols::Uniform,
        ] {
            assert!(
                build_chain(&choice_matching(m), pr, &AnalysisConfig::default())
                    .unwrap()
                    .is_stochastic()
            );
        }
    }
}

#[test]
fn wm_lemma_two_touched_edges() {
    // Every post-miss WM state in CM_m has conditional ECT 2.
    for m in 2..=7 {
        let chain = build_chain(
            &choice_matching(m),
            &WaitOrMove::new(),
            &AnalysisConfig::default(),
        )
        .unwrap();
        let ects = chain.state_ects();
        for (s, e) in chain.states.iter().zip(&ects).skip(1) {
            let touched = s.stage.touched_edges().len();
            if touched == 2 {
                assert_eq!(*e, Extended::Finite(q(2, 1)), "m={m}");
            }
        }
    }
}
