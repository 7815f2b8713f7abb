use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::catalog;

fn cfg() -> SymmetryConfig {
    SymmetryConfig::default()
}

fn cm(m: usize) -> Arc<Game> {
    Arc::new(catalog::choice_matching(m))
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn marginal(pr: &dyn Protocol, s: &Stage) -> [ChoiceDistribution; 2] {
    [
        pr.distribution(s, Side::Left, &Memory::default()).unwrap(),
        pr.distribution(s, Side::Right, &Memory::default()).unwrap(),
    ]
}

fn reachable(pr: &dyn Protocol, game: Arc<Game>, depth: usize) -> Vec<Stage> {
    reachable_stages(pr, game, depth, &cfg())
        .unwrap()
        .into_iter()
        .map(|x| x.0)
        .collect()
}

#[test]
fn uniform_is_uniform() {
    let s = Stage::initial(cm(3));
    let d = Uniform
        .distribution(&s, Side::Right, &Memory::default())
        .unwrap();
    assert_eq!(d.weights, vec![q(1, 3); 3]);
    let one = uniform_protocol(&Stage::initial(cm(1)), Side::Left);
    assert_eq!(one.weights, vec![q(1, 1)]);
}

#[test]
fn wait_or_move_in_choice_matching() {
    let wm = WaitOrMove::new();
    let s = Stage::initial(cm(4));
    assert_eq!(
        wm.distribution(&s, Side::Left, &Memory::default())
            .unwrap()
            .weights,
        vec![q(1, 4); 4]
    );
    let (t, won) = s.advance((0, 1)).unwrap();
    assert!(!won);
    let left = wm.distribution(&t, Side::Left, &Memory::default()).unwrap();
    assert_eq!(left.weights, vec![q(1, 2), q(1, 2), q(0, 1), q(0, 1)]);
    let right = wm
        .distribution(&t, Side::Right, &Memory::default())
        .unwrap();
    assert_eq!(right.weights, vec![q(1, 2), q(1, 2), q(0, 1), q(0, 1)]);
    let branches = wm
        .update_memory(&t, Side::Left, &Memory::default())
        .unwrap();
    assert_eq!(branches, vec![(q(1, 1), Memory { committed: Some(1) })]);
}

#[test]
fn wait_or_move_commits_once() {
    // R0 has two partners, so Left's commitment is a fair draw.
    let g = Arc::new(catalog::z_game());
    let wm = WaitOrMove::new();
    let (t, _) = Stage::initial(g).advance((2, 0)).unwrap();
    let branches = wm
        .update_memory(&t, Side::Left, &Memory::default())
        .unwrap();
    assert_eq!(branches.len(), 2);
    assert!(branches.iter().all(|(p, _)| *p == q(1, 2)));
    let mem = &branches[1].1;
    let (u, _) = t.advance((2, 2)).unwrap();
    assert_eq!(
        wm.update_memory(&u, Side::Left, mem).unwrap(),
        vec![(q(1, 1), mem.clone())]
    );
    let d = wm.distribution(&u, Side::Left, mem).unwrap();
    assert!(d.support().len() <= 2);
    assert_eq!(d.weights[2], q(1, 2));
    let marginal = wm.distribution(&u, Side::Left, &Memory::default()).unwrap();
    assert_eq!(marginal.weights, vec![q(1, 4), q(1, 4), q(1, 2)]);
}

#[test]
fn wait_or_move_degree_opening() {
    let g = Arc::new(catalog::degree_four_special());
    let wm = WaitOrMove::with_opening(Opening::DegreeMass {
        degree: 4,
        mass: q(1, 2),
    });
    let d = wm
        .distribution(&Stage::initial(g), Side::Left, &Memory::default())
        .unwrap();
    assert_eq!(d.weights[0], q(1, 2));
    assert_eq!(d.weights[1], q(1, 8));
    assert!(d.is_valid());
}

#[test]
fn loop_avoidance_example_three() {
    let la = LoopAvoidance::new(cfg());
    let s0 = Stage::initial(cm(5));
    assert_eq!(marginal(&la, &s0)[0].weights, vec![q(1, 5); 5]);
    let (s1, _) = s0.advance((0, 1)).unwrap();
    let [l1, r1] = marginal(&la, &s1);
    assert_eq!(l1.support(), vec![2, 3, 4]);
    assert_eq!(r1.support(), vec![2, 3, 4]);
    assert_eq!(l1.weights[2], q(1, 3));
    let (s2, _) = s1.advance((2, 3)).unwrap();
    let [l2, r2] = marginal(&la, &s2);
    assert_eq!(l2.support(), vec![4]);
    assert_eq!(r2.support(), vec![4]);
}

#[test]
fn loop_avoidance_falls_back_to_uniform() {
    // In CM_2 every miss recreates the same class structure.
    let la = LoopAvoidance::new(cfg());
    let (s, _) = Stage::initial(cm(2)).advance((0, 1)).unwrap();
    assert_eq!(marginal(&la, &s)[0].weights, vec![q(1, 2); 2]);
}

#[test]
fn loop_avoidance_odd_never_touches() {
    for m in [3, 5, 7] {
        let la = LoopAvoidance::new(cfg());
        for s in reachable(&la, cm(m), m / 2) {
            let touched = s.touched_edges();
            let [dl, dr] = marginal(&la, &s);
            for &(l, r) in &touched {
                assert!(
                    dl.prob(l).is_zero() && dr.prob(r).is_zero(),
                    "m={m} {}",
                    s.trace()
                );
            }
        }
    }
}

#[test]
fn shipped_protocols_are_structural() {
    for m in 1..=5 {
        let wm = WaitOrMove::new();
        for s in reachable(&wm, cm(m), 3) {
            assert!(
                structurality_check(&wm, &s, &cfg()).unwrap(),
                "wm {}",
                s.trace()
            );
        }
        let la = LoopAvoidance::new(cfg());
        for s in reachable(&la, cm(m), 4) {
            assert!(
                structurality_check(&la, &s, &cfg()).unwrap(),
                "la {}",
                s.trace()
            );
        }
        for s in reachable(&Uniform, cm(m.min(3)), 2) {
            assert!(structurality_check(&Uniform, &s, &cfg()).unwrap());
        }
    }
    let la = LoopAvoidance::new(cfg());
    for (_, g) in catalog::three_choice_atlas() {
        for s in reachable(&la, Arc::new(g), 3) {
            assert!(structurality_check(&la, &s, &cfg()).unwrap());
        }
    }
}

struct Pinned;

impl Protocol for Pinned {
    fn name(&self) -> String {
        "pinned".into()
    }
    fn view(&self) -> View {
        View::History
    }
    fn distribution(&self, stage: &Stage, player: Side, _: &Memory) -> Result<ChoiceDistribution> {
        Ok(ChoiceDistribution::uniform_over(
            player,
            stage.game().count(player),
            &[0],
        ))
    }
}

#[test]
fn pinned_protocol_is_not_structural() {
    assert!(!structurality_check(&Pinned, &Stage::initial(cm(2)), &cfg()).unwrap());
}

#[test]
fn empty_table_is_missing_entries() {
    let p = class_weight_protocol(ClassWeightTable::default(), cfg());
    let err = p
        .distribution(&Stage::initial(cm(3)), Side::Left, &Memory::default())
        .unwrap_err();
    assert!(matches!(err, Error::MissingStageEntry(_)));
}

#[test]
fn table_reproduces_loop_avoidance_in_cm5() {
    // Build the table from LA's own decisions, then compare along LA's plays.
    let la = LoopAvoidance::new(cfg());
    let pc = PartitionCache::new(cfg());
    let mut table = ClassWeightTable::default();
    let stages = reachable(&la, cm(5), 3);
    for s in &stages {
        let p = pc.partition(s).unwrap();
        let (key, order) = partition_labeling(s, &p, &cfg()).unwrap();
        let [dl, dr] = marginal(&la, s);
        let mut weights = vec![0.0; order.len()];
        for (b, members) in p.blocks().iter().enumerate() {
            let c = s.game().choice_at(members[0]);
            let d = if c.side == Side::Left { &dl } else { &dr };
            let own = members
                .iter()
                .filter(|&&v| s.game().choice_at(v).side == c.side)
                .count();
            weights[order[b]] = d.prob(c.index).to_f64().unwrap() * own as f64;
        }
        let classes = p
            .classes(s.game())
            .iter()
            .map(|c| c.iter().map(|x| x.to_string()).collect())
            .collect();
        table.states.insert(
            key.to_string(),
            TableEntry {
                weights,
                classes,
                value: None,
            },
        );
    }
    let text = table.to_json();
    let back: ClassWeightTable = serde_json::from_str(&text).unwrap();
    let tp = class_weight_protocol(back, cfg());
    for s in &stages {
        assert_eq!(marginal(&tp, s), marginal(&la, s), "{}", s.trace());
        assert!(structurality_check(&tp, s, &cfg()).unwrap());
    }
}

#[test]
fn snapping_finds_simple_fractions() {
    assert_eq!(snap_rational(1.0 / 3.0), q(1, 3));
    assert_eq!(snap_rational(0.5), q(1, 2));
    assert_eq!(snap_rational(2.0 / 7.0 + 1e-12), q(2, 7));
    assert_eq!(snap_rational(0.0), q(0, 1));
    assert_eq!(snap_rational(1.0), q(1, 1));
}

#[test]
fn protocol_names_resolve() {
    for n in ["uniform", "wm", "la"] {
        assert_eq!(protocol_by_name(n, cfg()).unwrap().name(), n);
    }
    assert!(protocol_by_name("nope", cfg()).is_err());
}

proptest! {
    #[test]
    fn snapped_distributions_are_exact(ws in prop::collection::vec(0.0f64..10.0, 1..8)) {
        prop_assume!(ws.iter().sum::<f64>() > 1e-6);
        let d = ChoiceDistribution::from_f64(Side::Left, &ws).unwrap();
        prop_assert!(d.is_valid());
        let total: f64 = ws.iter().sum();
        for (x, w) in d.to_f64().iter().zip(&ws) {
            prop_assert!((x - w / total).abs() < 1e-8);
        }
    }

    #[test]
    fn wm_and_la_are_valid_on_random_games(g in crate::game::tests::arb_game(4), l in 0usize..4, r in 0usize..4) {
        let g = Arc::new(g);
        let s = Stage::initial(g.clone());
        let pair = (l % g.left_count(), r % g.right_count());
        let (t, _) = s.advance(pair).unwrap();
        let la = LoopAvoidance::new(cfg());
        for st in [&s, &t] {
            for pr in [&WaitOrMove::new() as &dyn Protocol, &la, &Uniform] {
                let [a, b] = marginal(pr, st);
                prop_assert!(a.is_valid() && b.is_valid());
                prop_assert!(structurality_check(pr, st, &cfg()).unwrap());
            }
        }
    }
}
