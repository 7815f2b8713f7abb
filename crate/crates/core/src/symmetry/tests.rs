use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

use proptest::prelude::*;

use super::*;
use crate::catalog;
use crate::game::make_choice_matching;
use crate::stage::initial_stage;

fn cfg() -> SymmetryConfig {
    SymmetryConfig::default()
}

fn cm(m: usize) -> Arc<Game> {
    Arc::new(make_choice_matching(m).unwrap())
}

fn dump(stage: &Stage) -> String {
    structural_classes(stage, &cfg())
        .unwrap()
        .dump(stage.game())
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Oracle: every bijection checked directly against the definition.
fn brute_group(stage: &Stage) -> Vec<Renaming> {
    let g = stage.game();
    let (nl, nr) = (g.left_count(), g.right_count());
    let mut out = Vec::new();
    for swap in [false, true] {
        if swap && nl != nr {
            continue;
        }
        for pl in permutations(nl) {
            for pr in permutations(nr) {
                let mut map = vec![0; nl + nr];
                for i in 0..nl {
                    map[i] = if swap { nl + pl[i] } else { pl[i] };
                }
                for j in 0..nr {
                    map[nl + j] = if swap { pr[j] } else { nl + pr[j] };
                }
                let r = Renaming {
                    swap,
                    left: nl,
                    map,
                };
                if r.preserves_game(g) && stage.history().iter().all(|&p| r.preserves_pair(p)) {
                    out.push(r);
                }
            }
        }
    }
    out.sort();
    out
}

#[test]
fn example_one_classes() {
    let s0 = Stage::initial(cm(5));
    assert_eq!(dump(&s0), "[L0 L1 L2 L3 L4 R0 R1 R2 R3 R4]");
    // a1 = L0, b2 = R1.
    let s1 = s0.advance((0, 1)).unwrap().0;
    assert_eq!(dump(&s1), "[L0 R1] [L1 R0] [L2 L3 L4 R2 R3 R4]");
    let s2 = s1.advance((1, 2)).unwrap().0;
    // Rounds keep their order, so no renaming can swap the players here
    // (it would exchange the two recorded pairs). L3/L4 and R3/R4 stay apart.
    assert_eq!(dump(&s2), "[L0] [L1] [L2] [L3 L4] [R0] [R1] [R2] [R3 R4]");
    assert_eq!(brute_group(&s2).len(), 2);
    let focal: Vec<String> = focal_points(&s2, &cfg())
        .unwrap()
        .iter()
        .map(|c| c.to_string())
        .collect();
    assert_eq!(focal, ["L0", "L1", "L2", "R0", "R1", "R2"]);
}

#[test]
fn initial_groups_of_choice_matching() {
    let mut fact = 1;
    for m in 1..=5 {
        fact *= m;
        let grp = stage_renaming_group(&Stage::initial(cm(m)), &cfg()).unwrap();
        assert_eq!(grp.len(), 2 * fact);
        assert_eq!(grp.orbits().num_blocks(), 1);
        assert!(grp.is_closed());
    }
}

#[test]
fn z_and_c6_classes_match_brute_force() {
    let z = initial_stage(&catalog::z_game());
    assert_eq!(dump(&z), "[L0 L1 R1 R2] [L2 R0]");
    assert_eq!(
        brute_group(&z),
        stage_renaming_group(&z, &cfg())
            .unwrap()
            .elements()
            .to_vec()
    );
    let c6 = initial_stage(&catalog::c6_game());
    assert_eq!(dump(&c6), "[L0 L1 L2 R0 R1 R2]");
    assert_eq!(
        brute_group(&c6).len(),
        stage_renaming_group(&c6, &cfg()).unwrap().len()
    );
}

#[test]
fn focal_points_of_small_games() {
    assert!(focal_points(&Stage::initial(cm(3)), &cfg())
        .unwrap()
        .is_empty());
    let one = focal_points(&Stage::initial(cm(1)), &cfg()).unwrap();
    assert_eq!(one, BTreeSet::from([ChoiceId::left(0), ChoiceId::right(0)]));
}

#[test]
fn automorphism_equivalence_examples() {
    let g = cm(2);
    let a = Stage::initial(g.clone()).advance((0, 1)).unwrap().0;
    let b = Stage::initial(g).advance((1, 0)).unwrap().0;
    assert!(are_automorphism_equivalent(&a, &b, &cfg()).unwrap());
    assert!(are_automorphism_equivalent(&a, &a, &cfg()).unwrap());
    let g5 = cm(5);
    let s1 = Stage::initial(g5).advance((0, 1)).unwrap().0;
    let s2 = s1.advance((1, 2)).unwrap().0;
    assert!(!are_automorphism_equivalent(&s1, &s2, &cfg()).unwrap());
}

#[test]
fn stage_keys() {
    let g = cm(3);
    let a = Stage::initial(g.clone()).advance((0, 1)).unwrap().0;
    let b = Stage::initial(g.clone()).advance((2, 0)).unwrap().0;
    let ka = canonical_stage_key(&a, &cfg()).unwrap();
    assert_eq!(ka, canonical_stage_key(&b, &cfg()).unwrap());
    assert!(renaming_between(&a, &b, &cfg()).unwrap().is_some());
    let c = a.advance((1, 2)).unwrap().0;
    assert_ne!(ka, canonical_stage_key(&c, &cfg()).unwrap());
    assert_eq!(
        ka.to_string(),
        canonical_stage_key(&a, &cfg()).unwrap().to_string()
    );
    assert_eq!(CanonicalKey::from_hex(&ka.to_string()).unwrap(), ka);
}

#[test]
fn game_keys() {
    let k = |g: &Game| canonical_game_key(g, &cfg()).unwrap();
    let cm3 = make_choice_matching(3).unwrap();
    let permuted = Game::new(3, 3, [(2, 1), (0, 2), (1, 0)]).unwrap();
    assert_eq!(k(&cm3), k(&permuted));
    let z = catalog::z_game();
    assert_eq!(k(&z), k(&z.swapped()));
    assert_ne!(k(&cm3), k(&catalog::c6_game()));
    // Different component structure but equal degree sequences.
    let p6 = Game::new(3, 3, [(0, 0), (0, 1), (1, 1), (1, 2), (2, 2)]).unwrap();
    let k2c4 = Game::new(3, 3, [(0, 0), (1, 1), (1, 2), (2, 1), (2, 2)]).unwrap();
    assert_ne!(k(&p6), k(&k2c4));
}

#[test]
fn swap_only_acts_globally() {
    // K2 plus a path L1-R1-L2. Exchanging L0 and R0 alone is an automorphism
    // of the bare graph but not a renaming, so they stay in separate classes.
    let g = Game::new(3, 2, [(0, 0), (1, 1), (2, 1)]).unwrap();
    let s = initial_stage(&g);
    assert_eq!(dump(&s), "[L0] [L1 L2] [R0] [R1]");
    assert_eq!(
        brute_group(&s),
        stage_renaming_group(&s, &cfg())
            .unwrap()
            .elements()
            .to_vec()
    );
}

#[test]
fn partition_dump_round_trip() {
    let g = cm(5);
    let s = Stage::initial(g.clone()).advance((0, 1)).unwrap().0;
    let p = structural_classes(&s, &cfg()).unwrap();
    assert_eq!(Partition::parse_dump(&g, &p.dump(&g)).unwrap(), p);
    assert!(Partition::parse_dump(&g, "[L0]").is_err());
}

/// Walks plays of CM_m up to depth `depth`, one representative per renaming
/// class at each depth. The checked properties are renaming invariant, so
/// this covers every play.
fn for_each_play(m: usize, depth: usize, mut f: impl FnMut(&Stage, &Stage, Pair)) {
    let mut frontier = vec![Stage::initial(cm(m))];
    for _ in 0..depth {
        let mut seen = HashSet::new();
        let mut next = Vec::new();
        for s in &frontier {
            for l in 0..m {
                for r in 0..m {
                    let (t, won) = s.advance((l, r)).unwrap();
                    if won {
                        continue;
                    }
                    f(s, &t, (l, r));
                    if seen.insert(canonical_stage_key(&t, &cfg()).unwrap()) {
                        next.push(t);
                    }
                }
            }
        }
        frontier = next;
    }
}

#[test]
fn refinement_is_monotone_and_incremental() {
    for m in 2..=5 {
        for_each_play(m, 4, |s, t, pair| {
            let ps = structural_classes(s, &cfg()).unwrap();
            let pt = structural_classes(t, &cfg()).unwrap();
            assert!(pt.refines(&ps));
            assert_eq!(
                successor_partition(s.game(), &ps, pair, &cfg()).unwrap(),
                pt
            );
        });
    }
}

#[test]
fn groups_filter_incrementally() {
    for m in 2..=4 {
        for_each_play(m, 3, |s, t, pair| {
            let gs = stage_renaming_group(s, &cfg()).unwrap();
            let gt = stage_renaming_group(t, &cfg()).unwrap();
            assert_eq!(gs.stabilizer(pair).elements(), gt.elements());
            assert_eq!(gt.orbits(), structural_classes(t, &cfg()).unwrap());
        });
    }
}

#[test]
fn group_closure_up_to_five() {
    for_each_play(5, 2, |_, t, _| {
        assert!(stage_renaming_group(t, &cfg()).unwrap().is_closed());
    });
}

#[test]
fn group_cap_and_budget() {
    let tiny = SymmetryConfig {
        max_group_elements: 10,
        ..cfg()
    };
    assert!(matches!(
        stage_renaming_group(&Stage::initial(cm(4)), &tiny),
        Err(Error::GroupTooLarge(10))
    ));
    let starved = SymmetryConfig {
        node_budget: 2,
        ..cfg()
    };
    assert!(matches!(
        structural_classes(&Stage::initial(cm(4)), &starved),
        Err(Error::SearchBudgetExceeded(2))
    ));
}

#[test]
fn block_numbering_follows_renamings() {
    // Renamed stages with equal partitions must number blocks alike.
    let g = cm(5);
    let a = Stage::initial(g.clone()).advance((0, 1)).unwrap().0;
    let b = Stage::initial(g.clone()).advance((1, 0)).unwrap().0;
    let pa = structural_classes(&a, &cfg()).unwrap();
    let pb = structural_classes(&b, &cfg()).unwrap();
    assert_eq!(pa, pb);
    let (ka, ia) = partition_labeling(&a, &pa, &cfg()).unwrap();
    let (kb, ib) = partition_labeling(&b, &pb, &cfg()).unwrap();
    assert_eq!(ka, kb);
    let ren = renaming_between(&a, &b, &cfg()).unwrap().unwrap();
    for block in pa.blocks() {
        let image = pb.block_of(ren.apply_global(block[0]));
        assert_eq!(ia[pa.block_of(block[0])], ib[image]);
    }
}

fn arb_stage() -> impl Strategy<Value = Stage> {
    crate::game::tests::arb_game(4)
        .prop_flat_map(|g| {
            let (nl, nr) = (g.left_count(), g.right_count());
            (Just(g), proptest::collection::vec((0..nl, 0..nr), 0..3))
        })
        .prop_map(|(g, hist)| {
            let mut s = initial_stage(&g);
            for p in hist {
                if g.is_winning(p.0, p.1) {
                    continue;
                }
                s = s.advance(p).unwrap().0;
            }
            s
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn group_matches_brute_force(s in arb_stage()) {
        let grp = stage_renaming_group(&s, &cfg()).unwrap();
        let brute = brute_group(&s);
        prop_assert_eq!(grp.elements(), brute.as_slice());
        prop_assert_eq!(grp.orbits(), structural_classes(&s, &cfg()).unwrap());
    }

    #[test]
    fn keys_are_renaming_invariant(s in arb_stage(), seed in 0u64..1000) {
        // Relabel the game by a pseudo-random permutation of each side.
        let g = s.game();
        let (nl, nr) = (g.left_count(), g.right_count());
        let pl = &permutations(nl)[seed as usize % permutations(nl).len()];
        let pr = &permutations(nr)[(seed / 7) as usize % permutations(nr).len()];
        let h = Arc::new(Game::new(nl, nr, g.edges().iter().map(|&(l, r)| (pl[l], pr[r]))).unwrap());
        let hist: Vec<Pair> = s.history().iter().map(|&(l, r)| (pl[l], pr[r])).collect();
        let t = Stage::from_history(h.clone(), &hist).unwrap();
        prop_assert_eq!(canonical_stage_key(&s, &cfg()).unwrap(), canonical_stage_key(&t, &cfg()).unwrap());
        prop_assert_eq!(canonical_game_key(g, &cfg()).unwrap(), canonical_game_key(&h, &cfg()).unwrap());
        let sw = Arc::new(g.swapped());
        let hist_sw: Vec<Pair> = s.history().iter().map(|&(l, r)| (r, l)).collect();
        let u = Stage::from_history(sw, &hist_sw).unwrap();
        prop_assert_eq!(canonical_stage_key(&s, &cfg()).unwrap(), canonical_stage_key(&u, &cfg()).unwrap());
    }
}
