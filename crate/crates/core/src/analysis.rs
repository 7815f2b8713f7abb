//! Exact analysis of a fixed protocol.
//!
//! The play induced by a protocol is a Markov chain over stages. Stages the
//! protocol cannot tell apart (per its [`View`]) are merged, which keeps the
//! chain finite for every shipped protocol. Expected and guaranteed
//! coordination times are then read off the chain in exact arithmetic.

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use num_rational::BigRational;
use num_traits::{One, Zero};
use serde_json::json;

use crate::error::{Error, Result};
use crate::game::{ChoiceId, Game, Side};
use crate::protocols::{Memory, PartitionCache, Protocol, View};
use crate::stage::{Pair, Stage};
use crate::symmetry::{marked_stage_key, partition_key, CanonicalKey, SymmetryConfig};

/// A number that may be infinite.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Extended<T> {
    Finite(T),
    Infinite,
}

impl<T> Extended<T> {
    pub fn is_finite(&self) -> bool {
        matches!(self, Extended::Finite(_))
    }

    pub fn finite(&self) -> Option<&T> {
        match self {
            Extended::Finite(x) => Some(x),
            Extended::Infinite => None,
        }
    }
}

impl<T: fmt::Display> fmt::Display for Extended<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Extended::Finite(x) => x.fmt(f),
            Extended::Infinite => f.write_str("inf"),
        }
    }
}

impl Extended<BigRational> {
    pub fn to_f64(&self) -> f64 {
        use num_traits::ToPrimitive;
        match self {
            Extended::Finite(x) => x.to_f64().unwrap_or(f64::NAN),
            Extended::Infinite => f64::INFINITY,
        }
    }
}

/// Exact expected coordination time.
pub type Ect = Extended<BigRational>;
/// Guaranteed coordination time in rounds.
pub type Gct = Extended<u64>;

#[derive(Clone, Copy, Debug)]
pub struct AnalysisConfig {
    pub max_states: usize,
    /// Merge only stages related by a renaming, whatever the protocol's view.
    pub strict: bool,
    pub symmetry: SymmetryConfig,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            max_states: 10_000,
            strict: false,
            symmetry: SymmetryConfig::default(),
        }
    }
}

/// Where a transition leads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Target {
    State(usize),
    Win,
}

#[derive(Clone, Debug)]
pub struct ChainState {
    pub key: CanonicalKey,
    /// Representative stage.
    pub stage: Stage,
    pub memory: [Memory; 2],
}

/// The merged chain of a protocol on a game. State 0 is the start.
#[derive(Clone, Debug)]
pub struct StageChain {
    pub protocol: String,
    pub states: Vec<ChainState>,
    pub transitions: Vec<Vec<(Target, BigRational)>>,
}

impl StageChain {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Whether every row sums to exactly one.
    pub fn is_stochastic(&self) -> bool {
        self.transitions.iter().all(|row| {
            row.iter().all(|(_, p)| p > &BigRational::zero())
                && row.iter().map(|(_, p)| p).sum::<BigRational>() == BigRational::one()
        })
    }

    fn successors(&self, s: usize) -> impl Iterator<Item = usize> + '_ {
        self.transitions[s].iter().filter_map(|(t, _)| match t {
            Target::State(j) => Some(*j),
            Target::Win => None,
        })
    }

    /// States from which WIN is reachable.
    #[allow(clippy::needless_range_loop)]
    fn can_win(&self) -> Vec<bool> {
        let n = self.len();
        let mut rev = vec![Vec::new(); n];
        let mut ok = vec![false; n];
        let mut queue = VecDeque::new();
        for s in 0..n {
            for t in self.successors(s) {
                rev[t].push(s);
            }
            if self.transitions[s].iter().any(|(t, _)| *t == Target::Win) {
                ok[s] = true;
                queue.push_back(s);
            }
        }
        while let Some(s) = queue.pop_front() {
            for &u in &rev[s] {
                if !ok[u] {
                    ok[u] = true;
                    queue.push_back(u);
                }
            }
        }
        ok
    }

    /// Expected rounds to coordination from every state.
    pub fn state_ects(&self) -> Vec<Ect> {
        let n = self.len();
        let ok = self.can_win();
        let mut value: Vec<Option<Ect>> = vec![None; n];
        // Tarjan yields components in reverse topological order, so every
        // successor outside the current component is already solved.
        for comp in tarjan(n, |s| self.successors(s).collect()) {
            let index: HashMap<usize, usize> =
                comp.iter().enumerate().map(|(i, &s)| (s, i)).collect();
            let escapes_to_infinity = comp.iter().any(|&s| {
                !ok[s]
                    || self
                        .successors(s)
                        .any(|t| !index.contains_key(&t) && value[t] == Some(Extended::Infinite))
            });
            if escapes_to_infinity {
                for &s in &comp {
                    value[s] = Some(Extended::Infinite);
                }
                continue;
            }
            let k = comp.len();
            let mut a = vec![vec![BigRational::zero(); k]; k];
            let mut b = vec![BigRational::one(); k];
            for (i, &s) in comp.iter().enumerate() {
                a[i][i] += BigRational::one();
                for (t, p) in &self.transitions[s] {
                    if let Target::State(t) = t {
                        match index.get(t) {
                            Some(&j) => a[i][j] -= p,
                            None => b[i] += p * value[*t].as_ref().unwrap().finite().unwrap(),
                        }
                    }
                }
            }
            let x =
                solve_dense(a, b).expect("a component that can reach WIN has a nonsingular system");
            for (i, &s) in comp.iter().enumerate() {
                value[s] = Some(Extended::Finite(x[i].clone()));
            }
        }
        value.into_iter().map(Option::unwrap).collect()
    }

    /// Guaranteed rounds to coordination from every state.
    pub fn state_gcts(&self) -> Vec<Gct> {
        let n = self.len();
        let mut value: Vec<Option<Gct>> = vec![None; n];
        for comp in tarjan(n, |s| self.successors(s).collect()) {
            let cyclic = comp.len() > 1 || self.successors(comp[0]).any(|t| t == comp[0]);
            for &s in &comp {
                let v = if cyclic {
                    Extended::Infinite
                } else {
                    let mut best = Extended::Finite(1u64);
                    for t in self.successors(s) {
                        best = match value[t].as_ref().unwrap() {
                            Extended::Infinite => Extended::Infinite,
                            Extended::Finite(g) => best.max(Extended::Finite(g + 1)),
                        };
                    }
                    best
                };
                value[s] = Some(v);
            }
        }
        value.into_iter().map(Option::unwrap).collect()
    }

    /// JSON dump: states with keys and histories, transitions as "num/den".
    pub fn dump_json(&self) -> String {
        let states: Vec<_> = self
            .states
            .iter()
            .enumerate()
            .map(|(i, s)| {
                json!({
                    "id": i,
                    "key": s.key.to_string(),
                    "history": s.stage.history().iter().map(|&(l, r)| [l, r]).collect::<Vec<_>>(),
                    "memory": s.memory.iter().map(|m| m.committed).collect::<Vec<_>>(),
                })
            })
            .collect();
        let mut transitions = Vec::new();
        for (i, row) in self.transitions.iter().enumerate() {
            for (t, p) in row {
                let to = match t {
                    Target::State(j) => json!(j),
                    Target::Win => json!("WIN"),
                };
                transitions.push(json!({"from": i, "to": to, "p": rational_string(p)}));
            }
        }
        let doc = json!({
            "protocol": self.protocol,
            "game": self.states.first().map(|s| s.stage.game().clone()),
            "start": 0,
            "states": states,
            "transitions": transitions,
        });
        serde_json::to_string_pretty(&doc).expect("chain serialization cannot fail")
    }
}

/// "num/den", always with a denominator.
pub fn rational_string(p: &BigRational) -> String {
    format!("{}/{}", p.numer(), p.denom())
}

/// Parses "num/den" or an integer.
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let bad = || Error::InvalidArgument(format!("not a rational: `{s}`"));
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s.trim(), "1"),
    };
    let n = n.parse().map_err(|_| bad())?;
    let d: num_bigint::BigInt = d.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(bad());
    }
    Ok(BigRational::new(n, d))
}

/// Strongly connected components, sinks first.
fn tarjan(n: usize, succ: impl Fn(usize) -> Vec<usize>) -> Vec<Vec<usize>> {
    let mut g = petgraph::graph::DiGraph::<(), ()>::with_capacity(n, 0);
    let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
    for v in 0..n {
        for w in succ(v) {
            g.add_edge(nodes[v], nodes[w], ());
        }
    }
    petgraph::algo::tarjan_scc(&g)
        .into_iter()
        .map(|c| c.into_iter().map(|x| x.index()).collect())
        .collect()
}

/// Gaussian elimination over the rationals; `None` if singular.
pub fn solve_dense(
    mut a: Vec<Vec<BigRational>>,
    mut b: Vec<BigRational>,
) -> Option<Vec<BigRational>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = BigRational::one() / &a[col][col];
        let pivot_row = a[col].clone();
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = &a[r][col] * &inv;
            for (x, p) in a[r][col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= &f * p;
            }
            let d = &f * &b[col];
            b[r] -= d;
        }
    }
    Some((0..n).map(|i| &b[i] / &a[i][i]).collect())
}

struct Keyer<'a> {
    view: View,
    cfg: &'a AnalysisConfig,
    partitions: PartitionCache,
}

impl Keyer<'_> {
    fn key(&self, stage: &Stage, memory: &[Memory; 2]) -> Result<CanonicalKey> {
        let game = stage.game();
        let marks: Vec<usize> = memory
            .iter()
            .zip(Side::both())
            .filter_map(|(m, side)| m.committed.map(|c| game.global(ChoiceId::new(side, c))))
            .collect();
        let sym = &self.cfg.symmetry;
        let view = if self.cfg.strict {
            View::History
        } else {
            self.view
        };
        match view {
            View::Stateless => Ok(CanonicalKey(Vec::new())),
            View::Partition => {
                let p = self.partitions.partition(stage)?;
                let mut key = partition_key(game, &p, sym)?;
                if !marks.is_empty() {
                    key.0.extend(marked_stage_key(stage, 0, &marks, sym)?.0);
                }
                Ok(key)
            }
            View::OpeningRound => marked_stage_key(stage, 1, &marks, sym),
            View::History => marked_stage_key(stage, stage.round(), &marks, sym),
        }
    }
}

/// Breadth-first closure of the stages reachable under `pr`, merged by the
/// protocol's view.
pub fn build_chain(game: &Game, pr: &dyn Protocol, cfg: &AnalysisConfig) -> Result<StageChain> {
    let keyer = Keyer {
        view: pr.view(),
        cfg,
        partitions: PartitionCache::new(cfg.symmetry),
    };
    let start = Stage::initial(std::sync::Arc::new(game.clone()));
    let mem0 = [Memory::default(), Memory::default()];
    let mut index: HashMap<CanonicalKey, usize> = HashMap::new();
    let mut states = Vec::new();
    let key0 = keyer.key(&start, &mem0)?;
    index.insert(key0.clone(), 0);
    states.push(ChainState {
        key: key0,
        stage: start,
        memory: mem0,
    });
    let mut transitions = Vec::new();
    let mut next = 0;
    while next < states.len() {
        let ChainState { stage, memory, .. } = states[next].clone();
        let dl = pr.distribution(&stage, Side::Left, &memory[0])?;
        let dr = pr.distribution(&stage, Side::Right, &memory[1])?;
        let mut row: BTreeMap<Target, BigRational> = BTreeMap::new();
        for l in dl.support() {
            for r in dr.support() {
                let p = dl.prob(l) * dr.prob(r);
                let (t, won) = stage.advance((l, r))?;
                if won {
                    *row.entry(Target::Win).or_insert_with(BigRational::zero) += p;
                    continue;
                }
                let bl = pr.update_memory(&t, Side::Left, &memory[0])?;
                let br = pr.update_memory(&t, Side::Right, &memory[1])?;
                for (pa, ma) in &bl {
                    for (pb, mb) in &br {
                        let mem = [ma.clone(), mb.clone()];
                        let key = keyer.key(&t, &mem)?;
                        let id = match index.get(&key) {
                            Some(&id) => id,
                            None => {
                                if states.len() >= cfg.max_states {
                                    return Err(Error::StateExplosion(cfg.max_states));
                                }
                                let id = states.len();
                                index.insert(key.clone(), id);
                                states.push(ChainState {
                                    key,
                                    stage: t.clone(),
                                    memory: mem,
                                });
                                id
                            }
                        };
                        *row.entry(Target::State(id))
                            .or_insert_with(BigRational::zero) += &p * pa * pb;
                    }
                }
            }
        }
        transitions.push(row.into_iter().collect());
        next += 1;
    }
    Ok(StageChain {
        protocol: pr.name(),
        states,
        transitions,
    })
}

/// Probability of coordinating in round 1.
pub fn oscp(game: &Game, pr: &dyn Protocol) -> Result<BigRational> {
    let s = Stage::initial(std::sync::Arc::new(game.clone()));
    let m = Memory::default();
    let dl = pr.distribution(&s, Side::Left, &m)?;
    let dr = pr.distribution(&s, Side::Right, &m)?;
    Ok(game
        .edges()
        .iter()
        .map(|&(l, r)| dl.prob(l) * dr.prob(r))
        .sum())
}

pub fn exact_ect(game: &Game, pr: &dyn Protocol, cfg: &AnalysisConfig) -> Result<Ect> {
    Ok(build_chain(game, pr, cfg)?.state_ects().swap_remove(0))
}

pub fn exact_gct(game: &Game, pr: &dyn Protocol, cfg: &AnalysisConfig) -> Result<Gct> {
    Ok(build_chain(game, pr, cfg)?.state_gcts().swap_remove(0))
}

/// All three measures from one chain.
#[derive(Clone, Debug)]
pub struct Report {
    pub protocol: String,
    pub oscp: BigRational,
    pub ect: Ect,
    pub gct: Gct,
    pub states: usize,
}

impl Report {
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "protocol": self.protocol,
            "oscp": rational_string(&self.oscp),
            "ect": match &self.ect { Extended::Finite(x) => rational_string(x), Extended::Infinite => "inf".into() },
            "ect_f64": self.ect.to_f64(),
            "gct": self.gct.to_string(),
            "states": self.states,
        })
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "protocol {}: oscp {} ect {} (~{:.6}) gct {} [{} states]",
            self.protocol,
            self.oscp,
            self.ect,
            self.ect.to_f64(),
            self.gct,
            self.states
        )
    }
}

pub fn analyze(game: &Game, pr: &dyn Protocol, cfg: &AnalysisConfig) -> Result<Report> {
    let chain = build_chain(game, pr, cfg)?;
    Ok(Report {
        protocol: pr.name(),
        oscp: oscp(game, pr)?,
        ect: chain.state_ects().swap_remove(0),
        gct: chain.state_gcts().swap_remove(0),
        states: chain.len(),
    })
}

/// Pairs of a stage's history in a short form, e.g. `L0R1 L2R2`.
pub fn history_label(history: &[Pair]) -> String {
    history
        .iter()
        .map(|&(l, r)| format!("L{l}R{r}"))
        .collect::<Vec<_>>()
        .join(" ")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog;
    use crate::protocols::{LoopAvoidance, Uniform, WaitOrMove};

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn cfg() -> AnalysisConfig {
        AnalysisConfig::default()
    }

    #[test]
    fn wm_in_cm2_has_two_states() {
        let chain = build_chain(&catalog::choice_matching(2), &WaitOrMove::new(), &cfg()).unwrap();
        assert_eq!(chain.len(), 2);
        assert!(chain.is_stochastic());
        assert!(chain.transitions[1].contains(&(Target::State(1), q(1, 2))));
        assert_eq!(chain.state_ects()[0], Extended::Finite(q(2, 1)));
        assert_eq!(chain.state_gcts()[0], Extended::Infinite);
    }

    #[test]
    fn la_in_cm5_has_three_acyclic_states() {
        let la = LoopAvoidance::new(SymmetryConfig::default());
        let chain = build_chain(&catalog::choice_matching(5), &la, &cfg()).unwrap();
        assert_eq!(chain.len(), 3);
        assert_eq!(chain.state_gcts()[0], Extended::Finite(3));
        assert_eq!(chain.state_ects()[0], Extended::Finite(q(7, 3)));
    }

    #[test]
    fn uniform_in_cm3() {
        let g = catalog::choice_matching(3);
        let chain = build_chain(&g, &Uniform, &cfg()).unwrap();
        assert!(chain.len() <= 4);
        assert_eq!(chain.state_ects()[0], Extended::Finite(q(3, 1)));
        assert_eq!(oscp(&g, &Uniform).unwrap(), q(1, 3));
        assert_eq!(oscp(&catalog::c6_game(), &Uniform).unwrap(), q(2, 3));
    }

    #[test]
    fn cm1_is_immediate() {
        let r = analyze(&catalog::choice_matching(1), &WaitOrMove::new(), &cfg()).unwrap();
        assert_eq!(r.ect, Extended::Finite(q(1, 1)));
        assert_eq!(r.gct, Extended::Finite(1));
    }

    #[test]
    fn strict_mode_agrees() {
        let strict = AnalysisConfig {
            strict: true,
            ..cfg()
        };
        // Full histories only close up when play cannot cycle.
        for m in [3, 5, 7] {
            let g = catalog::choice_matching(m);
            let la = LoopAvoidance::new(SymmetryConfig::default());
            let a = analyze(&g, &la, &cfg()).unwrap();
            let b = analyze(&g, &la, &strict).unwrap();
            assert_eq!((a.ect, a.gct), (b.ect, b.gct));
            assert!(b.states >= a.states);
        }
        let err = analyze(&catalog::choice_matching(2), &WaitOrMove::new(), &strict).unwrap_err();
        assert!(err.is_budget());
    }

    #[test]
    fn explosion_is_reported() {
        let tight = AnalysisConfig {
            max_states: 2,
            ..cfg()
        };
        let err = build_chain(
            &catalog::choice_matching(5),
            &LoopAvoidance::new(SymmetryConfig::default()),
            &tight,
        )
        .unwrap_err();
        assert!(matches!(err, Error::StateExplosion(2)));
    }

    #[test]
    fn dense_solver() {
        let a = vec![vec![q(2, 1), q(1, 1)], vec![q(1, 1), q(3, 1)]];
        let x = solve_dense(a, vec![q(3, 1), q(5, 1)]).unwrap();
        assert_eq!(x, vec![q(4, 5), q(7, 5)]);
        assert!(solve_dense(vec![vec![q(0, 1)]], vec![q(1, 1)]).is_none());
    }

    #[test]
    fn tarjan_orders_sinks_first() {
        let comps = tarjan(4, |v| match v {
            0 => vec![1],
            1 => vec![2, 0],
            2 => vec![3],
            _ => vec![],
        });
        assert_eq!(comps[0], vec![3]);
        assert_eq!(comps[1], vec![2]);
        assert_eq!(comps[2].len(), 2);
    }

    #[test]
    fn rationals_round_trip() {
        for s in ["1/2", "7/3", "-4/6", "5"] {
            let p = parse_rational(s).unwrap();
            assert_eq!(parse_rational(&rational_string(&p)).unwrap(), p);
        }
        assert!(parse_rational("1/0").is_err());
        assert_eq!(Extended::<u64>::Infinite.to_string(), "inf");
    }

    #[test]
    fn dump_has_rational_strings() {
        let chain = build_chain(&catalog::choice_matching(2), &WaitOrMove::new(), &cfg()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&chain.dump_json()).unwrap();
        assert_eq!(v["states"].as_array().unwrap().len(), 2);
        assert!(v["transitions"]
            .as_array()
            .unwrap()
            .iter()
            .any(|t| t["p"] == "1/2" && t["to"] == "WIN"));
    }
}
