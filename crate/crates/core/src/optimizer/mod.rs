//! Optimal structural protocols.
//!
//! A structural protocol may only distinguish choices that lie in different
//! structural classes, and the classes of a stage determine everything that
//! matters about its future. So the optimization runs over *group states*:
//! stages merged by their (canonically keyed) class partition. In each
//! state a protocol picks one weight per class; classes that contain choices
//! of both players carry a single shared weight.
//!
//! Expected coordination time is minimized by modified policy iteration.
//! Guaranteed coordination time is a minimax over class supports, computed
//! as an attractor.

pub mod closed_forms;
pub mod inner;

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use petgraph::graph::DiGraph;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::analysis::{Extended, Gct};
use crate::error::{Error, Result};
use crate::game::{Game, Side};
use crate::protocols::{ClassWeightTable, TableEntry};
use crate::stage::{Pair, Stage};
use crate::symmetry::{
    focal_points_of, initial_partition, partition_has_swap, partition_key, partition_labeling,
    structural_classes, successor_partition, CanonicalKey, Partition, SymmetryConfig,
};

pub use inner::{InnerConfig, InnerSolution};

#[derive(Clone, Copy, Debug)]
pub struct OptimizerConfig {
    /// Stop when successive value vectors differ by less than this.
    pub tol: f64,
    pub max_iter: usize,
    pub max_states: usize,
    pub symmetry: SymmetryConfig,
    pub inner: InnerConfig,
    pub time_budget: Option<Duration>,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            tol: 1e-9,
            max_iter: 1_000,
            max_states: 200_000,
            symmetry: SymmetryConfig::default(),
            inner: InnerConfig::default(),
            time_budget: None,
        }
    }
}

/// Losing play between two classes, aggregated by successor: with class
/// weights `w`, the move happens with probability `w[j]·w[k]·coef`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Term {
    pub j: u32,
    pub k: u32,
    pub next: u32,
    pub coef: f64,
}

/// One state of the quotient.
#[derive(Clone, Debug)]
pub struct GroupState {
    pub key: CanonicalKey,
    /// A stage with this partition, reached from the initial stage.
    pub stage: Stage,
    pub partition: Partition,
    /// Whether every class holds choices of both players.
    pub swap: bool,
    /// Left and right members of each class.
    pub left_size: Vec<usize>,
    pub right_size: Vec<usize>,
    /// A class support that wins with certainty. States that have one are
    /// not expanded.
    pub winning: Option<(usize, usize)>,
    pub terms: Vec<Term>,
}

impl GroupState {
    pub fn coordinating(&self) -> bool {
        self.winning.is_some()
    }

    pub fn num_classes(&self) -> usize {
        self.left_size.len()
    }

    /// Class supports a protocol may use on its own: one shared class in a
    /// swap state, otherwise one class per side.
    fn minimal_supports(&self) -> Vec<(usize, usize)> {
        let n = self.num_classes();
        if self.swap {
            (0..n).map(|b| (b, b)).collect()
        } else {
            let left: Vec<usize> = (0..n).filter(|&b| self.left_size[b] > 0).collect();
            let right: Vec<usize> = (0..n).filter(|&b| self.right_size[b] > 0).collect();
            left.iter()
                .flat_map(|&j| right.iter().map(move |&k| (j, k)))
                .collect()
        }
    }

    /// Weights of the support `(j, k)`.
    fn support_weights(&self, (j, k): (usize, usize)) -> Vec<f64> {
        let mut w = vec![0.0; self.num_classes()];
        w[j] = 1.0;
        w[k] = 1.0;
        w
    }

    /// Class weights of uniform play over all choices.
    pub fn uniform_weights(&self) -> Vec<f64> {
        let (nl, nr): (usize, usize) = (self.left_size.iter().sum(), self.right_size.iter().sum());
        (0..self.num_classes())
            .map(|b| {
                if self.left_size[b] > 0 {
                    self.left_size[b] as f64 / nl as f64
                } else {
                    self.right_size[b] as f64 / nr as f64
                }
            })
            .collect()
    }

    /// `Q[j][k] = Σ coef·V(next)` over the terms.
    fn q_matrix(&self, v: &[f64]) -> DMatrix<f64> {
        let n = self.num_classes();
        let mut q = DMatrix::zeros(n, n);
        for t in &self.terms {
            q[(t.j as usize, t.k as usize)] += t.coef * v[t.next as usize];
        }
        q
    }

    /// One-round objective `1 + Σ w_j w_k coef V(next)`.
    pub fn objective(&self, w: &[f64], v: &[f64]) -> f64 {
        1.0 + self
            .terms
            .iter()
            .map(|t| w[t.j as usize] * w[t.k as usize] * t.coef * v[t.next as usize])
            .sum::<f64>()
    }

    /// Choice probabilities of both players under class weights `w`.
    pub fn choice_probabilities(&self, w: &[f64]) -> [Vec<f64>; 2] {
        let game = self.stage.game();
        let mut out = [vec![0.0; game.left_count()], vec![0.0; game.right_count()]];
        for c in game.choices() {
            let b = self.partition.block_of(game.global(c));
            let size = if c.side == Side::Left {
                self.left_size[b]
            } else {
                self.right_size[b]
            };
            out[c.side as usize][c.index] = w[b] / size as f64;
        }
        out
    }
}

/// The reachable quotient of a game. State 0 is the initial stage.
#[derive(Clone, Debug)]
pub struct QuotientSpace {
    pub game: Arc<Game>,
    pub states: Vec<GroupState>,
}

struct Expansion {
    partition: Partition,
    swap: bool,
    left_size: Vec<usize>,
    right_size: Vec<usize>,
    winning: Option<(usize, usize)>,
    moves: Vec<(Pair, CanonicalKey, Partition)>,
}

fn expand(game: &Game, partition: &Partition, cfg: &SymmetryConfig) -> Result<Expansion> {
    let nl = game.left_count();
    let nb = partition.num_blocks();
    let mut left_size = vec![0; nb];
    let mut right_size = vec![0; nb];
    for v in 0..game.choice_count() {
        if v < nl {
            left_size[partition.block_of(v)] += 1;
        } else {
            right_size[partition.block_of(v)] += 1;
        }
    }
    let swap = partition_has_swap(game, partition);
    let block =
        |side: Side, i: usize| partition.block_of(if side == Side::Left { i } else { nl + i });
    let wins_all = |j: usize, k: usize| {
        (0..nl).filter(|&l| block(Side::Left, l) == j).all(|l| {
            (0..game.right_count())
                .filter(|&r| block(Side::Right, r) == k)
                .all(|r| game.is_winning(l, r))
        })
    };
    let winning = if swap {
        (0..nb).find(|&b| wins_all(b, b)).map(|b| (b, b))
    } else {
        (0..nb)
            .filter(|&j| left_size[j] > 0)
            .flat_map(|j| (0..nb).filter(|&k| right_size[k] > 0).map(move |k| (j, k)))
            .find(|&(j, k)| wins_all(j, k))
    };
    let mut moves = Vec::new();
    if winning.is_none() {
        let mut seen: HashMap<Partition, CanonicalKey> = HashMap::new();
        for (l, r) in (0..nl).flat_map(|l| (0..game.right_count()).map(move |r| (l, r))) {
            if game.is_winning(l, r) {
                continue;
            }
            let p = successor_partition(game, partition, (l, r), cfg)?;
            let key = match seen.get(&p) {
                Some(k) => k.clone(),
                None => {
                    let k = partition_key(game, &p, cfg)?;
                    seen.insert(p.clone(), k.clone());
                    k
                }
            };
            moves.push(((l, r), key, p));
        }
    }
    Ok(Expansion {
        partition: partition.clone(),
        swap,
        left_size,
        right_size,
        winning,
        moves,
    })
}

impl QuotientSpace {
    /// Breadth-first closure of the class partitions reachable from the
    /// initial stage, expanding one layer at a time in parallel.
    pub fn explore(game: &Game, cfg: &OptimizerConfig) -> Result<QuotientSpace> {
        let start = Instant::now();
        let sym = &cfg.symmetry;
        let game = Arc::new(game.clone());
        let p0 = initial_partition(&game, sym)?;
        let k0 = partition_key(&game, &p0, sym)?;
        let mut index: HashMap<CanonicalKey, usize> = HashMap::from([(k0.clone(), 0)]);
        let mut stages = vec![(k0, Stage::initial(game.clone()), p0)];
        let mut states: Vec<Option<GroupState>> = vec![None];
        let mut frontier = vec![0usize];
        while !frontier.is_empty() {
            if let Some(b) = cfg.time_budget {
                if start.elapsed() > b {
                    return Err(Error::TimeBudgetExceeded(b.as_secs()));
                }
            }
            let expansions: Vec<Expansion> = frontier
                .par_iter()
                .map(|&s| expand(&game, &stages[s].2, sym))
                .collect::<Result<_>>()?;
            let mut next = Vec::new();
            for (&s, e) in frontier.iter().zip(expansions) {
                let mut agg: BTreeMap<(u32, u32, u32), usize> = BTreeMap::new();
                for ((l, r), key, p) in e.moves {
                    let id = match index.get(&key) {
                        Some(&id) => id,
                        None => {
                            if stages.len() >= cfg.max_states {
                                return Err(Error::StateExplosion(cfg.max_states));
                            }
                            let id = stages.len();
                            index.insert(key.clone(), id);
                            let (stage, _) = stages[s].1.advance((l, r))?;
                            stages.push((key, stage, p));
                            states.push(None);
                            next.push(id);
                            id
                        }
                    };
                    let j = e.partition.block_of(l) as u32;
                    let k = e.partition.block_of(game.left_count() + r) as u32;
                    *agg.entry((j, k, id as u32)).or_insert(0) += 1;
                }
                let terms = agg
                    .into_iter()
                    .map(|((j, k, next), n)| Term {
                        j,
                        k,
                        next,
                        coef: n as f64
                            / (e.left_size[j as usize] * e.right_size[k as usize]) as f64,
                    })
                    .collect();
                states[s] = Some(GroupState {
                    key: stages[s].0.clone(),
                    stage: stages[s].1.clone(),
                    partition: e.partition,
                    swap: e.swap,
                    left_size: e.left_size,
                    right_size: e.right_size,
                    winning: e.winning,
                    terms,
                });
            }
            frontier = next;
        }
        Ok(QuotientSpace {
            game,
            states: states.into_iter().map(Option::unwrap).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Transition probabilities of the policy, WIN omitted.
    fn policy_rows(&self, policy: &[Vec<f64>]) -> Vec<Vec<(usize, f64)>> {
        self.states
            .iter()
            .zip(policy)
            .map(|(s, w)| {
                let mut row: BTreeMap<usize, f64> = BTreeMap::new();
                for t in &s.terms {
                    let p = w[t.j as usize] * w[t.k as usize] * t.coef;
                    if p > 0.0 {
                        *row.entry(t.next as usize).or_insert(0.0) += p;
                    }
                }
                row.into_iter().collect()
            })
            .collect()
    }

    /// Expected rounds to coordination under a fixed policy; infinite where
    /// the policy can loop forever without coordinating.
    pub fn evaluate(&self, policy: &[Vec<f64>]) -> Vec<f64> {
        let rows = self.policy_rows(policy);
        let n = rows.len();
        let mut g = DiGraph::<(), ()>::with_capacity(n, 0);
        let nodes: Vec<_> = (0..n).map(|_| g.add_node(())).collect();
        for (s, row) in rows.iter().enumerate() {
            for &(t, _) in row {
                g.add_edge(nodes[s], nodes[t], ());
            }
        }
        let mut value = vec![f64::NAN; n];
        for comp in petgraph::algo::tarjan_scc(&g) {
            let comp: Vec<usize> = comp.into_iter().map(|x| x.index()).collect();
            let pos: HashMap<usize, usize> =
                comp.iter().enumerate().map(|(i, &s)| (s, i)).collect();
            let k = comp.len();
            let mut a = DMatrix::<f64>::identity(k, k);
            let mut b = DVector::<f64>::from_element(k, 1.0);
            for (i, &s) in comp.iter().enumerate() {
                for &(t, p) in &rows[s] {
                    match pos.get(&t) {
                        Some(&j) => a[(i, j)] -= p,
                        None => b[i] += p * value[t],
                    }
                }
            }
            let x = if b.iter().all(|x| x.is_finite()) {
                a.lu().solve(&b)
            } else {
                None
            };
            for (i, &s) in comp.iter().enumerate() {
                value[s] = match &x {
                    Some(x) if x[i].is_finite() && x[i] >= 1.0 - 1e-9 => x[i],
                    _ => f64::INFINITY,
                };
            }
        }
        value
    }

    /// States reachable from the start with positive probability.
    pub fn reachable(&self, policy: &[Vec<f64>], eps: f64) -> Vec<usize> {
        let rows = self.policy_rows(policy);
        let mut seen = vec![false; self.len()];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(s) = stack.pop() {
            for &(t, p) in &rows[s] {
                if p > eps && !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        (0..self.len()).filter(|&s| seen[s]).collect()
    }
}

/// Greedy step at one state: best weights against `v`.
fn improve(
    s: &GroupState,
    v: &[f64],
    warm: &[f64],
    cfg: &InnerConfig,
) -> Result<(Vec<f64>, f64, usize)> {
    if let Some(sup) = s.winning {
        return Ok((s.support_weights(sup), 1.0, 0));
    }
    let q = s.q_matrix(v);
    if s.swap {
        let a = (&q + q.transpose()) * 0.5;
        let sol = inner::minimize_quadratic(&a, &[warm.to_vec()], cfg)?;
        Ok((sol.weights, 1.0 + sol.value, sol.restarts))
    } else {
        let mut best = (f64::INFINITY, (0, 0));
        for (j, k) in s.minimal_supports() {
            if q[(j, k)] < best.0 {
                best = (q[(j, k)], (j, k));
            }
        }
        let w = s.support_weights(best.1);
        let warm_value = s.objective(warm, v);
        if warm_value <= 1.0 + best.0 {
            return Ok((warm.to_vec(), warm_value, 0));
        }
        Ok((w, 1.0 + best.0, 0))
    }
}

#[derive(Clone, Debug)]
pub struct Diagnostics {
    pub iterations: usize,
    /// Projected-gradient descents run by the inner solver.
    pub inner_restarts: usize,
    /// Largest Bellman residual `|TV - V|` at the returned values.
    pub residual: f64,
    /// Whether every iteration lowered (or kept) every value.
    pub monotone: bool,
    pub elapsed: Duration,
}

/// Result of [`optimal_ect`].
#[derive(Clone, Debug)]
pub struct OptimalEct {
    pub value: f64,
    pub values: Vec<f64>,
    /// Class weights per state.
    pub policy: Vec<Vec<f64>>,
    pub diagnostics: Diagnostics,
    pub space: QuotientSpace,
}

/// Minimum expected coordination time over structural protocols.
pub fn optimal_ect(game: &Game, cfg: &OptimizerConfig) -> Result<OptimalEct> {
    let space = QuotientSpace::explore(game, cfg)?;
    optimal_ect_on(space, cfg)
}

/// As [`optimal_ect`] on an already explored quotient.
pub fn optimal_ect_on(space: QuotientSpace, cfg: &OptimizerConfig) -> Result<OptimalEct> {
    let start = Instant::now();
    let game = &space.game;
    // Uniform play forever is structural, so its value bounds V* from above.
    let upper = (game.left_count() * game.right_count()) as f64 / game.edge_count() as f64;
    let mut v: Vec<f64> = space
        .states
        .iter()
        .map(|s| if s.coordinating() { 1.0 } else { upper })
        .collect();
    let mut policy: Vec<Vec<f64>> = space.states.iter().map(|s| s.uniform_weights()).collect();
    let mut diag = Diagnostics {
        iterations: 0,
        inner_restarts: 0,
        residual: f64::INFINITY,
        monotone: true,
        elapsed: Duration::ZERO,
    };
    loop {
        if diag.iterations >= cfg.max_iter {
            break;
        }
        if let Some(b) = cfg.time_budget {
            if start.elapsed() > b {
                return Err(Error::TimeBudgetExceeded(b.as_secs()));
            }
        }
        diag.iterations += 1;
        let greedy: Vec<(Vec<f64>, f64, usize)> = space
            .states
            .par_iter()
            .zip(policy.par_iter())
            .map(|(s, w)| improve(s, &v, w, &cfg.inner))
            .collect::<Result<_>>()?;
        diag.inner_restarts += greedy.iter().map(|g| g.2).sum::<usize>();
        let new_policy: Vec<Vec<f64>> = greedy.iter().map(|g| g.0.clone()).collect();
        let evaluated = space.evaluate(&new_policy);
        let new_v: Vec<f64> = evaluated
            .iter()
            .zip(&greedy)
            .map(|(e, g)| if e.is_finite() { e.min(g.1) } else { g.1 })
            .collect();
        let delta = new_v
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if new_v.iter().zip(&v).any(|(a, b)| *a > b + 1e-9) {
            diag.monotone = false;
        }
        v = new_v;
        policy = new_policy;
        if delta < cfg.tol {
            break;
        }
    }
    let check: Vec<(Vec<f64>, f64, usize)> = space
        .states
        .par_iter()
        .zip(policy.par_iter())
        .map(|(s, w)| improve(s, &v, w, &cfg.inner))
        .collect::<Result<_>>()?;
    diag.residual = check
        .iter()
        .zip(&v)
        .map(|(g, x)| (g.1 - x).abs())
        .fold(0.0, f64::max);
    diag.elapsed = start.elapsed();
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InnerSolveFailure(
            "a state kept an infinite value".into(),
        ));
    }
    Ok(OptimalEct {
        value: v[0],
        values: v,
        policy,
        diagnostics: diag,
        space,
    })
}

impl OptimalEct {
    /// States reached with positive probability under the optimal policy.
    pub fn reachable_states(&self) -> Vec<usize> {
        self.space.reachable(&self.policy, 1e-9)
    }

    /// Choices with positive probability at state `s`.
    pub fn support(&self, s: usize) -> [Vec<usize>; 2] {
        let probs = self.space.states[s].choice_probabilities(&self.policy[s]);
        probs.map(|p| (0..p.len()).filter(|&i| p[i] > 1e-7).collect())
    }

    /// The policy as a class-weight table, with class weights in canonical
    /// order.
    pub fn policy_table(&self, cfg: &SymmetryConfig) -> Result<ClassWeightTable> {
        let mut table = ClassWeightTable {
            game: Some((*self.space.game).clone()),
            states: BTreeMap::new(),
        };
        for (i, s) in self.space.states.iter().enumerate() {
            let (key, order) = partition_labeling(&s.stage, &s.partition, cfg)?;
            let mut weights = vec![0.0; order.len()];
            let mut classes = vec![Vec::new(); order.len()];
            let raw: Vec<f64> = self.policy[i]
                .iter()
                .map(|&w| if w < 1e-12 { 0.0 } else { w })
                .collect();
            for (b, members) in s.partition.blocks().iter().enumerate() {
                weights[order[b]] = raw[b];
                classes[order[b]] = members
                    .iter()
                    .map(|&v| self.space.game.choice_at(v).to_string())
                    .collect();
            }
            table.states.insert(
                key.to_string(),
                TableEntry {
                    weights,
                    classes,
                    value: Some(self.values[i]),
                },
            );
        }
        Ok(table)
    }
}

/// Result of [`optimal_gct`].
#[derive(Clone, Debug)]
pub struct OptimalGct {
    pub value: Gct,
    pub values: Vec<Gct>,
    /// Class support achieving the value, per state where it is finite.
    pub witness: Vec<Option<(usize, usize)>>,
    pub space: QuotientSpace,
}

/// Minimum guaranteed coordination time over structural protocols.
pub fn optimal_gct(game: &Game, cfg: &OptimizerConfig) -> Result<OptimalGct> {
    Ok(optimal_gct_on(QuotientSpace::explore(game, cfg)?))
}

/// Attractor computation: rank r collects the states with a support whose
/// losing pairs all lead to states of rank below r.
pub fn optimal_gct_on(space: QuotientSpace) -> OptimalGct {
    let n = space.len();
    let mut rank: Vec<Option<u64>> = vec![None; n];
    let mut witness = vec![None; n];
    let mut r = 1u64;
    loop {
        let found: Vec<(usize, (usize, usize))> = (0..n)
            .into_par_iter()
            .filter(|&s| rank[s].is_none())
            .filter_map(|s| {
                let st = &space.states[s];
                if let Some(sup) = st.winning {
                    return Some((s, sup));
                }
                st.minimal_supports().into_iter().find_map(|(j, k)| {
                    let ok = st
                        .terms
                        .iter()
                        .filter(|t| t.j as usize == j && t.k as usize == k)
                        .all(|t| rank[t.next as usize].is_some_and(|x| x < r));
                    ok.then_some((s, (j, k)))
                })
            })
            .collect();
        if found.is_empty() {
            break;
        }
        for (s, sup) in found {
            rank[s] = Some(r);
            witness[s] = Some(sup);
        }
        r += 1;
    }
    let values: Vec<Gct> = rank
        .iter()
        .map(|x| x.map_or(Extended::Infinite, Extended::Finite))
        .collect();
    OptimalGct {
        value: values[0].clone(),
        values,
        witness,
        space,
    }
}

/// Optimal-action structure at one state.
#[derive(Clone, Debug, PartialEq)]
pub enum ProbeVerdict {
    /// One optimal touched mass.
    Singleton(f64),
    /// A range of optimal touched masses.
    Interval(f64, f64),
}

/// Touched-versus-untouched profile at the state after the first miss.
#[derive(Clone, Debug)]
pub struct UniquenessReport {
    pub state: usize,
    /// (p, best objective with mass p on touched classes).
    pub profile: Vec<(f64, f64)>,
    pub spread: f64,
    pub verdict: ProbeVerdict,
    /// Per state: how many distinct near-optimal actions the inner solver saw.
    pub near_optimal: Vec<usize>,
}

/// Minimizes `wᵀAw` with fixed mass on each group of classes.
fn profile_min(a: &DMatrix<f64>, groups: &[(Vec<usize>, f64)], seed: u64) -> f64 {
    let n = a.nrows();
    let free: Vec<usize> = (0..n)
        .filter(|i| !groups.iter().any(|(idx, _)| idx.contains(i)))
        .collect();
    let project = |w: &mut Vec<f64>| {
        for &i in &free {
            w[i] = 0.0;
        }
        for (idx, mass) in groups {
            let mut sub: Vec<f64> = idx.iter().map(|&i| w[i] / mass.max(1e-300)).collect();
            inner::project_simplex(&mut sub);
            for (pos, &i) in idx.iter().enumerate() {
                w[i] = sub[pos] * mass;
            }
        }
    };
    let f = |w: &[f64]| inner::quadratic(a, w);
    let mut starts: Vec<Vec<f64>> = Vec::new();
    // Vertex combinations: each group on a single class.
    let mut combos: Vec<Vec<usize>> = vec![vec![]];
    for (idx, _) in groups {
        combos = combos
            .into_iter()
            .flat_map(|c| idx.iter().map(move |&i| [c.clone(), vec![i]].concat()))
            .collect();
        if combos.len() > 256 {
            combos.truncate(256);
        }
    }
    for c in combos {
        let mut w = vec![0.0; n];
        for (g, &i) in groups.iter().zip(&c) {
            w[i] += g.1;
        }
        starts.push(w);
    }
    let mut uni = vec![0.0; n];
    for (idx, mass) in groups {
        for &i in idx {
            uni[i] = mass / idx.len() as f64;
        }
    }
    starts.push(uni);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..8 {
        let mut w = vec![0.0; n];
        for (idx, mass) in groups {
            let raw: Vec<f64> = idx.iter().map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
            let s: f64 = raw.iter().sum();
            for (&i, x) in idx.iter().zip(raw) {
                w[i] = x / s * mass;
            }
        }
        starts.push(w);
    }
    let mut best = f64::INFINITY;
    for mut w in starts {
        let mut fw = f(&w);
        let mut step = 1.0;
        for _ in 0..2_000 {
            let g = a * DVector::from_column_slice(&w) * 2.0;
            let mut moved = false;
            while step > 1e-14 {
                let mut z: Vec<f64> = w
                    .iter()
                    .zip(g.iter())
                    .map(|(x, gi)| x - step * gi)
                    .collect();
                project(&mut z);
                let fz = f(&z);
                if fz < fw - 1e-16 {
                    w = z;
                    fw = fz;
                    moved = true;
                    step *= 2.0;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        best = best.min(fw);
    }
    best
}

/// Probes how the optimum at the state after the first missed round depends
/// on the mass put on touched classes, and counts near-optimal actions
/// everywhere.
pub fn uniqueness_probe(
    opt: &OptimalEct,
    tol: f64,
    cfg: &OptimizerConfig,
) -> Result<UniquenessReport> {
    let space = &opt.space;
    let v = &opt.values;
    let near_optimal: Vec<usize> = space
        .states
        .par_iter()
        .zip(v.par_iter())
        .map(|(s, &best)| {
            if s.coordinating() {
                return Ok(1);
            }
            let q = s.q_matrix(v);
            if s.swap {
                let a = (&q + q.transpose()) * 0.5;
                let sol = inner::minimize_quadratic(&a, &[], &cfg.inner)?;
                Ok(sol
                    .candidates
                    .iter()
                    .filter(|c| 1.0 + c.1 <= best + tol)
                    .count()
                    .max(1))
            } else {
                Ok(s.minimal_supports()
                    .iter()
                    .filter(|&&(j, k)| 1.0 + q[(j, k)] <= best + tol)
                    .count()
                    .max(1))
            }
        })
        .collect::<Result<_>>()?;
    let state = space.states[0]
        .terms
        .iter()
        .map(|t| t.next as usize)
        .min()
        .ok_or_else(|| Error::InvalidArgument("the game coordinates in the first round".into()))?;
    let s = &space.states[state];
    let touched = s.stage.touched_edges();
    let game = &space.game;
    let is_touched = |b: usize| {
        s.partition.blocks()[b].iter().any(|&x| {
            let c = game.choice_at(x);
            touched.iter().any(|&(l, r)| {
                if c.side == Side::Left {
                    l == c.index
                } else {
                    r == c.index
                }
            })
        })
    };
    let blocks: Vec<usize> = (0..s.num_classes()).collect();
    let q = s.q_matrix(v);
    let a = (&q + q.transpose()) * 0.5;
    let mut profile = Vec::new();
    const STEPS: usize = 200;
    for i in 0..=STEPS {
        let p = i as f64 / STEPS as f64;
        let mut groups = Vec::new();
        let sides: Vec<Option<Side>> = if s.swap {
            vec![None]
        } else {
            vec![Some(Side::Left), Some(Side::Right)]
        };
        let mut feasible = true;
        for side in sides {
            let on_side = |b: &usize| match side {
                None => true,
                Some(Side::Left) => s.left_size[*b] > 0,
                Some(Side::Right) => s.right_size[*b] > 0,
            };
            let t: Vec<usize> = blocks
                .iter()
                .copied()
                .filter(|b| on_side(b) && is_touched(*b))
                .collect();
            let u: Vec<usize> = blocks
                .iter()
                .copied()
                .filter(|b| on_side(b) && !is_touched(*b))
                .collect();
            for (idx, mass) in [(t, p), (u, 1.0 - p)] {
                if idx.is_empty() {
                    feasible &= mass == 0.0;
                } else if mass > 0.0 {
                    groups.push((idx, mass));
                }
            }
        }
        if feasible {
            profile.push((p, 1.0 + profile_min(&a, &groups, cfg.inner.seed ^ i as u64)));
        }
    }
    let lo = profile.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    let hi = profile
        .iter()
        .map(|x| x.1)
        .fold(f64::NEG_INFINITY, f64::max);
    let arg: Vec<f64> = profile
        .iter()
        .filter(|x| x.1 <= lo + tol)
        .map(|x| x.0)
        .collect();
    let (a0, a1) = (arg[0], *arg.last().unwrap());
    let verdict = if a0 == a1 {
        ProbeVerdict::Singleton(a0)
    } else {
        ProbeVerdict::Interval(a0, a1)
    };
    Ok(UniquenessReport {
        state,
        profile,
        spread: hi - lo,
        verdict,
        near_optimal,
    })
}

/// Quotient states without focal points, i.e. where every class has more
/// than one member outside a single shared edge.
pub fn focal_free_states(space: &QuotientSpace) -> Vec<usize> {
    (0..space.len())
        .filter(|&s| focal_points_of(&space.game, &space.states[s].partition).is_empty())
        .collect()
}

/// Cross-checks the quotient against an unmerged history tree of the given
/// depth: stage classes computed from scratch must match the quotient's
/// partition, and the Bellman value of each stage (with quotient values at
/// the leaves) must agree with the quotient value. Returns the largest
/// discrepancy.
pub fn verify_quotient(opt: &OptimalEct, depth: usize, cfg: &SymmetryConfig) -> Result<f64> {
    let space = &opt.space;
    let index: HashMap<&CanonicalKey, usize> = space
        .states
        .iter()
        .enumerate()
        .map(|(i, s)| (&s.key, i))
        .collect();
    let mut worst = 0.0f64;
    let mut frontier = vec![Stage::initial(space.game.clone())];
    for _ in 0..depth {
        let mut next = Vec::new();
        for stage in &frontier {
            let p = structural_classes(stage, cfg)?;
            let key = partition_key(&space.game, &p, cfg)?;
            let &s = index.get(&key).ok_or_else(|| {
                Error::InvalidArgument(format!("stage {} missing from the quotient", stage.trace()))
            })?;
            let st = &space.states[s];
            if st.coordinating() {
                continue;
            }
            // Re-derive the objective at this stage from its own successors.
            let nl = space.game.left_count();
            let blocks = p.blocks();
            let local = GroupState {
                key: key.clone(),
                stage: stage.clone(),
                partition: p.clone(),
                swap: st.swap,
                left_size: blocks
                    .iter()
                    .map(|b| b.iter().filter(|&&v| v < nl).count())
                    .collect(),
                right_size: blocks
                    .iter()
                    .map(|b| b.iter().filter(|&&v| v >= nl).count())
                    .collect(),
                winning: None,
                terms: Vec::new(),
            };
            let mut q = DMatrix::<f64>::zeros(p.num_blocks(), p.num_blocks());
            for l in 0..nl {
                for r in 0..space.game.right_count() {
                    if space.game.is_winning(l, r) {
                        continue;
                    }
                    let (t, _) = stage.advance((l, r))?;
                    let tk = partition_key(&space.game, &structural_classes(&t, cfg)?, cfg)?;
                    let &ti = index
                        .get(&tk)
                        .ok_or_else(|| Error::InvalidArgument("successor missing".into()))?;
                    let (j, k) = (p.block_of(l), p.block_of(nl + r));
                    q[(j, k)] += opt.values[ti] / (local.left_size[j] * local.right_size[k]) as f64;
                    if next.len() < 2_000 {
                        next.push(t);
                    }
                }
            }
            let value = if local.swap {
                let a = (&q + q.transpose()) * 0.5;
                1.0 + inner::minimize_quadratic(&a, &[], &InnerConfig::default())?.value
            } else {
                1.0 + local
                    .minimal_supports()
                    .iter()
                    .map(|&(j, k)| q[(j, k)])
                    .fold(f64::INFINITY, f64::min)
            };
            worst = worst.max((value - opt.values[s]).abs());
        }
        frontier = next;
    }
    Ok(worst)
}
