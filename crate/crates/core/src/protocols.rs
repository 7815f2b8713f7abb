//! Protocols: per-stage, per-player probability assignments.
//!
//! A protocol maps a stage and a player to a distribution over that player's
//! choices. Protocols with private memory (wait-or-move commits to one
//! coordinating choice) expose it through [`Memory`]: after each missed
//! round the memory is updated by a random draw given as weighted branches,
//! so both exact analysis and simulation see the same model.
//!
//! Every shipped protocol is structural: it gives equal probability to
//! choices that a renaming of the stage maps onto each other.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::Path;
use std::sync::{Arc, Mutex};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{ChoiceId, Game, Side};
use crate::stage::{Pair, Stage};
use crate::symmetry::{
    canonical_stage_key, initial_partition, partition_labeling, stage_renaming_group,
    successor_partition, Partition, SymmetryConfig,
};

/// Probabilities over one player's choices, in exact rationals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChoiceDistribution {
    pub player: Side,
    pub weights: Vec<BigRational>,
}

impl ChoiceDistribution {
    pub fn uniform(player: Side, n: usize) -> Self {
        Self::uniform_over(player, n, &(0..n).collect::<Vec<_>>())
    }

    /// Uniform over `support`, zero elsewhere.
    pub fn uniform_over(player: Side, n: usize, support: &[usize]) -> Self {
        let p = BigRational::new(BigInt::one(), BigInt::from(support.len()));
        let mut weights = vec![BigRational::zero(); n];
        for &i in support {
            weights[i] = p.clone();
        }
        ChoiceDistribution { player, weights }
    }

    /// Snaps each weight to a nearby simple rational, then renormalizes.
    pub fn from_f64(player: Side, weights: &[f64]) -> Result<Self> {
        let mut w: Vec<BigRational> = weights.iter().map(|&x| snap_rational(x.max(0.0))).collect();
        let total: BigRational = w.iter().sum();
        if total.is_zero() {
            return Err(Error::InvalidArgument(
                "distribution with zero total weight".into(),
            ));
        }
        for x in w.iter_mut() {
            *x = &*x / &total;
        }
        Ok(ChoiceDistribution { player, weights: w })
    }

    pub fn prob(&self, i: usize) -> &BigRational {
        &self.weights[i]
    }

    /// Choices with positive probability.
    pub fn support(&self) -> Vec<usize> {
        (0..self.weights.len())
            .filter(|&i| self.weights[i].is_positive())
            .collect()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.weights
            .iter()
            .map(|w| w.to_f64().unwrap_or(f64::NAN))
            .collect()
    }

    /// Nonnegative weights summing to exactly one.
    pub fn is_valid(&self) -> bool {
        self.weights.iter().all(|w| !w.is_negative())
            && self.weights.iter().sum::<BigRational>() == BigRational::one()
    }
}

/// The closest rational with a small denominator when one lies within
/// 1e-10 of `x`; otherwise the exact binary value of `x`.
pub fn snap_rational(x: f64) -> BigRational {
    if !x.is_finite() {
        return BigRational::zero();
    }
    let (mut p0, mut q0, mut p1, mut q1) = (0i128, 1i128, 1i128, 0i128);
    let mut y = x.abs();
    for _ in 0..40 {
        let a = y.floor();
        if a > 1e12 {
            break;
        }
        let ai = a as i128;
        let (p2, q2) = (ai * p1 + p0, ai * q1 + q0);
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
        if q1 > 1_000_000_000 {
            break;
        }
        if (x.abs() - p1 as f64 / q1 as f64).abs() <= 1e-10 {
            let r = BigRational::new(BigInt::from(p1), BigInt::from(q1));
            return if x < 0.0 { -r } else { r };
        }
        let frac = y - a;
        if frac <= 0.0 {
            break;
        }
        y = 1.0 / frac;
    }
    BigRational::from_float(x).unwrap_or_else(BigRational::zero)
}

/// Private per-play memory of a protocol.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Memory {
    /// Choice index (own side) committed to after round 1.
    pub committed: Option<usize>,
}

/// What a protocol's future behaviour depends on. Exact analysis merges
/// stages that agree on it.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum View {
    /// Identical behaviour at every stage.
    Stateless,
    /// Depends only on the structural partition of the stage.
    Partition,
    /// Depends on the round-1 pair and the players' memories.
    OpeningRound,
    /// Depends on the whole history.
    History,
}

pub trait Protocol: Send + Sync {
    fn name(&self) -> String;

    fn view(&self) -> View;

    /// Distribution of `player` at `stage`. With empty memory, protocols
    /// that would draw a commitment return the average over that draw.
    fn distribution(
        &self,
        stage: &Stage,
        player: Side,
        memory: &Memory,
    ) -> Result<ChoiceDistribution>;

    /// Memory after a missed round, as weighted branches. `stage` already
    /// contains the round.
    fn update_memory(
        &self,
        _stage: &Stage,
        _player: Side,
        memory: &Memory,
    ) -> Result<Vec<(BigRational, Memory)>> {
        Ok(vec![(BigRational::one(), memory.clone())])
    }
}

/// Uniform play every round.
#[derive(Clone, Copy, Debug, Default)]
pub struct Uniform;

impl Protocol for Uniform {
    fn name(&self) -> String {
        "uniform".into()
    }
    fn view(&self) -> View {
        View::Stateless
    }
    fn distribution(&self, stage: &Stage, player: Side, _: &Memory) -> Result<ChoiceDistribution> {
        Ok(ChoiceDistribution::uniform(
            player,
            stage.game().count(player),
        ))
    }
}

/// Uniform distribution of `player` at `stage`.
pub fn uniform_protocol(stage: &Stage, player: Side) -> ChoiceDistribution {
    ChoiceDistribution::uniform(player, stage.game().count(player))
}

/// How wait-or-move plays round 1.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Opening {
    Uniform,
    /// Total mass `mass` spread over own choices of degree `degree`, the
    /// rest spread over the other choices.
    DegreeMass {
        degree: usize,
        mass: BigRational,
    },
}

/// Wait-or-move: a first pick, then a fair coin between repeating it and
/// switching to a committed partner of the opponent's first pick.
#[derive(Clone, Debug)]
pub struct WaitOrMove {
    opening: Opening,
}

impl Default for WaitOrMove {
    fn default() -> Self {
        WaitOrMove {
            opening: Opening::Uniform,
        }
    }
}

impl WaitOrMove {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_opening(opening: Opening) -> Self {
        WaitOrMove { opening }
    }

    fn opening(&self, game: &Game, player: Side) -> ChoiceDistribution {
        let n = game.count(player);
        match &self.opening {
            Opening::Uniform => ChoiceDistribution::uniform(player, n),
            Opening::DegreeMass { degree, mass } => {
                let (hit, rest): (Vec<usize>, Vec<usize>) =
                    (0..n).partition(|&i| game.degree(ChoiceId::new(player, i)) == *degree);
                if hit.is_empty() || rest.is_empty() {
                    return ChoiceDistribution::uniform(player, n);
                }
                let mut weights = vec![BigRational::zero(); n];
                let a = mass / BigRational::from_integer(hit.len().into());
                let b = (BigRational::one() - mass) / BigRational::from_integer(rest.len().into());
                for i in hit {
                    weights[i] = a.clone();
                }
                for i in rest {
                    weights[i] = b.clone();
                }
                ChoiceDistribution { player, weights }
            }
        }
    }
}

fn own_and_other(pair: Pair, player: Side) -> (usize, usize) {
    match player {
        Side::Left => (pair.0, pair.1),
        Side::Right => (pair.1, pair.0),
    }
}

impl Protocol for WaitOrMove {
    fn name(&self) -> String {
        match self.opening {
            Opening::Uniform => "wm".into(),
            Opening::DegreeMass { degree, ref mass } => {
                format!("wm[opening: {mass} on degree {degree}]")
            }
        }
    }

    fn view(&self) -> View {
        View::OpeningRound
    }

    fn distribution(
        &self,
        stage: &Stage,
        player: Side,
        memory: &Memory,
    ) -> Result<ChoiceDistribution> {
        let game = stage.game();
        let Some(&first) = stage.history().first() else {
            return Ok(self.opening(game, player));
        };
        let (c, d) = own_and_other(first, player);
        let n = game.count(player);
        let half = BigRational::new(1.into(), 2.into());
        let mut weights = vec![BigRational::zero(); n];
        weights[c] += &half;
        match memory.committed {
            Some(cp) => weights[cp] += &half,
            None => {
                let partners = game.partners(ChoiceId::new(player.other(), d));
                if partners.is_empty() {
                    return Err(Error::NoCoordinatingChoice(
                        ChoiceId::new(player.other(), d).to_string(),
                    ));
                }
                let share = &half / BigRational::from_integer(partners.len().into());
                for &cp in partners {
                    weights[cp] += &share;
                }
            }
        }
        Ok(ChoiceDistribution { player, weights })
    }

    fn update_memory(
        &self,
        stage: &Stage,
        player: Side,
        memory: &Memory,
    ) -> Result<Vec<(BigRational, Memory)>> {
        if memory.committed.is_some() || stage.round() != 1 {
            return Ok(vec![(BigRational::one(), memory.clone())]);
        }
        let (_, d) = own_and_other(stage.history()[0], player);
        let opponent = ChoiceId::new(player.other(), d);
        let partners = stage.game().partners(opponent);
        if partners.is_empty() {
            return Err(Error::NoCoordinatingChoice(opponent.to_string()));
        }
        let p = BigRational::new(1.into(), partners.len().into());
        Ok(partners
            .iter()
            .map(|&cp| {
                (
                    p.clone(),
                    Memory {
                        committed: Some(cp),
                    },
                )
            })
            .collect())
    }
}

/// Structural partitions of stages, computed round by round and memoized.
pub struct PartitionCache {
    cfg: SymmetryConfig,
    map: Mutex<HashMap<(Game, Vec<Pair>), Partition>>,
}

impl PartitionCache {
    pub fn new(cfg: SymmetryConfig) -> Self {
        PartitionCache {
            cfg,
            map: Mutex::new(HashMap::new()),
        }
    }

    pub fn config(&self) -> &SymmetryConfig {
        &self.cfg
    }

    pub fn partition(&self, stage: &Stage) -> Result<Partition> {
        let game = stage.game();
        let hist = stage.history();
        let key = |k: usize| (game.clone(), hist[..k].to_vec());
        // Longest memoized prefix, then extend one round at a time.
        let (mut k, mut p) = {
            let map = self.map.lock().unwrap();
            let mut found = None;
            for k in (0..=hist.len()).rev() {
                if let Some(p) = map.get(&key(k)) {
                    found = Some((k, p.clone()));
                    break;
                }
            }
            found.unwrap_or((usize::MAX, Partition::discrete(0)))
        };
        if k == usize::MAX {
            p = initial_partition(game, &self.cfg)?;
            k = 0;
            self.map.lock().unwrap().insert(key(0), p.clone());
        }
        while k < hist.len() {
            p = successor_partition(game, &p, hist[k], &self.cfg)?;
            k += 1;
            self.map.lock().unwrap().insert(key(k), p.clone());
        }
        Ok(p)
    }
}

/// Loop avoidance: avoid choices that some losing opponent reply could turn
/// into a stage with the same structural partition; uniform over the rest,
/// or over everything when nothing is left.
pub struct LoopAvoidance {
    partitions: PartitionCache,
    decisions: Mutex<HashMap<(Game, Partition), [ChoiceDistribution; 2]>>,
}

impl LoopAvoidance {
    pub fn new(cfg: SymmetryConfig) -> Self {
        LoopAvoidance {
            partitions: PartitionCache::new(cfg),
            decisions: Mutex::new(HashMap::new()),
        }
    }

    fn decide(&self, game: &Game, p: &Partition) -> Result<[ChoiceDistribution; 2]> {
        let cfg = self.partitions.config();
        let mut out = Vec::with_capacity(2);
        for side in Side::both() {
            let n = game.count(side);
            let mut support = Vec::new();
            for c in 0..n {
                let mut avoided = false;
                for d in 0..game.count(side.other()) {
                    let pair = match side {
                        Side::Left => (c, d),
                        Side::Right => (d, c),
                    };
                    // A winning reply ends the play; it recreates nothing.
                    if game.is_winning(pair.0, pair.1) {
                        continue;
                    }
                    if successor_partition(game, p, pair, cfg)? == *p {
                        avoided = true;
                        break;
                    }
                }
                if !avoided {
                    support.push(c);
                }
            }
            if support.is_empty() {
                support = (0..n).collect();
            }
            out.push(ChoiceDistribution::uniform_over(side, n, &support));
        }
        let right = out.pop().unwrap();
        let left = out.pop().unwrap();
        Ok([left, right])
    }
}

impl Protocol for LoopAvoidance {
    fn name(&self) -> String {
        "la".into()
    }

    fn view(&self) -> View {
        View::Partition
    }

    fn distribution(&self, stage: &Stage, player: Side, _: &Memory) -> Result<ChoiceDistribution> {
        let p = self.partitions.partition(stage)?;
        let key = (stage.game().clone(), p);
        if let Some(d) = self.decisions.lock().unwrap().get(&key) {
            return Ok(d[player as usize].clone());
        }
        let d = self.decide(&key.0, &key.1)?;
        let out = d[player as usize].clone();
        self.decisions.lock().unwrap().insert(key, d);
        Ok(out)
    }
}

/// One state of a class-weight table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableEntry {
    /// Weight of each class in canonical class order. A class containing
    /// choices of both players carries the same weight for each of them.
    pub weights: Vec<f64>,
    /// Human-readable classes of a representative stage, same order.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub classes: Vec<Vec<String>>,
    /// Optimal value from this state, when exported by the optimizer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
}

/// Policy table: partition key (hex) to class weights.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassWeightTable {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub game: Option<Game>,
    pub states: BTreeMap<String, TableEntry>,
}

impl ClassWeightTable {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("table serialization cannot fail")
    }
}

/// A protocol driven by a [`ClassWeightTable`].
///
/// At each stage the structural partition is looked up by canonical key;
/// each class weight is split uniformly over the class's choices of the
/// player in question.
pub struct ClassWeightProtocol {
    table: ClassWeightTable,
    partitions: PartitionCache,
    memo: Mutex<HashMap<(Game, Vec<Pair>), StageDistributions>>,
    label: String,
}

type StageDistributions = Arc<[ChoiceDistribution; 2]>;

/// Builds the table-driven protocol.
pub fn class_weight_protocol(table: ClassWeightTable, cfg: SymmetryConfig) -> ClassWeightProtocol {
    ClassWeightProtocol {
        table,
        partitions: PartitionCache::new(cfg),
        memo: Mutex::new(HashMap::new()),
        label: "table".into(),
    }
}

impl ClassWeightProtocol {
    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn table(&self) -> &ClassWeightTable {
        &self.table
    }

    fn evaluate(&self, stage: &Stage) -> Result<[ChoiceDistribution; 2]> {
        let game = stage.game();
        let p = self.partitions.partition(stage)?;
        let (key, order) = partition_labeling(stage, &p, self.partitions.config())?;
        let key = key.to_string();
        let entry = self
            .table
            .states
            .get(&key)
            .ok_or_else(|| Error::MissingStageEntry(key.clone()))?;
        if entry.weights.len() != order.len() {
            return Err(Error::InvalidArgument(format!(
                "entry {key} has {} weights for {} classes",
                entry.weights.len(),
                order.len()
            )));
        }
        let blocks = p.blocks();
        let mut out = Vec::with_capacity(2);
        for side in Side::both() {
            let mut w = vec![0.0; game.count(side)];
            for (b, members) in blocks.iter().enumerate() {
                let own: Vec<ChoiceId> = members
                    .iter()
                    .map(|&v| game.choice_at(v))
                    .filter(|c| c.side == side)
                    .collect();
                for c in &own {
                    w[c.index] = entry.weights[order[b]] / own.len() as f64;
                }
            }
            out.push(ChoiceDistribution::from_f64(side, &w)?);
        }
        let right = out.pop().unwrap();
        let left = out.pop().unwrap();
        Ok([left, right])
    }
}

impl Protocol for ClassWeightProtocol {
    fn name(&self) -> String {
        self.label.clone()
    }

    fn view(&self) -> View {
        View::Partition
    }

    fn distribution(&self, stage: &Stage, player: Side, _: &Memory) -> Result<ChoiceDistribution> {
        let key = (stage.game().clone(), stage.history().to_vec());
        if let Some(d) = self.memo.lock().unwrap().get(&key) {
            return Ok(d[player as usize].clone());
        }
        let d = Arc::new(self.evaluate(stage)?);
        self.memo.lock().unwrap().insert(key, d.clone());
        Ok(d[player as usize].clone())
    }
}

/// Whether `pr` gives equal probability to choices that some self-renaming
/// of `stage` maps onto each other (across players when it swaps them).
pub fn structurality_check(pr: &dyn Protocol, stage: &Stage, cfg: &SymmetryConfig) -> Result<bool> {
    let group = stage_renaming_group(stage, cfg)?;
    let dists = [
        pr.distribution(stage, Side::Left, &Memory::default())?,
        pr.distribution(stage, Side::Right, &Memory::default())?,
    ];
    let prob = |c: ChoiceId| dists[c.side as usize].prob(c.index);
    for r in group.elements() {
        for c in stage.game().choices() {
            if prob(c) != prob(r.apply(c)) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Every losing stage reachable within `depth` rounds while both players
/// stay inside the protocol's marginal support, one per renaming class,
/// paired with the index of its parent (the initial stage has none).
pub fn reachable_stages(
    pr: &dyn Protocol,
    game: Arc<Game>,
    depth: usize,
    cfg: &SymmetryConfig,
) -> Result<Vec<(Stage, Option<usize>)>> {
    let mut all = vec![(Stage::initial(game), None)];
    let mut seen = HashSet::new();
    let mut frontier = vec![0usize];
    for _ in 0..depth {
        let mut next = Vec::new();
        for &i in &frontier {
            let s = all[i].0.clone();
            let dl = pr.distribution(&s, Side::Left, &Memory::default())?;
            let dr = pr.distribution(&s, Side::Right, &Memory::default())?;
            for l in dl.support() {
                for r in dr.support() {
                    let (t, won) = s.advance((l, r))?;
                    if !won && seen.insert(canonical_stage_key(&t, cfg)?) {
                        all.push((t, Some(i)));
                        next.push(all.len() - 1);
                    }
                }
            }
        }
        frontier = next;
    }
    Ok(all)
}

/// Resolves a protocol name: `uniform`, `wm`, `la` or `table:<file>`.
pub fn protocol_by_name(name: &str, cfg: SymmetryConfig) -> Result<Box<dyn Protocol>> {
    match name {
        "uniform" => Ok(Box::new(Uniform)),
        "wm" => Ok(Box::new(WaitOrMove::new())),
        "la" => Ok(Box::new(LoopAvoidance::new(cfg))),
        _ => match name.strip_prefix("table:") {
            Some(path) => {
                let table = ClassWeightTable::load(path)?;
                Ok(Box::new(class_weight_protocol(table, cfg).with_label(name)))
            }
            None => Err(Error::InvalidArgument(format!("unknown protocol `{name}`"))),
        },
    }
}

#[cfg(test)]
mod tests;
