//! Renamings, structural-equivalence classes, focal points and canonical keys.
//!
//! Every question is answered by encoding the object as a vertex-labelled
//! graph and searching its automorphisms. A game becomes its bipartite graph
//! plus two *anchor* vertices, one joined to every left choice and one to
//! every right choice. The anchors share a label, so an automorphism either
//! fixes both (no player swap) or exchanges them (swap); no automorphism can
//! swap sides on only part of a disconnected game. Histories, partitions and
//! protocol memory are attached as extra labelled vertices.
//!
//! The structural partition of a stage determines its renaming group: the
//! self-renamings of a stage are exactly the game automorphisms that keep
//! every class of its partition in place. [`successor_partition`] relies on
//! this to advance a partition by one pair without replaying the history.

mod graph;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::game::{ChoiceId, Game, Side};
use crate::stage::{Pair, Stage};

use graph::{Budget, Graph};

/// Search limits for the symmetry engine.
#[derive(Clone, Copy, Debug)]
pub struct SymmetryConfig {
    /// Maximum number of search-tree nodes per query.
    pub node_budget: u64,
    /// Largest renaming group kept as an explicit element list.
    pub max_group_elements: usize,
}

impl Default for SymmetryConfig {
    fn default() -> Self {
        SymmetryConfig {
            node_budget: 10_000_000,
            max_group_elements: 100_000,
        }
    }
}

impl SymmetryConfig {
    fn budget(&self) -> Budget {
        Budget::new(self.node_budget)
    }
}

/// A partition of all choices of a game, indexed by global choice index.
///
/// Blocks are numbered in order of their smallest member, so two equal
/// partitions have identical representations.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    block_of: Vec<u32>,
}

impl Partition {
    /// Normalizes an arbitrary block labelling.
    pub fn from_labels<T: Copy + Eq + std::hash::Hash>(labels: &[T]) -> Partition {
        let mut seen = std::collections::HashMap::new();
        let block_of = labels
            .iter()
            .map(|l| {
                let next = seen.len() as u32;
                *seen.entry(*l).or_insert(next)
            })
            .collect();
        Partition { block_of }
    }

    /// Every choice in its own block.
    pub fn discrete(n: usize) -> Partition {
        Partition {
            block_of: (0..n as u32).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.block_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.block_of.is_empty()
    }

    pub fn block_of(&self, global: usize) -> usize {
        self.block_of[global] as usize
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.block_of
    }

    pub fn num_blocks(&self) -> usize {
        self.block_of.iter().max().map_or(0, |&b| b as usize + 1)
    }

    /// Blocks as sorted lists of global indices, ordered by smallest member.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.num_blocks()];
        for (v, &b) in self.block_of.iter().enumerate() {
            out[b as usize].push(v);
        }
        out
    }

    /// Blocks as choice lists.
    pub fn classes(&self, game: &Game) -> Vec<Vec<ChoiceId>> {
        self.blocks()
            .into_iter()
            .map(|b| b.into_iter().map(|v| game.choice_at(v)).collect())
            .collect()
    }

    /// True when every block of `self` lies inside a block of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        let mut image = vec![None; self.num_blocks()];
        for (v, &b) in self.block_of.iter().enumerate() {
            match image[b as usize] {
                None => image[b as usize] = Some(coarser.block_of[v]),
                Some(c) if c != coarser.block_of[v] => return false,
                _ => {}
            }
        }
        true
    }

    /// Debug dump: `[L0 R1] [L1 R0]`, classes sorted by smallest element.
    pub fn dump(&self, game: &Game) -> String {
        self.classes(game)
            .iter()
            .map(|c| {
                format!(
                    "[{}]",
                    c.iter()
                        .map(|x| x.to_string())
                        .collect::<Vec<_>>()
                        .join(" ")
                )
            })
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Reads a [`Partition::dump`] back.
    pub fn parse_dump(game: &Game, text: &str) -> Result<Partition> {
        let mut labels = vec![usize::MAX; game.choice_count()];
        for (b, class) in text
            .split(']')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .enumerate()
        {
            let inner = class.strip_prefix('[').ok_or_else(|| Error::Syntax {
                line: 1,
                message: format!("expected `[` in `{class}`"),
            })?;
            for tok in inner.split_whitespace() {
                let c: ChoiceId = tok.parse()?;
                if c.index >= game.count(c.side) {
                    return Err(Error::InvalidChoice(tok.to_string()));
                }
                labels[game.global(c)] = b;
            }
        }
        if labels.contains(&usize::MAX) {
            return Err(Error::Syntax {
                line: 1,
                message: "partition does not cover every choice".into(),
            });
        }
        Ok(Partition::from_labels(&labels))
    }
}

/// Opaque canonical key. Equal keys mean equal objects up to renaming.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CanonicalKey(pub(crate) Vec<u8>);

impl CanonicalKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }

    pub fn from_hex(s: &str) -> Result<CanonicalKey> {
        if !s.len().is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("bad key `{s}`")));
        }
        (0..s.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(&s[i..i + 2], 16))
            .collect::<std::result::Result<Vec<u8>, _>>()
            .map(CanonicalKey)
            .map_err(|_| Error::InvalidArgument(format!("bad key `{s}`")))
    }
}

impl fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.0 {
            write!(f, "{b:02x}")?;
        }
        Ok(())
    }
}

/// A renaming `(β, h)`: an optional player swap and a bijection on choices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Renaming {
    pub swap: bool,
    left: usize,
    map: Vec<usize>,
}

impl Renaming {
    pub fn identity(game: &Game) -> Renaming {
        Renaming {
            swap: false,
            left: game.left_count(),
            map: (0..game.choice_count()).collect(),
        }
    }

    /// Image of a choice given by global index.
    pub fn apply_global(&self, v: usize) -> usize {
        self.map[v]
    }

    pub fn apply(&self, c: ChoiceId) -> ChoiceId {
        let v = match c.side {
            Side::Left => c.index,
            Side::Right => self.left + c.index,
        };
        let w = self.map[v];
        if w < self.left {
            ChoiceId::left(w)
        } else {
            ChoiceId::right(w - self.left)
        }
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Renaming) -> Renaming {
        Renaming {
            swap: self.swap != other.swap,
            left: self.left,
            map: other.map.iter().map(|&v| self.map[v]).collect(),
        }
    }

    pub fn inverse(&self) -> Renaming {
        let mut map = vec![0; self.map.len()];
        for (v, &w) in self.map.iter().enumerate() {
            map[w] = v;
        }
        Renaming {
            swap: self.swap,
            left: self.left,
            map,
        }
    }

    /// Whether the renaming keeps the round `(l, r)` in place, exchanging
    /// its two members when the players are swapped.
    pub fn preserves_pair(&self, pair: Pair) -> bool {
        let (l, r) = (pair.0, self.left + pair.1);
        if self.swap {
            self.map[l] == r && self.map[r] == l
        } else {
            self.map[l] == l && self.map[r] == r
        }
    }

    /// Whether the renaming maps the winning relation onto itself.
    pub fn preserves_game(&self, game: &Game) -> bool {
        game.edges().iter().all(|&(l, r)| {
            let (a, b) = (
                self.apply(ChoiceId::left(l)),
                self.apply(ChoiceId::right(r)),
            );
            match (a.side, b.side) {
                (Side::Left, Side::Right) => game.is_winning(a.index, b.index),
                (Side::Right, Side::Left) => game.is_winning(b.index, a.index),
                _ => false,
            }
        })
    }
}

/// The self-renamings of a stage, as an explicit element list.
#[derive(Clone, Debug)]
pub struct RenamingGroup {
    game: Arc<Game>,
    elements: Vec<Renaming>,
}

impl RenamingGroup {
    pub fn elements(&self) -> &[Renaming] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn contains(&self, r: &Renaming) -> bool {
        self.elements.binary_search(r).is_ok()
    }

    pub fn has_swap(&self) -> bool {
        self.elements.iter().any(|r| r.swap)
    }

    /// Orbit partition of the group acting on choices.
    pub fn orbits(&self) -> Partition {
        let mut uf = graph::UnionFind::new(self.game.choice_count());
        for r in &self.elements {
            for v in 0..r.map.len() {
                uf.union(v, r.map[v]);
            }
        }
        let labels: Vec<usize> = (0..self.game.choice_count()).map(|v| uf.find(v)).collect();
        Partition::from_labels(&labels)
    }

    /// The subgroup keeping one more round in place: the group of the stage
    /// reached by playing `pair`.
    pub fn stabilizer(&self, pair: Pair) -> RenamingGroup {
        RenamingGroup {
            game: self.game.clone(),
            elements: self
                .elements
                .iter()
                .filter(|r| r.preserves_pair(pair))
                .cloned()
                .collect(),
        }
    }

    /// Closure under composition and inverses (quadratic; for tests and audits).
    pub fn is_closed(&self) -> bool {
        self.contains(&Renaming::identity(&self.game))
            && self.elements.iter().all(|a| {
                self.contains(&a.inverse())
                    && self.elements.iter().all(|b| self.contains(&a.compose(b)))
            })
    }
}

// Vertex labels. Choices carry CHOICE plus a per-query colour.
const ANCHOR: u64 = 1;
const CHOICE: u64 = 16;
const AUX: u64 = 1 << 40;
const AUX_BLOCK: u64 = AUX;
const AUX_COMMIT: u64 = AUX + (1 << 24);
const AUX_ROUND: u64 = AUX + (1 << 25);

struct Builder {
    labels: Vec<u64>,
    edges: Vec<(usize, usize)>,
}

impl Builder {
    fn game(game: &Game, choice_color: impl Fn(usize) -> u64) -> Builder {
        let n = game.choice_count();
        let mut labels: Vec<u64> = (0..n).map(|v| CHOICE + choice_color(v)).collect();
        labels.push(ANCHOR);
        labels.push(ANCHOR);
        let mut edges: Vec<(usize, usize)> = game
            .edges()
            .iter()
            .map(|&(l, r)| (l, game.left_count() + r))
            .collect();
        edges.extend((0..game.left_count()).map(|l| (n, l)));
        edges.extend((game.left_count()..n).map(|r| (n + 1, r)));
        Builder { labels, edges }
    }

    fn aux(&mut self, label: u64, members: impl IntoIterator<Item = usize>) {
        let v = self.labels.len();
        self.labels.push(label);
        self.edges.extend(members.into_iter().map(|m| (v, m)));
    }

    fn rounds(&mut self, game: &Game, history: &[Pair]) {
        for (i, &(l, r)) in history.iter().enumerate() {
            self.aux(AUX_ROUND + i as u64, [l, game.left_count() + r]);
        }
    }

    fn blocks(&mut self, partition: &Partition) {
        for b in partition.blocks() {
            self.aux(AUX_BLOCK, b);
        }
    }

    fn build(self) -> Graph {
        let mut g = Graph::new(self.labels);
        for (a, b) in self.edges {
            g.add_edge(a, b);
        }
        g
    }
}

fn stage_graph(stage: &Stage) -> Graph {
    let mut b = Builder::game(stage.game(), |_| 0);
    b.rounds(stage.game(), stage.history());
    b.build()
}

fn to_renaming(game: &Game, perm: &[u32]) -> Renaming {
    let n = game.choice_count();
    Renaming {
        swap: perm[n] as usize == n + 1,
        left: game.left_count(),
        map: perm[..n].iter().map(|&v| v as usize).collect(),
    }
}

fn choice_orbits(
    game: &Game,
    g: &Graph,
    colors: &[u32],
    cfg: &SymmetryConfig,
) -> Result<Partition> {
    let orbits = graph::orbit_partition(g, colors, &mut cfg.budget())?;
    Ok(Partition::from_labels(&orbits[..game.choice_count()]))
}

/// All self-renamings of a stage.
pub fn stage_renaming_group(stage: &Stage, cfg: &SymmetryConfig) -> Result<RenamingGroup> {
    let g = stage_graph(stage);
    let perms = graph::all_automorphisms(
        &g,
        &g.initial_colors(),
        &mut cfg.budget(),
        cfg.max_group_elements,
    )?
    .ok_or(Error::GroupTooLarge(cfg.max_group_elements))?;
    let mut elements: Vec<Renaming> = perms.iter().map(|p| to_renaming(stage.game(), p)).collect();
    elements.sort();
    Ok(RenamingGroup {
        game: stage.game_arc().clone(),
        elements,
    })
}

/// Structural-equivalence classes of a stage: the orbits of its renaming group.
pub fn structural_classes(stage: &Stage, cfg: &SymmetryConfig) -> Result<Partition> {
    let g = stage_graph(stage);
    choice_orbits(stage.game(), &g, &g.initial_colors(), cfg)
}

/// Structural classes of the initial stage of `game`.
pub fn initial_partition(game: &Game, cfg: &SymmetryConfig) -> Result<Partition> {
    let g = Builder::game(game, |_| 0).build();
    choice_orbits(game, &g, &g.initial_colors(), cfg)
}

/// Structural classes after playing `pair` at a stage whose classes are
/// `partition`.
///
/// The stage group is the set of game automorphisms fixing every class, so
/// the successor group is that set intersected with the stabilizer of the
/// new pair. The pair's two choices get marked colours, shared only when
/// they lie in the same class.
pub fn successor_partition(
    game: &Game,
    partition: &Partition,
    pair: Pair,
    cfg: &SymmetryConfig,
) -> Result<Partition> {
    let nb = partition.num_blocks() as u64;
    let (l, r) = (pair.0, game.left_count() + pair.1);
    let g = Builder::game(game, |v| {
        let b = partition.block_of(v) as u64;
        if v == l || v == r {
            nb + b
        } else {
            b
        }
    })
    .build();
    choice_orbits(game, &g, &g.initial_colors(), cfg)
}

/// Whether the players can be swapped at a stage with these classes: true
/// exactly when every class contains choices of both players.
pub fn partition_has_swap(game: &Game, partition: &Partition) -> bool {
    partition.blocks().iter().all(|b| {
        b.iter().any(|&v| v < game.left_count()) && b.iter().any(|&v| v >= game.left_count())
    })
}

/// Choices that are focal points: alone in their class, or in a class that
/// is exactly the two ends of one winning pair.
pub fn focal_points(stage: &Stage, cfg: &SymmetryConfig) -> Result<BTreeSet<ChoiceId>> {
    let p = structural_classes(stage, cfg)?;
    Ok(focal_points_of(stage.game(), &p))
}

pub(crate) fn focal_points_of(game: &Game, p: &Partition) -> BTreeSet<ChoiceId> {
    let mut out = BTreeSet::new();
    for block in p.blocks() {
        let focal = match block.as_slice() {
            [_] => true,
            [a, b] => {
                let (x, y) = (game.choice_at(*a), game.choice_at(*b));
                x.side == Side::Left && y.side == Side::Right && game.is_winning(x.index, y.index)
            }
            _ => false,
        };
        if focal {
            out.extend(block.iter().map(|&v| game.choice_at(v)));
        }
    }
    out
}

/// Stages of one game with identical structural classes.
pub fn are_automorphism_equivalent(s1: &Stage, s2: &Stage, cfg: &SymmetryConfig) -> Result<bool> {
    if s1.game() != s2.game() {
        return Err(Error::InvalidArgument(
            "stages belong to different games".into(),
        ));
    }
    Ok(structural_classes(s1, cfg)? == structural_classes(s2, cfg)?)
}

/// A renaming from `s1` onto `s2` (same game), if one exists.
pub fn renaming_between(s1: &Stage, s2: &Stage, cfg: &SymmetryConfig) -> Result<Option<Renaming>> {
    if s1.history().len() != s2.history().len() || s1.game() != s2.game() {
        return Ok(None);
    }
    let (g1, g2) = (stage_graph(s1), stage_graph(s2));
    let iso = graph::find_isomorphism(
        &g1,
        &g1.initial_colors(),
        &g2,
        &g2.initial_colors(),
        &mut cfg.budget(),
    )?;
    Ok(iso.map(|p| to_renaming(s1.game(), &p)))
}

fn key_of(g: &Graph, cfg: &SymmetryConfig) -> Result<CanonicalKey> {
    Ok(CanonicalKey(
        graph::canonical_form(g, None, &mut cfg.budget())?.key_bytes(),
    ))
}

/// Equal keys iff the two stages are related by a renaming.
pub fn canonical_stage_key(stage: &Stage, cfg: &SymmetryConfig) -> Result<CanonicalKey> {
    key_of(&stage_graph(stage), cfg)
}

/// Equal keys iff the initial stages admit a renaming, player swap included.
pub fn canonical_game_key(game: &Game, cfg: &SymmetryConfig) -> Result<CanonicalKey> {
    key_of(&Builder::game(game, |_| 0).build(), cfg)
}

/// Key of a game together with an unordered partition of its choices.
pub fn partition_key(
    game: &Game,
    partition: &Partition,
    cfg: &SymmetryConfig,
) -> Result<CanonicalKey> {
    let mut b = Builder::game(game, |_| 0);
    b.blocks(partition);
    key_of(&b.build(), cfg)
}

/// Canonical key of `partition` plus a canonical numbering of its blocks.
///
/// When several numberings fit the key, the stage history decides, so that
/// renamed stages number corresponding blocks alike.
pub fn partition_labeling(
    stage: &Stage,
    partition: &Partition,
    cfg: &SymmetryConfig,
) -> Result<(CanonicalKey, Vec<usize>)> {
    let game = stage.game();
    let mut b = Builder::game(game, |_| 0);
    b.blocks(partition);
    let mut pb = Builder::game(game, |_| 0);
    pb.blocks(partition);
    pb.rounds(game, stage.history());
    let (g, prune) = (b.build(), pb.build());
    let canon = graph::canonical_form(&g, Some(&prune), &mut cfg.budget())?;
    let first_block = game.choice_count() + 2;
    let mut order: Vec<(u32, usize)> = (0..partition.num_blocks())
        .map(|k| (canon.position[first_block + k], k))
        .collect();
    order.sort_unstable();
    let mut index = vec![0; order.len()];
    for (rank, &(_, k)) in order.iter().enumerate() {
        index[k] = rank;
    }
    Ok((CanonicalKey(canon.key_bytes()), index))
}

/// Key of a stage reduced to its first `rounds` rounds plus marked choices
/// (protocol memory). Used for protocol-specific state merging.
pub(crate) fn marked_stage_key(
    stage: &Stage,
    rounds: usize,
    marks: &[usize],
    cfg: &SymmetryConfig,
) -> Result<CanonicalKey> {
    let mut b = Builder::game(stage.game(), |_| 0);
    b.rounds(stage.game(), &stage.history()[..rounds.min(stage.round())]);
    for &m in marks {
        b.aux(AUX_COMMIT, [m]);
    }
    key_of(&b.build(), cfg)
}

#[cfg(test)]
mod tests;
