//! Two-player win-lose coordination games.
//!
//! A game is a bipartite graph: left choices belong to player 1, right
//! choices to player 2, and each edge is a winning pair. Choices are
//! side-tagged indices, so the two choice sets are disjoint by construction.
//!
//! Two interchange formats are supported. The edge-list text format:
//!
//! ```text
//! # CM_2
//! left 2
//! right 2
//! edge 0 0
//! edge 1 1
//! ```
//!
//! and its JSON mirror `{"left":2,"right":2,"edges":[[0,0],[1,1]]}`.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which player a choice belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub fn both() -> [Side; 2] {
        [Side::Left, Side::Right]
    }

    fn letter(self) -> char {
        match self {
            Side::Left => 'L',
            Side::Right => 'R',
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "Left",
            Side::Right => "Right",
        })
    }
}

/// A choice of one of the two players. Orders left choices before right ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ChoiceId {
    pub side: Side,
    pub index: usize,
}

impl ChoiceId {
    pub fn new(side: Side, index: usize) -> Self {
        ChoiceId { side, index }
    }
    pub fn left(index: usize) -> Self {
        ChoiceId::new(Side::Left, index)
    }
    pub fn right(index: usize) -> Self {
        ChoiceId::new(Side::Right, index)
    }
}

/// Short form used in traces and partition dumps: `L0`, `R3`.
impl fmt::Display for ChoiceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.side.letter(), self.index)
    }
}

impl std::str::FromStr for ChoiceId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidChoice(s.to_string());
        let mut chars = s.chars();
        let side = match chars.next() {
            Some('L') => Side::Left,
            Some('R') => Side::Right,
            _ => return Err(bad()),
        };
        let index = chars.as_str().parse().map_err(|_| bad())?;
        Ok(ChoiceId { side, index })
    }
}

/// One way a game can fail validation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Violation {
    EmptySide(Side),
    EmptyWinning,
    OutOfRange(usize, usize),
    DuplicatePair(usize, usize),
    SurelyLosing(ChoiceId),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptySide(s) => write!(f, "{s} side has no choices"),
            Violation::EmptyWinning => write!(f, "empty winning relation"),
            Violation::OutOfRange(l, r) => write!(f, "pair (L{l}, R{r}) out of range"),
            Violation::DuplicatePair(l, r) => write!(f, "duplicate pair (L{l}, R{r})"),
            Violation::SurelyLosing(c) => write!(f, "surely losing choice {}#{}", c.side, c.index),
        }
    }
}

/// Result of [`validate`]: empty means the game is well formed.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// A two-player win-lose coordination game.
///
/// Values built through [`Game::new`] (and every parser) are valid. The
/// unchecked constructor exists so that malformed inputs can be inspected
/// with [`validate`].
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "GameJson", try_from = "GameJson")]
pub struct Game {
    left: usize,
    right: usize,
    edges: Vec<(usize, usize)>,
    left_adj: Vec<Vec<usize>>,
    right_adj: Vec<Vec<usize>>,
}

impl Game {
    /// Builds and validates a game.
    pub fn new(
        left: usize,
        right: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Game> {
        let g = Game::new_unchecked(left, right, edges);
        let report = validate(&g);
        if report.is_ok() {
            Ok(g)
        } else {
            Err(Error::InvalidGame(report.violations))
        }
    }

    /// Builds a game without checking any invariant.
    pub fn new_unchecked(
        left: usize,
        right: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Game {
        let mut edges: Vec<(usize, usize)> = edges.into_iter().collect();
        edges.sort_unstable();
        let mut left_adj = vec![Vec::new(); left];
        let mut right_adj = vec![Vec::new(); right];
        let mut prev = None;
        for &(l, r) in &edges {
            if l < left && r < right && prev != Some((l, r)) {
                left_adj[l].push(r);
                right_adj[r].push(l);
            }
            prev = Some((l, r));
        }
        for adj in right_adj.iter_mut() {
            adj.sort_unstable();
        }
        Game {
            left,
            right,
            edges,
            left_adj,
            right_adj,
        }
    }

    pub fn left_count(&self) -> usize {
        self.left
    }

    pub fn right_count(&self) -> usize {
        self.right
    }

    pub fn count(&self, side: Side) -> usize {
        match side {
            Side::Left => self.left,
            Side::Right => self.right,
        }
    }

    /// Total number of choices of both players.
    pub fn choice_count(&self) -> usize {
        self.left + self.right
    }

    /// Winning pairs in lexicographic order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_winning(&self, l: usize, r: usize) -> bool {
        self.left_adj
            .get(l)
            .is_some_and(|a| a.binary_search(&r).is_ok())
    }

    /// Opposing choices that coordinate with `c`.
    pub fn partners(&self, c: ChoiceId) -> &[usize] {
        match c.side {
            Side::Left => &self.left_adj[c.index],
            Side::Right => &self.right_adj[c.index],
        }
    }

    pub fn degree(&self, c: ChoiceId) -> usize {
        self.partners(c).len()
    }

    /// Dense index over all choices: left choices first, then right ones.
    pub fn global(&self, c: ChoiceId) -> usize {
        match c.side {
            Side::Left => c.index,
            Side::Right => self.left + c.index,
        }
    }

    pub fn choice_at(&self, global: usize) -> ChoiceId {
        if global < self.left {
            ChoiceId::left(global)
        } else {
            ChoiceId::right(global - self.left)
        }
    }

    /// All choices, left ones first.
    pub fn choices(&self) -> impl Iterator<Item = ChoiceId> + '_ {
        (0..self.choice_count()).map(|i| self.choice_at(i))
    }

    /// The same game with the player roles exchanged.
    pub fn swapped(&self) -> Game {
        Game::new_unchecked(
            self.right,
            self.left,
            self.edges.iter().map(|&(l, r)| (r, l)),
        )
    }

    /// Loads a game from a file in either interchange format.
    pub fn load(path: impl AsRef<Path>) -> Result<Game> {
        let text = std::fs::read_to_string(path.as_ref())?;
        if text.trim_start().starts_with('{') {
            Game::from_json(&text)
        } else {
            parse_game(&text)
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("game serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Game> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Number of choices of the larger player: an `m`-choice game has size `m`.
pub fn game_size(g: &Game) -> usize {
    g.left.max(g.right)
}

/// Choice matching game `CM_m`: `m` disjoint winning pairs `(i, i)`.
pub fn make_choice_matching(m: usize) -> Result<Game> {
    if m == 0 {
        return Err(Error::InvalidArgument(
            "choice matching games need m >= 1".into(),
        ));
    }
    Game::new(m, m, (0..m).map(|i| (i, i)))
}

/// Checks every game invariant and names each offender.
pub fn validate(g: &Game) -> ValidationReport {
    let mut violations = Vec::new();
    for side in Side::both() {
        if g.count(side) == 0 {
            violations.push(Violation::EmptySide(side));
        }
    }
    if g.edges.is_empty() {
        violations.push(Violation::EmptyWinning);
    }
    for (i, &(l, r)) in g.edges.iter().enumerate() {
        if l >= g.left || r >= g.right {
            violations.push(Violation::OutOfRange(l, r));
        } else if i > 0 && g.edges[i - 1] == (l, r) {
            violations.push(Violation::DuplicatePair(l, r));
        }
    }
    for c in g.choices() {
        if g.degree(c) == 0 {
            violations.push(Violation::SurelyLosing(c));
        }
    }
    ValidationReport { violations }
}

/// Parses the edge-list text format.
pub fn parse_game(text: &str) -> Result<Game> {
    let mut left = None;
    let mut right = None;
    let mut edges = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let num = |s: &str| -> Result<usize> {
            s.parse().map_err(|_| Error::Syntax {
                line: line_no,
                message: format!("expected a natural number, found `{s}`"),
            })
        };
        match tokens.as_slice() {
            ["left", n] => left = Some(num(n)?),
            ["right", n] => right = Some(num(n)?),
            ["edge", l, r] => edges.push((line_no, num(l)?, num(r)?)),
            _ => {
                return Err(Error::Syntax {
                    line: line_no,
                    message: format!("unrecognized line `{line}`"),
                })
            }
        }
    }
    let missing = |what: &str| Error::Syntax {
        line: text.lines().count().max(1),
        message: format!("missing `{what}` header"),
    };
    let left = left.ok_or_else(|| missing("left"))?;
    let right = right.ok_or_else(|| missing("right"))?;
    for &(line, l, r) in &edges {
        if l >= left {
            return Err(Error::IndexOutOfRange {
                line,
                side: "left",
                index: l,
                count: left,
            });
        }
        if r >= right {
            return Err(Error::IndexOutOfRange {
                line,
                side: "right",
                index: r,
                count: right,
            });
        }
    }
    Game::new(left, right, edges.into_iter().map(|(_, l, r)| (l, r)))
}

/// Emits the edge-list text format with edges in lexicographic order.
pub fn serialize_game(g: &Game) -> String {
    let mut out = format!("left {}\nright {}\n", g.left, g.right);
    for &(l, r) in &g.edges {
        out.push_str(&format!("edge {l} {r}\n"));
    }
    out
}

#[derive(Serialize, Deserialize)]
struct GameJson {
    left: usize,
    right: usize,
    edges: Vec<[usize; 2]>,
}

impl From<Game> for GameJson {
    fn from(g: Game) -> Self {
        GameJson {
            left: g.left,
            right: g.right,
            edges: g.edges.iter().map(|&(l, r)| [l, r]).collect(),
        }
    }
}

impl TryFrom<GameJson> for Game {
    type Error = Error;
    fn try_from(j: GameJson) -> Result<Game> {
        Game::new(j.left, j.right, j.edges.into_iter().map(|[l, r]| (l, r)))
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    const CM2_TEXT: &str = "left 2\nright 2\nedge 0 0\nedge 1 1\n";

    #[test]
    fn choice_matching_shape() {
        for m in 1..=9 {
            let g = make_choice_matching(m).unwrap();
            assert!(validate(&g).is_ok());
            assert_eq!(game_size(&g), m);
            assert_eq!(g.edge_count(), m);
            for c in g.choices() {
                assert_eq!(g.degree(c), 1);
            }
        }
        assert!(make_choice_matching(0).is_err());
    }

    #[test]
    fn violations_are_named() {
        let g = Game::new_unchecked(3, 2, [(0, 0), (1, 1)]);
        let report = validate(&g);
        assert_eq!(
            report.violations,
            vec![Violation::SurelyLosing(ChoiceId::left(2))]
        );
        assert_eq!(
            report.violations[0].to_string(),
            "surely losing choice Left#2"
        );

        let empty = Game::new_unchecked(1, 1, []);
        assert!(validate(&empty)
            .violations
            .contains(&Violation::EmptyWinning));
        assert_eq!(
            Violation::EmptyWinning.to_string(),
            "empty winning relation"
        );

        let dup = Game::new_unchecked(1, 1, [(0, 0), (0, 0)]);
        assert_eq!(
            validate(&dup).violations,
            vec![Violation::DuplicatePair(0, 0)]
        );
    }

    #[test]
    fn size_of_rectangular_game() {
        let g = Game::new(2, 3, [(0, 0), (1, 1), (1, 2)]).unwrap();
        assert_eq!(game_size(&g), 3);
    }

    #[test]
    fn text_round_trip() {
        let g = parse_game(CM2_TEXT).unwrap();
        assert_eq!(g, make_choice_matching(2).unwrap());
        assert_eq!(serialize_game(&g), CM2_TEXT);
    }

    #[test]
    fn comments_and_blank_lines() {
        let g = parse_game("# header\n\nleft 1 # one\nright 1\nedge 0 0 # the edge\n").unwrap();
        assert_eq!(g, make_choice_matching(1).unwrap());
    }

    #[test]
    fn out_of_range_edge_reports_line() {
        let err = parse_game("left 1\nright 3\nedge 0 5\n").unwrap_err();
        match err {
            Error::IndexOutOfRange {
                line, index, count, ..
            } => {
                assert_eq!((line, index, count), (3, 5, 3));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_game("left 1\nright x\n"),
            Err(Error::Syntax { line: 2, .. })
        ));
        assert!(matches!(
            parse_game("left 2\nright 1\nedge 0 0\n"),
            Err(Error::InvalidGame(_))
        ));
    }

    #[test]
    fn json_mirror() {
        let g = make_choice_matching(2).unwrap();
        assert_eq!(g.to_json(), r#"{"left":2,"right":2,"edges":[[0,0],[1,1]]}"#);
        assert_eq!(Game::from_json(&g.to_json()).unwrap(), g);
        assert!(Game::from_json(r#"{"left":1,"right":1,"edges":[]}"#).is_err());
    }

    #[test]
    fn choice_ids_parse_and_print() {
        let c: ChoiceId = "R12".parse().unwrap();
        assert_eq!(c, ChoiceId::right(12));
        assert_eq!(c.to_string(), "R12");
        assert!("X1".parse::<ChoiceId>().is_err());
    }

    pub(crate) fn arb_game(max_side: usize) -> impl Strategy<Value = Game> {
        (1..=max_side, 1..=max_side)
            .prop_flat_map(|(l, r)| {
                (
                    Just(l),
                    Just(r),
                    proptest::collection::vec(proptest::bool::ANY, l * r),
                )
            })
            .prop_map(|(l, r, bits)| {
                let mut edges: Vec<(usize, usize)> = (0..l * r)
                    .filter(|&k| bits[k])
                    .map(|k| (k / r, k % r))
                    .collect();
                // Patch isolated choices so the game stays valid.
                for i in 0..l {
                    if !edges.iter().any(|e| e.0 == i) {
                        edges.push((i, i % r));
                    }
                }
                for j in 0..r {
                    if !edges.iter().any(|e| e.1 == j) {
                        edges.push((j % l, j));
                    }
                }
                edges.sort_unstable();
                edges.dedup();
                Game::new(l, r, edges).unwrap()
            })
    }

    proptest! {
        #[test]
        fn parse_inverts_serialize(g in arb_game(6)) {
            prop_assert_eq!(parse_game(&serialize_game(&g)).unwrap(), g.clone());
            prop_assert_eq!(Game::from_json(&g.to_json()).unwrap(), g);
        }

        #[test]
        fn swap_is_an_involution(g in arb_game(6)) {
            prop_assert_eq!(g.swapped().swapped(), g);
        }
    }
}
