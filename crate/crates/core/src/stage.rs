//! Stages of repeated play.
//!
//! A stage is a game together with the ordered list of choice pairs played
//! so far. Play stops at the first winning pair, so only the last pair of a
//! history may be winning; such a stage is final.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::game::Game;

/// A played round: `(left index, right index)`.
pub type Pair = (usize, usize);

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Stage {
    game: Arc<Game>,
    history: Vec<Pair>,
}

/// The stage before any round has been played.
pub fn initial_stage(g: &Game) -> Stage {
    Stage::initial(Arc::new(g.clone()))
}

impl Stage {
    pub fn initial(game: Arc<Game>) -> Stage {
        Stage {
            game,
            history: Vec::new(),
        }
    }

    /// Builds a stage from a recorded history, checking every round.
    pub fn from_history(game: Arc<Game>, history: &[Pair]) -> Result<Stage> {
        let mut s = Stage::initial(game);
        for &p in history {
            s = s.advance(p)?.0;
        }
        Ok(s)
    }

    pub fn game(&self) -> &Game {
        &self.game
    }

    pub fn game_arc(&self) -> &Arc<Game> {
        &self.game
    }

    pub fn history(&self) -> &[Pair] {
        &self.history
    }

    /// Number of rounds played so far.
    pub fn round(&self) -> usize {
        self.history.len()
    }

    /// True once the players have coordinated.
    pub fn is_final(&self) -> bool {
        self.history
            .last()
            .is_some_and(|&(l, r)| self.game.is_winning(l, r))
    }

    /// Plays one more round and reports whether it coordinated.
    pub fn advance(&self, pair: Pair) -> Result<(Stage, bool)> {
        if self.is_final() {
            return Err(Error::AdvancePastFinal);
        }
        let (l, r) = pair;
        if l >= self.game.left_count() || r >= self.game.right_count() {
            return Err(Error::InvalidChoice(format!("(L{l}, R{r})")));
        }
        let mut history = self.history.clone();
        history.push(pair);
        let won = self.game.is_winning(l, r);
        Ok((
            Stage {
                game: self.game.clone(),
                history,
            },
            won,
        ))
    }

    /// Winning pairs that contain a choice played in some round.
    pub fn touched_edges(&self) -> BTreeSet<Pair> {
        let played_left: BTreeSet<usize> = self.history.iter().map(|p| p.0).collect();
        let played_right: BTreeSet<usize> = self.history.iter().map(|p| p.1).collect();
        self.game
            .edges()
            .iter()
            .copied()
            .filter(|(l, r)| played_left.contains(l) || played_right.contains(r))
            .collect()
    }

    /// Log lines of the form `round <k>: L<i> R<j> WIN|MISS`.
    pub fn trace(&self) -> String {
        let mut out = String::new();
        for (k, &(l, r)) in self.history.iter().enumerate() {
            let tag = if self.game.is_winning(l, r) {
                "WIN"
            } else {
                "MISS"
            };
            let _ = writeln!(out, "round {}: L{l} R{r} {tag}", k + 1);
        }
        out
    }
}

/// Reads a trace back into a history, checking round numbers and tags.
pub fn parse_trace(game: &Arc<Game>, text: &str) -> Result<Stage> {
    let mut stage = Stage::initial(game.clone());
    for (n, line) in text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
    {
        let syntax = |message: &str| Error::Syntax {
            line: n + 1,
            message: message.to_string(),
        };
        let (head, rest) = line.split_once(':').ok_or_else(|| syntax("missing `:`"))?;
        let k: usize = head
            .trim()
            .strip_prefix("round ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| syntax("expected `round <k>`"))?;
        if k != stage.round() + 1 {
            return Err(syntax("round numbers must count up from 1"));
        }
        let tokens: Vec<&str> = rest.split_whitespace().collect();
        let [l, r, tag] = tokens.as_slice() else {
            return Err(syntax("expected `L<i> R<j> WIN|MISS`"));
        };
        let l = l
            .strip_prefix('L')
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| syntax("bad left choice"))?;
        let r = r
            .strip_prefix('R')
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| syntax("bad right choice"))?;
        let (next, won) = stage.advance((l, r))?;
        if won != (*tag == "WIN") || !matches!(*tag, "WIN" | "MISS") {
            return Err(syntax("outcome tag disagrees with the game"));
        }
        stage = next;
    }
    Ok(stage)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::make_choice_matching;

    fn cm(m: usize) -> Arc<Game> {
        Arc::new(make_choice_matching(m).unwrap())
    }

    #[test]
    fn advance_detects_coordination() {
        let s = Stage::initial(cm(2));
        assert_eq!(s.round(), 0);
        assert!(s.touched_edges().is_empty());
        let (miss, won) = s.advance((0, 1)).unwrap();
        assert!(!won);
        assert_eq!(miss.round(), 1);
        let (fin, won) = s.advance((0, 0)).unwrap();
        assert!(won && fin.is_final());
        assert!(matches!(fin.advance((1, 1)), Err(Error::AdvancePastFinal)));
        assert!(matches!(s.advance((2, 0)), Err(Error::InvalidChoice(_))));
    }

    #[test]
    fn touched_edges_follow_example_play() {
        // a=0, b=1, c=2 in CM_5.
        let s1 = Stage::initial(cm(5)).advance((0, 1)).unwrap().0;
        assert_eq!(s1.touched_edges(), BTreeSet::from([(0, 0), (1, 1)]));
        let (s2, won) = s1.advance((1, 2)).unwrap();
        assert!(!won && !s2.is_final());
        assert_eq!(s2.touched_edges(), BTreeSet::from([(0, 0), (1, 1), (2, 2)]));
    }

    #[test]
    fn trace_round_trip() {
        let g = cm(3);
        let s = Stage::from_history(g.clone(), &[(0, 1), (2, 2)]).unwrap();
        assert_eq!(s.trace(), "round 1: L0 R1 MISS\nround 2: L2 R2 WIN\n");
        assert_eq!(parse_trace(&g, &s.trace()).unwrap(), s);
        assert!(parse_trace(&g, "round 1: L0 R0 MISS\n").is_err());
    }

    #[test]
    fn touched_edges_grow_monotonically() {
        let g = cm(4);
        let mut s = Stage::initial(g);
        let mut last = 0;
        for p in [(0, 1), (1, 2), (3, 0), (2, 1)] {
            s = s.advance(p).unwrap().0;
            let t = s.touched_edges().len();
            assert!(t >= last);
            last = t;
        }
    }
}
