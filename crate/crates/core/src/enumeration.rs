//! Exhaustive enumeration of small games and the optimal-ECT census.
//!
//! Games are generated as multisets of rows (one nonempty column set per
//! choice of the smaller player), then deduplicated by canonical key, so
//! renamings and the player swap are factored out.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use num_rational::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{exact_ect, oscp, AnalysisConfig, Ect, Extended, Gct};
use crate::error::{Error, Result};
use crate::game::{serialize_game, ChoiceId, Game, Side};
use crate::optimizer::{optimal_ect_on, optimal_gct_on, OptimizerConfig, QuotientSpace};
use crate::protocols::{Uniform, WaitOrMove};
use crate::symmetry::{canonical_game_key, focal_points_of, initial_partition, SymmetryConfig};

/// Which enumerated games to keep.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Filter {
    All,
    /// No choice is adjacent to every choice of a size-`m` opponent.
    /// Such a choice wins in one round.
    Nontrivial,
    /// Every choice has at most this degree.
    MaxDegree(usize),
}

impl Filter {
    pub fn keeps(&self, g: &Game, m: usize) -> bool {
        match self {
            Filter::All => true,
            Filter::Nontrivial => g.choices().all(|c| g.degree(c) < m),
            Filter::MaxDegree(d) => g.choices().all(|c| g.degree(c) <= *d),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Filter::All => "all".into(),
            Filter::Nontrivial => "no choice of full degree".into(),
            Filter::MaxDegree(d) => format!("all degrees at most {d}"),
        }
    }
}

fn rows_to_game(n: usize, m: usize, rows: &[u32]) -> Game {
    let edges = rows.iter().enumerate().flat_map(|(l, &mask)| {
        (0..m)
            .filter(move |r| mask >> r & 1 == 1)
            .map(move |r| (l, r))
    });
    Game::new(n, m, edges).expect("rows are nonempty and cover every column")
}

fn multisets(n: usize, m: usize, max_edges: usize, out: &mut Vec<Vec<u32>>) {
    fn go(
        n: usize,
        full: u32,
        max_edges: usize,
        from: u32,
        acc: &mut Vec<u32>,
        edges: usize,
        out: &mut Vec<Vec<u32>>,
    ) {
        if acc.len() == n {
            if acc.iter().fold(0, |a, &b| a | b) == full {
                out.push(acc.clone());
            }
            return;
        }
        for mask in from..=full {
            let e = edges + mask.count_ones() as usize;
            if e > max_edges {
                continue;
            }
            acc.push(mask);
            go(n, full, max_edges, mask, acc, e, out);
            acc.pop();
        }
    }
    go(n, (1u32 << m) - 1, max_edges, 1, &mut Vec::new(), 0, out);
}

/// All valid games whose larger side has exactly `m` choices, one per
/// renaming class (swap included), ordered by smaller side, then number of
/// winning pairs, then key.
pub fn enumerate_games(
    m: usize,
    max_edges: Option<usize>,
    cfg: &SymmetryConfig,
) -> Result<Vec<Game>> {
    if m == 0 || m > 6 {
        return Err(Error::InvalidArgument(format!(
            "enumeration supports 1 <= m <= 6, got {m}"
        )));
    }
    let cap = max_edges.unwrap_or(m * m);
    let mut candidates = Vec::new();
    for n in 1..=m {
        let mut rows = Vec::new();
        multisets(n, m, cap, &mut rows);
        candidates.extend(rows.into_iter().map(|r| (n, r)));
    }
    let mut keyed: Vec<(usize, usize, Vec<u8>, Game)> = candidates
        .par_iter()
        .map(|(n, rows)| {
            let g = rows_to_game(*n, m, rows);
            let key = canonical_game_key(&g, cfg)?;
            Ok((*n, g.edge_count(), key.as_bytes().to_vec(), g))
        })
        .collect::<Result<_>>()?;
    keyed.par_sort_by(|a, b| (a.0, a.1, &a.2).cmp(&(b.0, b.1, &b.2)));
    keyed.dedup_by(|a, b| a.2 == b.2);
    Ok(keyed.into_iter().map(|x| x.3).collect())
}

/// How a census entry's optimal value was obtained.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    /// A class of full-degree choices wins against anything.
    FullDegree,
    /// Some class support wins in the first round.
    OneRound,
    /// Wait-or-move's exact value is below the bound; only the bound is kept.
    WmBound,
    Optimizer,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CensusEntry {
    pub key: String,
    pub game: Game,
    /// Optimal ECT, absent when only an upper bound was established.
    pub optimal_ect: Option<f64>,
    pub optimal_gct: Option<String>,
    /// Exact ECT of wait-or-move, as "num/den".
    pub wm_ect: String,
    pub has_focal_point: bool,
    pub method: Method,
}

impl CensusEntry {
    /// Optimal ECT, or its certified upper bound.
    pub fn ect_or_bound(&self) -> f64 {
        self.optimal_ect.unwrap_or_else(|| {
            crate::analysis::parse_rational(&self.wm_ect)
                .map(|q| Extended::Finite(q).to_f64())
                .unwrap_or(f64::NAN)
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GameCensus {
    pub m: usize,
    pub filter: String,
    pub entries: Vec<CensusEntry>,
}

#[derive(Clone, Debug)]
pub struct CensusConfig {
    pub filter: Filter,
    pub max_edges: Option<usize>,
    /// Skip the optimizer for games with more winning pairs than this, once
    /// wait-or-move is certified below `wm_bound`.
    pub prune_edges: Option<(usize, BigRational)>,
    pub compute_gct: bool,
    pub checkpoint: Option<PathBuf>,
    pub time_budget: Option<Duration>,
    pub optimizer: OptimizerConfig,
}

impl Default for CensusConfig {
    fn default() -> Self {
        CensusConfig {
            filter: Filter::Nontrivial,
            max_edges: None,
            prune_edges: None,
            compute_gct: true,
            checkpoint: None,
            time_budget: None,
            optimizer: OptimizerConfig::default(),
        }
    }
}

impl CensusConfig {
    /// The pruning used for 5-choice games: more than 8 winning pairs means
    /// wait-or-move stays within 2 + 7/25.
    pub fn five_choice_reductions() -> Self {
        CensusConfig {
            prune_edges: Some((8, BigRational::new(57.into(), 25.into()))),
            ..CensusConfig::default()
        }
    }
}

fn full_degree(g: &Game) -> bool {
    g.choices().any(|c| g.degree(c) == g.count(c.side.other()))
}

fn census_entry(g: &Game, cfg: &CensusConfig) -> Result<CensusEntry> {
    let sym = &cfg.optimizer.symmetry;
    let key = canonical_game_key(g, sym)?.to_string();
    let an = AnalysisConfig {
        symmetry: *sym,
        ..AnalysisConfig::default()
    };
    let wm = exact_ect(g, &WaitOrMove::new(), &an)?;
    let wm_str = match &wm {
        Extended::Finite(q) => crate::analysis::rational_string(q),
        Extended::Infinite => "inf".into(),
    };
    let has_focal_point = !focal_points_of(g, &initial_partition(g, sym)?).is_empty();
    let entry = |optimal_ect: Option<f64>, optimal_gct: Option<String>, method| CensusEntry {
        key: key.clone(),
        game: g.clone(),
        optimal_ect,
        optimal_gct,
        wm_ect: wm_str.clone(),
        has_focal_point,
        method,
    };
    if full_degree(g) {
        return Ok(entry(Some(1.0), Some("1".into()), Method::FullDegree));
    }
    if let Some((edges, bound)) = &cfg.prune_edges {
        if g.edge_count() > *edges {
            return match &wm {
                Extended::Finite(q) if q <= bound => Ok(entry(None, None, Method::WmBound)),
                _ => Err(Error::InvalidArgument(format!(
                    "wait-or-move exceeds the pruning bound on {key}: {wm_str}"
                ))),
            };
        }
    }
    let space = QuotientSpace::explore(g, &cfg.optimizer)?;
    if space.states[0].coordinating() {
        return Ok(entry(Some(1.0), Some("1".into()), Method::OneRound));
    }
    let gct = cfg
        .compute_gct
        .then(|| optimal_gct_on(space.clone()).value.to_string());
    let opt = optimal_ect_on(space, &cfg.optimizer)?;
    Ok(entry(Some(opt.value), gct, Method::Optimizer))
}

fn checkpoint_path(dir: &Path, m: usize, key: &str) -> PathBuf {
    dir.join(format!("m{m}")).join(format!("{key}.json"))
}

/// Runs the census over all `m`-choice games kept by the filter.
/// With a checkpoint directory, finished entries are stored one JSON file per
/// canonical key and reused on the next run.
pub fn run_census(m: usize, cfg: &CensusConfig) -> Result<GameCensus> {
    let start = Instant::now();
    let games: Vec<Game> = enumerate_games(m, cfg.max_edges, &cfg.optimizer.symmetry)?
        .into_iter()
        .filter(|g| cfg.filter.keeps(g, m))
        .collect();
    if let Some(dir) = &cfg.checkpoint {
        fs::create_dir_all(dir.join(format!("m{m}")))?;
    }
    let entries: Vec<CensusEntry> = games
        .par_iter()
        .map(|g| {
            if let Some(b) = cfg.time_budget {
                if start.elapsed() > b {
                    return Err(Error::TimeBudgetExceeded(b.as_secs()));
                }
            }
            if let Some(dir) = &cfg.checkpoint {
                let key = canonical_game_key(g, &cfg.optimizer.symmetry)?.to_string();
                let path = checkpoint_path(dir, m, &key);
                if let Ok(text) = fs::read_to_string(&path) {
                    if let Ok(e) = serde_json::from_str::<CensusEntry>(&text) {
                        return Ok(e);
                    }
                }
                let e = census_entry(g, cfg)?;
                fs::write(&path, serde_json::to_string_pretty(&e)?)?;
                return Ok(e);
            }
            census_entry(g, cfg)
        })
        .collect::<Result<_>>()?;
    Ok(GameCensus {
        m,
        filter: cfg.filter.describe(),
        entries,
    })
}

impl GameCensus {
    /// Greatest optimal ECT and the keys attaining it within `tol`.
    /// Entries with only an upper bound count through that bound.
    pub fn greatest(&self, tol: f64) -> (f64, Vec<&CensusEntry>) {
        let best = self
            .entries
            .iter()
            .map(|e| e.ect_or_bound())
            .fold(f64::NEG_INFINITY, f64::max);
        (
            best,
            self.entries
                .iter()
                .filter(|e| e.ect_or_bound() >= best - tol)
                .collect(),
        )
    }

    /// The CSV census, sorted by key.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "key",
            "left",
            "right",
            "edges",
            "optimal_ect",
            "optimal_gct",
            "wm_ect",
            "focal_point",
            "method",
        ])?;
        let mut rows: Vec<&CensusEntry> = self.entries.iter().collect();
        rows.sort_by(|a, b| a.key.cmp(&b.key));
        for e in rows {
            w.write_record([
                e.key.clone(),
                e.game.left_count().to_string(),
                e.game.right_count().to_string(),
                e.game.edge_count().to_string(),
                e.optimal_ect.map_or(String::new(), |v| format!("{v:.12}")),
                e.optimal_gct.clone().unwrap_or_default(),
                e.wm_ect.clone(),
                e.has_focal_point.to_string(),
                format!("{:?}", e.method),
            ])?;
        }
        String::from_utf8(
            w.into_inner()
                .map_err(|e| Error::InvalidArgument(e.to_string()))?,
        )
        .map_err(|e| Error::InvalidArgument(e.to_string()))
    }

    /// Writes `census.csv` and one edge-list file per game under `games/`.
    pub fn write_report(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir.join("games"))?;
        fs::write(dir.join("census.csv"), self.to_csv()?)?;
        for e in &self.entries {
            fs::write(
                dir.join("games").join(format!("{}.txt", e.key)),
                serialize_game(&e.game),
            )?;
        }
        Ok(())
    }
}

/// Greatest optimal ECT over a census, with its witnesses.
#[derive(Clone, Debug)]
pub struct Greatest {
    pub value: f64,
    pub witnesses: Vec<String>,
    pub census: GameCensus,
}

/// Runs the census for `m` and reports its maximum.
pub fn greatest_optimal_ect(m: usize, cfg: &CensusConfig, tol: f64) -> Result<Greatest> {
    let census = run_census(m, cfg)?;
    let (value, w) = census.greatest(tol);
    let witnesses = w.into_iter().map(|e| e.key.clone()).collect();
    Ok(Greatest {
        value,
        witnesses,
        census,
    })
}

/// Wait-or-move safety: every listed game other than `CM_m` has a
/// wait-or-move ECT strictly below `3 - 2/m`. Returns the offending games.
pub fn wm_safety_violations<'a>(
    m: usize,
    games: impl IntoIterator<Item = &'a Game>,
    cfg: &AnalysisConfig,
) -> Result<Vec<(Game, Ect)>> {
    let cm = canonical_game_key(&crate::catalog::choice_matching(m), &cfg.symmetry)?;
    let limit = Extended::Finite(
        BigRational::from_integer(3.into()) - BigRational::new(2.into(), (m as i64).into()),
    );
    let games: Vec<&Game> = games.into_iter().collect();
    let checked: Vec<Option<(Game, Ect)>> = games
        .par_iter()
        .map(|g| {
            if crate::game::game_size(g) != m || canonical_game_key(g, &cfg.symmetry)? == cm {
                return Ok(None);
            }
            let e = exact_ect(g, &WaitOrMove::new(), cfg)?;
            Ok((e >= limit).then(|| ((*g).clone(), e)))
        })
        .collect::<Result<_>>()?;
    Ok(checked.into_iter().flatten().collect())
}

/// The analytic shortcut for `m` with wait-or-move safety: the greatest
/// optimal ECT is that of `CM_m`, provided no listed game violates safety.
pub fn greatest_by_wm_safety<'a>(
    m: usize,
    games: impl IntoIterator<Item = &'a Game>,
    cfg: &OptimizerConfig,
) -> Result<Option<f64>> {
    let an = AnalysisConfig {
        symmetry: cfg.symmetry,
        ..AnalysisConfig::default()
    };
    if !wm_safety_violations(m, games, &an)?.is_empty() {
        return Ok(None);
    }
    Ok(Some(
        crate::optimizer::optimal_ect(&crate::catalog::choice_matching(m), cfg)?.value,
    ))
}

/// Reads a census CSV back as (key, optimal_ect) rows.
pub fn read_census_csv(text: &str) -> Result<Vec<(String, Option<f64>)>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        out.push((rec[0].to_string(), rec[4].parse().ok()))
    }
    Ok(out)
}

/// Checks the universal wait-or-move bound `ECT ≤ 3 − 2·oscp(uniform)` in
/// exact arithmetic, returning both sides.
pub fn wm_bound_holds(g: &Game, cfg: &AnalysisConfig) -> Result<(bool, Ect, BigRational)> {
    let p = oscp(g, &Uniform)?;
    let bound = BigRational::from_integer(3.into()) - BigRational::from_integer(2.into()) * p;
    let e = exact_ect(g, &WaitOrMove::new(), cfg)?;
    let ok = matches!(&e, Extended::Finite(x) if *x <= bound);
    Ok((ok, e, bound))
}

/// A reproducible random valid game with `left` and `right` choices.
pub fn random_game(left: usize, right: usize, density: f64, seed: u64) -> Game {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut edges = HashSet::new();
        for l in 0..left {
            for r in 0..right {
                if rng.gen::<f64>() < density {
                    edges.insert((l, r));
                }
            }
        }
        // Give every uncovered choice one random partner.
        for l in 0..left {
            if !edges.iter().any(|e| e.0 == l) {
                edges.insert((l, rng.gen_range(0..right)));
            }
        }
        for r in 0..right {
            if !edges.iter().any(|e| e.1 == r) {
                edges.insert((rng.gen_range(0..left), r));
            }
        }
        if let Ok(g) = Game::new(left, right, edges) {
            return g;
        }
    }
}

/// A reproducible random valid game whose larger side has exactly `size`
/// choices. The smaller side, orientation and density are drawn from `seed`.
pub fn random_sized_game(size: usize, seed: u64) -> Game {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_0000);
    let other = rng.gen_range(1..=size);
    let density = rng.gen_range(0.1..0.6);
    let g = random_game(other, size, density, seed);
    if rng.gen_bool(0.5) {
        g.swapped()
    } else {
        g
    }
}

/// Degrees of both sides, sorted, as a quick structural fingerprint.
pub fn degree_profile(g: &Game) -> [Vec<usize>; 2] {
    Side::both().map(|s| {
        let mut d: Vec<usize> = (0..g.count(s))
            .map(|i| g.degree(ChoiceId::new(s, i)))
            .collect();
        d.sort_unstable();
        d
    })
}

/// Optimal GCT parsed back from a census entry.
pub fn entry_gct(e: &CensusEntry) -> Option<Gct> {
    e.optimal_gct.as_deref().map(|s| {
        if s == "inf" {
            Extended::Infinite
        } else {
            Extended::Finite(s.parse().unwrap_or(0))
        }
    })
}
