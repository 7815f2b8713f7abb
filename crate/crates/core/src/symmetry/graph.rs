//! Vertex-labelled graphs with colour refinement and
//! individualisation-refinement search: isomorphism tests, automorphism
//! enumeration, orbit partitions and canonical forms.
//!
//! Colourings are vectors of `u32`. After [`refine`] they are ranks
//! `0..k`, ordered consistently with the colouring they refined, and the
//! result depends only on the coloured graph up to isomorphism. Every search
//! charges one unit per node to a [`Budget`].

use crate::error::{Error, Result};

pub(crate) struct Graph {
    n: usize,
    words: usize,
    bits: Vec<u64>,
    nbrs: Vec<Vec<u32>>,
    labels: Vec<u64>,
}

impl Graph {
    pub fn new(labels: Vec<u64>) -> Graph {
        let n = labels.len();
        let words = n.div_ceil(64).max(1);
        Graph {
            n,
            words,
            bits: vec![0; n * words],
            nbrs: vec![Vec::new(); n],
            labels,
        }
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        if a == b || self.adjacent(a, b) {
            return;
        }
        self.bits[a * self.words + b / 64] |= 1 << (b % 64);
        self.bits[b * self.words + a / 64] |= 1 << (a % 64);
        self.nbrs[a].push(b as u32);
        self.nbrs[b].push(a as u32);
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.bits[a * self.words + b / 64] >> (b % 64) & 1 == 1
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.nbrs[v].iter().map(|&u| u as usize)
    }

    /// Ranks of the vertex labels.
    pub fn initial_colors(&self) -> Vec<u32> {
        let mut c: Vec<u32> = Vec::with_capacity(self.n);
        let mut sorted = self.labels.clone();
        sorted.sort_unstable();
        sorted.dedup();
        for l in &self.labels {
            c.push(sorted.binary_search(l).unwrap() as u32);
        }
        c
    }
}

pub(crate) struct Budget {
    used: u64,
    limit: u64,
}

impl Budget {
    pub fn new(limit: u64) -> Budget {
        Budget { used: 0, limit }
    }

    fn tick(&mut self) -> Result<()> {
        self.used += 1;
        if self.used > self.limit {
            Err(Error::SearchBudgetExceeded(self.limit))
        } else {
            Ok(())
        }
    }
}

fn normalize(colors: &mut [u32]) -> usize {
    let mut sorted = colors.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for c in colors.iter_mut() {
        *c = sorted.binary_search(c).unwrap() as u32;
    }
    sorted.len()
}

/// Equitable refinement of `colors` (1-dimensional Weisfeiler-Leman).
pub(crate) fn refine(g: &Graph, colors: &mut [u32]) {
    let mut count = normalize(colors);
    let mut sigs: Vec<(Vec<u32>, u32)> = Vec::with_capacity(g.n);
    loop {
        sigs.clear();
        for v in 0..g.n {
            let mut s = Vec::with_capacity(g.nbrs[v].len() + 1);
            s.push(colors[v]);
            let start = s.len();
            s.extend(g.nbrs[v].iter().map(|&u| colors[u as usize]));
            s[start..].sort_unstable();
            sigs.push((s, v as u32));
        }
        sigs.sort_unstable();
        let mut next = 0u32;
        let mut fresh = vec![0u32; g.n];
        for i in 0..sigs.len() {
            if i > 0 && sigs[i].0 != sigs[i - 1].0 {
                next += 1;
            }
            fresh[sigs[i].1 as usize] = next;
        }
        let new_count = next as usize + 1;
        if new_count == count || g.n == 0 {
            return;
        }
        count = new_count;
        colors.copy_from_slice(&fresh);
    }
}

/// Splits `v` off its cell, placing it first.
pub(crate) fn individualize(colors: &[u32], v: usize) -> Vec<u32> {
    let mut out: Vec<u32> = colors.iter().map(|&c| 2 * c + 1).collect();
    out[v] = 2 * colors[v];
    out
}

/// Smallest colour shared by more than one vertex.
fn target_cell(colors: &[u32]) -> Option<u32> {
    let mut counts = vec![0u32; colors.len()];
    for &c in colors {
        counts[c as usize] += 1;
    }
    counts.iter().position(|&k| k > 1).map(|c| c as u32)
}

fn histogram(colors: &[u32]) -> Vec<u32> {
    let mut counts = vec![0u32; colors.len()];
    for &c in colors {
        counts[c as usize] += 1;
    }
    counts
}

fn verify(g1: &Graph, g2: &Graph, perm: &[u32]) -> bool {
    if g1.n != g2.n {
        return false;
    }
    let mut e1 = 0usize;
    let mut e2 = 0usize;
    for v in 0..g1.n {
        if g1.labels[v] != g2.labels[perm[v] as usize] {
            return false;
        }
        e1 += g1.nbrs[v].len();
        e2 += g2.nbrs[v].len();
        for &u in &g1.nbrs[v] {
            if !g2.adjacent(perm[v] as usize, perm[u as usize] as usize) {
                return false;
            }
        }
    }
    e1 == e2
}

fn discrete_map(a: &[u32], b: &[u32]) -> Vec<u32> {
    let mut inv = vec![0u32; b.len()];
    for (w, &c) in b.iter().enumerate() {
        inv[c as usize] = w as u32;
    }
    a.iter().map(|&c| inv[c as usize]).collect()
}

/// An isomorphism from `(g1, c1)` to `(g2, c2)`, as a vertex map.
pub(crate) fn find_isomorphism(
    g1: &Graph,
    c1: &[u32],
    g2: &Graph,
    c2: &[u32],
    budget: &mut Budget,
) -> Result<Option<Vec<u32>>> {
    if g1.n != g2.n {
        return Ok(None);
    }
    iso_rec(g1, c1.to_vec(), g2, c2.to_vec(), budget)
}

fn iso_rec(
    g1: &Graph,
    mut a: Vec<u32>,
    g2: &Graph,
    mut b: Vec<u32>,
    budget: &mut Budget,
) -> Result<Option<Vec<u32>>> {
    budget.tick()?;
    refine(g1, &mut a);
    refine(g2, &mut b);
    if histogram(&a) != histogram(&b) {
        return Ok(None);
    }
    match target_cell(&a) {
        None => {
            let perm = discrete_map(&a, &b);
            Ok(verify(g1, g2, &perm).then_some(perm))
        }
        Some(t) => {
            let x = a.iter().position(|&c| c == t).unwrap();
            for y in (0..g2.n).filter(|&y| b[y] == t) {
                if let Some(p) =
                    iso_rec(g1, individualize(&a, x), g2, individualize(&b, y), budget)?
                {
                    return Ok(Some(p));
                }
            }
            Ok(None)
        }
    }
}

/// Every automorphism of `(g, colors)`, or `None` when there are more than `cap`.
pub(crate) fn all_automorphisms(
    g: &Graph,
    colors: &[u32],
    budget: &mut Budget,
    cap: usize,
) -> Result<Option<Vec<Vec<u32>>>> {
    let mut c = colors.to_vec();
    refine(g, &mut c);
    let mut out = Vec::new();
    if !auto_rec(g, c.clone(), c, budget, cap, &mut out)? {
        return Ok(None);
    }
    out.sort();
    Ok(Some(out))
}

fn auto_rec(
    g: &Graph,
    mut a: Vec<u32>,
    mut b: Vec<u32>,
    budget: &mut Budget,
    cap: usize,
    out: &mut Vec<Vec<u32>>,
) -> Result<bool> {
    budget.tick()?;
    refine(g, &mut a);
    refine(g, &mut b);
    if histogram(&a) != histogram(&b) {
        return Ok(true);
    }
    match target_cell(&a) {
        None => {
            let perm = discrete_map(&a, &b);
            if verify(g, g, &perm) {
                out.push(perm);
                if out.len() > cap {
                    return Ok(false);
                }
            }
            Ok(true)
        }
        Some(t) => {
            let x = a.iter().position(|&c| c == t).unwrap();
            for y in (0..g.n).filter(|&y| b[y] == t) {
                if !auto_rec(
                    g,
                    individualize(&a, x),
                    individualize(&b, y),
                    budget,
                    cap,
                    out,
                )? {
                    return Ok(false);
                }
            }
            Ok(true)
        }
    }
}

pub(crate) struct UnionFind(Vec<usize>);

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }
    pub fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }
    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi] = lo;
        }
    }
}

/// Orbit representatives of `cell` under the automorphisms of `(g, colors)`.
/// Automorphisms found along the way are folded into `uf`.
fn orbit_reps(
    g: &Graph,
    colors: &[u32],
    cell: &[usize],
    uf: &mut UnionFind,
    budget: &mut Budget,
) -> Result<Vec<usize>> {
    let mut reps: Vec<usize> = Vec::new();
    for &v in cell {
        let rv = uf.find(v);
        if reps.iter().any(|&r| uf.find(r) == rv) {
            continue;
        }
        let cv = individualize(colors, v);
        let mut merged = false;
        for &r in &reps {
            if let Some(p) = find_isomorphism(g, &individualize(colors, r), g, &cv, budget)? {
                for (x, &y) in p.iter().enumerate() {
                    uf.union(x, y as usize);
                }
                merged = true;
                break;
            }
        }
        if !merged {
            reps.push(v);
        }
    }
    Ok(reps)
}

/// Orbit of every vertex under the automorphisms of `(g, colors)`, named by
/// its smallest member.
pub(crate) fn orbit_partition(
    g: &Graph,
    colors: &[u32],
    budget: &mut Budget,
) -> Result<Vec<usize>> {
    let mut c = colors.to_vec();
    refine(g, &mut c);
    let mut uf = UnionFind::new(g.n);
    let mut cells: Vec<Vec<usize>> = vec![Vec::new(); g.n];
    for v in 0..g.n {
        cells[c[v] as usize].push(v);
    }
    for cell in cells.iter().filter(|cell| cell.len() > 1) {
        orbit_reps(g, &c, cell, &mut uf, budget)?;
    }
    Ok((0..g.n).map(|v| uf.find(v)).collect())
}

/// Result of a canonical labelling.
pub(crate) struct Canonical {
    /// Labels in canonical order followed by the packed upper triangle of
    /// the relabelled adjacency matrix.
    pub cert: Vec<u64>,
    /// Canonical position of every vertex of the labelled graph.
    pub position: Vec<u32>,
    pub n: usize,
}

impl Canonical {
    /// Compact byte encoding of the primary certificate.
    pub fn key_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        push_varint(&mut out, self.n as u64);
        for &l in &self.cert[..self.n] {
            push_varint(&mut out, l);
        }
        let nbits = self.n * self.n.saturating_sub(1) / 2;
        let words = &self.cert[self.n..];
        for byte in 0..nbits.div_ceil(8) {
            out.push((words[byte / 8] >> ((byte % 8) * 8)) as u8);
        }
        out
    }
}

fn push_varint(out: &mut Vec<u8>, mut x: u64) {
    loop {
        let b = (x & 0x7f) as u8;
        x >>= 7;
        if x == 0 {
            out.push(b);
            return;
        }
        out.push(b | 0x80);
    }
}

fn certificate(g: &Graph, colors: &[u32]) -> Vec<u64> {
    let mut order = vec![0usize; g.n];
    for (v, &c) in colors.iter().enumerate() {
        order[c as usize] = v;
    }
    let mut cert: Vec<u64> = order.iter().map(|&v| g.labels[v]).collect();
    let nbits = g.n * g.n.saturating_sub(1) / 2;
    let base = cert.len();
    cert.resize(base + nbits.div_ceil(64), 0);
    let mut bit = 0usize;
    for i in 0..g.n {
        for j in i + 1..g.n {
            if g.adjacent(order[i], order[j]) {
                cert[base + bit / 64] |= 1 << (bit % 64);
            }
            bit += 1;
        }
    }
    cert
}

/// Describes the extra vertices of `prune` (indices past the labelled graph)
/// through their labels and neighbours' canonical positions.
fn secondary_certificate(prune: &Graph, n: usize, colors: &[u32]) -> Vec<u64> {
    let mut entries: Vec<Vec<u64>> = (n..prune.n)
        .map(|e| {
            let mut nb: Vec<u64> = prune
                .neighbors(e)
                .filter(|&u| u < n)
                .map(|u| colors[u] as u64)
                .collect();
            nb.sort_unstable();
            let mut entry = vec![prune.labels[e], nb.len() as u64];
            entry.extend(nb);
            entry
        })
        .collect();
    entries.sort();
    entries.concat()
}

/// Canonical labelling of `g`: the lexicographically least certificate over
/// the leaves of the search tree.
///
/// When `prune` is given it must extend `g` with extra vertices appended
/// after `g`'s own. Among the labellings achieving the least certificate of
/// `g`, the one minimising the description of those extra vertices is
/// returned, so the choice is invariant under automorphisms of `prune`.
pub(crate) fn canonical_form(
    g: &Graph,
    prune: Option<&Graph>,
    budget: &mut Budget,
) -> Result<Canonical> {
    let extra_rank = prune.map(|p| {
        let ranks = p.initial_colors();
        ranks[g.n..].to_vec()
    });
    let mut best: Option<(Vec<u64>, Vec<u64>, Vec<u32>)> = None;
    let colors = g.initial_colors();
    canon_rec(g, prune, extra_rank.as_deref(), colors, budget, &mut best)?;
    let (cert, _, position) = best.expect("search tree has at least one leaf");
    Ok(Canonical {
        cert,
        position,
        n: g.n,
    })
}

type Best = Option<(Vec<u64>, Vec<u64>, Vec<u32>)>;

fn canon_rec(
    g: &Graph,
    prune: Option<&Graph>,
    extra_rank: Option<&[u32]>,
    mut colors: Vec<u32>,
    budget: &mut Budget,
    best: &mut Best,
) -> Result<()> {
    budget.tick()?;
    refine(g, &mut colors);
    let Some(t) = target_cell(&colors) else {
        let cert = certificate(g, &colors);
        let secondary = prune
            .map(|p| secondary_certificate(p, g.n, &colors))
            .unwrap_or_default();
        let better = match best {
            None => true,
            Some((bc, bs, _)) => (&cert, &secondary) < (&*bc, &*bs),
        };
        if better {
            *best = Some((cert, secondary, colors));
        }
        return Ok(());
    };
    let cell: Vec<usize> = (0..g.n).filter(|&v| colors[v] == t).collect();
    let reps = match (prune, extra_rank) {
        (Some(p), Some(extra)) => {
            let mut ext = colors.clone();
            ext.extend(extra.iter().map(|&r| (1 << 30) + r));
            let mut uf = UnionFind::new(p.n);
            orbit_reps(p, &ext, &cell, &mut uf, budget)?
        }
        _ => {
            let mut uf = UnionFind::new(g.n);
            orbit_reps(g, &colors, &cell, &mut uf, budget)?
        }
    };
    for v in reps {
        canon_rec(
            g,
            prune,
            extra_rank,
            individualize(&colors, v),
            budget,
            best,
        )?;
    }
    Ok(())
}
