//! Cayley sum graphs and their exact independence number.
//!
//! Vertices are residues mod n; distinct `x`, `y` are adjacent iff
//! `x + y mod n` lies in the connection set `S`. The neighbourhood of `x` is
//! the mask of `S` rotated by `x`, so rows are read straight out of a doubled
//! copy of `S` and the adjacency matrix is never stored.
//!
//! The solver is a colour-ordered branch and bound (maximum clique in the
//! complement). Candidate sets are bit vectors; each node covers the
//! candidates greedily by cliques of the graph, and any independent set
//! meets a clique at most once, so the number of cliques bounds what the
//! node can still add. Once a candidate set is small enough the subtree is
//! solved on a re-indexed dense copy of the induced subgraph.

use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{refuse, Result};
use crate::zn::{extract_word, restricted_sumset, words_for, BitIter, ZnSet};

/// Candidate sets at or below this size are solved on a local dense subgraph.
const LOCAL_MAX: usize = 640;
/// How many nodes between deadline checks.
const CLOCK_STRIDE: u64 = 1 << 12;
const GREEDY_RESTARTS: usize = 16;

/// `A` is independent in the Cayley sum graph of `S` iff `A +^ A` misses `S`.
pub fn is_independent(a: &ZnSet, s: &ZnSet) -> Result<bool> {
    a.check_same(s)?;
    restricted_sumset(a).is_disjoint(s)
}

#[derive(Debug, Clone)]
pub struct CayleyGraph {
    s: ZnSet,
    doubled: Vec<u64>,
}

impl CayleyGraph {
    pub fn new(s: ZnSet) -> Self {
        let doubled = s.doubled();
        CayleyGraph { s, doubled }
    }

    pub fn modulus(&self) -> usize {
        self.s.modulus()
    }

    pub fn connection_set(&self) -> &ZnSet {
        &self.s
    }

    #[inline]
    pub fn adjacent(&self, x: usize, y: usize) -> bool {
        let n = self.s.modulus();
        x != y && x < n && y < n && self.s.contains((x + y) % n)
    }

    /// Neighbourhood of `x` as a set.
    pub fn neighbors(&self, x: usize) -> ZnSet {
        let n = self.modulus();
        let nw = words_for(n);
        let words: Vec<u64> = (0..nw).map(|w| extract_word(&self.doubled, x + 64 * w)).collect();
        ZnSet::from_words(n, words).without(x)
    }

    pub fn degree(&self, x: usize) -> usize {
        self.neighbors(x).len()
    }

    #[inline(always)]
    fn row_word(&self, x: usize, w: usize) -> u64 {
        // bit y of row x is S[x + y]; bit x itself is a self loop and is
        // masked by callers
        extract_word(&self.doubled, x + 64 * w)
    }
}

/// Outcome of [`independence_number`].
#[derive(Debug, Clone)]
pub struct MisResult {
    pub alpha: usize,
    pub witness: ZnSet,
    pub node_count: u64,
    pub elapsed: Duration,
    /// `false` when the time budget ran out; `alpha` is then a lower bound.
    pub exact: bool,
}

/// Adjacency access used by the branch and bound.
trait Rows {
    fn words(&self) -> usize;
    /// `out = p \ N[v]`
    fn non_neighbors_in(&self, v: usize, p: &[u64], out: &mut [u64]);
    /// `q = q ∩ N(v)`
    fn keep_neighbors(&self, v: usize, q: &mut [u64]);
    /// Members of `class` not adjacent to `v`: the count, saturating at 2,
    /// and the first one found.
    fn conflicts(&self, v: usize, class: &[u64]) -> (u32, usize);
    /// Residue of local vertex `v`.
    fn residue(&self, v: usize) -> usize;
}

struct GlobalRows<'g> {
    g: &'g CayleyGraph,
    nw: usize,
}

impl Rows for GlobalRows<'_> {
    fn words(&self) -> usize {
        self.nw
    }

    #[inline]
    fn non_neighbors_in(&self, v: usize, p: &[u64], out: &mut [u64]) {
        for w in 0..self.nw {
            out[w] = if p[w] == 0 { 0 } else { p[w] & !self.g.row_word(v, w) };
        }
        out[v >> 6] &= !(1u64 << (v & 63));
    }

    #[inline]
    fn keep_neighbors(&self, v: usize, q: &mut [u64]) {
        for (w, qw) in q.iter_mut().enumerate() {
            if *qw != 0 {
                *qw &= self.g.row_word(v, w);
            }
        }
        q[v >> 6] &= !(1u64 << (v & 63));
    }

    fn conflicts(&self, v: usize, class: &[u64]) -> (u32, usize) {
        let mut count = 0;
        let mut first = 0;
        for (w, cw) in class.iter().enumerate() {
            if *cw == 0 {
                continue;
            }
            let mut bad = cw & !self.g.row_word(v, w);
            if w == v >> 6 {
                bad &= !(1u64 << (v & 63));
            }
            if bad != 0 {
                if count == 0 {
                    first = w * 64 + bad.trailing_zeros() as usize;
                }
                count += bad.count_ones().min(2);
                if count >= 2 {
                    return (2, first);
                }
            }
        }
        (count, first)
    }

    fn residue(&self, v: usize) -> usize {
        v
    }
}

/// Dense induced subgraph on `verts`, re-indexed to `0..verts.len()`.
///
/// Local indices are assigned in increasing order of degree inside the
/// subgraph (ties by residue), so the greedy cover meets vertices with many
/// non-neighbours first.
struct LocalRows {
    verts: Vec<usize>,
    lw: usize,
    adj: Vec<u64>,
}

impl LocalRows {
    fn build(g: &CayleyGraph, p: &[u64]) -> Self {
        let raw: Vec<usize> = BitIter::new(p).collect();
        let m = raw.len();
        let n = g.modulus();
        let mut degree = vec![0u32; m];
        for i in 0..m {
            for j in (i + 1)..m {
                let mut sum = raw[i] + raw[j];
                if sum >= n {
                    sum -= n;
                }
                if g.s.contains(sum) {
                    degree[i] += 1;
                    degree[j] += 1;
                }
            }
        }
        let mut idx: Vec<usize> = (0..m).collect();
        idx.sort_by_key(|&i| (degree[i], raw[i]));
        let verts: Vec<usize> = idx.iter().map(|&i| raw[i]).collect();
        let lw = words_for(m).max(1);
        let mut adj = vec![0u64; m * lw];
        for i in 0..m {
            let vi = verts[i];
            for j in (i + 1)..m {
                let mut sum = vi + verts[j];
                if sum >= n {
                    sum -= n;
                }
                if g.s.contains(sum) {
                    adj[i * lw + (j >> 6)] |= 1 << (j & 63);
                    adj[j * lw + (i >> 6)] |= 1 << (i & 63);
                }
            }
        }
        LocalRows { verts, lw, adj }
    }

    #[inline(always)]
    fn row(&self, v: usize) -> &[u64] {
        &self.adj[v * self.lw..(v + 1) * self.lw]
    }
}

impl Rows for LocalRows {
    fn words(&self) -> usize {
        self.lw
    }

    #[inline]
    fn non_neighbors_in(&self, v: usize, p: &[u64], out: &mut [u64]) {
        let row = self.row(v);
        for w in 0..self.lw {
            out[w] = p[w] & !row[w];
        }
        out[v >> 6] &= !(1u64 << (v & 63));
    }

    #[inline]
    fn keep_neighbors(&self, v: usize, q: &mut [u64]) {
        for (qw, rw) in q.iter_mut().zip(self.row(v)) {
            *qw &= rw;
        }
    }

    #[inline]
    fn conflicts(&self, v: usize, class: &[u64]) -> (u32, usize) {
        let mut count = 0;
        let mut first = 0;
        for (w, (cw, rw)) in class.iter().zip(self.row(v)).enumerate() {
            let bad = cw & !rw;
            if bad != 0 {
                if count == 0 {
                    first = w * 64 + bad.trailing_zeros() as usize;
                }
                count += bad.count_ones().min(2);
                if count >= 2 {
                    return (2, first);
                }
            }
        }
        (count, first)
    }

    fn residue(&self, v: usize) -> usize {
        self.verts[v]
    }
}

#[inline]
fn first_bit(words: &[u64]) -> Option<usize> {
    words
        .iter()
        .enumerate()
        .find(|(_, w)| **w != 0)
        .map(|(i, w)| i * 64 + w.trailing_zeros() as usize)
}

#[inline]
fn popcount(words: &[u64]) -> usize {
    words.iter().map(|w| w.count_ones() as usize).sum()
}

#[inline(always)]
fn clear_bit(words: &mut [u64], v: usize) {
    words[v >> 6] &= !(1u64 << (v & 63));
}

#[inline(always)]
fn set_bit(words: &mut [u64], v: usize) {
    words[v >> 6] |= 1u64 << (v & 63);
}

/// Scratch space for one node: the cover classes below the pruning
/// threshold and two working sets.
#[derive(Default)]
struct Scratch {
    u: Vec<u64>,
    q: Vec<u64>,
    classes: Vec<u64>,
}

/// Per-depth buffers, reused across the whole search.
#[derive(Default)]
struct Frame {
    candidates: Vec<u64>,
    order: Vec<(u32, u32)>,
}

struct Search<'g> {
    g: &'g CayleyGraph,
    best: Vec<usize>,
    current: Vec<usize>,
    nodes: u64,
    deadline: Option<Instant>,
    timed_out: bool,
    scratch: Scratch,
    frames: Vec<Frame>,
}

impl<'g> Search<'g> {
    fn tick(&mut self) -> bool {
        self.nodes += 1;
        if self.nodes.is_multiple_of(CLOCK_STRIDE) {
            if let Some(d) = self.deadline {
                if Instant::now() >= d {
                    self.timed_out = true;
                }
            }
        }
        self.timed_out
    }

    fn frame(&mut self, depth: usize, words: usize) -> Frame {
        if self.frames.len() <= depth {
            self.frames.resize_with(depth + 1, Frame::default);
        }
        let mut f = std::mem::take(&mut self.frames[depth]);
        f.candidates.clear();
        f.candidates.resize(words, 0);
        f.order.clear();
        f
    }

    /// Greedy clique cover of `p`, writing into `order` the candidates whose
    /// cover index can still beat the incumbent, in cover order.
    ///
    /// A vertex that would open a branching class is first offered to the
    /// classes below the threshold: it joins one directly if it is adjacent
    /// to every member, or after the single non-adjacent member moves to
    /// another low class that accepts it.
    fn cover<R: Rows>(&mut self, rows: &R, p: &[u64], depth: usize, order: &mut Vec<(u32, u32)>) {
        let need = self.best.len().saturating_sub(depth) + 1;
        let lw = rows.words();
        let low = need - 1;
        let Scratch { u, q, classes } = &mut self.scratch;
        u.clear();
        u.extend_from_slice(p);
        q.clear();
        q.resize(lw, 0);
        classes.clear();
        classes.resize(low * lw, 0);
        let mut color = 0usize;
        while first_bit(u).is_some() {
            color += 1;
            q.copy_from_slice(u);
            while let Some(v) = first_bit(q) {
                clear_bit(u, v);
                clear_bit(q, v);
                if color > low && renumber(rows, v, classes, low, lw) {
                    continue;
                }
                rows.keep_neighbors(v, q);
                if color <= low {
                    set_bit(&mut classes[(color - 1) * lw..color * lw], v);
                } else {
                    order.push((v as u32, color as u32));
                }
            }
        }
    }

    fn expand<R: Rows>(&mut self, rows: &R, p: &mut [u64]) {
        if self.tick() {
            return;
        }
        let depth = self.current.len();
        let words = rows.words();
        let mut frame = self.frame(depth, words);
        let mut order = std::mem::take(&mut frame.order);
        self.cover(rows, p, depth, &mut order);
        let mut child = std::mem::take(&mut frame.candidates);
        for &(v, color) in order.iter().rev() {
            let v = v as usize;
            if depth + color as usize <= self.best.len() || self.timed_out {
                break;
            }
            rows.non_neighbors_in(v, p, &mut child);
            self.current.push(rows.residue(v));
            let size = popcount(&child);
            if size == 0 {
                if self.current.len() > self.best.len() {
                    self.best = self.current.clone();
                }
            } else if words > words_for(LOCAL_MAX) && size <= LOCAL_MAX {
                let local = LocalRows::build(self.g, &child);
                let mut lp = vec![0u64; local.lw];
                for i in 0..local.verts.len() {
                    set_bit(&mut lp, i);
                }
                self.expand(&local, &mut lp);
            } else {
                self.expand(rows, &mut child);
            }
            self.current.pop();
            clear_bit(p, v);
        }
        frame.order = order;
        frame.candidates = child;
        self.frames[depth] = frame;
    }
}

/// Tries to place `v` into one of the `low` classes; see [`Search::cover`].
fn renumber<R: Rows>(rows: &R, v: usize, classes: &mut [u64], low: usize, lw: usize) -> bool {
    for i in 0..low {
        let (count, w) = rows.conflicts(v, &classes[i * lw..(i + 1) * lw]);
        if count == 0 {
            set_bit(&mut classes[i * lw..(i + 1) * lw], v);
            return true;
        }
        if count == 1 {
            for j in 0..low {
                if j == i {
                    continue;
                }
                if rows.conflicts(w, &classes[j * lw..(j + 1) * lw]).0 == 0 {
                    clear_bit(&mut classes[i * lw..(i + 1) * lw], w);
                    set_bit(&mut classes[j * lw..(j + 1) * lw], w);
                    set_bit(&mut classes[i * lw..(i + 1) * lw], v);
                    return true;
                }
            }
        }
    }
    false
}

/// Randomised greedy independent set; the seed is fixed so results are
/// reproducible for a given graph.
fn greedy_incumbent(g: &CayleyGraph) -> Vec<usize> {
    let n = g.modulus();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed ^ n as u64);
    let mut order: Vec<usize> = (0..n).collect();
    let mut best: Vec<usize> = Vec::new();
    for _ in 0..GREEDY_RESTARTS {
        order.shuffle(&mut rng);
        let mut picked: Vec<usize> = Vec::new();
        for &x in &order {
            if picked.iter().all(|&y| !g.adjacent(x, y)) {
                picked.push(x);
            }
        }
        if picked.len() > best.len() {
            best = picked;
        }
    }
    best
}

/// Exact independence number of the Cayley sum graph of `s`, with a witness.
///
/// With a `time_budget` the search may stop early; the result then carries
/// `exact = false` and the best set found so far.
pub fn independence_number(s: &ZnSet, time_budget: Option<Duration>) -> MisResult {
    let start = Instant::now();
    let g = CayleyGraph::new(s.clone());
    let n = g.modulus();
    let mut search = Search {
        g: &g,
        best: greedy_incumbent(&g),
        current: Vec::new(),
        nodes: 0,
        deadline: time_budget.map(|b| start + b),
        timed_out: false,
        scratch: Scratch::default(),
        frames: Vec::new(),
    };
    let all = ZnSet::full(n).expect("modulus is positive");
    if n <= LOCAL_MAX {
        let local = LocalRows::build(&g, all.words());
        let mut lp = vec![0u64; local.lw];
        lp.copy_from_slice(all.words());
        search.expand(&local, &mut lp);
    } else {
        let rows = GlobalRows { g: &g, nw: words_for(n) };
        let mut p = all.words().to_vec();
        search.expand(&rows, &mut p);
    }
    let witness = ZnSet::new(n, search.best.iter().copied()).expect("witness residues in range");
    MisResult {
        alpha: witness.len(),
        witness,
        node_count: search.nodes,
        elapsed: start.elapsed(),
        exact: !search.timed_out,
    }
}

/// Largest independent set size by exhaustive enumeration. Only for `n <= 32`.
///
/// Walks every subset in include/exclude order, dropping a branch as soon as
/// it contains an edge (no supersets of it can be independent). There is no
/// bounding, so this shares nothing with [`independence_number`].
pub fn brute_force_alpha(s: &ZnSet) -> Result<usize> {
    let n = s.modulus();
    if n > 32 {
        return refuse(format!("brute force limited to n <= 32, got {n}"));
    }
    let adj: Vec<u64> = (0..n)
        .map(|x| {
            (0..n)
                .filter(|&y| y != x && s.contains((x + y) % n))
                .fold(0u64, |m, y| m | 1 << y)
        })
        .collect();

    fn walk(v: usize, n: usize, chosen: u64, adj: &[u64], best: &mut usize) {
        if v == n {
            *best = (*best).max(chosen.count_ones() as usize);
            return;
        }
        if adj[v] & chosen == 0 {
            walk(v + 1, n, chosen | 1 << v, adj, best);
        }
        walk(v + 1, n, chosen, adj, best);
    }

    let mut best = 0;
    walk(0, n, 0, &adj, &mut best);
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zn::sample_p_random;

    fn set(n: usize, xs: &[usize]) -> ZnSet {
        ZnSet::new(n, xs.iter().copied()).unwrap()
    }

    #[test]
    fn independence_examples() {
        assert!(is_independent(&set(5, &[0, 1, 2]), &set(5, &[0])).unwrap());
        assert!(!is_independent(&set(5, &[1, 3]), &ZnSet::full(5).unwrap()).unwrap());
        assert!(is_independent(&ZnSet::full(7).unwrap(), &ZnSet::empty(7).unwrap()).unwrap());
        assert!(is_independent(&set(5, &[0]), &set(6, &[0])).is_err());
    }

    #[test]
    fn adjacency_has_no_loops_and_is_symmetric() {
        let g = CayleyGraph::new(set(9, &[0, 2, 4]));
        // 2*1 = 2 in S but no loop
        assert!(!g.adjacent(1, 1));
        for x in 0..9 {
            for y in 0..9 {
                assert_eq!(g.adjacent(x, y), g.adjacent(y, x));
            }
            assert!(!g.neighbors(x).contains(x));
        }
        assert_eq!(g.neighbors(1).to_vec(), vec![3, 8]);
    }

    #[test]
    fn alpha_examples() {
        let r = independence_number(&set(5, &[0]), None);
        assert_eq!(r.alpha, 3);
        assert!(r.exact);
        assert!(is_independent(&r.witness, &set(5, &[0])).unwrap());
        assert_eq!(independence_number(&ZnSet::full(5).unwrap(), None).alpha, 1);
        assert_eq!(independence_number(&ZnSet::empty(7).unwrap(), None).alpha, 7);
        assert_eq!(independence_number(&ZnSet::empty(1).unwrap(), None).alpha, 1);
    }

    #[test]
    fn brute_force_examples() {
        assert_eq!(brute_force_alpha(&set(5, &[0])).unwrap(), 3);
        assert_eq!(brute_force_alpha(&set(4, &[1, 3])).unwrap(), 2);
        assert_eq!(brute_force_alpha(&ZnSet::empty(1).unwrap()).unwrap(), 1);
        assert!(brute_force_alpha(&ZnSet::empty(33).unwrap()).is_err());
    }

    #[test]
    fn solver_crosses_local_threshold() {
        // n above LOCAL_MAX exercises the global rows
        for seed in 0..3 {
            let s = sample_p_random(701, 0.5, seed).unwrap();
            let r = independence_number(&s, None);
            assert!(r.exact);
            assert!(is_independent(&r.witness, &s).unwrap());
            assert!(r.alpha >= 8 && r.alpha <= 20, "alpha {}", r.alpha);
        }
    }

    #[test]
    fn budget_exhaustion_is_flagged() {
        let s = sample_p_random(4001, 0.5, 3).unwrap();
        let r = independence_number(&s, Some(Duration::from_millis(1)));
        assert!(!r.exact);
        assert!(is_independent(&r.witness, &s).unwrap());
        assert!(r.alpha > 0);
    }
}
