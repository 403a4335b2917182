//! Freiman isomorphism and Freiman dimension.
//!
//! Two additive sets are Freiman isomorphic (order 2) when a bijection
//! between them preserves every relation `a + b = c + d` in both directions.
//! The dimension of a set is read off its relation lattice: with `m`
//! elements and relation matrix of rank `r` (rows `e_i + e_j - e_k - e_l`),
//! the universal model spans an affine space of dimension `m - 1 - r`.

use std::collections::HashMap;
use std::hash::Hash;

use itertools::Itertools;
use num_rational::Ratio;
use serde::Serialize;

use crate::error::{param, refuse, Result};
use crate::rank::integer_rank;
use crate::zn::{doubling_sigma, ZnSet};

/// Largest set accepted by [`freiman_dimension`].
pub const DEFAULT_DIMENSION_CAP: usize = 64;
/// Largest number of subsets any robustness enumeration will visit.
pub const SUBSET_ENUMERATION_CAP: u128 = 1_000_000;

/// `a_i + a_j = a_k + a_l` with `i <= j`, `k <= l` and `(i, j) < (k, l)`.
///
/// Indices refer to the canonical (ascending) ordering of the set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct QuadrupleRelation {
    pub i: usize,
    pub j: usize,
    pub k: usize,
    pub l: usize,
}

impl QuadrupleRelation {
    /// Coefficient vector `e_i + e_j - e_k - e_l` of length `m`.
    pub fn row(&self, m: usize) -> Vec<i64> {
        let mut r = vec![0i64; m];
        r[self.i] += 1;
        r[self.j] += 1;
        r[self.k] -= 1;
        r[self.l] -= 1;
        r
    }
}

/// All nontrivial additive quadruples of `elems` under `sum`, sorted.
pub fn additive_quadruples_by<T, K, F>(elems: &[T], sum: F) -> Vec<QuadrupleRelation>
where
    K: Eq + Hash,
    F: Fn(&T, &T) -> K,
{
    let mut classes: HashMap<K, Vec<(usize, usize)>> = HashMap::new();
    for i in 0..elems.len() {
        for j in i..elems.len() {
            classes.entry(sum(&elems[i], &elems[j])).or_default().push((i, j));
        }
    }
    let mut out = Vec::new();
    for pairs in classes.values() {
        for (x, y) in pairs.iter().tuple_combinations() {
            let (lo, hi) = if x < y { (x, y) } else { (y, x) };
            out.push(QuadrupleRelation { i: lo.0, j: lo.1, k: hi.0, l: hi.1 });
        }
    }
    out.sort_unstable();
    out
}

pub fn additive_quadruples(a: &ZnSet) -> Vec<QuadrupleRelation> {
    let n = a.modulus();
    let elems = a.to_vec();
    additive_quadruples_by(&elems, |x, y| (x + y) % n)
}

/// Quadruples of a set of integer points (all of the same dimension).
pub fn additive_quadruples_points(points: &[Vec<i64>]) -> Vec<QuadrupleRelation> {
    additive_quadruples_by(points, |x, y| x.iter().zip(y).map(|(a, b)| a + b).collect::<Vec<i64>>())
}

/// Rank of the relation lattice. Only one relation per pair of sum-class
/// members is needed: linking each pair to the first pair of its class
/// spans the same lattice.
fn relation_rank<T, K, F>(elems: &[T], sum: F) -> usize
where
    K: Eq + Hash,
    F: Fn(&T, &T) -> K,
{
    let m = elems.len();
    let mut first: HashMap<K, (usize, usize)> = HashMap::new();
    let mut rows = Vec::new();
    for i in 0..m {
        for j in i..m {
            match first.entry(sum(&elems[i], &elems[j])) {
                std::collections::hash_map::Entry::Occupied(e) => {
                    let (k, l) = *e.get();
                    rows.push(QuadrupleRelation { i: k, j: l, k: i, l: j }.row(m));
                }
                std::collections::hash_map::Entry::Vacant(e) => {
                    e.insert((i, j));
                }
            }
        }
    }
    integer_rank(&rows, m)
}

/// Freiman dimension with the default size cap.
pub fn freiman_dimension(a: &ZnSet) -> Result<usize> {
    freiman_dimension_capped(a, DEFAULT_DIMENSION_CAP)
}

/// `max(m - 1 - r, 1)` for a nonempty set of size `m <= cap`.
pub fn freiman_dimension_capped(a: &ZnSet, cap: usize) -> Result<usize> {
    if a.is_empty() {
        return param("Freiman dimension of the empty set is undefined");
    }
    if a.len() > cap {
        return refuse(format!("Freiman dimension capped at {cap} elements, got {}", a.len()));
    }
    let n = a.modulus();
    let elems = a.to_vec();
    let r = relation_rank(&elems, |x, y| (x + y) % n);
    Ok((a.len() - 1 - r).max(1))
}

/// Dimension of a finite set of integer points, by the same relation rank.
pub fn freiman_dimension_points(points: &[Vec<i64>]) -> Result<usize> {
    if points.is_empty() {
        return param("Freiman dimension of the empty set is undefined");
    }
    let r = relation_rank(points, |x, y| x.iter().zip(y).map(|(a, b)| a + b).collect::<Vec<i64>>());
    Ok((points.len() - 1 - r).max(1))
}

/// Search limits for [`freiman_dimension_oracle`].
#[derive(Debug, Clone, Copy)]
pub struct OracleConfig {
    /// Coordinates range over `-radius..=radius`, measured from the image
    /// of the first placed element, which sits at the origin.
    pub radius: i64,
    pub max_size: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { radius: 4, max_size: 6 }
    }
}

/// Freiman dimension by exhaustive search for an isomorphic full-rank
/// configuration in a box of `Z^d`, for `d` from `|A| - 1` down to 1.
///
/// Returns 1 when no dimension admits a configuration (singletons, or sets
/// whose relations only hold because of wrap-around mod n).
pub fn freiman_dimension_oracle(a: &ZnSet, cfg: OracleConfig) -> Result<usize> {
    if a.is_empty() {
        return param("Freiman dimension of the empty set is undefined");
    }
    if a.len() > cfg.max_size {
        return refuse(format!("oracle limited to {} elements, got {}", cfg.max_size, a.len()));
    }
    let m = a.len();
    let n = a.modulus();
    let elems = a.to_vec();
    let mut class = vec![vec![0usize; m]; m];
    let mut ids: HashMap<usize, usize> = HashMap::new();
    for i in 0..m {
        for j in i..m {
            let next = ids.len();
            let id = *ids.entry((elems[i] + elems[j]) % n).or_insert(next);
            class[i][j] = id;
            class[j][i] = id;
        }
    }
    let plan = PlacementPlan::best(&class);
    for d in (1..m).rev() {
        if plan.free_positions() < d {
            continue;
        }
        let mut search = BoxSearch::new(&class, &plan, d, cfg.radius);
        if search.run() {
            return Ok(d);
        }
    }
    Ok(1)
}

/// Order in which elements are placed, and for each position the relation
/// (if any) that pins the new point down once earlier points are fixed.
struct PlacementPlan {
    order: Vec<usize>,
    /// For position `t`: `(coefficient of the new point, other terms)` with
    /// the relation reading `coef * x_new + sum(c * x_other) = 0`.
    forcing: Vec<Option<(i64, Vec<(usize, i64)>)>>,
}

impl PlacementPlan {
    fn for_order(class: &[Vec<usize>], order: Vec<usize>) -> Self {
        let m = order.len();
        let mut forcing = vec![None; m];
        for t in 1..m {
            let placed = &order[..t];
            let e = order[t];
            'search: for (pi, &x) in placed.iter().chain(std::iter::once(&e)).enumerate() {
                for &y in placed.iter().chain(std::iter::once(&e)).skip(pi) {
                    if x != e && y != e {
                        continue;
                    }
                    // pair (x, y) involves e; look for a placed pair with the same sum
                    for (qi, &u) in placed.iter().enumerate() {
                        for &v in placed.iter().skip(qi) {
                            if class[x][y] == class[u][v] {
                                let mut coef = 0i64;
                                let mut others: HashMap<usize, i64> = HashMap::new();
                                for (z, c) in [(x, 1i64), (y, 1), (u, -1), (v, -1)] {
                                    if z == e {
                                        coef += c;
                                    } else {
                                        *others.entry(z).or_default() += c;
                                    }
                                }
                                let mut others: Vec<(usize, i64)> =
                                    others.into_iter().filter(|(_, c)| *c != 0).collect();
                                others.sort_unstable();
                                forcing[t] = Some((coef, others));
                                break 'search;
                            }
                        }
                    }
                }
            }
        }
        PlacementPlan { order, forcing }
    }

    /// The order with the most forced positions; ties go to the first
    /// permutation in lexicographic order.
    fn best(class: &[Vec<usize>]) -> Self {
        let m = class.len();
        let mut best: Option<PlacementPlan> = None;
        for perm in (0..m).permutations(m) {
            let plan = PlacementPlan::for_order(class, perm);
            if best.as_ref().is_none_or(|b| plan.free_positions() < b.free_positions()) {
                best = Some(plan);
            }
        }
        best.expect("at least one permutation")
    }

    /// Positions after the first that are not forced.
    fn free_positions(&self) -> usize {
        self.forcing.iter().skip(1).filter(|f| f.is_none()).count()
    }
}

struct BoxSearch<'a> {
    class: &'a [Vec<usize>],
    plan: &'a PlacementPlan,
    d: usize,
    radius: i64,
    points: Vec<Vec<i64>>,
    /// Remaining free positions after each position.
    free_after: Vec<usize>,
}

impl<'a> BoxSearch<'a> {
    fn new(class: &'a [Vec<usize>], plan: &'a PlacementPlan, d: usize, radius: i64) -> Self {
        let m = plan.order.len();
        let mut free_after = vec![0; m];
        for t in (0..m.saturating_sub(1)).rev() {
            free_after[t] = free_after[t + 1] + usize::from(plan.forcing[t + 1].is_none());
        }
        BoxSearch { class, plan, d, radius, points: vec![vec![0; d]; m], free_after }
    }

    fn run(&mut self) -> bool {
        // the first element sits at the origin
        self.place(1, &[])
    }

    fn consistent(&self, t: usize) -> bool {
        let order = &self.plan.order;
        let e = order[t];
        let placed = &order[..=t];
        if placed[..t].iter().any(|&u| self.points[u] == self.points[e]) {
            return false;
        }
        let mut pairs = Vec::new();
        for (qi, &u) in placed.iter().enumerate() {
            for &v in &placed[qi..] {
                let s: Vec<i64> = self.points[u].iter().zip(&self.points[v]).map(|(a, b)| a + b).collect();
                pairs.push((u, v, s));
            }
        }
        for (x, (u1, v1, s1)) in pairs.iter().enumerate() {
            for (u2, v2, s2) in &pairs[x + 1..] {
                if ![u1, v1, u2, v2].contains(&&e) {
                    continue;
                }
                if (self.class[*u1][*v1] == self.class[*u2][*v2]) != (s1 == s2) {
                    return false;
                }
            }
        }
        true
    }

    fn place(&mut self, t: usize, basis: &[Vec<i64>]) -> bool {
        let m = self.plan.order.len();
        if basis.len() + self.free_after[t - 1] < self.d {
            return false;
        }
        if t == m {
            return basis.len() == self.d;
        }
        let e = self.plan.order[t];
        let candidates: Vec<Vec<i64>> = match &self.plan.forcing[t] {
            Some((coef, others)) => {
                let mut acc = vec![0i64; self.d];
                for &(z, c) in others {
                    for (a, p) in acc.iter_mut().zip(&self.points[z]) {
                        *a -= c * p;
                    }
                }
                if acc.iter().any(|a| a % coef != 0) {
                    return false;
                }
                vec![acc.iter().map(|a| a / coef).collect()]
            }
            None => self.box_points(basis.is_empty()),
        };
        for cand in candidates {
            if cand.iter().any(|c| c.abs() > self.radius) {
                continue;
            }
            self.points[e] = cand.clone();
            if !self.consistent(t) {
                continue;
            }
            let mut next = basis.to_vec();
            let grows = integer_rank(&[basis.to_vec(), vec![cand.clone()]].concat(), self.d) > basis.len();
            if grows {
                next.push(cand);
            }
            if self.place(t + 1, &next) {
                return true;
            }
        }
        false
    }

    /// All points of the box; for the first free point only one
    /// representative per orbit of coordinate permutations and sign flips
    /// (nonnegative, nonincreasing coordinates), which fix the box.
    fn box_points(&self, first_free: bool) -> Vec<Vec<i64>> {
        let r = self.radius;
        let mut out = Vec::new();
        let mut cur = vec![-r; self.d];
        loop {
            let canonical = cur.iter().all(|&c| c >= 0) && cur.windows(2).all(|w| w[0] >= w[1]);
            if !first_free || canonical {
                out.push(cur.clone());
            }
            let mut i = 0;
            loop {
                if i == self.d {
                    return out;
                }
                if cur[i] < r {
                    cur[i] += 1;
                    break;
                }
                cur[i] = -r;
                i += 1;
            }
        }
    }
}

/// Outcome of checking `dim_f(A) < 2K` with `K = sigma(A)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Observation2 {
    #[serde(serialize_with = "ser_ratio")]
    pub k_bound: Ratio<usize>,
    pub dim: usize,
    pub ok: bool,
}

pub(crate) fn ser_ratio<S: serde::Serializer>(r: &Ratio<usize>, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&format!("{}/{}", r.numer(), r.denom()))
}

pub fn check_observation2(a: &ZnSet) -> Result<Observation2> {
    let dim = freiman_dimension(a)?;
    let k = doubling_sigma(a)?;
    let ok = dim * k.denom() < 2 * k.numer();
    Ok(Observation2 { k_bound: k, dim, ok })
}

/// `(epsilon, beta)` for Freiman robustness, both in `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RobustnessParams {
    epsilon: f64,
    beta: f64,
}

impl RobustnessParams {
    pub fn new(epsilon: f64, beta: f64) -> Result<Self> {
        for (name, v) in [("epsilon", epsilon), ("beta", beta)] {
            if !(v > 0.0 && v < 1.0) {
                return param(format!("{name} must lie in (0, 1), got {v}"));
            }
        }
        Ok(RobustnessParams { epsilon, beta })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// Smallest integer size `s` with `s >= (1 - epsilon) * m`.
pub fn min_retained_size(m: usize, epsilon: f64) -> usize {
    let s = ((1.0 - epsilon) * m as f64 - 1e-9).ceil();
    (s.max(0.0) as usize).min(m)
}

pub(crate) fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.saturating_mul((n - i) as u128) / (i as u128 + 1);
    }
    acc
}

/// Number of subsets of an `m`-set with size in `min_size..=m`.
pub(crate) fn count_large_subsets(m: usize, min_size: usize) -> u128 {
    (min_size..=m).fold(0u128, |acc, s| acc.saturating_add(binomial(m, s)))
}

/// Subsets of `members` of the given size, in lexicographic order.
pub(crate) fn subsets_of_size(members: &[usize], size: usize) -> impl Iterator<Item = Vec<usize>> + '_ {
    members.iter().copied().combinations(size)
}

/// Whether every `X' ⊆ X` with `|X'| >= (1 - epsilon)|X|` keeps
/// `dim_f(X') >= (1 - beta) dim_f(X)`.
pub fn is_freiman_robust(x: &ZnSet, params: RobustnessParams) -> Result<bool> {
    if x.is_empty() {
        return param("robustness of the empty set is undefined");
    }
    let m = x.len();
    let min_size = min_retained_size(m, params.epsilon).max(1);
    let total = count_large_subsets(m, min_size);
    if total > SUBSET_ENUMERATION_CAP {
        return refuse(format!("{total} subsets exceed the enumeration cap"));
    }
    let dim = freiman_dimension(x)? as f64;
    let floor = (1.0 - params.beta) * dim;
    let members = x.to_vec();
    let n = x.modulus();
    for size in (min_size..m).rev() {
        for sub in subsets_of_size(&members, size) {
            let sub = ZnSet::new(n, sub)?;
            if (freiman_dimension(&sub)? as f64) < floor - 1e-12 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
