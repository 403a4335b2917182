//! Fingerprints: small `F ⊆ X ⊆ A` whose restricted sumset is already large.
//!
//! The existence results behind the construction are not constructive, so
//! the fingerprint of a set is found by greedy max-coverage over translates
//! (or exhaustively, for tiny inputs). Every asymptotic inequality becomes a
//! reported target with an achieved/target ratio rather than an assertion.

use std::fmt;
use std::str::FromStr;

use num_rational::Ratio;
use serde::Serialize;

use crate::error::{param, refuse, Error, Result};
use crate::freiman::{
    binomial, count_large_subsets, freiman_dimension, min_retained_size, ser_ratio, subsets_of_size,
    SUBSET_ENUMERATION_CAP,
};
use crate::zn::{doubling_sigma, restricted_sumset, sumset, ZnSet};

/// Picks and marginal gains of the greedy translate cover.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GreedyTrace {
    pub picks: Vec<usize>,
    pub gains: Vec<usize>,
}

fn check_fraction(name: &str, a: f64) -> Result<()> {
    if !(a > 0.0 && a < 1.0) {
        return param(format!("{name} must lie in (0, 1), got {a}"));
    }
    Ok(())
}

/// Greedily selects `t` elements of `tprime` so that the translates of `x`
/// cover as much as possible; ties go to the lowest residue.
///
/// Gains are nonincreasing, which gives `|T + X| |T'| >= t |T' + X|`; the
/// bound is checked before returning.
pub fn greedy_translate_selection(tprime: &ZnSet, x: &ZnSet, t: usize) -> Result<(ZnSet, GreedyTrace)> {
    tprime.check_same(x)?;
    if t == 0 || t > tprime.len() {
        return param(format!("t must lie in 1..={}, got {t}", tprime.len()));
    }
    let n = x.modulus();
    let mut pool: Vec<(usize, ZnSet)> = tprime.iter().map(|a| (a, x.translate(a))).collect();
    let mut covered = ZnSet::empty(n)?;
    let mut trace = GreedyTrace { picks: Vec::with_capacity(t), gains: Vec::with_capacity(t) };
    for _ in 0..t {
        // pool stays in ascending residue order, so the first maximum wins ties
        let mut idx = 0;
        let mut gain = pool[0].1.count_outside(&covered);
        for (i, (_, tr)) in pool.iter().enumerate().skip(1) {
            let g = tr.count_outside(&covered);
            if g > gain {
                (idx, gain) = (i, g);
            }
        }
        let (a, tr) = pool.remove(idx);
        covered.absorb(&tr);
        trace.picks.push(a);
        trace.gains.push(gain);
    }
    let full = sumset(tprime, x)?.len();
    assert!(
        covered.len() * tprime.len() >= t * full,
        "greedy cover {} below {t}/{} of {full}",
        covered.len(),
        tprime.len()
    );
    Ok((ZnSet::new(n, trace.picks.iter().copied())?, trace))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SearchMode {
    Greedy,
    Exhaustive,
}

impl FromStr for SearchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "greedy" => Ok(SearchMode::Greedy),
            "exhaustive" => Ok(SearchMode::Exhaustive),
            _ => param(format!("unknown search mode {s:?}")),
        }
    }
}

impl fmt::Display for SearchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SearchMode::Greedy => "greedy",
            SearchMode::Exhaustive => "exhaustive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Fingerprint {
    pub t: ZnSet,
    /// `|T + X|`
    pub achieved: usize,
}

/// `(1 - a)(d + 1) m / 2`, the size a fingerprint of an `m`-set of
/// dimension `d` should reach.
pub fn fingerprint_target(a: f64, d: usize, m: usize) -> f64 {
    (1.0 - a) * (d as f64 + 1.0) * m as f64 / 2.0
}

/// A subset `T ⊆ X` with `|T| <= budget` and `|T + X|` as large as the mode
/// can make it. Exhaustive mode returns the lexicographically first optimum.
pub fn find_fingerprint(x: &ZnSet, budget: usize, mode: SearchMode) -> Result<Fingerprint> {
    if budget == 0 {
        return param("fingerprint budget must be positive");
    }
    if x.is_empty() {
        return param("fingerprint of the empty set is undefined");
    }
    // |T + X| is monotone in T, so the full budget is always worth spending
    let size = budget.min(x.len());
    match mode {
        SearchMode::Greedy => {
            let (t, trace) = greedy_translate_selection(x, x, size)?;
            Ok(Fingerprint { t, achieved: trace.gains.iter().sum() })
        }
        SearchMode::Exhaustive => {
            let count = binomial(x.len(), size);
            if count > SUBSET_ENUMERATION_CAP {
                return refuse(format!("{count} candidate fingerprints exceed the enumeration cap"));
            }
            let n = x.modulus();
            let members = x.to_vec();
            let translates: Vec<ZnSet> = members.iter().map(|&a| x.translate(a)).collect();
            let index: Vec<usize> = (0..members.len()).collect();
            let mut best: Option<(Vec<usize>, usize)> = None;
            for combo in subsets_of_size(&index, size) {
                let mut cover = ZnSet::empty(n)?;
                for &i in &combo {
                    cover.absorb(&translates[i]);
                }
                if best.as_ref().is_none_or(|b| cover.len() > b.1) {
                    best = Some((combo, cover.len()));
                }
            }
            let (combo, achieved) = best.expect("at least one subset");
            Ok(Fingerprint { t: ZnSet::new(n, combo.iter().map(|&i| members[i]))?, achieved })
        }
    }
}

/// Result of the robust-subset process.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RobustSubset {
    pub x: ZnSet,
    pub rounds: usize,
    pub epsilon: f64,
    /// `log_{1/(1-a)}(2K)`, the round bound
    pub round_bound: f64,
}

/// Shrinks `a_set` while some large subset has markedly smaller dimension.
///
/// Uses `beta = a`, `K = sigma(A)`, `L = log_{1/(1-a)}(2K)` and
/// `epsilon = a / L`.
pub fn robust_subset(a_set: &ZnSet, a: f64) -> Result<RobustSubset> {
    check_fraction("a", a)?;
    let k = doubling_sigma(a_set)?;
    let bound = round_bound(k, a);
    robust_subset_with(a_set, a, a / bound).map(|r| RobustSubset { round_bound: bound, ..r })
}

fn round_bound(k: Ratio<usize>, a: f64) -> f64 {
    let k = *k.numer() as f64 / *k.denom() as f64;
    (2.0 * k).ln() / (1.0 / (1.0 - a)).ln()
}

/// [`robust_subset`] with an explicit `epsilon`.
///
/// Each round replaces `X` by the first subset, largest sizes first and
/// lexicographic within a size, with `|X'| >= (1 - epsilon)|X|` and
/// `dim(X') < (1 - a) dim(X)`.
pub fn robust_subset_with(a_set: &ZnSet, a: f64, epsilon: f64) -> Result<RobustSubset> {
    check_fraction("a", a)?;
    if !(epsilon > 0.0) {
        return param(format!("epsilon must be positive, got {epsilon}"));
    }
    if a_set.is_empty() {
        return param("robust subset of the empty set is undefined");
    }
    let n = a_set.modulus();
    let mut x = a_set.clone();
    let mut rounds = 0;
    'outer: loop {
        let m = x.len();
        let min_size = min_retained_size(m, epsilon).max(1);
        let total = count_large_subsets(m, min_size);
        if total > SUBSET_ENUMERATION_CAP {
            return refuse(format!("{total} subsets exceed the enumeration cap"));
        }
        let floor = (1.0 - a) * freiman_dimension(&x)? as f64;
        let members = x.to_vec();
        for size in (min_size..m).rev() {
            for sub in subsets_of_size(&members, size) {
                let sub = ZnSet::new(n, sub)?;
                if (freiman_dimension(&sub)? as f64) < floor - 1e-12 {
                    x = sub;
                    rounds += 1;
                    continue 'outer;
                }
            }
        }
        break;
    }
    let k = doubling_sigma(a_set)?;
    Ok(RobustSubset { x, rounds, epsilon, round_bound: round_bound(k, a) })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseOne {
    pub d: usize,
    /// `max(1, round(sqrt(|X| / d)))`
    pub rounds_planned: usize,
    pub parts: Vec<ZnSet>,
    /// `|T_i + X_i|` per round
    pub achieved: Vec<usize>,
    /// `(1 - 2a)(d + 1)|X_i| / 2` per round
    pub targets: Vec<f64>,
}

/// Peels disjoint fingerprints `T_1, T_2, ...` off `x`, each of size at
/// most `2 C d`.
pub fn phase_one(x: &ZnSet, a: f64, c: usize) -> Result<PhaseOne> {
    check_fraction("a", a)?;
    if c == 0 {
        return param("C must be positive");
    }
    let d = freiman_dimension(x)?;
    let rounds_planned = ((x.len() as f64 / d as f64).sqrt().round() as usize).max(1);
    let mut out = PhaseOne { d, rounds_planned, parts: vec![], achieved: vec![], targets: vec![] };
    let mut xi = x.clone();
    for _ in 0..rounds_planned {
        let fp = find_fingerprint(&xi, 2 * c * d, SearchMode::Greedy)?;
        out.targets.push((1.0 - 2.0 * a) * (d as f64 + 1.0) * xi.len() as f64 / 2.0);
        out.achieved.push(fp.achieved);
        xi = xi.difference(&fp.t)?;
        out.parts.push(fp.t);
        if xi.is_empty() {
            break;
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseTwo {
    pub added: ZnSet,
    pub gains: Vec<usize>,
    /// `|Y|` at the end
    pub covered: usize,
    /// `(1 - 5a)(d + 1)|A| / 2`
    pub target: f64,
    /// `(a / 2) sqrt(d |A|)`, the per-step gain the argument promises
    pub promised_gain: f64,
    pub reached: bool,
    pub stalled: bool,
    pub capped: bool,
}

/// Grows `Y = F_T +^ F_T` by translates `F_T + x`, `x ∈ X`, until `|Y|`
/// reaches `(1 - 5a)(d + 1)|A| / 2`, nothing adds coverage, or `abs_cap`
/// elements have been added.
pub fn phase_two(
    f_t: &ZnSet,
    x: &ZnSet,
    d: usize,
    a: f64,
    a_size: usize,
    abs_cap: usize,
) -> Result<PhaseTwo> {
    f_t.check_same(x)?;
    check_fraction("a", a)?;
    let n = x.modulus();
    let target = (1.0 - 5.0 * a) * (d as f64 + 1.0) * a_size as f64 / 2.0;
    let mut y = restricted_sumset(f_t);
    let mut added = vec![];
    let mut gains = vec![];
    let (mut stalled, mut capped) = (false, false);
    while (y.len() as f64) < target {
        if added.len() >= abs_cap {
            capped = true;
            break;
        }
        let mut best: Option<(usize, usize, ZnSet)> = None;
        for v in x.iter() {
            let tr = f_t.translate(v);
            let gain = tr.count_outside(&y);
            if best.as_ref().is_none_or(|b| gain > b.1) {
                best = Some((v, gain, tr));
            }
        }
        match best {
            Some((v, gain, tr)) if gain > 0 => {
                y.absorb(&tr);
                added.push(v);
                gains.push(gain);
            }
            _ => {
                stalled = true;
                break;
            }
        }
    }
    Ok(PhaseTwo {
        added: ZnSet::new(n, added)?,
        gains,
        covered: y.len(),
        target,
        promised_gain: a / 2.0 * ((d * a_size) as f64).sqrt(),
        reached: y.len() as f64 >= target,
        stalled,
        capped,
    })
}

/// Knobs for [`fingerprint_pipeline`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PipelineConfig {
    pub a: f64,
    /// fingerprint size constant; Phase I budgets are `2 C d`
    pub c: usize,
    /// constant in the doubling hypothesis `K <= xi |A| / ln^2 |A|`
    pub xi: f64,
    /// most Phase II additions; `None` means `|X|`
    pub phase_two_cap: Option<usize>,
}

impl PipelineConfig {
    pub fn new(a: f64) -> Self {
        PipelineConfig { a, c: 2, xi: 1.0, phase_two_cap: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FingerprintReport {
    pub a_set: ZnSet,
    pub config: PipelineConfig,
    #[serde(serialize_with = "ser_ratio")]
    pub sigma: Ratio<usize>,
    /// `K <= xi |A| / ln^2 |A|`
    pub doubling_hypothesis: bool,
    pub x: ZnSet,
    pub robust_rounds: usize,
    pub round_bound: f64,
    pub epsilon: f64,
    /// `epsilon > 4 C sqrt(K / |X|)`, needed for Phase I to stay robust
    pub epsilon_condition: bool,
    pub d: usize,
    pub phase_one: PhaseOne,
    pub f_t: ZnSet,
    pub phase_two: PhaseTwo,
    /// `ceil((C + 2/a) sqrt(d |A|))`
    pub padding_goal: usize,
    /// the padding goal exceeded `|X|`
    pub padding_capped: bool,
    pub f: ZnSet,
    /// `|F +^ F|`
    pub achieved: usize,
    /// `(1 - a)(d + 1)|A| / 2`
    pub target: f64,
    pub ratio: f64,
    /// `|X| >= (1 - a)|A|`
    pub retained_enough: bool,
}

/// Robust subset, Phase I, Phase II and padding, with every quantity
/// reported against its target.
pub fn fingerprint_pipeline(a_set: &ZnSet, cfg: PipelineConfig) -> Result<FingerprintReport> {
    let a = cfg.a;
    check_fraction("a", a)?;
    if !(cfg.xi > 0.0) {
        return param(format!("xi must be positive, got {}", cfg.xi));
    }
    let m = a_set.len();
    let sigma = doubling_sigma(a_set)?;
    let k = *sigma.numer() as f64 / *sigma.denom() as f64;
    let ln_m = (m as f64).ln();
    let doubling_hypothesis = k <= cfg.xi * m as f64 / (ln_m * ln_m);

    let robust = robust_subset(a_set, a)?;
    let x = robust.x;
    let d = freiman_dimension(&x)?;
    let one = phase_one(&x, a, cfg.c)?;
    let n = a_set.modulus();
    let mut f_t = ZnSet::empty(n)?;
    for t in &one.parts {
        f_t.absorb(t);
    }
    let two = phase_two(&f_t, &x, d, a, m, cfg.phase_two_cap.unwrap_or(x.len()))?;
    let mut f = f_t.union(&two.added)?;

    let raw_goal = ((cfg.c as f64 + 2.0 / a) * ((d * m) as f64).sqrt()).ceil() as usize;
    let padding_capped = raw_goal > x.len();
    let padding_goal = raw_goal.min(x.len());
    if f.len() < padding_goal {
        let missing = padding_goal - f.len();
        for v in x.difference(&f)?.iter().take(missing).collect::<Vec<_>>() {
            f = f.with(v)?;
        }
    }

    let achieved = restricted_sumset(&f).len();
    let target = fingerprint_target(a, d, m);
    Ok(FingerprintReport {
        a_set: a_set.clone(),
        config: cfg,
        sigma,
        doubling_hypothesis,
        epsilon_condition: robust.epsilon > 4.0 * cfg.c as f64 * (k / x.len() as f64).sqrt(),
        retained_enough: x.len() as f64 >= (1.0 - a) * m as f64 - 1e-9,
        robust_rounds: robust.rounds,
        round_bound: robust.round_bound,
        epsilon: robust.epsilon,
        x,
        d,
        phase_one: one,
        f_t,
        phase_two: two,
        padding_goal,
        padding_capped,
        f,
        achieved,
        target,
        ratio: achieved as f64 / target,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::freiman::{is_freiman_robust, RobustnessParams};

    fn set(n: usize, xs: &[usize]) -> ZnSet {
        ZnSet::new(n, xs.iter().copied()).unwrap()
    }

    #[test]
    fn greedy_selection_examples() {
        let (t, trace) = greedy_translate_selection(&set(7, &[0, 1]), &set(7, &[0, 1, 2]), 1).unwrap();
        assert_eq!(sumset(&t, &set(7, &[0, 1, 2])).unwrap().len(), 3);
        assert_eq!(trace.gains, vec![3]);

        let tp = set(7, &[0, 1]);
        let (t, trace) = greedy_translate_selection(&tp, &set(7, &[0, 1, 2]), 2).unwrap();
        assert_eq!(t, tp);
        assert_eq!(trace.gains.iter().sum::<usize>(), 4);

        let (t, _) = greedy_translate_selection(&set(100, &[0, 3]), &set(100, &[0, 1]), 1).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(sumset(&t, &set(100, &[0, 1])).unwrap().len(), 2);

        assert!(greedy_translate_selection(&tp, &set(7, &[0]), 0).is_err());
        assert!(greedy_translate_selection(&tp, &set(7, &[0]), 3).is_err());
        assert!(greedy_translate_selection(&tp, &set(8, &[0]), 1).is_err());
    }

    #[test]
    fn greedy_prefers_lowest_residue_on_ties() {
        let (t, trace) = greedy_translate_selection(&set(100, &[3, 0]), &set(100, &[0, 1]), 1).unwrap();
        assert_eq!(t.to_vec(), vec![0]);
        assert_eq!(trace.picks, vec![0]);
    }

    #[test]
    fn fingerprint_examples() {
        let x = set(101, &[0, 1, 3]);
        assert_eq!(freiman_dimension(&x).unwrap(), 2);
        let fp = find_fingerprint(&x, 2, SearchMode::Exhaustive).unwrap();
        assert_eq!(fp.achieved, 5);
        assert_eq!(fp.t.to_vec(), vec![0, 1]);
        assert!(fp.achieved as f64 >= fingerprint_target(0.1, 2, 3));
        assert!((fingerprint_target(0.1, 2, 3) - 4.05).abs() < 1e-12);

        let fp = find_fingerprint(&set(101, &[0]), 1, SearchMode::Greedy).unwrap();
        assert_eq!((fp.t.to_vec(), fp.achieved), (vec![0], 1));

        let ap = ZnSet::new(101, 0..10).unwrap();
        let fp = find_fingerprint(&ap, 2, SearchMode::Greedy).unwrap();
        assert!(fp.achieved >= 11);
        assert!(fp.achieved as f64 >= fingerprint_target(0.1, 1, 10));
    }

    #[test]
    fn exhaustive_cap_refuses() {
        let x = ZnSet::new(1009, 0..60).unwrap();
        assert!(matches!(find_fingerprint(&x, 10, SearchMode::Exhaustive), Err(Error::Refusal(_))));
        assert!(find_fingerprint(&x, 0, SearchMode::Greedy).is_err());
    }

    #[test]
    fn exhaustive_dominates_greedy() {
        for seed in 0..20 {
            let x = crate::zn::sample_p_random(61, 0.15, seed).unwrap();
            if x.is_empty() {
                continue;
            }
            for budget in 1..=3 {
                let g = find_fingerprint(&x, budget, SearchMode::Greedy).unwrap();
                let e = find_fingerprint(&x, budget, SearchMode::Exhaustive).unwrap();
                assert!(e.achieved >= g.achieved);
                assert_eq!(sumset(&e.t, &x).unwrap().len(), e.achieved);
            }
        }
    }

    #[test]
    fn robust_subset_examples() {
        let ap = set(1009, &[0, 1, 2, 3]);
        let r = robust_subset(&ap, 0.3).unwrap();
        assert_eq!((r.x.clone(), r.rounds), (ap, 0));

        let sidon = set(1009, &[0, 1, 3, 7, 12]);
        let r = robust_subset_with(&sidon, 0.5, 0.1).unwrap();
        assert_eq!((r.x.clone(), r.rounds), (sidon.clone(), 0));

        let r = robust_subset_with(&sidon, 0.4, 0.25).unwrap();
        assert!(is_freiman_robust(&r.x, RobustnessParams::new(0.25, 0.4).unwrap()).unwrap());
        assert!(r.rounds as f64 <= r.round_bound);
    }

    #[test]
    fn robust_subset_drops_an_outlier() {
        // an AP plus one far point has dimension 2; dropping the point gives 1
        let a = ZnSet::new(1009, (0..9).chain([500])).unwrap();
        assert_eq!(freiman_dimension(&a).unwrap(), 2);
        let r = robust_subset_with(&a, 0.4, 0.15).unwrap();
        assert_eq!(r.rounds, 1);
        assert_eq!(r.x, ZnSet::new(1009, 0..9).unwrap());
    }

    #[test]
    fn phase_one_examples() {
        let ap = ZnSet::new(1009, 0..16).unwrap();
        let one = phase_one(&ap, 0.2, 2).unwrap();
        assert_eq!((one.d, one.rounds_planned, one.parts.len()), (1, 4, 4));
        for (i, ti) in one.parts.iter().enumerate() {
            assert!(ti.len() <= 4);
            for tj in &one.parts[i + 1..] {
                assert!(ti.is_disjoint(tj).unwrap());
            }
        }

        let single = phase_one(&set(1009, &[5]), 0.2, 2).unwrap();
        assert_eq!(single.parts, vec![set(1009, &[5])]);

        let sidon = set(1009, &[0, 1, 3, 7, 12, 20]);
        let one = phase_one(&sidon, 0.2, 1).unwrap();
        assert_eq!((one.d, one.parts.len()), (5, 1));
        assert_eq!(one.parts[0], sidon);
    }

    #[test]
    fn phase_two_examples() {
        // Y starts as {1}; x = 2 covers {2, 3}, then x = 0 covers {0}
        let two = phase_two(&set(101, &[0, 1]), &set(101, &[0, 1, 2, 3]), 1, 0.01, 4, 10).unwrap();
        assert_eq!(two.added.to_vec(), vec![0, 2]);
        assert_eq!(two.gains, vec![2, 1]);
        assert_eq!(two.covered, 4);
        assert!(two.reached && !two.stalled && !two.capped);

        let done = phase_two(&set(101, &[0, 1, 2]), &set(101, &[0, 1, 2]), 1, 0.2, 3, 10).unwrap();
        assert!(done.added.is_empty() && done.reached);

        let ft = set(101, &[0, 1]);
        let stall = phase_two(&ft, &ft, 5, 0.01, 40, 10).unwrap();
        assert!(stall.stalled && !stall.reached);
        assert!(stall.gains.iter().all(|&g| g > 0));

        let capped = phase_two(&ft, &ZnSet::new(101, 0..50).unwrap(), 5, 0.01, 40, 1).unwrap();
        assert!(capped.capped && capped.added.len() == 1);
    }

    fn check_structure(r: &FingerprintReport) {
        assert!(r.f.is_subset(&r.x).unwrap());
        assert!(r.x.is_subset(&r.a_set).unwrap());
        assert!(r.f_t.is_subset(&r.f).unwrap());
        assert_eq!(r.achieved, restricted_sumset(&r.f).len());
        assert!((r.ratio * r.target - r.achieved as f64).abs() < 1e-9);
    }

    #[test]
    fn pipeline_examples() {
        let ap = ZnSet::new(1009, 0..16).unwrap();
        let r = fingerprint_pipeline(&ap, PipelineConfig::new(0.2)).unwrap();
        check_structure(&r);
        assert_eq!(r.d, 1);
        assert!(r.retained_enough);

        let sidon = set(1009, &[0, 1, 3, 7, 12]);
        let r = fingerprint_pipeline(&sidon, PipelineConfig::new(0.3)).unwrap();
        check_structure(&r);
        assert_eq!(r.d, 4);
        assert!((r.target - 8.75).abs() < 1e-12);
        assert!(r.achieved <= 10);

        let one = set(1009, &[7]);
        let r = fingerprint_pipeline(&one, PipelineConfig::new(0.1)).unwrap();
        check_structure(&r);
        assert_eq!((r.f.clone(), r.x.clone(), r.achieved), (one.clone(), one, 0));
    }
}
