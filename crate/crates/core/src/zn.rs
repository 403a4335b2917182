//! Subsets of the cyclic group Z_n.
//!
//! A [`ZnSet`] is a dense bit vector over `0..n`. All set algebra, including
//! the sumset kernels, works word-at-a-time: translating a set by `a` is a
//! cyclic rotation of its mask, read out of a doubled copy of the mask.

use std::fmt;

use num_rational::Ratio;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::error::{param, Error, Result};

#[inline]
pub(crate) fn words_for(n: usize) -> usize {
    n.div_ceil(64)
}

/// Reads 64 bits starting at bit `pos`. `dd` must have a word past `pos / 64`.
#[inline(always)]
pub(crate) fn extract_word(dd: &[u64], pos: usize) -> u64 {
    let q = pos >> 6;
    let r = pos & 63;
    if r == 0 {
        dd[q]
    } else {
        (dd[q] >> r) | (dd[q + 1] << (64 - r))
    }
}

/// Iterator over set bits of a word slice, ascending.
pub(crate) struct BitIter<'a> {
    words: &'a [u64],
    idx: usize,
    cur: u64,
}

impl<'a> BitIter<'a> {
    pub(crate) fn new(words: &'a [u64]) -> Self {
        let cur = words.first().copied().unwrap_or(0);
        BitIter { words, idx: 0, cur }
    }
}

impl Iterator for BitIter<'_> {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        loop {
            if self.cur != 0 {
                let tz = self.cur.trailing_zeros() as usize;
                self.cur &= self.cur - 1;
                return Some(self.idx * 64 + tz);
            }
            self.idx += 1;
            if self.idx >= self.words.len() {
                return None;
            }
            self.cur = self.words[self.idx];
        }
    }
}

/// A subset of Z_n.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct ZnSet {
    n: usize,
    words: Vec<u64>,
    len: usize,
}

impl ZnSet {
    pub fn empty(n: usize) -> Result<Self> {
        if n == 0 {
            return param("modulus must be positive");
        }
        Ok(ZnSet { n, words: vec![0; words_for(n)], len: 0 })
    }

    pub fn full(n: usize) -> Result<Self> {
        let mut s = Self::empty(n)?;
        for w in s.words.iter_mut() {
            *w = !0;
        }
        s.trim();
        Ok(s)
    }

    /// Builds a set from residues, each of which must lie in `0..n`.
    pub fn new(n: usize, members: impl IntoIterator<Item = usize>) -> Result<Self> {
        let mut s = Self::empty(n)?;
        for m in members {
            if m >= n {
                return param(format!("residue {m} out of range for modulus {n}"));
            }
            s.words[m >> 6] |= 1 << (m & 63);
        }
        s.recount();
        Ok(s)
    }

    /// Builds a set from arbitrary integers, reducing each modulo `n`.
    pub fn from_integers(n: usize, members: impl IntoIterator<Item = i64>) -> Result<Self> {
        if n == 0 {
            return param("modulus must be positive");
        }
        let n_i = n as i64;
        Self::new(n, members.into_iter().map(|x| x.rem_euclid(n_i) as usize))
    }

    pub(crate) fn from_words(n: usize, words: Vec<u64>) -> Self {
        debug_assert_eq!(words.len(), words_for(n));
        let mut s = ZnSet { n, words, len: 0 };
        s.trim();
        s
    }

    fn trim(&mut self) {
        let rem = self.n % 64;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
        self.recount();
    }

    fn recount(&mut self) {
        self.len = self.words.iter().map(|w| w.count_ones() as usize).sum();
    }

    #[inline]
    pub fn modulus(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.len
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn contains(&self, x: usize) -> bool {
        x < self.n && self.words[x >> 6] >> (x & 63) & 1 == 1
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        BitIter::new(&self.words)
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.iter().collect()
    }

    pub(crate) fn words(&self) -> &[u64] {
        &self.words
    }

    pub fn min(&self) -> Option<usize> {
        self.iter().next()
    }

    pub(crate) fn check_same(&self, other: &ZnSet) -> Result<()> {
        if self.n != other.n {
            return Err(Error::ModulusMismatch { left: self.n, right: other.n });
        }
        Ok(())
    }

    pub fn with(&self, x: usize) -> Result<ZnSet> {
        if x >= self.n {
            return param(format!("residue {x} out of range for modulus {}", self.n));
        }
        let mut s = self.clone();
        if !s.contains(x) {
            s.words[x >> 6] |= 1 << (x & 63);
            s.len += 1;
        }
        Ok(s)
    }

    pub fn without(&self, x: usize) -> ZnSet {
        let mut s = self.clone();
        if s.contains(x) {
            s.words[x >> 6] &= !(1 << (x & 63));
            s.len -= 1;
        }
        s
    }

    fn zip_with(&self, other: &ZnSet, f: impl Fn(u64, u64) -> u64) -> Result<ZnSet> {
        self.check_same(other)?;
        let words = self.words.iter().zip(&other.words).map(|(a, b)| f(*a, *b)).collect();
        Ok(ZnSet::from_words(self.n, words))
    }

    pub fn union(&self, other: &ZnSet) -> Result<ZnSet> {
        self.zip_with(other, |a, b| a | b)
    }

    pub fn intersection(&self, other: &ZnSet) -> Result<ZnSet> {
        self.zip_with(other, |a, b| a & b)
    }

    pub fn difference(&self, other: &ZnSet) -> Result<ZnSet> {
        self.zip_with(other, |a, b| a & !b)
    }

    /// `|self \ other|` without allocating. Moduli must agree.
    pub(crate) fn count_outside(&self, other: &ZnSet) -> usize {
        debug_assert_eq!(self.n, other.n);
        self.words.iter().zip(&other.words).map(|(a, b)| (a & !b).count_ones() as usize).sum()
    }

    /// In-place union. Moduli must agree.
    pub(crate) fn absorb(&mut self, other: &ZnSet) {
        debug_assert_eq!(self.n, other.n);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
        self.recount();
    }

    pub fn complement(&self) -> ZnSet {
        ZnSet::from_words(self.n, self.words.iter().map(|w| !w).collect())
    }

    pub fn is_subset(&self, other: &ZnSet) -> Result<bool> {
        self.check_same(other)?;
        Ok(self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0))
    }

    pub fn is_disjoint(&self, other: &ZnSet) -> Result<bool> {
        self.check_same(other)?;
        Ok(self.words.iter().zip(&other.words).all(|(a, b)| a & b == 0))
    }

    /// `{x + c mod n : x in self}`.
    pub fn translate(&self, c: usize) -> ZnSet {
        let c = c % self.n;
        let dd = self.doubled();
        let nw = self.words.len();
        let start = self.n - c;
        let words = (0..nw).map(|w| extract_word(&dd, start + 64 * w)).collect();
        ZnSet::from_words(self.n, words)
    }

    /// `{u * x mod n : x in self}`.
    pub fn dilate(&self, u: usize) -> ZnSet {
        let n = self.n as u128;
        let u = u as u128 % n;
        let members = self.iter().map(|x| ((x as u128 * u) % n) as usize);
        ZnSet::new(self.n, members).expect("reduced residues are in range")
    }

    /// Mask followed by a second copy of itself, with one spare word, so that
    /// any cyclic window of `n` bits can be read with [`extract_word`].
    pub(crate) fn doubled(&self) -> Vec<u64> {
        let mut dd = vec![0u64; words_for(2 * self.n) + 1];
        dd[..self.words.len()].copy_from_slice(&self.words);
        let q = self.n >> 6;
        let r = self.n & 63;
        for (i, &w) in self.words.iter().enumerate() {
            dd[i + q] |= w << r;
            if r != 0 {
                dd[i + q + 1] |= w >> (64 - r);
            }
        }
        dd
    }
}

impl fmt::Debug for ZnSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for ZnSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, x) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{x}")?;
        }
        write!(f, "}} (mod {})", self.n)
    }
}

impl Serialize for ZnSet {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("ZnSet", 2)?;
        st.serialize_field("n", &self.n)?;
        st.serialize_field("members", &self.to_vec())?;
        st.end()
    }
}

/// Samples a p-random subset of Z_n: each residue is kept independently with
/// probability `p`.
///
/// Residue `i` is kept iff the `i`-th output of a ChaCha20 stream seeded with
/// `seed`, shifted down to 53 bits, is below `floor(p * 2^53)`. The stream is
/// platform independent, so identical `(n, p, seed)` give identical sets.
pub fn sample_p_random(n: usize, p: f64, seed: u64) -> Result<ZnSet> {
    if n < 2 {
        return param(format!("sampling needs n >= 2, got {n}"));
    }
    if !(p > 0.0 && p < 1.0) {
        return param(format!("probability must lie in (0, 1), got {p}"));
    }
    let threshold = (p * (1u64 << 53) as f64) as u64;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut words = vec![0u64; words_for(n)];
    for i in 0..n {
        if rng.next_u64() >> 11 < threshold {
            words[i >> 6] |= 1 << (i & 63);
        }
    }
    Ok(ZnSet::from_words(n, words))
}

/// `A + B = {a + b mod n}`.
pub fn sumset(a: &ZnSet, b: &ZnSet) -> Result<ZnSet> {
    a.check_same(b)?;
    // rotate the larger set once per element of the smaller one
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let n = a.n;
    let nw = a.words.len();
    let dd = large.doubled();
    let mut out = vec![0u64; nw];
    for s in small.iter() {
        let start = n - s;
        for (w, o) in out.iter_mut().enumerate() {
            *o |= extract_word(&dd, start + 64 * w);
        }
    }
    Ok(ZnSet::from_words(n, out))
}

/// `A +^ A = {a + a' mod n : a != a'}`. Empty when `|A| <= 1`.
pub fn restricted_sumset(a: &ZnSet) -> ZnSet {
    let n = a.n;
    let nw = a.words.len();
    let dd = a.doubled();
    let mut out = vec![0u64; nw];
    for x in a.iter() {
        let start = n - x;
        let diag = (2 * x) % n;
        for (w, o) in out.iter_mut().enumerate() {
            let mut t = extract_word(&dd, start + 64 * w);
            if w == diag >> 6 {
                t &= !(1u64 << (diag & 63));
            }
            *o |= t;
        }
    }
    ZnSet::from_words(n, out)
}

/// The doubling constant `|A + A| / |A|`, as an exact fraction.
pub fn doubling_sigma(a: &ZnSet) -> Result<Ratio<usize>> {
    if a.is_empty() {
        return param("doubling constant of the empty set is undefined");
    }
    let ss = sumset(a, a)?;
    Ok(Ratio::new(ss.len(), a.len()))
}

/// Doubling regimes used to split k-sets in the union bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DoublingRegime {
    /// `sigma < k^(1/4)`
    Small,
    /// `k^(1/4) <= sigma < delta k / 10`
    Large,
    /// `sigma >= delta k / 10`
    Linear,
}

impl fmt::Display for DoublingRegime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DoublingRegime::Small => "X1",
            DoublingRegime::Large => "X2",
            DoublingRegime::Linear => "X3",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DoublingClass {
    pub regime: DoublingRegime,
    pub sigma: Ratio<usize>,
    pub k: f64,
    pub delta: f64,
}

/// Classifies by `sigma` alone; `sigma` is compared as `num < den * bound`.
pub fn classify_sigma(sigma: Ratio<usize>, k: f64, delta: f64) -> Result<DoublingClass> {
    if !(k > 0.0 && k.is_finite()) {
        return param(format!("k must be positive, got {k}"));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return param(format!("delta must be positive, got {delta}"));
    }
    let num = *sigma.numer() as f64;
    let den = *sigma.denom() as f64;
    let quarter = k.sqrt().sqrt();
    let linear = delta * k / 10.0;
    let regime = if num < den * quarter {
        DoublingRegime::Small
    } else if num < den * linear {
        DoublingRegime::Large
    } else {
        DoublingRegime::Linear
    };
    Ok(DoublingClass { regime, sigma, k, delta })
}

pub fn classify_doubling(a: &ZnSet, k: f64, delta: f64) -> Result<DoublingClass> {
    let sigma = doubling_sigma(a)?;
    classify_sigma(sigma, k, delta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn set(n: usize, xs: &[usize]) -> ZnSet {
        ZnSet::new(n, xs.iter().copied()).unwrap()
    }

    fn naive_sumset(a: &ZnSet, b: &ZnSet, distinct: bool) -> BTreeSet<usize> {
        let mut out = BTreeSet::new();
        for x in a.iter() {
            for y in b.iter() {
                if !distinct || x != y {
                    out.insert((x + y) % a.modulus());
                }
            }
        }
        out
    }

    #[test]
    fn construction_rejects_out_of_range() {
        assert!(ZnSet::new(5, [5]).is_err());
        assert!(ZnSet::empty(0).is_err());
        assert_eq!(ZnSet::from_integers(7, [-1, 8]).unwrap().to_vec(), vec![1, 6]);
    }

    #[test]
    fn sumset_examples() {
        let a = set(7, &[0, 1, 2]);
        assert_eq!(sumset(&a, &a).unwrap().to_vec(), vec![0, 1, 2, 3, 4]);
        let z5 = ZnSet::full(5).unwrap();
        assert_eq!(sumset(&z5, &z5).unwrap(), z5);
        let zero = set(13, &[0]);
        let b = set(13, &[2, 5, 11, 12]);
        assert_eq!(sumset(&zero, &b).unwrap(), b);
    }

    #[test]
    fn sumset_modulus_mismatch() {
        let a = set(7, &[0]);
        let b = set(8, &[0]);
        assert_eq!(sumset(&a, &b), Err(Error::ModulusMismatch { left: 7, right: 8 }));
    }

    #[test]
    fn restricted_sumset_examples() {
        assert_eq!(restricted_sumset(&set(7, &[0, 1, 2])).to_vec(), vec![1, 2, 3]);
        assert!(restricted_sumset(&set(11, &[3])).is_empty());
        assert_eq!(restricted_sumset(&set(7, &[1, 2, 4])).to_vec(), vec![3, 5, 6]);
    }

    #[test]
    fn restricted_sumset_keeps_doubles_with_other_representations() {
        // 2 = 2*1 = 0 + 2
        assert_eq!(restricted_sumset(&set(7, &[0, 1, 2])).to_vec(), vec![1, 2, 3]);
        // n even: 0 = 2*0 = 2*3 but 0 + 3 = 3 only
        assert_eq!(restricted_sumset(&set(6, &[0, 3])).to_vec(), vec![3]);
    }

    #[test]
    fn sigma_examples() {
        assert_eq!(doubling_sigma(&set(7, &[0, 1, 2])).unwrap(), Ratio::new(5, 3));
        assert_eq!(doubling_sigma(&ZnSet::full(5).unwrap()).unwrap(), Ratio::from_integer(1));
        assert_eq!(doubling_sigma(&set(101, &[0, 1, 3])).unwrap(), Ratio::from_integer(2));
        assert!(doubling_sigma(&ZnSet::empty(5).unwrap()).is_err());
    }

    #[test]
    fn classification_boundaries() {
        let one = Ratio::from_integer(1);
        let two = Ratio::from_integer(2);
        assert_eq!(classify_sigma(one, 16.0, 1.0).unwrap().regime, DoublingRegime::Small);
        // sigma = k^(1/4) = 2 is not Small; 2 >= 1.6 lands in Linear
        assert_eq!(classify_sigma(two, 16.0, 1.0).unwrap().regime, DoublingRegime::Linear);
        // half-open Large band
        assert_eq!(classify_sigma(two, 16.0, 10.0).unwrap().regime, DoublingRegime::Large);
        assert_eq!(
            classify_sigma(Ratio::from_integer(16), 16.0, 10.0).unwrap().regime,
            DoublingRegime::Linear
        );
        assert_eq!(
            classify_sigma(Ratio::from_integer(16), 16.0, 0.5).unwrap().regime,
            DoublingRegime::Linear
        );
        assert!(classify_sigma(one, 0.0, 1.0).is_err());
        assert!(classify_sigma(one, 16.0, -1.0).is_err());
    }

    #[test]
    fn sampling_contract() {
        let s = sample_p_random(5, 1.0 - 1e-12, 3).unwrap();
        assert_eq!(s.len(), 5);
        let a = sample_p_random(7, 0.5, 42).unwrap();
        let b = sample_p_random(7, 0.5, 42).unwrap();
        assert_eq!(a.to_vec(), b.to_vec());
        assert!(sample_p_random(7, 0.0, 1).is_err());
        assert!(sample_p_random(7, 1.0, 1).is_err());
        assert!(sample_p_random(7, f64::NAN, 1).is_err());
        assert!(sample_p_random(1, 0.5, 1).is_err());
    }

    #[test]
    fn sampling_concentration() {
        let n = 999_983;
        let s = sample_p_random(n, 0.5, 1).unwrap();
        let frac = s.len() as f64 / n as f64;
        assert!((0.498..=0.502).contains(&frac), "fraction {frac}");
    }

    #[test]
    fn translate_and_doubled_windows() {
        for n in [1usize, 5, 63, 64, 65, 127, 128, 200] {
            let a = ZnSet::new(n, (0..n).filter(|x| x % 3 != 1)).unwrap();
            for c in [0, 1, n / 2, n.saturating_sub(1), 77] {
                let t = a.translate(c);
                let want: Vec<usize> = {
                    let mut v: Vec<usize> = a.iter().map(|x| (x + c) % n).collect();
                    v.sort();
                    v
                };
                assert_eq!(t.to_vec(), want, "n={n} c={c}");
            }
        }
    }

    #[test]
    fn kernels_match_naive_on_awkward_moduli() {
        for n in [2usize, 3, 64, 65, 130, 191] {
            for seed in 0..4 {
                let a = sample_p_random(n, 0.3, seed).unwrap();
                let b = sample_p_random(n, 0.6, seed + 100).unwrap();
                let s: BTreeSet<usize> = sumset(&a, &b).unwrap().iter().collect();
                assert_eq!(s, naive_sumset(&a, &b, false));
                let r: BTreeSet<usize> = restricted_sumset(&a).iter().collect();
                assert_eq!(r, naive_sumset(&a, &a, true));
            }
        }
    }

    #[test]
    fn set_algebra() {
        let a = set(10, &[1, 2, 3]);
        let b = set(10, &[3, 4]);
        assert_eq!(a.union(&b).unwrap().to_vec(), vec![1, 2, 3, 4]);
        assert_eq!(a.intersection(&b).unwrap().to_vec(), vec![3]);
        assert_eq!(a.difference(&b).unwrap().to_vec(), vec![1, 2]);
        assert_eq!(a.complement().len(), 7);
        assert!(set(10, &[1, 3]).is_subset(&a).unwrap());
        assert!(!a.is_disjoint(&b).unwrap());
        assert_eq!(a.with(9).unwrap().len(), 4);
        assert_eq!(a.without(1).to_vec(), vec![2, 3]);
        assert_eq!(set(11, &[1, 2]).dilate(3).to_vec(), vec![3, 6]);
    }
}
