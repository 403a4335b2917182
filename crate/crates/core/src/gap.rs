//! Generalised arithmetic progressions in Z_n.
//!
//! Only shifted centred progressions are modelled:
//! `{v0 + n1 v1 + ... + nd vd : |ni| <= Ni}`. The text form is
//! `n;v0;v1,...,vd;N1,...,Nd`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::Serialize;

use crate::error::{param, refuse, Error, Result};
use crate::logmath::ln_binomial;
use crate::zn::{sumset, ZnSet};

/// Largest `size(P)` that [`Gap::elements`] will enumerate.
pub const ENUMERATION_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Gap {
    modulus: usize,
    base: usize,
    generators: Vec<usize>,
    radii: Vec<u64>,
}

impl Gap {
    pub fn new(modulus: usize, base: usize, generators: Vec<usize>, radii: Vec<u64>) -> Result<Self> {
        if modulus == 0 {
            return param("modulus must be positive");
        }
        if generators.is_empty() {
            return param("a progression needs at least one generator");
        }
        if generators.len() != radii.len() {
            return param(format!(
                "{} generators but {} radii",
                generators.len(),
                radii.len()
            ));
        }
        if base >= modulus || generators.iter().any(|&v| v >= modulus) {
            return param(format!("base and generators must be residues mod {modulus}"));
        }
        if radii.contains(&0) {
            return param("radii must be positive");
        }
        Ok(Gap { modulus, base, generators, radii })
    }

    pub fn modulus(&self) -> usize {
        self.modulus
    }

    pub fn base(&self) -> usize {
        self.base
    }

    pub fn generators(&self) -> &[usize] {
        &self.generators
    }

    pub fn radii(&self) -> &[u64] {
        &self.radii
    }

    pub fn dimension(&self) -> usize {
        self.generators.len()
    }

    pub fn is_centred(&self) -> bool {
        self.base == 0
    }

    /// `prod (2 N_i + 1)`, an upper bound on the number of elements.
    pub fn size(&self) -> BigUint {
        self.radii.iter().fold(BigUint::one(), |acc, &r| acc * (BigUint::from(r) * 2u32 + 1u32))
    }

    /// The element set. Refuses when `size(P)` exceeds [`ENUMERATION_CAP`].
    pub fn elements(&self) -> Result<ZnSet> {
        let size = self.size();
        if size > BigUint::from(ENUMERATION_CAP) {
            return refuse(format!("progression of size {size} exceeds the enumeration cap"));
        }
        let n = self.modulus;
        let mut acc = ZnSet::new(n, [self.base])?;
        for (&v, &r) in self.generators.iter().zip(&self.radii) {
            let r = r as i64;
            let v = v as i64;
            let line = ZnSet::from_integers(n, (-r..=r).map(|k| (k % n as i64) * v))?;
            acc = sumset(&acc, &line)?;
        }
        Ok(acc)
    }

    /// Whether `a` lies inside the progression.
    pub fn contains(&self, a: &ZnSet) -> Result<bool> {
        if a.modulus() != self.modulus {
            return Err(Error::ModulusMismatch { left: self.modulus, right: a.modulus() });
        }
        if a.is_empty() {
            return Ok(true);
        }
        a.is_subset(&self.elements()?)
    }

    /// Rounds every radius up to a power of two.
    pub fn normalize_pow2(&self) -> Gap {
        Gap { radii: self.radii.iter().map(|r| r.next_power_of_two()).collect(), ..self.clone() }
    }
}

impl fmt::Display for Gap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |xs: Vec<String>| xs.join(",");
        write!(
            f,
            "{};{};{};{}",
            self.modulus,
            self.base,
            join(self.generators.iter().map(|v| v.to_string()).collect()),
            join(self.radii.iter().map(|r| r.to_string()).collect())
        )
    }
}

impl FromStr for Gap {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(';').collect();
        if parts.len() != 4 {
            return param(format!("expected n;v0;v1,...;N1,..., got {s:?}"));
        }
        fn num<T: FromStr>(x: &str) -> Result<T> {
            x.trim().parse().map_err(|_| Error::Parameter(format!("not a number: {x:?}")))
        }
        fn list<T: FromStr>(x: &str) -> Result<Vec<T>> {
            x.split(',').map(num).collect()
        }
        Gap::new(num(parts[0])?, num(parts[1])?, list(parts[2])?, list(parts[3])?)
    }
}

/// `ln` of the number of `d`-progressions whose radii are powers of two,
/// given the natural log of the size budget.
///
/// The budget allows `B = floor(log2 budget)` doubling levels; splitting
/// them among `d` radii gives the `C(B, d - 1)` factor and the base plus `d`
/// generators give `n^(d+1)`.
pub fn log_count_gaps(n: u64, d: usize, log_size_budget: f64) -> Result<f64> {
    if !(log_size_budget >= 0.0) {
        return param(format!("log size budget must be nonnegative, got {log_size_budget}"));
    }
    let levels = (log_size_budget / std::f64::consts::LN_2 + 1e-12).floor() as u64;
    log_count_gaps_with_levels(n, d, levels)
}

/// As [`log_count_gaps`] with the number of levels `B` given directly.
pub fn log_count_gaps_with_levels(n: u64, d: usize, levels: u64) -> Result<f64> {
    if d == 0 {
        return param("dimension must be at least 1");
    }
    if n < 2 {
        return param("modulus must be at least 2");
    }
    let n = n.to_f64().expect("u64 fits f64");
    Ok((d as f64 + 1.0) * n.ln() + ln_binomial(levels as f64, d as f64 - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn element_examples() {
        let p = Gap::new(100, 0, vec![2], vec![3]).unwrap();
        assert_eq!(p.elements().unwrap().to_vec(), vec![0, 2, 4, 6, 94, 96, 98]);
        assert_eq!(p.size(), BigUint::from(7u32));
        assert!(p.is_centred());
        let q = Gap::new(100, 17, vec![0], vec![9]).unwrap();
        assert_eq!(q.elements().unwrap().to_vec(), vec![17]);
        let w = Gap::new(5, 0, vec![1], vec![2]).unwrap();
        assert_eq!(w.elements().unwrap(), ZnSet::full(5).unwrap());
    }

    #[test]
    fn containment_examples() {
        let p = Gap::new(100, 0, vec![2], vec![3]).unwrap();
        assert!(p.contains(&ZnSet::new(100, [0, 2, 4]).unwrap()).unwrap());
        assert!(!p.contains(&ZnSet::new(100, [1]).unwrap()).unwrap());
        assert!(p.contains(&ZnSet::empty(100).unwrap()).unwrap());
        assert!(p.contains(&ZnSet::empty(99).unwrap()).is_err());
    }

    #[test]
    fn normalization_examples() {
        let p = Gap::new(1000, 0, vec![1, 50], vec![3, 5]).unwrap();
        assert_eq!(p.normalize_pow2().radii(), &[4, 8]);
        let q = Gap::new(1000, 0, vec![1, 2, 3], vec![1, 2, 4]).unwrap();
        assert_eq!(q.normalize_pow2(), q);
        let r = Gap::new(100, 0, vec![2], vec![3]).unwrap();
        let big = r.normalize_pow2().elements().unwrap();
        assert_eq!(big.len(), 9);
        assert!(r.elements().unwrap().is_subset(&big).unwrap());
    }

    #[test]
    fn enumeration_cap() {
        let p = Gap::new(1_000_003, 0, vec![1, 1000], vec![5000, 5000]).unwrap();
        assert!(matches!(p.elements(), Err(Error::Refusal(_))));
    }

    #[test]
    fn text_form() {
        let p: Gap = "100;3;2,7;3,1".parse().unwrap();
        assert_eq!(p, Gap::new(100, 3, vec![2, 7], vec![3, 1]).unwrap());
        assert_eq!(p.to_string(), "100;3;2,7;3,1");
        assert!("100;3;2;".parse::<Gap>().is_err());
        assert!("100;3;2,7;3".parse::<Gap>().is_err());
        assert!("100;300;2;3".parse::<Gap>().is_err());
        assert!("100;3;2;0".parse::<Gap>().is_err());
    }

    #[test]
    fn counting_examples() {
        let ln_n = 1009f64.ln();
        assert!((log_count_gaps_with_levels(1009, 1, 10).unwrap() - 2.0 * ln_n).abs() < 1e-12);
        let d2 = log_count_gaps_with_levels(1009, 2, 10).unwrap();
        assert!((d2 - (3.0 * ln_n + 10f64.ln())).abs() < 1e-12);
        // 2^10 budget gives 10 levels
        assert!((log_count_gaps(1009, 2, 10.0 * std::f64::consts::LN_2).unwrap() - d2).abs() < 1e-12);
        assert!(log_count_gaps_with_levels(1009, 0, 10).is_err());
    }
}
