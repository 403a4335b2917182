//! Exact rank of small integer matrices by fraction-free (Bareiss)
//! elimination.
//!
//! Elimination runs in `i128` with checked arithmetic and restarts in
//! `BigInt` if any intermediate overflows. Every division in the Bareiss
//! recurrence is exact, so neither path ever rounds.

use num_bigint::BigInt;
use num_traits::{One, Zero};

trait Exact: Clone {
    fn from_i64(x: i64) -> Self;
    fn is_zero(&self) -> bool;
    fn one() -> Self;
    /// `(a*b - c*d) / e`, or `None` on overflow.
    fn cross_div(a: &Self, b: &Self, c: &Self, d: &Self, e: &Self) -> Option<Self>;
}

impl Exact for i128 {
    fn from_i64(x: i64) -> Self {
        x as i128
    }
    fn is_zero(&self) -> bool {
        *self == 0
    }
    fn one() -> Self {
        1
    }
    fn cross_div(a: &Self, b: &Self, c: &Self, d: &Self, e: &Self) -> Option<Self> {
        let left = a.checked_mul(*b)?;
        let right = c.checked_mul(*d)?;
        Some(left.checked_sub(right)? / e)
    }
}

impl Exact for BigInt {
    fn from_i64(x: i64) -> Self {
        BigInt::from(x)
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn one() -> Self {
        One::one()
    }
    fn cross_div(a: &Self, b: &Self, c: &Self, d: &Self, e: &Self) -> Option<Self> {
        Some((a * b - c * d) / e)
    }
}

fn bareiss<T: Exact>(rows: &[Vec<i64>], cols: usize) -> Option<usize> {
    let mut m: Vec<Vec<T>> =
        rows.iter().map(|r| r.iter().map(|&x| T::from_i64(x)).collect()).collect();
    let mut rank = 0;
    let mut prev = T::one();
    for col in 0..cols {
        let Some(pivot) = (rank..m.len()).find(|&r| !m[r][col].is_zero()) else {
            continue;
        };
        m.swap(rank, pivot);
        let (top, rest) = m.split_at_mut(rank + 1);
        let prow = &top[rank];
        for row in rest.iter_mut() {
            for j in (col + 1)..cols {
                row[j] = T::cross_div(&prow[col], &row[j], &row[col], &prow[j], &prev)?;
            }
            row[col] = T::from_i64(0);
        }
        prev = m[rank][col].clone();
        rank += 1;
        if rank == m.len() {
            break;
        }
    }
    Some(rank)
}

/// Rank over the rationals of an integer matrix given as rows of length `cols`.
pub fn integer_rank(rows: &[Vec<i64>], cols: usize) -> usize {
    debug_assert!(rows.iter().all(|r| r.len() == cols));
    match bareiss::<i128>(rows, cols) {
        Some(r) => r,
        None => bareiss::<BigInt>(rows, cols).expect("big integer elimination cannot overflow"),
    }
}
