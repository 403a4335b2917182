//! Union-bound sums over the three doubling regimes, evaluated in log space.
//!
//! Each sum runs over an integer index (`d` for small doubling, `m` for the
//! other two). Real limits are rounded outward: the lower limit becomes
//! `max(1, ceil(lo))` and the upper limit `ceil(hi)`.

use serde::Serialize;

use crate::error::{param, Result};
use crate::logmath::{ln_binomial, LogSum};

/// `coefficient * ln n / ln(1/(1-p))` with the usual `2 + 4 delta` coefficient.
pub fn compute_k(n: u64, p: f64, delta: f64) -> Result<f64> {
    compute_k_with(n, p, 2.0 + 4.0 * delta)
}

pub fn compute_k_with(n: u64, p: f64, coefficient: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return param(format!("p must lie in (0, 1), got {p}"));
    }
    if n < 2 {
        return param(format!("n must be at least 2, got {n}"));
    }
    if !(coefficient > 0.0) {
        return param(format!("k coefficient must be positive, got {coefficient}"));
    }
    Ok(coefficient * (n as f64).ln() / -(-p).ln_1p())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundParams {
    pub n: u64,
    pub p: f64,
    pub delta: f64,
    /// slack in the small-doubling exponent, in `(0, 1/3)`
    pub alpha_slack: f64,
    /// extra exponent on `k^(1/4)` in the small-doubling terms
    pub eps_exponent: f64,
    /// constant in front of `sqrt(d k)` for the fingerprint size
    pub c_f: f64,
    /// coefficient in the definition of `k`; `None` means `2 + 4 delta`
    pub k_coefficient: Option<f64>,
}

impl BoundParams {
    pub fn new(n: u64, p: f64, delta: f64) -> Self {
        BoundParams { n, p, delta, alpha_slack: 0.05, eps_exponent: 0.0, c_f: 1.0, k_coefficient: None }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return param(format!("n must be at least 3, got {}", self.n));
        }
        if !(self.p > 0.0 && self.p < 1.0) {
            return param(format!("p must lie in (0, 1), got {}", self.p));
        }
        if !(self.delta >= 0.0) {
            return param(format!("delta must be nonnegative, got {}", self.delta));
        }
        if !(self.alpha_slack > 0.0 && self.alpha_slack < 1.0 / 3.0) {
            return param(format!("alpha slack must lie in (0, 1/3), got {}", self.alpha_slack));
        }
        if !(self.eps_exponent >= 0.0) {
            return param(format!("eps exponent must be nonnegative, got {}", self.eps_exponent));
        }
        if !(self.c_f > 0.0) {
            return param(format!("C_f must be positive, got {}", self.c_f));
        }
        Ok(())
    }

    pub fn k_coefficient(&self) -> f64 {
        self.k_coefficient.unwrap_or(2.0 + 4.0 * self.delta)
    }

    pub fn k(&self) -> Result<f64> {
        self.validate()?;
        compute_k_with(self.n, self.p, self.k_coefficient())
    }

    fn ln_n(&self) -> f64 {
        (self.n as f64).ln()
    }

    /// `ln(1 - p)`, negative
    fn ln_q(&self) -> f64 {
        (-self.p).ln_1p()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SumReport {
    pub log_sum: f64,
    /// `(index, ln term)`
    pub terms: Vec<(u64, f64)>,
    pub empty_range: bool,
    /// the sum is below 1
    pub vanishes: bool,
}

fn index_range(lo: f64, hi: f64) -> (u64, u64) {
    let lo = lo.ceil().max(1.0) as u64;
    let hi = hi.ceil().max(0.0) as u64;
    (lo, hi)
}

fn evaluate(lo: f64, hi: f64, term: impl Fn(u64) -> f64) -> SumReport {
    let (lo, hi) = index_range(lo, hi);
    let terms: Vec<(u64, f64)> = (lo..=hi).map(|i| (i, term(i))).collect();
    let mut acc = LogSum::default();
    for &(_, t) in &terms {
        acc.push(t);
    }
    let log_sum = acc.value();
    SumReport { log_sum, empty_range: terms.is_empty(), vanishes: log_sum < 0.0, terms }
}

/// Small doubling: `d` from 1 to `4 k^(1/4)`, terms
/// `n^(d+1) C(k^(1/4+eps), d-1) C(e^(k^(1/4+eps)), C_f sqrt(d k)) (1-p)^((1-2 alpha)(d+1)k/2)`.
pub fn x1_log_bound(params: &BoundParams) -> Result<SumReport> {
    let k = params.k()?;
    let (ln_n, ln_q) = (params.ln_n(), params.ln_q());
    let levels = k.powf(0.25 + params.eps_exponent);
    let pool = levels.exp();
    let slack = 1.0 - 2.0 * params.alpha_slack;
    Ok(evaluate(1.0, 4.0 * k.powf(0.25), |d| {
        let d = d as f64;
        (d + 1.0) * ln_n
            + ln_binomial(levels, d - 1.0)
            + ln_binomial(pool, params.c_f * (d * k).sqrt())
            + slack * (d + 1.0) * k / 2.0 * ln_q
    }))
}

/// Large doubling: `m` from `k^(5/4)` to `delta k^2 / 10`, terms
/// `n^((2+2 delta) m / k) k^(4k) (1-p)^m`.
pub fn x2_log_bound(params: &BoundParams) -> Result<SumReport> {
    let k = params.k()?;
    let (ln_n, ln_q, delta) = (params.ln_n(), params.ln_q(), params.delta);
    Ok(evaluate(k.powf(1.25), delta * k * k / 10.0, |m| {
        let m = m as f64;
        (2.0 + 2.0 * delta) * (m / k) * ln_n
            + 4.0 * k * k.ln()
            + ((1.0 - delta / 2.0) * m + delta * m / 2.0) * ln_q
    }))
}

/// Linear doubling: `m` from `delta k / 10` to `k`, terms
/// `n^((2+2 delta) m / k) (1-p)^m`.
pub fn x3_log_bound(params: &BoundParams) -> Result<SumReport> {
    let k = params.k()?;
    let (ln_n, ln_q, delta) = (params.ln_n(), params.ln_q(), params.delta);
    Ok(evaluate(delta * k / 10.0, k, |m| {
        let m = m as f64;
        (2.0 + 2.0 * delta) * (m / k) * ln_n + m * ln_q
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub params: BoundParams,
    pub k: f64,
    pub x1: SumReport,
    pub x2: SumReport,
    pub x3: SumReport,
    pub notes: Vec<String>,
}

pub fn bound_report(params: &BoundParams) -> Result<BoundReport> {
    let k = params.k()?;
    let mut notes = vec![
        "1-p is taken as n^(-(2+4delta)/k), the form consistent with the definition of k".to_string(),
    ];
    if params.k_coefficient.is_some_and(|c| (c - (2.0 + 4.0 * params.delta)).abs() > 1e-12) {
        notes.push(format!("k coefficient overridden to {}", params.k_coefficient()));
    }
    let x2 = x2_log_bound(params)?;
    if x2.empty_range {
        notes.push("large-doubling range k^(5/4)..delta k^2/10 is empty".to_string());
    }
    Ok(BoundReport { params: *params, k, x1: x1_log_bound(params)?, x2, x3: x3_log_bound(params)?, notes })
}

/// Largest `t` with `C(n, t) (1-p)^C(t, 2) >= 1`: the first-moment
/// estimate of the independence number of `G(n, p)`.
pub fn expected_alpha_gnp(n: u64, p: f64) -> Result<u64> {
    if !(p > 0.0 && p < 1.0) {
        return param(format!("p must lie in (0, 1), got {p}"));
    }
    if n == 0 {
        return param("n must be positive");
    }
    let ln_q = (-p).ln_1p();
    let nf = n as f64;
    // the log-expectation is concave in t and positive at t = 1
    let mut t = 1;
    while t < n {
        let next = (t + 1) as f64;
        if ln_binomial(nf, next) + next * (next - 1.0) / 2.0 * ln_q < 0.0 {
            break;
        }
        t += 1;
    }
    Ok(t)
}
