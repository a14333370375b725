//! Two-sided tail bounds for the thickness of an SVC complement.
//!
//! For `ω = R \ K` and `c0 = Leb(K)`:
//!
//! ```text
//! c * sum_{k >= n_lo(L)} r_k  <=  theta(L)  <=  C * sum_{k >= n_hi(L)} r_k
//! n_lo(L) = ceil(log2(kappa c0 / L)),   n_hi(L) = ceil(log2(c0 / 4L))
//! ```
//!
//! Tails are handled as logarithms: at depth 24 they are far below the
//! smallest double.

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rational::{ceil_log2, int, serde_str, to_f64, Rational};

use super::svc::{RatioMode, SvcParams, SvcSet};

/// Partial sums of `r_k` are followed for at most this many terms.
pub const SUMMABILITY_TERMS: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsOptions {
    /// Factor inside the lower-bound scale index.
    #[serde(with = "serde_str")]
    pub kappa: Rational,
}

impl Default for BoundsOptions {
    fn default() -> Self {
        BoundsOptions { kappa: int(3) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    #[serde(rename = "L", with = "serde_str")]
    pub l: Rational,
    #[serde(with = "serde_str")]
    pub theta: Rational,
    #[serde(with = "serde_str")]
    pub argmin_x: Rational,
    pub n_lower: u64,
    pub n_upper: u64,
    pub ln_theta: f64,
    pub ln_lower: f64,
    pub ln_upper: f64,
    /// `L <= L_0`, so the sandwich is asserted here.
    pub in_range: bool,
    pub pass: bool,
}

impl BoundRow {
    pub fn lower(&self) -> f64 {
        self.ln_lower.exp()
    }

    pub fn upper(&self) -> f64 {
        self.ln_upper.exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvcBoundsReport {
    pub depth: usize,
    #[serde(with = "serde_str")]
    pub c0: Rational,
    /// `sum_{k >= depth} r_k`: bound on `Leb(K_depth) - Leb(K)` relative to `c0`.
    pub c0_truncation_bound: f64,
    /// Relative error of each rounded `r_n` (zero for exact ratio modes).
    pub ratio_rounding_rel: f64,
    #[serde(with = "serde_str")]
    pub kappa: Rational,
    #[serde(rename = "L0", with = "serde_str")]
    pub l0: Rational,
    pub ln_c: f64,
    #[serde(rename = "ln_C")]
    pub ln_big_c: f64,
    pub rows: Vec<BoundRow>,
    pub pass: bool,
}

impl SvcBoundsReport {
    pub fn c(&self) -> f64 {
        self.ln_c.exp()
    }

    pub fn big_c(&self) -> f64 {
        self.ln_big_c.exp()
    }
}

/// Tail index `max(0, ceil(log2(x)))`.
fn tail_index(x: &Rational) -> u64 {
    if !x.is_positive() {
        return 0;
    }
    ceil_log2(x).max(0) as u64
}

/// Checks the two-sided bound on sampled scales with the tightest constants:
/// `c` as large and `C` as small as the samples in range allow.
pub fn verify_svc_bounds(
    params: &SvcParams,
    depth: usize,
    ls: &[Rational],
    options: &BoundsOptions,
) -> Result<SvcBoundsReport> {
    params.validate()?;
    if ls.is_empty() {
        return Err(invalid("no scales given"));
    }
    if let Some(bad) = ls.iter().find(|l| !l.is_positive()) {
        return Err(invalid(format!("L = {bad} is not positive")));
    }
    if !options.kappa.is_positive() {
        return Err(invalid("kappa must be positive"));
    }
    if matches!(params.mode, RatioMode::Explicit { .. }) {
        // The last listed ratio repeats forever.
        return Err(Error::DivergentSeries { terms: SUMMABILITY_TERMS });
    }
    params.check_summable(SUMMABILITY_TERMS)?;
    let ln_tail = |n: u64| {
        params
            .ln_tail(n as usize)
            .ok_or(Error::DivergentSeries { terms: SUMMABILITY_TERMS })
    };

    let set = SvcSet::new(params, depth)?;
    let min_l = ls.iter().min().unwrap();
    let limit = min_l / int(16);
    let l_depth = &set.lengths()[depth];
    if *l_depth >= limit {
        return Err(Error::InsufficientDepth {
            depth,
            l_depth: to_f64(l_depth),
            limit: to_f64(&limit),
        });
    }
    let c0 = set.measure();

    let mut sorted: Vec<Rational> = ls.to_vec();
    sorted.sort();
    sorted.dedup();
    let minima = sorted
        .par_iter()
        .map(|l| set.min_local_measure(l))
        .collect::<Result<Vec<_>>>()?;

    let kc0 = &options.kappa * &c0;
    let four = int(4);
    let l0 = sorted
        .iter()
        .filter(|l| tail_index(&(&kc0 / *l)) >= 1)
        .max()
        .cloned()
        .unwrap_or_else(Rational::zero);

    let mut rows = Vec::with_capacity(sorted.len());
    for (l, m) in sorted.iter().zip(minima) {
        let n_lower = tail_index(&(&kc0 / l));
        let n_upper = tail_index(&(&c0 / (&four * l)));
        let ln_theta =
            if m.theta.is_zero() { f64::NEG_INFINITY } else { crate::rational::ln(&m.theta) };
        rows.push(BoundRow {
            l: l.clone(),
            theta: m.theta,
            argmin_x: m.argmin_x,
            n_lower,
            n_upper,
            ln_theta,
            ln_lower: ln_tail(n_lower)?,
            ln_upper: ln_tail(n_upper)?,
            in_range: !l0.is_zero() && *l <= l0,
            pass: false,
        });
    }

    let in_range: Vec<&BoundRow> = rows.iter().filter(|r| r.in_range).collect();
    let ln_c = in_range
        .iter()
        .map(|r| r.ln_theta - r.ln_lower)
        .fold(f64::INFINITY, f64::min);
    let ln_big_c = in_range
        .iter()
        .map(|r| r.ln_theta - r.ln_upper)
        .fold(f64::NEG_INFINITY, f64::max);
    let constants_ok = !in_range.is_empty() && ln_c.is_finite() && ln_big_c.is_finite();

    // Slack for the rounding of the logarithms themselves.
    let slack = 1e-12;
    for row in &mut rows {
        row.ln_lower += ln_c;
        row.ln_upper += ln_big_c;
        let tol = slack * row.ln_theta.abs().max(1.0);
        row.pass = constants_ok
            && row.ln_lower <= row.ln_theta + tol
            && row.ln_theta <= row.ln_upper + tol;
    }
    let pass = constants_ok && rows.iter().filter(|r| r.in_range).all(|r| r.pass);

    let ratio_rounding_rel = match params.mode {
        RatioMode::Parametric { .. } => (-(params.precision_bits as f64)).exp2(),
        _ => 0.0,
    };
    Ok(SvcBoundsReport {
        depth,
        c0_truncation_bound: ln_tail(depth as u64)?.exp(),
        ratio_rounding_rel,
        c0,
        kappa: options.kappa.clone(),
        l0,
        ln_c,
        ln_big_c,
        rows,
        pass,
    })
}

/// Depth at which `l_depth < min(L) / 16`, searched up to `max_depth`.
pub fn required_depth(params: &SvcParams, min_l: &Rational, max_depth: usize) -> Result<usize> {
    let limit = min_l / int(16);
    let half = Rational::new(BigInt::from(1), BigInt::from(2));
    let mut len = int(1);
    for n in 0..=max_depth {
        if len < limit {
            return Ok(n);
        }
        let r = params.ratio(n)?;
        len = (int(1) - r) * &half * len;
    }
    Err(Error::InsufficientDepth {
        depth: max_depth,
        l_depth: to_f64(&len),
        limit: to_f64(&limit),
    })
}
