//! Smith–Volterra–Cantor sets.
//!
//! `K_0 = [0, 1]`; `K_{n+1}` removes from every interval of `K_n` the open
//! middle part of relative length `r_n`. All `2^n` intervals of `K_n` share
//! the length `l_n`, with `l_{n+1} = (1 - r_n) / 2 * l_n`.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::highprec;
use crate::rational::{
    common_denominator, format_rational, reduce_dyadic, round_to_significant_bits, serde_str,
    serde_str_vec, to_f64, Rational,
};

use super::union::{Interval, IntervalUnion};

pub const DEFAULT_PRECISION_BITS: u32 = 128;
pub const DEFAULT_DENOMINATOR_BUDGET_BITS: u64 = 1 << 16;
/// Structured sets address intervals by a bit path.
pub const MAX_STRUCTURED_DEPTH: usize = 60;

/// How the gap ratios `r_n` are produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
pub enum RatioMode {
    /// `r_n` taken from the list; indices past the end repeat the last entry.
    Explicit {
        #[serde(with = "serde_str_vec")]
        ratios: Vec<Rational>,
    },
    /// `r_n = first * ratio^n`, exact.
    Geometric {
        #[serde(with = "serde_str")]
        first: Rational,
        #[serde(with = "serde_str")]
        ratio: Rational,
    },
    /// `r_n = c exp(-C 2^(n alpha))`, rounded to `precision_bits` significant bits.
    Parametric {
        #[serde(with = "serde_str")]
        c: Rational,
        #[serde(rename = "C", with = "serde_str")]
        big_c: Rational,
        #[serde(with = "serde_str")]
        alpha: Rational,
    },
}

fn default_precision() -> u32 {
    DEFAULT_PRECISION_BITS
}

fn default_budget() -> u64 {
    DEFAULT_DENOMINATOR_BUDGET_BITS
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvcParams {
    #[serde(flatten)]
    pub mode: RatioMode,
    #[serde(default = "default_precision")]
    pub precision_bits: u32,
    /// Largest admissible bit length of an endpoint denominator.
    #[serde(default = "default_budget")]
    pub denominator_budget_bits: u64,
}

impl SvcParams {
    pub fn with_mode(mode: RatioMode) -> Self {
        SvcParams {
            mode,
            precision_bits: DEFAULT_PRECISION_BITS,
            denominator_budget_bits: DEFAULT_DENOMINATOR_BUDGET_BITS,
        }
    }

    pub fn constant(r: Rational) -> Self {
        Self::with_mode(RatioMode::Explicit { ratios: vec![r] })
    }

    pub fn explicit(ratios: Vec<Rational>) -> Self {
        Self::with_mode(RatioMode::Explicit { ratios })
    }

    pub fn geometric(first: Rational, ratio: Rational) -> Self {
        Self::with_mode(RatioMode::Geometric { first, ratio })
    }

    pub fn parametric(c: Rational, big_c: Rational, alpha: Rational) -> Self {
        Self::with_mode(RatioMode::Parametric { c, big_c, alpha })
    }

    pub fn validate(&self) -> Result<()> {
        let zero = Rational::zero();
        let one = Rational::one();
        let open_unit = |q: &Rational| *q > zero && *q < one;
        match &self.mode {
            RatioMode::Explicit { ratios } => {
                if ratios.is_empty() {
                    return Err(invalid("explicit ratio list is empty"));
                }
                for (index, r) in ratios.iter().enumerate() {
                    if !open_unit(r) {
                        return Err(Error::RatioOutOfRange { index, value: format_rational(r) });
                    }
                }
            }
            RatioMode::Geometric { first, ratio } => {
                if !open_unit(first) {
                    return Err(Error::RatioOutOfRange { index: 0, value: format_rational(first) });
                }
                if *ratio <= zero || *ratio > one {
                    return Err(invalid(format!(
                        "geometric ratio {} must lie in (0, 1]",
                        format_rational(ratio)
                    )));
                }
            }
            RatioMode::Parametric { c, big_c, alpha } => {
                if !open_unit(c) {
                    return Err(invalid(format!("c = {} must lie in (0, 1)", format_rational(c))));
                }
                if *big_c <= zero {
                    return Err(invalid("C must be positive"));
                }
                if *alpha <= zero {
                    return Err(invalid("alpha must be positive"));
                }
                if self.precision_bits < 8 {
                    return Err(invalid("precision_bits must be at least 8"));
                }
            }
        }
        Ok(())
    }

    /// Exact `r_n`.
    pub fn ratio(&self, n: usize) -> Result<Rational> {
        self.validate()?;
        Ok(match &self.mode {
            RatioMode::Explicit { ratios } => ratios[n.min(ratios.len() - 1)].clone(),
            RatioMode::Geometric { first, ratio } => first * pow(ratio, n),
            RatioMode::Parametric { c, big_c, alpha } => {
                parametric_ratio(c, big_c, alpha, n, self.precision_bits)
            }
        })
    }

    pub fn ratios(&self, depth: usize) -> Result<Vec<Rational>> {
        (0..depth).map(|n| self.ratio(n)).collect()
    }

    /// `ln r_n` in double precision, without underflow.
    pub fn ln_ratio(&self, n: usize) -> f64 {
        match &self.mode {
            RatioMode::Explicit { ratios } => crate::rational::ln(&ratios[n.min(ratios.len() - 1)]),
            RatioMode::Geometric { first, ratio } => {
                crate::rational::ln(first) + n as f64 * crate::rational::ln(ratio)
            }
            RatioMode::Parametric { c, big_c, alpha } => {
                crate::rational::ln(c) - to_f64(big_c) * (n as f64 * to_f64(alpha)).exp2()
            }
        }
    }

    /// `ln sum_{k >= n} r_k`, or `None` when the series diverges.
    pub fn ln_tail(&self, n: usize) -> Option<f64> {
        match &self.mode {
            RatioMode::Explicit { .. } => None,
            RatioMode::Geometric { ratio, .. } => {
                if ratio.is_one() {
                    None
                } else {
                    Some(self.ln_ratio(n) - (1.0 - to_f64(ratio)).ln())
                }
            }
            RatioMode::Parametric { .. } => {
                let head = self.ln_ratio(n);
                let mut sum = 1.0;
                for k in n + 1.. {
                    let term = (self.ln_ratio(k) - head).exp();
                    sum += term;
                    if term < 1e-18 * sum {
                        break;
                    }
                }
                Some(head + sum.ln())
            }
        }
    }

    /// Whether `sum r_k` converges, judged by partial sums that stop moving in
    /// double precision within `max_terms` terms.
    pub fn check_summable(&self, max_terms: usize) -> Result<f64> {
        self.validate()?;
        let mut sum = 0.0f64;
        let mut still = 0;
        for n in 0..max_terms {
            let next = sum + self.ln_ratio(n).exp();
            if next == sum {
                still += 1;
                if still >= 16 {
                    return Ok(sum);
                }
            } else {
                still = 0;
            }
            sum = next;
        }
        Err(Error::DivergentSeries { terms: max_terms })
    }
}

fn pow(q: &Rational, n: usize) -> Rational {
    num_traits::pow(q.clone(), n)
}

/// `c exp(-C 2^(n alpha))` to `bits` significant bits.
fn parametric_ratio(c: &Rational, big_c: &Rational, alpha: &Rational, n: usize, bits: u32) -> Rational {
    let na = alpha * Rational::from_integer(BigInt::from(n));
    let k = na.floor();
    let frac = &na - &k;
    let k = k.to_integer().to_u64().expect("2^(n alpha) exponent fits in u64");
    // C 2^(n alpha) has about k + log2(C) integer bits; carry that many extra.
    let c_bits = big_c.numer().bits() as i64 - big_c.denom().bits() as i64 + 1;
    let f = bits as u64 + 64 + k + c_bits.max(0) as u64;
    let f = f as u32;
    let ln2 = highprec::ln2(f);
    let pow_frac = highprec::exp(&((highprec::from_rational(&frac, f) * &ln2) >> f as usize), f);
    let scaled = (pow_frac * big_c.numer()).div_floor(big_c.denom()) << k as usize;
    let y = highprec::ln(c, f) - scaled;
    // y = q ln2 + rem, 0 <= rem < ln2
    let (q, rem) = y.div_mod_floor(&ln2);
    let g = bits + 40;
    let mantissa = highprec::exp(&(rem >> (f - g) as usize), g);
    let q: i64 = q.to_i64().expect("binary exponent fits in i64");
    let approx = if q >= g as i64 {
        Rational::from_integer(mantissa << (q - g as i64) as usize)
    } else {
        reduce_dyadic(mantissa, (g as i64 - q) as u64)
    };
    round_to_significant_bits(&approx, bits)
}

/// `K_depth` kept in closed form: lengths per level plus the binary tree of
/// left endpoints, so very deep sets never need to be expanded.
#[derive(Debug, Clone)]
pub struct SvcSet {
    depth: usize,
    ratios: Vec<Rational>,
    lengths: Vec<Rational>,
}

impl SvcSet {
    pub fn new(params: &SvcParams, depth: usize) -> Result<Self> {
        params.validate()?;
        let ratios = params.ratios(depth)?;
        Self::from_ratios(ratios, params.denominator_budget_bits)
    }

    pub fn from_ratios(ratios: Vec<Rational>, budget_bits: u64) -> Result<Self> {
        let one = Rational::one();
        let half = Rational::new(BigInt::one(), BigInt::from(2));
        let mut lengths = Vec::with_capacity(ratios.len() + 1);
        lengths.push(one.clone());
        for (index, r) in ratios.iter().enumerate() {
            if !r.is_positive() || *r >= one {
                return Err(Error::RatioOutOfRange { index, value: format_rational(r) });
            }
            let next = (&one - r) * &half * lengths.last().unwrap();
            let needed = next.denom().bits();
            if needed > budget_bits {
                return Err(Error::PrecisionBudget { needed_bits: needed, budget_bits });
            }
            lengths.push(next);
        }
        Ok(SvcSet { depth: ratios.len(), ratios, lengths })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn ratios(&self) -> &[Rational] {
        &self.ratios
    }

    /// `l_0, ..., l_depth`.
    pub fn lengths(&self) -> &[Rational] {
        &self.lengths
    }

    /// Offset of a right child from its parent's left endpoint at level `n >= 1`.
    pub fn right_offset(&self, n: usize) -> Rational {
        &self.lengths[n - 1] - &self.lengths[n]
    }

    /// `Leb(K_depth) = 2^depth l_depth`.
    pub fn measure(&self) -> Rational {
        &self.lengths[self.depth] * Rational::from_integer(BigInt::one() << self.depth)
    }

    pub fn interval_count(&self) -> u128 {
        1u128 << self.depth
    }

    /// All `2^depth` intervals, sorted.
    pub fn to_union(&self) -> Result<IntervalUnion> {
        if self.depth > 26 {
            return Err(invalid(format!(
                "refusing to expand 2^{} intervals; use the structured set",
                self.depth
            )));
        }
        let den = common_denominator(&self.lengths);
        let scale = Rational::from_integer(den.clone());
        let as_int = |q: &Rational| (q * &scale).to_integer();
        let len = as_int(&self.lengths[self.depth]);
        let offsets: Vec<BigInt> = (1..=self.depth).map(|n| as_int(&self.right_offset(n))).collect();
        // every endpoint is at most den, so u128 suffices when den does
        let dyadic_den = den.trailing_zeros().map(|tz| tz + 1 == den.bits()).unwrap_or(false);
        let k = den.bits() - 1;
        // every endpoint is at most den, so u128 suffices when den does
        if let Some(d) = den.to_u128().filter(|d| d.leading_zeros() >= 1) {
            let len = len.to_u128().unwrap();
            let mut lefts = vec![0u128];
            for off in offsets.iter().map(|o| o.to_u128().unwrap()) {
                lefts = lefts.iter().flat_map(|&a| [a, a + off]).collect();
            }
            let make = |num: u128| {
                if num == 0 {
                    Rational::zero()
                } else if dyadic_den {
                    let tz = (num.trailing_zeros() as u64).min(k);
                    Rational::new_raw(BigInt::from(num >> tz), BigInt::from(1u128 << (k - tz)))
                } else {
                    Rational::new(BigInt::from(num), BigInt::from(d))
                }
            };
            let intervals =
                lefts.into_iter().map(|a| Interval { lo: make(a), hi: make(a + len) }).collect();
            return Ok(IntervalUnion::from_normalized(intervals));
        }
        let mut lefts = vec![BigInt::zero()];
        for off in &offsets {
            lefts = lefts.iter().flat_map(|a| [a.clone(), a + off]).collect();
        }
        let make = |num: BigInt| {
            if dyadic_den {
                reduce_dyadic(num, k)
            } else {
                Rational::new(num, den.clone())
            }
        };
        let intervals = lefts
            .into_iter()
            .map(|a| {
                let b = &a + &len;
                Interval { lo: make(a), hi: make(b) }
            })
            .collect();
        Ok(IntervalUnion::from_normalized(intervals))
    }

    /// Exact `inf_x Leb(ω ∩ B(x, L)) / 2L` for `ω = R \ K_depth`, by a
    /// branch-and-bound over interval left endpoints.
    pub fn min_local_measure(&self, l: &Rational) -> Result<super::LocalMinimum> {
        if !l.is_positive() {
            return Err(invalid("L must be positive"));
        }
        if self.depth > MAX_STRUCTURED_DEPTH {
            return Err(invalid(format!("depth above {MAX_STRUCTURED_DEPTH}")));
        }
        let w = l * Rational::from_integer(BigInt::from(2));
        let den = common_denominator(self.lengths.iter().chain(std::iter::once(&w)));
        let scale = Rational::from_integer(den.clone());
        let as_int = |q: &Rational| (q * &scale).to_integer();
        let lens: Vec<BigInt> = self.lengths.iter().map(as_int).collect();
        let d = self.depth;
        let mu: Vec<BigInt> = (0..=d).map(|n| &lens[d] << (d - n)).collect();
        let mut offs = vec![BigInt::zero()];
        offs.extend((1..=d).map(|n| &lens[n - 1] - &lens[n]));
        let gap: Vec<BigInt> = (0..=d).map(|n| &lens[n] - &mu[n]).collect();
        let mut search = Search {
            lens: &lens,
            mu: &mu,
            offs: &offs,
            gap: &gap,
            w: as_int(&w),
            depth: d,
            best: BigInt::from(-1),
            best_u: BigInt::zero(),
            memo: HashMap::new(),
        };
        let a0 = BigInt::zero();
        let m0 = search.window_mass(&a0, &BigInt::zero());
        search.explore(0, 0, &a0, &BigInt::zero(), &m0);
        let theta = Rational::new(&search.w - &search.best, search.w.clone());
        let argmin = Rational::new(search.best_u.clone(), den) + l;
        Ok(super::LocalMinimum { theta, argmin_x: argmin })
    }
}

/// Upper bound on a subtree's best window mass, with a witness leaf (offset
/// from the subtree's left endpoint) when the bound is attained.
#[derive(Clone)]
struct Outcome {
    bound: BigInt,
    witness: Option<BigInt>,
}

struct Search<'a> {
    lens: &'a [BigInt],
    mu: &'a [BigInt],
    offs: &'a [BigInt],
    gap: &'a [BigInt],
    w: BigInt,
    depth: usize,
    best: BigInt,
    best_u: BigInt,
    memo: HashMap<(u8, u8, u64), Outcome>,
}

impl Search<'_> {
    /// `Leb(K ∩ (-inf, y])`.
    fn cumulative(&self, y: &BigInt) -> BigInt {
        let mut acc = BigInt::zero();
        let mut a = BigInt::zero();
        for n in 0..=self.depth {
            if *y <= a {
                return acc;
            }
            let end = &a + &self.lens[n];
            if *y >= end {
                return acc + &self.mu[n];
            }
            if n == self.depth {
                return acc + (y - &a);
            }
            let right = &a + &self.offs[n + 1];
            if *y >= right {
                acc += &self.mu[n + 1];
                a = right;
            }
        }
        acc
    }

    /// Mass of `K ∩ [a, a + W]` given `Leb(K ∩ (-inf, a]) = fa`.
    fn window_mass(&self, a: &BigInt, fa: &BigInt) -> BigInt {
        self.cumulative(&(a + &self.w)) - fa
    }

    /// Closest ancestor level whose interval contains `[a, a + l_n + W]`
    /// for every node sharing this node's relative position in it.
    fn memo_key(&self, n: usize, path: u64) -> Option<(u8, u8, u64)> {
        let mut off = BigInt::zero();
        let reach = &self.lens[n] + &self.w;
        for j in (0..n).rev() {
            if (path >> (n - 1 - j)) & 1 == 1 {
                off += &self.offs[j + 1];
            }
            if &off + &reach <= self.lens[j] {
                let bits = n - j;
                let suffix = if bits >= 64 { path } else { path & ((1u64 << bits) - 1) };
                return Some((n as u8, j as u8, suffix));
            }
        }
        None
    }

    fn explore(&mut self, n: usize, path: u64, a: &BigInt, fa: &BigInt, m: &BigInt) -> Outcome {
        let ub = m + &self.gap[n];
        if ub <= self.best {
            return Outcome { bound: ub, witness: None };
        }
        if n == self.depth {
            if *m > self.best {
                self.best = m.clone();
                self.best_u = a.clone();
            }
            return Outcome { bound: m.clone(), witness: Some(BigInt::zero()) };
        }
        let key = if n + 2 <= self.depth { self.memo_key(n, path) } else { None };
        if let Some(key) = key {
            if let Some(hit) = self.memo.get(&key) {
                if hit.bound <= self.best {
                    return hit.clone();
                }
                if let Some(rel) = &hit.witness {
                    self.best = hit.bound.clone();
                    self.best_u = a + rel;
                    return hit.clone();
                }
            }
        }
        let left = self.explore(n + 1, path << 1, a, fa, m);
        let a2 = a + &self.offs[n + 1];
        let fa2 = fa + &self.mu[n + 1];
        let m2 = self.window_mass(&a2, &fa2);
        let right = self.explore(n + 1, (path << 1) | 1, &a2, &fa2, &m2);
        let out = if left.bound >= right.bound {
            left
        } else {
            Outcome {
                bound: right.bound,
                witness: right.witness.map(|rel| rel + &self.offs[n + 1]),
            }
        };
        if let Some(key) = key {
            self.memo.insert(key, out.clone());
        }
        out
    }
}

/// Expanded `K_depth` as an explicit interval union.
pub fn svc_construct(params: &SvcParams, depth: usize) -> Result<IntervalUnion> {
    SvcSet::new(params, depth)?.to_union()
}
