use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rational::{common_denominator, serde_str, Rational};

use super::svc::SvcSet;
use super::union::IntervalUnion;

/// `theta = inf_x Leb(ω ∩ B(x, L)) / 2L` and a point attaining it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalMinimum {
    #[serde(with = "serde_str")]
    pub theta: Rational,
    #[serde(with = "serde_str")]
    pub argmin_x: Rational,
}

/// A compact set `K`; the thickness questions are about `ω = R \ K`.
pub trait LocalMass {
    fn min_local_measure(&self, l: &Rational) -> Result<LocalMinimum>;
}

impl LocalMass for IntervalUnion {
    fn min_local_measure(&self, l: &Rational) -> Result<LocalMinimum> {
        min_local_measure(self, l)
    }
}

impl LocalMass for SvcSet {
    fn min_local_measure(&self, l: &Rational) -> Result<LocalMinimum> {
        SvcSet::min_local_measure(self, l)
    }
}

/// Exact minimum of `x ↦ Leb(ω ∩ [x-L, x+L]) / 2L` over the real line.
///
/// The map is continuous and piecewise linear with breakpoints at
/// `endpoint ± L`, and constant beyond `hull ± L`, so its minimum is the
/// smallest value over those candidates. Ties go to the smallest `x`.
pub fn min_local_measure(k: &IntervalUnion, l: &Rational) -> Result<LocalMinimum> {
    if !l.is_positive() {
        return Err(invalid("L must be positive"));
    }
    if k.is_empty() {
        return Ok(LocalMinimum { theta: Rational::one(), argmin_x: Rational::zero() });
    }
    // Integers over a common denominator; rational arithmetic would pay a
    // gcd per operation.
    let ivs = k.intervals();
    let den = common_denominator(
        ivs.iter().flat_map(|iv| [&iv.lo, &iv.hi]).chain(std::iter::once(l)),
    );
    let scale = |q: &Rational| q.numer() * (&den / q.denom());
    let los: Vec<BigInt> = ivs.iter().map(|iv| scale(&iv.lo)).collect();
    let his: Vec<BigInt> = ivs.iter().map(|iv| scale(&iv.hi)).collect();
    let li = scale(l);
    let mut prefix = Vec::with_capacity(ivs.len() + 1);
    prefix.push(BigInt::zero());
    for (a, b) in los.iter().zip(&his) {
        let next = prefix.last().unwrap() + (b - a);
        prefix.push(next);
    }
    // Leb(K ∩ (-inf, y])
    let cumulative = |y: &BigInt| -> BigInt {
        let i = los.partition_point(|a| a < y);
        if i == 0 {
            return BigInt::zero();
        }
        if *y >= his[i - 1] {
            prefix[i].clone()
        } else {
            &prefix[i - 1] + (y - &los[i - 1])
        }
    };
    let mut candidates = Vec::with_capacity(4 * ivs.len() + 2);
    candidates.push(&los[0] - &li);
    candidates.push(his.last().unwrap() + &li);
    for e in los.iter().chain(&his) {
        candidates.push(e - &li);
        candidates.push(e + &li);
    }
    candidates.sort();
    candidates.dedup();
    let mut best: Option<(BigInt, BigInt)> = None;
    for x in candidates {
        let mass = cumulative(&(&x + &li)) - cumulative(&(&x - &li));
        if best.as_ref().is_none_or(|(m, _)| mass > *m) {
            best = Some((mass, x));
        }
    }
    let (mass, x) = best.expect("at least two candidates");
    let width: BigInt = &li << 1;
    Ok(LocalMinimum {
        theta: Rational::new(&width - mass, width),
        argmin_x: Rational::new(x, den),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThicknessSample {
    #[serde(rename = "L", with = "serde_str")]
    pub l: Rational,
    #[serde(with = "serde_str")]
    pub theta: Rational,
    #[serde(with = "serde_str")]
    pub argmin_x: Rational,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThicknessProfile {
    pub samples: Vec<ThicknessSample>,
    pub domain_note: String,
}

pub const DOMAIN_NOTE: &str = "omega = R \\ K";

impl ThicknessProfile {
    /// Profile from given `(L, theta)` pairs, e.g. synthetic data.
    pub fn from_pairs(pairs: Vec<(Rational, Rational)>) -> Result<Self> {
        let mut samples = Vec::with_capacity(pairs.len());
        for (l, theta) in pairs {
            if !l.is_positive() {
                return Err(invalid("L must be positive"));
            }
            if theta.is_negative() || theta > Rational::one() {
                return Err(invalid("theta must lie in [0, 1]"));
            }
            samples.push(ThicknessSample { l, theta, argmin_x: Rational::zero() });
        }
        samples.sort_by(|a, b| a.l.cmp(&b.l));
        Ok(ThicknessProfile { samples, domain_note: "synthetic".into() })
    }
}

/// `min_local_measure` at every scale, ordered by `L`.
pub fn thickness_profile<S: LocalMass + Sync>(k: &S, ls: &[Rational]) -> Result<ThicknessProfile> {
    if let Some(bad) = ls.iter().find(|l| !l.is_positive()) {
        return Err(invalid(format!("L = {bad} is not positive")));
    }
    let mut samples = ls
        .par_iter()
        .map(|l| {
            k.min_local_measure(l).map(|m| ThicknessSample {
                l: l.clone(),
                theta: m.theta,
                argmin_x: m.argmin_x,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    samples.sort_by(|a, b| a.l.cmp(&b.l));
    Ok(ThicknessProfile { samples, domain_note: DOMAIN_NOTE.into() })
}

/// `count` scales `2^e` with `e` evenly spaced on `[lo_exp, hi_exp]`, each
/// rounded to a dyadic rational with 53 significant bits.
pub fn log_spaced_scales(lo_exp: f64, hi_exp: f64, count: usize) -> Vec<Rational> {
    assert!(count >= 2);
    (0..count)
        .map(|i| {
            let e = lo_exp + (hi_exp - lo_exp) * i as f64 / (count - 1) as f64;
            Rational::from_float(e.exp2()).expect("finite scale")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval_sets::union::Interval;
    use crate::rational::{int, rat};

    #[test]
    fn trivial_examples() {
        let full = IntervalUnion::empty();
        let m = min_local_measure(&full, &rat(1, 3)).unwrap();
        assert_eq!(m.theta, int(1));

        let unit = IntervalUnion::single(int(0), int(1)).unwrap();
        let m = min_local_measure(&unit, &rat(1, 2)).unwrap();
        assert_eq!(m.theta, int(0));
        assert_eq!(m.argmin_x, rat(1, 2));

        let k1 = IntervalUnion::new(vec![
            Interval::new(int(0), rat(1, 4)).unwrap(),
            Interval::new(rat(3, 4), int(1)).unwrap(),
        ])
        .unwrap();
        assert_eq!(min_local_measure(&k1, &rat(1, 4)).unwrap().theta, rat(1, 2));
        assert!(min_local_measure(&k1, &int(0)).is_err());
    }

    #[test]
    fn profile_is_sorted_and_bounded() {
        let k = IntervalUnion::single(int(0), int(1)).unwrap();
        let p = thickness_profile(&k, &[int(2), rat(1, 8), int(1)]).unwrap();
        let ls: Vec<_> = p.samples.iter().map(|s| s.l.clone()).collect();
        assert_eq!(ls, vec![rat(1, 8), int(1), int(2)]);
        assert_eq!(p.samples[0].theta, int(0));
        // ball of radius 1 centred anywhere sees at most length 1 of K
        assert_eq!(p.samples[1].theta, rat(1, 2));
        assert_eq!(p.samples[2].theta, rat(3, 4));
    }

    #[test]
    fn scales_are_log_spaced() {
        let s = log_spaced_scales(-12.0, -4.0, 9);
        assert_eq!(s[0], rat(1, 4096));
        assert_eq!(s[8], rat(1, 16));
        assert_eq!(s[4], rat(1, 256));
    }
}
