use std::fmt;

use num_bigint::BigInt;
use num_traits::{Signed, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{invalid, Error, Result};
use crate::rational::{exact_signed_sum, format_rational, Rational};

/// Closed interval `[lo, hi]` with exact endpoints.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Interval {
    pub lo: Rational,
    pub hi: Rational,
}

impl Interval {
    pub fn new(lo: Rational, hi: Rational) -> Result<Self> {
        if lo > hi {
            return Err(invalid(format!(
                "interval [{}, {}] has lo > hi",
                format_rational(&lo),
                format_rational(&hi)
            )));
        }
        Ok(Interval { lo, hi })
    }

    pub fn length(&self) -> Rational {
        &self.hi - &self.lo
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", format_rational(&self.lo), format_rational(&self.hi))
    }
}

/// Finite union of disjoint closed intervals, sorted and non-touching.
/// Touching or overlapping pieces are merged and zero-length pieces dropped.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct IntervalUnion {
    intervals: Vec<Interval>,
}

impl IntervalUnion {
    pub fn empty() -> Self {
        IntervalUnion::default()
    }

    pub fn single(lo: Rational, hi: Rational) -> Result<Self> {
        Self::new(vec![Interval::new(lo, hi)?])
    }

    pub fn new(mut intervals: Vec<Interval>) -> Result<Self> {
        for iv in &intervals {
            if iv.lo > iv.hi {
                return Err(invalid(format!("interval {iv} has lo > hi")));
            }
        }
        intervals.retain(|iv| iv.lo < iv.hi);
        intervals.sort_by(|a, b| a.lo.cmp(&b.lo));
        let mut merged: Vec<Interval> = Vec::with_capacity(intervals.len());
        for iv in intervals {
            match merged.last_mut() {
                Some(last) if iv.lo <= last.hi => {
                    if iv.hi > last.hi {
                        last.hi = iv.hi;
                    }
                }
                _ => merged.push(iv),
            }
        }
        Ok(IntervalUnion { intervals: merged })
    }

    /// Caller guarantees the pieces are sorted, disjoint, non-touching and
    /// of positive length.
    pub(crate) fn from_normalized(intervals: Vec<Interval>) -> Self {
        // exact comparisons dominate for expanded deep sets
        if intervals.len() <= 1 << 12 {
            debug_assert!(intervals.iter().all(|iv| iv.lo < iv.hi));
            debug_assert!(intervals.windows(2).all(|w| w[0].hi < w[1].lo));
        }
        IntervalUnion { intervals }
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn len(&self) -> usize {
        self.intervals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    /// Smallest closed interval containing the union.
    pub fn hull(&self) -> Option<Interval> {
        let first = self.intervals.first()?;
        let last = self.intervals.last()?;
        Some(Interval { lo: first.lo.clone(), hi: last.hi.clone() })
    }

    pub fn measure(&self) -> Rational {
        exact_signed_sum(self.intervals.iter().map(|iv| &iv.hi), self.intervals.iter().map(|iv| &iv.lo))
    }

    /// Complement inside `window`, which must contain the union.
    pub fn complement_window(&self, window: &Interval) -> Result<IntervalUnion> {
        if let Some(h) = self.hull() {
            if h.lo < window.lo || h.hi > window.hi {
                return Err(Error::WindowTooSmall);
            }
        }
        let mut out = Vec::with_capacity(self.intervals.len() + 1);
        let mut cursor = window.lo.clone();
        for iv in &self.intervals {
            if iv.lo > cursor {
                out.push(Interval { lo: cursor, hi: iv.lo.clone() });
            }
            cursor = iv.hi.clone();
        }
        if window.hi > cursor {
            out.push(Interval { lo: cursor, hi: window.hi.clone() });
        }
        Ok(IntervalUnion::from_normalized(out))
    }

    pub fn translate(&self, t: &Rational) -> IntervalUnion {
        IntervalUnion::from_normalized(
            self.intervals
                .iter()
                .map(|iv| Interval { lo: &iv.lo + t, hi: &iv.hi + t })
                .collect(),
        )
    }

    /// `Leb(self ∩ [a, b])`.
    pub fn measure_in(&self, a: &Rational, b: &Rational) -> Rational {
        let mut total = Rational::zero();
        if a >= b {
            return total;
        }
        let start = self.intervals.partition_point(|iv| iv.hi <= *a);
        for iv in &self.intervals[start..] {
            if iv.lo >= *b {
                break;
            }
            let lo = if iv.lo > *a { &iv.lo } else { a };
            let hi = if iv.hi < *b { &iv.hi } else { b };
            total += hi - lo;
        }
        total
    }

    pub fn contains(&self, x: &Rational) -> bool {
        let i = self.intervals.partition_point(|iv| iv.hi < *x);
        self.intervals.get(i).is_some_and(|iv| iv.lo <= *x)
    }

    pub fn to_f64_pairs(&self) -> Vec<(f64, f64)> {
        self.intervals
            .iter()
            .map(|iv| (crate::rational::to_f64(&iv.lo), crate::rational::to_f64(&iv.hi)))
            .collect()
    }
}

impl fmt::Display for IntervalUnion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, iv) in self.intervals.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{iv}")?;
        }
        write!(f, "}}")
    }
}

// JSON form: [[num_a, den_a, num_b, den_b], ...] with decimal strings.
impl Serialize for IntervalUnion {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let quads: Vec<[String; 4]> = self
            .intervals
            .iter()
            .map(|iv| {
                [
                    iv.lo.numer().to_string(),
                    iv.lo.denom().to_string(),
                    iv.hi.numer().to_string(),
                    iv.hi.denom().to_string(),
                ]
            })
            .collect();
        quads.serialize(s)
    }
}

impl<'de> Deserialize<'de> for IntervalUnion {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let quads = Vec::<[String; 4]>::deserialize(d)?;
        let parse = |t: &str| t.trim().parse::<BigInt>().map_err(D::Error::custom);
        let mut out = Vec::with_capacity(quads.len());
        for q in &quads {
            let (na, da, nb, db) = (parse(&q[0])?, parse(&q[1])?, parse(&q[2])?, parse(&q[3])?);
            if da.is_zero() || db.is_zero() || da.is_negative() || db.is_negative() {
                return Err(D::Error::custom("denominators must be positive"));
            }
            let iv = Interval::new(Rational::new(na, da), Rational::new(nb, db))
                .map_err(D::Error::custom)?;
            out.push(iv);
        }
        IntervalUnion::new(out).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{int, rat};

    fn union(pairs: &[(i64, i64, i64, i64)]) -> IntervalUnion {
        IntervalUnion::new(
            pairs
                .iter()
                .map(|&(a, b, c, d)| Interval::new(rat(a, b), rat(c, d)).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn normalization_merges_touching_and_drops_points() {
        let u = union(&[(1, 2, 1, 1), (0, 1, 1, 2), (3, 1, 3, 1), (2, 1, 5, 2), (9, 4, 3, 1)]);
        assert_eq!(u.len(), 2);
        assert_eq!(u.intervals()[0], Interval::new(int(0), int(1)).unwrap());
        assert_eq!(u.intervals()[1], Interval::new(int(2), int(3)).unwrap());
        assert_eq!(u.measure(), int(2));
    }

    #[test]
    fn complement_examples() {
        let w = Interval::new(int(-1), int(2)).unwrap();
        let full = union(&[(0, 1, 1, 1)]);
        assert_eq!(full.complement_window(&w).unwrap(), union(&[(-1, 1, 0, 1), (1, 1, 2, 1)]));

        let unit = Interval::new(int(0), int(1)).unwrap();
        assert_eq!(IntervalUnion::empty().complement_window(&unit).unwrap(), full);

        let k1 = union(&[(0, 1, 1, 4), (3, 4, 1, 1)]);
        let c = k1.complement_window(&w).unwrap();
        assert_eq!(c, union(&[(-1, 1, 0, 1), (1, 4, 3, 4), (1, 1, 2, 1)]));
        assert_eq!(c.measure(), int(3) - k1.measure());

        assert_eq!(k1.complement_window(&unit).unwrap(), union(&[(1, 4, 3, 4)]));
        let small = Interval::new(int(0), rat(1, 2)).unwrap();
        assert_eq!(k1.complement_window(&small), Err(Error::WindowTooSmall));
    }

    #[test]
    fn measure_in_clips() {
        let k1 = union(&[(0, 1, 1, 4), (3, 4, 1, 1)]);
        assert_eq!(k1.measure_in(&rat(-1, 1), &int(2)), rat(1, 2));
        assert_eq!(k1.measure_in(&rat(1, 8), &rat(7, 8)), rat(1, 4));
        assert_eq!(k1.measure_in(&rat(1, 4), &rat(3, 4)), int(0));
        assert!(k1.contains(&rat(1, 4)));
        assert!(!k1.contains(&rat(1, 2)));
    }

    #[test]
    fn json_roundtrip() {
        let k1 = union(&[(0, 1, 1, 4), (3, 4, 1, 1)]);
        let text = serde_json::to_string(&k1).unwrap();
        assert_eq!(text, r#"[["0","1","1","4"],["3","4","1","1"]]"#);
        let back: IntervalUnion = serde_json::from_str(&text).unwrap();
        assert_eq!(back, k1);
        assert!(serde_json::from_str::<IntervalUnion>(r#"[["1","0","1","1"]]"#).is_err());
    }
}
