//! Exact rational helpers shared by the set constructions.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{invalid, Result};

pub type Rational = BigRational;

pub fn rat(num: i64, den: i64) -> Rational {
    Rational::new(BigInt::from(num), BigInt::from(den))
}

pub fn int(n: i64) -> Rational {
    Rational::from_integer(BigInt::from(n))
}

/// `m * 2^e` as an exact rational.
pub fn dyadic(m: BigInt, e: i64) -> Rational {
    if e >= 0 {
        Rational::from_integer(m << (e as usize))
    } else {
        reduce_dyadic(m, (-e) as u64)
    }
}

/// `m / 2^k`, reduced by shifting instead of a full gcd.
pub fn reduce_dyadic(m: BigInt, k: u64) -> Rational {
    if m.is_zero() {
        return Rational::zero();
    }
    let tz = m.trailing_zeros().unwrap_or(0).min(k);
    Rational::new_raw(m >> (tz as usize), BigInt::one() << ((k - tz) as usize))
}

/// Parses `p/q`, an integer, or a plain decimal such as `0.125` exactly.
pub fn parse_rational(text: &str) -> Result<Rational> {
    let s = text.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| invalid(format!("bad numerator in {s:?}")))?;
        let q: BigInt = q.trim().parse().map_err(|_| invalid(format!("bad denominator in {s:?}")))?;
        if q.is_zero() {
            return Err(invalid(format!("zero denominator in {s:?}")));
        }
        return Ok(Rational::new(p, q));
    }
    if let Some((whole, frac)) = s.split_once('.') {
        let negative = whole.trim_start().starts_with('-');
        let digits = frac.len();
        if digits == 0 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(invalid(format!("bad decimal {s:?}")));
        }
        let w: BigInt = if whole.is_empty() || whole == "-" {
            BigInt::zero()
        } else {
            whole.parse().map_err(|_| invalid(format!("bad decimal {s:?}")))?
        };
        let f: BigInt = frac.parse().map_err(|_| invalid(format!("bad decimal {s:?}")))?;
        let scale = num_traits::pow(BigInt::from(10), digits);
        let mag = w.abs() * &scale + f;
        let num = if negative { -mag } else { mag };
        return Ok(Rational::new(num, scale));
    }
    let n: BigInt = s.parse().map_err(|_| invalid(format!("bad rational {s:?}")))?;
    Ok(Rational::from_integer(n))
}

pub fn format_rational(q: &Rational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

fn bit_len(n: &BigInt) -> i64 {
    n.bits() as i64
}

/// Smallest integer `n` with `2^n >= x`, for `x > 0`.
pub fn ceil_log2(x: &Rational) -> i64 {
    assert!(x.is_positive(), "ceil_log2 of a non-positive number");
    let (p, q) = (x.numer(), x.denom());
    // 2^(bp-1) <= p < 2^bp, same for q, so log2 x lies in (bp-bq-1, bp-bq+1).
    let mut n = bit_len(p) - bit_len(q) - 1;
    while !pow2_geq(n, p, q) {
        n += 1;
    }
    n
}

/// Whether `2^n >= p/q`.
fn pow2_geq(n: i64, p: &BigInt, q: &BigInt) -> bool {
    if n >= 0 {
        (q << (n as usize)) >= *p
    } else {
        *q >= (p << ((-n) as usize))
    }
}

/// `log2(x)` in double precision for any positive rational, including
/// values far outside the f64 exponent range.
pub fn log2(x: &Rational) -> f64 {
    assert!(x.is_positive(), "log2 of a non-positive number");
    let (p, q) = (x.numer(), x.denom());
    let lp = top_bits_log2(p);
    let lq = top_bits_log2(q);
    lp - lq
}

fn top_bits_log2(n: &BigInt) -> f64 {
    let bits = n.bits();
    if bits <= 1000 {
        return n.to_f64().unwrap().log2();
    }
    let shift = bits - 64;
    let top = (n.magnitude() >> shift).to_f64().unwrap();
    top.log2() + shift as f64
}

pub fn ln(x: &Rational) -> f64 {
    log2(x) * std::f64::consts::LN_2
}

/// Nearest double, with graceful underflow to zero and overflow to infinity.
pub fn to_f64(x: &Rational) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    match x.to_f64() {
        Some(v) if v.is_finite() && v != 0.0 => v,
        _ => {
            let sign = if x.numer().sign() == Sign::Minus { -1.0 } else { 1.0 };
            sign * 2f64.powf(log2(&x.abs()))
        }
    }
}

/// Exact dyadic rational closest to a finite double.
pub fn from_f64(x: f64) -> Result<Rational> {
    Rational::from_float(x).ok_or_else(|| invalid(format!("{x} is not finite")))
}

/// Rounds `x > 0` to a dyadic rational with `bits` significant bits.
pub fn round_to_significant_bits(x: &Rational, bits: u32) -> Rational {
    let e = ceil_log2(x) - bits as i64;
    // x / 2^e lies in (2^(bits-1), 2^bits]
    let scaled = if e >= 0 {
        x / Rational::from_integer(BigInt::one() << (e as usize))
    } else {
        x * Rational::from_integer(BigInt::one() << ((-e) as usize))
    };
    dyadic(round_half_up(&scaled), e)
}

fn round_half_up(x: &Rational) -> BigInt {
    let two = BigInt::from(2);
    (x.numer() * &two + x.denom()).div_floor(&(x.denom() * &two))
}

/// Least common multiple of the denominators.
pub fn common_denominator<'a>(values: impl IntoIterator<Item = &'a Rational>) -> BigInt {
    values
        .into_iter()
        .fold(BigInt::one(), |acc, v| acc.lcm(v.denom()))
}

/// Exact `Σ plus - Σ minus`. Runs in `i128` over a running common
/// denominator while that fits, then falls back to big rationals.
pub fn exact_signed_sum<'a>(
    plus: impl IntoIterator<Item = &'a Rational>,
    minus: impl IntoIterator<Item = &'a Rational>,
) -> Rational {
    let terms = plus.into_iter().map(|q| (1i128, q)).chain(minus.into_iter().map(|q| (-1i128, q)));
    let (mut num, mut den) = (0i128, 1i128);
    let mut big = Rational::zero();
    for (sign, q) in terms {
        let small = (|| {
            let (p, d) = (q.numer().to_i128()?, q.denom().to_i128()?);
            if den % d == 0 {
                return Some((num.checked_add(sign.checked_mul(p)?.checked_mul(den / d)?)?, den));
            }
            let g = den.gcd(&d);
            let lcm = den.checked_mul(d / g)?;
            let n = num.checked_mul(lcm / den)?.checked_add(sign.checked_mul(p)?.checked_mul(lcm / d)?)?;
            Some((n, lcm))
        })();
        match small {
            Some((n, d)) => (num, den) = (n, d),
            None => {
                big += Rational::new(BigInt::from(num), BigInt::from(den));
                (num, den) = (0, 1);
                if sign > 0 {
                    big += q;
                } else {
                    big -= q;
                }
            }
        }
    }
    big + Rational::new(BigInt::from(num), BigInt::from(den))
}

/// Serde adapter storing a rational as its `p/q` string.
pub mod serde_str {
    use super::{format_rational, parse_rational, Rational};
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(q: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(q))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        let text = String::deserialize(d)?;
        parse_rational(&text).map_err(D::Error::custom)
    }
}

/// Same as [`serde_str`] for a list of rationals.
pub mod serde_str_vec {
    use super::{format_rational, parse_rational, Rational};
    use serde::{de::Error as _, Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Rational], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(format_rational).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Rational>, D::Error> {
        let texts = Vec::<String>::deserialize(d)?;
        texts
            .iter()
            .map(|t| parse_rational(t).map_err(D::Error::custom))
            .collect()
    }
}
