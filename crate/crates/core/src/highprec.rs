//! Fixed-point transcendental functions on big integers.
//!
//! A value `v` is represented by the integer `round(v * 2^frac)`. Only what
//! the gap-ratio generator needs is here: `ln 2`, `ln q` for rationals and
//! `exp`, each accurate to a few units in the last place.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::rational::{ceil_log2, Rational};

fn one(frac: u32) -> BigInt {
    BigInt::one() << frac as usize
}

/// `ln 2 = sum_{k>=1} 1 / (k 2^k)`.
pub fn ln2(frac: u32) -> BigInt {
    let work = frac + 16;
    let mut sum = BigInt::zero();
    let mut pow = one(work); // 2^work / 2^k
    let mut k = 1u64;
    loop {
        pow >>= 1;
        if pow.is_zero() {
            break;
        }
        sum += &pow / k;
        k += 1;
    }
    sum >> 16
}

/// `e^z` for a fixed-point `z` of either sign.
pub fn exp(z: &BigInt, frac: u32) -> BigInt {
    let work = frac + 32;
    let z: BigInt = z << 32;
    let l2 = ln2(work);
    // z = k ln2 + f with 0 <= f < ln2
    let (k, f) = z.div_mod_floor(&l2);
    let ef = exp_small(&f, work);
    let k: i64 = k.try_into().expect("exponent fits in i64");
    let shifted = k - 32;
    if shifted >= 0 {
        ef << shifted as usize
    } else {
        ef >> (-shifted) as usize
    }
}

/// Taylor series for `0 <= f < 1`.
fn exp_small(f: &BigInt, frac: u32) -> BigInt {
    let mut sum = one(frac);
    let mut term = one(frac);
    let mut k = 1u64;
    loop {
        term = (term * f) >> frac as usize;
        term /= k;
        if term.is_zero() {
            break;
        }
        sum += &term;
        k += 1;
    }
    sum
}

/// Natural log of a positive rational.
pub fn ln(q: &Rational, frac: u32) -> BigInt {
    assert!(q.is_positive());
    let work = frac + 16;
    // q = 2^m * y with 1/2 < y <= 1
    let m = ceil_log2(q);
    let y = if m >= 0 {
        q / Rational::from_integer(BigInt::one() << m as usize)
    } else {
        q * Rational::from_integer(BigInt::one() << (-m) as usize)
    };
    // ln y = 2 atanh(z), z = (y - 1)/(y + 1), |z| <= 1/3
    let z = (&y - Rational::one()) / (&y + Rational::one());
    // Shifts of negative integers round towards -inf and never reach zero,
    // so run the series on |z|.
    let zf = (z.numer().abs() << work as usize) / z.denom();
    let z2 = (&zf * &zf) >> work as usize;
    let mut sum = BigInt::zero();
    let mut power = zf;
    let mut k = 1u64;
    while !power.is_zero() {
        sum += &power / k;
        power = (power * &z2) >> work as usize;
        k += 2;
    }
    let ln_y: BigInt = sum << 1;
    let ln_y = if z.is_negative() { -ln_y } else { ln_y };
    let total = ln_y + ln2(work) * m;
    total >> 16
}

/// Fixed-point value of a rational.
pub fn from_rational(q: &Rational, frac: u32) -> BigInt {
    (q.numer() << frac as usize).div_floor(q.denom())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::rat;
    use num_traits::ToPrimitive;

    fn to_f64(v: &BigInt, frac: u32) -> f64 {
        v.to_f64().unwrap() / 2f64.powi(frac as i32)
    }

    #[test]
    fn ln2_matches_double() {
        assert!((to_f64(&ln2(80), 80) - std::f64::consts::LN_2).abs() < 1e-16);
    }

    #[test]
    fn exp_and_ln_match_double() {
        let frac = 100;
        for &x in &[-7.25f64, -1.0, -0.3, 0.0, 0.5, 3.0] {
            let z = from_rational(&Rational::from_float(x).unwrap(), frac);
            let got = to_f64(&exp(&z, frac), frac);
            assert!((got - x.exp()).abs() <= 1e-15 * x.exp(), "exp({x})");
        }
        for (p, q) in [(1, 2), (1, 3), (7, 5), (1, 1000), (999, 1000)] {
            let got = to_f64(&ln(&rat(p, q), frac), frac);
            let want = (p as f64 / q as f64).ln();
            assert!((got - want).abs() < 1e-15, "ln({p}/{q})");
        }
    }

    #[test]
    fn exp_ln_roundtrip_at_high_precision() {
        let frac = 400;
        let q = rat(22, 7);
        let back = exp(&ln(&q, frac), frac);
        let want = from_rational(&q, frac);
        let diff = (back - want).abs();
        assert!(diff < BigInt::from(1u64 << 12));
    }
}
