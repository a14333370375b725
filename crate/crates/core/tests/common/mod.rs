//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

pub mod sphere;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use rand::Rng;
use thicket_core::interval_sets::{Interval, IntervalUnion};
use thicket_core::rational::Rational;

/// All coordinates are integers in units of `2^-UNIT_BITS`.
pub const UNIT_BITS: u32 = 20;
/// Brute-force grid step `2^-14`, in units.
pub const GRID_STEP: i128 = 1 << (UNIT_BITS - 14);

pub fn units_to_rational(v: i128) -> Rational {
    Rational::new(BigInt::from(v), BigInt::from(1i128 << UNIT_BITS))
}

pub fn rational_to_units(q: &Rational) -> Option<i128> {
    let scaled = q * Rational::from_integer(BigInt::from(1i128 << UNIT_BITS));
    if scaled.is_integer() {
        scaled.to_integer().to_i128()
    } else {
        None
    }
}

/// Random union of at most `max_pieces` intervals in `[0, 1]` whose endpoints
/// are multiples of `2^-k`, `k` drawn from `8..=20`.
pub fn random_dyadic_union(rng: &mut impl Rng, max_pieces: usize) -> Vec<(i128, i128)> {
    let k = rng.gen_range(8..=UNIT_BITS);
    let step = 1i128 << (UNIT_BITS - k);
    let cells = 1i128 << k;
    let pieces = rng.gen_range(0..=max_pieces);
    let mut pts: Vec<i128> = (0..2 * pieces).map(|_| rng.gen_range(0..=cells) * step).collect();
    pts.sort();
    pts.dedup();
    if pts.len() % 2 == 1 {
        pts.pop();
    }
    pts.chunks(2).map(|c| (c[0], c[1])).filter(|(a, b)| a < b).collect()
}

pub fn to_union(pieces: &[(i128, i128)]) -> IntervalUnion {
    IntervalUnion::new(
        pieces
            .iter()
            .map(|&(a, b)| Interval::new(units_to_rational(a), units_to_rational(b)).unwrap())
            .collect(),
    )
    .unwrap()
}

/// Exact `Leb(K ∩ [x - l, x + l])` in units.
pub fn mass_at(pieces: &[(i128, i128)], x: i128, l: i128) -> i128 {
    let (u, v) = (x - l, x + l);
    pieces.iter().map(|&(a, b)| (b.min(v) - a.max(u)).max(0)).sum()
}

/// Largest `K`-mass of a ball of radius `l` centred on the grid of step
/// `GRID_STEP` over `[-l, 1 + l]`, with the grid point attaining it.
pub fn grid_max_mass(pieces: &[(i128, i128)], l: i128) -> (i128, i128) {
    let one = 1i128 << UNIT_BITS;
    let start = (-l).div_euclid(GRID_STEP) * GRID_STEP;
    let mut best = (-1, 0);
    let mut x = start;
    while x <= one + l + GRID_STEP {
        let m = mass_at(pieces, x, l);
        if m > best.0 {
            best = (m, x);
        }
        x += GRID_STEP;
    }
    best
}
