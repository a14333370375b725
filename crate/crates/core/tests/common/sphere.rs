//! Rayleigh-quotient minimization by sampling the unit sphere of `C^m`,
//! followed by CMA-ES from the best sample. Only quotient values are used;
//! no matrices are formed.

use num_complex::Complex64;
use rand::Rng;
use cmaes::{CMAESOptions, DVector};
use thicket_core::interval_sets::IntervalUnion;
use thicket_core::quadrature::gauss_legendre_on;
use thicket_core::spectral_lab::{evolve, CellWeights, GridField, GridSpec};

fn normalize(c: &mut [Complex64]) {
    let n = c.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    c.iter_mut().for_each(|z| *z /= n);
}

fn random_vector(rng: &mut impl Rng, m: usize) -> Vec<Complex64> {
    let mut c: Vec<Complex64> =
        (0..m).map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).collect();
    normalize(&mut c);
    c
}

pub fn sphere_minimum(
    rng: &mut impl Rng,
    m: usize,
    samples: usize,
    quotient: impl Fn(&[Complex64]) -> f64,
) -> f64 {
    let mut best = random_vector(rng, m);
    let mut best_q = quotient(&best);
    for _ in 0..samples {
        let c = random_vector(rng, m);
        let q = quotient(&c);
        if q < best_q {
            best = c;
            best_q = q;
        }
    }
    // CMA-ES on ln q from the best sample; it learns the narrow valleys of
    // badly conditioned quotients that plain random search cannot follow
    let to_vec = |x: &DVector<f64>| {
        let mut c: Vec<Complex64> = x.as_slice().chunks(2).map(|p| Complex64::new(p[0], p[1])).collect();
        normalize(&mut c);
        c
    };
    let start: Vec<f64> = best.iter().flat_map(|z| [z.re, z.im]).collect();
    for _ in 0..2 {
        let mut cma = CMAESOptions::new(start.clone(), 0.1)
            .seed(rng.gen())
            .tol_fun(1e-13)
            .tol_x(1e-13)
            .max_function_evals(100_000)
            .build(|x: &DVector<f64>| quotient(&to_vec(x)).ln())
            .unwrap();
        if let Some(found) = cma.run().overall_best {
            best_q = best_q.min(found.value.exp());
        }
    }
    best_q
}

/// `f = Σ_q c_q e^{iξ_{k_q} x}` as a grid field.
pub fn band_field(grid: GridSpec, modes: &[i64], c: &[Complex64]) -> GridField {
    let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.points];
    for (k, z) in modes.iter().zip(c) {
        coeffs[grid.slot(*k)] = *z;
    }
    GridField::from_coeffs(grid, coeffs).unwrap()
}

pub fn spectral_quotient<'a>(
    omega: &IntervalUnion,
    grid: GridSpec,
    modes: &'a [i64],
) -> impl Fn(&[Complex64]) -> f64 + 'a {
    let weights = CellWeights::new(omega, &grid).unwrap();
    move |c| {
        let f = band_field(grid, modes, c);
        weights.mass(&f).unwrap() / f.norm_sq()
    }
}

/// `Σ_j w_j ‖e^{-t_j A} f‖²_{L²(ω)} / ‖e^{-TA} f‖²`, whose minimum is the
/// reciprocal of the observability constant.
pub fn observability_quotient<'a>(
    omega: &IntervalUnion,
    grid: GridSpec,
    modes: &'a [i64],
    t_final: f64,
    s: f64,
    nodes: usize,
) -> impl Fn(&[Complex64]) -> f64 + 'a {
    let rule = gauss_legendre_on(nodes, 0.0, t_final);
    let weights = CellWeights::new(omega, &grid).unwrap();
    move |c| {
        let f = band_field(grid, modes, c);
        let top = evolve(&f, t_final, s).unwrap().norm_sq();
        let obs: f64 = rule
            .iter()
            .map(|&(t, w)| w * weights.mass(&evolve(&f, t, s).unwrap()).unwrap())
            .sum();
        obs / top
    }
}
