//! Fit of `theta(L) ≈ c exp(-C L^(-alpha))`.
//!
//! For a fixed `c > max theta` the model is linear:
//! `ln(-ln(theta / c)) = ln C + alpha (-ln L)`. The outer search picks `c`
//! maximizing the coefficient of determination of that line.

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{fit_line, LineFit};
use crate::rational::{format_rational, ln};

use super::thickness::ThicknessProfile;

pub const MIN_FIT_SAMPLES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaFit {
    pub alpha_hat: f64,
    pub c_hat: f64,
    #[serde(rename = "C_hat")]
    pub big_c_hat: f64,
    pub r2: f64,
    pub samples: usize,
}

pub fn fit_alpha(profile: &ThicknessProfile) -> Result<AlphaFit> {
    if let Some(zero) = profile.samples.iter().find(|s| s.theta.is_zero()) {
        return Err(Error::NotExponentiallyThick { scale: format_rational(&zero.l) });
    }
    let usable: Vec<_> = profile.samples.iter().filter(|s| !s.theta.is_one()).collect();
    if usable.len() < MIN_FIT_SAMPLES {
        if usable.len() < profile.samples.len() {
            return Err(Error::ModelBoundary);
        }
        return Err(Error::TooFewSamples { needed: MIN_FIT_SAMPLES, got: usable.len() });
    }
    let x: Vec<f64> = usable.iter().map(|s| -ln(&s.l)).collect();
    let ln_theta: Vec<f64> = usable.iter().map(|s| ln(&s.theta)).collect();
    let ln_max = ln_theta.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    // ln c = ln_max + e^rho keeps c strictly above every theta.
    let line_at = |rho: f64| -> LineFit {
        let ln_c = ln_max + rho.exp();
        let y: Vec<f64> = ln_theta.iter().map(|lt| (ln_c - lt).ln()).collect();
        fit_line(&x, &y)
    };
    let cost = |rho: f64| 1.0 - line_at(rho).r2;

    let (lo, hi, steps) = (-30.0, 6.0, 360);
    let h = (hi - lo) / steps as f64;
    let mut best_i: usize = 0;
    let mut best_cost = f64::INFINITY;
    for i in 0..=steps {
        let c = cost(lo + h * i as f64);
        if c < best_cost {
            best_cost = c;
            best_i = i;
        }
    }
    let a = lo + h * best_i.saturating_sub(1) as f64;
    let b = (lo + h * (best_i + 1) as f64).min(hi);
    let rho = golden_section(cost, a, b, 1e-12);
    let line = line_at(rho);
    if !line.slope.is_finite() || !line.intercept.is_finite() {
        return Err(Error::FitFailed("non-finite line fit".into()));
    }
    Ok(AlphaFit {
        alpha_hat: line.slope,
        c_hat: (ln_max + rho.exp()).exp(),
        big_c_hat: line.intercept.exp(),
        r2: line.r2,
        samples: usable.len(),
    })
}

fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol * (1.0 + a.abs() + b.abs()) {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Thickness model `c exp(-C L^(-alpha))` evaluated in double precision.
pub fn model_theta(fit: &AlphaFit, l: f64) -> f64 {
    fit.c_hat * (-fit.big_c_hat * l.powf(-fit.alpha_hat)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval_sets::thickness::log_spaced_scales;
    use crate::rational::{int, to_f64, Rational};

    fn synthetic(f: impl Fn(f64) -> f64, n: usize) -> ThicknessProfile {
        let pairs = log_spaced_scales(-12.0, -2.0, n)
            .into_iter()
            .map(|l| {
                let t = f(to_f64(&l));
                (l, Rational::from_float(t).unwrap())
            })
            .collect();
        ThicknessProfile::from_pairs(pairs).unwrap()
    }

    #[test]
    fn recovers_its_own_model() {
        let p = synthetic(|l| (-l.powf(-0.5)).exp(), 16);
        let fit = fit_alpha(&p).unwrap();
        assert!((fit.alpha_hat - 0.5).abs() < 1e-6, "{fit:?}");
        assert!((fit.big_c_hat - 1.0).abs() < 1e-4);
        assert!(fit.r2 > 0.999_999);

        let p = synthetic(|l| 0.3 * (-2.0 * l.powf(-0.25)).exp(), 12);
        let fit = fit_alpha(&p).unwrap();
        assert!((fit.alpha_hat - 0.25).abs() < 1e-6, "{fit:?}");
        assert!((fit.c_hat - 0.3).abs() < 1e-4);
    }

    #[test]
    fn degenerate_profiles() {
        let ones = synthetic(|_| 1.0, 10);
        assert_eq!(fit_alpha(&ones), Err(Error::ModelBoundary));
        let few = synthetic(|l| (-l.powf(-0.5)).exp(), 5);
        assert_eq!(fit_alpha(&few), Err(Error::TooFewSamples { needed: 8, got: 5 }));
        let mut zero = synthetic(|l| (-l.powf(-0.5)).exp(), 10);
        zero.samples[3].theta = int(0);
        assert!(matches!(fit_alpha(&zero), Err(Error::NotExponentiallyThick { .. })));
    }
}
