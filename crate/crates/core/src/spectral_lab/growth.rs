use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::interval_sets::IntervalUnion;
use crate::quadrature::fit_line;

use super::gramian::spectral_constant;
use super::grid::GridSpec;

pub const MIN_GROWTH_SAMPLES: usize = 8;
/// `max λ / min λ` must reach two decades.
pub const MIN_SPAN: f64 = 100.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralGrowth {
    /// `e` in `-ln d(λ) ≍ λ^e`.
    pub exponent: f64,
    pub r2: f64,
    pub lambdas: Vec<f64>,
    pub d: Vec<f64>,
}

fn check_lambdas(lambdas: &[f64]) -> Result<()> {
    if lambdas.len() < MIN_GROWTH_SAMPLES {
        return Err(Error::TooFewSamples { needed: MIN_GROWTH_SAMPLES, got: lambdas.len() });
    }
    if let Some(bad) = lambdas.iter().find(|l| !(**l > 0.0 && l.is_finite())) {
        return Err(invalid(format!("lambda = {bad} must be positive")));
    }
    let lo = lambdas.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = lambdas.iter().cloned().fold(0.0, f64::max);
    if hi / lo < MIN_SPAN {
        return Err(Error::InsufficientSpan { ratio: hi / lo });
    }
    Ok(())
}

/// Line fit of `ln(-ln d)` against `ln λ`.
pub fn fit_growth_from_values(lambdas: &[f64], d: &[f64]) -> Result<SpectralGrowth> {
    check_lambdas(lambdas)?;
    if d.len() != lambdas.len() {
        return Err(invalid("lambdas and d differ in length"));
    }
    for (&lambda, &v) in lambdas.iter().zip(d) {
        if !(v > 0.0) {
            return Err(Error::Resolution { lambda, value: v });
        }
        if v >= 1.0 {
            return Err(Error::FitFailed(format!("d({lambda}) = {v} shows no decay")));
        }
    }
    let x: Vec<f64> = lambdas.iter().map(|l| l.ln()).collect();
    let y: Vec<f64> = d.iter().map(|v| (-v.ln()).ln()).collect();
    let line = fit_line(&x, &y);
    Ok(SpectralGrowth { exponent: line.slope, r2: line.r2, lambdas: lambdas.to_vec(), d: d.to_vec() })
}

fn measure_all(omega: &IntervalUnion, lambdas: &[f64], grid: &GridSpec) -> Result<Vec<f64>> {
    lambdas.par_iter().map(|&l| spectral_constant(omega, l, grid)).collect()
}

pub fn fit_spectral_growth(
    omega: &IntervalUnion,
    lambdas: &[f64],
    grid: &GridSpec,
) -> Result<SpectralGrowth> {
    check_lambdas(lambdas)?;
    let d = measure_all(omega, lambdas, grid)?;
    fit_growth_from_values(lambdas, &d)
}

/// Constants of the spectral inequality `‖f‖ ≤ d0 e^{d1 μ^ζ} ‖f‖_{L²(ω)}`
/// for `A = (-Δ)^{s/2}`, and the three free constants of the observability
/// bound built from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LRConstants {
    pub d0: f64,
    pub d1: f64,
    pub zeta: f64,
    #[serde(default = "one")]
    pub c1: f64,
    #[serde(default = "one")]
    pub c2: f64,
    #[serde(default = "one")]
    pub c3: f64,
    #[serde(rename = "kov_K", default)]
    pub kov_k: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl LRConstants {
    pub fn new(d0: f64, d1: f64, zeta: f64) -> Self {
        LRConstants { d0, d1, zeta, c1: 1.0, c2: 1.0, c3: 1.0, kov_k: None }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.zeta > 0.0 && self.zeta < 1.0) {
            return Err(invalid(format!("zeta = {} must lie in (0, 1)", self.zeta)));
        }
        if !(self.d0 > 0.0 && self.d0.is_finite()) || !(self.d1 >= 0.0 && self.d1.is_finite()) {
            return Err(invalid("need d0 > 0 and d1 >= 0"));
        }
        for (name, c) in [("c1", self.c1), ("c2", self.c2), ("c3", self.c3)] {
            if !(c > 0.0 && c.is_finite()) {
                return Err(invalid(format!("{name} = {c} must be positive")));
            }
        }
        Ok(())
    }
}

/// `c1 d0 (2 d0 + 1)^{c2} exp(c3 (d1 / T^ζ)^{1/(1-ζ)})`.
pub fn predicted_cobs(lr: &LRConstants, t: f64) -> Result<f64> {
    lr.validate()?;
    if !(t > 0.0) {
        return Err(invalid(format!("T = {t} must be positive")));
    }
    let expo = lr.c3 * (lr.d1 / t.powf(lr.zeta)).powf(1.0 / (1.0 - lr.zeta));
    Ok(lr.c1 * lr.d0 * (2.0 * lr.d0 + 1.0).powf(lr.c2) * expo.exp())
}

/// Fits `ln d(λ)^{-1/2} ≤ ln d0 + d1 μ^ζ` with `μ = λ^{s/2}` the matching
/// eigenvalue of `(-Δ)^{s/2}` and `ζ = α/s`. Least squares gives the slope;
/// the intercept is then raised until the bound holds at every sample.
pub fn fit_lr_from_values(lambdas: &[f64], d: &[f64], s: f64, alpha: f64) -> Result<LRConstants> {
    if !(s > 0.0) || !(alpha > 0.0) {
        return Err(invalid("s and alpha must be positive"));
    }
    if d.len() != lambdas.len() || lambdas.len() < 2 {
        return Err(invalid("need matching lambdas and d, at least two"));
    }
    let zeta = alpha / s;
    if !(zeta > 0.0 && zeta < 1.0) {
        return Err(invalid(format!("zeta = alpha/s = {zeta} must lie in (0, 1)")));
    }
    for (&lambda, &v) in lambdas.iter().zip(d) {
        if !(v > 0.0) {
            return Err(Error::Resolution { lambda, value: v });
        }
    }
    let x: Vec<f64> = lambdas.iter().map(|l| l.powf(0.5 * s).powf(zeta)).collect();
    let y: Vec<f64> = d.iter().map(|v| -0.5 * v.ln()).collect();
    let line = fit_line(&x, &y);
    let slope = if line.slope.is_finite() { line.slope.max(0.0) } else { 0.0 };
    let intercept = x
        .iter()
        .zip(&y)
        .map(|(xi, yi)| yi - slope * xi)
        .fold(f64::NEG_INFINITY, f64::max);
    let lr = LRConstants::new(intercept.exp(), slope, zeta);
    lr.validate()?;
    Ok(lr)
}

pub fn calibrate_lr_constants(
    omega: &IntervalUnion,
    s: f64,
    alpha: f64,
    lambdas: &[f64],
    grid: &GridSpec,
) -> Result<LRConstants> {
    let growth = fit_spectral_growth(omega, lambdas, grid);
    let d = match growth {
        Ok(g) => g.d,
        // a fully observed window has d = 1 and nothing to fit
        Err(Error::FitFailed(_)) => measure_all(omega, lambdas, grid)?,
        Err(e) => return Err(e),
    };
    fit_lr_from_values(lambdas, &d, s, alpha)
}

/// Sets `c1` so that `predicted_cobs / T` equals `c_meas` at `T`.
pub fn fit_c1(lr: &LRConstants, t: f64, c_meas: f64) -> Result<LRConstants> {
    if !(c_meas > 0.0 && c_meas.is_finite()) {
        return Err(invalid(format!("C_meas = {c_meas} must be positive")));
    }
    let base = LRConstants { c1: 1.0, ..lr.clone() };
    let p = predicted_cobs(&base, t)?;
    Ok(LRConstants { c1: c_meas * t / p, ..base })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geomspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a * (b / a).powf(i as f64 / (n - 1) as f64)).collect()
    }

    #[test]
    fn self_fit_of_stretched_exponential() {
        let ls = geomspace(1.0, 1e3, 12);
        let d: Vec<f64> = ls.iter().map(|l| (-l.powf(0.3)).exp()).collect();
        let g = fit_growth_from_values(&ls, &d).unwrap();
        assert!((g.exponent - 0.3).abs() < 1e-6);
    }

    #[test]
    fn growth_input_checks() {
        let ls = geomspace(1.0, 50.0, 12);
        let d = vec![0.5; 12];
        assert!(matches!(fit_growth_from_values(&ls, &d), Err(Error::InsufficientSpan { .. })));
        let ls = geomspace(1.0, 1e3, 5);
        assert!(matches!(
            fit_growth_from_values(&ls, &[0.5; 5]),
            Err(Error::TooFewSamples { needed: 8, got: 5 })
        ));
        let ls = geomspace(1.0, 1e3, 8);
        let mut d = vec![0.5; 8];
        d[4] = 0.0;
        assert!(matches!(fit_growth_from_values(&ls, &d), Err(Error::Resolution { .. })));
    }

    #[test]
    fn predicted_constant_examples() {
        let lr = LRConstants::new(1.0, 0.0, 0.5);
        assert_eq!(predicted_cobs(&lr, 0.3).unwrap(), 3.0);
        let lr = LRConstants::new(1.0, 1.0, 0.5);
        assert!((predicted_cobs(&lr, 1.0).unwrap() - 3.0 * 1f64.exp()).abs() < 1e-14);
        let ts = [0.1, 0.2, 0.5, 1.0, 2.0];
        let p: Vec<f64> = ts.iter().map(|&t| predicted_cobs(&lr, t).unwrap()).collect();
        assert!(p.windows(2).all(|w| w[1] < w[0]));
        assert!(predicted_cobs(&LRConstants::new(1.0, 1.0, 1.0), 1.0).is_err());
    }

    #[test]
    fn lr_self_fit() {
        // d^{-1/2} = 2 e^{3 μ^0.4} with μ = λ^{1/2}
        let ls = geomspace(1.0, 1e4, 10);
        let d: Vec<f64> = ls
            .iter()
            .map(|l| {
                let mu = l.sqrt();
                (2.0 * (3.0 * mu.powf(0.4)).exp()).powi(-2)
            })
            .collect();
        let lr = fit_lr_from_values(&ls, &d, 1.0, 0.4).unwrap();
        assert!((lr.d0 - 2.0).abs() < 1e-6 && (lr.d1 - 3.0).abs() < 1e-6, "{lr:?}");
        assert_eq!(lr.zeta, 0.4);

        let flat = fit_lr_from_values(&ls, &vec![1.0; 10], 1.0, 0.4).unwrap();
        assert_eq!((flat.d0, flat.d1), (1.0, 0.0));
    }

    #[test]
    fn c1_matches_at_calibration_time() {
        let lr = LRConstants::new(1.5, 0.7, 0.5);
        let fitted = fit_c1(&lr, 0.2, 40.0).unwrap();
        assert!((predicted_cobs(&fitted, 0.2).unwrap() / 0.2 - 40.0).abs() < 1e-12);
    }
}
