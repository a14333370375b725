use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

pub const MIN_QUAD_POINTS: usize = 64;

/// Smooth cutoff: `1` on `[-p, p]`, `0` outside `(-w, w)`, joined by the
/// `e^{-1/τ}` smooth step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChiShape {
    pub w: f64,
    pub p: f64,
}

impl Default for ChiShape {
    fn default() -> Self {
        ChiShape { w: 0.75, p: 0.5 }
    }
}

impl ChiShape {
    pub fn eval(&self, u: f64) -> f64 {
        let a = u.abs();
        if a <= self.p {
            return 1.0;
        }
        if a >= self.w {
            return 0.0;
        }
        let tau = (self.w - a) / (self.w - self.p);
        let f = |t: f64| if t > 0.0 { (-1.0 / t).exp() } else { 0.0 };
        let (x, y) = (f(tau), f(1.0 - tau));
        x / (x + y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeParams {
    pub s: f64,
    pub xi0: f64,
    pub h: f64,
    #[serde(default)]
    pub chi: ChiShape,
    #[serde(default = "default_quad_points")]
    pub quad_points: usize,
}

fn default_quad_points() -> usize {
    512
}

impl ProbeParams {
    pub fn new(s: f64, h: f64) -> Self {
        ProbeParams { s, xi0: 1.0, h, chi: ChiShape::default(), quad_points: default_quad_points() }
    }

    pub fn with_h(&self, h: f64) -> Self {
        ProbeParams { h, ..*self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.s > 0.0 && self.s < 1.0) {
            return Err(invalid(format!("s = {} must lie in (0, 1)", self.s)));
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(invalid(format!("h = {} must be positive", self.h)));
        }
        if !(self.xi0 > 0.0 && self.xi0.is_finite()) {
            return Err(invalid(format!("xi0 = {} must be positive", self.xi0)));
        }
        let ChiShape { w, p } = self.chi;
        if !(p > 0.0 && p < w && w < self.xi0) {
            return Err(invalid(format!("need 0 < p < w < xi0, got p = {p}, w = {w}")));
        }
        if self.quad_points < MIN_QUAD_POINTS {
            return Err(invalid(format!(
                "quad_points = {} is below {MIN_QUAD_POINTS}",
                self.quad_points
            )));
        }
        Ok(())
    }

    pub fn beta(&self) -> f64 {
        (1.0 - self.s) / 2.0
    }

    /// Trapezoid intervals used at position `x`: the base count times the
    /// number of oscillation blocks of `e^{ixu/h}`.
    pub fn nodes_for(&self, x: f64) -> usize {
        let blocks = (x.abs() / (32.0 * self.h)).ceil().max(1.0) as usize;
        self.quad_points * blocks
    }
}

/// Samples of the `u`-integrand that do not depend on `(t, x)`.
struct Kernel {
    du: f64,
    amp: Vec<f64>,
    rate: Vec<f64>,
    freq: Vec<f64>,
}

impl Kernel {
    fn new(p: &ProbeParams, n: usize) -> Self {
        let w = p.chi.w;
        let du = 2.0 * w / n as f64;
        let hs = p.h.powf(-p.s);
        let mut amp = Vec::with_capacity(n);
        let mut rate = Vec::with_capacity(n);
        let mut freq = Vec::with_capacity(n);
        // the end nodes carry chi = 0
        for j in 1..n {
            let u = -w + j as f64 * du;
            let c = p.chi.eval(u);
            if c == 0.0 {
                continue;
            }
            let xi = p.xi0 + u;
            amp.push(c * (-u * u / (2.0 * p.h)).exp());
            rate.push(xi.abs().powf(p.s) * hs);
            freq.push(xi / p.h);
        }
        Kernel { du, amp, rate, freq }
    }

    fn eval(&self, ts: &[f64], x: f64) -> (Vec<Complex64>, Vec<f64>) {
        let phases: Vec<Complex64> =
            self.freq.iter().map(|f| Complex64::from_polar(1.0, x * f)).collect();
        let mut values = Vec::with_capacity(ts.len());
        let mut abs_sums = Vec::with_capacity(ts.len());
        for &t in ts {
            let mut acc = Complex64::new(0.0, 0.0);
            let mut abs = 0.0;
            for ((a, r), e) in self.amp.iter().zip(&self.rate).zip(&phases) {
                let m = a * (-t * r).exp();
                acc += e * m;
                abs += m;
            }
            values.push(acc * self.du);
            abs_sums.push(abs * self.du);
        }
        (values, abs_sums)
    }
}

fn check_times(ts: &[f64]) -> Result<()> {
    if let Some(t) = ts.iter().find(|t| !(**t >= 0.0 && t.is_finite())) {
        return Err(invalid(format!("t = {t} must be nonnegative")));
    }
    Ok(())
}

/// `g_h(t, x) = ∫ χ(u) exp(-u²/2h + ix(ξ0+u)/h - t|ξ0+u|^s h^{-s}) du` by the
/// trapezoid rule on the support of `χ`.
pub fn eval_g(params: &ProbeParams, t: f64, x: f64) -> Result<Complex64> {
    Ok(eval_g_times(params, &[t], x)?[0])
}

/// `g_h(t, x)` for several `t` at one `x`.
pub fn eval_g_times(params: &ProbeParams, ts: &[f64], x: f64) -> Result<Vec<Complex64>> {
    params.validate()?;
    check_times(ts)?;
    if !x.is_finite() {
        return Err(invalid("x must be finite"));
    }
    Ok(Kernel::new(params, params.nodes_for(x)).eval(ts, x).0)
}

/// A value with an estimate of its absolute error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certified {
    pub value: Complex64,
    /// Change under node doubling.
    pub doubling_change: f64,
    /// Rounding floor `ε √n Σ|f_j| du`.
    pub rounding: f64,
}

impl Certified {
    pub fn error(&self) -> f64 {
        self.doubling_change.max(self.rounding)
    }

    /// `|value|` exceeds its error estimate by the given factor.
    pub fn resolved(&self, factor: f64) -> bool {
        self.value.norm() > factor * self.error()
    }
}

pub fn eval_g_certified(params: &ProbeParams, ts: &[f64], x: f64) -> Result<Vec<Certified>> {
    params.validate()?;
    check_times(ts)?;
    let n = params.nodes_for(x);
    let (a, abs) = Kernel::new(params, n).eval(ts, x);
    let (b, _) = Kernel::new(params, 2 * n).eval(ts, x);
    let sqrt_n = (2.0 * n as f64).sqrt();
    Ok(a
        .iter()
        .zip(&b)
        .zip(&abs)
        .map(|((va, vb), s)| Certified {
            value: *vb,
            doubling_change: (va - vb).norm(),
            rounding: f64::EPSILON * sqrt_n * s,
        })
        .collect())
}

/// `∫ |g_h(t, x)|² dx = 2πh ∫ |χ(u)|² e^{-u²/h - 2t|ξ0+u|^s h^{-s}} du`.
pub fn plancherel_norm_sq(params: &ProbeParams, t: f64) -> Result<f64> {
    params.validate()?;
    check_times(&[t])?;
    let k = Kernel::new(params, 4 * params.quad_points);
    let sum: f64 = k.amp.iter().zip(&k.rate).map(|(a, r)| (a * (-t * r).exp()).powi(2)).sum();
    Ok(2.0 * PI * params.h * sum * k.du)
}

/// Leading asymptotics
/// `√(2πh) exp(ixξ0/h - x²/2h - t z^s h^{-s} + (t s z^{s-1})² h^{1-2s}/2)`,
/// `z = ξ0 + ix`. The last exponent term is the `O(h^{1-2s})` correction
/// from completing the square around the shifted Gaussian.
pub fn asymptotic_g(params: &ProbeParams, t: f64, x: f64) -> Result<Complex64> {
    params.validate()?;
    check_times(&[t])?;
    let (s, h) = (params.s, params.h);
    let z = Complex64::new(params.xi0, x);
    let zs = z.powf(s);
    assert!(zs.re > 0.0, "(xi0 + ix)^s left the right half-plane at x = {x}");
    let drift = t * s * z.powf(s - 1.0);
    let expo = Complex64::new(-x * x / (2.0 * h), x * params.xi0 / h) - t * zs * h.powf(-s)
        + 0.5 * drift * drift * h.powf(1.0 - 2.0 * s);
    Ok((2.0 * PI * h).sqrt() * expo.exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeResult {
    pub h: f64,
    pub t: f64,
    pub x: f64,
    pub value: Complex64,
    pub asymptotic_value: Complex64,
    pub rel_error: f64,
    pub beta: f64,
    pub eta: f64,
}

pub fn probe_point(params: &ProbeParams, t: f64, x: f64, eta: f64) -> Result<ProbeResult> {
    let value = eval_g(params, t, x)?;
    let asymptotic_value = asymptotic_g(params, t, x)?;
    Ok(ProbeResult {
        h: params.h,
        t,
        x,
        value,
        asymptotic_value,
        rel_error: ((value - asymptotic_value) / asymptotic_value).norm(),
        beta: params.beta(),
        eta,
    })
}
