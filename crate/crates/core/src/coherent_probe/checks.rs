use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::quadrature::{fit_line, gauss_legendre};

use super::probe::{
    asymptotic_g, eval_g_certified, eval_g_times, plancherel_norm_sq, ChiShape, ProbeParams,
};

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.5 * (a + b)];
    }
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

/// `h = 2^-k` for `k` in the given range.
pub fn dyadic_hs(k_lo: i32, k_hi: i32) -> Vec<f64> {
    (k_lo..=k_hi).map(|k| 2f64.powi(-k)).collect()
}

fn check_hs(hs: &[f64]) -> Result<()> {
    if hs.len() < 2 {
        return Err(invalid("need at least two values of h"));
    }
    if hs.iter().any(|h| !(*h > 0.0)) {
        return Err(invalid("h must be positive"));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InteriorOptions {
    pub hs: Vec<f64>,
    /// Points of the `x` grid lie in `[-x_radius, x_radius]`; `None` means `η/2`.
    pub x_radius: Option<f64>,
    pub t_points: usize,
    pub x_points: usize,
    pub tolerance: f64,
}

impl Default for InteriorOptions {
    fn default() -> Self {
        InteriorOptions { hs: dyadic_hs(4, 10), x_radius: None, t_points: 5, x_points: 9, tolerance: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteriorRow {
    pub h: f64,
    pub max_rel_error: f64,
    pub worst_t: f64,
    pub worst_x: f64,
    /// `max |g(0,x)| / (√(2πh) e^{-x²/2h}) - 1|` over the `x` grid.
    pub modulus_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteriorReport {
    pub s: f64,
    pub t_max: f64,
    pub eta: f64,
    pub x_radius: f64,
    pub rows: Vec<InteriorRow>,
    /// Slope of `ln(max error)` against `ln h`.
    pub order: f64,
    pub prefactor: f64,
    pub r2: f64,
    /// Steps along decreasing `h` where the error went up.
    pub inversions: usize,
    pub decreasing: bool,
    pub within_tolerance: bool,
}

fn interior_row(params: &ProbeParams, ts: &[f64], xs: &[f64]) -> Result<InteriorRow> {
    let h = params.h;
    let mut row = InteriorRow { h, max_rel_error: 0.0, worst_t: 0.0, worst_x: 0.0, modulus_error: 0.0 };
    for &x in xs {
        let values = eval_g_times(params, ts, x)?;
        for (&t, g) in ts.iter().zip(&values) {
            let a = asymptotic_g(params, t, x)?;
            let err = ((g - a) / a).norm();
            if err > row.max_rel_error {
                row.max_rel_error = err;
                row.worst_t = t;
                row.worst_x = x;
            }
            if t == 0.0 {
                let gauss = (2.0 * std::f64::consts::PI * h).sqrt() * (-x * x / (2.0 * h)).exp();
                row.modulus_error = row.modulus_error.max((g.norm() / gauss - 1.0).abs());
            }
        }
    }
    Ok(row)
}

/// Compares `g_h` with its leading asymptotics on a `(t, x)` grid for each
/// `h` and fits the decay order of the worst relative error.
pub fn check_interior_asymptotics(
    params: &ProbeParams,
    t_max: f64,
    eta: f64,
    options: &InteriorOptions,
) -> Result<InteriorReport> {
    params.validate()?;
    if !(eta > 0.0) || eta >= params.xi0 {
        return Err(invalid(format!("eta = {eta} must lie in (0, xi0 = {})", params.xi0)));
    }
    if !(t_max >= 0.0) {
        return Err(invalid("T must be nonnegative"));
    }
    check_hs(&options.hs)?;
    let radius = options.x_radius.unwrap_or(0.5 * eta);
    if !(radius > 0.0 && radius < eta) {
        return Err(invalid("x_radius must lie in (0, eta)"));
    }
    let ts = linspace(0.0, t_max, options.t_points.max(1));
    let xs = linspace(-radius, radius, options.x_points.max(1));
    let mut rows = options
        .hs
        .par_iter()
        .map(|&h| interior_row(&params.with_h(h), &ts, &xs))
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| b.h.total_cmp(&a.h));

    let lx: Vec<f64> = rows.iter().map(|r| r.h.ln()).collect();
    let ly: Vec<f64> = rows.iter().map(|r| r.max_rel_error.ln()).collect();
    let line = fit_line(&lx, &ly);
    let inversions = rows.windows(2).filter(|w| w[1].max_rel_error > w[0].max_rel_error).count();
    let decreasing =
        inversions <= 1 && rows.last().unwrap().max_rel_error < rows[0].max_rel_error;
    let within_tolerance = rows.iter().all(|r| r.max_rel_error <= options.tolerance);
    Ok(InteriorReport {
        s: params.s,
        t_max,
        eta,
        x_radius: radius,
        rows,
        order: line.slope,
        prefactor: line.intercept.exp(),
        r2: line.r2,
        inversions,
        decreasing,
        within_tolerance,
    })
}

/// Largest candidate radius at which the relative error of the asymptotics
/// stays below `threshold` on `[0, T] × [-η, η]` for every `h`.
pub fn determine_eta(
    params: &ProbeParams,
    t_max: f64,
    hs: &[f64],
    candidates: &[f64],
    threshold: f64,
) -> Result<f64> {
    params.validate()?;
    check_hs(hs)?;
    let ts = linspace(0.0, t_max, 5);
    let mut best = None;
    for &eta in candidates {
        if !(eta > 0.0 && eta < params.xi0) {
            continue;
        }
        let xs = linspace(-eta, eta, 9);
        let worst = hs
            .par_iter()
            .map(|&h| interior_row(&params.with_h(h), &ts, &xs).map(|r| r.max_rel_error))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        if worst < threshold && best.is_none_or(|b| eta > b) {
            best = Some(eta);
        }
    }
    best.ok_or_else(|| Error::FitFailed("no candidate radius meets the error threshold".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InteriorNormReport {
    pub s: f64,
    #[serde(rename = "T")]
    pub t_final: f64,
    pub eta: f64,
    /// `(h, ‖g_h(T)‖_{L²(|x|<η)} / ‖g_h(0)‖_{L²})`, `h` decreasing.
    pub rows: Vec<(f64, f64)>,
    /// Lower envelope `c e^{-C h^{-s}}` over all rows.
    pub c: f64,
    #[serde(rename = "C")]
    pub big_c: f64,
    pub r2: f64,
    /// `(c, C)` refitted on the coarse and on the fine half of the sweep.
    pub halves: [(f64, f64); 2],
    /// Both halves within a factor 2 of the full fit.
    pub stable: bool,
}

/// `‖g_h(T)‖_{L²(|x|<η)}` by composite Gauss–Legendre on panels of width
/// `√h / 2`, summed in node order.
pub fn interior_norm(params: &ProbeParams, t_final: f64, eta: f64) -> Result<f64> {
    params.validate()?;
    if !(eta > 0.0) || !(t_final >= 0.0) {
        return Err(invalid("need eta > 0 and T >= 0"));
    }
    let (gx, gw) = gauss_legendre(16);
    let panels = (2.0 * eta / (0.5 * params.h.sqrt())).ceil() as usize;
    let pw = 2.0 * eta / panels as f64;
    let nodes: Vec<(f64, f64)> = (0..panels)
        .flat_map(|k| {
            let mid = -eta + (k as f64 + 0.5) * pw;
            gx.iter().zip(&gw).map(move |(y, w)| (mid + 0.5 * pw * y, 0.5 * pw * w)).collect::<Vec<_>>()
        })
        .collect();
    let parts = nodes
        .par_iter()
        .map(|&(x, w)| Ok(w * eval_g_times(params, &[t_final], x)?[0].norm_sqr()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum::<f64>().sqrt())
}

fn norm_envelope(s: f64, rows: &[(f64, f64)]) -> (f64, f64, f64) {
    let x: Vec<f64> = rows.iter().map(|(h, _)| h.powf(-s)).collect();
    let y: Vec<f64> = rows.iter().map(|(_, n)| n.ln()).collect();
    let line = fit_line(&x, &y);
    let big_c = (-line.slope).max(0.0);
    let ln_c = x.iter().zip(&y).map(|(a, b)| b + big_c * a).fold(f64::INFINITY, f64::min);
    (ln_c.exp(), big_c, line.r2)
}

/// Lower bound `‖g_h(T)‖_{L²(|x|<η)} ≥ c e^{-C h^{-s}}` along the sweep, for
/// the probe scaled to unit norm at `t = 0`.
pub fn interior_norm_bound(
    params: &ProbeParams,
    t_final: f64,
    eta: f64,
    hs: &[f64],
) -> Result<InteriorNormReport> {
    check_hs(hs)?;
    if hs.len() < 4 {
        return Err(invalid("need at least four values of h to compare halves"));
    }
    let mut rows = hs
        .iter()
        .map(|&h| {
            let p = params.with_h(h);
            Ok((h, interior_norm(&p, t_final, eta)? / plancherel_norm_sq(&p, 0.0)?.sqrt()))
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| b.0.total_cmp(&a.0));
    if let Some((h, _)) = rows.iter().find(|(_, n)| !(*n > 0.0)) {
        return Err(Error::FitFailed(format!("interior norm underflows at h = {h}")));
    }
    let (c, big_c, r2) = norm_envelope(params.s, &rows);
    let half = rows.len().div_ceil(2);
    let coarse = norm_envelope(params.s, &rows[..half]);
    let fine = norm_envelope(params.s, &rows[rows.len() - half..]);
    let within = |a: f64, b: f64| a <= 2.0 * b && b <= 2.0 * a;
    let stable = [coarse, fine].iter().all(|(hc, hb, _)| within(*hc, c) && within(*hb, big_c));
    Ok(InteriorNormReport {
        s: params.s,
        t_final,
        eta,
        rows,
        c,
        big_c,
        r2,
        halves: [(coarse.0, coarse.1), (fine.0, fine.1)],
        stable,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExteriorOptions {
    pub hs: Vec<f64>,
    pub t_points: usize,
    /// A value counts as resolved when it exceeds its error estimate by this factor.
    pub resolve_factor: f64,
}

impl Default for ExteriorOptions {
    fn default() -> Self {
        ExteriorOptions { hs: dyadic_hs(4, 10), t_points: 5, resolve_factor: 100.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExteriorRow {
    pub h: f64,
    pub x: f64,
    /// `max_t |g_h(t, x)|`.
    pub max_abs: f64,
    pub error: f64,
    pub resolved: bool,
}

/// Measured exterior bounds `x² |g_h(t, x)| ≤ B(h)` on the sampled
/// `(t, x)`, `|x| ≥ x_min`, one entry per `h`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayCertificate {
    pub s: f64,
    pub xi0: f64,
    pub chi: ChiShape,
    pub t_max: f64,
    pub eta: f64,
    pub x_min: f64,
    pub bounds: Vec<(f64, f64)>,
    pub c: f64,
}

impl DecayCertificate {
    /// `B(h)` if this `h` was checked for the same probe family.
    pub fn bound_for(&self, params: &ProbeParams, t_max: f64) -> Result<f64> {
        let same_family = self.s == params.s
            && self.xi0 == params.xi0
            && self.chi == params.chi
            && t_max <= self.t_max;
        let hit = self.bounds.iter().find(|(h, _)| (h - params.h).abs() <= 1e-12 * params.h);
        match hit {
            Some((_, b)) if same_family => Ok(*b),
            _ => Err(Error::DecayNotValidated { h: params.h }),
        }
    }

    /// Bound on `∫_{|x| > R} |g_h(t, x)|² dx` from `|g| ≤ B/x²`.
    pub fn tail_mass(&self, params: &ProbeParams, t_max: f64, r: f64) -> Result<f64> {
        if r < self.x_min {
            return Err(invalid(format!("R = {r} is inside the checked region |x| >= {}", self.x_min)));
        }
        let b = self.bound_for(params, t_max)?;
        Ok(2.0 * b * b / (3.0 * r.powi(3)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExteriorReport {
    pub s: f64,
    pub t_max: f64,
    pub eta: f64,
    pub rows: Vec<ExteriorRow>,
    /// Common `c` in `max_t |g_h(t, x)| ≤ A(x) e^{-c/h}`.
    pub c: f64,
    /// `(x, A(x))`, envelope prefactors for the common `c`.
    pub prefactors: Vec<(f64, f64)>,
    /// `C = max_x A(x) x²` in `|g| ≤ C |x|^{-2} e^{-c/h}`.
    #[serde(rename = "C")]
    pub big_c: f64,
    pub resolved_hs: usize,
    pub certificate: DecayCertificate,
}

impl ExteriorReport {
    /// `A(x1) / A(x2)`.
    pub fn prefactor_ratio(&self, x1: f64, x2: f64) -> Option<f64> {
        let find = |x: f64| self.prefactors.iter().find(|(y, _)| *y == x).map(|(_, a)| *a);
        Some(find(x1)? / find(x2)?)
    }
}

/// Exterior decay of `g_h` in `1/h` with a common rate across the sampled
/// positions. Values at the rounding floor are kept out of the fit but still
/// bound the certificate through their error estimate.
pub fn check_exterior_decay(
    params: &ProbeParams,
    t_max: f64,
    eta: f64,
    x_list: &[f64],
    options: &ExteriorOptions,
) -> Result<ExteriorReport> {
    params.validate()?;
    check_hs(&options.hs)?;
    if x_list.is_empty() {
        return Err(invalid("no exterior positions given"));
    }
    if let Some(x) = x_list.iter().find(|x| !(x.abs() > eta)) {
        return Err(invalid(format!("x = {x} lies in the interior region |x| <= eta = {eta}")));
    }
    let ts = linspace(0.0, t_max, options.t_points.max(1));
    let tasks: Vec<(f64, f64)> =
        options.hs.iter().flat_map(|&h| x_list.iter().map(move |&x| (h, x))).collect();
    let rows = tasks
        .par_iter()
        .map(|&(h, x)| {
            let vals = eval_g_certified(&params.with_h(h), &ts, x)?;
            let worst = vals
                .iter()
                .max_by(|a, b| a.value.norm().total_cmp(&b.value.norm()))
                .copied()
                .unwrap();
            let error = vals.iter().map(|v| v.error()).fold(0.0, f64::max);
            Ok(ExteriorRow {
                h,
                x,
                max_abs: worst.value.norm(),
                error,
                resolved: worst.value.norm() > options.resolve_factor * error,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    // ln|g| = ln A(x) - c/h, shared c
    let xs: Vec<f64> = {
        let mut v: Vec<f64> = x_list.iter().map(|x| x.abs()).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    let fit_rows: Vec<&ExteriorRow> = rows.iter().filter(|r| r.resolved).collect();
    let mut resolved_h: Vec<f64> = fit_rows.iter().map(|r| r.h).collect();
    resolved_h.sort_by(f64::total_cmp);
    resolved_h.dedup();
    if resolved_h.len() < 3 {
        return Err(Error::FitFailed(format!(
            "exterior values resolved at {} values of h, need 3",
            resolved_h.len()
        )));
    }
    let col = |x: f64| xs.iter().position(|y| *y == x.abs()).unwrap();
    let a = DMatrix::from_fn(fit_rows.len(), 1 + xs.len(), |i, j| {
        if j == 0 {
            -1.0 / fit_rows[i].h
        } else if col(fit_rows[i].x) == j - 1 {
            1.0
        } else {
            0.0
        }
    });
    let y = DVector::from_iterator(fit_rows.len(), fit_rows.iter().map(|r| r.max_abs.ln()));
    let sol = a
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|e| Error::FitFailed(e.to_string()))?;
    let c = sol[0];
    let mut ln_a = vec![f64::NEG_INFINITY; xs.len()];
    for r in &fit_rows {
        let k = col(r.x);
        ln_a[k] = ln_a[k].max(r.max_abs.ln() + c / r.h);
    }
    let prefactors: Vec<(f64, f64)> = xs.iter().zip(&ln_a).map(|(x, l)| (*x, l.exp())).collect();
    let big_c = prefactors.iter().map(|(x, a)| a * x * x).fold(0.0, f64::max);

    let mut bounds: Vec<(f64, f64)> = options
        .hs
        .iter()
        .map(|&h| {
            let b = rows
                .iter()
                .filter(|r| r.h == h)
                .map(|r| (r.max_abs + r.error) * r.x * r.x)
                .fold(0.0, f64::max);
            (h, b)
        })
        .collect();
    bounds.sort_by(|a, b| b.0.total_cmp(&a.0));
    let certificate = DecayCertificate {
        s: params.s,
        xi0: params.xi0,
        chi: params.chi,
        t_max,
        eta,
        x_min: xs[0],
        bounds,
        c,
    };
    Ok(ExteriorReport {
        s: params.s,
        t_max,
        eta,
        rows,
        c,
        prefactors,
        big_c,
        resolved_hs: resolved_h.len(),
        certificate,
    })
}
