use num_traits::Zero;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::interval_sets::{IntervalUnion, LocalMinimum, SvcSet};
use crate::quadrature::{gauss_legendre, gauss_legendre_on};
use crate::rational::{from_f64, int, to_f64, Rational};

use super::checks::DecayCertificate;
use super::probe::{eval_g_times, plancherel_norm_sq, ProbeParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NecessityConfig {
    #[serde(rename = "T")]
    pub t_final: f64,
    pub hs: Vec<f64>,
    /// Ball radius factor in `L = r h^β` for the reported `Leb(ω ∩ B(0, L))`.
    pub r: f64,
    pub t_nodes: usize,
    /// Gauss–Legendre nodes per `x` panel of width `√h / 2`.
    pub x_nodes: usize,
    /// Truncation radii tried in order.
    pub radii: Vec<f64>,
    /// Largest tail bound allowed, relative to the left-hand side.
    pub tail_tolerance: f64,
}

impl Default for NecessityConfig {
    fn default() -> Self {
        NecessityConfig {
            t_final: 0.1,
            hs: (6..=10).map(|k| 2f64.powi(-k)).collect(),
            r: 1.0,
            t_nodes: 16,
            x_nodes: 16,
            radii: vec![1.0, 2.0, 4.0, 8.0, 16.0],
            tail_tolerance: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecessityRow {
    pub h: f64,
    pub t_max: f64,
    /// `‖g_h(T)‖²` by `x`-quadrature on `[-R, R]` plus the tail bound.
    pub lhs: f64,
    pub lhs_plancherel: f64,
    pub lhs_tail: f64,
    /// `∫_0^T ‖g_h(t)‖²_{L²(ω)} dt`, tail bound included.
    pub rhs: f64,
    pub rhs_tail: f64,
    pub ratio: f64,
    pub eta: f64,
    #[serde(rename = "R")]
    pub radius: f64,
    pub ball_radius: f64,
    pub ball_measure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NecessityReport {
    pub rows: Vec<NecessityRow>,
    /// Ratio at the smallest `h` over the ratio at the largest.
    pub growth: f64,
    /// `max ratio / min ratio`.
    pub spread: f64,
}

/// `K` translated so that the minimizer of the local `ω`-mass at scale `L`
/// sits at the origin.
pub fn center_worst_point(set: &SvcSet, l: &Rational) -> Result<(IntervalUnion, LocalMinimum)> {
    let m = set.min_local_measure(l)?;
    let k = set.to_union()?.translate(&-m.argmin_x.clone());
    Ok((k, m))
}

/// Pieces of `ω = R \ K` inside `[-R, R]` as `(center, width)`, widths taken
/// from exact differences so that tiny gaps keep their size.
fn omega_pieces(k: &IntervalUnion, radius: f64) -> Result<Vec<(f64, f64)>> {
    let r = from_f64(radius)?;
    let lo = -r.clone();
    let mut edges: Vec<(Rational, Rational)> = Vec::with_capacity(k.len() + 1);
    let mut cursor = lo;
    for iv in k.intervals() {
        if iv.lo > cursor {
            edges.push((cursor.clone(), iv.lo.clone().min(r.clone())));
        }
        cursor = cursor.max(iv.hi.clone());
    }
    if cursor < r {
        edges.push((cursor, r));
    }
    Ok(edges
        .into_iter()
        .filter(|(a, b)| b > a)
        .map(|(a, b)| {
            let width = to_f64(&(&b - &a));
            let center = to_f64(&((&a + &b) / int(2)));
            (center, width)
        })
        .collect())
}

/// `Σ_i w_i Σ_t w_t |g(t, x_i)|²` over composite Gauss–Legendre nodes of the
/// pieces; summed in node order.
fn space_time_mass(
    params: &ProbeParams,
    pieces: &[(f64, f64)],
    times: &[(f64, f64)],
    x_nodes: usize,
) -> Result<f64> {
    let panel = 0.5 * params.h.sqrt();
    let (gx, gw) = gauss_legendre(x_nodes);
    let mut nodes = Vec::new();
    for &(center, width) in pieces {
        let n = (width / panel).ceil().max(1.0) as usize;
        let pw = width / n as f64;
        for k in 0..n {
            let mid = center - 0.5 * width + (k as f64 + 0.5) * pw;
            for (y, w) in gx.iter().zip(&gw) {
                nodes.push((mid + 0.5 * pw * y, 0.5 * pw * w));
            }
        }
    }
    let ts: Vec<f64> = times.iter().map(|(t, _)| *t).collect();
    let parts = nodes
        .par_iter()
        .map(|&(x, wx)| {
            let g = eval_g_times(params, &ts, x)?;
            Ok(wx * g.iter().zip(times).map(|(v, (_, wt))| wt * v.norm_sqr()).sum::<f64>())
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum())
}

/// Observability ratio `‖g_h(T)‖² / ∫_0^T ‖g_h(t)‖²_{L²(ω)} dt` along `h`
/// for `ω = R \ K`.
pub fn necessity_experiment(
    k: &IntervalUnion,
    base: &ProbeParams,
    config: &NecessityConfig,
    certificate: &DecayCertificate,
) -> Result<NecessityReport> {
    base.validate()?;
    let t_final = config.t_final;
    if !(t_final > 0.0) {
        return Err(invalid("T must be positive"));
    }
    if config.hs.is_empty() || config.t_nodes < 2 || config.x_nodes < 2 {
        return Err(invalid("need values of h and at least two nodes in t and x"));
    }
    if !(config.r > 0.0) {
        return Err(invalid("r must be positive"));
    }
    // fail before any work if some h is not covered
    for &h in &config.hs {
        certificate.bound_for(&base.with_h(h), t_final)?;
    }
    let times = gauss_legendre_on(config.t_nodes, 0.0, t_final);
    let mut rows = Vec::with_capacity(config.hs.len());
    for &h in &config.hs {
        let params = base.with_h(h);
        let plancherel = plancherel_norm_sq(&params, t_final)?;
        let mut chosen = None;
        for &radius in &config.radii {
            if radius < certificate.x_min {
                continue;
            }
            let tail = certificate.tail_mass(&params, t_final, radius)?;
            if tail <= config.tail_tolerance * plancherel {
                chosen = Some((radius, tail));
                break;
            }
        }
        let (radius, tail) = chosen.ok_or_else(|| {
            crate::Error::FitFailed(format!("no truncation radius meets the tail tolerance at h = {h}"))
        })?;

        let whole = [(0.0, 2.0 * radius)];
        let lhs_quad = space_time_mass(&params, &whole, &[(t_final, 1.0)], config.x_nodes)?;
        let pieces = omega_pieces(k, radius)?;
        let rhs_quad = space_time_mass(&params, &pieces, &times, config.x_nodes)?;
        let rhs_tail = t_final * tail;
        let lhs = lhs_quad + tail;
        let rhs = rhs_quad + rhs_tail;

        let ball_radius = config.r * h.powf(params.beta());
        let lq = from_f64(ball_radius)?;
        let in_k = k.measure_in(&-lq.clone(), &lq);
        let ball = &lq * int(2) - in_k;
        rows.push(NecessityRow {
            h,
            t_max: t_final,
            lhs,
            lhs_plancherel: plancherel,
            lhs_tail: tail,
            rhs,
            rhs_tail,
            ratio: if rhs.is_zero() { f64::INFINITY } else { lhs / rhs },
            eta: certificate.eta,
            radius,
            ball_radius,
            ball_measure: to_f64(&ball),
        });
    }
    rows.sort_by(|a, b| b.h.total_cmp(&a.h));
    let first = rows[0].ratio;
    let last = rows.last().unwrap().ratio;
    let max = rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    let min = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    Ok(NecessityReport { rows, growth: last / first, spread: max / min })
}
