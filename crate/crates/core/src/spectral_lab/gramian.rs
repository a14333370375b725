use nalgebra::{Cholesky, DMatrix};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::interval_sets::IntervalUnion;
use crate::quadrature::gauss_legendre_on;

use super::grid::{BandProjector, CellWeights, GridSpec};

/// `σ_min` below this multiple of `ε σ_max` is not resolved.
const RESOLUTION_FACTOR: f64 = 2.0;
/// Largest exponent allowed in the whitened observation form.
const MAX_EXPONENT: f64 = 700.0;
pub const MIN_QUAD_NODES: usize = 4;

/// Observation and reference forms on a band, in the orthonormal basis
/// `e^{iξ_k x}/√X`.
#[derive(Debug, Clone)]
pub struct GramianProblem {
    pub band: BandProjector,
    pub obs_matrix: DMatrix<Complex64>,
    /// Diagonal of the reference form.
    pub ref_diag: Vec<f64>,
    pub s: Option<f64>,
    pub t: Option<f64>,
    pub omega: String,
}

impl GramianProblem {
    /// Forms of `f ↦ ∫_ω |f|²` and `f ↦ ‖f‖²` on `E_λ`.
    pub fn spectral(omega: &IntervalUnion, lambda: f64, grid: &GridSpec) -> Result<Self> {
        let band = BandProjector::new(grid, lambda)?;
        let w = CellWeights::new(omega, grid)?;
        let g = omega_gram(&w, &band);
        Ok(GramianProblem {
            ref_diag: vec![1.0; band.len()],
            band,
            obs_matrix: g,
            s: None,
            t: None,
            omega: omega.to_string(),
        })
    }

    /// Forms of `f ↦ ∫_0^T ‖e^{-tA} f‖²_{L²(ω)} dt` (Gauss–Legendre in `t`) and
    /// `f ↦ ‖e^{-TA} f‖²`, `A = (-Δ)^{s/2}`.
    pub fn observability(
        omega: &IntervalUnion,
        t_final: f64,
        s: f64,
        lambda_max: f64,
        grid: &GridSpec,
        quad_nodes: usize,
    ) -> Result<Self> {
        check_time_inputs(t_final, s, quad_nodes)?;
        let band = BandProjector::new(grid, lambda_max)?;
        let w = CellWeights::new(omega, grid)?;
        let g = omega_gram(&w, &band);
        let a = symbols(&band, grid, s);
        let nodes = gauss_legendre_on(quad_nodes, 0.0, t_final);
        let m = band.len();
        let obs = DMatrix::from_fn(m, m, |k, l| {
            let decay: f64 = nodes.iter().map(|&(t, wt)| wt * (-t * (a[k] + a[l])).exp()).sum();
            g[(k, l)] * decay
        });
        Ok(GramianProblem {
            ref_diag: a.iter().map(|ak| (-2.0 * t_final * ak).exp()).collect(),
            band,
            obs_matrix: obs,
            s: Some(s),
            t: Some(t_final),
            omega: omega.to_string(),
        })
    }

    /// Smallest generalized eigenvalue, after whitening by the reference
    /// form. Adequate when the pencil is well conditioned.
    pub fn min_generalized_eigenvalue(&self) -> Result<f64> {
        if self.ref_diag.iter().any(|&r| !(r > 0.0)) {
            return Err(Error::NotPositiveDefinite("reference form".into()));
        }
        let d: Vec<f64> = self.ref_diag.iter().map(|r| r.sqrt().recip()).collect();
        let m = self.band.len();
        let h = DMatrix::from_fn(m, m, |k, l| self.obs_matrix[(k, l)] * (d[k] * d[l]));
        let h = hermitian_part(&h);
        let eig = h.symmetric_eigenvalues();
        eig.iter()
            .cloned()
            .reduce(f64::min)
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::EigenSolver("no eigenvalues".into()))
    }

    /// Largest relative deviation of either form from Hermitian symmetry.
    pub fn hermitian_defect(&self) -> f64 {
        let m = &self.obs_matrix;
        let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let mut worst: f64 = 0.0;
        for k in 0..m.nrows() {
            for l in 0..m.ncols() {
                worst = worst.max((m[(k, l)] - m[(l, k)].conj()).norm());
            }
        }
        worst / scale
    }
}

fn check_time_inputs(t_final: f64, s: f64, quad_nodes: usize) -> Result<()> {
    if !(t_final > 0.0 && t_final.is_finite()) {
        return Err(invalid(format!("T = {t_final} must be positive")));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(invalid(format!("s = {s} must be positive")));
    }
    if quad_nodes < MIN_QUAD_NODES {
        return Err(invalid(format!("need at least {MIN_QUAD_NODES} quadrature nodes, got {quad_nodes}")));
    }
    Ok(())
}

fn symbols(band: &BandProjector, grid: &GridSpec, s: f64) -> Vec<f64> {
    band.frequencies(grid).iter().map(|xi| xi.abs().powf(s)).collect()
}

fn hermitian_part(h: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    (h + h.adjoint()) * Complex64::new(0.5, 0.0)
}

/// `G_kl = (1/X) Σ_j w_j e^{i(ξ_l - ξ_k) x_j}`; it depends on `l - k` only.
fn omega_gram(w: &CellWeights, band: &BandProjector) -> DMatrix<Complex64> {
    let grid = &w.grid;
    let m = band.len();
    let k0 = band.modes[0];
    let span = band.modes[m - 1] - k0;
    let xs = grid.xs();
    let inv_x = 1.0 / grid.length;
    let diffs: Vec<Complex64> = (-span..=span)
        .into_par_iter()
        .map(|d| {
            let xi = grid.frequency(d);
            w.weights
                .iter()
                .zip(&xs)
                .filter(|(wj, _)| **wj != 0.0)
                .map(|(wj, x)| Complex64::from_polar(*wj, xi * x))
                .sum::<Complex64>()
                * inv_x
        })
        .collect();
    DMatrix::from_fn(m, m, |k, l| {
        let d = band.modes[l] - band.modes[k];
        diffs[(d + span) as usize]
    })
}

/// Rows `sqrt(w_j/X) e^{iξ_q x_j}` over the cells meeting ω, so that
/// `|A c|² = ∫_ω |f|² / ‖f‖²` for `f = Σ c_q e^{iξ_q x}/√X`.
fn sampling_factor(w: &CellWeights, band: &BandProjector) -> DMatrix<Complex64> {
    let grid = &w.grid;
    let xi = band.frequencies(grid);
    let rows: Vec<(f64, f64)> = w
        .weights
        .iter()
        .enumerate()
        .filter(|(_, wj)| **wj > 0.0)
        .map(|(j, wj)| ((wj / grid.length).sqrt(), grid.x(j)))
        .collect();
    DMatrix::from_fn(rows.len(), xi.len(), |r, q| {
        let (amp, x) = rows[r];
        Complex64::from_polar(amp, xi[q] * x)
    })
}

/// `d(λ) = min_{f ∈ E_λ} ‖f‖²_{L²(ω)} / ‖f‖²`.
///
/// Computed as `σ_min(A)²` for the sampling factor `A` rather than as an
/// eigenvalue of `A^*A`: the latter loses everything below `ε` while the
/// singular value keeps about `ε²`.
pub fn spectral_constant(omega: &IntervalUnion, lambda: f64, grid: &GridSpec) -> Result<f64> {
    let band = BandProjector::new(grid, lambda)?;
    if omega.is_empty() {
        return Err(invalid("omega is empty"));
    }
    let w = CellWeights::new(omega, grid)?;
    let a = sampling_factor(&w, &band);
    if a.nrows() < a.ncols() {
        // fewer observed cells than modes: the form is singular on the grid
        return Err(Error::Resolution { lambda, value: 0.0 });
    }
    let sv = a.singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if !smin.is_finite() || !smax.is_finite() {
        return Err(Error::EigenSolver(format!("non-finite singular values at lambda = {lambda}")));
    }
    let d = smin * smin;
    if smin <= RESOLUTION_FACTOR * f64::EPSILON * smax {
        return Err(Error::Resolution { lambda, value: d });
    }
    Ok(d.min(1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservabilityEstimate {
    #[serde(rename = "C_meas")]
    pub c_meas: f64,
    /// Same constant with twice the quadrature nodes.
    #[serde(rename = "C_meas_doubled")]
    pub c_meas_doubled: f64,
    pub rel_change: f64,
    pub modes: usize,
    pub quad_nodes: usize,
}

/// Smallest `C` with `‖e^{-TA} f‖² ≤ C ∫_0^T ‖e^{-tA} f‖²_{L²(ω)} dt` on
/// `E_{λ_max}`.
///
/// The whitened form `H_kl = G_kl Σ_j w_j e^{(T - t_j)(a_k + a_l)}` is
/// equilibrated by its diagonal and factored by Cholesky; then
/// `C = σ_max(L^{-1} D^{-1})²`. Entries span hundreds of orders of
/// magnitude, which a plain eigen-solve does not survive.
pub fn observability_constant(
    omega: &IntervalUnion,
    t_final: f64,
    s: f64,
    lambda_max: f64,
    grid: &GridSpec,
    quad_nodes: usize,
) -> Result<f64> {
    Ok(observability_estimate(omega, t_final, s, lambda_max, grid, quad_nodes)?.c_meas)
}

pub fn observability_estimate(
    omega: &IntervalUnion,
    t_final: f64,
    s: f64,
    lambda_max: f64,
    grid: &GridSpec,
    quad_nodes: usize,
) -> Result<ObservabilityEstimate> {
    check_time_inputs(t_final, s, quad_nodes)?;
    let band = BandProjector::new(grid, lambda_max)?;
    if omega.is_empty() {
        return Err(Error::NotPositiveDefinite("omega is empty".into()));
    }
    let w = CellWeights::new(omega, grid)?;
    let g = omega_gram(&w, &band);
    let a = symbols(&band, grid, s);
    let amax = a.iter().cloned().fold(0.0, f64::max);
    if 2.0 * t_final * amax > MAX_EXPONENT {
        return Err(Error::Resolution { lambda: lambda_max, value: f64::INFINITY });
    }
    let c1 = whitened_constant(&g, &a, t_final, quad_nodes)?;
    let c2 = whitened_constant(&g, &a, t_final, 2 * quad_nodes)?;
    Ok(ObservabilityEstimate {
        c_meas: c1,
        c_meas_doubled: c2,
        rel_change: ((c1 - c2) / c2).abs(),
        modes: band.len(),
        quad_nodes,
    })
}

fn whitened_constant(g: &DMatrix<Complex64>, a: &[f64], t_final: f64, nodes: usize) -> Result<f64> {
    let m = a.len();
    let rule = gauss_legendre_on(nodes, 0.0, t_final);
    let h = DMatrix::from_fn(m, m, |k, l| {
        let growth: f64 =
            rule.iter().map(|&(t, wt)| wt * ((t_final - t) * (a[k] + a[l])).exp()).sum();
        g[(k, l)] * growth
    });
    let h = hermitian_part(&h);
    let diag: Vec<f64> = (0..m).map(|k| h[(k, k)].re).collect();
    if diag.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
        return Err(Error::NotPositiveDefinite("observation form has a nonpositive diagonal".into()));
    }
    let dinv: Vec<f64> = diag.iter().map(|d| d.sqrt().recip()).collect();
    let scaled = DMatrix::from_fn(m, m, |k, l| h[(k, l)] * (dinv[k] * dinv[l]));
    let chol = Cholesky::new(scaled)
        .ok_or_else(|| Error::NotPositiveDefinite("Cholesky of the observation form failed".into()))?;
    let dmat = DMatrix::from_fn(m, m, |k, l| {
        if k == l {
            Complex64::new(dinv[k], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let b = chol
        .l()
        .solve_lower_triangular(&dmat)
        .ok_or_else(|| Error::NotPositiveDefinite("singular Cholesky factor".into()))?;
    let sv = b.singular_values();
    let smax = sv.max();
    if !smax.is_finite() {
        return Err(Error::EigenSolver("non-finite singular value".into()));
    }
    Ok(smax * smax)
}
