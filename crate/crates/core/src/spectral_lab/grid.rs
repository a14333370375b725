use std::cell::RefCell;
use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::interval_sets::IntervalUnion;
use crate::rational::to_f64;

/// Periodic window `[-X/2, X/2)` sampled at `N` points `x_j = -X/2 + j X/N`.
///
/// Frequencies are `ξ_k = 2πk/X` for `k ∈ [-N/2, N/2)`, stored in FFT order
/// (`k = m` for `m < N/2`, `k = m - N` otherwise).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    #[serde(rename = "X")]
    pub length: f64,
    #[serde(rename = "N")]
    pub points: usize,
}

impl GridSpec {
    pub fn new(length: f64, points: usize) -> Result<Self> {
        let g = GridSpec { length, points };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length.is_finite() && self.length > 0.0) {
            return Err(invalid(format!("window length X = {} must be positive", self.length)));
        }
        if self.points < 2 || !self.points.is_power_of_two() {
            return Err(invalid(format!("N = {} must be a power of two", self.points)));
        }
        Ok(())
    }

    pub fn half_length(&self) -> f64 {
        0.5 * self.length
    }

    pub fn dx(&self) -> f64 {
        self.length / self.points as f64
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_length() + j as f64 * self.dx()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.points).map(|j| self.x(j)).collect()
    }

    /// Signed mode number of FFT slot `m`.
    pub fn mode(&self, m: usize) -> i64 {
        if m < self.points / 2 {
            m as i64
        } else {
            m as i64 - self.points as i64
        }
    }

    /// FFT slot of the signed mode `k`.
    pub fn slot(&self, k: i64) -> usize {
        k.rem_euclid(self.points as i64) as usize
    }

    pub fn frequency(&self, k: i64) -> f64 {
        2.0 * PI * k as f64 / self.length
    }

    pub fn nyquist(&self) -> f64 {
        PI * self.points as f64 / self.length
    }

    /// Ratio `Σ|values|² dx / Σ|coeffs|²` for the coefficient convention
    /// `v_j = Σ_k c_k e^{iξ_k x_j}`.
    pub fn plancherel_factor(&self) -> f64 {
        self.length
    }
}

/// Samples and Fourier coefficients of one periodic function, kept in step.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    grid: GridSpec,
    values: Vec<Complex64>,
    coeffs: Vec<Complex64>,
}

#[derive(Clone)]
struct Plans {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

// the planner caches plans per length
fn plans(n: usize) -> Plans {
    PLANNER.with(|p| {
        let mut planner = p.borrow_mut();
        Plans { forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    })
}

/// `(-1)^k` for the shift from `[0, X)` to `[-X/2, X/2)`; `N` is even so the
/// sign depends on the slot alone.
fn shift_sign(m: usize) -> f64 {
    if m % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

impl GridField {
    pub fn from_values(grid: GridSpec, values: Vec<Complex64>) -> Result<Self> {
        grid.validate()?;
        if values.len() != grid.points {
            return Err(invalid(format!("expected {} samples, got {}", grid.points, values.len())));
        }
        let mut buf = values.clone();
        plans(grid.points).forward.process(&mut buf);
        let scale = 1.0 / grid.points as f64;
        let coeffs = buf
            .into_iter()
            .enumerate()
            .map(|(m, c)| c * (shift_sign(m) * scale))
            .collect();
        Ok(GridField { grid, values, coeffs })
    }

    pub fn from_coeffs(grid: GridSpec, coeffs: Vec<Complex64>) -> Result<Self> {
        grid.validate()?;
        if coeffs.len() != grid.points {
            return Err(invalid(format!("expected {} coefficients, got {}", grid.points, coeffs.len())));
        }
        let values = synthesize(&grid, &coeffs);
        Ok(GridField { grid, values, coeffs })
    }

    pub fn from_fn(grid: GridSpec, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        grid.validate()?;
        Self::from_values(grid, grid.xs().into_iter().map(f).collect())
    }

    /// The single Fourier mode `e^{iξ_k x}`.
    pub fn mode(grid: GridSpec, k: i64) -> Result<Self> {
        grid.validate()?;
        if k < -(grid.points as i64) / 2 || k >= grid.points as i64 / 2 {
            return Err(invalid(format!("mode {k} is not on the grid")));
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); grid.points];
        coeffs[grid.slot(k)] = Complex64::new(1.0, 0.0);
        Self::from_coeffs(grid, coeffs)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Coefficients in FFT slot order.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// `∫ |f|²` over the window by the periodic rectangle rule.
    pub fn norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dx()
    }

    /// The same integral computed from the coefficients.
    pub fn coeff_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.plancherel_factor()
    }

    /// `Σ_j conj(f_j) g_j dx`.
    pub fn inner(&self, other: &GridField) -> Complex64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a.conj() * b)
            .sum::<Complex64>()
            * self.grid.dx()
    }

    fn map_coeffs(&self, f: impl Fn(usize, Complex64) -> Complex64) -> GridField {
        let coeffs: Vec<Complex64> =
            self.coeffs.iter().enumerate().map(|(m, &c)| f(m, c)).collect();
        let values = synthesize(&self.grid, &coeffs);
        GridField { grid: self.grid, values, coeffs }
    }
}

fn synthesize(grid: &GridSpec, coeffs: &[Complex64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> =
        coeffs.iter().enumerate().map(|(m, &c)| c * shift_sign(m)).collect();
    plans(grid.points).inverse.process(&mut buf);
    buf
}

/// `e^{-t(-Δ)^{s/2}} f`: the coefficient at `ξ` is multiplied by `e^{-t|ξ|^s}`.
pub fn evolve(f: &GridField, t: f64, s: f64) -> Result<GridField> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(invalid(format!("time t = {t} must be nonnegative")));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(invalid(format!("order s = {s} must be positive")));
    }
    let g = *f.grid();
    Ok(f.map_coeffs(|m, c| c * (-t * g.frequency(g.mode(m)).abs().powf(s)).exp()))
}

/// Frequencies `ξ` of the grid with `ξ² ≤ λ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BandProjector {
    pub lambda: f64,
    /// Signed mode numbers, increasing.
    pub modes: Vec<i64>,
}

impl BandProjector {
    pub fn new(grid: &GridSpec, lambda: f64) -> Result<Self> {
        grid.validate()?;
        if !(lambda >= 0.0) {
            return Err(crate::Error::EmptyBand { lambda });
        }
        let half = grid.points as i64 / 2;
        let modes = (-half..half)
            .filter(|&k| grid.frequency(k).powi(2) <= lambda)
            .collect();
        Ok(BandProjector { lambda, modes })
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn frequencies(&self, grid: &GridSpec) -> Vec<f64> {
        self.modes.iter().map(|&k| grid.frequency(k)).collect()
    }

    pub fn apply(&self, f: &GridField) -> GridField {
        let g = *f.grid();
        let lambda = self.lambda;
        f.map_coeffs(|m, c| {
            if g.frequency(g.mode(m)).powi(2) <= lambda {
                c
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }
}

pub fn project_band(f: &GridField, lambda: f64) -> Result<GridField> {
    Ok(BandProjector::new(f.grid(), lambda)?.apply(f))
}

/// Cell weights `w_j = Leb(ω ∩ [x_j - dx/2, x_j + dx/2))`, cells wrapping
/// periodically. Each interval's exact width is distributed so the weights
/// add up to it.
#[derive(Debug, Clone, PartialEq)]
pub struct CellWeights {
    pub grid: GridSpec,
    pub weights: Vec<f64>,
}

impl CellWeights {
    pub fn new(omega: &IntervalUnion, grid: &GridSpec) -> Result<Self> {
        grid.validate()?;
        let n = grid.points;
        let dx = grid.dx();
        let half = grid.half_length();
        let mut w = vec![0.0; n];
        for iv in omega.intervals() {
            let (a, b) = (to_f64(&iv.lo), to_f64(&iv.hi));
            if a < -half || b > half {
                return Err(invalid(format!(
                    "omega piece {iv} leaves the window [{}, {}]",
                    -half, half
                )));
            }
            let width = to_f64(&iv.length());
            // cell j covers p ∈ [j, j + 1) with p = (x + X/2)/dx + 1/2
            let pa = (a + half) / dx + 0.5;
            let pb = (b + half) / dx + 0.5;
            let ja = pa.floor() as i64;
            let jb = pb.floor() as i64;
            let wrap = |j: i64| j.rem_euclid(n as i64) as usize;
            if ja >= jb {
                w[wrap(ja)] += width;
                continue;
            }
            let first = ((ja + 1) as f64 - pa) * dx;
            w[wrap(ja)] += first;
            let mut placed = first;
            for j in ja + 1..jb {
                w[wrap(j)] += dx;
                placed += dx;
            }
            w[wrap(jb)] += (width - placed).max(0.0);
        }
        Ok(CellWeights { grid: *grid, weights: w })
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn mass(&self, f: &GridField) -> Result<f64> {
        if f.grid() != &self.grid {
            return Err(invalid("field and weights live on different grids"));
        }
        Ok(self.weights.iter().zip(f.values()).map(|(w, v)| w * v.norm_sqr()).sum())
    }
}

/// `∫_ω |f|²` with exact cell-overlap weights.
pub fn restrict_mass(omega: &IntervalUnion, f: &GridField) -> Result<f64> {
    CellWeights::new(omega, f.grid())?.mass(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interval_sets::Interval;
    use crate::rational::{int, rat};

    fn grid() -> GridSpec {
        GridSpec::new(8.0, 64).unwrap()
    }

    #[test]
    fn mode_roundtrip_and_convention() {
        let g = grid();
        for k in [-32i64, -3, 0, 5, 31] {
            let f = GridField::mode(g, k).unwrap();
            for (j, v) in f.values().iter().enumerate() {
                let want = Complex64::from_polar(1.0, g.frequency(k) * g.x(j));
                assert!((v - want).norm() < 1e-13);
            }
            let back = GridField::from_values(g, f.values().to_vec()).unwrap();
            assert!((back.coeffs()[g.slot(k)] - 1.0).norm() < 1e-14);
        }
        assert!(GridField::mode(g, 32).is_err());
    }

    #[test]
    fn evolve_single_mode() {
        let g = grid();
        let f = GridField::mode(g, 3).unwrap();
        let e = evolve(&f, 0.7, 0.5).unwrap();
        let factor = (-0.7 * g.frequency(3).abs().sqrt()).exp();
        assert!((e.coeffs()[3] - factor).norm() < 1e-15);
        assert_eq!(evolve(&f, 0.0, 1.0).unwrap().coeffs(), f.coeffs());
        assert!(evolve(&f, -1.0, 1.0).is_err());
        assert!(evolve(&f, 1.0, 0.0).is_err());
    }

    #[test]
    fn band_projection() {
        let g = grid();
        let f = GridField::from_fn(g, |x| Complex64::new((-x * x).exp(), x.sin())).unwrap();
        let p = project_band(&f, 10.0).unwrap();
        assert_eq!(project_band(&p, 10.0).unwrap(), p);
        let dc = project_band(&f, 0.0).unwrap();
        assert!(dc.coeffs().iter().enumerate().all(|(m, c)| m == 0 || *c == Complex64::new(0.0, 0.0)));
        let all = project_band(&f, g.nyquist().powi(2)).unwrap();
        assert_eq!(all.coeffs(), f.coeffs());
        assert!(matches!(BandProjector::new(&g, -1.0), Err(crate::Error::EmptyBand { .. })));
    }

    #[test]
    fn cell_weights_keep_exact_measure() {
        let g = grid();
        let omega = IntervalUnion::new(vec![
            Interval::new(rat(-4, 1), rat(-39, 10)).unwrap(),
            Interval::new(rat(1, 3), rat(1, 2)).unwrap(),
            Interval::new(rat(7, 2), int(4)).unwrap(),
        ])
        .unwrap();
        let w = CellWeights::new(&omega, &g).unwrap();
        assert!((w.total() - (0.1 + 1.0 / 6.0 + 0.5)).abs() < 1e-15);
        let ones = GridField::from_fn(g, |_| Complex64::new(1.0, 0.0)).unwrap();
        let m = restrict_mass(&omega, &ones).unwrap();
        assert!((m - (0.1 + 1.0 / 6.0 + 0.5)).abs() < 1e-14);
        let outside = IntervalUnion::single(int(0), int(5)).unwrap();
        assert!(restrict_mass(&outside, &ones).is_err());
    }
}
