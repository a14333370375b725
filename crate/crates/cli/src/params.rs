//! Parameter schemas of the commands. Every field has a default unless it
//! names the object of study.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use thicket_core::coherent_probe::{ChiShape, NecessityConfig, ProbeParams};
use thicket_core::interval_sets::{
    log_spaced_scales, Interval, IntervalUnion, LocalMinimum, SvcParams, SvcSet,
};
use thicket_core::rational::{format_rational, from_f64, parse_rational, Rational};
use thicket_core::spectral_lab::GridSpec;

use crate::error::{invalid, CliError};

/// Exact rational written as a `"p/q"` (or integer, or finite decimal) string.
#[derive(Debug, Clone, PartialEq)]
pub struct Rat(pub Rational);

impl Serialize for Rat {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(&self.0))
    }
}

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        parse_rational(&text).map(Rat).map_err(D::Error::custom)
    }
}

/// Scales `L` for thickness profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Scales {
    List(Vec<Rat>),
    /// `2^e`, `e` evenly spaced on `[lo_exp, hi_exp]`.
    Log { lo_exp: f64, hi_exp: f64, count: usize },
}

impl Default for Scales {
    fn default() -> Self {
        Scales::Log { lo_exp: -12.0, hi_exp: -4.0, count: 16 }
    }
}

impl Scales {
    pub fn values(&self) -> Result<Vec<Rational>, CliError> {
        match self {
            Scales::List(v) if v.is_empty() => Err(invalid("no scales given")),
            Scales::List(v) => Ok(v.iter().map(|r| r.0.clone()).collect()),
            Scales::Log { lo_exp, hi_exp, count } => {
                if *count < 2 || !(lo_exp.is_finite() && hi_exp.is_finite()) {
                    return Err(invalid("log scales need finite exponents and count >= 2"));
                }
                Ok(log_spaced_scales(*lo_exp, *hi_exp, *count))
            }
        }
    }
}

/// A list of floats given literally or as a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Sweep {
    List(Vec<f64>),
    /// `count` points from `lo` to `hi` with constant ratio.
    Geometric { lo: f64, hi: f64, count: usize },
    /// `2^-k` for `k = k_lo..=k_hi`.
    Dyadic { k_lo: i32, k_hi: i32 },
}

impl Sweep {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        let v: Vec<f64> = match self {
            Sweep::List(v) => v.clone(),
            Sweep::Geometric { lo, hi, count } => {
                if *count < 2 || !(*lo > 0.0 && *hi > 0.0) {
                    return Err(invalid("geometric sweep needs positive ends and count >= 2"));
                }
                (0..*count).map(|i| lo * (hi / lo).powf(i as f64 / (count - 1) as f64)).collect()
            }
            Sweep::Dyadic { k_lo, k_hi } => (*k_lo..=*k_hi).map(|k| 2f64.powi(-k)).collect(),
        };
        if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
            return Err(invalid("sweep is empty or not finite"));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvcSpec {
    pub params: SvcParams,
    pub depth: usize,
    /// Translation applied to the constructed set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shift: Option<Rat>,
}

/// A compact set `K`; the observed set is `ω = R \ K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum SetSpec {
    /// `K` empty, `ω` the whole line.
    FullLine,
    Intervals(IntervalUnion),
    Svc(SvcSpec),
    /// `count` random intervals with endpoints in `Z/den ∩ [lo, hi]`,
    /// drawn from the experiment seed.
    Random { count: usize, lo: i64, hi: i64, den: i64 },
}

pub enum ResolvedSet {
    Union(IntervalUnion),
    Svc(SvcSet, Rational),
}

impl SetSpec {
    pub fn resolve(&self, seed: u64) -> Result<ResolvedSet, CliError> {
        Ok(match self {
            SetSpec::FullLine => ResolvedSet::Union(IntervalUnion::empty()),
            SetSpec::Intervals(u) => ResolvedSet::Union(u.clone()),
            SetSpec::Svc(spec) => {
                let shift = spec.shift.as_ref().map_or_else(|| Rational::from_integer(0.into()), |r| r.0.clone());
                ResolvedSet::Svc(SvcSet::new(&spec.params, spec.depth)?, shift)
            }
            SetSpec::Random { count, lo, hi, den } => {
                if *den <= 0 || hi <= lo || *count == 0 {
                    return Err(invalid("random set needs count > 0, lo < hi and den > 0"));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let (a_lo, a_hi) = (lo * den, hi * den);
                let ivs = (0..*count)
                    .map(|_| {
                        let a = rng.gen_range(a_lo..a_hi);
                        let b = rng.gen_range(a + 1..=a_hi);
                        Interval::new(Rational::new(a.into(), (*den).into()), Rational::new(b.into(), (*den).into()))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                ResolvedSet::Union(IntervalUnion::new(ivs)?)
            }
        })
    }
}

impl ResolvedSet {
    pub fn union(&self) -> Result<IntervalUnion, CliError> {
        match self {
            ResolvedSet::Union(u) => Ok(u.clone()),
            ResolvedSet::Svc(set, shift) => Ok(set.to_union()?.translate(shift)),
        }
    }

    pub fn min_local_measure(&self, l: &Rational) -> Result<LocalMinimum, CliError> {
        match self {
            ResolvedSet::Union(u) => Ok(thicket_core::interval_sets::min_local_measure(u, l)?),
            ResolvedSet::Svc(set, shift) => {
                let mut m = set.min_local_measure(l)?;
                m.argmin_x += shift;
                Ok(m)
            }
        }
    }
}

/// The observed set of the spectral commands, inside the grid window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum OmegaSpec {
    Intervals(IntervalUnion),
    /// Window minus `K`.
    ComplementOf(SetSpec),
}

impl OmegaSpec {
    pub fn resolve(&self, grid: &GridSpec, seed: u64) -> Result<IntervalUnion, CliError> {
        match self {
            OmegaSpec::Intervals(u) => Ok(u.clone()),
            OmegaSpec::ComplementOf(k) => {
                let half = from_f64(grid.half_length())?;
                let window = Interval::new(-half.clone(), half)?;
                Ok(k.resolve(seed)?.union()?.complement_window(&window)?)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridParams {
    #[serde(rename = "X", default = "default_x")]
    pub x: f64,
    #[serde(rename = "N", default = "default_n")]
    pub n: usize,
}

fn default_x() -> f64 {
    8.0
}

fn default_n() -> usize {
    4096
}

impl Default for GridParams {
    fn default() -> Self {
        GridParams { x: default_x(), n: default_n() }
    }
}

impl GridParams {
    pub fn spec(&self) -> Result<GridSpec, CliError> {
        Ok(GridSpec::new(self.x, self.n)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvcBuildParams {
    pub svc: SvcParams,
    pub depth: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThicknessParams {
    pub set: SetSpec,
    #[serde(default)]
    pub scales: Scales,
    /// Also scan `x` on the grid `2^-k Z` (exact per point) as a cross-check.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid_check_exp: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitAlphaParams {
    pub set: SetSpec,
    #[serde(default)]
    pub scales: Scales,
}

fn default_kappa() -> Rat {
    Rat(Rational::from_integer(3.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvcVerifyParams {
    pub svc: SvcParams,
    pub depth: usize,
    #[serde(default = "scales_to_quarter")]
    pub scales: Scales,
    #[serde(default = "default_kappa")]
    pub kappa: Rat,
}

fn scales_to_quarter() -> Scales {
    Scales::Log { lo_exp: -12.0, hi_exp: -4.0, count: 12 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    pub s: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralParams {
    #[serde(default)]
    pub grid: GridParams,
    pub omega: OmegaSpec,
    pub lambdas: Sweep,
    /// Convert the measured `d(λ)` into Lebeau–Robbiano constants.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub calibrate: Option<Calibration>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum LrSource {
    Given(thicket_core::spectral_lab::LRConstants),
    Calibrate { alpha: f64, lambdas: Sweep },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservabilityParams {
    #[serde(default)]
    pub grid: GridParams,
    pub omega: OmegaSpec,
    pub s: f64,
    #[serde(rename = "T")]
    pub t: Sweep,
    pub lambda_max: f64,
    #[serde(default = "default_quad_nodes")]
    pub quad_nodes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr: Option<LrSource>,
    /// Fit `c1` so that the prediction matches the measurement at the first `T`.
    #[serde(default)]
    pub fit_c1: bool,
}

fn default_quad_nodes() -> usize {
    32
}

fn default_xi0() -> f64 {
    1.0
}

fn default_quad_points() -> usize {
    512
}

fn default_t_probe() -> f64 {
    1.0
}

fn default_hs() -> Sweep {
    Sweep::Dyadic { k_lo: 4, k_hi: 10 }
}

fn default_eta_candidates() -> Vec<f64> {
    vec![0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4]
}

fn default_eta_threshold() -> f64 {
    0.1
}

fn probe_at(s: f64, xi0: f64, chi: ChiShape, quad_points: usize, h: f64) -> ProbeParams {
    ProbeParams { s, xi0, h, chi, quad_points }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeAsymptoticsParams {
    pub s: f64,
    #[serde(default = "default_xi0")]
    pub xi0: f64,
    #[serde(default)]
    pub chi: ChiShape,
    #[serde(default = "default_quad_points")]
    pub quad_points: usize,
    #[serde(rename = "T", default = "default_t_probe")]
    pub t: f64,
    #[serde(default = "default_hs")]
    pub hs: Sweep,
    /// Interior radius; determined from the sweep when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default = "default_eta_candidates")]
    pub eta_candidates: Vec<f64>,
    #[serde(default = "default_eta_threshold")]
    pub eta_threshold: f64,
    /// Exterior sample points; `2η, 4η, 8η` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exterior_x: Option<Vec<f64>>,
}

impl ProbeAsymptoticsParams {
    pub fn probe(&self, h: f64) -> ProbeParams {
        probe_at(self.s, self.xi0, self.chi, self.quad_points, h)
    }
}

fn default_exterior_eta() -> f64 {
    0.25
}

fn default_exterior_x() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 4.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExteriorCheck {
    #[serde(default = "default_exterior_eta")]
    pub eta: f64,
    #[serde(default = "default_exterior_x")]
    pub x: Vec<f64>,
    #[serde(default = "default_hs")]
    pub hs: Sweep,
}

impl Default for ExteriorCheck {
    fn default() -> Self {
        ExteriorCheck { eta: default_exterior_eta(), x: default_exterior_x(), hs: default_hs() }
    }
}

fn default_center_scale() -> Option<Rat> {
    Some(Rat(Rational::new(1.into(), 10.into())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NecessityParams {
    pub s: f64,
    #[serde(default = "default_xi0")]
    pub xi0: f64,
    #[serde(default)]
    pub chi: ChiShape,
    #[serde(default = "default_quad_points")]
    pub quad_points: usize,
    pub set: SetSpec,
    /// Translate `K` so that its worst point at this scale sits at the origin.
    #[serde(default = "default_center_scale")]
    pub center_scale: Option<Rat>,
    #[serde(default)]
    pub experiment: NecessityConfig,
    #[serde(default)]
    pub exterior: ExteriorCheck,
}

impl NecessityParams {
    pub fn probe(&self, h: f64) -> ProbeParams {
        probe_at(self.s, self.xi0, self.chi, self.quad_points, h)
    }
}
