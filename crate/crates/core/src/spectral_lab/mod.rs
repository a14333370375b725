//! Fourier-multiplier simulation of `∂_t + (-Δ)^{s/2}` on a periodic window,
//! spectral-inequality and observability constants, and the
//! Lebeau–Robbiano constant.

mod grid;
mod gramian;
mod growth;

pub use grid::{evolve, project_band, restrict_mass, BandProjector, CellWeights, GridField, GridSpec};
pub use gramian::{
    observability_constant, observability_estimate, spectral_constant, GramianProblem,
    ObservabilityEstimate, MIN_QUAD_NODES,
};
pub use growth::{
    calibrate_lr_constants, fit_c1, fit_growth_from_values, fit_lr_from_values,
    fit_spectral_growth, predicted_cobs, LRConstants, SpectralGrowth,
};
