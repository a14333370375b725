//! Coherent-state solutions `g_h` of the fractional heat equation: their
//! interior asymptotics, exterior decay, and the observability ratio they
//! force to blow up on sets that are too thin.

mod checks;
mod necessity;
mod probe;

pub use checks::{
    check_exterior_decay, check_interior_asymptotics, determine_eta, dyadic_hs, interior_norm,
    interior_norm_bound, DecayCertificate, ExteriorOptions, ExteriorReport, ExteriorRow,
    InteriorNormReport, InteriorOptions, InteriorReport, InteriorRow,
};
pub use necessity::{
    center_worst_point, necessity_experiment, NecessityConfig, NecessityReport, NecessityRow,
};
pub use probe::{
    asymptotic_g, eval_g, eval_g_certified, eval_g_times, plancherel_norm_sq, probe_point,
    Certified, ChiShape, ProbeParams, ProbeResult, MIN_QUAD_POINTS,
};
