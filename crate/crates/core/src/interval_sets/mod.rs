//! Exact Smith–Volterra–Cantor sets and thickness profiles of their
//! complements.

mod bounds;
mod fit;
mod svc;
mod thickness;
mod union;

pub use bounds::{required_depth, verify_svc_bounds, BoundRow, BoundsOptions, SvcBoundsReport};
pub use fit::{fit_alpha, model_theta, AlphaFit, MIN_FIT_SAMPLES};
pub use svc::{svc_construct, RatioMode, SvcParams, SvcSet};
pub use thickness::{
    log_spaced_scales, min_local_measure, thickness_profile, LocalMass, LocalMinimum,
    ThicknessProfile, ThicknessSample,
};
pub use union::{Interval, IntervalUnion};
