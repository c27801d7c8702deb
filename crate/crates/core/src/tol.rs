//! Central tolerances. All comparisons between log-domain quantities use
//! absolute slack in log units.

/// Absolute tolerance for log-domain inequality checks (log units).
pub const LOG_SLACK: f64 = 1e-9;

/// Tolerance for discrete convexity/concavity checks of log-domain data.
pub const CONVEXITY_TOL: f64 = 1e-9;

/// Default truncation length; sequences store indices `0..=K`.
pub const DEFAULT_K: usize = 256;

/// Threshold on `r_K = (log M_K - log N_K)/K` below which a decreasing
/// ratio sequence is judged `M ◁ N` (this is `log 0.1`).
pub const LHD_THRESHOLD: f64 = -2.302585092994046;

/// Tail-slope threshold separating a bounded ratio trend from a divergent
/// one when classifying `≼` versus `Neither`.
pub const TREND_TOL: f64 = 0.01;

/// Half-range growth threshold (log units) for tail sequences: growth
/// beyond this between `K/2` and `K` marks the quantity as still rising at
/// truncation.
pub const GROWTH_TOL: f64 = 0.05;

/// Gap (log units) between the half-truncation and full-truncation
/// moderate-growth sup above which the sup is flagged as divergent.
pub const MG_DIVERGENCE_TOL: f64 = 0.05;

/// Fitted power `p` in `μ_k ~ c k^p` at or below which `Σ 1/μ_k` is judged
/// divergent (quasianalytic). `Σ k^{-p}` diverges for `p ≤ 1`; the margin
/// absorbs slowly varying factors such as `log k` at desk truncations.
pub const QA_POWER_MARGIN: f64 = 0.25;

/// Default derivative-order cap for smooth test functions.
pub const DEFAULT_DCAP: usize = 40;

/// Default grid spacing for complex-plane pipelines (`2^-7`).
pub const DEFAULT_HGRID: f64 = 0.0078125;

/// Default coarsest ellipse parameter and number of dyadic levels.
pub const DEFAULT_EPS0: f64 = 0.4;
pub const DEFAULT_LEVELS: usize = 5;
