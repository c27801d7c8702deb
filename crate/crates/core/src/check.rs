//! Check results: a boolean verdict plus the witness constant and the
//! tolerance it was judged against. Reports keep the raw witness so callers
//! can re-judge with their own thresholds.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Check {
    pub ok: bool,
    /// The quantity the verdict was derived from (worst slack, sup, slope…).
    pub witness: f64,
    pub tol: f64,
}

impl Check {
    pub fn new(ok: bool, witness: f64, tol: f64) -> Self {
        Check { ok, witness, tol }
    }

    /// Verdict `witness >= -tol`, the usual form for "slack" checks.
    pub fn slack(witness: f64, tol: f64) -> Self {
        Check::new(witness >= -tol, witness, tol)
    }

    /// Verdict `witness <= tol`, for "deviation" checks.
    pub fn deviation(witness: f64, tol: f64) -> Self {
        Check::new(witness <= tol, witness, tol)
    }
}
