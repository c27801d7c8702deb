//! Sampled weight functions `ω`, their structural certificates, Young
//! conjugates, associated weight matrices, and the `ω̃` interpolation
//! construction between `ω` and a faster-growing target.
//!
//! `ω` is stored on a log-uniform grid in `t` and interpolated piecewise
//! linearly in `(log t, ω)`. The resampled `φ(u) = ω(e^u)` therefore lives
//! on a uniform `u`-grid, which keeps the conjugate machinery exact: the
//! node-max conjugate of a piecewise-linear `φ` is its true supremum.

use serde::{Deserialize, Serialize};

use crate::check::Check;
use crate::logdom::{self, KahanSum};
use crate::seqcore::{WeightMatrix, WeightSequence};
use crate::tol;
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Weight functions
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OmegaCerts {
    /// `ω(2t) = O(ω(t))`: bounded tail trend of the doubling ratio.
    pub w1: Check,
    /// `ω(t) = o(t)`: fitted tail growth strictly below degree 1.
    pub w2: Check,
    /// `log t = o(ω(t))`: `ω(t)/log t` grows along the tail.
    pub w3: Check,
    /// Convexity of `φ(u) = ω(e^u)` on the uniform `u`-grid.
    pub w4: Check,
    /// Discrete concavity of `ω` in `t`.
    pub concave: Check,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeightFunction {
    pub name: String,
    /// Log-uniform grid, `t > 0`, increasing.
    pub grid: Vec<f64>,
    pub vals: Vec<f64>,
    pub certs: OmegaCerts,
}

fn is_log_uniform(grid: &[f64]) -> bool {
    let n = grid.len();
    let du = (grid[n - 1].ln() - grid[0].ln()) / (n - 1) as f64;
    grid.windows(2)
        .enumerate()
        .all(|(i, w)| {
            let _ = i;
            (w[1].ln() - w[0].ln() - du).abs() <= 1e-9 * du.abs().max(1e-12)
        })
}

impl WeightFunction {
    /// Builds from samples; non-log-uniform grids are resampled onto a
    /// log-uniform grid of the same span and size via the monotone
    /// piecewise-linear interpolant in `(log t, ω)`.
    pub fn from_samples(name: impl Into<String>, grid: Vec<f64>, vals: Vec<f64>) -> Result<Self> {
        let name = name.into();
        if grid.len() < 64 {
            return Err(Error::GridTooCoarseFn(grid.len()));
        }
        if grid.len() != vals.len() {
            return Err(Error::LengthMismatch(grid.len(), vals.len()));
        }
        for (i, w) in vals.windows(2).enumerate() {
            if w[1] < w[0] - 1e-12 * w[0].abs().max(1.0) {
                return Err(Error::NotIncreasing(name, i + 1));
            }
        }
        let (grid, vals) = if is_log_uniform(&grid) {
            (grid, vals)
        } else {
            let n = grid.len();
            let new_grid = logdom::logspace(grid[0], grid[n - 1], n);
            let new_vals = new_grid.iter().map(|&t| interp_log(&grid, &vals, t)).collect();
            (new_grid, new_vals)
        };
        let certs = certify(&grid, &vals);
        Ok(WeightFunction { name, grid, vals, certs })
    }

    /// Samples a closed-form `ω` on a log-uniform grid.
    pub fn from_fn(
        name: impl Into<String>,
        t_min: f64,
        t_max: f64,
        n: usize,
        f: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let grid = logdom::logspace(t_min, t_max, n);
        let vals = grid.iter().map(|&t| f(t)).collect();
        Self::from_samples(name, grid, vals)
    }

    /// Piecewise-linear evaluation in `(log t, ω)`, clamped at both ends.
    pub fn eval(&self, t: f64) -> f64 {
        interp_log(&self.grid, &self.vals, t)
    }

    /// `ω` replaced by `max(ω - ω(1), 0)`, the standard normalization
    /// making `ω` vanish on `[0, 1]` without changing the generated class.
    pub fn normalized(&self) -> Self {
        let shift = self.eval(1.0);
        let vals: Vec<f64> = self.vals.iter().map(|&v| (v - shift).max(0.0)).collect();
        let certs = certify(&self.grid, &vals);
        WeightFunction {
            name: format!("{}|norm", self.name),
            grid: self.grid.clone(),
            vals,
            certs,
        }
    }

    /// Uniform grid of `u = log t` with the sampled `φ(u) = ω(e^u)`.
    pub fn phi(&self) -> (Vec<f64>, Vec<f64>) {
        (self.grid.iter().map(|t| t.ln()).collect(), self.vals.clone())
    }

    /// Discrete derivative `ω'` at the nodes: centered slopes in `t`,
    /// clamped nonnegative (stable for concave `ω`).
    pub fn derivative(&self) -> Vec<f64> {
        let n = self.grid.len();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(n - 1);
            let d = (self.vals[hi] - self.vals[lo]) / (self.grid[hi] - self.grid[lo]);
            out[i] = d.max(0.0);
        }
        out
    }
}

fn interp_log(grid: &[f64], vals: &[f64], t: f64) -> f64 {
    let n = grid.len();
    if t <= grid[0] {
        return vals[0];
    }
    if t >= grid[n - 1] {
        return vals[n - 1];
    }
    let u = t.ln();
    let u0 = grid[0].ln();
    let du = (grid[n - 1].ln() - u0) / (n - 1) as f64;
    let mut i = ((u - u0) / du) as usize;
    // Guard against rounding at segment boundaries.
    while i + 1 < n && grid[i + 1].ln() < u {
        i += 1;
    }
    while i > 0 && grid[i].ln() > u {
        i -= 1;
    }
    let (ua, ub) = (grid[i].ln(), grid[i + 1].ln());
    let s = ((u - ua) / (ub - ua)).clamp(0.0, 1.0);
    vals[i] + s * (vals[i + 1] - vals[i])
}

fn certify(grid: &[f64], vals: &[f64]) -> OmegaCerts {
    let n = grid.len();
    let tail_lo = n / 2;

    // (ω1): ratio ω(2t)/ω(t) over tail nodes where ω > 0; trend of its log.
    let mut ratios = Vec::new();
    for i in tail_lo..n {
        let t = grid[i];
        if 2.0 * t > grid[n - 1] {
            break;
        }
        if vals[i] > 0.0 {
            ratios.push((interp_log(grid, vals, 2.0 * t) / vals[i]).ln());
        }
    }
    let w1 = if ratios.len() >= 4 {
        Check::deviation(logdom::tail_slope(&ratios, ratios.len() / 2), tol::TREND_TOL)
    } else {
        Check::new(true, 0.0, tol::TREND_TOL)
    };

    // (ω2)/(ω3) via the tail power fit of log ω against (log t, log log t).
    let fit_lo = (3 * n) / 4;
    let xs: Vec<f64> = grid[fit_lo..].to_vec();
    let ys: Vec<f64> = vals[fit_lo..]
        .iter()
        .map(|&v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY })
        .collect();
    let finite = ys.iter().all(|v| v.is_finite());
    let fit = if finite && xs.len() >= 3 {
        logdom::tail_power_fit(&xs, &ys)
    } else {
        logdom::PowerFit { p: 0.0, q: 0.0, intercept: 0.0 }
    };
    let w2_ok = fit.p < 0.995 || (fit.p < 1.005 && fit.q < -0.05);
    let w2 = Check::new(w2_ok, fit.p, 0.995);

    // (ω3): growth of ω/log t across the last decade of the grid.
    let t_end = grid[n - 1];
    let t_mid = t_end / 10.0;
    let r_end = interp_log(grid, vals, t_end) / t_end.ln();
    let r_mid = interp_log(grid, vals, t_mid) / t_mid.ln().max(1e-9);
    let growth = if r_mid > 0.0 { r_end / r_mid } else { f64::INFINITY };
    let w3 = Check::new(growth >= 1.05, growth, 1.05);

    // (ω4): second differences of φ on the uniform u grid.
    let mut worst4 = f64::INFINITY;
    for i in 1..n - 1 {
        worst4 = worst4.min(vals[i - 1] + vals[i + 1] - 2.0 * vals[i]);
    }
    let w4 = Check::slack(worst4, tol::CONVEXITY_TOL * vals[n - 1].abs().max(1.0));

    // Concavity in t (nonuniform divided differences).
    let mut worstc = f64::NEG_INFINITY;
    for i in 1..n - 1 {
        let dl = (vals[i] - vals[i - 1]) / (grid[i] - grid[i - 1]);
        let dr = (vals[i + 1] - vals[i]) / (grid[i + 1] - grid[i]);
        worstc = worstc.max(dr - dl);
    }
    let concave = Check::deviation(worstc, tol::CONVEXITY_TOL);

    OmegaCerts { w1, w2, w3, w4, concave }
}

// ---------------------------------------------------------------------------
// Non-quasianalyticity integral
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NqReport {
    /// Trapezoid value of `∫_1^T ω(t)/t² dt` on the grid.
    pub partial: f64,
    /// Tail estimate under the fitted tail model, when convergent.
    pub tail: Option<f64>,
    pub convergent: bool,
    pub fit_p: f64,
    pub fit_q: f64,
}

/// Convergence test for `∫_1^∞ ω(t)/t² dt`: trapezoid over the grid plus a
/// power-law tail extrapolated from the fitted `(p, q)` of
/// `ω ~ c t^p (log t)^q`; divergent when `p ≥ 1` up to the fit margin, or
/// `p ≈ 1` with `q ≥ -1`.
pub fn nq_integral(w: &WeightFunction) -> NqReport {
    let n = w.grid.len();
    let mut acc = KahanSum::new();
    for i in 0..n - 1 {
        let (t0, t1) = (w.grid[i], w.grid[i + 1]);
        if t1 <= 1.0 {
            continue;
        }
        let a = t0.max(1.0);
        let f0 = interp_log(&w.grid, &w.vals, a) / (a * a);
        let f1 = w.vals[i + 1] / (t1 * t1);
        acc.add(0.5 * (f0 + f1) * (t1 - a));
    }
    let fit_lo = (3 * n) / 4;
    let xs: Vec<f64> = w.grid[fit_lo..].to_vec();
    let ys: Vec<f64> = w.vals[fit_lo..]
        .iter()
        .map(|&v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY })
        .collect();
    let fit = if ys.iter().all(|v| v.is_finite()) {
        logdom::tail_power_fit(&xs, &ys)
    } else {
        logdom::PowerFit { p: 0.0, q: 0.0, intercept: f64::NEG_INFINITY }
    };
    let convergent = fit.p < 0.995 || (fit.p < 1.005 && fit.q < -1.05);
    let t_end = w.grid[n - 1];
    let w_end = w.vals[n - 1];
    let tail = if !convergent {
        None
    } else if fit.p < 0.995 {
        Some(w_end / (t_end * (1.0 - fit.p)))
    } else {
        // ω ~ c t (log t)^q with q < -1.
        Some(w_end * t_end.ln() / (-(fit.q + 1.0) * t_end))
    };
    NqReport { partial: acc.value(), tail, convergent, fit_p: fit.p, fit_q: fit.q }
}

// ---------------------------------------------------------------------------
// Young conjugate
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct YoungConjugate {
    pub name: String,
    pub sgrid: Vec<f64>,
    pub vals: Vec<f64>,
    /// Set when the `(ω3)` certificate of the source failed (the sup may be
    /// saturating for large `s`).
    pub w3_failed: bool,
    /// Grid extension (tail extrapolation) was required.
    pub extended: bool,
    pub convex: Check,
    pub nondecreasing: Check,
}

struct ConjCtx {
    u: Vec<f64>,
    phi: Vec<f64>,
    du: f64,
    /// Nodes whose three neighbouring second differences are positive and
    /// mutually consistent: local smoothness admits parabolic refinement.
    eligible: Vec<bool>,
}

/// The conjugate lives on `u >= 0`: grids reaching below are resampled onto
/// a uniform `u`-grid anchored at the top and clipped at zero. Keeps `φ*`
/// nondecreasing for `s >= 0`.
fn phi_nonneg(w: &WeightFunction) -> (Vec<f64>, Vec<f64>) {
    let (u, phi) = w.phi();
    if u[0] >= 0.0 {
        return (u, phi);
    }
    let n = u.len();
    let du = (u[n - 1] - u[0]) / (n - 1) as f64;
    let m = ((u[n - 1] / du).floor() as usize).max(2);
    let du = u[n - 1] / m as f64; // both endpoints exact
    let mut out_u = Vec::with_capacity(m + 1);
    let mut out_phi = Vec::with_capacity(m + 1);
    for i in 0..=m {
        let uu = i as f64 * du;
        out_u.push(uu);
        out_phi.push(w.eval(uu.exp()));
    }
    (out_u, out_phi)
}

impl ConjCtx {
    fn new(u: Vec<f64>, phi: Vec<f64>) -> Self {
        let n = u.len();
        let du = (u[n - 1] - u[0]) / (n - 1) as f64;
        let d2: Vec<f64> = (1..n - 1).map(|i| phi[i - 1] + phi[i + 1] - 2.0 * phi[i]).collect();
        let mut eligible = vec![false; n];
        for i in 2..n - 2 {
            let (a, b, c) = (d2[i - 2], d2[i - 1], d2[i]);
            let lo = a.min(b).min(c);
            let hi = a.max(b).max(c);
            if lo > 0.0 && hi <= 2.0 * lo {
                eligible[i] = true;
            }
        }
        ConjCtx { u, phi, du, eligible }
    }

    /// Exact sup over the node set, optionally sharpened by the local
    /// parabolic model at smooth nodes. Returns `(value, argmax_at_end)`.
    /// The result is a pointwise max of convex functions of `s`, hence
    /// exactly convex up to rounding.
    fn value(&self, s: f64) -> (f64, bool) {
        let n = self.u.len();
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0usize;
        for i in 0..n {
            let v = s * self.u[i] - self.phi[i];
            if v > best {
                best = v;
                arg = i;
            }
        }
        // Parabolic sharpening around the argmax (and its neighbours, which
        // suffices: elsewhere the parabola sup is dominated).
        let lo = arg.saturating_sub(2);
        let hi = (arg + 2).min(n - 1);
        for i in lo..=hi {
            if !self.eligible[i] {
                continue;
            }
            let b = (self.phi[i + 1] - self.phi[i - 1]) / (2.0 * self.du);
            let a = (self.phi[i + 1] - 2.0 * self.phi[i] + self.phi[i - 1]) / (self.du * self.du);
            if a <= 0.0 {
                continue;
            }
            let dz = ((s - b) / a).clamp(-self.du, self.du);
            let v = s * (self.u[i] + dz) - (self.phi[i] + b * dz + 0.5 * a * dz * dz);
            if v > best {
                best = v;
            }
        }
        (best, arg == n - 1)
    }

    /// Node-max only (used by the biconjugation identity, which needs the
    /// exact discrete conjugate).
    fn node_value(&self, s: f64) -> f64 {
        self.u
            .iter()
            .zip(&self.phi)
            .map(|(&u, &p)| s * u - p)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn conj_ctx_with_extension(w: &WeightFunction, s_max: f64) -> Result<(ConjCtx, bool)> {
    let (mut u, mut phi) = phi_nonneg(w);
    let n = u.len();
    let du = (u[n - 1] - u[0]) / (n - 1) as f64;
    // Largest affordable slope at the grid end; extend with the fitted tail
    // power law until it exceeds s_max.
    let end_slope = (phi[n - 1] - phi[n - 2]) / du;
    let mut extended = false;
    if end_slope <= s_max {
        let fit_lo = (3 * n) / 4;
        let xs: Vec<f64> = w.grid[fit_lo..].to_vec();
        let ys: Vec<f64> = w.vals[fit_lo..]
            .iter()
            .map(|&v| if v > 0.0 { v.ln() } else { f64::NEG_INFINITY })
            .collect();
        if !ys.iter().all(|v| v.is_finite()) {
            return Err(Error::MaximizerAtBoundary(s_max));
        }
        let fit = logdom::tail_power_fit(&xs, &ys);
        if fit.p <= 1e-6 {
            return Err(Error::MaximizerAtBoundary(s_max));
        }
        // φ_ext(u) = ω(T) e^{p (u - U)}; slope p·φ_ext reaches s_max at
        // u_need = U + ln(s_max / (p ω(T))) / p.
        let u_end = u[n - 1];
        let w_end = phi[n - 1].max(1e-300);
        let u_need = u_end + ((s_max / (fit.p * w_end)).max(2.0)).ln() / fit.p;
        if u_need > 60.0 {
            return Err(Error::MaximizerAtBoundary(s_max));
        }
        let extra = (((u_need - u_end) / du).ceil() as usize).max(2);
        for i in 1..=extra {
            let uu = u_end + i as f64 * du;
            u.push(uu);
            phi.push(w_end * (fit.p * (uu - u_end)).exp());
        }
        extended = true;
    }
    Ok((ConjCtx::new(u, phi), extended))
}

/// Discrete Young conjugate `φ*(s) = sup_u (su - φ(u))` on the given
/// `s`-grid. The grid is auto-extended by the fitted tail power law until
/// the maximizer is interior (cap `u = 60`).
pub fn young_conjugate(w: &WeightFunction, sgrid: &[f64]) -> Result<YoungConjugate> {
    let s_max = sgrid.iter().cloned().fold(0.0f64, f64::max);
    let (ctx, extended) = conj_ctx_with_extension(w, s_max)?;
    let mut vals = Vec::with_capacity(sgrid.len());
    for &s in sgrid {
        let (v, at_end) = ctx.value(s);
        if at_end {
            return Err(Error::MaximizerAtBoundary(s));
        }
        vals.push(v);
    }
    let mut worst_convex = f64::INFINITY;
    for i in 1..vals.len().saturating_sub(1) {
        // Divided second difference on a possibly nonuniform s grid.
        let dl = (vals[i] - vals[i - 1]) / (sgrid[i] - sgrid[i - 1]);
        let dr = (vals[i + 1] - vals[i]) / (sgrid[i + 1] - sgrid[i]);
        worst_convex = worst_convex.min(dr - dl);
    }
    let mut worst_mono = f64::INFINITY;
    for i in 1..vals.len() {
        worst_mono = worst_mono.min(vals[i] - vals[i - 1]);
    }
    Ok(YoungConjugate {
        name: format!("{}*", w.name),
        sgrid: sgrid.to_vec(),
        vals,
        w3_failed: !w.certs.w3.ok,
        extended,
        convex: Check::slack(worst_convex, tol::LOG_SLACK),
        nondecreasing: Check::slack(worst_mono, tol::LOG_SLACK),
    })
}

/// Biconjugation defect `max_i |φ**(u_i) - φ(u_i)|` computed with the exact
/// discrete conjugate (node max) in both directions, the dual grid being the
/// segment slopes of `φ`. Zero up to rounding (relative to the scale of
/// `s·u`) for convex `φ`.
pub fn biconjugate_max_error(w: &WeightFunction) -> f64 {
    let (u, phi) = phi_nonneg(w);
    let ctx = ConjCtx::new(u.clone(), phi.clone());
    let n = u.len();
    let mut slopes: Vec<f64> = (0..n - 1).map(|i| (phi[i + 1] - phi[i]) / (u[i + 1] - u[i])).collect();
    slopes.dedup();
    let star: Vec<f64> = slopes.iter().map(|&s| ctx.node_value(s)).collect();
    let mut worst = 0.0f64;
    for i in 0..n {
        let mut bi = f64::NEG_INFINITY;
        for (j, &s) in slopes.iter().enumerate() {
            bi = bi.max(s * u[i] - star[j]);
        }
        worst = worst.max((bi - phi[i]).abs());
    }
    worst
}

// ---------------------------------------------------------------------------
// Associated weight matrix
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct AssocMatrixReport {
    pub matrix: WeightMatrix,
    /// Worst slack of `2 φ*(x(j+k)) <= φ*(2xj) + φ*(2xk)` over all checked
    /// `(x, j, k)` (log units).
    pub fctmod_worst: f64,
    /// Worst slack of the pointwise order in `x`.
    pub order_worst: f64,
}

/// Builds `Ω^x_k = exp(φ*(xk)/x)` for each `x`, on the normalized `ω`, and
/// verifies the pointwise order in `x` together with the mixed
/// moderate-growth identity for all pairs `(x, 2x)` present in the list.
pub fn associated_matrix(w: &WeightFunction, xlist: &[f64], k_cap: usize) -> Result<AssocMatrixReport> {
    let wn = w.normalized();
    let mut xs: Vec<f64> = xlist.to_vec();
    xs.sort_by(f64::total_cmp);
    let s_max = xs.last().unwrap() * 2.0 * k_cap as f64;
    let (ctx, _extended) = conj_ctx_with_extension(&wn, s_max)?;

    // φ*(x k) and φ*(2x k) for every x and k <= k_cap.
    let conj_at = |s: f64| -> Result<f64> {
        let (v, at_end) = ctx.value(s);
        if at_end {
            return Err(Error::MaximizerAtBoundary(s));
        }
        Ok(v)
    };

    let mut rows: Vec<(f64, Vec<f64>)> = Vec::new();
    for &x in &xs {
        let mut star = Vec::with_capacity(2 * k_cap + 1);
        for k in 0..=2 * k_cap {
            star.push(conj_at(x * k as f64)?);
        }
        rows.push((x, star));
    }

    // Sanity: the normalized conjugate vanishes at 0 up to the clipping
    // error of one grid cell (the stored interpolant cannot hit the
    // normalization crossing exactly); Ω^x_0 is pinned to 1.
    for (x, star) in &rows {
        if star[0].abs() > 1e-3 {
            return Err(Error::AuditFailed(format!(
                "normalized conjugate nonzero at 0 for x = {x}: {}",
                star[0]
            )));
        }
    }

    let mut entries = Vec::new();
    for (x, star) in &rows {
        let mut logv: Vec<f64> = (0..=k_cap).map(|k| star[k] / x).collect();
        logv[0] = 0.0;
        entries.push((*x, WeightSequence::new(format!("{}^{x}", wn.name), logv)?));
    }

    // Pointwise order in x.
    let mut order_worst = f64::INFINITY;
    for pair in entries.windows(2) {
        for k in 0..=k_cap {
            order_worst = order_worst.min(pair[1].1.seq.logv[k] - pair[0].1.seq.logv[k]);
        }
    }

    // Mixed moderate growth across (x, 2x) pairs.
    let mut fct_worst = f64::INFINITY;
    for (i, &(x, ref star_x)) in rows.iter().enumerate() {
        let Some((_, star_2x)) = rows
            .iter()
            .skip(i + 1)
            .find(|(y, _)| (y - 2.0 * x).abs() <= 1e-12 * x)
        else {
            continue;
        };
        for s in 1..=k_cap {
            for j in 0..=s {
                let k = s - j;
                // Ω^x_{j+k} <= Ω^{2x}_j Ω^{2x}_k in the log domain.
                let lhs = star_x[s] / x;
                let rhs = (star_2x[j] + star_2x[k]) / (2.0 * x);
                fct_worst = fct_worst.min(rhs - lhs);
            }
        }
    }
    if fct_worst < -tol::LOG_SLACK {
        return Err(Error::FctmodViolation(fct_worst));
    }

    Ok(AssocMatrixReport {
        matrix: WeightMatrix::new(entries)?,
        fctmod_worst: fct_worst,
        order_worst,
    })
}

// ---------------------------------------------------------------------------
// ω from a weight sequence
// ---------------------------------------------------------------------------

/// `ω_M(t) = -log h_M(1/t) = max_k (k log t - log M_k)`, sampled on a log
/// grid spanning from the flat region to the onset of truncation
/// saturation (`t = μ_K`).
pub fn omega_from_sequence(ws: &WeightSequence, n: usize) -> Result<WeightFunction> {
    let logv = &ws.seq.logv;
    let k_max = ws.k_max();
    let t_zero = (1..=k_max)
        .map(|k| logv[k] / k as f64)
        .fold(f64::INFINITY, f64::min)
        .exp();
    let t_sat = ws.log_mu[k_max].exp();
    let t_lo = (t_zero * 0.25).max(1e-6);
    let t_hi = t_sat.max(t_lo * 1e4);
    WeightFunction::from_fn(format!("omega[{}]", ws.label()), t_lo, t_hi, n, |t| {
        let u = t.ln();
        (0..=k_max)
            .map(|k| k as f64 * u - logv[k])
            .fold(0.0f64, f64::max)
    })
}

// ---------------------------------------------------------------------------
// ω̃ construction
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct OmegaTilde {
    pub tilde: WeightFunction,
    /// Block boundaries; index `n` holds `x_n` (`x_1 = 0`).
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    pub zs: Vec<f64>,
    /// Highest block fully constructed.
    pub n_reached: usize,
    /// Worst slack of `(n-2) ω <= ω̃ <= n ω` on the covered range.
    pub sandwich_lower: Check,
    pub sandwich_upper: Check,
    pub concave: Check,
    /// Worst jump at block boundaries relative to local scale.
    pub continuity: Check,
}

/// Builds the interpolating weight `ω̃` between a concave non-quasianalytic
/// `ω` and a faster-growing target `f`, block by block. `x_n` is the first
/// grid point satisfying all four lower-bound conditions (their max);
/// `y_n` matches the derivative condition on the discrete derivative;
/// `z_n` solves the continuity equation. Returns the partial construction
/// with the block count actually reached when the grid runs out.
pub fn omega_tilde(w: &WeightFunction, f: &WeightFunction, n_max: usize) -> Result<OmegaTilde> {
    if !w.certs.concave.ok {
        return Err(Error::HypothesisFailed("ω must be concave".into()));
    }
    let nq = nq_integral(w);
    if !nq.convergent {
        return Err(Error::HypothesisFailed("ω must be non-quasianalytic".into()));
    }
    let n = w.grid.len();
    let deriv = w.derivative();

    // Suffix integrals I_i = ∫_{t_i}^∞ ω/(1+t²), trapezoid plus fitted tail.
    let mut suffix = vec![0.0; n];
    let tail = nq.tail.unwrap_or(0.0);
    let mut acc = tail;
    for i in (0..n - 1).rev() {
        let (t0, t1) = (w.grid[i], w.grid[i + 1]);
        let f0 = w.vals[i] / (1.0 + t0 * t0);
        let f1 = w.vals[i + 1] / (1.0 + t1 * t1);
        acc += 0.5 * (f0 + f1) * (t1 - t0);
        suffix[i] = acc;
    }
    suffix[n - 1] = tail;

    // Suffix minimum of f/ω for the domination condition.
    let mut fw_sufmin = vec![f64::INFINITY; n];
    let mut m = f64::INFINITY;
    for i in (0..n).rev() {
        if w.vals[i] > 0.0 {
            m = m.min(f.eval(w.grid[i]) / w.vals[i]);
        }
        fw_sufmin[i] = m;
    }

    let eval_w = |t: f64| interp_log(&w.grid, &w.vals, t);
    let eval_d = |t: f64| interp_log(&w.grid, &deriv, t);

    let mut xs = vec![0.0f64; 2]; // xs[1] = x_1 = 0
    let mut ys = vec![0.0f64; 2];
    let mut zs = vec![0.0f64; 2];
    let mut n_reached = 1usize;

    for blk in 2..=n_max {
        let nn = blk as f64;
        // Lower bounds for x_blk.
        let b_px1 = 2.0 * ys[blk - 1] + nn;
        let b_px3 = (1..blk)
            .map(|i| 2f64.powi((blk - i) as i32) * eval_w(zs[i].max(w.grid[0])) * if zs[i] == 0.0 { 0.0 } else { 1.0 })
            .fold(0.0f64, f64::max);
        // First node satisfying every condition.
        let mut found = None;
        for i in 0..n {
            let t = w.grid[i];
            if t <= b_px1 {
                continue;
            }
            if suffix[i] > 1.0 / (nn * nn * nn) {
                continue;
            }
            if fw_sufmin[i] < nn * nn {
                continue;
            }
            if w.vals[i] < b_px3 {
                continue;
            }
            found = Some(i);
            break;
        }
        let Some(ix) = found else {
            if blk == 2 {
                return Err(Error::GridExhausted(2));
            }
            break;
        };
        let x = w.grid[ix];
        let dx = deriv[ix];
        if dx <= 0.0 {
            break;
        }
        // y: first node past x with ω' <= (n-1)/n ω'(x); refine within one
        // cell by linear interpolation on the derivative samples.
        let target = (nn - 1.0) / nn * dx;
        let mut iy = None;
        for i2 in ix + 1..n {
            if deriv[i2] <= target {
                iy = Some(i2);
                break;
            }
        }
        let Some(iy) = iy else { break };
        let (d0, d1) = (deriv[iy - 1], deriv[iy]);
        let frac = if d0 > d1 { ((d0 - target) / (d0 - d1)).clamp(0.0, 1.0) } else { 1.0 };
        let y = w.grid[iy - 1] + frac * (w.grid[iy] - w.grid[iy - 1]);
        // z from the continuity equation.
        let wz = nn * eval_w(y) - (nn - 1.0) * (eval_w(x) + (y - x) * dx);
        if !wz.is_finite() || wz < 0.0 {
            break;
        }
        // Invert ω (increasing) for the nominal z location.
        let mut iz = 0usize;
        while iz + 1 < n && w.vals[iz + 1] < wz {
            iz += 1;
        }
        let z = if iz + 1 < n && w.vals[iz + 1] > w.vals[iz] {
            w.grid[iz]
                + (wz - w.vals[iz]) / (w.vals[iz + 1] - w.vals[iz]) * (w.grid[iz + 1] - w.grid[iz])
        } else {
            w.grid[iz]
        };
        xs.push(x);
        ys.push(y);
        zs.push(z);
        n_reached = blk;
    }

    if n_reached < 2 {
        return Err(Error::GridExhausted(2));
    }

    // Exact ω(z_i) values from the defining equation keep the assembled
    // function continuous at the y breakpoints.
    let mut wz_exact = vec![0.0f64; n_reached + 1];
    for i in 2..=n_reached {
        let nn = i as f64;
        wz_exact[i] =
            nn * eval_w(ys[i]) - (nn - 1.0) * (eval_w(xs[i]) + (ys[i] - xs[i]) * eval_d(xs[i]));
    }
    let s_partial = |j: usize| -> f64 {
        // Σ_{i=1}^{j} ω(z_{i+1})
        (1..=j).map(|i| wz_exact[i + 1]).sum()
    };

    let tilde_at = |t: f64| -> f64 {
        if t < xs[2] {
            return eval_w(t);
        }
        let mut blk = n_reached;
        for b in 2..n_reached {
            if t < xs[b + 1] {
                blk = b;
                break;
            }
        }
        let nn = blk as f64;
        if t < ys[blk] {
            (nn - 1.0) * (eval_w(xs[blk]) + (t - xs[blk]) * eval_d(xs[blk])) - s_partial(blk - 2)
        } else {
            nn * eval_w(t) - s_partial(blk - 1)
        }
    };

    let tilde_vals: Vec<f64> = w.grid.iter().map(|&t| tilde_at(t)).collect();

    // Sandwich audit on the covered range, relative to the local scale.
    let (mut worst_lo, mut worst_hi) = (f64::INFINITY, f64::INFINITY);
    for (i, &t) in w.grid.iter().enumerate() {
        if t < xs[2] || (n_reached < n_max && t >= *xs.last().unwrap()) {
            continue;
        }
        let mut blk = n_reached;
        for b in 2..n_reached {
            if t < xs[b + 1] {
                blk = b;
                break;
            }
        }
        let nn = blk as f64;
        let scale = (nn * w.vals[i]).abs().max(1.0);
        worst_lo = worst_lo.min((tilde_vals[i] - (nn - 2.0) * w.vals[i]) / scale);
        worst_hi = worst_hi.min((nn * w.vals[i] - tilde_vals[i]) / scale);
    }

    // Continuity at the breakpoints, relative to local scale.
    let mut worst_jump = 0.0f64;
    for b in 2..=n_reached {
        for &t in &[xs[b], ys[b]] {
            let lo = tilde_at(t * (1.0 - 1e-9));
            let hi = tilde_at(t * (1.0 + 1e-9));
            worst_jump = worst_jump.max((hi - lo).abs() / lo.abs().max(1.0));
        }
    }

    let tilde = WeightFunction::from_samples(
        format!("tilde[{}]", w.name),
        w.grid.clone(),
        tilde_vals,
    )?;
    let concave = tilde.certs.concave;

    Ok(OmegaTilde {
        tilde,
        xs,
        ys,
        zs,
        n_reached,
        sandwich_lower: Check::slack(worst_lo, 1e-6),
        sandwich_upper: Check::slack(worst_hi, 1e-6),
        concave,
        continuity: Check::deviation(worst_jump, 1e-6),
    })
}

// ---------------------------------------------------------------------------
// Step-function comparison ℓ <= φ* + const
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EllReport {
    /// Fitted constant `max_k (ℓ(k) - φ*(k))`.
    pub constant: f64,
    /// Tail trend of the deficit; bounded means the comparison is stable.
    pub stable: Check,
    pub deficits: Vec<f64>,
}

/// Compares the step function `ℓ(t) = log max(L_k, 1)` against the Young
/// conjugate of the given weight function at integer arguments.
pub fn ell_compare(log_l: &[f64], w: &WeightFunction) -> Result<EllReport> {
    let sgrid: Vec<f64> = (0..log_l.len()).map(|k| k as f64).collect();
    let conj = young_conjugate(w, &sgrid)?;
    let deficits: Vec<f64> = log_l
        .iter()
        .zip(&conj.vals)
        .map(|(&l, &p)| l.max(0.0) - p)
        .collect();
    let constant = deficits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let stable = Check::deviation(logdom::tail_slope(&deficits, deficits.len() / 4), tol::TREND_TOL);
    Ok(EllReport { constant, stable, deficits })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtins;

    fn sqrt_omega() -> WeightFunction {
        builtins::weight_function("power:0.5").unwrap()
    }

    #[test]
    fn sqrt_certificates() {
        let w = sqrt_omega();
        assert!(w.certs.w1.ok);
        // Doubling ratio tends to sqrt(2).
        assert!(w.certs.w2.ok, "p = {}", w.certs.w2.witness);
        assert!((w.certs.w2.witness - 0.5).abs() < 0.02);
        assert!(w.certs.w3.ok);
        assert!(w.certs.w4.ok);
        assert!(w.certs.concave.ok);
    }

    #[test]
    fn linear_omega_fails_w2() {
        let w = builtins::weight_function("power:1").unwrap();
        assert!(!w.certs.w2.ok, "p = {}", w.certs.w2.witness);
    }

    #[test]
    fn t_over_log_is_quasianalytic() {
        let w = builtins::weight_function("t-over-log").unwrap();
        let rep = nq_integral(&w);
        assert!(!rep.convergent, "p = {}, q = {}", rep.fit_p, rep.fit_q);
    }

    #[test]
    fn nq_integral_of_sqrt_is_two() {
        let rep = nq_integral(&sqrt_omega());
        let total = rep.partial + rep.tail.unwrap();
        assert!(rep.convergent);
        assert!((total - 2.0).abs() < 0.02, "got {total}");
    }

    #[test]
    fn nq_integral_of_log_squared_converges() {
        let w = builtins::weight_function("log2").unwrap();
        let rep = nq_integral(&w);
        assert!(rep.convergent);
        // Oracle: ∫_1^∞ ln(1+t)²/t² dt computed by high-resolution
        // trapezoid on a finer grid.
        let fine = logdom::logspace(1.0, 1e14, 200_000);
        let mut acc = KahanSum::new();
        for win in fine.windows(2) {
            let f0 = (1.0 + win[0]).ln().powi(2) / (win[0] * win[0]);
            let f1 = (1.0 + win[1]).ln().powi(2) / (win[1] * win[1]);
            acc.add(0.5 * (f0 + f1) * (win[1] - win[0]));
        }
        let oracle = acc.value();
        let total = rep.partial + rep.tail.unwrap_or(0.0);
        assert!((total - oracle).abs() < 0.05 * oracle, "got {total}, oracle {oracle}");
    }

    #[test]
    fn young_conjugate_closed_form_for_sqrt() {
        // φ(u) = e^{u/2}: φ*(s) = 2s log(2s) - 2s on the interior-max
        // region 2s >= 1.
        let w = sqrt_omega();
        let sgrid: Vec<f64> = (1..=9).map(|i| 2f64.powi(i)).collect();
        let conj = young_conjugate(&w, &sgrid).unwrap();
        for (&s, &v) in sgrid.iter().zip(&conj.vals) {
            let exact = 2.0 * s * (2.0 * s).ln() - 2.0 * s;
            assert!(
                (v - exact).abs() <= 1e-6 * exact.abs(),
                "s = {s}: got {v}, exact {exact}"
            );
        }
        assert!(conj.convex.ok);
        assert!(conj.nondecreasing.ok);
    }

    #[test]
    fn conjugate_at_zero_vanishes_after_normalization() {
        // Up to the clipping error of one grid cell at the normalization
        // crossing t = 1.
        let w = sqrt_omega().normalized();
        let conj = young_conjugate(&w, &[0.0, 0.5, 1.0]).unwrap();
        assert!(conj.vals[0].abs() <= 5e-4, "φ*(0) = {}", conj.vals[0]);
    }

    #[test]
    fn biconjugation_recovers_convex_samples() {
        // √t on the full default span: φ reaches 1e6, so the defect is
        // judged relative to the working scale.
        let w = sqrt_omega();
        let scale = w.vals.last().unwrap().max(1.0);
        let err = biconjugate_max_error(&w);
        assert!(err <= 1e-14 * scale, "biconjugation error {err} at scale {scale}");
        // Moderate-scale convex data recovers within the absolute 1e-9.
        let small = WeightFunction::from_fn("small", 1e-2, 1e4, 512, |t| t.powf(0.4)).unwrap();
        assert!(biconjugate_max_error(&small) <= 1e-9);
    }

    #[test]
    fn associated_matrix_of_sqrt() {
        let w = sqrt_omega();
        let rep = associated_matrix(&w, &[0.5, 1.0, 2.0], 128).unwrap();
        assert!(rep.fctmod_worst >= -tol::LOG_SLACK);
        assert!(rep.order_worst >= -tol::LOG_SLACK);
        assert_eq!(rep.matrix.len(), 3);
        // Ω^1 of ω = √t is Gevrey-2-like: ratio exponents stay bounded in
        // both directions (the 1/k Stirling correction needs the longer
        // truncation to settle under the growth threshold).
        let g2 = builtins::sequence("gevrey:2", 128).unwrap();
        let omega1 = &rep.matrix.entries[1].1;
        let r1 = crate::seqcore::relation(omega1, &g2).unwrap();
        let r2 = crate::seqcore::relation(&g2, omega1).unwrap();
        assert_eq!(r1.verdict, crate::seqcore::Relation::Preceq);
        assert_eq!(r2.verdict, crate::seqcore::Relation::Preceq);
    }

    #[test]
    fn omega_from_gevrey2_has_sqrt_shape() {
        let m = builtins::sequence("gevrey:2", 256).unwrap();
        let w = omega_from_sequence(&m, 512).unwrap();
        // Tail slope of log ω against log t ≈ 1/2.
        let n = w.grid.len();
        let lo = n / 2;
        let xs: Vec<f64> = w.grid[lo..].iter().map(|t| t.ln()).collect();
        let ys: Vec<f64> = w.vals[lo..].iter().map(|v| v.ln()).collect();
        let (slope, _) = logdom::lsq_line(&xs, &ys);
        assert!((slope - 0.5).abs() < 0.05, "slope {slope}");
        // Monotone, zero near the origin.
        assert!(w.vals.windows(2).all(|p| p[1] >= p[0] - 1e-12));
        assert_eq!(w.vals[0], 0.0);
    }

    #[test]
    fn omega_tilde_sandwich_for_sqrt() {
        let w = sqrt_omega();
        let f = builtins::weight_function("t-over-log").unwrap();
        let ot = omega_tilde(&w, &f, 8).unwrap();
        assert!(ot.n_reached >= 4, "reached {}", ot.n_reached);
        assert!(ot.sandwich_lower.ok, "lower slack {}", ot.sandwich_lower.witness);
        assert!(ot.sandwich_upper.ok, "upper slack {}", ot.sandwich_upper.witness);
        assert!(ot.continuity.ok, "jump {}", ot.continuity.witness);
        assert!(ot.concave.ok, "concavity {}", ot.concave.witness);
        // ω̃/ω grows and ω̃/f shrinks along the constructed range.
        let t0 = ot.xs[2] * 2.0;
        let t1 = *ot.xs.last().unwrap();
        let ratio0 = ot.tilde.eval(t0) / w.eval(t0);
        let ratio1 = ot.tilde.eval(t1 * 1.5) / w.eval(t1 * 1.5);
        assert!(ratio1 > ratio0);
        let fr0 = ot.tilde.eval(t0) / f.eval(t0);
        let fr1 = ot.tilde.eval(t1 * 1.5) / f.eval(t1 * 1.5);
        assert!(fr1 < fr0);
        // Non-quasianalyticity is inherited.
        assert!(nq_integral(&ot.tilde).convergent);
        // n = 2 block: ω̃ = 2ω - const on [y_2, x_3).
        let t = (ot.ys[2] + ot.xs[3]) / 2.0;
        let c = 2.0 * w.eval(t) - ot.tilde.eval(t);
        let t2 = (t + ot.xs[3]) / 2.0;
        let c2 = 2.0 * w.eval(t2) - ot.tilde.eval(t2);
        assert!((c - c2).abs() <= 1e-6 * c.abs().max(1.0));
    }

    #[test]
    fn ell_compare_trivial_cases() {
        // Constants hold up to the one-cell normalization clipping error.
        let w = sqrt_omega().normalized();
        // L ≡ 1: ℓ ≡ 0 <= φ* + 0.
        let rep = ell_compare(&vec![0.0; 64], &w).unwrap();
        assert!(rep.constant <= 1e-3, "constant {}", rep.constant);
        // L_k = Ω^1_k: deficit zero by construction.
        let m = associated_matrix(&sqrt_omega(), &[1.0], 64).unwrap();
        let logv = &m.matrix.entries[0].1.seq.logv;
        let rep2 = ell_compare(logv, &w).unwrap();
        assert!(rep2.constant.abs() <= 1e-3, "constant {}", rep2.constant);
    }

    #[test]
    fn conjugate_cap_and_coarse_grid_errors() {
        // Slowly growing ω: the extension cap binds for large s.
        let w = builtins::weight_function("log2").unwrap();
        assert!(matches!(
            young_conjugate(&w, &[512.0]),
            Err(Error::MaximizerAtBoundary(_))
        ));
        // Fewer than 64 samples is rejected.
        let grid = logdom::logspace(1.0, 1e6, 32);
        let vals: Vec<f64> = grid.iter().map(|t| t.sqrt()).collect();
        assert!(matches!(
            WeightFunction::from_samples("tiny", grid, vals),
            Err(Error::GridTooCoarseFn(32))
        ));
    }

    #[test]
    fn resampling_preserves_eval() {
        // A non-log-uniform grid is resampled; evaluation stays close.
        let grid: Vec<f64> = (0..200).map(|i| 0.01 * 1.12f64.powi(i) + i as f64 * 0.05).collect();
        let vals: Vec<f64> = grid.iter().map(|t| t.sqrt()).collect();
        let w = WeightFunction::from_samples("irregular", grid.clone(), vals).unwrap();
        for &t in &[1.0, 10.0, 100.0] {
            assert!((w.eval(t) - t.sqrt()).abs() < 0.05 * t.sqrt());
        }
    }
}
