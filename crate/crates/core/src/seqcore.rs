//! Weight sequences in log-domain representation: regularity certificates,
//! the associated decay function `h_m` with its counting functions, pairwise
//! relations, moderate growth, and the composition bound `m°`.
//!
//! A sequence `V` is stored as `logv[k] = log V_k` for `k = 0..=K`. Every
//! derived view (`m_k = M_k/k!`, `μ_k = M_k/M_{k-1}`) stays in the log
//! domain; values like `(k!)²` at `k = 256` never materialise linearly.

use serde::{Deserialize, Serialize};

use crate::check::Check;
use crate::logdom::{self, KahanSum};
use crate::tol;
use crate::{Error, Result};

// ---------------------------------------------------------------------------
// Positive sequences
// ---------------------------------------------------------------------------

/// A positive sequence stored as logs. General sequences (derivative bounds,
/// `δ`, `β`) may carry `-inf` entries marking exact zeros and need not start
/// at 1; sequences in a weight-sequence role are validated separately.
#[derive(Clone, Debug, PartialEq)]
pub struct PositiveSequence {
    pub label: String,
    pub logv: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SeqJson {
    label: String,
    #[serde(rename = "logM")]
    log_m: Vec<f64>,
    #[serde(rename = "K")]
    k: usize,
}

impl Serialize for PositiveSequence {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        SeqJson { label: self.label.clone(), log_m: self.logv.clone(), k: self.logv.len() - 1 }
            .serialize(s)
    }
}

impl<'de> Deserialize<'de> for PositiveSequence {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = SeqJson::deserialize(d)?;
        if raw.k + 1 != raw.log_m.len() {
            return Err(serde::de::Error::custom("K does not match logM length"));
        }
        Ok(PositiveSequence { label: raw.label, logv: raw.log_m })
    }
}

impl PositiveSequence {
    /// A sequence whose entries must all be finite.
    pub fn new(label: impl Into<String>, logv: Vec<f64>) -> Result<Self> {
        let label = label.into();
        for (i, &v) in logv.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonPositive { label, index: i });
            }
        }
        Ok(PositiveSequence { label, logv })
    }

    /// A general sequence: `-inf` (an exact zero) is allowed, `NaN`/`+inf`
    /// is not.
    pub fn general(label: impl Into<String>, logv: Vec<f64>) -> Result<Self> {
        let label = label.into();
        for (i, &v) in logv.iter().enumerate() {
            if v.is_nan() || v == f64::INFINITY {
                return Err(Error::NonPositive { label, index: i });
            }
        }
        Ok(PositiveSequence { label, logv })
    }

    /// Truncation length `K`; indices run `0..=K`.
    pub fn k_max(&self) -> usize {
        self.logv.len() - 1
    }
}

// ---------------------------------------------------------------------------
// Weight sequences
// ---------------------------------------------------------------------------

/// Certificates computed at construction. Each records the worst witness and
/// the tolerance it was judged with.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SequenceCerts {
    /// `log M_{k-1} + log M_{k+1} - 2 log M_k >= -tol` for all interior `k`.
    pub log_convex: Check,
    /// `M_k^{1/k}` strictly increasing over the stored range (finite
    /// surrogate for `M_k^{1/k} -> inf`).
    pub root_increasing: Check,
    /// Log-convexity of the derived view `m_k = M_k / k!`.
    pub m_log_convex: Check,
    /// `m_{k+1}/m_k` nondecreasing beyond index 2 (needed by the lower
    /// counting function).
    pub m_ratio_increasing: Check,
    /// `m_k^{1/k}` strictly increasing over the stored tail.
    pub m_root_increasing: Check,
}

/// A validated weight sequence with its derived log-domain views.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeightSequence {
    pub seq: PositiveSequence,
    /// `log m_k = log M_k - log k!`.
    pub log_m: Vec<f64>,
    /// `log μ_k = log M_k - log M_{k-1}`, with `μ_0 = 1`.
    pub log_mu: Vec<f64>,
    pub certs: SequenceCerts,
    /// True when the log-convexity and root-divergence certificates hold;
    /// false tags a general sequence admitted with downgraded status.
    pub is_weight_sequence: bool,
}

// Tolerance scaled to the magnitude of the stored logs: second differences
// of values near 1e9 carry rounding noise far above any absolute 1e-9.
fn log_scale(logv: &[f64]) -> f64 {
    logv.iter().fold(1.0f64, |a, &v| a.max(v.abs()))
}

fn convexity_check(logv: &[f64]) -> Check {
    let mut worst = f64::INFINITY;
    for k in 1..logv.len() - 1 {
        worst = worst.min(logv[k - 1] + logv[k + 1] - 2.0 * logv[k]);
    }
    Check::slack(worst, tol::CONVEXITY_TOL * log_scale(logv))
}

// Strict increase of V_k^{1/k} over the stored tail (second half): the
// finite surrogate for V_k^{1/k} -> inf. Heads may legitimately be flat
// (pinned continuations).
fn root_increase_check(logv: &[f64]) -> Check {
    let mut worst = f64::INFINITY;
    for k in (logv.len() / 2).max(1)..logv.len() - 1 {
        worst = worst.min(logv[k + 1] / (k + 1) as f64 - logv[k] / k as f64);
    }
    Check::new(worst > 0.0, worst, 0.0)
}

impl WeightSequence {
    /// Validates and builds the derived views and all certificates.
    /// Non-log-convex input is admitted but tagged (`is_weight_sequence`
    /// false); non-finite entries and `M_0 != 1` are fatal.
    pub fn new(label: impl Into<String>, log_m_caps: Vec<f64>) -> Result<Self> {
        let label = label.into();
        if log_m_caps.len() < 8 {
            return Err(Error::TooShort(label, 8));
        }
        if log_m_caps[0] != 0.0 {
            return Err(Error::NonUnitHead(log_m_caps[0]));
        }
        let seq = PositiveSequence::new(label, log_m_caps)?;
        let k_max = seq.k_max();
        let lf = logdom::log_factorials(k_max);
        let log_m: Vec<f64> = (0..=k_max).map(|k| seq.logv[k] - lf[k]).collect();
        let mut log_mu = Vec::with_capacity(k_max + 1);
        log_mu.push(0.0);
        for k in 1..=k_max {
            log_mu.push(seq.logv[k] - seq.logv[k - 1]);
        }

        let log_convex = convexity_check(&seq.logv);
        let root_increasing = root_increase_check(&seq.logv);
        let m_log_convex = convexity_check(&log_m);
        let m_root_increasing = root_increase_check(&log_m);
        let m_ratio_increasing = {
            let mut worst = f64::INFINITY;
            for k in 2..k_max {
                let r0 = log_m[k] - log_m[k - 1];
                let r1 = log_m[k + 1] - log_m[k];
                worst = worst.min(r1 - r0);
            }
            Check::slack(worst, tol::CONVEXITY_TOL * log_scale(&log_m))
        };
        let is_weight_sequence = log_convex.ok && root_increasing.ok;
        Ok(WeightSequence {
            seq,
            log_m,
            log_mu,
            certs: SequenceCerts {
                log_convex,
                root_increasing,
                m_log_convex,
                m_ratio_increasing,
                m_root_increasing,
            },
            is_weight_sequence,
        })
    }

    pub fn label(&self) -> &str {
        &self.seq.label
    }

    pub fn k_max(&self) -> usize {
        self.seq.k_max()
    }

    pub fn log_caps(&self) -> &[f64] {
        &self.seq.logv
    }

    /// Associated-function view over `m_k = M_k/k!`.
    pub fn assoc_m(&self) -> AssocFns {
        AssocFns { label: format!("{}:m", self.label()), log_m: self.log_m.clone() }
    }

    /// Associated-function view over the capital sequence `M` itself.
    pub fn assoc_capital(&self) -> AssocFns {
        AssocFns { label: format!("{}:M", self.label()), log_m: self.seq.logv.clone() }
    }
}

// ---------------------------------------------------------------------------
// Relations
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    /// `sup (M_k/N_k)^{1/k} < inf`.
    Preceq,
    /// `(M_k/N_k)^{1/k} -> 0`.
    Lhd,
    Neither,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RelationReport {
    pub verdict: Relation,
    /// `sup_k (log M_k - log N_k)/k`.
    pub sup_r: f64,
    /// Least-squares slope of `r_k` over the stored tail.
    pub tail_slope: f64,
    /// Half-range growth `r_K - r_{K/2}`, the trend discriminator.
    pub tail_growth: f64,
    /// `r_K`, the last ratio exponent.
    pub last_r: f64,
    pub r: Vec<f64>,
}

/// Classifies ratio exponents `r_k`: `Lhd` needs a decreasing tail with
/// `r_K` below `log 0.1`; `Preceq` needs bounded half-range growth;
/// otherwise `Neither`. Finite-truncation verdict carrying the raw data.
pub fn classify_ratios(r: Vec<f64>) -> RelationReport {
    let sup_r = r.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let slope = logdom::tail_slope(&r, r.len() / 4);
    let growth = logdom::tail_growth(&r);
    let last = *r.last().unwrap();
    let verdict = if growth < -tol::GROWTH_TOL && last < tol::LHD_THRESHOLD {
        Relation::Lhd
    } else if growth <= tol::GROWTH_TOL {
        Relation::Preceq
    } else {
        Relation::Neither
    };
    RelationReport { verdict, sup_r, tail_slope: slope, tail_growth: growth, last_r: last, r }
}

/// Relation of two weight sequences via `r_k = (log M_k - log N_k)/k`.
pub fn relation(m: &WeightSequence, n: &WeightSequence) -> Result<RelationReport> {
    if m.k_max() != n.k_max() {
        return Err(Error::LengthMismatch(m.k_max(), n.k_max()));
    }
    let k_max = m.k_max();
    let r: Vec<f64> = (1..=k_max)
        .map(|k| (m.seq.logv[k] - n.seq.logv[k]) / k as f64)
        .collect();
    Ok(classify_ratios(r))
}

// ---------------------------------------------------------------------------
// Moderate growth
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MgReport {
    /// `log` of the finite-truncation sup of `(M_{j+k}/(N_j N_k))^{1/(j+k)}`.
    pub log_mg: f64,
    pub mg: f64,
    pub argmax: (usize, usize),
    /// Same sup restricted to `j + k <= K/2`.
    pub log_mg_half: f64,
    /// Set when the full-truncation sup exceeds the half-truncation sup by
    /// more than the divergence tolerance: the sup is still growing at `K`.
    pub divergent: bool,
}

/// Finite-truncation `mg(M, N)` over all cells with `1 <= j+k <= K`.
pub fn moderate_growth(m: &WeightSequence, n: &WeightSequence) -> MgReport {
    let k_max = m.k_max().min(n.k_max());
    let mut best = f64::NEG_INFINITY;
    let mut best_half = f64::NEG_INFINITY;
    let mut argmax = (0usize, 1usize);
    for s in 1..=k_max {
        for j in 0..=s {
            let v = (m.seq.logv[s] - n.seq.logv[j] - n.seq.logv[s - j]) / s as f64;
            if v > best {
                best = v;
                argmax = (j, s - j);
            }
            if s <= k_max / 2 && v > best_half {
                best_half = v;
            }
        }
    }
    MgReport {
        log_mg: best,
        mg: best.exp(),
        argmax,
        log_mg_half: best_half,
        divergent: best - best_half > tol::MG_DIVERGENCE_TOL,
    }
}

// ---------------------------------------------------------------------------
// Derivation closedness and quasianalyticity
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DcReport {
    /// `C = exp(max_k (log M_{k+1} - log M_k)/(k+1))`.
    pub c: f64,
    /// Secondary certificate `C' = exp(max_k log M_k / k²)` (the
    /// `M_k <= C^{k²}` criterion).
    pub c_secondary: f64,
    /// Verdict: the per-index exponents have a bounded tail trend.
    pub stable: Check,
}

pub fn derivation_closed(m: &WeightSequence) -> DcReport {
    let k_max = m.k_max();
    let d: Vec<f64> = (0..k_max)
        .map(|k| (m.seq.logv[k + 1] - m.seq.logv[k]) / (k + 1) as f64)
        .collect();
    let c = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max).exp();
    let c2 = (1..=k_max)
        .map(|k| m.seq.logv[k] / (k * k) as f64)
        .fold(f64::NEG_INFINITY, f64::max)
        .exp();
    let growth = logdom::tail_growth(&d);
    DcReport { c, c_secondary: c2, stable: Check::deviation(growth, tol::GROWTH_TOL) }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct QaReport {
    /// Finite-truncation verdict: the extrapolated series `Σ 1/μ_k`
    /// diverges.
    pub quasianalytic: bool,
    /// `Σ_{k<=K} 1/μ_k`.
    pub partial_sum: f64,
    /// Tail estimate under the fitted growth model; `None` when the model
    /// diverges or `μ` is not increasing.
    pub tail_estimate: Option<f64>,
    /// Fitted power `p` in `μ_k ~ c k^p (log k)^q` over the tail.
    pub fit_p: f64,
    pub fit_q: f64,
    /// Tail slope of `log μ_k` in `k` (detects exponential growth).
    pub exp_slope: f64,
}

/// Convergence test for `Σ 1/μ_k`. The tail is extrapolated by fitting
/// `log μ_k ≈ c + p log k + q log log k` over the stored tail; the series is
/// judged convergent when `μ` grows exponentially (positive tail slope in
/// `k`) or faster than `k^{1+margin}`.
pub fn quasianalyticity(m: &WeightSequence) -> QaReport {
    let k_max = m.k_max();
    let mut partial = KahanSum::new();
    for k in 1..=k_max {
        partial.add((-m.log_mu[k]).exp());
    }
    let lo = (k_max / 2).max(2);
    let ks: Vec<f64> = (lo..=k_max).map(|k| k as f64).collect();
    let ys: Vec<f64> = (lo..=k_max).map(|k| m.log_mu[k]).collect();
    let fit = logdom::tail_power_fit(&ks, &ys);
    let exp_slope = logdom::tail_slope(&ys, ys.len() / 2);

    let mu_increasing = m.certs.log_convex.ok;
    let exponential = exp_slope > 0.05;
    let convergent = exponential || fit.p > 1.0 + tol::QA_POWER_MARGIN;
    let tail = if !mu_increasing || !convergent {
        None
    } else if exponential {
        let r = (-exp_slope).exp();
        Some((-m.log_mu[k_max]).exp() * r / (1.0 - r))
    } else {
        // ∫_K^inf dk / (c k^p), ignoring the slowly varying log factor.
        let c = fit.intercept.exp();
        Some((k_max as f64).powf(1.0 - fit.p) / (c * (fit.p - 1.0)))
    };
    QaReport {
        quasianalytic: !convergent,
        partial_sum: partial.value(),
        tail_estimate: tail,
        fit_p: fit.p,
        fit_q: fit.q,
        exp_slope,
    }
}

// ---------------------------------------------------------------------------
// Associated functions
// ---------------------------------------------------------------------------

/// View of a positive sequence exposing `h_m(t) = inf_k m_k t^k` and the
/// counting functions. Pure: no cache, safe to share.
#[derive(Clone, Debug)]
pub struct AssocFns {
    pub label: String,
    pub log_m: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub struct HEval {
    /// `log h_m(t)`; `-inf` at `t = 0`.
    pub log_h: f64,
    /// Linear value; may underflow to zero, `log_h` is authoritative.
    pub h: f64,
    /// Smallest minimizer index (the upper counting function).
    pub kstar: usize,
    /// The minimizer hit the truncation; the true infimum lies beyond `K`.
    pub saturated: bool,
}

#[derive(Clone, Copy, Debug)]
pub struct GammaLower {
    pub k: usize,
    /// No ratio crossed `1/t` within the truncation.
    pub saturated: bool,
    /// The ratio sequence was not monotone beyond index 2; the answer is
    /// still the first crossing.
    pub nonmonotone: bool,
}

impl AssocFns {
    pub fn from_log(label: impl Into<String>, log_m: Vec<f64>) -> Self {
        AssocFns { label: label.into(), log_m }
    }

    pub fn k_max(&self) -> usize {
        self.log_m.len() - 1
    }

    /// `h(t) = min_{0<=k<=K} m_k t^k` in the log domain, with the smallest
    /// minimizer. Ties resolve to the smaller index. `h(0) = 0` by
    /// convention with minimizer 1 (every positive power vanishes).
    pub fn h_eval(&self, t: f64) -> HEval {
        debug_assert!(t >= 0.0);
        if t == 0.0 {
            return HEval { log_h: f64::NEG_INFINITY, h: 0.0, kstar: 1, saturated: false };
        }
        let u = t.ln();
        let mut best = self.log_m[0];
        let mut kstar = 0usize;
        for k in 1..self.log_m.len() {
            let v = self.log_m[k] + k as f64 * u;
            if v < best {
                best = v;
                kstar = k;
            }
        }
        HEval { log_h: best, h: best.exp(), kstar, saturated: kstar == self.k_max() }
    }

    /// Lower counting function: smallest `k` with `m_{k+1}/m_k >= 1/t`.
    pub fn gamma_lower(&self, t: f64) -> GammaLower {
        debug_assert!(t > 0.0);
        let u = t.ln();
        let k_max = self.k_max();
        let mut nonmonotone = false;
        let mut prev = f64::NEG_INFINITY;
        let mut first: Option<usize> = None;
        for k in 0..k_max {
            let ratio = self.log_m[k + 1] - self.log_m[k];
            if k >= 2 && ratio < prev - tol::CONVEXITY_TOL {
                nonmonotone = true;
            }
            prev = ratio;
            if first.is_none() && ratio + u >= 0.0 {
                first = Some(k);
            }
        }
        match first {
            Some(k) => GammaLower { k, saturated: false, nonmonotone },
            None => GammaLower { k: k_max, saturated: true, nonmonotone },
        }
    }

    /// Threshold above which `h_m(t) = 1`: `exp(-min_{k>=1} log m_k / k)`.
    pub fn h_one_threshold(&self) -> f64 {
        let m = (1..self.log_m.len())
            .map(|k| self.log_m[k] / k as f64)
            .fold(f64::INFINITY, f64::min);
        (-m).exp()
    }

    /// Auto-chosen log grid of `t` on which the lower counting function
    /// ranges within `[0, K/2]`. Endpoints are nudged off the exact ratio
    /// crossings so grid points never sit on minimizer ties.
    pub fn gamma_grid(&self, points: usize) -> Vec<f64> {
        let k_half = self.k_max() / 2;
        let t_hi = (self.log_m[0] - self.log_m[1]).exp() * 2.0;
        let t_lo = (self.log_m[k_half] - self.log_m[k_half + 1]).exp() * 1.02;
        if t_lo >= t_hi {
            return logdom::logspace(t_hi * 0.5, t_hi * 2.0, points);
        }
        logdom::logspace(t_lo, t_hi, points)
    }
}

// ---------------------------------------------------------------------------
// Lemma-level inequality verification
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HBoundsReport {
    /// Worst slack of `h_m(t) <= C^j n_j t^j h_n(Ct)` over the grid and
    /// `j = 0..=j_max` (log units, nonnegative up to tolerance when ok).
    pub worst_slack_mixed: f64,
    pub worst_at_mixed: (f64, usize),
    /// Worst slack of `h_m(t) <= h_n(eCt/2)²`.
    pub worst_slack_square: f64,
    pub worst_at_square: f64,
}

/// Checks the two moderate-growth inequalities for the associated functions
/// in the log domain at every grid point. `big_c` must dominate the
/// moderate-growth constant `mg(M, N)`.
pub fn verify_h_bounds(
    m: &AssocFns,
    n: &AssocFns,
    big_c: f64,
    tgrid: &[f64],
    j_max: usize,
) -> Result<HBoundsReport> {
    let log_c = big_c.ln();
    let mut worst_mixed = f64::INFINITY;
    let mut at_mixed = (0.0, 0usize);
    let mut worst_sq = f64::INFINITY;
    let mut at_sq = 0.0;
    for &t in tgrid {
        let lhs = m.h_eval(t).log_h;
        let rhs_base = n.h_eval(big_c * t).log_h;
        for j in 0..=j_max {
            let rhs = j as f64 * (log_c + t.ln()) + n.log_m[j] + rhs_base;
            let slack = rhs - lhs;
            if slack < worst_mixed {
                worst_mixed = slack;
                at_mixed = (t, j);
            }
        }
        let rhs_sq = 2.0 * n.h_eval(std::f64::consts::E * big_c / 2.0 * t).log_h;
        let slack = rhs_sq - lhs;
        if slack < worst_sq {
            worst_sq = slack;
            at_sq = t;
        }
    }
    if worst_mixed < -tol::LOG_SLACK {
        return Err(Error::ViolationFound { t: at_mixed.0, j: at_mixed.1, slack: worst_mixed });
    }
    if worst_sq < -tol::LOG_SLACK {
        return Err(Error::ViolationFound { t: at_sq, j: usize::MAX, slack: worst_sq });
    }
    Ok(HBoundsReport {
        worst_slack_mixed: worst_mixed,
        worst_at_mixed: at_mixed,
        worst_slack_square: worst_sq,
        worst_at_square: at_sq,
    })
}

// ---------------------------------------------------------------------------
// Composition bound m°
// ---------------------------------------------------------------------------

/// `log m°_k` for all `k = 1..=k_cap`, where
/// `m°_k = max { m_j m_{α_1} … m_{α_j} : α_i >= 1, Σ α_i = k }`,
/// by dynamic programming over the best `j`-part composition value
/// `B(j, κ) = max_a m_a · B(j-1, κ-a)`.
pub fn m_circle_all(log_m: &[f64], k_cap: usize) -> Vec<f64> {
    let k_cap = k_cap.min(log_m.len() - 1);
    // b[j][κ], stored as rolling rows.
    let mut prev = vec![f64::NEG_INFINITY; k_cap + 1]; // j = 0: empty product at κ = 0
    prev[0] = 0.0;
    let mut best = vec![f64::NEG_INFINITY; k_cap + 1];
    for j in 1..=k_cap {
        let mut row = vec![f64::NEG_INFINITY; k_cap + 1];
        for kappa in j..=k_cap {
            let mut v = f64::NEG_INFINITY;
            for a in 1..=kappa - j + 1 {
                let cand = log_m[a] + prev[kappa - a];
                if cand > v {
                    v = cand;
                }
            }
            row[kappa] = v;
            let total = log_m[j] + v;
            if total > best[kappa] {
                best[kappa] = total;
            }
        }
        prev = row;
    }
    best[1..].to_vec()
}

/// `log m°_k` for a single `k`.
pub fn m_circle(log_m: &[f64], k: usize) -> f64 {
    m_circle_all(log_m, k)[k - 1]
}

// ---------------------------------------------------------------------------
// Regularity certificates
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegularityMode {
    /// `Γ̄_n(Ct) <= Γ̲_m(t)` together with `M_{j+1} <= C^{j+1} N_j`.
    R,
    /// `Γ̄_m(Ct) <= Γ̲_n(t)` together with `N_{j+1} <= C^j M_j`.
    B,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RegReport {
    pub ok: bool,
    /// Smallest power-of-two constant certifying both conditions.
    pub c: f64,
    /// Count of grid points where the Γ inequality failed at the best `C`.
    pub failures_at_best: usize,
}

/// Searches `C ∈ {2^0 … 2^20}` for the smallest constant making the
/// counting-function inequality hold on an auto-chosen `t`-grid, together
/// with the derivation-type pair inequality.
pub fn regularity(
    m: &WeightSequence,
    n: &WeightSequence,
    mode: RegularityMode,
) -> Result<RegReport> {
    let (gamma_src, gamma_dst) = match mode {
        RegularityMode::R => (m.assoc_m(), n.assoc_m()),
        RegularityMode::B => (n.assoc_m(), m.assoc_m()),
    };
    // Γ̲ runs over gamma_src; Γ̄ over gamma_dst at the scaled argument.
    let tgrid = gamma_src.gamma_grid(200);
    let k_max = m.k_max().min(n.k_max());

    let pair_ok = |c: f64| -> bool {
        let lc = c.ln();
        match mode {
            RegularityMode::R => (0..k_max).all(|j| {
                m.seq.logv[j + 1] <= (j + 1) as f64 * lc + n.seq.logv[j] + tol::LOG_SLACK
            }),
            RegularityMode::B => (0..k_max).all(|j| {
                n.seq.logv[j + 1] <= j as f64 * lc + m.seq.logv[j] + tol::LOG_SLACK
            }),
        }
    };

    let mut all_saturated = true;
    let mut best_failures = usize::MAX;
    for exp in 0..=20u32 {
        let c = (1u64 << exp) as f64;
        let mut failures = 0usize;
        let mut saturated = false;
        for &t in &tgrid {
            let upper = gamma_dst.h_eval(c * t);
            if upper.saturated {
                saturated = true;
                break;
            }
            let lower = gamma_src.gamma_lower(t);
            if upper.kstar > lower.k {
                failures += 1;
            }
        }
        if saturated {
            continue;
        }
        all_saturated = false;
        best_failures = best_failures.min(failures);
        if failures == 0 && pair_ok(c) {
            return Ok(RegReport { ok: true, c, failures_at_best: 0 });
        }
    }
    if all_saturated {
        return Err(Error::TruncationSaturated(gamma_dst.k_max()));
    }
    Ok(RegReport { ok: false, c: f64::INFINITY, failures_at_best: best_failures })
}

// ---------------------------------------------------------------------------
// Weight matrices
// ---------------------------------------------------------------------------

/// A totally ordered (pointwise, in the index) family of weight sequences.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WeightMatrix {
    /// `(x, M^x)` pairs sorted by the index `x`.
    pub entries: Vec<(f64, WeightSequence)>,
}

impl WeightMatrix {
    /// Validates the pointwise order `log M^x_k <= log M^y_k + tol` for
    /// `x <= y`.
    pub fn new(mut entries: Vec<(f64, WeightSequence)>) -> Result<Self> {
        entries.sort_by(|a, b| a.0.total_cmp(&b.0));
        for pair in entries.windows(2) {
            let (lo, hi) = (&pair[0].1, &pair[1].1);
            if lo.k_max() != hi.k_max() {
                return Err(Error::LengthMismatch(lo.k_max(), hi.k_max()));
            }
            for k in 0..=lo.k_max() {
                if lo.seq.logv[k] > hi.seq.logv[k] + tol::LOG_SLACK {
                    return Err(Error::AuditFailed(format!(
                        "matrix not pointwise ordered at x = {}, k = {}",
                        pair[1].0, k
                    )));
                }
            }
        }
        Ok(WeightMatrix { entries })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
