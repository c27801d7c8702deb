//! The division engine: recovers `f` from holomorphic approximations of
//! `g = f^j` and `h = f^{j+1}` through the quotient surrogate
//! `u_ε = φ_ε ḡ_ε h_ε / max(|g_ε|, r_ε)²` and a `∂̄` correction, measuring
//! every displayed bound along the way. Chain selection walks a weight
//! matrix; the quasianalytic driver builds witness chains by repeated `N'`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::approx::{self, SmoothFn1D, ThreeLinesInput};
use crate::cplane::{self, GridFn};
use crate::construct;
use crate::logdom;
use crate::seqcore::{RegularityMode, WeightMatrix, WeightSequence, moderate_growth, regularity};

use crate::{Error, Result};

/// Chain length prescribed for exponent `j`.
pub fn chain_len(j: usize) -> usize {
    ((j * (j + 1)) as f64).log2().ceil() as usize + 7
}

// ---------------------------------------------------------------------------
// Report types
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LevelRecord {
    /// Level of the quotient surrogate and its `∂̄` correction.
    pub eps_u: f64,
    /// Level of the assembled approximant `f_ε = u_{2ε} - v_{2ε}`.
    pub eps_f: f64,
    /// `δ_ε`: the measured shrink `‖h_ε^j - g_ε^{j+1}‖_{Ω_{ε/2}}` (the
    /// tightest valid upper bound the construction may use).
    pub log_delta: f64,
    pub delta: f64,
    /// The ε-uniform certified bound `c4 h_{m⁴}(Ce c2 ε)`, which must
    /// dominate the measured δ.
    pub delta_certified: f64,
    pub r: f64,
    /// `‖h_ε^j - g_ε^{j+1}‖` measured on `Ω_ε` and certified on `Ω_{ε/2}`.
    pub sup_d_omega: f64,
    pub three_lines_ok: bool,
    pub sup_u_half: f64,
    pub err_u_interval: Option<f64>,
    pub sup_v_half: f64,
    pub err_final: Option<f64>,
    pub bound_final: f64,
    /// `‖∂̄ f‖` over the eroded `Ω_{ε_f}` mask.
    pub dbar_flat: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DivisionVerdicts {
    /// `‖u_ε‖_{Ω_{ε/2}} <= (2K)^{1/j}` at every level.
    pub uep_ok: bool,
    /// δ nonincreasing along the dyadic shrink.
    pub delta_monotone: bool,
    /// Final errors nonincreasing (vacuous at the noise floor).
    pub err_monotone: bool,
    /// Log-log correlation of the final errors against `δ^{1/s}`; `NaN`
    /// when the curve is degenerate (all-zero data).
    pub correlation: f64,
    /// Worst relative deviation of `|g|^{j+1}` from `|h|^j` where visible.
    pub power_consistency: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RecoveredFn {
    pub xs: Vec<f64>,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
    /// Where the quotient floor `max(|g|, r)` was active; values there come
    /// from the surrogate, not from pointwise division.
    pub floor: Vec<bool>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DivisionReport {
    pub j: usize,
    pub k_len: usize,
    /// `s = 2^{k-6}`.
    pub s: f64,
    pub chain_labels: Vec<String>,
    /// `C >= mg(M^{(i)}, M^{(i+1)})` for the inner links.
    pub big_c: f64,
    pub k_bound: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
    pub c6: f64,
    pub c7: f64,
    pub levels: Vec<LevelRecord>,
    pub verdicts: DivisionVerdicts,
    pub recovered: Option<RecoveredFn>,
}

impl DivisionReport {
    /// CSV `(eps, delta, r, err_u, err_final, bound_final)`, one row per
    /// assembled level.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eps,delta,r,err_u,err_final,bound_final\n");
        for l in &self.levels {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                l.eps_f,
                l.delta,
                l.r,
                l.err_u_interval.unwrap_or(f64::NAN),
                l.err_final.unwrap_or(f64::NAN),
                l.bound_final
            ));
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// True when every measured inequality held.
    pub fn all_bounds_ok(&self) -> bool {
        self.verdicts.uep_ok
            && self.verdicts.delta_monotone
            && self.verdicts.err_monotone
            && self.levels.iter().all(|l| l.three_lines_ok)
    }
}

// ---------------------------------------------------------------------------
// Division pipeline
// ---------------------------------------------------------------------------

/// Runs the full division construction. `chain` must have the prescribed
/// length for `j`; its first three members drive the forward families, the
/// fourth hosts the shrink target, and the inner moderate-growth links pin
/// the constant `C`. `eps_list` are the `u`-levels; the assembled
/// approximants live at half those levels.
pub fn joris_divide(
    f_true: Option<&SmoothFn1D>,
    g: &SmoothFn1D,
    h: &SmoothFn1D,
    j: usize,
    chain: &[WeightSequence],
    eps_list: &[f64],
    hgrid: f64,
    dcap: usize,
) -> Result<DivisionReport> {
    assert!(j >= 1);
    let k_len = chain_len(j);
    if chain.len() != k_len {
        return Err(Error::AuditFailed(format!(
            "chain length {} but {} required for j = {j}",
            chain.len(),
            k_len
        )));
    }
    let s = 2f64.powi((k_len - 6) as i32);

    // Power-consistency precondition where the data is visible.
    let xs = logdom::linspace(-1.0, 1.0, 801);
    let mut worst_pow = 0.0f64;
    for &x in &xs {
        let gv = g.eval(x).abs();
        let hv = h.eval(x).abs();
        let a = gv.powi((j + 1) as i32);
        let b = hv.powi(j as i32);
        let scale = a.max(b);
        if scale > 1e-9 {
            worst_pow = worst_pow.max((a - b).abs() / scale);
        }
    }
    if worst_pow > 1e-6 {
        return Err(Error::InconsistentPowers(worst_pow));
    }

    // Forward families with shared constants.
    let fam_g = approx::holo_forward(g, "g", chain, eps_list, hgrid, dcap)?;
    let fam_h = approx::holo_forward(h, "h", chain, eps_list, hgrid, dcap)?;
    let geom = fam_g.geom;
    let k_bound = fam_g.k_bound.max(fam_h.k_bound).max(1.0);
    let c1 = fam_g.c1.max(fam_h.c1);
    let c2 = fam_g.c2.max(fam_h.c2);

    // Inner moderate-growth links.
    let mut big_c = 1.0f64;
    for i in 1..k_len - 1 {
        let mg = moderate_growth(&chain[i], &chain[i + 1]);
        if mg.divergent {
            return Err(Error::CertificateMissing(i + 1, i + 2, "moderate growth diverges".into()));
        }
        big_c = big_c.max(mg.mg);
    }

    let m3 = chain[2].assoc_m();
    let m4 = chain[3].assoc_m();

    // Pass 1: power differences D_ε = h_ε^j - g_ε^{j+1} and the uniform
    // constants c3, c4.
    let n_levels = fam_g.levels.len();
    let mut d_fields: Vec<Vec<Complex64>> = Vec::with_capacity(n_levels);
    let mut d_interval: Vec<Vec<Complex64>> = Vec::with_capacity(n_levels);
    let mut sup_d_omega = vec![0.0f64; n_levels];
    let mut log_c3 = f64::NEG_INFINITY;
    let mut l_d = 0.0f64;
    for (li, (lg, lh)) in fam_g.levels.iter().zip(&fam_h.levels).enumerate() {
        let eps = lg.eps;
        let mask = geom.ellipse_mask(eps);
        let mut field = vec![Complex64::default(); geom.len()];
        for i in 0..geom.len() {
            if lg.node_mask[i] {
                field[i] = lh.vals[i].powi(j as i32) - lg.vals[i].powi((j + 1) as i32);
            }
        }
        let sup = (0..geom.len())
            .filter(|&i| mask[i])
            .map(|i| field[i].norm())
            .fold(0.0, f64::max);
        let interval: Vec<Complex64> = lg
            .interval_vals
            .iter()
            .zip(&lh.interval_vals)
            .map(|(&gv, &hv)| hv.powi(j as i32) - gv.powi((j + 1) as i32))
            .collect();
        let sup_i = interval.iter().map(|v| v.norm()).fold(0.0, f64::max);
        if sup_i > 0.0 {
            log_c3 = log_c3.max(sup_i.ln() - m3.h_eval(c2 * eps).log_h);
        }
        sup_d_omega[li] = sup;
        l_d = l_d.max(sup);
        d_fields.push(field);
        d_interval.push(interval);
    }
    let c3 = if log_c3.is_finite() { log_c3.exp() } else { 0.0 };
    let c4 = c3.max(l_d);

    // Pass 2: per-level shrink, quotient surrogate, correction, assembly.
    let interval_xs = fam_g.interval_xs.clone();
    let f_true_interval: Option<Vec<f64>> =
        f_true.map(|f| interval_xs.iter().map(|&x| f.eval(x)).collect());

    let mut levels = Vec::new();
    let mut last_level_data: Option<(Vec<Complex64>, f64)> = None; // g on interval at finest level, r
    for (li, (lg, lh)) in fam_g.levels.iter().zip(&fam_h.levels).enumerate() {
        let eps = lg.eps;
        let log_certified = if c4 > 0.0 {
            c4.ln() + m4.h_eval(std::f64::consts::E * big_c * c2 * eps).log_h
        } else {
            f64::NEG_INFINITY
        };

        // Certified shrink of the power difference; its measured sup over
        // Ω_{ε/2} is the δ the construction runs with (the certificate must
        // dominate it).
        let (three, measured_shrink) = if c4 > 0.0 {
            let input = ThreeLinesInput {
                geom,
                vals: &d_fields[li],
                node_mask: &lg.node_mask,
                interval_vals: &d_interval[li],
                eps,
            };
            let rep = approx::three_lines_shrink(
                &input,
                l_d.max(1e-300),
                c3.max(1e-300),
                c2,
                &m3,
                &m4,
                big_c,
            )?;
            (rep.ok, rep.measured)
        } else {
            (true, 0.0)
        };
        let log_delta = if measured_shrink > 0.0 { measured_shrink.ln() } else { f64::NEG_INFINITY };
        if log_delta > 0.0 {
            // δ_ε > 1: the admissible range starts at smaller ε.
            continue;
        }
        let delta = log_delta.exp();
        let r = if log_delta.is_finite() { (log_delta / (j + 1) as f64).exp() } else { 0.0 };

        // Quotient surrogate, with the cutoff (relaxed resolution: the
        // pipeline only consumes it where it is identically one).
        let phi = cplane::cutoff_phi(eps, geom, false)?;
        let mask_half = geom.ellipse_mask(eps / 2.0);
        let mut u_nocut = vec![Complex64::default(); geom.len()];
        for i in 0..geom.len() {
            if lg.node_mask[i] {
                let gv = lg.vals[i];
                let hv = lh.vals[i];
                let denom = gv.norm().max(r);
                u_nocut[i] =
                    if denom > 0.0 { gv.conj() * hv / (denom * denom) } else { Complex64::default() };
            }
        }
        let sup_u_half = (0..geom.len())
            .filter(|&i| mask_half[i])
            .map(|i| (u_nocut[i] * phi.vals[i].re).norm())
            .fold(0.0, f64::max);

        let u_interval: Vec<Complex64> = lg
            .interval_vals
            .iter()
            .zip(&lh.interval_vals)
            .map(|(&gv, &hv)| {
                let denom = gv.norm().max(r);
                if denom > 0.0 { gv.conj() * hv / (denom * denom) } else { Complex64::default() }
            })
            .collect();
        let err_u_interval = f_true_interval.as_ref().map(|ft| {
            u_interval
                .iter()
                .zip(ft)
                .map(|(uv, &fv)| (uv - Complex64::new(fv, 0.0)).norm())
                .fold(0.0, f64::max)
        });

        // ∂̄u masked to Ω_{ε/2}; the cutoff is identically 1 there, so the
        // unscaled field carries the same derivative.
        let half_nodes: Vec<usize> = (0..geom.len()).filter(|&i| mask_half[i]).collect();
        let dbar_u = cplane::dbar_at(&u_nocut, &geom, &half_nodes);
        let mut w = GridFn::zeros(geom);
        for (slot, &i) in half_nodes.iter().enumerate() {
            w.vals[i] = dbar_u[slot];
        }
        let mut targets: Vec<Complex64> = half_nodes.iter().map(|&i| geom.z(i)).collect();
        targets.extend(interval_xs.iter().map(|&x| Complex64::new(x, 0.0)));
        let v = cplane::solve_dbar_at(&w, &half_nodes, &targets);
        let sup_v_half = v[..half_nodes.len()].iter().map(|c| c.norm()).fold(0.0, f64::max);

        // Assembled approximant at eps_f = eps/2.
        let mut f_vals = vec![Complex64::default(); geom.len()];
        for (slot, &i) in half_nodes.iter().enumerate() {
            f_vals[i] = u_nocut[i] * phi.vals[i].re - v[slot];
        }
        let f_interval: Vec<Complex64> = (0..interval_xs.len())
            .map(|q| u_interval[q] - v[half_nodes.len() + q])
            .collect();
        let err_final = f_true_interval.as_ref().map(|ft| {
            f_interval
                .iter()
                .zip(ft)
                .map(|(fv, &tv)| (fv - Complex64::new(tv, 0.0)).norm())
                .fold(0.0, f64::max)
        });

        // ∂̄-flatness of the assembled approximant, measured well inside
        // its domain of holomorphy (Cauchy third derivatives blow up like
        // dist^-3 within a few cells of the boundary).
        let deep = geom.erode(&geom.ellipse_mask(0.75 * eps / 2.0));
        let flat_nodes: Vec<usize> =
            (0..geom.len()).filter(|&i| deep[i] && mask_half[i]).collect();
        let dbar_flat = if flat_nodes.is_empty() {
            0.0
        } else {
            cplane::dbar_at(&f_vals, &geom, &flat_nodes)
                .iter()
                .map(|c| c.norm())
                .fold(0.0, f64::max)
        };

        if li == n_levels - 1 {
            last_level_data = Some((lg.interval_vals.clone(), r));
        }

        levels.push(LevelRecord {
            eps_u: eps,
            eps_f: eps / 2.0,
            log_delta,
            delta,
            delta_certified: log_certified.exp(),
            r,
            sup_d_omega: sup_d_omega[li],
            three_lines_ok: three,
            sup_u_half,
            err_u_interval,
            sup_v_half,
            err_final,
            bound_final: 0.0, // filled after c7
            dbar_flat,
        });
    }

    if levels.is_empty() {
        return Err(Error::AuditFailed("no admissible ε level (δ_ε > 1 throughout)".into()));
    }

    // Fitted constants.
    let over = |num: Option<f64>, den: f64| -> f64 {
        match num {
            Some(n) if n > 0.0 && den > 0.0 => n / den,
            _ => 0.0,
        }
    };
    let c5 = levels
        .iter()
        .map(|l| over(l.err_u_interval, l.r.powf(1.0 / j as f64)))
        .fold(0.0, f64::max);
    let c6 = levels
        .iter()
        .map(|l| over(Some(l.sup_v_half), l.delta.powf(1.0 / s)))
        .fold(0.0, f64::max);
    let c7 = levels
        .iter()
        .map(|l| over(l.err_final, l.delta.powf(1.0 / s)))
        .fold(0.0, f64::max);
    for l in &mut levels {
        l.bound_final = c7 * l.delta.powf(1.0 / s);
    }

    // Verdicts.
    let uep_bound = (2.0 * k_bound).powf(1.0 / j as f64);
    let uep_ok = levels.iter().all(|l| l.sup_u_half <= uep_bound * (1.0 + 1e-6));
    // Measured δ may carry grid wiggle; allow 5% against strict monotone.
    let delta_monotone = levels
        .windows(2)
        .all(|w| w[1].log_delta <= w[0].log_delta + 0.05);
    let err_monotone = levels.windows(2).all(|w| match (w[0].err_final, w[1].err_final) {
        (Some(a), Some(b)) => b <= a * (1.0 + 1e-6),
        _ => true,
    });
    // Log-log correlation on the decreasing segment of the error curve.
    // The segment ends where the per-level decay stops being material
    // (factor 0.7): past that the errors sit at the quadrature noise floor
    // and carry no information about δ.
    let correlation = {
        let pts: Vec<(f64, f64)> = levels
            .iter()
            .filter_map(|l| {
                l.err_final.and_then(|e| {
                    (e > 0.0 && l.log_delta.is_finite()).then_some((l.log_delta / s, e.ln()))
                })
            })
            .collect();
        let mut hi = 1usize;
        while hi < pts.len() && pts[hi].1 < pts[hi - 1].1 + (0.7f64).ln() {
            hi += 1;
        }
        if hi >= 3 {
            let xs: Vec<f64> = pts[..hi].iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pts[..hi].iter().map(|p| p.1).collect();
            logdom::correlation(&xs, &ys)
        } else {
            f64::NAN
        }
    };

    // Recovered function when the truth is absent: pointwise h/g above the
    // quotient floor of the finest level, the surrogate value below it.
    let recovered = if f_true.is_none() {
        let (g_int, r_last) = last_level_data.expect("at least one level");
        let h_int = &fam_h.levels.last().unwrap().interval_vals;
        let mut re = Vec::new();
        let mut im = Vec::new();
        let mut floor = Vec::new();
        for (q, _) in interval_xs.iter().enumerate() {
            let gv = g_int[q];
            if gv.norm() > r_last {
                let val = h_int[q] / gv;
                re.push(val.re);
                im.push(val.im);
                floor.push(false);
            } else {
                let denom = gv.norm().max(r_last);
                let val = if denom > 0.0 {
                    gv.conj() * h_int[q] / (denom * denom)
                } else {
                    Complex64::default()
                };
                re.push(val.re);
                im.push(val.im);
                floor.push(true);
            }
        }
        Some(RecoveredFn { xs: interval_xs.clone(), re, im, floor })
    } else {
        None
    };

    Ok(DivisionReport {
        j,
        k_len,
        s,
        chain_labels: chain.iter().map(|c| c.label().to_string()).collect(),
        big_c,
        k_bound,
        c1,
        c2,
        c3,
        c4,
        c5,
        c6,
        c7,
        levels,
        verdicts: DivisionVerdicts {
            uep_ok,
            delta_monotone,
            err_monotone,
            correlation,
            power_consistency: worst_pow,
        },
        recovered,
    })
}

// ---------------------------------------------------------------------------
// Chain selection
// ---------------------------------------------------------------------------

/// Extracts a certified chain of the prescribed length from a weight
/// matrix. R mode walks upward from `anchor`; B mode walks downward ending
/// at `anchor`. A singleton matrix repeats its member, which must then be
/// self-regular. Every adjacent link carries a moderate-growth certificate
/// and the head pair carries the counting-function link.
pub fn chain_select(
    mat: &WeightMatrix,
    j: usize,
    mode: RegularityMode,
    anchor: usize,
) -> Result<Vec<WeightSequence>> {
    let k = chain_len(j);
    let pick = |i: usize| -> Result<&WeightSequence> {
        mat.entries
            .get(i)
            .map(|e| &e.1)
            .ok_or_else(|| Error::CertificateMissing(i, i + 1, "matrix too short".into()))
    };
    let chain: Vec<WeightSequence> = if mat.len() == 1 {
        vec![mat.entries[0].1.clone(); k]
    } else {
        match mode {
            RegularityMode::R => (anchor..anchor + k).map(|i| pick(i).cloned()).collect::<Result<_>>()?,
            RegularityMode::B => {
                if anchor + 1 < k {
                    return Err(Error::CertificateMissing(0, anchor, "target too low for chain".into()));
                }
                (anchor + 1 - k..=anchor).map(|i| pick(i).cloned()).collect::<Result<_>>()?
            }
        }
    };

    // Head link: counting-function comparison (via the regularity search
    // when the pair is one sequence, via the dedicated search otherwise).
    if mat.len() == 1 {
        let rep = regularity(&chain[0], &chain[1], mode)?;
        if !rep.ok {
            return Err(Error::CertificateMissing(1, 2, "no regularity constant".into()));
        }
    } else {
        approx::countcomp_constant(&chain[0], &chain[1])?;
    }
    // Inner links: moderate growth must not diverge.
    for i in 1..k - 1 {
        if moderate_growth(&chain[i], &chain[i + 1]).divergent {
            return Err(Error::CertificateMissing(i + 1, i + 2, "moderate growth diverges".into()));
        }
    }
    Ok(chain)
}

// ---------------------------------------------------------------------------
// Quasianalytic driver
// ---------------------------------------------------------------------------

/// For each witness `N` (a non-quasianalytic log-convex majorant of the
/// quasianalytic `M`), builds the backward chain by repeated `N'` ending at
/// the witness and runs the division pipeline on it.
#[allow(clippy::too_many_arguments)]
pub fn quasi_driver(
    f_true: Option<&SmoothFn1D>,
    g: &SmoothFn1D,
    h: &SmoothFn1D,
    j: usize,
    m_qa: &WeightSequence,
    witnesses: &[WeightSequence],
    eps_list: &[f64],
    hgrid: f64,
    dcap: usize,
) -> Result<Vec<(String, DivisionReport)>> {
    let k = chain_len(j);
    let mut out = Vec::new();
    for witness in witnesses {
        if crate::seqcore::quasianalyticity(witness).quasianalytic {
            return Err(Error::AuditFailed(format!(
                "witness `{}` is quasianalytic",
                witness.label()
            )));
        }
        let mut chain = vec![witness.clone()];
        for _ in 1..k {
            let prev = chain.last().unwrap();
            chain.push(construct::nprime(prev, m_qa)?.nprime);
        }
        chain.reverse();
        let rep = joris_divide(f_true, g, h, j, &chain, eps_list, hgrid, dcap)?;
        out.push((witness.label().to_string(), rep));
    }
    Ok(out)
}
