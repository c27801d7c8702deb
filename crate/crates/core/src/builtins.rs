//! Named built-in objects addressable from the CLI and tests: weight
//! sequences (`factorial`, `gevrey:s`, `q:n`, `exp-k2`), weight functions
//! (`power:a`, `log2`, `t-over-log`), and smooth test functions
//! (`bump:gevrey2`, `linear`, `zero`, `analytic`, `poly:…`).

use crate::approx::SmoothFn1D;
use crate::construct::family_q;
use crate::logdom::log_factorials;
use crate::seqcore::WeightSequence;
use crate::wfun::WeightFunction;
use crate::{Error, Result};

/// Default sampling span and resolution for weight-function builtins. The
/// span reaches `10^12` so tail verdicts see several decades; the node
/// count keeps the conjugate grid fine enough for the closed-form
/// tolerances.
pub const WF_T_MIN: f64 = 1e-2;
pub const WF_T_MAX: f64 = 1e12;
pub const WF_POINTS: usize = 8192;

pub fn sequence(name: &str, k_max: usize) -> Result<WeightSequence> {
    if name == "factorial" {
        return WeightSequence::new("factorial", log_factorials(k_max));
    }
    if let Some(s) = name.strip_prefix("gevrey:") {
        let s: f64 = s.parse().map_err(|_| Error::Parse(format!("bad gevrey index `{s}`")))?;
        if !(s > 0.0) {
            return Err(Error::Parse(format!("gevrey index must be positive, got {s}")));
        }
        let lf = log_factorials(k_max);
        return WeightSequence::new(
            format!("gevrey:{s}"),
            lf.iter().map(|&v| s * v).collect(),
        );
    }
    if let Some(n) = name.strip_prefix("q:") {
        let n: usize = n.parse().map_err(|_| Error::Parse(format!("bad q index `{n}`")))?;
        return family_q(n, k_max);
    }
    if name == "exp-k2" {
        return WeightSequence::new("exp-k2", (0..=k_max).map(|k| (k * k) as f64).collect());
    }
    Err(Error::UnknownBuiltin(name.to_string()))
}

pub fn weight_function(name: &str) -> Result<WeightFunction> {
    weight_function_on(name, WF_T_MIN, WF_T_MAX, WF_POINTS)
}

pub fn weight_function_on(name: &str, t_min: f64, t_max: f64, n: usize) -> Result<WeightFunction> {
    if let Some(a) = name.strip_prefix("power:") {
        let a: f64 = a.parse().map_err(|_| Error::Parse(format!("bad power `{a}`")))?;
        if !(a > 0.0) {
            return Err(Error::Parse(format!("power must be positive, got {a}")));
        }
        return WeightFunction::from_fn(format!("power:{a}"), t_min, t_max, n, move |t| t.powf(a));
    }
    match name {
        "log2" => WeightFunction::from_fn("log2", t_min, t_max, n, |t| (1.0 + t).ln().powi(2)),
        "t-over-log" => WeightFunction::from_fn("t-over-log", t_min, t_max, n, |t| {
            t / (std::f64::consts::E + t).ln()
        }),
        _ => Err(Error::UnknownBuiltin(name.to_string())),
    }
}

pub fn smooth(name: &str) -> Result<SmoothFn1D> {
    if let Some(rest) = name.strip_prefix("poly:") {
        let coeffs: std::result::Result<Vec<f64>, _> =
            rest.split(',').map(str::parse::<f64>).collect();
        return Ok(SmoothFn1D::Poly(
            coeffs.map_err(|_| Error::Parse(format!("bad poly coefficients `{rest}`")))?,
        ));
    }
    match name {
        // Offset lacunary cosine sum 1 + Σ e^{-2^j} cos(4^j x): its k-th
        // derivative sup grows like 4^k (k!)², the Gevrey-2 scale, every
        // derivative is exact, and its values on [-1, 1] stay in
        // [1.09, 1.53] so integer powers remain invertible there.
        "bump:gevrey2" => {
            let mut terms = vec![(0i64, 1.0)];
            terms.extend((0..=9).map(|j| (4i64.pow(j), (-(2f64.powi(j as i32))).exp())));
            Ok(SmoothFn1D::TrigCos(terms))
        }
        "linear" => Ok(SmoothFn1D::Poly(vec![0.0, 1.0])),
        "zero" => Ok(SmoothFn1D::Poly(vec![])),
        // Analytic on a neighbourhood of [-1, 1], pole at 2.
        "analytic" => Ok(SmoothFn1D::Reciprocal { pole: 2.0 }),
        _ => Err(Error::UnknownBuiltin(name.to_string())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gevrey_one_is_factorial() {
        let a = sequence("factorial", 32).unwrap();
        let b = sequence("gevrey:1", 32).unwrap();
        for k in 0..=32 {
            assert_eq!(a.seq.logv[k], b.seq.logv[k]);
        }
    }

    #[test]
    fn unknown_names_rejected() {
        assert!(sequence("nope", 16).is_err());
        assert!(weight_function("nope").is_err());
        assert!(smooth("nope").is_err());
    }

    #[test]
    fn bump_stays_away_from_zero_on_interval() {
        let f = smooth("bump:gevrey2").unwrap();
        for i in 0..=400 {
            let x = -1.0 + i as f64 / 200.0;
            let v = f.eval(x);
            assert!(v > 1.0 && v < 1.6, "f({x}) = {v}");
        }
    }
}
