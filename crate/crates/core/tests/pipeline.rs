//! Cross-module pipelines: the inverse membership certificate, the
//! quasianalytic witness driver, and the derivative-bound comparison
//! against the interpolated weight.

use carleman::approx::{holo_forward, holo_inverse};
use carleman::builtins;
use carleman::construct;
use carleman::divide;
use carleman::seqcore::WeightSequence;
use carleman::wfun;

fn gevrey(s: f64, k: usize) -> WeightSequence {
    builtins::sequence(&format!("gevrey:{s}"), k).unwrap()
}

#[test]
fn inverse_certificate_round_trip_for_bump() {
    let f = builtins::smooth("bump:gevrey2").unwrap();
    let chain = vec![gevrey(2.0, 256); 3];
    let eps: Vec<f64> = (0..4).map(|i| 0.4 / 2f64.powi(i)).collect();
    let fam = holo_forward(&f, "bump", &chain, &eps, 1.0 / 64.0, 40).unwrap();
    // Forward consumes three chain positions; the certificate lands the
    // round trip in the further-widened class at the stated derivative
    // orders.
    let cert = holo_inverse(&fam, &f, &chain, 0.5, 30).unwrap();
    assert!(cert.ok, "worst slack {}", cert.worst_slack);
    assert!(cert.max_k_verified >= 30);
    assert!(cert.sigma.is_finite() && cert.sigma > 0.0);
}

#[test]
fn inverse_certificate_for_analytic_function() {
    let f = builtins::smooth("analytic").unwrap();
    let chain = vec![gevrey(2.0, 256); 3];
    let eps: Vec<f64> = (0..4).map(|i| 0.4 / 2f64.powi(i)).collect();
    let fam = holo_forward(&f, "analytic", &chain, &eps, 1.0 / 64.0, 40).unwrap();
    let b = 0.5;
    let cert = holo_inverse(&fam, &f, &chain, b, 30).unwrap();
    assert!(cert.ok, "worst slack {}", cert.worst_slack);
    // Cauchy-estimate oracle on circles around [-b, b]: the pole at 2
    // admits radius 2 - b, so sup |f^(k)| = k!/(2-b)^{k+1}; the
    // certificate must dominate it.
    let lf = carleman::logdom::log_factorials(30);
    for k in 0..=30usize {
        let oracle = lf[k] - (k + 1) as f64 * (2.0 - b).ln();
        let bound = cert.log_a + k as f64 * cert.sigma.ln() + chain[2].seq.logv[k];
        assert!(bound >= oracle - 1e-9, "k = {k}");
    }
}

#[test]
fn inverse_sigma_scales_linearly_with_c2() {
    let f = builtins::smooth("analytic").unwrap();
    let chain = vec![gevrey(2.0, 128); 3];
    let eps = [0.4, 0.2, 0.1];
    let fam = holo_forward(&f, "analytic", &chain, &eps, 1.0 / 32.0, 16).unwrap();
    let cert = holo_inverse(&fam, &f, &chain, 0.5, 10).unwrap();
    let mut rescaled = fam.clone();
    rescaled.c2 /= 10.0;
    let cert2 = holo_inverse(&rescaled, &f, &chain, 0.5, 10).unwrap();
    let ratio = cert.sigma / cert2.sigma;
    assert!((ratio - 10.0).abs() < 1e-9, "σ ratio {ratio}");
}

#[test]
fn quasi_driver_over_q1_witness() {
    let m = construct::family_q(1, 128).unwrap();
    let witness =
        construct::scale_to_majorant(&builtins::sequence("gevrey:2", 128).unwrap(), &m).unwrap();
    let f = builtins::smooth("bump:gevrey2").unwrap();
    let g = f.powi(1).unwrap();
    let h = f.powi(2).unwrap();
    let reports = divide::quasi_driver(
        Some(&f),
        &g,
        &h,
        1,
        &m,
        std::slice::from_ref(&witness),
        &[0.4, 0.2],
        1.0 / 32.0,
        24,
    )
    .unwrap();
    assert_eq!(reports.len(), 1);
    let (label, rep) = &reports[0];
    assert!(label.contains("gevrey"));
    assert_eq!(rep.k_len, 8);
    assert!(rep.verdicts.uep_ok);
    assert!(rep.levels.iter().all(|l| l.three_lines_ok));

    // Empty witness list: vacuous aggregate.
    let empty = divide::quasi_driver(Some(&f), &g, &h, 1, &m, &[], &[0.4], 1.0 / 32.0, 16).unwrap();
    assert!(empty.is_empty());
}

#[test]
fn derivative_bounds_against_interpolated_weight() {
    // End to end: L from the Gevrey-2 pair's derivatives, compared with the
    // conjugate of the interpolating weight built over √t.
    let f = builtins::smooth("bump:gevrey2").unwrap();
    let g = f.powi(2).unwrap();
    let h = f.powi(3).unwrap();
    let l = construct::derivative_bound_sequence(&g, &h, 32, 40).unwrap();
    let w = builtins::weight_function("power:0.5").unwrap();
    let target = builtins::weight_function("t-over-log").unwrap();
    let ot = wfun::omega_tilde(&w, &target, 8).unwrap();
    let rep = wfun::ell_compare(&l.logv, &ot.tilde).unwrap();
    assert!(rep.constant.is_finite());
    // The fitted constant makes the comparison hold at every index.
    for (k, &d) in rep.deficits.iter().enumerate() {
        assert!(d <= rep.constant + 1e-12, "k = {k}");
    }
}

#[test]
fn beurling_rescaling_shifts_the_bound_argument() {
    // Formula level: the certified shrink argument scales inversely with
    // the family constant.
    let m4 = gevrey(2.0, 256).assoc_m();
    let (c4, big_c, eps) = (0.4f64, 3.9f64, 0.1f64);
    let lambda = 8.0;
    let base = |c2: f64| c4.ln() + m4.h_eval(std::f64::consts::E * big_c * c2 * eps).log_h;
    let a = base(2.0);
    let b = base(2.0 / lambda);
    // Same value as shrinking ε by λ at fixed c2.
    let c = c4.ln() + m4.h_eval(std::f64::consts::E * big_c * 2.0 * (eps / lambda)).log_h;
    assert!((b - c).abs() < 1e-12);
    assert!(b <= a);
}

#[test]
fn reduction_report_serializes() {
    let l = builtins::sequence("factorial", 128).unwrap().seq;
    let m = gevrey(2.0, 128);
    let red = construct::reduce_l_to_m(&l, &m).unwrap();
    let js = serde_json::to_string(&red).unwrap();
    assert!(js.contains("\"audit\""));
    assert!(js.contains("\"nqthm\""));
    let csv = red.to_csv(&l.logv, m.log_caps());
    assert!(csv.starts_with("k,logL,logS,logM\n"));
    assert_eq!(csv.lines().count(), 130);
}
