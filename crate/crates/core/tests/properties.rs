//! Property tests for the structural invariants: counting-function order,
//! monotonicity and range of the decay function, relation antisymmetry,
//! truncation monotonicity of the moderate-growth sup, composition-bound
//! monotonicity, conjugate convexity, and solver linearity.

use carleman::cplane::{self, GridFn, GridGeom};
use carleman::logdom;
use carleman::seqcore::{self, AssocFns, Relation, WeightSequence};
use carleman::wfun;
use num_complex::Complex64;
use proptest::prelude::*;

/// Log-convex `m` from nonnegative ratio increments.
fn log_convex_m(len: usize) -> impl Strategy<Value = Vec<f64>> {
    (
        -3.0f64..1.0,
        prop::collection::vec(0.01f64..0.5, len - 1),
    )
        .prop_map(|(r0, incs)| {
            let mut ratio = r0;
            let mut out = vec![0.0f64];
            for inc in incs {
                ratio += inc;
                out.push(out.last().unwrap() + ratio);
            }
            out
        })
}

/// General positive `m` (no convexity).
fn general_m(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-8.0f64..8.0, len).prop_map(|mut v| {
        v[0] = 0.0;
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn counting_functions_coincide_for_log_convex_m(log_m in log_convex_m(96), t in 1e-6f64..1e2) {
        let a = AssocFns::from_log("p", log_m);
        let upper = a.h_eval(t);
        let lower = a.gamma_lower(t);
        if !upper.saturated && !lower.saturated {
            prop_assert_eq!(upper.kstar, lower.k);
        }
    }

    #[test]
    fn lower_counting_function_never_exceeds_upper(log_m in general_m(64), t in 1e-4f64..1e2) {
        let a = AssocFns::from_log("p", log_m);
        let upper = a.h_eval(t);
        let lower = a.gamma_lower(t);
        if !upper.saturated {
            prop_assert!(lower.k <= upper.kstar);
        }
    }

    #[test]
    fn h_is_monotone_bounded_and_saturates(log_m in log_convex_m(64), t0 in 1e-6f64..1e2) {
        let a = AssocFns::from_log("p", log_m);
        // Monotone along an increasing grid.
        let mut prev = f64::NEG_INFINITY;
        for i in 0..20 {
            let t = t0 * 1.5f64.powi(i);
            let h = a.h_eval(t).log_h;
            prop_assert!(h >= prev - 1e-12);
            prop_assert!(h <= 1e-12); // h <= 1
            prev = h;
        }
        // h = 1 from the threshold on.
        let thr = a.h_one_threshold();
        prop_assert_eq!(a.h_eval(thr * 1.0000001).log_h, 0.0);
        prop_assert!(a.h_eval(t0).log_h > f64::NEG_INFINITY || t0 == 0.0);
    }

    #[test]
    fn relation_is_antisymmetric_on_lhd(a in log_convex_m(64), b in log_convex_m(64)) {
        let lf = logdom::log_factorials(63);
        let mk = |m: &[f64], name: &str| {
            let logv: Vec<f64> = m.iter().zip(&lf).map(|(&x, &f)| x + f).collect();
            WeightSequence::new(name, logv).unwrap()
        };
        let wa = mk(&a, "a");
        let wb = mk(&b, "b");
        let fwd = seqcore::relation(&wa, &wb).unwrap().verdict;
        let bwd = seqcore::relation(&wb, &wa).unwrap().verdict;
        prop_assert!(!(fwd == Relation::Lhd && bwd == Relation::Lhd));
    }

    #[test]
    fn moderate_growth_sup_grows_with_truncation(m in log_convex_m(96)) {
        let lf = logdom::log_factorials(95);
        let logv: Vec<f64> = m.iter().zip(&lf).map(|(&x, &f)| x + f).collect();
        let full = WeightSequence::new("full", logv.clone()).unwrap();
        let half = WeightSequence::new("half", logv[..=47].to_vec()).unwrap();
        let mg_full = seqcore::moderate_growth(&full, &full);
        let mg_half = seqcore::moderate_growth(&half, &half);
        prop_assert!(mg_half.log_mg <= mg_full.log_mg + 1e-12);
    }

    #[test]
    fn composition_bound_is_monotone_in_m(
        m in prop::collection::vec(-2.0f64..2.0, 17),
        idx in 1usize..16,
        bump in 0.1f64..2.0,
    ) {
        let mut base = m;
        base[0] = 0.0;
        let all = seqcore::m_circle_all(&base, 16);
        let mut raised = base.clone();
        raised[idx] += bump;
        let all2 = seqcore::m_circle_all(&raised, 16);
        for (lo, hi) in all.iter().zip(&all2) {
            prop_assert!(hi >= lo);
        }
        // m ≡ 1 stays identically 1.
        let flat = seqcore::m_circle_all(&vec![0.0; 17], 16);
        for v in flat {
            prop_assert!(v.abs() < 1e-12);
        }
    }

    #[test]
    fn young_conjugate_is_convex_nondecreasing(
        slopes in prop::collection::vec(0.05f64..3.0, 64),
        s_max in 1.0f64..40.0,
    ) {
        // Convex φ from nonnegative increasing slopes.
        let n = slopes.len() + 1;
        let grid = logdom::logspace(1e-1, 1e5, n);
        let du = (1e5f64 / 1e-1).ln() / (n - 1) as f64;
        let mut sorted = slopes;
        sorted.sort_by(f64::total_cmp);
        let mut vals = vec![0.0f64];
        let mut acc = 0.0;
        for s in &sorted {
            acc += s * du;
            vals.push(acc);
        }
        let w = wfun::WeightFunction::from_samples("pw", grid, vals).unwrap();
        let sgrid: Vec<f64> = (0..16).map(|i| s_max * i as f64 / 15.0).collect();
        if let Ok(conj) = wfun::young_conjugate(&w, &sgrid) {
            prop_assert!(conj.convex.ok);
            prop_assert!(conj.nondecreasing.ok);
        }
        prop_assert!(wfun::biconjugate_max_error(&w) <= 1e-9);
    }

    #[test]
    fn cauchy_transform_is_linear(
        seed_a in 0.1f64..1.0,
        seed_b in -1.0f64..1.0,
        pow in 0u32..6,
    ) {
        let geom = GridGeom::centered(0.5, 0.5, 1.0 / 8.0);
        let w1 = GridFn::from_fn(geom, |z| {
            if z.norm() < 0.3 { Complex64::new(seed_a + z.re, z.im * seed_b) } else { Complex64::default() }
        });
        let w2 = GridFn::from_fn(geom, |z| {
            if z.norm() < 0.25 { Complex64::new(seed_b, z.re * z.im) } else { Complex64::default() }
        });
        // Powers of two scale exactly; the combination holds to rounding.
        let alpha = 2f64.powi(pow as i32);
        let combo = GridFn {
            geom,
            vals: w1.vals.iter().zip(&w2.vals).map(|(&a, &b)| alpha * a + b).collect(),
        };
        let support: Vec<usize> = (0..geom.len()).collect();
        let targets: Vec<Complex64> = (0..geom.len()).map(|i| geom.z(i)).collect();
        let v1 = cplane::solve_dbar_at(&w1, &support, &targets);
        let v2 = cplane::solve_dbar_at(&w2, &support, &targets);
        let vc = cplane::solve_dbar_at(&combo, &support, &targets);
        let scale = 1.0 + alpha;
        for i in 0..targets.len() {
            prop_assert!((vc[i] - (alpha * v1[i] + v2[i])).norm() <= 1e-12 * scale);
        }
    }

    #[test]
    fn cutoff_range_and_masks(eps in 0.1f64..0.8) {
        let geom = GridGeom::centered(1.3, 0.9, 1.0 / 64.0);
        let phi = cplane::cutoff_phi(eps, geom, false).unwrap();
        let inner = geom.ellipse_mask(eps / 2.0);
        let outer = geom.ellipse_mask(eps);
        for i in 0..geom.len() {
            let v = phi.vals[i].re;
            prop_assert!((0.0..=1.0).contains(&v));
            if inner[i] {
                prop_assert_eq!(v, 1.0);
            }
            if !outer[i] {
                prop_assert_eq!(v, 0.0);
            }
        }
    }
}
