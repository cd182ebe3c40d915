use proptest::prelude::*;
use stobeam_core::beam::Interval;
use stobeam_core::weights::*;
use stobeam_core::Error;

fn beam() -> Interval {
    Interval::new(1.0, 2.0).unwrap()
}

#[test]
fn weight_examples() {
    let w = WeightField::new(1.0, 0.0, 1.0).unwrap();
    let p = eval_weight(&w, 1.0, 0.0);
    assert_eq!(p.l, 0.0);
    assert_eq!(p.theta, 1.0);
    let p = eval_weight(&w, 0.0, 2.0);
    assert!((p.l - 4.0).abs() < 1e-15);
    assert!((p.theta - 4f64.exp()).abs() < 1e-12);
    for (lam, horizon) in [(0.5, 1.0), (3.0, 2.5), (10.0, 0.3)] {
        let w = WeightField::new(lam, 0.0, horizon).unwrap();
        for x in [1.0, 1.7] {
            assert_eq!(eval_weight(&w, 0.0, x).l_t, 0.0);
            assert!(eval_weight(&w, horizon, x).l_t.abs() < 1e-14);
        }
    }
}

#[test]
fn closed_form_partials() {
    let (lam, x0, horizon) = (1.7, -0.4, 1.3);
    let w = WeightField::new(lam, x0, horizon).unwrap();
    let (t, x) = (0.37, 1.45);
    let p = eval_weight(&w, t, x);
    assert!((p.l_t - 2.0 * lam * t * (t - horizon) * (2.0 * t - horizon)).abs() < 1e-13);
    assert!((p.l_tt - 2.0 * lam * (6.0 * t * t - 6.0 * t * horizon + horizon * horizon)).abs() < 1e-13);
    assert!((p.l_x - 2.0 * lam * (x - x0)).abs() < 1e-13);
    assert_eq!(p.l_xx, 2.0 * lam);
    assert_eq!((p.l_xxx, p.l_xxxx), (0.0, 0.0));
    assert!(p.l >= lam * (1.0 - x0).powi(2) && p.theta >= 1.0);
}

#[test]
fn coefficient_examples() {
    let w = WeightField::new(1.0, 0.0, 1.0).unwrap();
    let c = coefficients(&w, 0.0, 1.0).unwrap();
    assert_eq!(c.identity.g, 12.0);
    assert_eq!(c.identity.d, -8.0);
    assert_eq!(c.identity.a, -22.0);
    let w2 = WeightField::new(2.0, 0.0, 1.0).unwrap();
    assert_eq!(coefficients(&w2, 0.4, 1.3).unwrap().derived.f1, 64.0);
}

/// Substitutes the partials into the multiplier definitions term by term.
fn a_oracle(lx: f64, lxx: f64, lt: f64, ltt: f64) -> f64 {
    let quartic = lx * lx * lx * lx;
    let mixed = -6.0 * lx * lx * lxx;
    let square = 3.0 * lxx * lxx;
    quartic + mixed + square + lt * lt - ltt
}

#[test]
fn a_matches_substitution_oracle() {
    // λ = 1, T = 1, t = 0, x = 1: l_x = 2, l_xx = 2, l_t = 0, l_tt = 2.
    assert_eq!(a_oracle(2.0, 2.0, 0.0, 2.0), -22.0);
    let w = WeightField::new(2.5, 0.0, 1.5).unwrap();
    let p = eval_weight(&w, 0.6, 1.2);
    let c = identity_coefficients(&w, 0.6, 1.2);
    assert!((c.a - a_oracle(p.l_x, p.l_xx, p.l_t, p.l_tt)).abs() < 1e-10 * c.a.abs());
}

#[test]
fn expanded_coefficients_need_centred_weight() {
    let w = WeightField::new(1.0, 0.5, 1.0).unwrap();
    assert!(matches!(coefficients(&w, 0.2, 1.0), Err(Error::Unsupported(_))));
    // The multiplier coefficients themselves are defined for any centre.
    assert!(identity_coefficients(&w, 0.2, 1.0).d < 0.0);
}

#[test]
fn cutoff_examples() {
    let horizon = 1.0;
    let eps = horizon / 8.0;
    let c = Cutoff::new(eps, horizon).unwrap();
    assert_eq!(eval_cutoff(&c, 0.5), (1.0, 0.0, 0.0));
    assert_eq!(eval_cutoff(&c, 0.0), (0.0, 0.0, 0.0));
    let (chi, d1, d2) = eval_cutoff(&c, 0.75 * eps);
    assert!((chi - 0.5).abs() < 1e-15);
    // s'(1/2) = 15/8 over a ramp of width ε/2.
    assert!((d1 - 3.75 / eps).abs() < 1e-10 / eps);
    assert!(d2.abs() < 1e-9 / (eps * eps));
    let (chi, d1, _) = eval_cutoff(&c, horizon - 0.75 * eps);
    assert!((chi - 0.5).abs() < 1e-15 && (d1 + 3.75 / eps).abs() < 1e-10 / eps);
    assert!(matches!(Cutoff::new(0.5, 1.0), Err(Error::Contract(_))));
    assert!(matches!(Cutoff::new(0.0, 1.0), Err(Error::Contract(_))));
}

#[test]
fn cutoff_support_and_range() {
    let c = Cutoff::new(0.2, 1.0).unwrap();
    for i in 0..=1000 {
        let t = i as f64 / 1000.0;
        let (chi, _, _) = c.eval(t);
        if t <= 0.1 + 1e-12 || t >= 0.9 - 1e-12 {
            assert_eq!(chi, 0.0, "t = {t}");
        } else if (0.2..=0.8).contains(&t) {
            assert_eq!(chi, 1.0, "t = {t}");
        } else {
            assert!(chi > 0.0 && chi < 1.0, "t = {t}");
        }
    }
}

#[test]
fn cutoff_bounds_scale_with_width() {
    let horizon = 1.0;
    let mut slopes = Vec::new();
    let mut curvatures = Vec::new();
    for eps in [horizon / 8.0, horizon / 16.0, horizon / 32.0] {
        let c = Cutoff::new(eps, horizon).unwrap();
        let (mut d1, mut d2) = (0.0f64, 0.0f64);
        for i in 0..=200_000 {
            let (_, a, b) = c.eval(horizon * i as f64 / 200_000.0);
            d1 = d1.max(a.abs());
            d2 = d2.max(b.abs());
        }
        assert!(d1 <= c.slope_bound() * (1.0 + 1e-12));
        assert!(d2 <= c.curvature_bound() * (1.0 + 1e-12));
        slopes.push(d1 * eps);
        curvatures.push(d2 * eps * eps);
    }
    for v in &slopes {
        assert!((v - CUTOFF_C1).abs() < 1e-6, "{v}");
    }
    for v in &curvatures {
        assert!((v - cutoff_c2()).abs() < 1e-3, "{v}");
    }
}

#[test]
fn audit_agrees_and_flags_printed_cubic_group() {
    let audit = coefficient_audit(1000, 11, beam(), 1.0, (0.5, 20.0), 1e-10).unwrap();
    assert_eq!(audit.points, 1000);
    assert!(audit.all_agree);
    for e in &audit.entries {
        assert!(e.agrees, "{} differs by {}", e.name, e.max_relative_difference);
    }
    let f3 = audit.printed.iter().find(|e| e.name.contains("F3")).unwrap();
    assert!(!f3.agrees);
    assert!(!audit.discrepancies().is_empty());
}

#[test]
fn printed_and_corrected_cubic_groups_differ_by_odd_term() {
    let w = WeightField::new(1.3, 0.0, 1.0).unwrap();
    let x = 1.4;
    let corrected = derived_coefficients(&w, 0.3, x).unwrap().f3;
    let lam3 = 1.3f64.powi(3);
    assert!((printed_f3(&w, x) - corrected - (192.0 * lam3 * x - 192.0 * lam3)).abs() < 1e-9 * corrected);
}

#[test]
fn lower_bounds_table() {
    let lambdas = [0.05, 0.1, 1.0, 4.0, 16.0, 64.0, 256.0];
    let table = coefficient_lower_bounds(&lambdas, beam(), 1.0, 41, 41).unwrap();
    for row in &table.rows {
        assert!((row.minima[4] - 32.0).abs() < 1e-12);
    }
    let last = table.rows.last().unwrap();
    assert!((last.minima[0] - 32.0).abs() < 1.0 / last.lambda);
    assert!((table.limiting_constants[0] - 32.0).abs() < 1e-3);
    let lambda0 = table.empirical_lambda0.unwrap();
    assert!(lambda0 > 0.1);
    assert!(table.rows.iter().filter(|r| r.lambda < lambda0).all(|r| !r.all_positive));
    assert!(table.rows.iter().filter(|r| r.lambda >= lambda0).all(|r| r.all_positive));
    assert!(coefficient_lower_bounds(&[], beam(), 1.0, 4, 4).is_err());
}

proptest! {
    #[test]
    fn partials_match_central_differences(
        lam in 0.1f64..5.0, x0 in -1.0f64..0.9, t in 0.05f64..0.95, u in 0.05f64..0.95
    ) {
        let horizon = 1.0;
        let w = WeightField::new(lam, x0, horizon).unwrap();
        let x = 1.0 + u;
        let p = eval_weight(&w, t, x);
        let h = 1e-4;
        let l = |t: f64, x: f64| w.l(t, x);
        let fd_t = (l(t + h, x) - l(t - h, x)) / (2.0 * h);
        let fd_x = (l(t, x + h) - l(t, x - h)) / (2.0 * h);
        let fd_tt = (l(t + h, x) - 2.0 * l(t, x) + l(t - h, x)) / (h * h);
        let fd_xx = (l(t, x + h) - 2.0 * l(t, x) + l(t, x - h)) / (h * h);
        let scale = lam * 10.0;
        prop_assert!((fd_t - p.l_t).abs() < 1e-6 * scale);
        prop_assert!((fd_x - p.l_x).abs() < 1e-6 * scale);
        prop_assert!((fd_tt - p.l_tt).abs() < 1e-3 * scale);
        prop_assert!((fd_xx - p.l_xx).abs() < 1e-3 * scale);
        let lt = |t: f64| eval_weight(&w, t, x).l_tt;
        prop_assert!(((lt(t + h) - lt(t - h)) / (2.0 * h) - p.l_ttt).abs() < 1e-6 * scale);
    }

    #[test]
    fn shifted_g_is_six_slope_squared(lam in 0.1f64..50.0, t in 0.0f64..1.0, x in 1.0f64..2.0) {
        let w = WeightField::new(lam, 0.0, 1.0).unwrap();
        let p = eval_weight(&w, t, x);
        let c = identity_coefficients(&w, t, x);
        let expect = 6.0 * p.l_x * p.l_x;
        prop_assert!((c.g_shift() - expect).abs() <= 1e-12 * expect);
        prop_assert!(c.d < 0.0);
        prop_assert_eq!(derived_coefficients(&w, t, x).unwrap().f1, 32.0 * lam);
    }
}
