use platoon_core::threshold::{
    evaluate_policy, integral_term, merging_reward, solve_threshold, value_iteration, value_iteration_oracle,
    PolicyParams, ThresholdError,
};

// (lambda veh/hr, D2 m, theta, c) from an independent scipy prototype
// (quad with epsabs 1e-13, fsolve with xtol 1e-14).
const GRID: [(f64, f64, f64, f64); 9] = [
    (108.0, 2_000.0, 8.81537129, -4.91279023),
    (108.0, 10_000.0, 16.37375951, -15.13421853),
    (108.0, 30_000.0, 21.80889615, -39.80162735),
    (180.0, 2_000.0, 8.26875023, -6.04551005),
    (180.0, 10_000.0, 15.15677376, -17.5007706),
    (180.0, 30_000.0, 20.29945471, -37.76985876),
    (216.0, 2_000.0, 8.02965409, -6.45493982),
    (216.0, 10_000.0, 14.67855827, -17.84108738),
    (216.0, 30_000.0, 19.7437623, -36.34210812),
];

#[test]
fn grid_residuals_and_frozen_roots() {
    for (lam, d2, theta, c) in GRID {
        let p = PolicyParams::nominal(lam / 3600.0, d2);
        let s = solve_threshold(&p, 1e-10).unwrap_or_else(|e| panic!("{lam} {d2}: {e}"));
        assert!(s.max_residual() <= 1e-8, "{lam} {d2}: {:?}", s.residuals);
        assert!(s.c < s.theta && s.theta < p.d1 / p.v0);
        assert!((s.theta - theta).abs() < 1e-6, "{lam} {d2}: theta {}", s.theta);
        assert!((s.c - c).abs() < 1e-6, "{lam} {d2}: c {}", s.c);
        let g = merging_reward(s.theta, &p).unwrap().0;
        assert!((s.z - g / (1.0 - p.gamma)).abs() < 1e-9);
    }
}

#[test]
fn longer_cruise_raises_threshold() {
    for lam in [108.0, 180.0, 216.0] {
        let t = |d2| solve_threshold(&PolicyParams::nominal(lam / 3600.0, d2), 1e-10).unwrap().theta;
        assert!(t(30_000.0) > t(10_000.0) && t(10_000.0) > t(2_000.0));
    }
}

#[test]
fn quadrature_matches_trapezoid_reference() {
    let p = PolicyParams::nominal(108.0 / 3600.0, 30_000.0);
    let (theta, c) = (21.80889615, -39.80162735);
    let a = p.lambda * (1.0 - p.gamma);
    let f = |t: f64| {
        let (g, dg) = merging_reward(t, &p).unwrap();
        (-a * t).exp() * (dg - p.lambda * g)
    };
    let n = 1_000_000;
    let h = (theta - c) / n as f64;
    let mut sum = 0.5 * (f(c) + f(theta));
    for i in 1..n {
        sum += f(c + h * i as f64);
    }
    let trap = sum * h;
    assert!((integral_term(theta, c, &p) - trap).abs() < 1e-8);
}

#[test]
fn oracle_agrees_with_solver_at_nominal() {
    let p = PolicyParams::nominal(108.0 / 3600.0, 30_000.0);
    let dh = 0.05;
    let o = value_iteration_oracle(&p, dh).unwrap();
    let s = solve_threshold(&p, 1e-10).unwrap();
    assert!((o.theta - s.theta).abs() <= 2.0 * dh);
    assert!((o.c - s.c).abs() <= 2.0 * dh);
}

#[test]
fn oracle_value_non_increasing_in_merge_region() {
    let p = PolicyParams::nominal(108.0 / 3600.0, 30_000.0);
    let o = value_iteration_oracle(&p, 0.05).unwrap();
    for i in 1..o.h.len() {
        if o.h[i - 1] >= 0.0 && o.h[i] <= o.theta {
            assert!(o.value[i] <= o.value[i - 1] + 1e-12);
        }
    }
}

#[test]
fn rare_arrivals_raise_oracle_threshold() {
    let rare = value_iteration_oracle(&PolicyParams::nominal(1e-4, 30_000.0), 0.05).unwrap();
    let busy = value_iteration_oracle(&PolicyParams::nominal(0.05, 30_000.0), 0.05).unwrap();
    assert!(rare.theta > busy.theta, "{} vs {}", rare.theta, busy.theta);
}

#[test]
fn merge_region_classification_is_stable() {
    let (theta, c) = (10.0, -4.0);
    for i in 0..200 {
        let h = -5.0 + 0.075 * i as f64;
        if h <= theta {
            let u = evaluate_policy(theta, c, h);
            assert!(u <= theta);
            assert_eq!(evaluate_policy(theta, c, u), u);
        }
    }
}

#[test]
fn long_cruise_pins_c_to_slowest_action() {
    for (lambda, d2) in [(0.03, 117_000.0), (0.08, 60_000.0), (0.3, 500_000.0)] {
        let p = PolicyParams::nominal(lambda, d2);
        let s = solve_threshold(&p, 1e-9).unwrap();
        assert!(s.c_at_bound);
        assert_eq!(s.c, p.u_min());
        assert!(s.max_residual() <= 1e-9);
        let o = value_iteration_oracle(&p, 0.05).unwrap();
        assert!((s.theta - o.theta).abs() <= 0.1, "{} vs {}", s.theta, o.theta);
        assert_eq!(o.c, p.u_min());
    }
}

#[test]
fn minimising_roots_are_rejected() {
    // a root with c > 0 exists here but it is a minimum of the non-merge value
    let p = PolicyParams::nominal(13.86, 117_000.0);
    match solve_threshold(&p, 1e-9) {
        Ok(s) => panic!("accepted {s:?}"),
        Err(ThresholdError::SolverFailure { .. }) => {}
        Err(e) => panic!("unexpected {e:?}"),
    }
    let o = value_iteration(&p, 0.25).unwrap();
    assert!(o.c < 0.0);
    assert!(o.threshold_from(0.0).is_some());
}
