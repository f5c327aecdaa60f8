use proptest::prelude::*;

use tscnn::tscalc::{circle_minus, decay_bound, delta_integral, exp_fn, exp_fn_with};
use tscnn::TimeScale;

const H: f64 = 0.05;

fn family(kind: u8) -> TimeScale {
    match kind {
        0 => TimeScale::Reals,
        1 => TimeScale::lattice(0.5, 0.25).unwrap(),
        _ => TimeScale::periodic_union(2.0, vec![(0.0, 1.0)]).unwrap(),
    }
}

/// A point of the scale from a cell index and a fraction.
fn point(ts: &TimeScale, k: i32, frac: f64) -> f64 {
    match ts {
        TimeScale::Reals => k as f64 + frac,
        TimeScale::Lattice { h, offset } => offset + h * k as f64,
        _ => 2.0 * k as f64 + frac,
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn exponential_identities(kind in 0u8..3, p in -0.6f64..1.5, ks in -8i32..8, kt in -8i32..8, fs in 0.0f64..=1.0, ft in 0.0f64..=1.0) {
        let ts = family(kind);
        let (s, t) = (point(&ts, ks, fs), point(&ts, kt, ft));
        let e = |t: f64, s: f64| exp_fn(&ts, |_| Ok(p), t, s, H).unwrap();
        let (mu_t, mu_s) = (ts.graininess(t).unwrap(), ts.graininess(s).unwrap());
        let (st, ss) = (ts.sigma(t).unwrap(), ts.sigma(s).unwrap());
        prop_assert!(rel(e(st, s), (1.0 + mu_t * p) * e(t, s)) < 1e-8);
        prop_assert!(rel(e(t, ss), e(t, s) / (1.0 + mu_s * p)) < 1e-8);
        let minus = |t: f64, s: f64| exp_fn_with(&ts, |_, mu| circle_minus(p, mu), t, s, H).unwrap();
        prop_assert!(rel(1.0 / e(t, s), minus(t, s)) < 1e-8);
        let q = circle_minus(p, mu_t).unwrap();
        let deriv = if mu_t > 0.0 {
            (minus(st, s) - minus(t, s)) / mu_t
        } else {
            let d = 1e-5;
            if ts.contains(t - d) {
                (minus(t + d, s) - minus(t - d, s)) / (2.0 * d)
            } else {
                (-3.0 * minus(t, s) + 4.0 * minus(t + d, s) - minus(t + 2.0 * d, s)) / (2.0 * d)
            }
        };
        prop_assert!(rel(deriv, q * minus(t, s)) < 1e-8, "{deriv} vs {}", q * minus(t, s));
    }

    #[test]
    fn decay_bound_dominates(kind in 0u8..3, a in 0.01f64..5.0, ks in -6i32..6, span in 0i32..10, fs in 0.0f64..=1.0, ft in 0.0f64..=1.0) {
        let ts = family(kind);
        let s = point(&ts, ks, fs);
        let t = point(&ts, ks + span, ft).max(s);
        let actual = exp_fn_with(&ts, |_, mu| circle_minus(a, mu), t, s, H).unwrap();
        prop_assert!(actual <= decay_bound(a, ts.mu_bar(), t, s) + 1e-12);
    }

    #[test]
    fn shift_invariance_of_the_integral(k in -3i32..3, j in 1i32..4, fa in 0.0f64..=1.0, fb in 0.0f64..=1.0, which in 0u8..3) {
        let ts = family(2);
        let tau = 2.0 * j as f64;
        let a = point(&ts, k, fa);
        let b = point(&ts, k + j, fb);
        let f = move |t: f64| match which { 0 => t.exp(), 1 => t * t, _ => t.sin() };
        let lhs = delta_integral(&ts.build_grid(a, b, 1e-3).unwrap(), |t| Ok(f(t + tau))).unwrap();
        let rhs = delta_integral(&ts.build_grid(a + tau, b + tau, 1e-3).unwrap(), |t| Ok(f(t))).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-8 * rhs.abs().max(1.0));
    }
}

#[test]
fn shifted_integral_closed_forms() {
    let ts = family(2);
    let g = ts.build_grid(0.0, 2.0, 1e-4).unwrap();
    let cases: [(fn(f64) -> f64, f64); 3] = [
        (f64::exp, 3f64.exp() - 2f64.exp() + 3f64.exp()),
        (|t| t * t, 19.0 / 3.0 + 9.0),
        (f64::sin, 2f64.cos() - 3f64.cos() + 3f64.sin()),
    ];
    for (f, exact) in cases {
        let v = delta_integral(&g, |t| Ok(f(t + 2.0))).unwrap();
        assert!(rel(v, exact) < 1e-8, "{v} vs {exact}");
    }
}

