use std::f64::consts::PI;

use proptest::prelude::*;

use prclab::analysis::{classify, DEFAULT_TIE_TOL};
use prclab::metrics::{derivative, distance, horizontal_project, inner, optimal_shift, PhaseSignal, PrcSpace};
use prclab::models::{radial_clock_model, RadialClockParams};
use prclab::orbit::{find_orbit, OrbitOptions, Scheme};
use prclab::prc::{direct_prc, wrap_phase, DirectOptions, Stimulus};

const N: usize = 128;

/// Trigonometric polynomial of degree 6 from its coefficients.
fn signal(c: &[f64]) -> PhaseSignal {
    PhaseSignal::from_fn(N, |t| {
        c.chunks(2).enumerate().map(|(k, ab)| ab[0] * (k as f64 * t).cos() + ab[1] * ((k as f64) * t).sin()).sum()
    })
}

fn coefs() -> impl Strategy<Value = Vec<f64>> {
    // Keep the first harmonic away from zero so shift quotients are regular.
    (prop::collection::vec(-1.0..1.0_f64, 14), 0.3..1.0_f64).prop_map(|(mut c, a)| {
        c[2] = a;
        c
    })
}

fn space() -> impl Strategy<Value = PrcSpace> {
    prop::sample::select(PrcSpace::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn metric_axioms(a in coefs(), b in coefs(), c in coefs(), s in space()) {
        let (a, b, c) = (signal(&a), signal(&b), signal(&c));
        let ab = distance(s, &a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, distance(s, &b, &a).unwrap());
        prop_assert_eq!(distance(s, &a, &a).unwrap(), 0.0);
        let excess = distance(s, &a, &c).unwrap() - ab - distance(s, &b, &c).unwrap();
        prop_assert!(excess <= 1e-9, "triangle inequality violated by {excess:e}");
    }

    #[test]
    fn quotient_invariances(a in coefs(), b in coefs(), alpha in 0.1..10.0_f64, sigma in 0.0..2.0 * PI) {
        let (a, b) = (signal(&a), signal(&b));
        for s in PrcSpace::ALL {
            let d = distance(s, &a, &b).unwrap();
            if s.scale_invariant() {
                prop_assert!((distance(s, &a.scale(alpha), &b).unwrap() - d).abs() <= 1e-9);
            }
            if s.shift_invariant() {
                prop_assert!((distance(s, &a.shifted(sigma), &b).unwrap() - d).abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn grid_shift_recovered(a in coefs(), m in 0usize..N) {
        let q = signal(&a);
        let sigma = 2.0 * PI * m as f64 / N as f64;
        let r = optimal_shift(&q, &q.shifted(-sigma)).unwrap();
        let err = wrap_phase(r.sigma - sigma).abs();
        prop_assert!(err <= 1e-9 || r.multiple, "shift error {err:e}");
    }

    #[test]
    fn projections_are_horizontal(a in coefs(), e in coefs(), s in space()) {
        let (q, eta) = (signal(&a), signal(&e));
        let p = horizontal_project(s, &q, &eta).unwrap();
        let pp = horizontal_project(s, &q, &p).unwrap();
        let scale = 1.0 + inner(&eta, &eta).unwrap().sqrt();
        for (x, y) in p.values().iter().zip(pp.values()) {
            prop_assert!((x - y).abs() <= 1e-12 * scale);
        }
        if s.scale_invariant() {
            prop_assert!(inner(&p, &q).unwrap().abs() <= 1e-10 * scale);
        }
        if s.shift_invariant() {
            prop_assert!(inner(&p, &derivative(&q)).unwrap().abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn classification_ignores_scale_and_shift(a in coefs(), alpha in 0.1..10.0_f64, sigma in 0.0..2.0 * PI) {
        let q = signal(&a);
        let base = classify(&q, PrcSpace::D, DEFAULT_TIE_TOL).unwrap();
        let moved = classify(&q.shifted(sigma).scale(alpha), PrcSpace::D, DEFAULT_TIE_TOL).unwrap();
        prop_assert!((base.d_one - moved.d_one).abs() <= 1e-6);
        prop_assert!((base.d_two - moved.d_two).abs() <= 1e-6);
    }

    #[test]
    fn wrap_is_a_representative(x in -1e3..1e3_f64) {
        let w = wrap_phase(x);
        prop_assert!((-PI..PI).contains(&w));
        let k = (x - w) / (2.0 * PI);
        prop_assert!((k - k.round()).abs() <= 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// On the radial clock an impulse moves the state horizontally, and
    /// the new phase is its polar angle.
    #[test]
    fn radial_direct_prc_is_polar_angle(theta in 0.0..2.0 * PI, amp in -0.5..0.5_f64) {
        let m = radial_clock_model(RadialClockParams::default()).unwrap();
        let o = find_orbit(&m, &[1.0, 1.0, 1.0], &OrbitOptions { segments: 64, scheme: Scheme::MultipleShooting, ..Default::default() }).unwrap();
        let prc = direct_prc(&m, &o, &Stimulus::Impulse { amplitude: amp }, &[theta], &DirectOptions::default()).unwrap();
        let exact = wrap_phase(theta.sin().atan2(theta.cos() + amp) - theta);
        prop_assert!((prc.shifts[0] - exact).abs() <= 1e-6, "{} vs {exact}", prc.shifts[0]);
    }
}
