use ctrw_harmonic::driver::{BumpMixture, GaussHermite};
use ctrw_harmonic::{GaussianBump, TestFunction};
use proptest::prelude::*;

fn grid() -> impl Iterator<Item = f64> {
    (0..=60).map(|k| -3.0 + 0.1 * k as f64)
}

#[test]
fn standard_bump_generator_spot_values() {
    let u = GaussianBump::standard();
    assert_eq!(u.gu(0.0), -0.5);
    assert!(u.gu(1.0).abs() < 1e-16);
    for x in grid() {
        let want = 0.5 * (x * x - 1.0) * (-0.5 * x * x).exp();
        assert!((u.gu(x) - want).abs() < 1e-15);
    }
}

#[test]
fn second_difference_converges_at_order_two() {
    let u = GaussianBump::new(0.3, 0.8, 1.7).unwrap();
    let x = 0.7;
    let err = |h: f64| (0.5 * (u.u(x + h) - 2.0 * u.u(x) + u.u(x - h)) / (h * h) - u.gu(x)).abs();
    let slope = (err(0.02) / err(0.01)).log2();
    assert!((slope - 2.0).abs() < 0.05, "slope {slope}");
}

#[test]
fn heat_action_closed_form_and_quadrature() {
    let u = GaussianBump::standard();
    assert!((u.heat_action(3.0, 0.0) - 0.5).abs() < 1e-15);
    for x in grid() {
        assert_eq!(u.heat_action(0.0, x), u.u(x));
        let s: f64 = 0.6;
        let want = (1.0 + s).powf(-0.5) * (-x * x / (2.0 * (1.0 + s))).exp();
        assert!((u.heat_action(s, x) - want).abs() < 1e-15);
    }
    let gh = GaussHermite::new(60).unwrap();
    let v = GaussianBump::new(-0.4, 1.2, 2.0).unwrap();
    assert!((gh.heat_action(|y| u.u(y), 3.0, 0.0) - 0.5).abs() < 1e-12);
    for &(s, x) in &[(3.0, 0.0), (0.5, 1.1), (2.0, -2.0)] {
        let q = gh.heat_action(|y| v.u(y), s, x);
        assert!(
            (q - v.heat_action(s, x)).abs() < 1e-12,
            "{q} vs {}",
            v.heat_action(s, x)
        );
    }
}

#[test]
fn semigroup_law_on_a_grid() {
    let u = GaussianBump::new(0.5, 0.7, 1.3).unwrap();
    for &(s, w) in &[(0.1, 0.2), (1.0, 3.0), (5.0, 0.01)] {
        let evolved = u.evolved(s);
        let dev = grid()
            .map(|x| (u.heat_action(s + w, x) - evolved.heat_action(w, x)).abs())
            .fold(0.0, f64::max);
        assert!(dev <= 1e-12);
    }
}

#[test]
fn kolmogorov_forward_equation() {
    let u = GaussianBump::standard();
    let h = 1e-4;
    for k in 0..=10 {
        let s = 0.1 + 0.49 * k as f64;
        for x in (0..=12).map(|j| -3.0 + 0.5 * j as f64) {
            let ds = (u.heat(s + h, x) - u.heat(s - h, x)) / (2.0 * h);
            let g = u.heat_generator(s, x);
            let scale = g.abs().max(1e-3 * u.heat_generator_sup(s));
            assert!((ds - g).abs() <= 1e-6 * scale, "s={s} x={x}: {ds} vs {g}");
        }
    }
}

#[test]
fn generator_commutes_with_the_semigroup() {
    let u = GaussianBump::new(0.2, 1.4, 0.9).unwrap();
    let gh = GaussHermite::new(80).unwrap();
    for &s in &[0.3, 1.0, 4.0] {
        for x in [-2.0, 0.0, 0.2, 1.5] {
            let pg = gh.heat_action(|y| u.gu(y), s, x);
            assert!((u.heat_generator(s, x) - pg).abs() < 1e-12);
        }
    }
}

#[test]
fn mixtures_are_linear() {
    let a = GaussianBump::new(-1.0, 0.5, 1.0).unwrap();
    let b = GaussianBump::new(1.0, 2.0, 0.5).unwrap();
    let m = BumpMixture::new(vec![(2.0, a), (-3.0, b)]).unwrap();
    for x in grid() {
        for s in [0.0, 0.7, 3.0] {
            let want = 2.0 * a.heat(s, x) - 3.0 * b.heat(s, x);
            assert!((m.heat(s, x) - want).abs() < 1e-14);
            let want = 2.0 * a.heat_generator(s, x) - 3.0 * b.heat_generator(s, x);
            assert!((m.heat_generator(s, x) - want).abs() < 1e-14);
        }
    }
    assert!(BumpMixture::new(vec![]).is_err());
}

#[test]
fn invalid_bumps_rejected() {
    assert!(GaussianBump::new(0.0, 0.0, 1.0).is_err());
    assert!(GaussianBump::new(0.0, 1.0, -1.0).is_err());
    assert!(GaussianBump::new(f64::NAN, 1.0, 1.0).is_err());
}

proptest! {
    #[test]
    fn contraction(center in -2.0f64..2.0, width in 0.1f64..3.0, amp in 0.1f64..5.0, s in 0.0f64..50.0, x in -6.0f64..6.0) {
        let u = GaussianBump::new(center, width, amp).unwrap();
        prop_assert!(u.heat(s, x).abs() <= u.heat_sup(s) * (1.0 + 1e-15));
        prop_assert!(u.heat_sup(s) <= u.sup_norm() * (1.0 + 1e-15));
        prop_assert!(u.heat_generator(s, x).abs() <= u.heat_generator_sup(s) * (1.0 + 1e-12));
    }

    #[test]
    fn heat_shift_matches_difference(s in 0.0f64..5.0, frac in -1.0f64..5.0, x in -4.0f64..4.0) {
        let u = GaussianBump::standard();
        let delta = if frac < 0.0 { frac * s } else { frac };
        let d = u.heat_shift(s, delta, x);
        let naive = u.heat(s + delta, x) - u.heat(s, x);
        prop_assert!((d - naive).abs() <= 1e-14, "{} vs {}", d, naive);
    }
}
