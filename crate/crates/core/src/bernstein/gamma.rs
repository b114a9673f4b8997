//! Gamma and Beta functions on the real line.
//!
//! Lanczos approximation with g = 7 and nine coefficients. Relative error
//! is below 1e-13 on the positive axis (checked in the unit tests against
//! exact factorials and half-integer values); negative arguments go
//! through the reflection formula.

use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

fn lanczos_sum(x: f64) -> f64 {
    // x is the shifted argument (z - 1)
    let mut acc = LANCZOS_COEFFS[0];
    for (i, &c) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    acc
}

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 0.0 && x == x.floor()
}

/// Γ(x) for real `x`. Returns `NaN` at the poles (non-positive integers).
pub fn gamma(x: f64) -> f64 {
    if x.is_nan() || is_nonpositive_integer(x) {
        return f64::NAN;
    }
    if x < 0.5 {
        return PI / ((PI * x).sin() * gamma(1.0 - x));
    }
    if x > 171.7 {
        return f64::INFINITY;
    }
    if x == x.floor() && x <= 23.0 {
        // exact factorials
        let mut acc = 1.0;
        let mut k = 2.0;
        while k < x {
            acc *= k;
            k += 1.0;
        }
        return acc;
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    (2.0 * PI).sqrt() * t.powf(z + 0.5) * (-t).exp() * lanczos_sum(z)
}

/// ln Γ(x) for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x < 0.5 {
        // ln Γ(x) = ln π − ln sin(πx) − ln Γ(1 − x)
        return PI.ln() - (PI * x).sin().ln() - ln_gamma(1.0 - x);
    }
    let z = x - 1.0;
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + lanczos_sum(z).ln()
}

/// 1/Γ(x), an entire function: exactly zero at the poles of Γ.
pub fn recip_gamma(x: f64) -> f64 {
    if is_nonpositive_integer(x) {
        return 0.0;
    }
    if x > 171.0 {
        return (-ln_gamma(x)).exp();
    }
    if x < 0.5 {
        // 1/Γ(x) = sin(πx) Γ(1 − x) / π
        return (PI * x).sin() * gamma(1.0 - x) / PI;
    }
    1.0 / gamma(x)
}

/// B(a, b) = Γ(a)Γ(b)/Γ(a+b) for positive arguments.
pub fn beta(a: f64, b: f64) -> f64 {
    (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn factorials_and_half_integers() {
        assert_eq!(gamma(1.0), 1.0);
        assert_eq!(gamma(5.0), 24.0);
        assert!(rel(gamma(0.5), PI.sqrt()) < 1e-14);
        assert!(rel(gamma(1.5), 0.5 * PI.sqrt()) < 1e-14);
        assert!(rel(gamma(7.5), 1_871.254_305_797_788_7) < 1e-13);
        assert!(rel(gamma(-0.5), -2.0 * PI.sqrt()) < 1e-13);
        assert!(rel(gamma(30.3), (ln_gamma(30.3)).exp()) < 1e-12);
    }

    #[test]
    fn recurrence_holds_on_a_grid() {
        let mut x = 0.013;
        while x < 40.0 {
            let lhs = gamma(x + 1.0);
            let rhs = x * gamma(x);
            assert!(rel(lhs, rhs) < 1e-13, "x = {x}");
            x += 0.377;
        }
    }

    #[test]
    fn reciprocal_vanishes_at_poles() {
        for k in 0..6 {
            assert_eq!(recip_gamma(-(k as f64)), 0.0);
        }
        assert!(rel(recip_gamma(-0.3), 1.0 / gamma(-0.3)) < 1e-13);
    }

    #[test]
    fn beta_of_arcsine_pair() {
        // B(α, 1−α) = π / sin(πα)
        for &a in &[0.1, 0.3, 0.5, 0.77] {
            assert!(rel(beta(a, 1.0 - a), PI / (PI * a).sin()) < 1e-13);
        }
    }
}
