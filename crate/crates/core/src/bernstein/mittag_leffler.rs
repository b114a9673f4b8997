//! Mittag-Leffler functions on the non-positive real axis.
//!
//! Only `E_α(−x)` and `E_{α,α}(−x)` with `0 < α ≤ 1`, `x ≥ 0` are needed:
//! the first is the survival function of the Mittag-Leffler waiting time,
//! the second gives its density `e_α(s) = s^{α−1} E_{α,α}(−s^α)`.
//!
//! Evaluation is split on `T = x^{1/α}`:
//!
//! | region        | method                                                |
//! |---------------|-------------------------------------------------------|
//! | `T ≤ 3`       | power series (terms peak near `e^T`, so little loss)  |
//! | `3 < T < 40`  | spectral integral `∫ e^{−rT} K_α(r) dr`               |
//! | `T ≥ 40`      | asymptotic series, optimally truncated                |
//!
//! with the completely monotone spectral density
//! `K_α(r) = sin(απ)/π · r^{α−1} / (r^{2α} + 2 r^α cos(απ) + 1)`.
//! [`MittagLeffler`] caches piecewise Chebyshev interpolants of the middle
//! region so that hot loops do not pay for a quadrature per call.

use std::f64::consts::PI;

use super::gamma::{ln_gamma, recip_gamma};
use crate::quad::{semi_infinite, tanh_sinh, QuadOptions};
use crate::{Error, Result};

const SERIES_T: f64 = 3.0;
const ASYMPTOTIC_T: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Beta {
    One,
    Alpha,
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(
            "alpha",
            format!("{alpha} is outside (0, 1]"),
        ))
    }
}

fn check_argument(z: f64) -> Result<f64> {
    if z.is_nan() {
        return Err(Error::UnsupportedArgument("NaN argument".into()));
    }
    if z > 0.0 {
        return Err(Error::UnsupportedArgument(format!(
            "Mittag-Leffler evaluation is implemented for z <= 0, got {z}"
        )));
    }
    Ok(-z)
}

fn beta_value(alpha: f64, which: Beta) -> f64 {
    match which {
        Beta::One => 1.0,
        Beta::Alpha => alpha,
    }
}

fn series_coefficients(alpha: f64, which: Beta) -> Vec<f64> {
    let beta = beta_value(alpha, which);
    let x_max = SERIES_T.powf(alpha);
    let mut coeffs = Vec::new();
    let mut k = 0usize;
    loop {
        let c = recip_gamma(alpha * k as f64 + beta);
        coeffs.push(c);
        let mag = (k as f64) * x_max.ln() + c.abs().max(1e-300).ln();
        if (k > 8 && mag < -40.0) || k > 4000 {
            break;
        }
        k += 1;
    }
    coeffs
}

fn series_eval(coeffs: &[f64], x: f64) -> f64 {
    let z = -x;
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * z + c)
}

/// Terms of the asymptotic series as `(sin(π(β−αk))/π, ln Γ(1−β+αk))`,
/// using 1/Γ(β−αk) = sin(π(β−αk)) Γ(1−β+αk) / π to stay finite.
fn asymptotic_coefficients(alpha: f64, which: Beta) -> Vec<(f64, f64)> {
    let beta = beta_value(alpha, which);
    // the smallest term sits near k = T/α; keep a margin
    let k_max = (ASYMPTOTIC_T * 4.0 / alpha).ceil() as usize + 40;
    (1..=k_max)
        .map(|k| {
            let arg = beta - alpha * k as f64;
            let sin = if arg == arg.floor() {
                0.0
            } else {
                (PI * arg).sin() / PI
            };
            (sin, ln_gamma(1.0 - arg))
        })
        .collect()
}

/// Σ_{k≥1} (−1)^{k+1} x^{−k} / Γ(β − αk), truncated where the envelope
/// Γ(1−β+αk) x^{−k} is smallest (k ≈ x^{1/α}/α) or negligible.
fn asymptotic_eval(alpha: f64, coeffs: &[(f64, f64)], x: f64) -> f64 {
    let k_star = ((x.powf(1.0 / alpha) / alpha).ceil() as usize).clamp(1, coeffs.len());
    let ln_x = x.ln();
    let mut sum = 0.0;
    for (i, &(sin, ln_g)) in coeffs.iter().take(k_star).enumerate() {
        let envelope = (ln_g - (i + 1) as f64 * ln_x).exp();
        let term = sin * envelope;
        if i % 2 == 0 {
            sum += term;
        } else {
            sum -= term;
        }
        if i > 2 && envelope < 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// ∫_0^∞ r^m e^{−rT} K_α(r) dr, split at the near-pole r = 1.
fn spectral_integral(alpha: f64, t: f64, moment: i32) -> f64 {
    let s = (alpha * PI).sin();
    let two_cos_sq = 2.0 * (0.5 * alpha * PI).cos().powi(2); // 1 + cos(απ)
    let kernel = |ln_r: f64| -> f64 {
        // r^α + cos(απ) = (r^α − 1) + (1 + cos(απ))
        let shifted = (alpha * ln_r).exp_m1() + two_cos_sq;
        let den = shifted * shifted + s * s;
        s / PI * ((alpha - 1.0 + moment as f64) * ln_r).exp() / den
    };
    let opts = QuadOptions::with_tol(1e-17, 1e-14);
    let lower = tanh_sinh(
        |r, _, one_minus_r| {
            let ln_r = if r < 0.5 {
                r.ln()
            } else {
                (-one_minus_r).ln_1p()
            };
            (-r * t).exp() * kernel(ln_r)
        },
        0.0,
        1.0,
        &opts,
    );
    let upper = semi_infinite(
        |r, d| (-r * t).exp() * kernel(d.ln_1p()),
        1.0,
        1.0 / t.max(1.0),
        &opts,
    );
    lower.value + upper.value
}

fn spectral_eval(alpha: f64, which: Beta, t: f64) -> f64 {
    match which {
        Beta::One => spectral_integral(alpha, t, 0),
        Beta::Alpha => t.powf(1.0 - alpha) * spectral_integral(alpha, t, 1),
    }
}

fn direct(alpha: f64, which: Beta, x: f64) -> f64 {
    if alpha == 1.0 {
        return (-x).exp();
    }
    if x == 0.0 {
        return recip_gamma(beta_value(alpha, which));
    }
    let t = x.powf(1.0 / alpha);
    if t <= SERIES_T {
        series_eval(&series_coefficients(alpha, which), x)
    } else if t >= ASYMPTOTIC_T {
        asymptotic_eval(alpha, &asymptotic_coefficients(alpha, which), x)
    } else {
        spectral_eval(alpha, which, t)
    }
}

/// E_α(z) for `0 < α ≤ 1` and `z ≤ 0`; the value lies in (0, 1].
pub fn mittag_leffler(alpha: f64, z: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let x = check_argument(z)?;
    Ok(direct(alpha, Beta::One, x))
}

/// Two-parameter E_{α,α}(z) for `0 < α ≤ 1`, `z ≤ 0`.
pub fn mittag_leffler_alpha_alpha(alpha: f64, z: f64) -> Result<f64> {
    check_alpha(alpha)?;
    let x = check_argument(z)?;
    Ok(direct(alpha, Beta::Alpha, x))
}

/// Density of the Mittag-Leffler distribution, `e_α(s) = −d/ds E_α(−s^α)`.
pub fn ml_density(alpha: f64, s: f64) -> Result<f64> {
    check_alpha(alpha)?;
    if !(s > 0.0) {
        return Err(Error::invalid("s", format!("density needs s > 0, got {s}")));
    }
    Ok(density_from(alpha, s, |x| direct(alpha, Beta::Alpha, x)))
}

fn density_from(alpha: f64, s: f64, e_alpha_alpha: impl Fn(f64) -> f64) -> f64 {
    if alpha == 1.0 {
        return (-s).exp();
    }
    let t = s.powf(alpha);
    // s^{α−1} E_{α,α}(−s^α), clamped at the round-off floor
    (e_alpha_alpha(t) * t / s).max(0.0)
}

// ---------------------------------------------------------------------------

const PANELS: usize = 16;
const DEGREE: usize = 22;

#[derive(Debug, Clone)]
struct Chebyshev {
    lo: f64,
    width: f64,
    panels: Vec<Vec<f64>>,
}

impl Chebyshev {
    fn build(lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> Self {
        let width = (hi - lo) / PANELS as f64;
        let n = DEGREE + 1;
        let panels = (0..PANELS)
            .map(|p| {
                let a = lo + p as f64 * width;
                let values: Vec<f64> = (0..n)
                    .map(|j| {
                        let theta = PI * (j as f64 + 0.5) / n as f64;
                        f(a + 0.5 * width * (1.0 + theta.cos()))
                    })
                    .collect();
                (0..n)
                    .map(|k| {
                        let s: f64 = values
                            .iter()
                            .enumerate()
                            .map(|(j, v)| v * (PI * k as f64 * (j as f64 + 0.5) / n as f64).cos())
                            .sum();
                        let scale = if k == 0 { 1.0 } else { 2.0 };
                        scale * s / n as f64
                    })
                    .collect()
            })
            .collect();
        Self { lo, width, panels }
    }

    fn eval(&self, u: f64) -> f64 {
        let pos = ((u - self.lo) / self.width).max(0.0);
        let p = (pos as usize).min(PANELS - 1);
        let a = self.lo + p as f64 * self.width;
        let y = 2.0 * (u - a) / self.width - 1.0;
        let coeffs = &self.panels[p];
        // Clenshaw
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * y * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        y * b1 - b2 + coeffs[0]
    }
}

/// Per-α evaluator of `E_α(−x)`, `E_{α,α}(−x)` and the Mittag-Leffler
/// density, for repeated calls. Immutable once built and `Sync`.
#[derive(Debug, Clone)]
pub struct MittagLeffler {
    alpha: f64,
    series: [Vec<f64>; 2],
    asymptotic: [Vec<(f64, f64)>; 2],
    middle: Option<[Chebyshev; 2]>,
}

impl MittagLeffler {
    pub fn new(alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let middle = (alpha < 1.0).then(|| {
            let (lo, hi) = (SERIES_T.ln(), ASYMPTOTIC_T.ln());
            [
                Chebyshev::build(lo, hi, |u| spectral_eval(alpha, Beta::One, u.exp())),
                Chebyshev::build(lo, hi, |u| spectral_eval(alpha, Beta::Alpha, u.exp())),
            ]
        });
        Ok(Self {
            alpha,
            series: [
                series_coefficients(alpha, Beta::One),
                series_coefficients(alpha, Beta::Alpha),
            ],
            asymptotic: [
                asymptotic_coefficients(alpha, Beta::One),
                asymptotic_coefficients(alpha, Beta::Alpha),
            ],
            middle,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    fn eval(&self, idx: usize, x: f64) -> f64 {
        debug_assert!(x >= 0.0);
        if self.alpha == 1.0 {
            return (-x).exp();
        }
        if x == 0.0 {
            return self.series[idx][0];
        }
        let t = x.powf(1.0 / self.alpha);
        if t <= SERIES_T {
            series_eval(&self.series[idx], x)
        } else if t >= ASYMPTOTIC_T {
            asymptotic_eval(self.alpha, &self.asymptotic[idx], x)
        } else {
            let middle = self.middle.as_ref().expect("alpha < 1 has a middle table");
            middle[idx].eval(t.ln())
        }
    }

    /// E_α(−x) for x ≥ 0.
    pub fn e(&self, x: f64) -> f64 {
        self.eval(0, x)
    }

    /// E_α(−x) − 1, accurate for small x.
    pub fn e_minus_one(&self, x: f64) -> f64 {
        if self.alpha == 1.0 {
            return (-x).exp_m1();
        }
        if x.powf(1.0 / self.alpha) <= SERIES_T {
            -x * series_eval(&self.series[0][1..], x)
        } else {
            self.e(x) - 1.0
        }
    }

    /// E_{α,α}(−x) for x ≥ 0.
    pub fn e_alpha_alpha(&self, x: f64) -> f64 {
        self.eval(1, x)
    }

    /// Mittag-Leffler survival function P(W > s) = E_α(−s^α).
    pub fn survival(&self, s: f64) -> f64 {
        if s <= 0.0 {
            1.0
        } else {
            self.e(s.powf(self.alpha))
        }
    }

    pub fn density(&self, s: f64) -> f64 {
        density_from(self.alpha, s, |x| self.e_alpha_alpha(x))
    }
}
