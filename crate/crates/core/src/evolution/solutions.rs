//! Semi-analytic evaluation of `q⁺`, `q⁻`, `q⁰` and of the semigroup
//! actions the operators need.
//!
//! For the stable subordinator `t/D_t` and `σ_{L_t−}/t` are both
//! Beta(α, 1−α), so with `H(τ, x) = P_τ u(x)`
//!
//! * `q⁺(x,t) = E H(t/V, x)`
//! * `q⁻(x,t) = E H(tV, x)`
//!
//! with `V ~ Beta(α, 1−α)`, and by the semigroup property
//! `P_s q⁺(·,τ)(x) = E H(s + τ/V, x)`. The uncoupled field is evaluated
//! in Fourier variables,
//! `q⁰(x,t) = ∫ S(x,ξ) E_α(−ξ²t^α/2) dξ`.

use crate::bernstein::{recip_gamma, MittagLeffler, StableExponent};
use crate::driver::TestFunction;
use crate::quad::{gauss_kronrod, tanh_sinh, Estimate, QuadOptions};
use crate::Result;

pub(crate) fn field_opts() -> QuadOptions {
    QuadOptions::with_tol(1e-14, 1e-12)
}

/// `E f(V, 1−V)` for `V ~ Beta(α, 1−α)`.
pub fn arcsine_expectation(
    alpha: StableExponent,
    opts: &QuadOptions,
    mut f: impl FnMut(f64, f64) -> f64,
) -> Estimate {
    let a = alpha.alpha();
    let c = alpha.arcsine_constant();
    tanh_sinh(
        |_, v, w| {
            let val = f(v, w);
            if val == 0.0 {
                0.0
            } else {
                c * v.powf(a - 1.0) * w.powf(-a) * val
            }
        },
        0.0,
        1.0,
        opts,
    )
}

/// Closed-form overshoot density
/// `f_{D_t}(s) = (sin πα/π) t^α / (s (s−t)^α)` for `s > t`.
pub fn overshoot_density(alpha: StableExponent, t: f64, s: f64) -> f64 {
    if s <= t {
        return 0.0;
    }
    let a = alpha.alpha();
    alpha.arcsine_constant() * (t / (s - t)).powf(a) / s
}

/// `P(D_t > s) = ∫_0^t u^φ(h) ν̄(s−h) dh`, by quadrature.
pub fn overshoot_survival(alpha: StableExponent, t: f64, s: f64) -> Estimate {
    if s <= t {
        return Estimate::exact(1.0);
    }
    let gap = s - t;
    tanh_sinh(
        |_, h, t_minus_h| alpha.potential_density(h) * alpha.levy_tail(gap + t_minus_h),
        0.0,
        t,
        &QuadOptions::with_tol(1e-15, 1e-13),
    )
}

/// `∫_0^t u^φ(h) ν(s−h) dh`, by quadrature (the convolution form of the
/// overshoot density).
pub fn overshoot_density_convolution(alpha: StableExponent, t: f64, s: f64) -> Estimate {
    if s <= t {
        return Estimate::exact(0.0);
    }
    let gap = s - t;
    tanh_sinh(
        |_, h, t_minus_h| alpha.potential_density(h) * alpha.levy_density(gap + t_minus_h),
        0.0,
        t,
        &QuadOptions::with_tol(1e-300, 1e-13),
    )
}

/// `q⁺(x,t) = E u(B_{D_t})` started at `x`.
pub struct OvershootSolution<'a, U: TestFunction + ?Sized> {
    pub alpha: StableExponent,
    pub u: &'a U,
    pub opts: QuadOptions,
}

impl<'a, U: TestFunction + ?Sized> OvershootSolution<'a, U> {
    pub fn new(alpha: StableExponent, u: &'a U) -> Self {
        Self {
            alpha,
            u,
            opts: field_opts(),
        }
    }

    pub fn value(&self, x: f64, t: f64) -> Estimate {
        if t <= 0.0 {
            return Estimate::exact(self.u.value(x));
        }
        arcsine_expectation(self.alpha, &self.opts, |v, _| self.u.heat(t / v, x))
    }

    /// `q⁺(x,t) − u(x)`.
    pub fn value_minus_initial(&self, x: f64, t: f64) -> Estimate {
        if t <= 0.0 {
            return Estimate::exact(0.0);
        }
        arcsine_expectation(self.alpha, &self.opts, |v, _| {
            self.u.heat_shift(0.0, t / v, x)
        })
    }

    /// `P_s q⁺(·,τ)(x) − q⁺(x, s+τ)`; the heat times differ by
    /// `−s(1−V)/V`.
    pub fn increment(&self, x: f64, s: f64, tau: f64) -> Estimate {
        let t = s + tau;
        arcsine_expectation(self.alpha, &self.opts, |v, w| {
            let (from, shift) = (t / v, s * w / v);
            if shift <= 0.5 * from {
                self.u.heat_shift(from, -shift, x)
            } else {
                // heat times far apart: the target s + τ/V directly
                self.u.heat(s + tau / v, x) - self.u.heat(from, x)
            }
        })
    }

    pub fn generator(&self, x: f64, t: f64) -> Estimate {
        if t <= 0.0 {
            return Estimate::exact(self.u.generator(x));
        }
        arcsine_expectation(self.alpha, &self.opts, |v, _| {
            self.u.heat_generator(t / v, x)
        })
    }

    /// `∂_t q⁺(x,t) = E[V^{−1} G P_{t/V} u(x)]`.
    pub fn time_derivative(&self, x: f64, t: f64) -> Estimate {
        arcsine_expectation(self.alpha, &self.opts, |v, _| {
            self.u.heat_generator(t / v, x) / v
        })
    }

    pub fn generator_bound(&self, t: f64) -> f64 {
        self.u.heat_generator_sup(t)
    }

    /// Upper bound for `sup_{τ ≥ t} ‖∂_τ q⁺(·,τ)‖`.
    pub fn time_derivative_bound(&self, t: f64) -> f64 {
        let e = arcsine_expectation(self.alpha, &self.opts, |v, _| {
            self.u.heat_generator_sup(t / v) / v
        });
        e.value + e.error
    }
}

/// `q⁻(x,t) = E u(B_{σ_{L_t−}})` started at `x`.
pub struct UndershootSolution<'a, U: TestFunction + ?Sized> {
    pub alpha: StableExponent,
    pub u: &'a U,
    pub opts: QuadOptions,
}

impl<'a, U: TestFunction + ?Sized> UndershootSolution<'a, U> {
    pub fn new(alpha: StableExponent, u: &'a U) -> Self {
        Self {
            alpha,
            u,
            opts: field_opts(),
        }
    }

    pub fn value(&self, x: f64, t: f64) -> Estimate {
        if t <= 0.0 {
            return Estimate::exact(self.u.value(x));
        }
        arcsine_expectation(self.alpha, &self.opts, |v, _| self.u.heat(t * v, x))
    }

    pub fn value_minus_initial(&self, x: f64, t: f64) -> Estimate {
        if t <= 0.0 {
            return Estimate::exact(0.0);
        }
        arcsine_expectation(self.alpha, &self.opts, |v, _| {
            self.u.heat_shift(0.0, t * v, x)
        })
    }

    /// `P_s q⁻(·,τ)(x) − q⁻(x, s+τ)`; the heat times differ by `s(1−V)`.
    pub fn increment(&self, x: f64, s: f64, tau: f64) -> Estimate {
        let t = s + tau;
        arcsine_expectation(self.alpha, &self.opts, |v, w| {
            self.u.heat_shift(t * v, s * w, x)
        })
    }

    pub fn generator(&self, x: f64, t: f64) -> Estimate {
        arcsine_expectation(self.alpha, &self.opts, |v, _| {
            self.u.heat_generator(t * v, x)
        })
    }

    pub fn generator_bound(&self, _t: f64) -> f64 {
        self.u.generator_sup()
    }

    /// `‖∂_τ q⁻‖ ≤ E[V ‖G P_{τV} u‖]`, non-increasing in `τ`.
    pub fn time_derivative_bound(&self, t: f64) -> f64 {
        let e = arcsine_expectation(self.alpha, &self.opts, |v, _| {
            v * self.u.heat_generator_sup(t * v)
        });
        e.value + e.error
    }
}

/// `q⁰(x,t) = E u(B_{L_t})` started at `x`, in Fourier variables.
pub struct UncoupledSolution<'a, U: TestFunction + ?Sized> {
    pub alpha: StableExponent,
    pub u: &'a U,
    pub ml: MittagLeffler,
    pub opts: QuadOptions,
}

impl<'a, U: TestFunction + ?Sized> UncoupledSolution<'a, U> {
    pub fn new(alpha: StableExponent, u: &'a U) -> Result<Self> {
        Ok(Self {
            alpha,
            u,
            ml: MittagLeffler::new(alpha.alpha())?,
            opts: field_opts(),
        })
    }

    fn spectral(&self, x: f64, g: impl Fn(f64) -> f64) -> Estimate {
        gauss_kronrod(
            |xi| {
                let s = self.u.spectral_profile(x, xi);
                if s == 0.0 {
                    0.0
                } else {
                    s * g(xi)
                }
            },
            0.0,
            self.u.spectral_cutoff(),
            &self.opts,
        )
    }

    /// The Fourier integral itself, also at `t = 0`.
    pub fn fourier_value(&self, x: f64, t: f64) -> Estimate {
        let ta = t.powf(self.alpha.alpha());
        self.spectral(x, |xi| self.ml.e(0.5 * xi * xi * ta))
    }

    pub fn value(&self, x: f64, t: f64) -> Estimate {
        if t <= 0.0 {
            return Estimate::exact(self.u.value(x));
        }
        self.fourier_value(x, t)
    }

    pub fn value_minus_initial(&self, x: f64, t: f64) -> Estimate {
        let ta = t.powf(self.alpha.alpha());
        self.spectral(x, |xi| self.ml.e_minus_one(0.5 * xi * xi * ta))
    }

    /// `q⁰(x, τ) − q⁰(x, τ+w)`.
    pub fn lag_increment(&self, x: f64, w: f64, tau: f64) -> Estimate {
        let a = self.alpha.alpha();
        let (ta, tb) = (tau.powf(a), (tau + w).powf(a));
        self.spectral(x, |xi| {
            let c = 0.5 * xi * xi;
            self.ml.e(c * ta) - self.ml.e(c * tb)
        })
    }

    pub fn generator(&self, x: f64, t: f64) -> Estimate {
        let ta = t.powf(self.alpha.alpha());
        self.spectral(x, |xi| {
            let c = 0.5 * xi * xi;
            -c * self.ml.e(c * ta)
        })
    }

    /// `∂_t q⁰ = −∫ S (ξ²/2) t^{α−1} E_{α,α}(−ξ²t^α/2) dξ`.
    pub fn time_derivative(&self, x: f64, t: f64) -> Estimate {
        let a = self.alpha.alpha();
        let ta = t.powf(a);
        let pre = t.powf(a - 1.0);
        self.spectral(x, |xi| {
            let c = 0.5 * xi * xi;
            -c * pre * self.ml.e_alpha_alpha(c * ta)
        })
    }

    /// `‖∂_τ q⁰‖ ≤ ∫|S| ξ²/2 dξ · τ^{α−1}/Γ(α)` for `τ ≥ t`, using
    /// `0 ≤ E_{α,α}(−y) ≤ 1/Γ(α)`.
    pub fn time_derivative_bound(&self, t: f64) -> f64 {
        let a = self.alpha.alpha();
        self.u.spectral_generator_mass() * t.powf(a - 1.0) * recip_gamma(a)
    }

    pub fn generator_bound(&self, _t: f64) -> f64 {
        self.u.spectral_generator_mass()
    }
}
