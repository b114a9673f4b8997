//! The space-time non-local operators and checks of harmonicity.
//!
//! For the stable subordinator with Lévy density `ν`,
//!
//! * `𝔄⁺q(x,t) = ∫ (P_s q(·,(t−s)∨0)(x) − q(x,t)) ν(ds)`
//! * `𝔄⁻q(x,t) = ∫ (P_s q(·,t−s)(x)𝟙_{s<t} + q(x,0)𝟙_{s≥t} − q(x,t)) ν(ds)`
//! * `𝔄q(x,t) = Gq(x,t) + ∫ (q(x,t−w)𝟙_{w<t} + q(x,0)𝟙_{w≥t} − q(x,t)) ν(dw)`
//!
//! The last one is `Gq − ∂^α_t q` with the Caputo derivative. Every value
//! is returned with an error bound made of the analytic bound on the cut
//! `(0, ε)`, the analytic bound on the cut `(T, ∞)` and the quadrature
//! error estimates.
//!
//! Integrals over `s ∈ (ε, t)` are taken in `y = ln(t/s)`; the lag `t − s`
//! is then `t(1 − e^{−y})`, computed without cancellation.

use std::io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bernstein::StableExponent;
use crate::driver::{Constant, TestFunction};
use crate::evolution::{Grids, OvershootSolution, UncoupledSolution, UndershootSolution};
use crate::quad::{self, Estimate, QuadOptions};
use crate::{Error, Result, TimeChange};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorModel {
    /// Analytic cut bounds plus quadrature error estimates.
    PaperBounds,
    /// As above, plus the change observed when `eps_cut` is halved and
    /// `tail_cut` doubled.
    Richardson,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureScheme {
    /// Inner cut, relative to `t`: the ν-integral starts at `eps_cut·t`.
    pub eps_cut: f64,
    /// Outer truncation point `T` of the `s ≥ t` branch (absolute; used as
    /// `max(T, t)`).
    pub tail_cut: f64,
    /// Approximate node cap per one-dimensional rule.
    pub node_budget: u32,
    pub error_model: ErrorModel,
}

impl Default for QuadratureScheme {
    fn default() -> Self {
        Self {
            eps_cut: 1e-20,
            tail_cut: 1e12,
            node_budget: 4096,
            error_model: ErrorModel::PaperBounds,
        }
    }
}

/// The kinetic lag integrand is a difference of two Fourier integrals, so
/// its rounding floor is about `1e−16·‖S‖`; cutting closer than this
/// relative to `t` only adds rounding.
const KINETIC_EPS_FLOOR: f64 = 1e-12;

impl QuadratureScheme {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_cut > 0.0 && self.eps_cut < 1.0) {
            return Err(Error::invalid(
                "eps_cut",
                format!("must be in (0,1), got {}", self.eps_cut),
            ));
        }
        if !(self.tail_cut > 0.0 && self.tail_cut.is_finite()) {
            return Err(Error::invalid(
                "tail_cut",
                format!("must be positive, got {}", self.tail_cut),
            ));
        }
        if self.node_budget < 64 {
            return Err(Error::invalid("node_budget", "must be at least 64"));
        }
        Ok(())
    }

    pub fn max_level(&self) -> usize {
        ((self.node_budget as f64 / 8.0).log2().floor() as usize).clamp(3, 12)
    }

    fn outer_opts(&self) -> QuadOptions {
        QuadOptions {
            abs_tol: 1e-11,
            rel_tol: 1e-10,
            max_level: self.max_level(),
        }
    }

    fn refined(&self) -> Self {
        Self {
            eps_cut: 0.5 * self.eps_cut,
            tail_cut: 2.0 * self.tail_cut,
            error_model: ErrorModel::PaperBounds,
            ..*self
        }
    }
}

/// Operator value with its error accounting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorValue {
    pub value: f64,
    pub bound: f64,
    pub components: BoundComponents,
    /// Whether every quadrature met its tolerance.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundComponents {
    pub inner_cut: f64,
    pub outer_cut: f64,
    pub quadrature: f64,
    pub richardson: f64,
}

impl BoundComponents {
    fn total(&self) -> f64 {
        self.inner_cut + self.outer_cut + self.quadrature + self.richardson
    }
}

impl OperatorValue {
    fn new(value: f64, components: BoundComponents, converged: bool) -> Self {
        Self {
            value,
            bound: components.total(),
            components,
            converged,
        }
    }

    pub fn within(&self, tol: f64) -> bool {
        self.value.abs() <= self.bound + tol
    }
}

/// What `𝔄⁺` and `𝔄⁻` need from a field `f(x,t)`.
pub trait CoupledField: Sync {
    fn initial(&self, x: f64) -> f64;

    fn value_minus_initial(&self, x: f64, t: f64) -> Estimate;

    /// `P_s f(·,τ)(x) − f(x, s+τ)`.
    fn increment(&self, x: f64, s: f64, tau: f64) -> Estimate;

    /// `P_s f(·,0)(x) − f(x,0)`.
    fn initial_heat_increment(&self, x: f64, s: f64) -> f64;

    /// Upper bound of `sup_x |P_s f(·,0) − initial_heat_limit()|`,
    /// non-increasing in `s`.
    fn initial_heat_sup(&self, s: f64) -> f64;

    /// `lim_{s→∞} P_s f(·,0)`.
    fn initial_heat_limit(&self) -> f64 {
        0.0
    }

    /// Upper bound of `‖G P_r f(·,τ)‖` over `r ≥ 0`, `τ ≥ t`.
    fn generator_bound(&self, t: f64) -> f64;

    /// Upper bound of `‖∂_τ f(·,τ)‖` over `τ ≥ t`.
    fn time_derivative_bound(&self, t: f64) -> f64;

    fn value(&self, x: f64, t: f64) -> Estimate {
        let d = self.value_minus_initial(x, t);
        Estimate {
            value: self.initial(x) + d.value,
            ..d
        }
    }
}

/// What the fractional-kinetic operator needs from a field `f(x,t)`.
pub trait KineticField: Sync {
    fn initial(&self, x: f64) -> f64;

    fn value_minus_initial(&self, x: f64, t: f64) -> Estimate;

    /// `G f(·,t)(x)`.
    fn generator(&self, x: f64, t: f64) -> Estimate;

    /// `f(x,τ) − f(x,τ+w)`.
    fn lag_increment(&self, x: f64, w: f64, tau: f64) -> Estimate;

    /// Upper bound of `‖∂_τ f(·,τ)‖` over `τ ≥ t`.
    fn time_derivative_bound(&self, t: f64) -> f64;

    /// `∂_t f(x,t)`, when available in closed form.
    fn time_derivative(&self, _x: f64, _t: f64) -> Option<Estimate> {
        None
    }

    /// Upper bound of `‖∂²_τ f(·,τ)‖` over `τ ≥ t`. Together with
    /// `time_derivative` this lets the inner cut be Taylor-corrected.
    fn second_time_derivative_bound(&self, _t: f64) -> Option<f64> {
        None
    }
}

impl<U: TestFunction + ?Sized> CoupledField for OvershootSolution<'_, U> {
    fn initial(&self, x: f64) -> f64 {
        self.u.value(x)
    }
    fn value_minus_initial(&self, x: f64, t: f64) -> Estimate {
        OvershootSolution::value_minus_initial(self, x, t)
    }
    fn increment(&self, x: f64, s: f64, tau: f64) -> Estimate {
        OvershootSolution::increment(self, x, s, tau)
    }
    fn initial_heat_increment(&self, x: f64, s: f64) -> f64 {
        self.u.heat_shift(0.0, s, x)
    }
    fn initial_heat_sup(&self, s: f64) -> f64 {
        self.u.heat_deviation_sup(s)
    }
    fn initial_heat_limit(&self) -> f64 {
        self.u.heat_limit()
    }
    fn generator_bound(&self, t: f64) -> f64 {
        OvershootSolution::generator_bound(self, t)
    }
    fn time_derivative_bound(&self, t: f64) -> f64 {
        OvershootSolution::time_derivative_bound(self, t)
    }
}

impl<U: TestFunction + ?Sized> CoupledField for UndershootSolution<'_, U> {
    fn initial(&self, x: f64) -> f64 {
        self.u.value(x)
    }
    fn value_minus_initial(&self, x: f64, t: f64) -> Estimate {
        UndershootSolution::value_minus_initial(self, x, t)
    }
    fn increment(&self, x: f64, s: f64, tau: f64) -> Estimate {
        UndershootSolution::increment(self, x, s, tau)
    }
    fn initial_heat_increment(&self, x: f64, s: f64) -> f64 {
        self.u.heat_shift(0.0, s, x)
    }
    fn initial_heat_sup(&self, s: f64) -> f64 {
        self.u.heat_deviation_sup(s)
    }
    fn initial_heat_limit(&self) -> f64 {
        self.u.heat_limit()
    }
    fn generator_bound(&self, t: f64) -> f64 {
        UndershootSolution::generator_bound(self, t)
    }
    fn time_derivative_bound(&self, t: f64) -> f64 {
        UndershootSolution::time_derivative_bound(self, t)
    }
}

impl<U: TestFunction + ?Sized> KineticField for UncoupledSolution<'_, U> {
    fn initial(&self, x: f64) -> f64 {
        self.u.value(x)
    }
    fn value_minus_initial(&self, x: f64, t: f64) -> Estimate {
        UncoupledSolution::value_minus_initial(self, x, t)
    }
    fn generator(&self, x: f64, t: f64) -> Estimate {
        UncoupledSolution::generator(self, x, t)
    }
    fn lag_increment(&self, x: f64, w: f64, tau: f64) -> Estimate {
        UncoupledSolution::lag_increment(self, x, w, tau)
    }
    fn time_derivative_bound(&self, t: f64) -> f64 {
        UncoupledSolution::time_derivative_bound(self, t)
    }
    fn time_derivative(&self, x: f64, t: f64) -> Option<Estimate> {
        Some(UncoupledSolution::time_derivative(self, x, t))
    }
    /// `τ ↦ E_α(−cτ^α)` is completely monotone, so `g = −∂_τ` of it is
    /// convex and `|g'(τ)| ≤ 2g(τ/2)/τ ≤ c 2^{2−α}τ^{α−2}/Γ(α)`.
    fn second_time_derivative_bound(&self, t: f64) -> Option<f64> {
        let a = self.alpha.alpha();
        Some(UncoupledSolution::time_derivative_bound(self, t) * 2f64.powf(2.0 - a) / t)
    }
}

/// Time factor `g` of a separable field `u(x)·g(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeProfile {
    /// `e^{−rate·t}`.
    Exponential { rate: f64 },
    /// `t e^{1−t}`, maximal at `t = 1` with value 1.
    Hump,
    /// `initial` at `t = 0`, `later` for `t > 0`.
    Step { initial: f64, later: f64 },
}

impl TimeProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Exponential { rate } => (-rate * t).exp(),
            TimeProfile::Hump => t * (1.0 - t).exp(),
            TimeProfile::Step { initial, later } => {
                if t > 0.0 {
                    later
                } else {
                    initial
                }
            }
        }
    }

    /// `g(τ) − g(τ+w)`.
    pub fn lag(&self, tau: f64, w: f64) -> f64 {
        match *self {
            TimeProfile::Exponential { rate } => -(-rate * tau).exp() * (-rate * w).exp_m1(),
            TimeProfile::Hump => self.eval(tau) - self.eval(tau + w),
            TimeProfile::Step { .. } => self.eval(tau) - self.eval(tau + w),
        }
    }

    /// `sup_{τ ≥ t} |g(τ)|`.
    pub fn sup_from(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Exponential { rate } => (-rate * t).exp(),
            TimeProfile::Hump => {
                if t <= 1.0 {
                    1.0
                } else {
                    self.eval(t)
                }
            }
            TimeProfile::Step { initial, later } => {
                if t > 0.0 {
                    later.abs()
                } else {
                    initial.abs().max(later.abs())
                }
            }
        }
    }

    /// `sup_{τ ≥ t} |g'(τ)|` (over `τ > 0` for the step).
    pub fn derivative_sup_from(&self, t: f64) -> f64 {
        match *self {
            TimeProfile::Exponential { rate } => rate.abs() * (-rate * t).exp(),
            TimeProfile::Hump => {
                // |g'| = |1−τ|e^{1−τ}: decreasing on [0,1], peak e^{−1} at 2
                let at = |s: f64| (1.0 - s).abs() * (1.0 - s).exp();
                if t <= 2.0 {
                    at(t).max((-1.0f64).exp())
                } else {
                    at(t)
                }
            }
            TimeProfile::Step { .. } => 0.0,
        }
    }

    /// `g'(t)` for `t > 0`.
    pub fn derivative(&self, t: f64) -> Option<f64> {
        if !(t > 0.0) {
            return None;
        }
        Some(match *self {
            TimeProfile::Exponential { rate } => -rate * (-rate * t).exp(),
            TimeProfile::Hump => (1.0 - t) * (1.0 - t).exp(),
            TimeProfile::Step { .. } => 0.0,
        })
    }

    /// `sup_{τ ≥ t} |g''(τ)|` for `t > 0`.
    pub fn second_derivative_sup_from(&self, t: f64) -> Option<f64> {
        if !(t > 0.0) {
            return None;
        }
        Some(match *self {
            TimeProfile::Exponential { rate } => rate * rate * (-rate * t).exp(),
            TimeProfile::Hump => {
                // |g''| = |τ−2|e^{1−τ}: decreasing on [0,2], peak e^{−2} at 3
                let at = |s: f64| (s - 2.0).abs() * (1.0 - s).exp();
                if t <= 3.0 {
                    at(t).max((-2.0f64).exp())
                } else {
                    at(t)
                }
            }
            TimeProfile::Step { .. } => 0.0,
        })
    }
}

/// `f(x,t) = u(x) g(t)`: negative controls, constants and maximum
/// principle probes.
pub struct SeparableField<'a> {
    pub space: &'a dyn TestFunction,
    pub time: TimeProfile,
}

impl<'a> SeparableField<'a> {
    pub fn new(space: &'a dyn TestFunction, time: TimeProfile) -> Self {
        Self { space, time }
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        self.space.value(x) * self.time.eval(t)
    }
}

impl CoupledField for SeparableField<'_> {
    fn initial(&self, x: f64) -> f64 {
        self.eval(x, 0.0)
    }
    fn value_minus_initial(&self, x: f64, t: f64) -> Estimate {
        Estimate::exact(-self.space.value(x) * self.time.lag(0.0, t))
    }
    fn increment(&self, x: f64, s: f64, tau: f64) -> Estimate {
        Estimate::exact(
            self.space.heat_shift(0.0, s, x) * self.time.eval(tau)
                + self.space.value(x) * self.time.lag(tau, s),
        )
    }
    fn initial_heat_increment(&self, x: f64, s: f64) -> f64 {
        self.space.heat_shift(0.0, s, x) * self.time.eval(0.0)
    }
    fn initial_heat_sup(&self, s: f64) -> f64 {
        self.space.heat_deviation_sup(s) * self.time.eval(0.0).abs()
    }
    fn initial_heat_limit(&self) -> f64 {
        self.space.heat_limit() * self.time.eval(0.0)
    }
    fn generator_bound(&self, t: f64) -> f64 {
        self.space.generator_sup() * self.time.sup_from(t)
    }
    fn time_derivative_bound(&self, t: f64) -> f64 {
        self.space.sup_norm() * self.time.derivative_sup_from(t)
    }
}

impl KineticField for SeparableField<'_> {
    fn initial(&self, x: f64) -> f64 {
        self.eval(x, 0.0)
    }
    fn value_minus_initial(&self, x: f64, t: f64) -> Estimate {
        Estimate::exact(-self.space.value(x) * self.time.lag(0.0, t))
    }
    fn generator(&self, x: f64, t: f64) -> Estimate {
        Estimate::exact(self.space.generator(x) * self.time.eval(t))
    }
    fn lag_increment(&self, x: f64, w: f64, tau: f64) -> Estimate {
        Estimate::exact(self.space.value(x) * self.time.lag(tau, w))
    }
    fn time_derivative_bound(&self, t: f64) -> f64 {
        self.space.sup_norm() * self.time.derivative_sup_from(t)
    }
    fn time_derivative(&self, x: f64, t: f64) -> Option<Estimate> {
        self.time
            .derivative(t)
            .map(|d| Estimate::exact(self.space.value(x) * d))
    }
    fn second_time_derivative_bound(&self, t: f64) -> Option<f64> {
        self.time
            .second_derivative_sup_from(t)
            .map(|b| self.space.sup_norm() * b)
    }
}

fn check_point(x: f64, t: f64, scheme: &QuadratureScheme) -> Result<()> {
    scheme.validate()?;
    if !x.is_finite() {
        return Err(Error::invalid("x", "must be finite"));
    }
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::invalid(
            "t",
            format!("operators need t > 0, got {t}"),
        ));
    }
    Ok(())
}

/// `∫_{εt}^{t} h(s, t−s) s ν(s) dy` with `s = t e^{−y}`; `h` returns an
/// estimate whose error is integrated alongside.
fn small_jump_integral(
    alpha: StableExponent,
    t: f64,
    eps_rel: f64,
    opts: &QuadOptions,
    h: impl Fn(f64, f64) -> Estimate,
) -> Estimate {
    quad::tanh_sinh_pair(
        |y, _, _| {
            let s = t * (-y).exp();
            let lag = -t * (-y).exp_m1();
            let e = h(s, lag);
            let w = s * alpha.levy_density(s);
            (w * e.value, w * e.error)
        },
        0.0,
        -eps_rel.ln(),
        opts,
    )
}

fn coupled_inner<F: CoupledField + ?Sized>(
    alpha: StableExponent,
    f: &F,
    x: f64,
    t: f64,
    scheme: &QuadratureScheme,
) -> (Estimate, f64) {
    let eps = scheme.eps_cut * t;
    let inner = small_jump_integral(alpha, t, scheme.eps_cut, &scheme.outer_opts(), |s, tau| {
        f.increment(x, s, tau)
    });
    let cut = (f.generator_bound(t - eps) + f.time_derivative_bound(t - eps))
        * alpha.small_jump_moment(eps);
    (inner, cut)
}

fn overshoot_once<F: CoupledField + ?Sized>(
    alpha: StableExponent,
    f: &F,
    x: f64,
    t: f64,
    scheme: &QuadratureScheme,
) -> OperatorValue {
    let (inner, inner_cut) = coupled_inner(alpha, f, x, t, scheme);
    // s ≥ t: ∫_t^T (P_s f₀ − f₀)ν − (f₀ − P_∞f₀)ν̄(T) − (f(t) − f₀)ν̄(t)
    // + ∫_T^∞ (P_s f₀ − P_∞f₀)ν, the last term left to the bound
    let big_t = scheme.tail_cut.max(t);
    let upper = quad::tanh_sinh(
        |y, _, _| {
            let s = t * y.exp();
            f.initial_heat_increment(x, s) * s * alpha.levy_density(s)
        },
        0.0,
        (big_t / t).ln(),
        &scheme.outer_opts(),
    );
    let f0 = f.initial(x);
    let jump = f.value_minus_initial(x, t);
    let value = inner.value + upper.value
        - (f0 - f.initial_heat_limit()) * alpha.levy_tail(big_t)
        - jump.value * alpha.levy_tail(t);
    let components = BoundComponents {
        inner_cut,
        outer_cut: f.initial_heat_sup(big_t) * alpha.levy_tail(big_t),
        quadrature: inner.error + upper.error + jump.error * alpha.levy_tail(t),
        richardson: 0.0,
    };
    OperatorValue::new(
        value,
        components,
        inner.converged && upper.converged && jump.converged,
    )
}

fn undershoot_once<F: CoupledField + ?Sized>(
    alpha: StableExponent,
    f: &F,
    x: f64,
    t: f64,
    scheme: &QuadratureScheme,
) -> OperatorValue {
    let (inner, inner_cut) = coupled_inner(alpha, f, x, t, scheme);
    // s ≥ t: (f₀ − f(t)) ν̄(t), no smoothing
    let jump = f.value_minus_initial(x, t);
    let value = inner.value - jump.value * alpha.levy_tail(t);
    let components = BoundComponents {
        inner_cut,
        outer_cut: 0.0,
        quadrature: inner.error + jump.error * alpha.levy_tail(t),
        richardson: 0.0,
    };
    OperatorValue::new(value, components, inner.converged && jump.converged)
}

fn kinetic_once<F: KineticField + ?Sized>(
    alpha: StableExponent,
    f: &F,
    x: f64,
    t: f64,
    scheme: &QuadratureScheme,
) -> OperatorValue {
    let eps_rel = scheme.eps_cut.max(KINETIC_EPS_FLOOR);
    let eps = eps_rel * t;
    let opts = scheme.outer_opts();
    let gen = f.generator(x, t);
    let inner = small_jump_integral(alpha, t, eps_rel, &opts, |w, tau| {
        f.lag_increment(x, w, tau)
    });
    let jump = f.value_minus_initial(x, t);
    let moment = alpha.small_jump_moment(eps);
    // on (0, ε) either bound |f(t−w) − f(t)| ≤ w‖∂f‖, or subtract the
    // first-order term −w∂_t f(t) and bound the rest by w²‖∂²f‖/2. The
    // second matters as α → 1, where most of the mass of wν sits near 0.
    let (taylor, inner_cut) = match (
        f.time_derivative(x, t),
        f.second_time_derivative_bound(t - eps),
    ) {
        (Some(d), Some(b2)) => {
            let a = alpha.alpha();
            let second_moment = moment * eps * (1.0 - a) / (2.0 - a);
            (
                Estimate {
                    value: -d.value * moment,
                    error: d.error * moment,
                    ..d
                },
                0.5 * b2 * second_moment,
            )
        }
        _ => (
            Estimate::exact(0.0),
            f.time_derivative_bound(t - eps) * moment,
        ),
    };
    let value = gen.value + inner.value + taylor.value - jump.value * alpha.levy_tail(t);
    let components = BoundComponents {
        inner_cut,
        outer_cut: 0.0,
        quadrature: gen.error + inner.error + taylor.error + jump.error * alpha.levy_tail(t),
        richardson: 0.0,
    };
    OperatorValue::new(
        value,
        components,
        gen.converged && inner.converged && taylor.converged && jump.converged,
    )
}

fn with_error_model(
    scheme: &QuadratureScheme,
    once: impl Fn(&QuadratureScheme) -> OperatorValue,
) -> OperatorValue {
    let base = once(scheme);
    match scheme.error_model {
        ErrorModel::PaperBounds => base,
        ErrorModel::Richardson => {
            let fine = once(&scheme.refined());
            let mut components = base.components;
            components.richardson = (fine.value - base.value).abs();
            OperatorValue::new(base.value, components, base.converged && fine.converged)
        }
    }
}

/// `𝔄⁺f(x,t)`.
pub fn apply_overshoot_operator<F: CoupledField + ?Sized>(
    alpha: StableExponent,
    f: &F,
    x: f64,
    t: f64,
    scheme: &QuadratureScheme,
) -> Result<OperatorValue> {
    check_point(x, t, scheme)?;
    Ok(with_error_model(scheme, |s| {
        overshoot_once(alpha, f, x, t, s)
    }))
}

/// `𝔄⁻f(x,t)`.
pub fn apply_undershoot_operator<F: CoupledField + ?Sized>(
    alpha: StableExponent,
    f: &F,
    x: f64,
    t: f64,
    scheme: &QuadratureScheme,
) -> Result<OperatorValue> {
    check_point(x, t, scheme)?;
    Ok(with_error_model(scheme, |s| {
        undershoot_once(alpha, f, x, t, s)
    }))
}

/// `(G − ∂^α_t) f(x,t)` with the Caputo derivative.
pub fn apply_uncoupled_operator<F: KineticField + ?Sized>(
    alpha: StableExponent,
    f: &F,
    x: f64,
    t: f64,
    scheme: &QuadratureScheme,
) -> Result<OperatorValue> {
    check_point(x, t, scheme)?;
    Ok(with_error_model(scheme, |s| {
        kinetic_once(alpha, f, x, t, s)
    }))
}

/// Per-cell operator values over a grid. `pass` is derived from the stored
/// residuals and bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub kind: TimeChange,
    pub alpha: StableExponent,
    pub tolerance: f64,
    pub x_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub residuals: Vec<Vec<f64>>,
    pub error_bounds: Vec<Vec<f64>>,
    /// Cells where some quadrature missed its tolerance.
    pub unconverged: usize,
}

impl ResidualReport {
    pub fn pass(&self, i: usize, j: usize) -> bool {
        let b = self.error_bounds[i][j];
        b.is_finite() && self.residuals[i][j].abs() <= b + self.tolerance
    }

    pub fn cells(&self) -> usize {
        self.t_grid.len() * self.x_grid.len()
    }

    pub fn passed(&self) -> usize {
        (0..self.t_grid.len())
            .map(|i| (0..self.x_grid.len()).filter(|&j| self.pass(i, j)).count())
            .sum()
    }

    pub fn pass_fraction(&self) -> f64 {
        self.passed() as f64 / self.cells() as f64
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.residuals
            .iter()
            .flatten()
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    }

    pub fn max_bound(&self) -> f64 {
        self.error_bounds
            .iter()
            .flatten()
            .fold(0.0, |m: f64, v| m.max(*v))
    }

    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["kind", "alpha", "x", "t", "residual", "bound", "pass"])?;
        let alpha = self.alpha.to_string();
        for (i, t) in self.t_grid.iter().enumerate() {
            for (j, x) in self.x_grid.iter().enumerate() {
                w.write_record([
                    self.kind.as_str(),
                    &alpha,
                    &x.to_string(),
                    &t.to_string(),
                    &self.residuals[i][j].to_string(),
                    &self.error_bounds[i][j].to_string(),
                    if self.pass(i, j) { "true" } else { "false" },
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// The field a residual scan is run on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanField {
    /// The candidate solution of the matching kind.
    Harmonic,
    /// `u(x)e^{−t}`, which is not harmonic for any of the operators.
    NegativeControl,
}

pub const NEGATIVE_CONTROL: TimeProfile = TimeProfile::Exponential { rate: 1.0 };

/// Residuals, bounds and the number of unconverged cells.
type Cells = (Vec<Vec<f64>>, Vec<Vec<f64>>, usize);

fn scan_cells(
    grids: &Grids,
    eval: impl Fn(f64, f64) -> Result<OperatorValue> + Sync,
) -> Result<Cells> {
    let nx = grids.x.len();
    let cells: Vec<Result<OperatorValue>> = (0..grids.t.len() * nx)
        .into_par_iter()
        .map(|k| eval(grids.x[k % nx], grids.t[k / nx]))
        .collect();
    let cells = cells.into_iter().collect::<Result<Vec<_>>>()?;
    let unconverged = cells.iter().filter(|c| !c.converged).count();
    let residuals = cells
        .chunks(nx)
        .map(|r| r.iter().map(|c| c.value).collect())
        .collect();
    let bounds = cells
        .chunks(nx)
        .map(|r| r.iter().map(|c| c.bound).collect())
        .collect();
    Ok((residuals, bounds, unconverged))
}

/// Applies the operator of `kind` over the grid (which must exclude
/// `t = 0`).
pub fn residual_scan<U: TestFunction>(
    kind: TimeChange,
    field: ScanField,
    alpha: StableExponent,
    u: &U,
    grids: &Grids,
    scheme: &QuadratureScheme,
    tolerance: f64,
) -> Result<ResidualReport> {
    grids.validate()?;
    scheme.validate()?;
    if grids.t[0] <= 0.0 {
        return Err(Error::invalid("t_grid", "residual scans need t > 0"));
    }
    if !(tolerance >= 0.0) {
        return Err(Error::invalid("tolerance", "must be >= 0"));
    }
    let control = SeparableField::new(u, NEGATIVE_CONTROL);
    let (residuals, error_bounds, unconverged) = match (kind, field) {
        (TimeChange::Overshoot, ScanField::Harmonic) => {
            let q = OvershootSolution::new(alpha, u);
            scan_cells(grids, |x, t| {
                apply_overshoot_operator(alpha, &q, x, t, scheme)
            })?
        }
        (TimeChange::Undershoot, ScanField::Harmonic) => {
            let q = UndershootSolution::new(alpha, u);
            scan_cells(grids, |x, t| {
                apply_undershoot_operator(alpha, &q, x, t, scheme)
            })?
        }
        (TimeChange::Uncoupled, ScanField::Harmonic) => {
            let q = UncoupledSolution::new(alpha, u)?;
            scan_cells(grids, |x, t| {
                apply_uncoupled_operator(alpha, &q, x, t, scheme)
            })?
        }
        (TimeChange::Overshoot, ScanField::NegativeControl) => scan_cells(grids, |x, t| {
            apply_overshoot_operator(alpha, &control, x, t, scheme)
        })?,
        (TimeChange::Undershoot, ScanField::NegativeControl) => scan_cells(grids, |x, t| {
            apply_undershoot_operator(alpha, &control, x, t, scheme)
        })?,
        (TimeChange::Uncoupled, ScanField::NegativeControl) => scan_cells(grids, |x, t| {
            apply_uncoupled_operator(alpha, &control, x, t, scheme)
        })?,
    };
    Ok(ResidualReport {
        kind,
        alpha,
        tolerance,
        x_grid: grids.x.clone(),
        t_grid: grids.t.clone(),
        residuals,
        error_bounds,
        unconverged,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplaceResidual {
    pub value: f64,
    pub bound: f64,
    pub horizon: f64,
}

impl LaplaceResidual {
    pub fn within_bound(&self) -> bool {
        self.value.abs() <= self.bound
    }
}

/// `∫_0^∞ e^{−λt} 𝔄⁺f(x,t) dt` for a coupled field, truncated at a horizon
/// where the remainder is below 1e−12.
pub fn laplace_residual_of<F: CoupledField + ?Sized>(
    alpha: StableExponent,
    f: &F,
    sup_norm: f64,
    x: f64,
    lambda: f64,
    scheme: &QuadratureScheme,
) -> Result<LaplaceResidual> {
    scheme.validate()?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(
            "lambda",
            format!("must be positive, got {lambda}"),
        ));
    }
    // |𝔄⁺f(·,t)| ≤ sup_{τ≥t−1}(‖G f‖ + ‖∂f‖)·∫_0^1 sν + 2‖f‖ν̄(1) for t ≥ 2
    let operator_sup = |t: f64| {
        (f.generator_bound(t - 1.0) + f.time_derivative_bound(t - 1.0))
            * alpha.small_jump_moment(1.0)
            + 2.0 * sup_norm * alpha.levy_tail(1.0)
    };
    let mut horizon = 2.0f64.max((operator_sup(2.0) / (lambda * 1e-12)).ln() / lambda);
    let truncation = operator_sup(horizon) * (-lambda * horizon).exp() / lambda;
    let opts = QuadOptions {
        abs_tol: 1e-10,
        rel_tol: 1e-8,
        max_level: scheme.max_level(),
    };
    let mut failed = None;
    let est = quad::tanh_sinh_pair(
        |t, _, _| {
            if t < 1e-250 {
                return (0.0, 0.0);
            }
            match apply_overshoot_operator(alpha, f, x, t, scheme) {
                Ok(v) => {
                    let d = (-lambda * t).exp();
                    (d * v.value, d * v.bound)
                }
                Err(e) => {
                    failed.get_or_insert(e);
                    (0.0, 0.0)
                }
            }
        },
        0.0,
        horizon,
        &opts,
    );
    if let Some(e) = failed {
        return Err(e);
    }
    if !horizon.is_finite() {
        horizon = f64::INFINITY;
    }
    Ok(LaplaceResidual {
        value: est.value,
        bound: est.error + truncation,
        horizon,
    })
}

/// Laplace transform in `t` of `𝔄⁺q⁺(x,t)`.
pub fn laplace_residual<U: TestFunction + ?Sized>(
    alpha: StableExponent,
    u: &U,
    x: f64,
    lambda: f64,
    scheme: &QuadratureScheme,
) -> Result<LaplaceResidual> {
    let q = OvershootSolution::new(alpha, u);
    laplace_residual_of(alpha, &q, u.sup_norm(), x, lambda, scheme)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdentityResidual {
    pub residual: f64,
    pub bound: f64,
}

/// `sup_x |∫_0^∞ e^{−λv} P_v(G−λ)u(x) dv + u(x)|` over `x_grid`.
pub fn resolvent_identity_residual<U: TestFunction + ?Sized>(
    u: &U,
    lambda: f64,
    x_grid: &[f64],
) -> Result<IdentityResidual> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(
            "lambda",
            format!("must be positive, got {lambda}"),
        ));
    }
    if x_grid.is_empty() {
        return Err(Error::invalid("x_grid", "must be non-empty"));
    }
    let opts = QuadOptions::with_tol(1e-15, 1e-13);
    let mut out = IdentityResidual {
        residual: 0.0,
        bound: 0.0,
    };
    for &x in x_grid {
        let e = quad::semi_infinite(
            |v, _| (-lambda * v).exp() * (u.heat_generator(v, x) - lambda * u.heat(v, x)),
            0.0,
            1.0 / lambda,
            &opts,
        );
        out.residual = out.residual.max((e.value + u.value(x)).abs());
        out.bound = out.bound.max(e.error);
    }
    Ok(out)
}

/// `𝔄⁺` applied to `f ≡ c` (including `t = 0`).
pub fn constant_residual(
    kind: TimeChange,
    alpha: StableExponent,
    c: f64,
    x: f64,
    t: f64,
    scheme: &QuadratureScheme,
) -> Result<OperatorValue> {
    let space = Constant(c);
    let f = SeparableField::new(
        &space,
        TimeProfile::Step {
            initial: 1.0,
            later: 1.0,
        },
    );
    match kind {
        TimeChange::Overshoot => apply_overshoot_operator(alpha, &f, x, t, scheme),
        TimeChange::Undershoot => apply_undershoot_operator(alpha, &f, x, t, scheme),
        TimeChange::Uncoupled => apply_uncoupled_operator(alpha, &f, x, t, scheme),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmpReport {
    pub x_star: f64,
    pub t_star: f64,
    pub value: f64,
    pub bound: f64,
    /// `f(x*,t*) − max_x f(x,0)` on the scan grid.
    pub gap: f64,
    pub levy_tail: f64,
}

impl PmpReport {
    /// `−gap·ν̄(t*) + bound`.
    pub fn threshold(&self) -> f64 {
        -self.gap * self.levy_tail + self.bound
    }

    pub fn pass(&self) -> bool {
        self.value <= self.threshold() && self.threshold() < 0.0
    }
}

/// `𝔄⁺f(x*,t*)` at a claimed interior maximum. The claim is checked on
/// `grids` first: `f(x*,t*)` must strictly exceed `f(·,0)` and dominate
/// `f` on `(0, t*]`.
pub fn pmp_probe<F: CoupledField + ?Sized>(
    f: &F,
    x_star: f64,
    t_star: f64,
    alpha: StableExponent,
    grids: &Grids,
    scheme: &QuadratureScheme,
) -> Result<PmpReport> {
    grids.validate()?;
    check_point(x_star, t_star, scheme)?;
    let peak = f.value(x_star, t_star).value;
    let initial_max = grids
        .x
        .iter()
        .map(|&x| f.initial(x))
        .fold(f64::NEG_INFINITY, f64::max);
    let gap = peak - initial_max;
    if !(gap > 0.0) {
        return Err(Error::Precondition(format!(
            "no strict gap: f(x*,t*) = {peak} but max f(x,0) = {initial_max}"
        )));
    }
    for &t in grids.t.iter().filter(|&&t| t > 0.0 && t <= t_star) {
        for &x in &grids.x {
            let v = f.value(x, t).value;
            if v > peak + 1e-12 * peak.abs().max(1.0) {
                return Err(Error::Precondition(format!(
                    "f({x}, {t}) = {v} exceeds f(x*,t*) = {peak}"
                )));
            }
        }
    }
    let op = apply_overshoot_operator(alpha, f, x_star, t_star, scheme)?;
    Ok(PmpReport {
        x_star,
        t_star,
        value: op.value,
        bound: op.bound,
        gap,
        levy_tail: alpha.levy_tail(t_star),
    })
}
