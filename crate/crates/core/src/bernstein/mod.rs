//! Analytic profiles of subordinators.
//!
//! A subordinator is described by its Bernstein function
//! `φ(λ) = bλ + ∫(1 − e^{−λt}) ν(dt)`, equivalently
//! `φ(λ) = bλ + λ ∫ e^{−λt} ν̄(t) dt` with the tail `ν̄(t) = ν(t, ∞)`.
//! For a special Bernstein function the potential measure has a
//! non-increasing density `u^φ`.
//!
//! The α-stable subordinator ([`StableExponent`]) is available in closed
//! form. Other models ([`BernsteinModel::custom`]) supply a Lévy density
//! and optionally a potential density; tails and `φ` then come from
//! quadrature.

pub mod gamma;
pub mod mittag_leffler;

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::quad::{self, Estimate, QuadOptions};
use crate::{Error, Result};

pub use gamma::{beta, gamma, ln_gamma, recip_gamma};
pub use mittag_leffler::{mittag_leffler, mittag_leffler_alpha_alpha, ml_density, MittagLeffler};

/// Index α ∈ (0, 1) of a standard stable subordinator, `E e^{−λσ_1} = e^{−λ^α}`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(try_from = "f64", into = "f64")]
pub struct StableExponent(f64);

impl StableExponent {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Self(alpha))
        } else {
            Err(Error::invalid(
                "alpha",
                format!("stable index must lie in (0, 1), got {alpha}"),
            ))
        }
    }

    pub fn alpha(self) -> f64 {
        self.0
    }

    pub fn phi(self, lambda: f64) -> f64 {
        lambda.powf(self.0)
    }

    /// α s^{−1−α} / Γ(1−α)
    pub fn levy_density(self, s: f64) -> f64 {
        let a = self.0;
        a * s.powf(-1.0 - a) * recip_gamma(1.0 - a)
    }

    /// t^{−α} / Γ(1−α)
    pub fn levy_tail(self, t: f64) -> f64 {
        t.powf(-self.0) * recip_gamma(1.0 - self.0)
    }

    /// t^{α−1} / Γ(α)
    pub fn potential_density(self, t: f64) -> f64 {
        t.powf(self.0 - 1.0) * recip_gamma(self.0)
    }

    /// ∫_0^ε s ν(ds), the small-jump first moment.
    pub fn small_jump_moment(self, eps: f64) -> f64 {
        let a = self.0;
        a * eps.powf(1.0 - a) / ((1.0 - a) * gamma(1.0 - a))
    }

    /// sin(πα)/π, the normalising constant of the generalized arcsine law.
    pub fn arcsine_constant(self) -> f64 {
        (PI * self.0).sin() / PI
    }

    pub fn model(self) -> BernsteinModel {
        BernsteinModel {
            drift: 0.0,
            profile: Profile::Stable(self),
        }
    }
}

impl TryFrom<f64> for StableExponent {
    type Error = Error;
    fn try_from(value: f64) -> Result<Self> {
        Self::new(value)
    }
}

impl From<StableExponent> for f64 {
    fn from(a: StableExponent) -> f64 {
        a.0
    }
}

impl fmt::Display for StableExponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

pub type DensityFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Profile {
    Stable(StableExponent),
    Custom {
        levy_density: DensityFn,
        potential_density: Option<DensityFn>,
        infinite_activity: bool,
    },
}

/// A subordinator's analytic profile: drift `b`, Lévy density, tail,
/// and (for special Bernstein functions) the potential density.
#[derive(Clone)]
pub struct BernsteinModel {
    drift: f64,
    profile: Profile,
}

impl fmt::Debug for BernsteinModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.profile {
            Profile::Stable(a) => write!(f, "BernsteinModel::Stable(alpha = {a})"),
            Profile::Custom {
                potential_density,
                infinite_activity,
                ..
            } => f
                .debug_struct("BernsteinModel::Custom")
                .field("drift", &self.drift)
                .field("is_special", &potential_density.is_some())
                .field("infinite_activity", infinite_activity)
                .finish(),
        }
    }
}

fn tail_opts() -> QuadOptions {
    QuadOptions::with_tol(1e-15, 1e-12)
}

impl BernsteinModel {
    pub fn stable(alpha: f64) -> Result<Self> {
        Ok(StableExponent::new(alpha)?.model())
    }

    /// A model given by its Lévy density. Supplying a potential density
    /// declares the Bernstein function special; it is trusted as given.
    pub fn custom(
        drift: f64,
        levy_density: DensityFn,
        potential_density: Option<DensityFn>,
        infinite_activity: bool,
    ) -> Result<Self> {
        if !(drift >= 0.0) {
            return Err(Error::invalid(
                "drift",
                format!("must be >= 0, got {drift}"),
            ));
        }
        Ok(Self {
            drift,
            profile: Profile::Custom {
                levy_density,
                potential_density,
                infinite_activity,
            },
        })
    }

    pub fn drift(&self) -> f64 {
        self.drift
    }

    pub fn stable_exponent(&self) -> Option<StableExponent> {
        match self.profile {
            Profile::Stable(a) => Some(a),
            Profile::Custom { .. } => None,
        }
    }

    pub fn is_special(&self) -> bool {
        match &self.profile {
            Profile::Stable(_) => true,
            Profile::Custom {
                potential_density, ..
            } => potential_density.is_some(),
        }
    }

    pub fn infinite_activity(&self) -> bool {
        match &self.profile {
            Profile::Stable(_) => true,
            Profile::Custom {
                infinite_activity, ..
            } => *infinite_activity,
        }
    }

    /// Special, driftless and of infinite activity.
    pub fn satisfies_assumption_s(&self) -> bool {
        self.drift == 0.0 && self.infinite_activity() && self.is_special()
    }

    pub fn levy_density(&self, s: f64) -> f64 {
        match &self.profile {
            Profile::Stable(a) => a.levy_density(s),
            Profile::Custom { levy_density, .. } => levy_density(s),
        }
    }

    /// ν̄(t) = ν(t, ∞).
    pub fn levy_tail(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::invalid("t", format!("tail needs t > 0, got {t}")));
        }
        match &self.profile {
            Profile::Stable(a) => Ok(a.levy_tail(t)),
            Profile::Custom { levy_density, .. } => {
                // s = t e^y; below s = 1 the integrand s ν(s) may stay flat
                // over many decades, so that stretch gets a finite rule
                let integrand = |y: f64| {
                    let s = t * y.exp();
                    if s.is_finite() {
                        s * levy_density(s)
                    } else {
                        0.0
                    }
                };
                let opts = tail_opts();
                let mut total = 0.0;
                let mut from = t;
                if t < 1.0 {
                    let e = quad::tanh_sinh(|y, _, _| integrand(y), 0.0, -t.ln(), &opts);
                    total += require(e)?;
                    from = 1.0;
                }
                let e = quad::semi_infinite(
                    |y, _| {
                        let s = from * y.exp();
                        if s.is_finite() {
                            s * levy_density(s)
                        } else {
                            0.0
                        }
                    },
                    0.0,
                    1.0,
                    &opts,
                );
                Ok(total + require(e)?)
            }
        }
    }

    /// u^φ(t); only defined for special models.
    pub fn potential_density(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::invalid("t", format!("needs t > 0, got {t}")));
        }
        match &self.profile {
            Profile::Stable(a) => Ok(a.potential_density(t)),
            Profile::Custom {
                potential_density: Some(u),
                ..
            } => Ok(u(t)),
            Profile::Custom { .. } => Err(Error::Precondition(
                "potential density requested for a model that is not special".into(),
            )),
        }
    }

    /// φ(λ); closed form `λ^α` for the stable model.
    pub fn phi(&self, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        match self.profile {
            Profile::Stable(a) => Ok(a.phi(lambda)),
            Profile::Custom { .. } => self.phi_from_levy_measure(lambda),
        }
    }

    /// bλ + ∫(1 − e^{−λt}) ν(dt) by quadrature, for any model.
    pub fn phi_from_levy_measure(&self, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        if lambda == 0.0 {
            return Ok(0.0);
        }
        let opts = tail_opts();
        // (1 − e^{−λs})ν(s) ≤ λ sν(s) is integrable at 0; nodes so close to
        // 0 that the density overflows carry no mass
        let near = quad::tanh_sinh(
            |_, s, _| {
                let v = -(-lambda * s).exp_m1() * self.levy_density(s);
                if v.is_finite() {
                    v
                } else {
                    0.0
                }
            },
            0.0,
            1.0,
            &opts,
        );
        let far = quad::semi_infinite(
            |s, _| -(-lambda * s).exp_m1() * self.levy_density(s),
            1.0,
            1.0,
            &opts,
        );
        Ok(self.drift * lambda + require(near)? + require(far)?)
    }

    /// bλ + λ∫ e^{−λt} ν̄(t) dt by quadrature.
    pub fn phi_from_tail(&self, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        if lambda == 0.0 {
            return Ok(0.0);
        }
        let mut failure = None;
        // ∫_0^δ ν̄ → 0, so nodes below 1e−100 where a user density
        // overflows are dropped rather than reported
        let e = quad::semi_infinite(
            |t, _| match self.levy_tail(t) {
                Ok(v) if v.is_finite() => (-lambda * t).exp() * v,
                Ok(_) | Err(Error::Quadrature { .. }) if t < 1e-100 => 0.0,
                Ok(v) => v,
                Err(err) => {
                    failure.get_or_insert(err);
                    f64::NAN
                }
            },
            0.0,
            1.0 / lambda,
            &tail_opts(),
        );
        if let Some(err) = failure {
            return Err(err);
        }
        Ok(self.drift * lambda + lambda * require(e)?)
    }

    /// ∫_0^t u^φ(t−h) ν̄(h) dh − 1, which vanishes for driftless special
    /// models (the law of the undershoot integrates to one).
    pub fn renewal_identity_residual(&self, t: f64) -> Result<Estimate> {
        if !(t > 0.0) {
            return Err(Error::invalid("t", format!("needs t > 0, got {t}")));
        }
        if !self.satisfies_assumption_s() {
            return Err(Error::Precondition(
                "renewal identity needs a driftless, special, infinite-activity model".into(),
            ));
        }
        let opts = QuadOptions::with_tol(1e-15, 1e-13);
        let mut failure = None;
        let mut e = quad::tanh_sinh(
            |_, h, t_minus_h| {
                let tail = match self.levy_tail(h) {
                    Ok(v) => v,
                    Err(err) => {
                        failure.get_or_insert(err);
                        return f64::NAN;
                    }
                };
                let pot = self.potential_density(t_minus_h).unwrap_or(f64::NAN);
                pot * tail
            },
            0.0,
            t,
            &opts,
        );
        if let Some(err) = failure {
            return Err(err);
        }
        if !e.converged {
            return Err(Error::Quadrature {
                value: e.value - 1.0,
                error: e.error,
            });
        }
        e.value -= 1.0;
        Ok(e)
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda >= 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            "lambda",
            format!("Laplace variable must be >= 0, got {lambda}"),
        ))
    }
}

pub(crate) fn require(e: Estimate) -> Result<f64> {
    if e.converged {
        Ok(e.value)
    } else {
        Err(Error::Quadrature {
            value: e.value,
            error: e.error,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stable_closed_forms() {
        let a = StableExponent::new(0.5).unwrap();
        assert!((a.phi(4.0) - 2.0).abs() < 1e-15);
        assert!((a.levy_tail(1.0) - 0.564_189_583_547_756_3).abs() < 1e-14);
        assert!((a.levy_tail(4.0) - 0.282_094_791_773_878_1).abs() < 1e-14);
        assert!((a.potential_density(1.0) - 0.564_189_583_547_756_3).abs() < 1e-14);
        assert!((a.potential_density(0.25) - std::f64::consts::FRAC_2_SQRT_PI).abs() < 1e-14);
        assert!((StableExponent::new(0.7).unwrap().phi(1.5) - 1.328_20).abs() < 5e-6);
    }

    #[test]
    fn invalid_inputs_are_rejected() {
        assert!(StableExponent::new(1.0).is_err());
        assert!(StableExponent::new(0.0).is_err());
        let m = BernsteinModel::stable(0.5).unwrap();
        assert!(m.phi(-1.0).is_err());
        assert!(m.levy_tail(0.0).is_err());
        assert!(m.levy_tail(-2.0).is_err());
        let gamma_sub =
            BernsteinModel::custom(0.0, Arc::new(|s: f64| (-s).exp() / s), None, true).unwrap();
        assert!(matches!(
            gamma_sub.potential_density(1.0),
            Err(Error::Precondition(_))
        ));
        assert!(gamma_sub.renewal_identity_residual(1.0).is_err());
    }

    #[test]
    fn phi_vanishes_at_zero() {
        let m = BernsteinModel::stable(0.3).unwrap();
        assert_eq!(m.phi(0.0).unwrap(), 0.0);
        assert_eq!(m.phi_from_levy_measure(0.0).unwrap(), 0.0);
    }

    #[test]
    fn gamma_subordinator_by_quadrature() {
        // ν(ds) = e^{−s}/s ds has φ(λ) = ln(1 + λ)
        let m = BernsteinModel::custom(0.0, Arc::new(|s: f64| (-s).exp() / s), None, true).unwrap();
        for &l in &[0.1, 1.0, 7.5] {
            let p = m.phi(l).unwrap();
            assert!((p - (1.0f64 + l).ln()).abs() < 1e-10, "lambda={l}: {p}");
            let q = m.phi_from_tail(l).unwrap();
            assert!((q - p).abs() < 1e-9);
        }
        // ν̄(1) = E_1(1)
        assert!((m.levy_tail(1.0).unwrap() - 0.219_383_934_395_520_3).abs() < 1e-12);
    }

    #[test]
    fn drift_enters_phi() {
        let m = BernsteinModel::custom(
            2.0,
            Arc::new(|s: f64| StableExponent(0.5).levy_density(s)),
            None,
            true,
        )
        .unwrap();
        assert!((m.phi(4.0).unwrap() - (8.0 + 2.0)).abs() < 1e-9);
        assert!(!m.satisfies_assumption_s());
    }

    #[test]
    fn custom_stable_tail_matches_closed_form() {
        let a = StableExponent::new(0.4).unwrap();
        let m =
            BernsteinModel::custom(0.0, Arc::new(move |s| a.levy_density(s)), None, true).unwrap();
        for &t in &[0.01, 1.0, 50.0] {
            let q = m.levy_tail(t).unwrap();
            assert!((q - a.levy_tail(t)).abs() < 1e-11 * a.levy_tail(t), "t={t}");
        }
    }

    #[test]
    fn renewal_identity_spot_values() {
        for &(alpha, t) in &[(0.5, 1.0), (0.3, 2.5), (0.9, 0.01)] {
            let m = BernsteinModel::stable(alpha).unwrap();
            let r = m.renewal_identity_residual(t).unwrap();
            assert!(r.value.abs() <= 1e-8, "alpha={alpha} t={t}: {r:?}");
        }
    }
}
