//! One-dimensional Brownian motion as the Feller driver, generator
//! `G = ½ ∂²ₓ`, and Gaussian test functions on which `u`, `Gu` and the heat
//! semigroup `P_s u` are all closed-form.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// What the operators and estimators need from an initial datum `u`.
pub trait TestFunction: Send + Sync {
    fn value(&self, x: f64) -> f64;

    /// `Gu(x) = ½ u''(x)`.
    fn generator(&self, x: f64) -> f64;

    /// `P_s u(x)`.
    fn heat(&self, s: f64, x: f64) -> f64;

    /// `G P_s u(x) = P_s G u(x)`.
    fn heat_generator(&self, s: f64, x: f64) -> f64;

    /// `P_{s+δ} u(x) − P_s u(x)` for `s + δ ≥ 0`, without cancellation when
    /// `δ` is small.
    fn heat_shift(&self, s: f64, delta: f64, x: f64) -> f64;

    /// An upper bound for `sup_x |P_s u|`, non-increasing in `s`.
    fn heat_sup(&self, s: f64) -> f64;

    /// An upper bound for `sup_x |G P_s u|`, non-increasing in `s`.
    fn heat_generator_sup(&self, s: f64) -> f64;

    /// Spectral profile: `P_s u(x) = ∫_0^∞ S(x, ξ) e^{−sξ²/2} dξ`.
    fn spectral_profile(&self, x: f64, xi: f64) -> f64;

    /// Frequency beyond which the spectral profile is negligible (< 1e-20
    /// relative).
    fn spectral_cutoff(&self) -> f64;

    /// An upper bound for `sup_x ∫ |S(x, ξ)| ξ²/2 dξ`.
    fn spectral_generator_mass(&self) -> f64;

    fn sup_norm(&self) -> f64 {
        self.heat_sup(0.0)
    }

    fn generator_sup(&self) -> f64 {
        self.heat_generator_sup(0.0)
    }

    /// `lim_{s→∞} P_s u`, uniform in `x`.
    fn heat_limit(&self) -> f64 {
        0.0
    }

    /// An upper bound for `sup_x |P_s u − heat_limit()|`, non-increasing in `s`.
    fn heat_deviation_sup(&self, s: f64) -> f64 {
        self.heat_sup(s)
    }
}

/// `u(x) = A exp(−(x−c)²/(2w²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianBump {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
}

impl Default for GaussianBump {
    fn default() -> Self {
        Self::standard()
    }
}

impl GaussianBump {
    pub fn new(center: f64, width: f64, amplitude: f64) -> Result<Self> {
        let b = Self {
            center,
            width,
            amplitude,
        };
        b.validate()?;
        Ok(b)
    }

    /// Center 0, width 1, amplitude 1.
    pub const fn standard() -> Self {
        Self {
            center: 0.0,
            width: 1.0,
            amplitude: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.center.is_finite() {
            return Err(Error::invalid("center", "must be finite"));
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::invalid(
                "width",
                format!("must be positive, got {}", self.width),
            ));
        }
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::invalid(
                "amplitude",
                format!("must be positive, got {}", self.amplitude),
            ));
        }
        Ok(())
    }

    /// The bump after running the heat flow for time `s`: again a bump.
    pub fn evolved(&self, s: f64) -> Self {
        let w2 = self.width * self.width;
        let v = w2 + s;
        Self {
            center: self.center,
            width: v.sqrt(),
            amplitude: self.amplitude * (w2 / v).sqrt(),
        }
    }

    pub fn u(&self, x: f64) -> f64 {
        self.heat(0.0, x)
    }

    pub fn gu(&self, x: f64) -> f64 {
        self.heat_generator(0.0, x)
    }

    pub fn heat_action(&self, s: f64, x: f64) -> f64 {
        self.heat(s, x)
    }

    fn variance(&self, s: f64) -> f64 {
        self.width * self.width + s
    }
}

impl TestFunction for GaussianBump {
    fn value(&self, x: f64) -> f64 {
        self.u(x)
    }

    fn generator(&self, x: f64) -> f64 {
        self.gu(x)
    }

    fn heat(&self, s: f64, x: f64) -> f64 {
        let v = self.variance(s);
        let d = x - self.center;
        self.amplitude * self.width / v.sqrt() * (-0.5 * d * d / v).exp()
    }

    fn heat_generator(&self, s: f64, x: f64) -> f64 {
        let v = self.variance(s);
        let d = x - self.center;
        0.5 * self.heat(s, x) * (d * d / v - 1.0) / v
    }

    fn heat_shift(&self, s: f64, delta: f64, x: f64) -> f64 {
        // P_∞ u = 0
        if s == f64::INFINITY {
            return 0.0;
        }
        if delta == f64::INFINITY {
            return -self.heat(s, x);
        }
        let v = self.variance(s);
        let base = self.heat(s, x);
        if base == 0.0 || delta < -0.5 * v {
            return self.heat(s + delta, x) - base;
        }
        let d = x - self.center;
        // ln(P_{s+δ}u / P_s u)
        let r = -0.5 * (delta / v).ln_1p() + 0.5 * d * d * delta / (v * (v + delta));
        base * r.exp_m1()
    }

    fn heat_sup(&self, s: f64) -> f64 {
        self.amplitude * self.width / self.variance(s).sqrt()
    }

    fn heat_generator_sup(&self, s: f64) -> f64 {
        // |(d²/v − 1)| e^{−d²/2v} peaks at d = 0
        0.5 * self.amplitude * self.width / self.variance(s).powf(1.5)
    }

    fn spectral_profile(&self, x: f64, xi: f64) -> f64 {
        let w = self.width;
        self.amplitude
            * w
            * (2.0 / PI).sqrt()
            * ((x - self.center) * xi).cos()
            * (-0.5 * w * w * xi * xi).exp()
    }

    fn spectral_cutoff(&self) -> f64 {
        10.0 / self.width
    }

    fn spectral_generator_mass(&self) -> f64 {
        // A w √(2/π) ∫ ξ²/2 e^{−w²ξ²/2} dξ
        0.5 * self.amplitude / (self.width * self.width)
    }
}

/// A finite linear combination `Σ c_k u_k` of Gaussian bumps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpMixture {
    pub terms: Vec<(f64, GaussianBump)>,
}

impl BumpMixture {
    pub fn new(terms: Vec<(f64, GaussianBump)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::invalid("terms", "mixture needs at least one bump"));
        }
        for (c, b) in &terms {
            if !c.is_finite() {
                return Err(Error::invalid("terms", "coefficients must be finite"));
            }
            b.validate()?;
        }
        Ok(Self { terms })
    }

    fn sum(&self, f: impl Fn(&GaussianBump) -> f64) -> f64 {
        self.terms.iter().map(|(c, b)| c * f(b)).sum()
    }

    fn abs_sum(&self, f: impl Fn(&GaussianBump) -> f64) -> f64 {
        self.terms.iter().map(|(c, b)| c.abs() * f(b)).sum()
    }
}

impl TestFunction for BumpMixture {
    fn value(&self, x: f64) -> f64 {
        self.sum(|b| b.value(x))
    }
    fn generator(&self, x: f64) -> f64 {
        self.sum(|b| b.generator(x))
    }
    fn heat(&self, s: f64, x: f64) -> f64 {
        self.sum(|b| b.heat(s, x))
    }
    fn heat_generator(&self, s: f64, x: f64) -> f64 {
        self.sum(|b| b.heat_generator(s, x))
    }
    fn heat_shift(&self, s: f64, delta: f64, x: f64) -> f64 {
        self.sum(|b| b.heat_shift(s, delta, x))
    }
    fn heat_sup(&self, s: f64) -> f64 {
        self.abs_sum(|b| b.heat_sup(s))
    }
    fn heat_generator_sup(&self, s: f64) -> f64 {
        self.abs_sum(|b| b.heat_generator_sup(s))
    }
    fn spectral_profile(&self, x: f64, xi: f64) -> f64 {
        self.sum(|b| b.spectral_profile(x, xi))
    }
    fn spectral_generator_mass(&self) -> f64 {
        self.abs_sum(|b| b.spectral_generator_mass())
    }
    fn spectral_cutoff(&self) -> f64 {
        self.terms
            .iter()
            .map(|(_, b)| b.spectral_cutoff())
            .fold(0.0, f64::max)
    }
}

/// The constant function `c`. Not in `C_0`, but the heat flow fixes it and
/// `G` kills it, which is all the operator checks on constants need. It has
/// no spectral profile (its transform is a point mass at `ξ = 0`), so the
/// Fourier routes must not be used with it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Constant(pub f64);

impl TestFunction for Constant {
    fn value(&self, _x: f64) -> f64 {
        self.0
    }
    fn generator(&self, _x: f64) -> f64 {
        0.0
    }
    fn heat(&self, _s: f64, _x: f64) -> f64 {
        self.0
    }
    fn heat_generator(&self, _s: f64, _x: f64) -> f64 {
        0.0
    }
    fn heat_shift(&self, _s: f64, _delta: f64, _x: f64) -> f64 {
        0.0
    }
    fn heat_sup(&self, _s: f64) -> f64 {
        self.0.abs()
    }
    fn heat_limit(&self) -> f64 {
        self.0
    }
    fn heat_deviation_sup(&self, _s: f64) -> f64 {
        0.0
    }
    fn heat_generator_sup(&self, _s: f64) -> f64 {
        0.0
    }
    fn spectral_profile(&self, _x: f64, _xi: f64) -> f64 {
        0.0
    }
    fn spectral_cutoff(&self) -> f64 {
        0.0
    }
    fn spectral_generator_mass(&self) -> f64 {
        0.0
    }
}

/// Gauss–Hermite rule for `∫ f(y) e^{−y²} dy`, nodes by Newton iteration on
/// the orthonormal Hermite recurrence.
#[derive(Debug, Clone)]
pub struct GaussHermite {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n > 200 {
            return Err(Error::invalid("n", format!("needs 1 <= n <= 200, got {n}")));
        }
        let pim4 = PI.powf(-0.25);
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        let mut z = 0.0;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[0],
                3 => 1.91 * z - 0.91 * nodes[1],
                _ => 2.0 * z - nodes[i - 2],
            };
            let mut pp = 0.0;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 0..n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            nodes[i] = z;
            nodes[n - 1 - i] = -z;
            weights[i] = 2.0 / (pp * pp);
            weights[n - 1 - i] = weights[i];
        }
        Ok(Self { nodes, weights })
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&y, &w)| w * f(y))
            .sum()
    }

    /// `P_s f(x) = E f(x + √s Z)` for a generic `f`.
    pub fn heat_action(&self, f: impl Fn(f64) -> f64, s: f64, x: f64) -> f64 {
        let scale = (2.0 * s).sqrt();
        self.integrate(|y| f(x + scale * y)) / PI.sqrt()
    }
}
