//! Gridded estimates of the candidate harmonic fields
//! `q⁺(x,t) = E u(B_{D_t})`, `q⁻(x,t) = E u(B_{σ_{L_t−}})` and
//! `q⁰(x,t) = E u(B_{L_t})`, each by a quadrature route and a Monte Carlo
//! route.

mod solutions;

use std::io;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bernstein::StableExponent;
use crate::driver::TestFunction;
use crate::quad::{self, Estimate, QuadOptions};
use crate::sampling::{replicate_fold, sample_time_change, SeedSpec};
use crate::{Error, Result, TimeChange};

pub use solutions::{
    arcsine_expectation, overshoot_density, overshoot_density_convolution, overshoot_survival,
    OvershootSolution, UncoupledSolution, UndershootSolution,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Route {
    Quadrature,
    MonteCarlo,
}

impl Route {
    pub fn as_str(self) -> &'static str {
        match self {
            Route::Quadrature => "quadrature",
            Route::MonteCarlo => "monte_carlo",
        }
    }
}

/// `n` points from `lo` to `hi` evenly spaced in `ln`.
pub fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp())
        .collect()
}

/// `lo, lo+step, …` up to `hi` inclusive (to rounding).
pub fn linspace_step(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    (0..=n).map(|k| lo + k as f64 * step).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grids {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
}

impl Default for Grids {
    /// `x ∈ [−4, 4]` step 0.25; `t ∈ {0} ∪ logspace(1e−2, 20, 40)`.
    fn default() -> Self {
        let mut t = vec![0.0];
        t.extend(logspace(1e-2, 20.0, 40));
        Self {
            x: linspace_step(-4.0, 4.0, 0.25),
            t,
        }
    }
}

impl Grids {
    pub fn new(x: Vec<f64>, t: Vec<f64>) -> Result<Self> {
        let g = Self { x, t };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let increasing = |v: &[f64]| v.windows(2).all(|w| w[0] < w[1]);
        if self.x.is_empty() || !self.x.iter().all(|v| v.is_finite()) || !increasing(&self.x) {
            return Err(Error::invalid(
                "x_grid",
                "must be non-empty, finite, strictly increasing",
            ));
        }
        if self.t.is_empty() || !self.t.iter().all(|v| v.is_finite()) || !increasing(&self.t) {
            return Err(Error::invalid(
                "t_grid",
                "must be non-empty, finite, strictly increasing",
            ));
        }
        if self.t[0] < 0.0 {
            return Err(Error::invalid("t_grid", "times must be >= 0"));
        }
        Ok(())
    }

    /// The same grids with `t = 0` removed.
    pub fn positive_times(&self) -> Self {
        Self {
            x: self.x.clone(),
            t: self.t.iter().copied().filter(|&t| t > 0.0).collect(),
        }
    }
}

/// Values `values[i][j] ≈ q(x_j, t_i)`, with Monte Carlo standard errors
/// (zero on the quadrature route).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QField {
    pub kind: TimeChange,
    pub route: Route,
    pub alpha: StableExponent,
    pub x_grid: Vec<f64>,
    pub t_grid: Vec<f64>,
    pub values: Vec<Vec<f64>>,
    pub stderr: Vec<Vec<f64>>,
}

impl QField {
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["kind", "route", "alpha", "x", "t", "value", "stderr"])?;
        let alpha = self.alpha.to_string();
        for (i, t) in self.t_grid.iter().enumerate() {
            for (j, x) in self.x_grid.iter().enumerate() {
                w.write_record([
                    self.kind.as_str(),
                    self.route.as_str(),
                    &alpha,
                    &x.to_string(),
                    &t.to_string(),
                    &self.values[i][j].to_string(),
                    &self.stderr[i][j].to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .flatten()
            .fold(0.0, |m: f64, v| m.max(v.abs()))
    }
}

fn quadrature_field<U, F>(
    kind: TimeChange,
    alpha: StableExponent,
    u: &U,
    grids: &Grids,
    f: F,
) -> Result<QField>
where
    U: TestFunction + ?Sized,
    F: Fn(f64, f64) -> Estimate + Sync,
{
    grids.validate()?;
    let nx = grids.x.len();
    let cells: Vec<Result<f64>> = (0..grids.t.len() * nx)
        .into_par_iter()
        .map(|k| {
            let (t, x) = (grids.t[k / nx], grids.x[k % nx]);
            if t == 0.0 {
                return Ok(u.value(x));
            }
            let e = f(x, t);
            if e.converged {
                Ok(e.value)
            } else {
                Err(Error::Quadrature {
                    value: e.value,
                    error: e.error,
                })
            }
        })
        .collect();
    let flat = cells.into_iter().collect::<Result<Vec<f64>>>()?;
    let values: Vec<Vec<f64>> = flat.chunks(nx).map(|c| c.to_vec()).collect();
    let stderr = vec![vec![0.0; nx]; grids.t.len()];
    Ok(QField {
        kind,
        route: Route::Quadrature,
        alpha,
        x_grid: grids.x.clone(),
        t_grid: grids.t.clone(),
        values,
        stderr,
    })
}

pub fn q_overshoot_quadrature<U: TestFunction + ?Sized>(
    alpha: StableExponent,
    u: &U,
    grids: &Grids,
) -> Result<QField> {
    let sol = OvershootSolution::new(alpha, u);
    quadrature_field(TimeChange::Overshoot, alpha, u, grids, |x, t| {
        sol.value(x, t)
    })
}

pub fn q_undershoot_quadrature<U: TestFunction + ?Sized>(
    alpha: StableExponent,
    u: &U,
    grids: &Grids,
) -> Result<QField> {
    let sol = UndershootSolution::new(alpha, u);
    quadrature_field(TimeChange::Undershoot, alpha, u, grids, |x, t| {
        sol.value(x, t)
    })
}

/// The Fourier-route oracle for `q⁰`.
pub fn q_uncoupled_fourier<U: TestFunction + ?Sized>(
    alpha: StableExponent,
    u: &U,
    grids: &Grids,
) -> Result<QField> {
    let sol = UncoupledSolution::new(alpha, u)?;
    quadrature_field(TimeChange::Uncoupled, alpha, u, grids, |x, t| {
        sol.value(x, t)
    })
}

/// Monte Carlo field: row `i` uses the replica family `seed.child(i)` and
/// common random numbers across the `x` grid.
pub fn q_monte_carlo<U: TestFunction + ?Sized>(
    kind: TimeChange,
    alpha: StableExponent,
    u: &U,
    grids: &Grids,
    n_paths: u64,
    seed: SeedSpec,
) -> Result<QField> {
    grids.validate()?;
    if n_paths < 2 {
        return Err(Error::invalid(
            "n_paths",
            "needs at least 2 paths for error bars",
        ));
    }
    let nx = grids.x.len();
    let n = n_paths as f64;
    let mut values = Vec::with_capacity(grids.t.len());
    let mut stderr = Vec::with_capacity(grids.t.len());
    for (i, &t) in grids.t.iter().enumerate() {
        if t == 0.0 {
            values.push(grids.x.iter().map(|&x| u.value(x)).collect());
            stderr.push(vec![0.0; nx]);
            continue;
        }
        let (sum, sum_sq) = replicate_fold(
            seed.child(i as u64),
            n_paths,
            || (vec![0.0; nx], vec![0.0; nx]),
            |acc, rng, _| {
                let tau = sample_time_change(alpha, t, kind, rng);
                let z: f64 = rng.sample(StandardNormal);
                let shift = tau.sqrt() * z;
                for (j, &x) in grids.x.iter().enumerate() {
                    let v = u.value(x + shift);
                    acc.0[j] += v;
                    acc.1[j] += v * v;
                }
            },
            |total, part| {
                for j in 0..nx {
                    total.0[j] += part.0[j];
                    total.1[j] += part.1[j];
                }
            },
        );
        let mean: Vec<f64> = sum.iter().map(|s| s / n).collect();
        let se = (0..nx)
            .map(|j| {
                let var = ((sum_sq[j] - n * mean[j] * mean[j]) / (n - 1.0)).max(0.0);
                (var / n).sqrt()
            })
            .collect();
        values.push(mean);
        stderr.push(se);
    }
    Ok(QField {
        kind,
        route: Route::MonteCarlo,
        alpha,
        x_grid: grids.x.clone(),
        t_grid: grids.t.clone(),
        values,
        stderr,
    })
}

pub fn q_overshoot_mc<U: TestFunction + ?Sized>(
    alpha: StableExponent,
    u: &U,
    grids: &Grids,
    n_paths: u64,
    seed: SeedSpec,
) -> Result<QField> {
    q_monte_carlo(TimeChange::Overshoot, alpha, u, grids, n_paths, seed)
}

pub fn q_undershoot_mc<U: TestFunction + ?Sized>(
    alpha: StableExponent,
    u: &U,
    grids: &Grids,
    n_paths: u64,
    seed: SeedSpec,
) -> Result<QField> {
    q_monte_carlo(TimeChange::Undershoot, alpha, u, grids, n_paths, seed)
}

/// Monte Carlo `q⁰` through the exact inverse stable sampler.
pub fn q_uncoupled<U: TestFunction + ?Sized>(
    alpha: StableExponent,
    u: &U,
    grids: &Grids,
    n_paths: u64,
    seed: SeedSpec,
) -> Result<QField> {
    q_monte_carlo(TimeChange::Uncoupled, alpha, u, grids, n_paths, seed)
}

/// Both routes for `∫_0^∞ e^{−λt} q⁺(x,t) dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceQ {
    /// `∫∫ e^{−λh} P_{s+h}u(x) (1−e^{−λs})/λ ν(ds) U(dh)`.
    pub double_integral: Estimate,
    /// `∫_0^T e^{−λt} q⁺(x,t) dt`, truncation bound included in the error.
    pub numerical: Estimate,
    pub horizon: f64,
}

impl LaplaceQ {
    pub fn value(&self) -> f64 {
        self.double_integral.value
    }
}

/// Truncation horizon with `e^{−λT} ‖u‖/λ ≤ 1e−10`.
pub fn laplace_horizon(sup_u: f64, lambda: f64) -> f64 {
    ((sup_u / (lambda * 1e-10)).ln() / lambda).max(0.0)
}

pub fn laplace_q<U: TestFunction + ?Sized>(
    alpha: StableExponent,
    u: &U,
    x: f64,
    lambda: f64,
) -> Result<LaplaceQ> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(
            "lambda",
            format!("must be positive, got {lambda}"),
        ));
    }
    let opts = QuadOptions::with_tol(1e-14, 1e-11);
    let double_integral = quad::semi_infinite_pair(
        |h, _| {
            let inner = quad::semi_infinite(
                |s, _| alpha.levy_density(s) * -(-lambda * s).exp_m1() * u.heat(s + h, x),
                0.0,
                1.0,
                &opts,
            );
            let w = alpha.potential_density(h) * (-lambda * h).exp() / lambda;
            (w * inner.value, w * inner.error)
        },
        0.0,
        1.0 / lambda,
        &opts,
    );

    let sol = OvershootSolution::new(alpha, u);
    let horizon = laplace_horizon(u.sup_norm(), lambda);
    let mut numerical = quad::tanh_sinh_pair(
        |t, _, _| {
            let q = sol.value(x, t);
            let d = (-lambda * t).exp();
            (d * q.value, d * q.error)
        },
        0.0,
        horizon,
        &opts,
    );
    numerical.error += (-lambda * horizon).exp() * u.sup_norm() / lambda;
    for e in [&double_integral, &numerical] {
        if !e.converged {
            return Err(Error::Quadrature {
                value: e.value,
                error: e.error,
            });
        }
    }
    Ok(LaplaceQ {
        double_integral,
        numerical,
        horizon,
    })
}

/// A time `T` with `q⁺(x, T) ≤ threshold`, found by doubling then
/// bisection down to 1% relative width.
pub fn decay_horizon<U: TestFunction + ?Sized>(
    alpha: StableExponent,
    u: &U,
    x: f64,
    threshold: f64,
) -> Result<f64> {
    if !(threshold > 0.0) {
        return Err(Error::invalid("threshold", "must be positive"));
    }
    let sol = OvershootSolution::new(alpha, u);
    let q = |t: f64| sol.value(x, t).value;
    let mut hi = 1.0;
    while q(hi) > threshold {
        hi *= 2.0;
        if hi > 1e30 {
            return Err(Error::Precondition(
                "field does not decay below threshold".into(),
            ));
        }
    }
    let mut lo = 0.0;
    while hi - lo > 0.01 * hi {
        let mid = 0.5 * (lo + hi);
        if q(mid) > threshold {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}
