//! First passage of a subordinator over a level `t`.
//!
//! For the stable subordinator the pair (undershoot, overshoot) is drawn
//! exactly: the undershoot is `t·B` with `B ~ Beta(α, 1−α)`, and given the
//! undershoot `h` the overshoot has Pareto tail
//! `P(D_t > s | h) = ((t−h)/(s−h))^α`. The inverse time is drawn from its
//! own marginal law, independently of the pair.
//!
//! General models are simulated on a time grid of step `δ`, reading the
//! crossing off the first grid point above the level.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use super::{
    mean_and_stderr, open01, replicate, sample_arcsine, sample_inverse_stable, sample_stable,
    SeedSpec,
};
use crate::bernstein::{require, BernsteinModel, StableExponent};
use crate::quad::{self, QuadOptions};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingSample {
    pub level: f64,
    /// `L_t`
    pub inverse_time: f64,
    /// `σ_{L_t−}`
    pub undershoot: f64,
    /// `D_t = σ_{L_t}`
    pub overshoot: f64,
}

fn check_level(t: f64) -> Result<()> {
    if t > 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(
            "t",
            format!("level must be positive, got {t}"),
        ))
    }
}

pub fn sample_crossing_exact<R: Rng + ?Sized>(
    alpha: StableExponent,
    t: f64,
    rng: &mut R,
) -> CrossingSample {
    let a = alpha.alpha();
    let mut h = t * sample_arcsine(alpha, rng);
    if h >= t {
        h = t * (1.0 - f64::EPSILON);
    }
    let u = open01(rng);
    let mut s = h + (t - h) * (-u.ln() / a).exp();
    if s <= t {
        s = t * (1.0 + f64::EPSILON);
    }
    CrossingSample {
        level: t,
        inverse_time: sample_inverse_stable(alpha, t, rng),
        undershoot: h,
        overshoot: s,
    }
}

/// Exact for stable models, grid simulation with default options otherwise.
pub fn sample_crossing<R: Rng + ?Sized>(
    model: &BernsteinModel,
    t: f64,
    rng: &mut R,
) -> Result<CrossingSample> {
    check_level(t)?;
    if !model.satisfies_assumption_s() {
        return Err(Error::Precondition(
            "crossing law needs a driftless, special, infinite-activity model".into(),
        ));
    }
    match model.stable_exponent() {
        Some(a) => Ok(sample_crossing_exact(a, t, rng)),
        None => GridSampler::new(model, GridOptions::for_level(t))?.sample(t, rng),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridOptions {
    pub step: f64,
    pub max_steps: u64,
    /// Jumps below this size are replaced by their mean drift (general
    /// models only).
    pub small_jump_cut: f64,
}

impl GridOptions {
    pub fn for_level(t: f64) -> Self {
        Self {
            step: 1e-3 * t.max(1e-300),
            max_steps: 100_000_000,
            small_jump_cut: 1e-6 * t.max(1e-300),
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.step > 0.0) {
            return Err(Error::invalid("step", "grid step must be positive"));
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("max_steps", "must be positive"));
        }
        if !(self.small_jump_cut > 0.0) {
            return Err(Error::invalid("small_jump_cut", "must be positive"));
        }
        Ok(())
    }
}

/// Inverse of the normalised tail `y ↦ ν̄(y)/ν̄(ε)` on a geometric grid,
/// interpolated log-linearly.
#[derive(Debug, Clone)]
struct JumpTable {
    ln_y: Vec<f64>,
    ln_tail: Vec<f64>,
}

impl JumpTable {
    fn build(model: &BernsteinModel, eps: f64) -> Result<Self> {
        let mut ln_y = Vec::new();
        let mut ln_tail = Vec::new();
        let ratio: f64 = 1.05;
        let mut y = eps;
        let top = model.levy_tail(eps)?;
        loop {
            let tail = model.levy_tail(y)?;
            if !(tail > 0.0) {
                break;
            }
            ln_y.push(y.ln());
            ln_tail.push(tail.ln());
            if tail < 1e-14 * top || y > 1e12 * eps.max(1.0) {
                break;
            }
            y *= ratio;
        }
        if ln_y.len() < 2 {
            return Err(Error::Precondition(
                "Lévy tail vanishes just above the small-jump cut".into(),
            ));
        }
        Ok(Self { ln_y, ln_tail })
    }

    fn total(&self) -> f64 {
        self.ln_tail[0].exp()
    }

    /// Jump size with `P(J > y) = ν̄(y)/ν̄(ε)`.
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let target = self.ln_tail[0] + open01(rng).ln();
        // ln_tail is decreasing
        let n = self.ln_tail.len();
        let i = self.ln_tail.partition_point(|&v| v >= target);
        let (i0, i1) = if i == 0 {
            (0, 1)
        } else if i >= n {
            (n - 2, n - 1)
        } else {
            (i - 1, i)
        };
        let slope = (self.ln_y[i1] - self.ln_y[i0]) / (self.ln_tail[i1] - self.ln_tail[i0]);
        (self.ln_y[i0] + slope * (target - self.ln_tail[i0])).exp()
    }
}

enum Increment {
    Stable {
        alpha: StableExponent,
        scale: f64,
    },
    CompoundPoisson {
        drift: f64,
        jumps: Option<Poisson<f64>>,
        table: JumpTable,
    },
}

/// Grid-path simulator for one model and grid; reusable across draws.
pub struct GridSampler {
    opts: GridOptions,
    increment: Increment,
}

impl GridSampler {
    pub fn new(model: &BernsteinModel, opts: GridOptions) -> Result<Self> {
        opts.validate()?;
        let increment = match model.stable_exponent() {
            Some(alpha) => Increment::Stable {
                alpha,
                scale: opts.step.powf(1.0 / alpha.alpha()),
            },
            None => {
                let eps = opts.small_jump_cut;
                let table = JumpTable::build(model, eps)?;
                let small = quad::tanh_sinh(
                    |s, _, _| s * model.levy_density(s),
                    0.0,
                    eps,
                    &QuadOptions::with_tol(1e-300, 1e-10),
                );
                let small = require(small)?;
                let rate = table.total() * opts.step;
                let jumps = if rate > 0.0 {
                    Some(Poisson::new(rate).map_err(|e| Error::invalid("step", e.to_string()))?)
                } else {
                    None
                };
                Increment::CompoundPoisson {
                    drift: (model.drift() + small) * opts.step,
                    jumps,
                    table,
                }
            }
        };
        Ok(Self { opts, increment })
    }

    fn step<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match &self.increment {
            Increment::Stable { alpha, scale } => scale * sample_stable(*alpha, rng),
            Increment::CompoundPoisson {
                drift,
                jumps,
                table,
            } => {
                let mut inc = *drift;
                if let Some(p) = jumps {
                    let k = p.sample(rng) as u64;
                    for _ in 0..k {
                        inc += table.sample(rng);
                    }
                }
                inc
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> Result<CrossingSample> {
        check_level(t)?;
        let mut sigma = 0.0;
        for k in 1..=self.opts.max_steps {
            let next = sigma + self.step(rng);
            if next > t {
                return Ok(CrossingSample {
                    level: t,
                    inverse_time: k as f64 * self.opts.step,
                    undershoot: sigma,
                    overshoot: next,
                });
            }
            sigma = next;
        }
        Err(Error::HorizonExhausted {
            steps: self.opts.max_steps,
        })
    }
}

pub fn sample_crossing_grid<R: Rng + ?Sized>(
    model: &BernsteinModel,
    t: f64,
    opts: GridOptions,
    rng: &mut R,
) -> Result<CrossingSample> {
    GridSampler::new(model, opts)?.sample(t, rng)
}

/// Bias of the grid sampler measured by halving the step: mean of
/// `t / D_t` at step `δ` and `δ/2` over `n` draws each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridStepReport {
    pub step: f64,
    pub coarse_mean: f64,
    pub fine_mean: f64,
    pub difference: f64,
    pub stderr: f64,
}

pub fn grid_step_halving(
    model: &BernsteinModel,
    t: f64,
    opts: GridOptions,
    n: u64,
    seed: SeedSpec,
) -> Result<GridStepReport> {
    let run = |o: GridOptions, s: SeedSpec| -> Result<(f64, f64)> {
        let sampler = GridSampler::new(model, o)?;
        let draws = replicate(s, n, |rng, _| {
            sampler.sample(t, rng).map(|c| t / c.overshoot)
        });
        let draws = draws.into_iter().collect::<Result<Vec<_>>>()?;
        mean_and_stderr(&draws)
    };
    let (coarse, se_c) = run(opts, seed.child(0))?;
    let fine_opts = GridOptions {
        step: 0.5 * opts.step,
        ..opts
    };
    let (fine, se_f) = run(fine_opts, seed.child(1))?;
    Ok(GridStepReport {
        step: opts.step,
        coarse_mean: coarse,
        fine_mean: fine,
        difference: coarse - fine,
        stderr: (se_c * se_c + se_f * se_f).sqrt(),
    })
}
