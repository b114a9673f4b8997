//! Discrete continuous-time random walks and their rescaling.
//!
//! Pairs `(J_k, W_k)` are i.i.d.; the walk after scaling by `c` uses
//! `W^c = c^{−1/α} W` and `J^c = c^{−1/(2α)} J`. With epochs
//! `T_n = Σ_{k≤n} W^c_k`, positions `S_n = Σ_{k≤n} J^c_k` and
//! `N_t = max{n : T_n ≤ t}`, the CTRW is `X_t = S_{N_t}` and the
//! overshooting walk is `Y_t = S_{N_t+1}`.
//!
//! In the coupled walk the jump is Gaussian with variance equal to its own
//! waiting time. The uncoupled control draws jumps independently,
//! `J^c = c^{−1/2} Z`.

pub mod ks;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bernstein::StableExponent;
use crate::sampling::{replicate, sample_coupled_pair, sample_ml_waiting, ReplicaRng, SeedSpec};
use crate::{Error, Result};

pub use ks::{
    kolmogorov_quantile, kolmogorov_survival, ks_distance, ks_one_sample, one_sample_critical,
    two_sample_critical,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    Coupled,
    Uncoupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkConfig {
    pub alpha: StableExponent,
    pub scale_c: f64,
    pub horizon_t: f64,
    pub n_paths: u64,
    pub seed: SeedSpec,
    pub coupling: Coupling,
}

impl WalkConfig {
    pub fn new(
        alpha: f64,
        scale_c: f64,
        horizon_t: f64,
        n_paths: u64,
        seed: SeedSpec,
        coupling: Coupling,
    ) -> Result<Self> {
        let c = Self {
            alpha: StableExponent::new(alpha)?,
            scale_c,
            horizon_t,
            n_paths,
            seed,
            coupling,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale_c >= 1.0 && self.scale_c.is_finite()) {
            return Err(Error::invalid(
                "scale_c",
                format!("must be >= 1, got {}", self.scale_c),
            ));
        }
        if !(self.horizon_t > 0.0 && self.horizon_t.is_finite()) {
            return Err(Error::invalid(
                "horizon_t",
                format!("must be positive, got {}", self.horizon_t),
            ));
        }
        if self.n_paths == 0 {
            return Err(Error::invalid("n_paths", "must be positive"));
        }
        Ok(())
    }

    fn scales(&self) -> (f64, f64) {
        let a = self.alpha.alpha();
        let time = self.scale_c.powf(-1.0 / a);
        let space = match self.coupling {
            Coupling::Coupled => self.scale_c.powf(-0.5 / a),
            Coupling::Uncoupled => self.scale_c.powf(-0.5),
        };
        (time, space)
    }

    /// One scaled pair `(jump, wait)`.
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, scales: (f64, f64)) -> (f64, f64) {
        match self.coupling {
            Coupling::Coupled => {
                let (j, w) = sample_coupled_pair(self.alpha, rng);
                (scales.1 * j, scales.0 * w)
            }
            Coupling::Uncoupled => {
                let w = sample_ml_waiting(self.alpha, rng);
                let z: f64 = rng.sample(StandardNormal);
                (scales.1 * z, scales.0 * w)
            }
        }
    }
}

/// A path up to and including the first epoch beyond the horizon. Index 0
/// is the start `(T_0, S_0) = (0, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub epochs: Vec<f64>,
    pub positions: Vec<f64>,
}

impl PathRecord {
    /// `N_t`, for `0 ≤ t ≤` horizon.
    pub fn renewal_count(&self, t: f64) -> usize {
        self.epochs.partition_point(|&e| e <= t) - 1
    }

    pub fn ctrw_value(&self, t: f64) -> f64 {
        self.positions[self.renewal_count(t)]
    }

    pub fn octrw_value(&self, t: f64) -> f64 {
        self.positions[self.renewal_count(t) + 1]
    }

    /// The `(N_t+1)`-th scaled jump.
    pub fn straddling_jump(&self, t: f64) -> f64 {
        let n = self.renewal_count(t);
        self.positions[n + 1] - self.positions[n]
    }
}

/// Replica `replica` of the walk described by `config`.
pub fn simulate_walk(config: &WalkConfig, replica: u64) -> Result<PathRecord> {
    config.validate()?;
    let mut rng = config.seed.replica_rng(replica);
    let scales = config.scales();
    let mut epochs = vec![0.0];
    let mut positions = vec![0.0];
    let (mut t, mut s) = (0.0, 0.0);
    while t <= config.horizon_t {
        let (j, w) = config.draw(&mut rng, scales);
        t += w;
        s += j;
        epochs.push(t);
        positions.push(s);
    }
    Ok(PathRecord { epochs, positions })
}

/// `(N_t, X_t, Y_t)` at the horizon of one path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WalkEndpoint {
    pub renewals: u64,
    pub ctrw: f64,
    pub octrw: f64,
}

fn endpoint(config: &WalkConfig, rng: &mut ReplicaRng, scales: (f64, f64)) -> WalkEndpoint {
    let (mut t, mut s) = (0.0, 0.0);
    let mut n = 0u64;
    loop {
        let (j, w) = config.draw(rng, scales);
        if t + w > config.horizon_t {
            return WalkEndpoint {
                renewals: n,
                ctrw: s,
                octrw: s + j,
            };
        }
        t += w;
        s += j;
        n += 1;
    }
}

/// Endpoints at the horizon for all `n_paths` replicas, without storing
/// paths. Replica `k` agrees with `simulate_walk(config, k)`.
pub fn walk_endpoints(config: &WalkConfig) -> Result<Vec<WalkEndpoint>> {
    config.validate()?;
    let scales = config.scales();
    Ok(replicate(config.seed, config.n_paths, |rng, _| {
        endpoint(config, rng, scales)
    }))
}

/// `(S, T)` summed over `[c·u]` scaled coupled pairs, one per path.
pub fn fl_pairs(
    alpha: StableExponent,
    scale_c: f64,
    u: f64,
    n_paths: u64,
    seed: SeedSpec,
) -> Result<Vec<(f64, f64)>> {
    let config = WalkConfig {
        alpha,
        scale_c,
        horizon_t: 1.0,
        n_paths,
        seed,
        coupling: Coupling::Coupled,
    };
    config.validate()?;
    if !(u >= 0.0 && u.is_finite()) {
        return Err(Error::invalid("u", format!("must be >= 0, got {u}")));
    }
    let count = (scale_c * u).floor() as u64;
    let scales = config.scales();
    Ok(replicate(seed, n_paths, |rng, _| {
        let (mut s, mut t) = (0.0, 0.0);
        for _ in 0..count {
            let (j, w) = config.draw(rng, scales);
            s += j;
            t += w;
        }
        (s, t)
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlSymbol {
    pub estimate: Complex64,
    pub stderr: f64,
}

/// Monte Carlo mean of `e^{−λT + iξS}` with standard error
/// `sqrt((Var Re + Var Im)/n)`.
pub fn empirical_fl_symbol(samples: &[(f64, f64)], lambda: f64, xi: f64) -> Result<FlSymbol> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    if !(lambda >= 0.0) {
        return Err(Error::invalid(
            "lambda",
            format!("must be >= 0, got {lambda}"),
        ));
    }
    let n = samples.len() as f64;
    let values: Vec<Complex64> = samples
        .iter()
        .map(|&(s, t)| Complex64::from_polar((-lambda * t).exp(), xi * s))
        .collect();
    let mean = values.iter().sum::<Complex64>() / n;
    let stderr = if samples.len() > 1 {
        let var: f64 = values.iter().map(|v| (v - mean).norm_sqr()).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Ok(FlSymbol {
        estimate: mean,
        stderr,
    })
}

/// The limit symbol `e^{−u(λ + ξ²/2)^α}`.
pub fn fl_limit_symbol(alpha: StableExponent, u: f64, lambda: f64, xi: f64) -> f64 {
    (-u * (lambda + 0.5 * xi * xi).powf(alpha.alpha())).exp()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(coupling: Coupling) -> WalkConfig {
        WalkConfig::new(0.7, 100.0, 1.0, 50, SeedSpec::new(5, 0), coupling).unwrap()
    }

    #[test]
    fn path_bookkeeping() {
        for coupling in [Coupling::Coupled, Coupling::Uncoupled] {
            let cfg = config(coupling);
            for k in 0..cfg.n_paths {
                let p = simulate_walk(&cfg, k).unwrap();
                assert!(p.epochs.windows(2).all(|w| w[0] < w[1]));
                let first = p.epochs[1];
                if first > 0.0 {
                    let t = 0.5 * first;
                    assert_eq!(p.renewal_count(t), 0);
                    assert_eq!(p.ctrw_value(t), 0.0);
                    assert_eq!(p.octrw_value(t), p.positions[1]);
                }
                let t = 1.0;
                assert_eq!(p.octrw_value(t) - p.ctrw_value(t), p.straddling_jump(t));
                let n = p.renewal_count(t);
                assert!(p.epochs[n] <= t && p.epochs[n + 1] > t);
            }
        }
    }

    #[test]
    fn endpoints_agree_with_stored_paths() {
        let cfg = config(Coupling::Coupled);
        let ends = walk_endpoints(&cfg).unwrap();
        for (k, e) in ends.iter().enumerate() {
            let p = simulate_walk(&cfg, k as u64).unwrap();
            assert_eq!(e.renewals as usize, p.renewal_count(1.0));
            assert_eq!(e.ctrw, p.ctrw_value(1.0));
            assert_eq!(e.octrw, p.octrw_value(1.0));
        }
    }

    #[test]
    fn config_validation() {
        let s = SeedSpec::new(0, 0);
        assert!(WalkConfig::new(0.5, 0.5, 1.0, 1, s, Coupling::Coupled).is_err());
        assert!(WalkConfig::new(0.5, 2.0, 0.0, 1, s, Coupling::Coupled).is_err());
        assert!(WalkConfig::new(1.2, 2.0, 1.0, 1, s, Coupling::Coupled).is_err());
        assert!(WalkConfig::new(0.5, 2.0, 1.0, 0, s, Coupling::Coupled).is_err());
    }

    #[test]
    fn symbol_of_trivial_arguments() {
        let samples = [(0.3, 1.0), (-2.0, 0.1), (5.0, 3.0)];
        let s = empirical_fl_symbol(&samples, 0.0, 0.0).unwrap();
        assert_eq!(s.estimate, Complex64::new(1.0, 0.0));
        assert_eq!(s.stderr, 0.0);
        assert!(empirical_fl_symbol(&[], 1.0, 1.0).is_err());
        let a = StableExponent::new(0.7).unwrap();
        assert!((fl_limit_symbol(a, 1.0, 1.0, 1.0) - 0.264_953_420_553_083).abs() < 1e-14);
    }
}
