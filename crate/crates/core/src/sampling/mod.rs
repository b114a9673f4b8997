//! Seeded samplers: positive stable laws, Mittag-Leffler waiting times,
//! coupled jump/wait pairs, inverse stable times, crossing triples and
//! time-changed Brownian values.
//!
//! Every replica `k` of an experiment draws from its own ChaCha8 stream
//! keyed by `(root_seed, stream_id, k)`, so results do not depend on how
//! replicas are scheduled across threads.

mod crossing;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Exp1, Open01, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bernstein::StableExponent;
use crate::{Error, Result, TimeChange};

pub use crossing::{
    grid_step_halving, sample_crossing, sample_crossing_exact, sample_crossing_grid,
    CrossingSample, GridOptions, GridStepReport,
};

pub type ReplicaRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeedSpec {
    pub root_seed: u64,
    #[serde(default)]
    pub stream_id: u64,
}

impl SeedSpec {
    pub const fn new(root_seed: u64, stream_id: u64) -> Self {
        Self {
            root_seed,
            stream_id,
        }
    }

    /// The stream of replica `k`.
    pub fn replica_rng(&self, k: u64) -> ReplicaRng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.root_seed.to_le_bytes());
        key[8..16].copy_from_slice(&self.stream_id.to_le_bytes());
        key[16..24].copy_from_slice(&k.to_le_bytes());
        ChaCha8Rng::from_seed(key)
    }

    /// A child stream id, for experiments that need several independent
    /// families of replicas under one seed.
    pub fn child(&self, tag: u64) -> SeedSpec {
        // splitmix64 finaliser keeps children of nearby ids apart
        let mut z = self
            .stream_id
            .wrapping_add(tag.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        SeedSpec::new(self.root_seed, z)
    }
}

/// Runs `f` once per replica `0..n` in parallel and returns the results in
/// replica order.
pub fn replicate<T, F>(seed: SeedSpec, n: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut ReplicaRng, u64) -> T + Sync + Send,
{
    (0..n)
        .into_par_iter()
        .map(|k| {
            let mut rng = seed.replica_rng(k);
            f(&mut rng, k)
        })
        .collect()
}

const FOLD_BLOCK: u64 = 1024;

/// Folds replicas `0..n` into an accumulator. Replicas are grouped in
/// fixed blocks folded sequentially and merged in block order, so the result
/// is bit-identical for any thread count.
pub fn replicate_fold<A, I, F, M>(seed: SeedSpec, n: u64, identity: I, fold: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync + Send,
    F: Fn(&mut A, &mut ReplicaRng, u64) + Sync + Send,
    M: Fn(&mut A, A),
{
    let blocks = n.div_ceil(FOLD_BLOCK);
    let parts: Vec<A> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut acc = identity();
            for k in b * FOLD_BLOCK..n.min((b + 1) * FOLD_BLOCK) {
                let mut rng = seed.replica_rng(k);
                fold(&mut acc, &mut rng, k);
            }
            acc
        })
        .collect();
    let mut total = identity();
    for p in parts {
        merge(&mut total, p);
    }
    total
}

/// Sample mean and its standard error.
pub fn mean_and_stderr(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.is_empty() {
        return Err(Error::EmptySample);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return Ok((mean, 0.0));
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, (var / n).sqrt()))
}

fn open01<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Open01)
}

/// ln σ₁ by Kanter's representation
/// `σ₁ = (A(U)/E)^{(1−α)/α}` with
/// `A(φ) = sin(αφ)^{α/(1−α)} sin((1−α)φ) / sin(φ)^{1/(1−α)}`.
fn ln_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let u = std::f64::consts::PI * open01(rng);
    let e: f64 = rng.sample(Exp1);
    let k = (1.0 - alpha) / alpha;
    (alpha * u).sin().ln() - (u.sin().ln()) / alpha + k * (((1.0 - alpha) * u).sin().ln() - e.ln())
}

/// Standard positive α-stable variable, `E e^{−λσ₁} = e^{−λ^α}`.
pub fn sample_stable<R: Rng + ?Sized>(alpha: StableExponent, rng: &mut R) -> f64 {
    ln_stable(alpha.alpha(), rng).exp()
}

/// Mittag-Leffler waiting time `W = E^{1/α} σ₁`, `E e^{−λW} = 1/(1+λ^α)`.
pub fn sample_ml_waiting<R: Rng + ?Sized>(alpha: StableExponent, rng: &mut R) -> f64 {
    let a = alpha.alpha();
    let e: f64 = rng.sample(Exp1);
    (e.ln() / a + ln_stable(a, rng)).exp()
}

/// `(jump, wait)`: Mittag-Leffler wait and a centred Gaussian jump with
/// variance equal to the wait.
pub fn sample_coupled_pair<R: Rng + ?Sized>(alpha: StableExponent, rng: &mut R) -> (f64, f64) {
    let w = sample_ml_waiting(alpha, rng);
    let z: f64 = rng.sample(StandardNormal);
    (w.sqrt() * z, w)
}

/// Inverse stable time `L_t = (t/σ₁)^α` in law.
pub fn sample_inverse_stable<R: Rng + ?Sized>(alpha: StableExponent, t: f64, rng: &mut R) -> f64 {
    let a = alpha.alpha();
    (a * (t.ln() - ln_stable(a, rng))).exp()
}

/// Generalized arcsine law Beta(α, 1−α).
pub fn sample_arcsine<R: Rng + ?Sized>(alpha: StableExponent, rng: &mut R) -> f64 {
    let a = alpha.alpha();
    Beta::new(a, 1.0 - a)
        .expect("Beta parameters in (0,1)")
        .sample(rng)
}

/// The random time `τ` at which Brownian motion is read off: `D_t`,
/// `σ_{L_t−}` or `L_t`.
pub fn sample_time_change<R: Rng + ?Sized>(
    alpha: StableExponent,
    t: f64,
    kind: TimeChange,
    rng: &mut R,
) -> f64 {
    match kind {
        TimeChange::Overshoot => sample_crossing_exact(alpha, t, rng).overshoot,
        TimeChange::Undershoot => t * sample_arcsine(alpha, rng),
        TimeChange::Uncoupled => sample_inverse_stable(alpha, t, rng),
    }
}

/// One draw of `B_τ` started at `x`, with `τ` from [`sample_time_change`].
pub fn sample_limit_value<R: Rng + ?Sized>(
    alpha: StableExponent,
    t: f64,
    x: f64,
    kind: TimeChange,
    rng: &mut R,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::invalid("t", format!("needs t > 0, got {t}")));
    }
    let tau = sample_time_change(alpha, t, kind, rng);
    let z: f64 = rng.sample(StandardNormal);
    Ok(x + tau.sqrt() * z)
}
