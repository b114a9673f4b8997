//! Harmonic functions of overshooting and undershooting continuous-time
//! random walks driven by stable subordinators.
//!
//! Modules, bottom up:
//!
//! * [`bernstein`]: Bernstein functions, Lévy tails, potential densities,
//!   Mittag-Leffler functions.
//! * [`sampling`]: seeded samplers for stable laws, crossing triples and
//!   limit values.
//! * [`ctrw`]: discrete coupled walks under scaling, the Fourier-Laplace
//!   symbol of the jump pairs, Kolmogorov-Smirnov statistics.
//! * [`driver`]: Gaussian test functions and the Brownian heat semigroup.
//! * [`evolution`]: the candidate harmonic fields `q⁺`, `q⁻`, `q⁰`.
//! * [`nonlocal`]: the space-time operators and residual checks.

// `!(x > 0.0)` rejects NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bernstein;
pub mod ctrw;
pub mod driver;
pub mod evolution;
pub mod nonlocal;
pub mod quad;
pub mod sampling;

use serde::{Deserialize, Serialize};

pub use bernstein::{BernsteinModel, StableExponent};
pub use driver::{GaussianBump, TestFunction};
pub use sampling::SeedSpec;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("argument outside the supported domain: {0}")]
    UnsupportedArgument(String),
    #[error("quadrature did not reach tolerance (value {value:e}, error estimate {error:e})")]
    Quadrature { value: f64, error: f64 },
    #[error("grid path did not cross the level within {steps} steps")]
    HorizonExhausted { steps: u64 },
    #[error("empty sample")]
    EmptySample,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Which random time the Brownian motion is run until.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeChange {
    /// First-passage position `D_t` of the subordinator.
    Overshoot,
    /// Position `D_{t−}` just before first passage.
    Undershoot,
    /// Inverse stable time `L_t` (the uncoupled limit).
    Uncoupled,
}

impl TimeChange {
    pub const ALL: [TimeChange; 3] = [
        TimeChange::Overshoot,
        TimeChange::Undershoot,
        TimeChange::Uncoupled,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TimeChange::Overshoot => "overshoot",
            TimeChange::Undershoot => "undershoot",
            TimeChange::Uncoupled => "uncoupled",
        }
    }
}

impl std::fmt::Display for TimeChange {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for TimeChange {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "overshoot" => Ok(TimeChange::Overshoot),
            "undershoot" => Ok(TimeChange::Undershoot),
            "uncoupled" => Ok(TimeChange::Uncoupled),
            other => Err(Error::invalid("kind", format!("unknown kind `{other}`"))),
        }
    }
}
