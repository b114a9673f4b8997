//! Experiment configuration: a TOML file, validated in full before any
//! computation starts. Unknown keys are rejected. See `docs/config.md`.

use std::path::PathBuf;

use ctrw_harmonic::evolution::{linspace_step, logspace, Grids};
use ctrw_harmonic::nonlocal::QuadratureScheme;
use ctrw_harmonic::{GaussianBump, SeedSpec, StableExponent, TimeChange};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    FlSymbol,
    CtrwConverge,
    QFields,
    ResidualScan,
    LaplaceChecks,
    PmpProbe,
    Identities,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::FlSymbol,
        Experiment::CtrwConverge,
        Experiment::QFields,
        Experiment::ResidualScan,
        Experiment::LaplaceChecks,
        Experiment::PmpProbe,
        Experiment::Identities,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::FlSymbol => "fl-symbol",
            Experiment::CtrwConverge => "ctrw-converge",
            Experiment::QFields => "q-fields",
            Experiment::ResidualScan => "residual-scan",
            Experiment::LaplaceChecks => "laplace-checks",
            Experiment::PmpProbe => "pmp-probe",
            Experiment::Identities => "identities",
        }
    }

    pub fn summary(self) -> &'static str {
        match self {
            Experiment::FlSymbol => "Fourier-Laplace symbol of scaled coupled pairs vs the limit",
            Experiment::CtrwConverge => "KS diagnostics of CTRW/OCTRW marginals vs limit samplers",
            Experiment::QFields => {
                "q fields by quadrature and Monte Carlo, with cross-route checks"
            }
            Experiment::ResidualScan => {
                "harmonicity residuals of the non-local operators on a grid"
            }
            Experiment::LaplaceChecks => "Laplace-domain residual, laplace_q routes, resolvent",
            Experiment::PmpProbe => "positive maximum principle probe at an interior maximum",
            Experiment::Identities => "renewal, resolvent and constant-annihilation identities",
        }
    }

    fn default_alpha(self) -> Vec<f64> {
        match self {
            Experiment::FlSymbol | Experiment::CtrwConverge => vec![0.7],
            Experiment::QFields | Experiment::PmpProbe => vec![0.5],
            Experiment::ResidualScan => vec![0.3, 0.5, 0.7],
            Experiment::LaplaceChecks => vec![0.5],
            Experiment::Identities => (1..=9).map(|k| k as f64 / 10.0).collect(),
        }
    }

    fn default_paths(self) -> u64 {
        match self {
            Experiment::FlSymbol | Experiment::QFields => 100_000,
            _ => 10_000,
        }
    }
}

/// A grid axis: an explicit list, a linear range or a log range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum Axis {
    List(Vec<f64>),
    Linear {
        start: f64,
        stop: f64,
        step: f64,
    },
    Log {
        start: f64,
        stop: f64,
        count: usize,
        #[serde(default)]
        include_zero: bool,
    },
}

impl Axis {
    fn points(&self, path: &str) -> Result<Vec<f64>, CliError> {
        let bad = |reason: &str| CliError::config(path, reason);
        match *self {
            Axis::List(ref v) => Ok(v.clone()),
            Axis::Linear { start, stop, step } => {
                if !(step > 0.0 && start.is_finite() && stop >= start) {
                    return Err(bad("needs finite start <= stop and step > 0"));
                }
                if (stop - start) / step > 1e6 {
                    return Err(bad("more than 1e6 points"));
                }
                Ok(linspace_step(start, stop, step))
            }
            Axis::Log {
                start,
                stop,
                count,
                include_zero,
            } => {
                if !(start > 0.0 && stop > start && stop.is_finite() && count >= 2) {
                    return Err(bad("needs 0 < start < stop and count >= 2"));
                }
                let mut v = if include_zero { vec![0.0] } else { vec![] };
                v.extend(logspace(start, stop, count));
                Ok(v)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x: Axis,
    pub t: Axis,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            x: Axis::Linear {
                start: -4.0,
                stop: 4.0,
                step: 0.25,
            },
            t: Axis::Log {
                start: 1e-2,
                stop: 20.0,
                count: 40,
                include_zero: true,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Added to each cell's error bound in residual scans.
    pub harmonic: f64,
    /// Monte Carlo agreement, in standard errors.
    pub mc_sigmas: f64,
    /// Renewal and resolvent identities.
    pub identity: f64,
    /// Fraction of negative-control cells that must fail.
    pub control_fail_fraction: f64,
    /// KS statistics are compared with this multiple of the critical value.
    pub ks_slack: f64,
    /// Significance level of KS critical values.
    pub ks_level: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            harmonic: 1e-4,
            mc_sigmas: 3.0,
            identity: 1e-8,
            control_fail_fraction: 0.9,
            ks_slack: 2.0,
            ks_level: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AlphaSpec {
    One(f64),
    Many(Vec<f64>),
}

/// The file as written. Everything is optional; defaults depend on the
/// experiment.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<Experiment>,
    pub alpha: Option<AlphaSpec>,
    pub n_paths: Option<u64>,
    pub seed: Option<SeedSpec>,
    pub output_dir: Option<PathBuf>,
    pub grids: Option<GridConfig>,
    pub tolerances: Option<Tolerances>,
    pub scheme: Option<QuadratureScheme>,
    pub bump: Option<GaussianBump>,
    /// Scaling parameters `c` of the walks.
    pub scale_c: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
    pub xi: Option<Vec<f64>>,
    /// Index `u` of the Fourier-Laplace symbol.
    pub u_index: Option<f64>,
    pub horizon_t: Option<f64>,
    pub kinds: Option<Vec<TimeChange>>,
}

/// A fully resolved and validated configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub alpha: Vec<StableExponent>,
    pub n_paths: u64,
    pub seed: SeedSpec,
    pub output_dir: PathBuf,
    pub grids: Grids,
    pub tolerances: Tolerances,
    pub scheme: QuadratureScheme,
    pub bump: GaussianBump,
    pub scale_c: Vec<f64>,
    pub lambda: Vec<f64>,
    pub xi: Vec<f64>,
    pub u_index: f64,
    pub horizon_t: f64,
    pub kinds: Vec<TimeChange>,
}

/// Command-line overrides applied on top of the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

fn positive_list(path: &str, v: &[f64]) -> Result<(), CliError> {
    if v.is_empty() {
        return Err(CliError::config(path, "must be non-empty"));
    }
    for (i, x) in v.iter().enumerate() {
        if !(*x > 0.0 && x.is_finite()) {
            return Err(CliError::config(
                &format!("{path}[{i}]"),
                &format!("must be positive, got {x}"),
            ));
        }
    }
    Ok(())
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::config(&toml_path(&e), e.message()))
    }

    pub fn resolve(
        self,
        experiment: Experiment,
        overrides: &Overrides,
    ) -> Result<ExperimentConfig, CliError> {
        if let Some(e) = self.experiment {
            if e != experiment {
                return Err(CliError::config(
                    "experiment",
                    &format!(
                        "file is for `{}` but `{}` was requested",
                        e.as_str(),
                        experiment.as_str()
                    ),
                ));
            }
        }
        let raw_alpha = match self.alpha {
            None => experiment.default_alpha(),
            Some(AlphaSpec::One(a)) => vec![a],
            Some(AlphaSpec::Many(v)) => v,
        };
        if raw_alpha.is_empty() {
            return Err(CliError::config("alpha", "must be non-empty"));
        }
        let mut alpha = Vec::with_capacity(raw_alpha.len());
        for (i, a) in raw_alpha.iter().enumerate() {
            let path = if raw_alpha.len() == 1 {
                "alpha".to_string()
            } else {
                format!("alpha[{i}]")
            };
            alpha
                .push(StableExponent::new(*a).map_err(|_| {
                    CliError::config(&path, &format!("must lie in (0,1), got {a}"))
                })?);
        }
        let n_paths = self.n_paths.unwrap_or(experiment.default_paths());
        if n_paths < 2 {
            return Err(CliError::config("n_paths", "must be at least 2"));
        }
        let mut seed = self.seed.unwrap_or(SeedSpec::new(20_240_601, 0));
        if let Some(s) = overrides.seed {
            seed.root_seed = s;
        }
        let output_dir = overrides
            .output_dir
            .clone()
            .or(self.output_dir)
            .unwrap_or_else(|| PathBuf::from("out"));

        let grid_cfg = self.grids.unwrap_or_default();
        let grids = Grids {
            x: grid_cfg.x.points("grids.x")?,
            t: grid_cfg.t.points("grids.t")?,
        };
        grids
            .validate()
            .map_err(|e| CliError::config("grids", &e.to_string()))?;

        let tolerances = self.tolerances.unwrap_or_default();
        for (name, v) in [
            ("tolerances.harmonic", tolerances.harmonic),
            ("tolerances.mc_sigmas", tolerances.mc_sigmas),
            ("tolerances.identity", tolerances.identity),
            ("tolerances.ks_slack", tolerances.ks_slack),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(CliError::config(
                    name,
                    &format!("must be finite and >= 0, got {v}"),
                ));
            }
        }
        if !(tolerances.control_fail_fraction >= 0.0 && tolerances.control_fail_fraction <= 1.0) {
            return Err(CliError::config(
                "tolerances.control_fail_fraction",
                "must be in [0,1]",
            ));
        }
        if !(tolerances.ks_level > 0.0 && tolerances.ks_level < 1.0) {
            return Err(CliError::config("tolerances.ks_level", "must be in (0,1)"));
        }

        let scheme = self.scheme.unwrap_or_default();
        scheme
            .validate()
            .map_err(|e| CliError::config("scheme", &e.to_string()))?;
        let bump = self.bump.unwrap_or_default();
        bump.validate()
            .map_err(|e| CliError::config("bump", &e.to_string()))?;

        let scale_c = self.scale_c.unwrap_or_else(|| vec![1e2, 1e3, 1e4]);
        positive_list("scale_c", &scale_c)?;
        if let Some(i) = scale_c.iter().position(|&c| c < 1.0) {
            return Err(CliError::config(&format!("scale_c[{i}]"), "must be >= 1"));
        }
        let lambda = self.lambda.unwrap_or_else(|| vec![0.5, 1.0, 2.0, 5.0]);
        positive_list("lambda", &lambda)?;
        let xi = self.xi.unwrap_or_else(|| vec![1.0]);
        if let Some(i) = xi.iter().position(|x| !x.is_finite()) {
            return Err(CliError::config(&format!("xi[{i}]"), "must be finite"));
        }
        let u_index = self.u_index.unwrap_or(1.0);
        if !(u_index > 0.0 && u_index.is_finite()) {
            return Err(CliError::config("u_index", "must be positive"));
        }
        let horizon_t = self.horizon_t.unwrap_or(1.0);
        if !(horizon_t > 0.0 && horizon_t.is_finite()) {
            return Err(CliError::config("horizon_t", "must be positive"));
        }
        let kinds = self.kinds.unwrap_or_else(|| TimeChange::ALL.to_vec());
        if kinds.is_empty() {
            return Err(CliError::config("kinds", "must be non-empty"));
        }

        Ok(ExperimentConfig {
            experiment,
            alpha,
            n_paths,
            seed,
            output_dir,
            grids,
            tolerances,
            scheme,
            bump,
            scale_c,
            lambda,
            xi,
            u_index,
            horizon_t,
            kinds,
        })
    }
}

fn toml_path(e: &toml::de::Error) -> String {
    // toml reports unknown fields as "unknown field `name`, expected ..."
    let msg = e.message();
    if let Some(rest) = msg.strip_prefix("unknown field `") {
        if let Some(end) = rest.find('`') {
            return rest[..end].to_string();
        }
    }
    "config".to_string()
}
