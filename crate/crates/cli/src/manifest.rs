//! The run manifest, written next to the CSV outputs on every run that got
//! past configuration, including failed ones.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use ctrw_harmonic::SeedSpec;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::experiments::Check;
use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

/// Column layouts of every CSV the runner can emit, keyed by family.
pub fn csv_schemas() -> BTreeMap<&'static str, &'static str> {
    BTreeMap::from([
        ("ctrw", "v1: alpha,c,comparison,statistic,critical,n_a,n_b"),
        ("identities", "v1: name,alpha,param,residual,bound"),
        (
            "pmp",
            "v1: name,alpha,x_star,t_star,value,bound,gap,levy_tail,threshold",
        ),
        ("q_field", "v1: kind,route,alpha,x,t,value,stderr"),
        ("residual", "v1: kind,alpha,x,t,residual,bound,pass"),
        (
            "symbol",
            "v1: alpha,c,lambda,xi,re,im,stderr,target_re,target_im",
        ),
    ])
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub experiment: &'static str,
    pub code_version: &'static str,
    pub config_hash: String,
    pub seed: SeedSpec,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub csv_schemas: BTreeMap<&'static str, &'static str>,
    pub outputs: Vec<String>,
    pub checks: Vec<Check>,
    pub pass: bool,
    pub error: Option<String>,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// SHA-256 of the resolved configuration as JSON, without the output
/// directory.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let mut value = serde_json::to_value(cfg)?;
    if let Some(map) = value.as_object_mut() {
        map.remove("output_dir");
    }
    let json = serde_json::to_vec(&value)?;
    let digest = Sha256::digest(&json);
    Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
}

impl Manifest {
    pub fn new(cfg: &ExperimentConfig, started_unix: f64) -> Result<Self, CliError> {
        Ok(Self {
            experiment: cfg.experiment.as_str(),
            code_version: env!("CARGO_PKG_VERSION"),
            config_hash: config_hash(cfg)?,
            seed: cfg.seed,
            started_unix,
            finished_unix: started_unix,
            csv_schemas: csv_schemas(),
            outputs: Vec::new(),
            checks: Vec::new(),
            pass: false,
            error: None,
        })
    }

    pub fn finish(&mut self, outputs: Vec<String>, checks: Vec<Check>, error: Option<String>) {
        self.finished_unix = unix_now();
        self.pass = error.is_none() && checks.iter().all(|c| c.pass);
        self.outputs = outputs;
        self.checks = checks;
        self.error = error;
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir)?;
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }
}
