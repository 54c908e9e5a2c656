use std::collections::BTreeMap;

use gfpk_core::{BoundReport, FisherReport, FixedPointTrace, ResidualSummary};
use serde::{Deserialize, Serialize};

use crate::config::{Mode, RunConfig};

/// A pass/fail assertion with the numbers behind it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    /// `value ≤ tolerance`.
    pub fn at_most(name: impl Into<String>, value: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            pass: value <= tolerance,
            value,
            tolerance,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub iterations: usize,
    pub final_residual: Option<f64>,
    pub all_in_schauder_set: bool,
    pub schauder_bound: f64,
}

impl From<&FixedPointTrace> for TraceSummary {
    fn from(t: &FixedPointTrace) -> Self {
        TraceSummary {
            iterations: t.iterations(),
            final_residual: t.final_residual(),
            all_in_schauder_set: t.records.iter().all(|r| r.in_schauder_set),
            schauder_bound: t.schauder_bound,
        }
    }
}

/// Everything needed to reproduce and audit a run. All fields except
/// `timings` are deterministic given the config and seed.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: Mode,
    pub version: String,
    /// SHA-256 of the canonical JSON form of `config`.
    pub config_hash: String,
    pub seed: u64,
    pub config: RunConfig,
    /// Artifact name to file name inside the output directory.
    pub artifacts: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition_estimate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residuals: Option<ResidualSummary>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bounds: Vec<BoundReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fisher: Option<FisherReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceSummary>,
    pub checks: Vec<Check>,
    pub pass: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn new(mode: Mode, config: &RunConfig, seed: u64) -> Self {
        use sha2::{Digest, Sha256};
        let canonical = serde_json::to_string(config).expect("config serializes");
        RunReport {
            mode,
            version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: hex::encode(Sha256::digest(canonical.as_bytes())),
            seed,
            config: config.clone(),
            artifacts: BTreeMap::new(),
            condition_estimate: None,
            residuals: None,
            bounds: Vec::new(),
            fisher: None,
            trace: None,
            checks: Vec::new(),
            pass: false,
            error: None,
            timings: BTreeMap::new(),
        }
    }

    /// Every asserted item: residual suite, bounds with a verdict, checks.
    pub fn all_asserted_pass(&self) -> bool {
        self.residuals.as_ref().is_none_or(|r| r.pass)
            && self.bounds.iter().all(|b| b.passed())
            && self.checks.iter().all(|c| c.pass)
    }
}
