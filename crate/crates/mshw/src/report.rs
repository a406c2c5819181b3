//! Experiment report: scaled marginals, comparison statistics, check
//! outcomes, and provenance. Serialization is deterministic, so identical
//! plans and seeds give byte-identical reports.

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::PlanConfig;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct KsEntry {
    pub statistic: f64,
    pub p_value: f64,
}

impl From<mshw_core::stats::KsResult> for KsEntry {
    fn from(r: mshw_core::stats::KsResult) -> Self {
        KsEntry { statistic: r.statistic, p_value: r.p_value }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// Scaled marginal samples at one comparison epoch.
#[derive(Debug, Clone, Serialize)]
pub struct MarginalBlock {
    pub t: f64,
    pub x: Vec<f64>,
    /// One sample vector per phase.
    pub z: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SystemReport {
    pub n: usize,
    pub replications: usize,
    pub marginals: Vec<MarginalBlock>,
    /// KS distance to the limit marginal, per comparison epoch.
    pub ks_x: Vec<KsEntry>,
    /// Per epoch, per phase.
    pub ks_z: Vec<Vec<KsEntry>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ssc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dai_he: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub aq: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub idle: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vw_ks: Option<KsEntry>,
    /// Fraction of replications whose fluid-scaled path stays within the
    /// deviation band on the tail window.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fluid_within: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitMarginals {
    pub replications: usize,
    pub dt: f64,
    pub marginals: Vec<MarginalBlock>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario_name: Option<String>,
    pub regime: String,
    pub n_list: Vec<usize>,
    pub replications: usize,
    pub horizon: f64,
    pub grid_dt: f64,
    pub comparison_times: Vec<f64>,
    pub per_n: Vec<SystemReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub limit: Option<LimitMarginals>,
    pub checks: Vec<CheckOutcome>,
    pub pass: bool,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }
}

/// SHA-256 of the canonical (parsed, re-serialized) plan.
pub fn config_hash(plan: &PlanConfig) -> String {
    let canonical = serde_json::to_string(plan).expect("plan serialization cannot fail");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for byte in digest {
        out.push_str(&format!("{byte:02x}"));
    }
    out
}
