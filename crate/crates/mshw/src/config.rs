//! Scenario and experiment-plan configuration files.
//!
//! Configs are JSON with fixed schemas; unknown keys are rejected, and law
//! parameters that do not belong to the declared family are rejected as well.

use mshw_core::des::{ArrivalLaw, PatienceLaw, Regime, Scenario};
use mshw_core::linalg::SquareMat;
use mshw_core::phase_type::PhaseType;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("unknown {what} family '{family}'")]
    UnknownFamily { what: &'static str, family: String },
    #[error("{family} family requires field '{field}'")]
    MissingField { family: &'static str, field: &'static str },
    #[error("field '{field}' does not apply to family '{family}'")]
    UnexpectedField { family: String, field: &'static str },
    #[error("invalid service law: {0}")]
    PhaseType(#[from] mshw_core::phase_type::PhaseTypeError),
    #[error("invalid routing matrix: {0}")]
    Routing(#[from] mshw_core::linalg::LinalgError),
    #[error("invalid scenario: {0}")]
    Scenario(#[from] mshw_core::des::ScenarioError),
    #[error("invalid plan: {0}")]
    Plan(String),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceConfig {
    pub p: Vec<f64>,
    pub nu: Vec<f64>,
    pub routing: Vec<Vec<f64>>,
}

impl ServiceConfig {
    pub fn build(&self) -> Result<PhaseType, ConfigError> {
        let routing = SquareMat::from_rows(&self.routing)?;
        Ok(PhaseType::new(self.p.clone(), self.nu.clone(), routing)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArrivalConfig {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scv: Option<f64>,
}

impl ArrivalConfig {
    pub fn exponential() -> Self {
        ArrivalConfig { family: "exponential".into(), k: None, q: None, r1: None, r2: None, scv: None }
    }

    fn reject_unused(&self, allowed: &[&'static str]) -> Result<(), ConfigError> {
        let fields: [(&'static str, bool); 5] = [
            ("k", self.k.is_some()),
            ("q", self.q.is_some()),
            ("r1", self.r1.is_some()),
            ("r2", self.r2.is_some()),
            ("scv", self.scv.is_some()),
        ];
        for (name, present) in fields {
            if present && !allowed.contains(&name) {
                return Err(ConfigError::UnexpectedField {
                    family: self.family.clone(),
                    field: name,
                });
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<ArrivalLaw, ConfigError> {
        match self.family.as_str() {
            "exponential" => {
                self.reject_unused(&[])?;
                Ok(ArrivalLaw::Exponential)
            }
            "deterministic" => {
                self.reject_unused(&[])?;
                Ok(ArrivalLaw::Deterministic)
            }
            "erlang" => {
                self.reject_unused(&["k"])?;
                let k = self.k.ok_or(ConfigError::MissingField { family: "erlang", field: "k" })?;
                Ok(ArrivalLaw::erlang(k)?)
            }
            "hyperexp2" => {
                self.reject_unused(&["q", "r1", "r2"])?;
                let q = self.q.ok_or(ConfigError::MissingField { family: "hyperexp2", field: "q" })?;
                let r1 =
                    self.r1.ok_or(ConfigError::MissingField { family: "hyperexp2", field: "r1" })?;
                let r2 =
                    self.r2.ok_or(ConfigError::MissingField { family: "hyperexp2", field: "r2" })?;
                Ok(ArrivalLaw::hyperexp2(q, r1, r2)?)
            }
            "lognormal" => {
                self.reject_unused(&["scv"])?;
                let scv =
                    self.scv.ok_or(ConfigError::MissingField { family: "lognormal", field: "scv" })?;
                Ok(ArrivalLaw::lognormal_from_scv(scv)?)
            }
            other => {
                Err(ConfigError::UnknownFamily { what: "arrival", family: other.to_string() })
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PatienceConfig {
    pub family: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shape: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r2: Option<f64>,
}

impl PatienceConfig {
    pub fn exponential(alpha: f64) -> Self {
        PatienceConfig {
            family: "exponential".into(),
            alpha: Some(alpha),
            value: None,
            upper: None,
            shape: None,
            scale: None,
            q: None,
            r1: None,
            r2: None,
        }
    }

    fn reject_unused(&self, allowed: &[&'static str]) -> Result<(), ConfigError> {
        let fields: [(&'static str, bool); 8] = [
            ("alpha", self.alpha.is_some()),
            ("value", self.value.is_some()),
            ("upper", self.upper.is_some()),
            ("shape", self.shape.is_some()),
            ("scale", self.scale.is_some()),
            ("q", self.q.is_some()),
            ("r1", self.r1.is_some()),
            ("r2", self.r2.is_some()),
        ];
        for (name, present) in fields {
            if present && !allowed.contains(&name) {
                return Err(ConfigError::UnexpectedField {
                    family: self.family.clone(),
                    field: name,
                });
            }
        }
        Ok(())
    }

    pub fn build(&self) -> Result<PatienceLaw, ConfigError> {
        match self.family.as_str() {
            "exponential" => {
                self.reject_unused(&["alpha"])?;
                let alpha = self
                    .alpha
                    .ok_or(ConfigError::MissingField { family: "exponential", field: "alpha" })?;
                Ok(PatienceLaw::exponential(alpha)?)
            }
            "deterministic" => {
                self.reject_unused(&["value"])?;
                let value = self
                    .value
                    .ok_or(ConfigError::MissingField { family: "deterministic", field: "value" })?;
                Ok(PatienceLaw::deterministic(value)?)
            }
            "uniform" => {
                self.reject_unused(&["upper"])?;
                let upper = self
                    .upper
                    .ok_or(ConfigError::MissingField { family: "uniform", field: "upper" })?;
                Ok(PatienceLaw::uniform(upper)?)
            }
            "weibull" => {
                self.reject_unused(&["shape", "scale"])?;
                let shape = self
                    .shape
                    .ok_or(ConfigError::MissingField { family: "weibull", field: "shape" })?;
                let scale = self
                    .scale
                    .ok_or(ConfigError::MissingField { family: "weibull", field: "scale" })?;
                Ok(PatienceLaw::weibull(shape, scale)?)
            }
            "hyperexp2" => {
                self.reject_unused(&["q", "r1", "r2"])?;
                let q = self.q.ok_or(ConfigError::MissingField { family: "hyperexp2", field: "q" })?;
                let r1 =
                    self.r1.ok_or(ConfigError::MissingField { family: "hyperexp2", field: "r1" })?;
                let r2 =
                    self.r2.ok_or(ConfigError::MissingField { family: "hyperexp2", field: "r2" })?;
                Ok(PatienceLaw::hyperexp2(q, r1, r2)?)
            }
            other => {
                Err(ConfigError::UnknownFamily { what: "patience", family: other.to_string() })
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub service: ServiceConfig,
    pub arrival: ArrivalConfig,
    pub patience: PatienceConfig,
    pub lambda: f64,
    pub beta: f64,
    pub regime: String,
}

impl ScenarioConfig {
    pub fn build(&self) -> Result<Scenario, ConfigError> {
        let regime = match self.regime.as_str() {
            "critical" => Regime::Critical,
            "overloaded" => Regime::Overloaded,
            other => {
                return Err(ConfigError::UnknownFamily { what: "regime", family: other.to_string() })
            }
        };
        let ph = self.service.build()?;
        let arrival = self.arrival.build()?;
        let patience = self.patience.build()?;
        Ok(Scenario::new(ph, arrival, patience, self.lambda, self.beta, regime)?)
    }
}

/// Per-check toggles; the Kolmogorov–Smirnov marginal comparison is on by
/// default, everything else is opt-in.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChecksConfig {
    pub ks: bool,
    pub ssc: bool,
    pub vw: bool,
    pub aq: bool,
    pub dai_he: bool,
    pub idle: bool,
    pub fluid: bool,
}

impl Default for ChecksConfig {
    fn default() -> Self {
        ChecksConfig { ks: true, ssc: false, vw: false, aq: false, dai_he: false, idle: false, fluid: false }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    pub scenario: ScenarioConfig,
    pub n_list: Vec<usize>,
    pub replications: usize,
    pub horizon: f64,
    pub grid_dt: f64,
    /// Comparison epochs `t*` for marginals.
    pub comparison_times: Vec<f64>,
    pub seed: u64,
    #[serde(default)]
    pub checks: ChecksConfig,
    /// Grid step for limit-path sampling (default 1e-3).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit_dt: Option<f64>,
    /// Limit-sample count (default: same as `replications`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit_replications: Option<usize>,
    /// `original` (default) or `perturbed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discipline: Option<String>,
    /// `stationary_phase_mix` (default) or `empty`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<String>,
    /// Export this many raw replication paths per system size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dump_paths: Option<usize>,
}

impl PlanConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_list.is_empty() {
            return Err(ConfigError::Plan("n_list must not be empty".into()));
        }
        if !self.n_list.windows(2).all(|w| w[0] < w[1]) {
            return Err(ConfigError::Plan("n_list must be strictly increasing".into()));
        }
        if !(self.horizon > 0.0) || !(self.grid_dt > 0.0) {
            return Err(ConfigError::Plan("horizon and grid_dt must be positive".into()));
        }
        if self.comparison_times.is_empty() {
            return Err(ConfigError::Plan("comparison_times must not be empty".into()));
        }
        if self.comparison_times.iter().any(|&t| t < 0.0 || t > self.horizon) {
            return Err(ConfigError::Plan("comparison times must lie in [0, horizon]".into()));
        }
        if let Some(dt) = self.limit_dt {
            if !(dt > 0.0) {
                return Err(ConfigError::Plan("limit_dt must be positive".into()));
            }
        }
        match self.discipline.as_deref() {
            None | Some("original") | Some("perturbed") => {}
            Some(other) => {
                return Err(ConfigError::Plan(format!("unknown discipline '{other}'")))
            }
        }
        match self.initial.as_deref() {
            None | Some("stationary_phase_mix") | Some("empty") => {}
            Some(other) => return Err(ConfigError::Plan(format!("unknown initial '{other}'"))),
        }
        Ok(())
    }
}

pub fn load_scenario(path: &std::path::Path) -> Result<ScenarioConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

pub fn load_plan(path: &std::path::Path) -> Result<PlanConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let plan: PlanConfig = serde_json::from_str(&text)?;
    plan.validate()?;
    Ok(plan)
}
