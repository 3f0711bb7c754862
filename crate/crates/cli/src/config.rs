//! JSON scenario files.

use std::path::Path;

use regretlab_core::freq::SinusoidEnv;
use regretlab_core::{DynamicsModel, DynamicsState, PayoffSignal, Rule};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SCHEMA: &str = "regretlab/scenario/v1";

fn default_step() -> f64 {
    regretlab_core::sim::DEFAULT_STEP
}

fn default_stride() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// Column prefix in the output files; defaults to the rule name.
    #[serde(default)]
    pub name: Option<String>,
    pub rule: Rule,
    #[serde(default)]
    pub initial_state: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreqSweepSpec {
    pub env: SinusoidEnv,
    pub phis: Vec<f64>,
    pub gains: Vec<f64>,
    #[serde(default = "default_points")]
    pub points: usize,
}

fn default_points() -> usize {
    regretlab_core::freq::DEFAULT_QUADRATURE_POINTS
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Outputs {
    #[serde(default)]
    pub trajectory: bool,
    #[serde(default)]
    pub gaps: bool,
    #[serde(default)]
    pub regret: bool,
    #[serde(default)]
    pub plot: bool,
    #[serde(default)]
    pub freq_sweep: Option<FreqSweepSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: String,
    #[serde(default)]
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub signal: Option<PayoffSignal>,
    #[serde(default)]
    pub horizon: f64,
    #[serde(default = "default_step")]
    pub step: f64,
    /// Write every `stride`-th grid row to the trajectory and gap files.
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ScenarioConfig = serde_json::from_str(text).map_err(|e| {
            CliError::config(format!("line {} column {}", e.line(), e.column()), e.to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    /// Whether the config asks for anything that needs a simulation.
    pub fn wants_simulation(&self) -> bool {
        let o = &self.outputs;
        o.trajectory || o.gaps || o.regret || o.plot
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(CliError::config(
                "schema",
                format!("expected `{SCHEMA}`, got `{}`", self.schema),
            ));
        }
        if let Some(sweep) = &self.outputs.freq_sweep {
            sweep
                .env
                .validate()
                .map_err(|e| CliError::config("outputs.freq_sweep.env", e.to_string()))?;
        }
        if !self.wants_simulation() {
            if self.outputs.freq_sweep.is_none() {
                return Err(CliError::config("outputs", "no outputs requested"));
            }
            return Ok(());
        }
        if self.models.is_empty() {
            return Err(CliError::config("models", "at least one model is required"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(CliError::config("horizon", format!("must be positive, got {}", self.horizon)));
        }
        if !(self.step > 0.0 && self.step <= self.horizon) {
            return Err(CliError::config("step", format!("must satisfy 0 < step <= horizon, got {}", self.step)));
        }
        if self.stride == 0 {
            return Err(CliError::config("stride", "must be at least 1"));
        }
        let signal = self
            .signal
            .as_ref()
            .ok_or_else(|| CliError::config("signal", "a payoff signal is required"))?;
        signal
            .validate()
            .map_err(|e| CliError::config("signal", e.to_string()))?;
        let mut names = std::collections::BTreeSet::new();
        for (i, spec) in self.models.iter().enumerate() {
            spec.build(signal.dim())
                .map_err(|e| CliError::config(format!("models[{i}]"), e.to_string()))?;
            if !names.insert(spec.label()) {
                return Err(CliError::config(
                    format!("models[{i}].name"),
                    format!("duplicate model name `{}`", spec.label()),
                ));
            }
        }
        Ok(())
    }

    pub fn built_models(&self) -> Result<Vec<(String, DynamicsModel)>> {
        let n = self.signal.as_ref().map_or(0, PayoffSignal::dim);
        self.models
            .iter()
            .enumerate()
            .map(|(i, spec)| {
                spec.build(n)
                    .map(|m| (spec.label(), m))
                    .map_err(|e| CliError::config(format!("models[{i}]"), e.to_string()))
            })
            .collect()
    }
}

impl ModelSpec {
    pub fn new(rule: Rule) -> Self {
        Self {
            name: None,
            rule,
            initial_state: None,
        }
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| self.rule.kind().to_string())
    }

    pub fn build(&self, n: usize) -> regretlab_core::Result<DynamicsModel> {
        let model = DynamicsModel::new(self.rule.clone(), n)?;
        match &self.initial_state {
            Some(state) => model.with_initial_state(DynamicsState(state.clone())),
            None => Ok(model),
        }
    }
}
