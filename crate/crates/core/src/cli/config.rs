//! Experiment configuration: schema validation, then typed parsing.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ergodic::{Budget, Calibration};
use crate::presets;
use crate::process::{LevySpec, SampleOptions, DEFAULT_SMALL_JUMP_TOLERANCE};

/// The published configuration schema.
pub const SCHEMA: &str = include_str!("../../schema/config.schema.json");

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("configuration violates the schema:\n{}", .0.join("\n"))]
    Schema(Vec<String>),
    #[error("{0}")]
    Semantic(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    MovingAverage,
    NullRecurrentWalk,
    RigidTower,
    FiniteInvariant,
    Composite,
    CompositeWithoutNonergodic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecEntry {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<Preset>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<LevySpec>,
}

impl SpecEntry {
    pub fn resolve(&self) -> crate::Result<LevySpec> {
        if let Some(s) = &self.spec {
            s.validate()?;
            return Ok(s.clone());
        }
        match self.preset.expect("schema requires preset or spec") {
            Preset::MovingAverage => presets::moving_average(),
            Preset::NullRecurrentWalk => presets::null_recurrent_walk(),
            Preset::RigidTower => presets::rigid_tower(),
            Preset::FiniteInvariant => presets::finite_invariant(),
            Preset::Composite => presets::composite(true),
            Preset::CompositeWithoutNonergodic => presets::composite(false),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WindowConfig {
    pub length: usize,
    pub threshold: f64,
    #[serde(default)]
    pub margin: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

fn default_tolerance() -> f64 {
    DEFAULT_SMALL_JUMP_TOLERANCE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BudgetConfig {
    pub replicates: usize,
    pub draws: usize,
    pub max_lag: usize,
    pub lambdas: Vec<f64>,
    pub triple_lambda: f64,
    pub triple_schedule: Vec<(usize, usize)>,
}

impl Default for BudgetConfig {
    fn default() -> Self {
        let b = presets::default_budget();
        Self {
            replicates: 1000,
            draws: 20_000,
            max_lag: 10,
            lambdas: b.lambdas,
            triple_lambda: b.triple_lambda,
            triple_schedule: b.triple_schedule,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TestHooks {
    /// Added to the compensator ∫f dμ when evaluating chaos integrals.
    pub compensator_offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub specs: Vec<SpecEntry>,
    pub window: WindowConfig,
    #[serde(default)]
    pub budget: BudgetConfig,
    #[serde(default)]
    pub calibration: Calibration,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "is_default_hooks")]
    pub test_hooks: TestHooks,
}

fn is_default_hooks(h: &TestHooks) -> bool {
    *h == TestHooks::default()
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let problems = schema_violations(&value);
        if !problems.is_empty() {
            return Err(ConfigError::Schema(problems));
        }
        let cfg: ExperimentConfig = serde_json::from_value(value)?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), ConfigError> {
        let mut seen = HashSet::new();
        for e in &self.specs {
            if !seen.insert(e.name.as_str()) {
                return Err(ConfigError::Semantic(format!(
                    "duplicate spec name {:?}",
                    e.name
                )));
            }
        }
        Ok(())
    }

    /// The command-line seed wins only when the config does not disagree.
    pub fn seed(&self, cli: Option<u64>) -> Result<u64, ConfigError> {
        match (cli, self.seed) {
            (None, _) => Err(ConfigError::Semantic("--seed is required".into())),
            (Some(a), Some(b)) if a != b => Err(ConfigError::Semantic(format!(
                "--seed {a} disagrees with the config seed {b}"
            ))),
            (Some(a), _) => Ok(a),
        }
    }

    pub fn sample_options(&self, seed: u64) -> SampleOptions {
        SampleOptions::new(
            self.window.length,
            self.window.threshold,
            self.budget.replicates,
            seed,
        )
        .with_margin(self.window.margin)
        .with_tolerance(self.window.tolerance)
    }

    pub fn classification_budget(&self) -> Budget {
        Budget {
            replicates: self.budget.replicates,
            length: self.window.length,
            threshold: self.window.threshold,
            margin: self.window.margin,
            max_lag: self.budget.max_lag,
            lambdas: self.budget.lambdas.clone(),
            triple_lambda: self.budget.triple_lambda,
            triple_schedule: self.budget.triple_schedule.clone(),
            tolerance: self.window.tolerance,
        }
    }
}

/// Every schema violation as `path: message`, in document order.
pub fn schema_violations(value: &serde_json::Value) -> Vec<String> {
    let schema: serde_json::Value = serde_json::from_str(SCHEMA).expect("published schema is JSON");
    let validator = jsonschema::validator_for(&schema).expect("published schema compiles");
    validator
        .iter_errors(value)
        .map(|e| {
            let path = e.instance_path().to_string();
            let path = if path.is_empty() {
                "/".to_string()
            } else {
                path
            };
            format!("{path}: {e}")
        })
        .collect()
}
