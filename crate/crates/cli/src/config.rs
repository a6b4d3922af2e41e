use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use riskdp::{InvestmentParams, LqParams, MarkovModel, Problem, RiskSpec, SolveSettings, TabularDocument};

use crate::Failure;

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    Investment(InvestmentParams),
    Lq(LqParams),
    /// Path to a tabular model document, relative to the config file.
    Tabular(PathBuf),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub risk: RiskSpec,
    pub discount: f64,
    pub epsilon: f64,
    pub tolerance: f64,
    pub max_sweeps: usize,
    #[serde(default)]
    pub horizon: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    pub output_dir: PathBuf,
}

/// A validated configuration with its model built.
pub struct Loaded {
    pub config: RunConfig,
    pub problem: Problem,
    pub model: MarkovModel,
}

impl Loaded {
    pub fn settings(&self) -> SolveSettings {
        SolveSettings {
            epsilon: self.config.epsilon,
            tolerance: self.config.tolerance,
            max_sweeps: self.config.max_sweeps,
        }
    }
}

pub fn load(path: &Path) -> Result<Loaded, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Io(format!("cannot read config {}: {e}", path.display())))?;
    let mut config: RunConfig = serde_json::from_str(&text)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    validate(&config)?;
    let base = path.parent().unwrap_or(Path::new("."));
    if config.output_dir.is_relative() {
        config.output_dir = base.join(&config.output_dir);
    }
    let problem = match &config.model {
        ModelConfig::Investment(p) => Problem::Investment(p.clone()),
        ModelConfig::Lq(p) => Problem::Lq(p.clone()),
        ModelConfig::Tabular(rel) => {
            let file = base.join(rel);
            let text = fs::read_to_string(&file)
                .map_err(|e| Failure::Io(format!("cannot read tabular model {}: {e}", file.display())))?;
            let doc: TabularDocument = serde_json::from_str(&text)
                .map_err(|e| Failure::Config(format!("{}: {e}", file.display())))?;
            Problem::Tabular(doc)
        }
    };
    let model = problem
        .build(config.discount)
        .map_err(|e| Failure::Config(format!("model: {e}")))?;
    Ok(Loaded { config, problem, model })
}

fn validate(c: &RunConfig) -> Result<(), Failure> {
    let fail = |msg: &str| Err(Failure::Config(msg.to_string()));
    if !(c.epsilon > 0.0 && c.epsilon.is_finite()) {
        return fail("epsilon must be positive");
    }
    if !(c.tolerance > 0.0 && c.tolerance.is_finite()) {
        return fail("tolerance must be positive");
    }
    if c.max_sweeps == 0 {
        return fail("max_sweeps must be at least 1");
    }
    if !(c.discount > 0.0 && c.discount < 1.0) {
        return fail("discount must lie in (0, 1)");
    }
    c.risk
        .validate()
        .map_err(|e| Failure::Config(format!("risk: {e}")))
}
