use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::control::{ControlConfig, ControlMode};
use crate::error::{Error, Result};
use crate::graph::GraphSpec;
use crate::scoring::Scoring;
use crate::selection::StrategySpec;
use crate::sis::RateParams;

/// One compared controller: a mode plus the strategy it runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Arm {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub mode: ControlMode,
    pub strategy: StrategySpec,
}

impl Arm {
    pub fn new(mode: ControlMode, strategy: StrategySpec) -> Self {
        Arm { label: None, mode, strategy }
    }

    pub fn rdra() -> Self {
        Arm::new(ControlMode::Rdra, StrategySpec::offline())
    }

    pub fn sdra(strategy: StrategySpec) -> Self {
        Arm::new(ControlMode::Sdra, strategy)
    }

    pub fn labelled(self, label: impl Into<String>) -> Self {
        Arm { label: Some(label.into()), ..self }
    }

    pub fn label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        match self.mode {
            ControlMode::FullDra => "full_dra".into(),
            ControlMode::Rdra => "rdra".into(),
            ControlMode::Sdra => self.strategy.label(),
        }
    }
}

/// Everything a campaign needs. Every field has a working default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub graph: GraphSpec,
    pub graph_seed: u64,
    pub rates: RateParams,
    pub budget: usize,
    pub initial_infected_fraction: f64,
    pub strategies: Vec<Arm>,
    pub alphas: Vec<f64>,
    pub replicas: usize,
    pub master_seed: u64,
    pub grid_step: f64,
    pub horizon: f64,
    pub max_events: usize,
    pub scoring: Scoring,
    /// Monte Carlo instances per cutoff-table entry.
    pub cutoff_mc: usize,
    pub cutoff_seed: u64,
    /// Cutoff table CSV to preload, if present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff_table: Option<PathBuf>,
    pub out_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            graph: GraphSpec::SmallWorld { n_nodes: 100, m: 4, p_rewire: 0.1 },
            graph_seed: 1,
            rates: RateParams { beta: 0.1, rho: 1.0, delta: 0.0 },
            budget: 5,
            initial_infected_fraction: 0.2,
            strategies: vec![
                Arm::rdra(),
                Arm::sdra(StrategySpec::ccm_star()),
                Arm::sdra(StrategySpec::new(crate::selection::StrategyKind::Ccm)),
                Arm::sdra(StrategySpec::mean()),
                Arm::sdra(StrategySpec::median()),
            ],
            alphas: vec![0.5],
            replicas: 500,
            master_seed: 0,
            grid_step: 0.1,
            horizon: 50.0,
            max_events: 1_000_000,
            scoring: Scoring::Lrie,
            cutoff_mc: 2000,
            cutoff_seed: 0,
            cutoff_table: None,
            out_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn control_config(&self, arm: &Arm, alpha: f64) -> ControlConfig {
        ControlConfig {
            b: self.budget,
            mode: arm.mode,
            strategy: arm.strategy,
            sample_ratio: alpha,
            scoring: self.scoring,
        }
    }

    pub fn initial_infected(&self) -> usize {
        (self.initial_infected_fraction * self.graph.n_nodes() as f64).round() as usize
    }

    /// Grid points `0, dt, 2 dt, ...` up to the horizon.
    pub fn grid(&self) -> Vec<f64> {
        let steps = (self.horizon / self.grid_step + 1e-9).floor() as usize;
        (0..=steps).map(|k| k as f64 * self.grid_step).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.rates.validate()?;
        if self.graph.n_nodes() == 0 {
            return Err(Error::param("graph must have at least one node"));
        }
        if self.replicas == 0 {
            return Err(Error::param("replicas must be at least 1"));
        }
        if !(self.grid_step > 0.0 && self.grid_step.is_finite()) {
            return Err(Error::param("grid_step must be positive"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::param("horizon must be positive and finite"));
        }
        if !(0.0..=1.0).contains(&self.initial_infected_fraction) {
            return Err(Error::param("initial_infected_fraction must be in [0, 1]"));
        }
        if self.max_events == 0 {
            return Err(Error::param("max_events must be at least 1"));
        }
        if self.cutoff_mc < 2 {
            return Err(Error::param("cutoff_mc must be at least 2"));
        }
        if self.strategies.is_empty() {
            return Err(Error::param("no strategies configured"));
        }
        if self.alphas.is_empty() {
            return Err(Error::param("no sample ratios configured"));
        }
        let mut labels = std::collections::HashSet::new();
        for arm in &self.strategies {
            if !labels.insert(arm.label()) {
                return Err(Error::param(format!("duplicate strategy label {}", arm.label())));
            }
            for &alpha in &self.alphas {
                self.control_config(arm, alpha).validate()?;
            }
        }
        Ok(())
    }
}

/// Drops repeated ratios, keeping first occurrences in order.
pub fn dedup_alphas(alphas: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for &a in alphas {
        if !out.contains(&a) {
            out.push(a);
        }
    }
    out
}
