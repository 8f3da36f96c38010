use anyhow::{bail, Context, Result};
use arps_core::estimator::Objective;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

/// A full experiment: environment, search procedure and run settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    #[serde(default = "one")]
    pub repetitions: usize,
    /// Result stream; records are appended.
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Record wall-clock times; disable for byte-identical reruns.
    #[serde(default = "yes")]
    pub timing: bool,
    pub env: EnvSpec,
    #[serde(default)]
    pub search: SearchSpec,
}

/// Environment generator name plus its own parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub kind: String,
    #[serde(flatten)]
    pub params: toml::Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Basic,
    Adaptive,
    RankAdaptive,
}

impl Mode {
    pub fn strategy_name(self) -> &'static str {
        match self {
            Mode::Basic => "basic",
            Mode::Adaptive => "adaptive",
            Mode::RankAdaptive => "rank_adaptive",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SearchSpec {
    pub mode: Mode,
    /// Rank `d` assumed by fixed-rank searches.
    pub rank: usize,
    /// Episode budget `n`.
    pub episodes: usize,
    pub class_size: usize,
    pub delta: f64,
    pub restarts: usize,
    pub iterations: usize,
    /// Fit objective used inside rank-adaptive search.
    pub inner: Objective,
    pub residual_cap: Option<f64>,
}

impl Default for SearchSpec {
    fn default() -> Self {
        Self {
            mode: Mode::Basic,
            rank: 1,
            episodes: 10_000,
            class_size: 10,
            delta: 0.1,
            restarts: 16,
            iterations: 400,
            inner: Objective::BasicMinimaxResidual,
            residual_cap: None,
        }
    }
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("invalid experiment config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.search;
        if self.repetitions == 0 {
            bail!("repetitions must be positive");
        }
        if s.episodes == 0 || s.class_size == 0 || s.restarts == 0 || s.iterations == 0 {
            bail!("episodes, class_size, restarts and iterations must be positive");
        }
        if s.mode != Mode::RankAdaptive && s.rank == 0 {
            bail!("rank must be positive");
        }
        if !(s.delta > 0.0 && s.delta < 1.0) {
            bail!("delta must lie in (0, 1)");
        }
        if let Some(cap) = s.residual_cap {
            if !(cap >= 0.0) {
                bail!("residual_cap must be non-negative");
            }
        }
        Ok(())
    }
}
