//! Experiment configuration: one TOML file with per-module sections.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::abac::{Policy, DEFAULT_POLICY};
use crate::agents::AgentHyperparams;
use crate::attacks::AttackConfig;
use crate::consensus::ConsensusConfig;
use crate::env::{EnvConfig, RewardConfig};
use crate::error::{Result, SimError};
use crate::trust::TrustUpdateConfig;

pub const DEFAULT_EPISODES: usize = 50;
pub const TDP_EPISODES: usize = 100;
pub const DEFAULT_SEEDS: [u64; 3] = [42, 43, 44];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    pub agent: String,
    pub attack: String,
    /// Unset means 50, or 100 for the dormancy attack.
    pub episodes: Option<usize>,
    pub seed: u64,
    pub out: PathBuf,
    /// Extend short dormancy runs so the activation phase is observed.
    pub tdp_extend: bool,
    /// Seeds used in matrix mode.
    pub seeds: Vec<u64>,
    /// Number of final episodes aggregated in summaries.
    pub tail: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            agent: "drl".into(),
            attack: "bfi".into(),
            episodes: None,
            seed: 42,
            out: PathBuf::from("runs"),
            tdp_extend: true,
            seeds: DEFAULT_SEEDS.to_vec(),
            tail: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AbacSection {
    /// Inline policy expression; ignored when `policy_file` is set.
    pub policy: String,
    pub policy_file: Option<PathBuf>,
    pub backend: String,
}

impl Default for AbacSection {
    fn default() -> Self {
        Self {
            policy: DEFAULT_POLICY.into(),
            policy_file: None,
            backend: "simulated".into(),
        }
    }
}

impl AbacSection {
    pub fn load_policy(&self) -> Result<Policy> {
        match &self.policy_file {
            Some(path) => Policy::parse(&fs::read_to_string(path)?),
            None => Policy::parse(&self.policy),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub network: EnvConfig,
    pub trust: TrustUpdateConfig,
    pub consensus: ConsensusConfig,
    pub attack: AttackConfig,
    pub reward: RewardConfig,
    pub agent: AgentHyperparams,
    pub abac: AbacSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| SimError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.experiment.episodes == Some(0) {
            return Err(SimError::Config("episodes must be at least 1".into()));
        }
        if self.experiment.tail == 0 {
            return Err(SimError::Config("tail must be at least 1".into()));
        }
        self.network.validate()?;
        self.trust.validate()?;
        self.consensus.validate()?;
        self.attack.validate()?;
        self.reward.validate()?;
        self.agent.validate()?;
        self.abac.load_policy()?;
        Ok(())
    }

    /// Fills in the episode count; returns any warnings raised on the way.
    pub fn resolve(&mut self) -> Result<Vec<String>> {
        self.validate()?;
        let mut warnings = Vec::new();
        let is_tdp = self.experiment.attack == "tdp";
        let default = if is_tdp { TDP_EPISODES } else { DEFAULT_EPISODES };
        let episodes = self.experiment.episodes.unwrap_or(default);
        let episodes = if is_tdp && episodes < TDP_EPISODES && self.experiment.tdp_extend {
            warnings.push(format!(
                "tdp run with {episodes} episodes extended to {TDP_EPISODES} so the activated phase is observed"
            ));
            TDP_EPISODES
        } else {
            episodes
        };
        self.experiment.episodes = Some(episodes);
        Ok(warnings)
    }

    pub fn episodes(&self) -> usize {
        self.experiment.episodes.unwrap_or(DEFAULT_EPISODES)
    }
}
