//! Actions on the delegation ratio and the composite reward.

use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::metrics::{f1, ConfusionMatrix};
use crate::trust::{MAX_DELEGATION_RATIO, MIN_DELEGATION_RATIO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    Decrease,
    Maintain,
    Increase,
}

impl Action {
    pub const ALL: [Action; 3] = [Action::Decrease, Action::Maintain, Action::Increase];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn multiplier(self) -> f64 {
        match self {
            Action::Decrease => 0.9,
            Action::Maintain => 1.0,
            Action::Increase => 1.1,
        }
    }
}

pub fn apply_action(ratio: f64, action: Action) -> f64 {
    (ratio * action.multiplier()).clamp(MIN_DELEGATION_RATIO, MAX_DELEGATION_RATIO)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardConfig {
    pub w_f1: f64,
    pub w_step: f64,
    pub w_fn: f64,
    pub collusion_trigger: f64,
    pub collusion_cap: f64,
    pub kappa_max: f64,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            w_f1: 0.7,
            w_step: 0.3,
            w_fn: 3.0,
            collusion_trigger: 2.0,
            collusion_cap: 20.0,
            kappa_max: 10.0,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        let weights = [self.w_f1, self.w_step, self.w_fn, self.collusion_cap];
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(SimError::Config("reward weights must be nonnegative".into()));
        }
        if !(self.kappa_max > 0.0 && self.kappa_max.is_finite()) {
            return Err(SimError::Config("reward.kappa_max must be positive".into()));
        }
        Ok(())
    }
}

/// Operational reward for one round: throughput plus block success.
pub fn step_reward(verified_tx: u64, batch_size: u64, block_created: bool) -> f64 {
    10.0 * verified_tx as f64 / batch_size.max(1) as f64 + if block_created { 50.0 } else { 0.0 }
}

pub fn collusion_penalty(kappa: f64, cfg: &RewardConfig) -> f64 {
    if kappa > cfg.collusion_trigger {
        (2.0 * kappa).min(cfg.collusion_cap)
    } else {
        0.0
    }
}

pub fn compute_reward(cm: &ConfusionMatrix, r_step: f64, kappa: f64, cfg: &RewardConfig) -> f64 {
    reward_from_parts(f1(cm), cm.fn_, r_step, kappa, cfg)
}

pub fn reward_from_parts(f1: f64, false_negatives: u32, r_step: f64, kappa: f64, cfg: &RewardConfig) -> f64 {
    cfg.w_f1 * f1 * 100.0 + cfg.w_step * r_step / 100.0
        - cfg.w_fn * f64::from(false_negatives)
        - collusion_penalty(kappa, cfg)
}
