//! Adversary families as seedable state machines.
//!
//! Attacks never write trust scores directly. Each step they return a list of
//! perturbations in evidence space (extra alpha or beta mass), markers for
//! conflicting votes, and observation corruption. Only malicious nodes that
//! passed admission control this step act.

mod aaa;
mod bfi;
mod cra;
mod nma;
mod tdp;

pub use aaa::{AdaptiveAttack, AaaStrategy};
pub use bfi::{BfiPhase, ByzantineAttack};
pub use cra::CollusionAttack;
pub use nma::NoiseAttack;
pub use tdp::SleeperAttack;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::consensus::{NetworkState, Vote};
use crate::error::{Result, SimError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackConfig {
    /// Evidence mass that one unit of attack strength maps to.
    pub base_evidence: f64,
    pub nma_p_attack: f64,
    pub nma_noise: f64,
    pub cra_intensity: f64,
    pub cra_period: usize,
    pub cra_target_ratio: f64,
    pub aaa_strategy_count: usize,
    pub aaa_eps_start: f64,
    pub aaa_eps_decay: f64,
    pub aaa_factor: f64,
    pub aaa_burst_period: usize,
    pub bfi_equivocation_rate: f64,
    pub bfi_recovery_equivocation_rate: f64,
    pub bfi_detection: f64,
    pub bfi_sybil_k: usize,
    pub bfi_window: usize,
    pub bfi_aggressive_above: f64,
    pub bfi_recovery_below: f64,
    pub tdp_activation_episode: usize,
    pub tdp_intensity: f64,
    pub tdp_target_ratio: f64,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            base_evidence: 1.0,
            nma_p_attack: 0.5,
            nma_noise: 0.5,
            cra_intensity: 0.85,
            cra_period: 2,
            cra_target_ratio: 0.25,
            aaa_strategy_count: 5,
            aaa_eps_start: 1.0,
            aaa_eps_decay: 0.98,
            aaa_factor: 0.12,
            aaa_burst_period: 5,
            bfi_equivocation_rate: 0.90,
            bfi_recovery_equivocation_rate: 0.2,
            bfi_detection: 0.5,
            bfi_sybil_k: 4,
            bfi_window: 6,
            bfi_aggressive_above: 0.6,
            bfi_recovery_below: 0.4,
            tdp_activation_episode: 25,
            tdp_intensity: 0.75,
            tdp_target_ratio: 0.35,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = [
            ("nma_p_attack", self.nma_p_attack),
            ("nma_noise", self.nma_noise),
            ("cra_intensity", self.cra_intensity),
            ("cra_target_ratio", self.cra_target_ratio),
            ("aaa_eps_start", self.aaa_eps_start),
            ("aaa_eps_decay", self.aaa_eps_decay),
            ("aaa_factor", self.aaa_factor),
            ("bfi_equivocation_rate", self.bfi_equivocation_rate),
            ("bfi_recovery_equivocation_rate", self.bfi_recovery_equivocation_rate),
            ("bfi_detection", self.bfi_detection),
            ("bfi_aggressive_above", self.bfi_aggressive_above),
            ("bfi_recovery_below", self.bfi_recovery_below),
            ("tdp_intensity", self.tdp_intensity),
            ("tdp_target_ratio", self.tdp_target_ratio),
        ];
        if let Some((name, v)) = unit.iter().find(|(_, v)| !(0.0..=1.0).contains(v)) {
            return Err(SimError::Config(format!("attack.{name} = {v} outside [0, 1]")));
        }
        let periods = [
            ("cra_period", self.cra_period),
            ("aaa_burst_period", self.aaa_burst_period),
            ("bfi_window", self.bfi_window),
            ("bfi_sybil_k", self.bfi_sybil_k),
            ("aaa_strategy_count", self.aaa_strategy_count),
        ];
        if let Some((name, _)) = periods.iter().find(|(_, v)| *v == 0) {
            return Err(SimError::Config(format!("attack.{name} must be at least 1")));
        }
        if self.aaa_strategy_count > AaaStrategy::ALL.len() {
            return Err(SimError::Config(format!(
                "attack.aaa_strategy_count exceeds {}",
                AaaStrategy::ALL.len()
            )));
        }
        if !(self.base_evidence > 0.0 && self.base_evidence.is_finite()) {
            return Err(SimError::Config("attack.base_evidence must be positive".into()));
        }
        if self.bfi_recovery_below > self.bfi_aggressive_above {
            return Err(SimError::Config("BFI phase thresholds are inverted".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum PerturbationKind {
    BoostAlpha(f64),
    PenalizeBeta(f64),
    /// Records that the target cast a conflicting vote this step.
    MarkConflicting,
    /// Replaces the target's trust by `value` in the masked state features.
    CorruptObservation { mask: u16, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Perturbation {
    pub target: usize,
    pub kind: PerturbationKind,
    pub source: Option<usize>,
}

impl Perturbation {
    pub fn boost(target: usize, magnitude: f64) -> Self {
        Self {
            target,
            kind: PerturbationKind::BoostAlpha(magnitude),
            source: None,
        }
    }

    pub fn penalize(target: usize, magnitude: f64) -> Self {
        Self {
            target,
            kind: PerturbationKind::PenalizeBeta(magnitude),
            source: None,
        }
    }

    pub fn from_node(mut self, source: usize) -> Self {
        self.source = Some(source);
        self
    }

    pub fn magnitude(&self) -> Option<f64> {
        match self.kind {
            PerturbationKind::BoostAlpha(m) | PerturbationKind::PenalizeBeta(m) => Some(m),
            _ => None,
        }
    }
}

/// What an attack can see during one step.
#[derive(Debug, Clone, Copy)]
pub struct AttackContext<'a> {
    pub net: &'a NetworkState,
    /// Admission decision per node for this step.
    pub admitted: &'a [bool],
    pub delegates: &'a [usize],
    /// 1-based step within the episode.
    pub step: usize,
    /// 1-based episode.
    pub episode: usize,
}

impl AttackContext<'_> {
    /// Malicious nodes allowed to participate this step.
    pub fn active_malicious(&self) -> Vec<usize> {
        self.net.malicious().filter(|&i| self.admitted[i]).collect()
    }

    pub fn honest(&self) -> Vec<usize> {
        self.net.honest().collect()
    }

    /// Honest nodes sorted by descending trust, ties by index.
    pub fn honest_by_trust(&self) -> Vec<usize> {
        let mut h = self.honest();
        h.sort_by(|&a, &b| {
            self.net.profiles[b]
                .score()
                .total_cmp(&self.net.profiles[a].score())
                .then(a.cmp(&b))
        });
        h
    }

    pub fn top_honest(&self, fraction: f64) -> Vec<usize> {
        let h = self.honest_by_trust();
        let count = ((fraction * h.len() as f64) - 1e-9).ceil().max(0.0) as usize;
        h.into_iter().take(count).collect()
    }

    pub fn mean_malicious_trust(&self) -> Option<f64> {
        self.net.class_means().1
    }
}

pub trait Attack: Send {
    fn name(&self) -> &'static str;

    /// Called once before each episode's first step.
    fn begin_episode(&mut self, _net: &NetworkState, _episode: usize, _rng: &mut dyn RngCore) {}

    /// Vote cast by malicious delegate `node` in this step's round.
    fn vote(&mut self, _ctx: &AttackContext<'_>, _node: usize, _rng: &mut dyn RngCore) -> Vote {
        Vote::Invalid
    }

    /// Perturbations emitted after the consensus round.
    fn step(&mut self, ctx: &AttackContext<'_>, rng: &mut dyn RngCore) -> Vec<Perturbation>;

    /// Called after perturbations are applied; adaptive attacks learn here.
    fn after_step(&mut self, _net: &NetworkState) {}

    /// Probability that one conflicting vote is caught as malicious.
    fn equivocation_detection(&self) -> f64 {
        0.0
    }
}

/// Malicious nodes simply vote against every block.
#[derive(Debug, Default)]
pub struct NoAttack;

impl Attack for NoAttack {
    fn name(&self) -> &'static str {
        "none"
    }

    fn step(&mut self, _ctx: &AttackContext<'_>, _rng: &mut dyn RngCore) -> Vec<Perturbation> {
        Vec::new()
    }
}

type AttackCtor = fn(&AttackConfig) -> Box<dyn Attack>;

const ATTACKS: &[(&str, AttackCtor)] = &[
    ("none", |_| Box::new(NoAttack)),
    ("nma", |c| Box::new(NoiseAttack::new(*c))),
    ("cra", |c| Box::new(CollusionAttack::new(*c))),
    ("aaa", |c| Box::new(AdaptiveAttack::new(*c))),
    ("bfi", |c| Box::new(ByzantineAttack::new(*c))),
    ("tdp", |c| Box::new(SleeperAttack::new(*c))),
];

/// Attack families evaluated in the experiment matrix.
pub const MATRIX_ATTACKS: [&str; 5] = ["nma", "cra", "aaa", "bfi", "tdp"];

pub fn attack_names() -> impl Iterator<Item = &'static str> {
    ATTACKS.iter().map(|(n, _)| *n)
}

pub fn build_attack(name: &str, cfg: &AttackConfig) -> Result<Box<dyn Attack>> {
    cfg.validate()?;
    ATTACKS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, ctor)| ctor(cfg))
        .ok_or_else(|| SimError::UnknownStrategy {
            kind: "attack",
            name: name.to_string(),
        })
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_knows_every_family() {
        let cfg = AttackConfig::default();
        for name in MATRIX_ATTACKS.iter().chain(["none"].iter()) {
            assert_eq!(build_attack(name, &cfg).unwrap().name(), *name);
        }
        assert!(build_attack("sybil-storm", &cfg).is_err());
    }

    #[test]
    fn config_rejects_bad_values() {
        let zero_period = AttackConfig {
            cra_period: 0,
            ..AttackConfig::default()
        };
        assert!(zero_period.validate().is_err());
        let bad_probability = AttackConfig {
            nma_p_attack: 1.5,
            ..AttackConfig::default()
        };
        assert!(bad_probability.validate().is_err());
        assert!(AttackConfig::default().validate().is_ok());
    }

    #[test]
    fn top_honest_counts() {
        let n = testutil::standard();
        let admitted = vec![true; 16];
        let ctx = AttackContext {
            net: &n,
            admitted: &admitted,
            delegates: &[],
            step: 1,
            episode: 1,
        };
        assert_eq!(ctx.top_honest(0.35).len(), 4);
        assert_eq!(ctx.top_honest(0.25).len(), 3);
        assert_eq!(ctx.top_honest(0.35)[0], 15);
    }
}
