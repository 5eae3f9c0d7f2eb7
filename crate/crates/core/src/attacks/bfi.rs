//! Byzantine fault injection: equivocation, Sybil-amplified endorsements,
//! windowed coordinated strikes, and an eclipsed honest node.

use rand::{Rng, RngCore};
use serde::Serialize;

use super::{Attack, AttackConfig, AttackContext, Perturbation, PerturbationKind};
use crate::consensus::{NetworkState, Vote};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BfiPhase {
    Aggressive,
    Strategic,
    Recovery,
}

/// State features the eclipse rewrites: the trust distribution statistics.
pub const ECLIPSE_MASK: u16 = 0b0000_1100_0111_1111;

#[derive(Debug)]
pub struct ByzantineAttack {
    cfg: AttackConfig,
    phase: BfiPhase,
    eclipse_target: Option<usize>,
    equivocated: Vec<usize>,
}

impl ByzantineAttack {
    pub fn new(cfg: AttackConfig) -> Self {
        Self {
            cfg,
            phase: BfiPhase::Strategic,
            eclipse_target: None,
            equivocated: Vec::new(),
        }
    }

    pub fn phase_for(&self, mean_byzantine_trust: f64) -> BfiPhase {
        if mean_byzantine_trust > self.cfg.bfi_aggressive_above {
            BfiPhase::Aggressive
        } else if mean_byzantine_trust < self.cfg.bfi_recovery_below {
            BfiPhase::Recovery
        } else {
            BfiPhase::Strategic
        }
    }

    pub fn phase(&self) -> BfiPhase {
        self.phase
    }

    pub fn equivocation_rate(&self) -> f64 {
        match self.phase {
            BfiPhase::Recovery => self.cfg.bfi_recovery_equivocation_rate,
            _ => self.cfg.bfi_equivocation_rate,
        }
    }

    pub fn sybil_amplify(&self, magnitude: f64) -> f64 {
        magnitude * self.cfg.bfi_sybil_k as f64
    }

    pub fn strike_due(&self, step: usize) -> bool {
        step.is_multiple_of(self.cfg.bfi_window)
    }

    pub fn eclipse_target(&self) -> Option<usize> {
        self.eclipse_target
    }

    fn refresh_phase(&mut self, ctx: &AttackContext<'_>) {
        if let Some(mean) = ctx.mean_malicious_trust() {
            self.phase = self.phase_for(mean);
        }
    }
}

impl Attack for ByzantineAttack {
    fn name(&self) -> &'static str {
        "bfi"
    }

    fn begin_episode(&mut self, net: &NetworkState, _episode: usize, rng: &mut dyn RngCore) {
        let honest: Vec<usize> = net.honest().collect();
        self.eclipse_target = (!honest.is_empty()).then(|| honest[rng.random_range(0..honest.len())]);
        self.equivocated.clear();
        if let Some(mean) = net.class_means().1 {
            self.phase = self.phase_for(mean);
        }
    }

    fn vote(&mut self, ctx: &AttackContext<'_>, node: usize, rng: &mut dyn RngCore) -> Vote {
        self.refresh_phase(ctx);
        if rng.random_bool(self.equivocation_rate()) {
            self.equivocated.push(node);
            Vote::Conflicting
        } else {
            Vote::Invalid
        }
    }

    fn step(&mut self, ctx: &AttackContext<'_>, rng: &mut dyn RngCore) -> Vec<Perturbation> {
        self.refresh_phase(ctx);
        let mut out: Vec<Perturbation> = self
            .equivocated
            .drain(..)
            .map(|node| Perturbation {
                target: node,
                kind: PerturbationKind::MarkConflicting,
                source: Some(node),
            })
            .collect();
        let byz = ctx.active_malicious();
        if byz.is_empty() {
            return out;
        }
        let base = self.cfg.base_evidence;
        if self.phase == BfiPhase::Aggressive && byz.len() > 1 {
            for &m in &byz {
                let mut peer = byz[rng.random_range(0..byz.len() - 1)];
                if peer == m {
                    peer = byz[byz.len() - 1];
                }
                out.push(Perturbation::boost(peer, self.sybil_amplify(base)).from_node(m));
            }
        }
        if self.strike_due(ctx.step) {
            if let Some(&top) = ctx.honest_by_trust().first() {
                out.extend(byz.iter().map(|&m| Perturbation::penalize(top, base).from_node(m)));
            }
        }
        if let Some(target) = self.eclipse_target {
            out.push(Perturbation {
                target,
                kind: PerturbationKind::CorruptObservation {
                    mask: ECLIPSE_MASK,
                    value: 0.0,
                },
                source: None,
            });
        }
        out
    }

    fn equivocation_detection(&self) -> f64 {
        self.cfg.bfi_detection
    }
}
