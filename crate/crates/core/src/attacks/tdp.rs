//! Temporal dormancy: sleepers behave exactly like plain malicious voters
//! until the activation episode, then coordinate against top honest nodes.

use rand::RngCore;

use super::{Attack, AttackConfig, AttackContext, Perturbation};
use crate::consensus::{NetworkState, Vote};

#[derive(Debug)]
pub struct SleeperAttack {
    cfg: AttackConfig,
    activated: bool,
}

impl SleeperAttack {
    pub fn new(cfg: AttackConfig) -> Self {
        Self {
            cfg,
            activated: false,
        }
    }

    pub fn activated(&self) -> bool {
        self.activated
    }

    fn update(&mut self, episode: usize) {
        self.activated |= episode >= self.cfg.tdp_activation_episode;
    }
}

impl Attack for SleeperAttack {
    fn name(&self) -> &'static str {
        "tdp"
    }

    fn begin_episode(&mut self, _net: &NetworkState, episode: usize, _rng: &mut dyn RngCore) {
        self.update(episode);
    }

    fn vote(&mut self, ctx: &AttackContext<'_>, _node: usize, _rng: &mut dyn RngCore) -> Vote {
        self.update(ctx.episode);
        if self.activated {
            Vote::Valid
        } else {
            Vote::Invalid
        }
    }

    fn step(&mut self, ctx: &AttackContext<'_>, _rng: &mut dyn RngCore) -> Vec<Perturbation> {
        self.update(ctx.episode);
        if !self.activated {
            return Vec::new();
        }
        let sleepers = ctx.active_malicious();
        if sleepers.is_empty() {
            return Vec::new();
        }
        let unit = self.cfg.tdp_intensity * self.cfg.base_evidence;
        let mut out = Vec::new();
        if sleepers.len() > 1 {
            let boost = (sleepers.len() - 1) as f64 * unit;
            out.extend(sleepers.iter().map(|&m| Perturbation::boost(m, boost)));
        }
        let penalty = sleepers.len() as f64 * unit;
        out.extend(
            ctx.top_honest(self.cfg.tdp_target_ratio)
                .into_iter()
                .map(|h| Perturbation::penalize(h, penalty)),
        );
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::testutil::standard;
    use crate::attacks::PerturbationKind;
    use crate::rng::stream;

    fn at(atk: &mut SleeperAttack, episode: usize) -> (Vote, Vec<Perturbation>) {
        let net = standard();
        let admitted = vec![true; 16];
        let ctx = AttackContext {
            net: &net,
            admitted: &admitted,
            delegates: &[0],
            step: 1,
            episode,
        };
        let mut rng = stream(0, "tdp", 0);
        (atk.vote(&ctx, 0, &mut rng), atk.step(&ctx, &mut rng))
    }

    #[test]
    fn dormant_before_activation() {
        let mut atk = SleeperAttack::new(AttackConfig::default());
        let (vote, out) = at(&mut atk, 24);
        assert_eq!(vote, Vote::Invalid);
        assert!(out.is_empty());
        assert!(!atk.activated());
    }

    #[test]
    fn activation_targets_and_magnitudes() {
        let mut atk = SleeperAttack::new(AttackConfig::default());
        let (vote, out) = at(&mut atk, 25);
        assert_eq!(vote, Vote::Valid);
        let targets: Vec<_> = out
            .iter()
            .filter(|p| matches!(p.kind, PerturbationKind::PenalizeBeta(_)))
            .collect();
        assert_eq!(targets.len(), 4);
        assert!(targets.iter().all(|p| (p.magnitude().unwrap() - 3.75).abs() < 1e-12));
    }

    #[test]
    fn activation_is_monotone() {
        let mut atk = SleeperAttack::new(AttackConfig::default());
        at(&mut atk, 30);
        let (vote, _) = at(&mut atk, 3);
        assert!(atk.activated());
        assert_eq!(vote, Vote::Valid);
    }
}
