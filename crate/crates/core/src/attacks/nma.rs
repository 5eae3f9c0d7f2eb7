//! Naive malicious attack: random noise against honest nodes.

use rand::{Rng, RngCore};

use super::{Attack, AttackConfig, AttackContext, Perturbation};

#[derive(Debug)]
pub struct NoiseAttack {
    cfg: AttackConfig,
}

impl NoiseAttack {
    pub fn new(cfg: AttackConfig) -> Self {
        Self { cfg }
    }
}

impl Attack for NoiseAttack {
    fn name(&self) -> &'static str {
        "nma"
    }

    fn step(&mut self, ctx: &AttackContext<'_>, rng: &mut dyn RngCore) -> Vec<Perturbation> {
        let honest = ctx.honest();
        if honest.is_empty() || self.cfg.nma_p_attack <= 0.0 {
            return Vec::new();
        }
        let magnitude = self.cfg.nma_noise * self.cfg.base_evidence;
        let mut out = Vec::new();
        for m in ctx.active_malicious() {
            if rng.random_bool(self.cfg.nma_p_attack) {
                let target = honest[rng.random_range(0..honest.len())];
                out.push(Perturbation::penalize(target, magnitude).from_node(m));
            }
        }
        out
    }
}
