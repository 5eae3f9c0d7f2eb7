//! Collusion attack: periodic mutual inflation plus suppression of the most
//! trusted honest nodes.

use rand::RngCore;

use super::{Attack, AttackConfig, AttackContext, Perturbation};

#[derive(Debug)]
pub struct CollusionAttack {
    cfg: AttackConfig,
}

impl CollusionAttack {
    pub fn new(cfg: AttackConfig) -> Self {
        Self { cfg }
    }
}

impl Attack for CollusionAttack {
    fn name(&self) -> &'static str {
        "cra"
    }

    fn step(&mut self, ctx: &AttackContext<'_>, _rng: &mut dyn RngCore) -> Vec<Perturbation> {
        if !ctx.step.is_multiple_of(self.cfg.cra_period) {
            return Vec::new();
        }
        let ring = ctx.active_malicious();
        if ring.is_empty() {
            return Vec::new();
        }
        let unit = self.cfg.cra_intensity * self.cfg.base_evidence;
        let mut out = Vec::new();
        if ring.len() > 1 {
            let boost = (ring.len() - 1) as f64 * unit;
            out.extend(ring.iter().map(|&m| Perturbation::boost(m, boost)));
        }
        let penalty = ring.len() as f64 * unit;
        out.extend(
            ctx.top_honest(self.cfg.cra_target_ratio)
                .into_iter()
                .map(|h| Perturbation::penalize(h, penalty)),
        );
        out
    }
}
