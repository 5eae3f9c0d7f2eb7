//! Adaptive attack: epsilon-greedy choice among five manipulation templates,
//! scored by how much each one lifted mean malicious trust.

use rand::{Rng, RngCore};
use serde::Serialize;

use super::{Attack, AttackConfig, AttackContext, Perturbation};
use crate::consensus::NetworkState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum AaaStrategy {
    GradientExploitation,
    SlowPoisoning,
    StrategicCooperation,
    Mimicry,
    TemporalCoordination,
}

impl AaaStrategy {
    pub const ALL: [AaaStrategy; 5] = [
        AaaStrategy::GradientExploitation,
        AaaStrategy::SlowPoisoning,
        AaaStrategy::StrategicCooperation,
        AaaStrategy::Mimicry,
        AaaStrategy::TemporalCoordination,
    ];
}

#[derive(Debug)]
pub struct AdaptiveAttack {
    cfg: AttackConfig,
    epsilon: f64,
    scores: Vec<f64>,
    uses: Vec<u32>,
    pending: Option<(usize, f64)>,
}

impl AdaptiveAttack {
    pub fn new(cfg: AttackConfig) -> Self {
        Self {
            epsilon: cfg.aaa_eps_start,
            scores: vec![0.0; cfg.aaa_strategy_count],
            uses: vec![0; cfg.aaa_strategy_count],
            pending: None,
            cfg,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn set_scores(&mut self, scores: &[f64]) {
        self.scores.copy_from_slice(scores);
    }

    /// Explore with probability epsilon, else exploit the best score (lowest
    /// index on ties); epsilon decays after every selection.
    pub fn select(&mut self, rng: &mut dyn RngCore) -> usize {
        let idx = if rng.random::<f64>() < self.epsilon {
            rng.random_range(0..self.scores.len())
        } else {
            let mut best = 0;
            for (i, &s) in self.scores.iter().enumerate() {
                if s > self.scores[best] {
                    best = i;
                }
            }
            best
        };
        self.epsilon *= self.cfg.aaa_eps_decay;
        idx
    }

    pub fn template(&self, strategy: AaaStrategy, ctx: &AttackContext<'_>) -> Vec<Perturbation> {
        let ring = ctx.active_malicious();
        if ring.is_empty() {
            return Vec::new();
        }
        let unit = self.cfg.aaa_factor * self.cfg.base_evidence;
        match strategy {
            AaaStrategy::GradientExploitation => {
                ring.iter().map(|&m| Perturbation::boost(m, unit).from_node(m)).collect()
            }
            AaaStrategy::SlowPoisoning => ctx
                .honest()
                .into_iter()
                .map(|h| Perturbation::penalize(h, unit))
                .collect(),
            AaaStrategy::StrategicCooperation if ring.len() > 1 => {
                let boost = unit * (ring.len() - 1) as f64;
                ring.iter().map(|&m| Perturbation::boost(m, boost)).collect()
            }
            AaaStrategy::StrategicCooperation => Vec::new(),
            AaaStrategy::Mimicry => {
                let Some(&top) = ctx.honest_by_trust().first() else {
                    return Vec::new();
                };
                let bar = ctx.net.profiles[top].score();
                ring.iter()
                    .filter(|&&m| ctx.net.profiles[m].score() < bar)
                    .map(|&m| Perturbation::boost(m, unit).from_node(top))
                    .collect()
            }
            AaaStrategy::TemporalCoordination => {
                if !ctx.step.is_multiple_of(self.cfg.aaa_burst_period) {
                    return Vec::new();
                }
                ctx.honest_by_trust()
                    .first()
                    .map(|&h| vec![Perturbation::penalize(h, unit * ring.len() as f64)])
                    .unwrap_or_default()
            }
        }
    }
}

impl Attack for AdaptiveAttack {
    fn name(&self) -> &'static str {
        "aaa"
    }

    fn step(&mut self, ctx: &AttackContext<'_>, rng: &mut dyn RngCore) -> Vec<Perturbation> {
        if ctx.active_malicious().is_empty() {
            return Vec::new();
        }
        let idx = self.select(rng);
        self.pending = ctx.mean_malicious_trust().map(|before| (idx, before));
        self.template(AaaStrategy::ALL[idx], ctx)
    }

    fn after_step(&mut self, net: &NetworkState) {
        let Some((idx, before)) = self.pending.take() else {
            return;
        };
        if let Some(after) = net.class_means().1 {
            self.uses[idx] += 1;
            self.scores[idx] += (after - before - self.scores[idx]) / f64::from(self.uses[idx]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::testutil::standard;
    use crate::rng::stream;

    #[test]
    fn epsilon_decays_geometrically() {
        let mut atk = AdaptiveAttack::new(AttackConfig::default());
        let mut rng = stream(1, "aaa", 0);
        let mut last = atk.epsilon();
        for _ in 0..10 {
            atk.select(&mut rng);
            assert!(atk.epsilon() <= last);
            last = atk.epsilon();
        }
        assert!((atk.epsilon() - 0.98f64.powi(10)).abs() < 1e-12);
        assert!((atk.epsilon() - 0.8171).abs() < 1e-4);
    }

    #[test]
    fn greedy_picks_best_score() {
        let mut atk = AdaptiveAttack::new(AttackConfig {
            aaa_eps_start: 0.0,
            ..Default::default()
        });
        atk.set_scores(&[0.5, 0.9, 0.1, 0.2, 0.3]);
        assert_eq!(atk.select(&mut stream(2, "aaa", 0)), 1);
    }

    #[test]
    fn slow_poisoning_is_bounded() {
        let atk = AdaptiveAttack::new(AttackConfig::default());
        let net = standard();
        let admitted = vec![true; 16];
        let ctx = AttackContext {
            net: &net,
            admitted: &admitted,
            delegates: &[],
            step: 1,
            episode: 1,
        };
        let out = atk.template(AaaStrategy::SlowPoisoning, &ctx);
        assert_eq!(out.len(), 11);
        assert!(out.iter().all(|p| p.magnitude().unwrap() <= 0.12 + 1e-15));
    }

    #[test]
    fn scores_track_trust_change() {
        let mut atk = AdaptiveAttack::new(AttackConfig::default());
        let mut net = standard();
        let admitted = vec![true; 16];
        let ctx = AttackContext {
            net: &net,
            admitted: &admitted,
            delegates: &[],
            step: 1,
            episode: 1,
        };
        let out = atk.step(&ctx, &mut stream(3, "aaa", 0));
        let idx = atk.pending.unwrap().0;
        for p in &out {
            match p.kind {
                super::super::PerturbationKind::BoostAlpha(m) => net.profiles[p.target].boost_alpha(m),
                super::super::PerturbationKind::PenalizeBeta(m) => net.profiles[p.target].penalize_beta(m),
                _ => {}
            }
        }
        let before = standard().class_means().1.unwrap();
        let after = net.class_means().1.unwrap();
        atk.after_step(&net);
        assert!((atk.scores()[idx] - (after - before)).abs() < 1e-12);
    }
}
