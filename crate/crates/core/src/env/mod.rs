//! The MDP: observation, delegation-ratio actions, reward, and the episode
//! loop binding consensus, attacks, admission control and agents.
//!
//! Step order (fixed; results depend on it):
//! observe, act, apply action, admission gating, delegate selection,
//! consensus round, attack step, perturbation application, reward, agent
//! update.

mod mdp;
mod state;

pub use mdp::{apply_action, collusion_penalty, compute_reward, reward_from_parts, step_reward, Action, RewardConfig};
pub use state::*;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::abac::{AccessGate, Policy};
use crate::agents::{Agent, Transition};
use crate::attacks::{Attack, AttackContext, Perturbation, PerturbationKind};
use crate::consensus::{init_network, run_consensus_round, ConsensusConfig, NetworkState, RoundOutcome, TrustInit, Vote};
use crate::error::{Result, SimError};
use crate::metrics::{classify, f1, EpisodeRecord};
use crate::rng::{derive_seed, stream};
use crate::trust::{committee_size, select_from, Evidence, TrustUpdateConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub nodes: usize,
    pub malicious_ratio: f64,
    pub steps: usize,
    /// Classification threshold: trust below it is flagged malicious.
    pub theta: f64,
    pub history_window: usize,
    pub trust_init: TrustInit,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            nodes: 16,
            malicious_ratio: 0.3,
            steps: 100,
            theta: 0.45,
            history_window: 10,
            trust_init: TrustInit::default(),
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 2 {
            return Err(SimError::NetworkTooSmall(self.nodes));
        }
        if self.steps == 0 || self.history_window == 0 {
            return Err(SimError::Config("steps and history_window must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.malicious_ratio) || !(0.0..=1.0).contains(&self.theta) {
            return Err(SimError::Config("malicious_ratio and theta must be in [0, 1]".into()));
        }
        Ok(())
    }
}

/// One entry of the trust evidence stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum EvidenceKind {
    Round(Evidence),
    Boost(f64),
    Penalty(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EvidenceEvent {
    pub episode: usize,
    pub step: usize,
    pub node: usize,
    pub kind: EvidenceKind,
}

/// Per-step trace, kept only when tracing is enabled.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepTrace {
    pub step: usize,
    pub action: Action,
    pub delegation_ratio: f64,
    pub committee: usize,
    pub block_created: bool,
    pub reward: f64,
    pub f1: f64,
}

pub struct Environment {
    cfg: EnvConfig,
    consensus: ConsensusConfig,
    trust: TrustUpdateConfig,
    reward: RewardConfig,
    attack: Box<dyn Attack>,
    gate: AccessGate,
    seed: u64,
    record_evidence: bool,
    evidence: Vec<EvidenceEvent>,
    trace: Option<Vec<StepTrace>>,
    last_network: Option<NetworkState>,
}

impl Environment {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        cfg: EnvConfig,
        consensus: ConsensusConfig,
        trust: TrustUpdateConfig,
        reward: RewardConfig,
        attack: Box<dyn Attack>,
        policy: Policy,
        backend: &str,
        seed: u64,
    ) -> Result<Self> {
        cfg.validate()?;
        consensus.validate()?;
        trust.validate()?;
        reward.validate()?;
        let gate = AccessGate::new(policy, backend, derive_seed(seed, "abac-key", 0))?;
        Ok(Self {
            cfg,
            consensus,
            trust,
            reward,
            attack,
            gate,
            seed,
            record_evidence: false,
            evidence: Vec::new(),
            trace: None,
            last_network: None,
        })
    }

    /// Keeps every evidence event for later comparison.
    pub fn record_evidence(&mut self, on: bool) {
        self.record_evidence = on;
    }

    pub fn evidence_log(&self) -> &[EvidenceEvent] {
        &self.evidence
    }

    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    /// Trace of the most recent episode, if enabled.
    pub fn trace(&self) -> Option<&[StepTrace]> {
        self.trace.as_deref()
    }

    /// Network state at the end of the most recent episode.
    pub fn last_network(&self) -> Option<&NetworkState> {
        self.last_network.as_ref()
    }

    pub fn attack_name(&self) -> &'static str {
        self.attack.name()
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    fn scales(&self) -> StateScales {
        StateScales {
            steps: self.cfg.steps as u64,
            batch_size: self.consensus.batch_size,
            kappa_max: self.reward.kappa_max,
        }
    }

    fn log(&mut self, episode: usize, step: usize, node: usize, kind: EvidenceKind) {
        if self.record_evidence {
            self.evidence.push(EvidenceEvent {
                episode,
                step,
                node,
                kind,
            });
        }
    }

    /// Runs one episode on a freshly initialized network. `episode` is 1-based.
    pub fn run_episode(&mut self, episode: usize, agent: &mut dyn Agent) -> Result<EpisodeRecord> {
        let mut rng = stream(self.seed, "env", episode as u64);
        let mut attack_rng = stream(self.seed, "attack", episode as u64);
        let mut net = init_network(self.cfg.nodes, self.cfg.malicious_ratio, &self.cfg.trust_init, &mut rng)?;
        net.episode_index = episode;
        self.attack.begin_episode(&net, episode, &mut attack_rng);
        agent.begin_episode(episode - 1);
        if let Some(t) = self.trace.as_mut() {
            t.clear();
        }

        let scales = self.scales();
        let mut history = StepHistory::new(self.cfg.history_window);
        let mut corruptions: Vec<Corruption> = Vec::new();
        let mut state = extract_state(&net, &history, &scales, &corruptions);
        let mut cumulative = 0.0;
        let mut kappa_sum = 0.0;

        for step in 1..=self.cfg.steps {
            net.step_index = step;
            let action = agent.act(&state);
            net.delegation_ratio = apply_action(net.delegation_ratio, action);

            let admitted = net
                .profiles
                .iter()
                .map(|p| self.gate.admit(p.score(), &mut rng))
                .collect::<Result<Vec<bool>>>()?;
            let candidates: Vec<usize> = (0..net.len()).filter(|&i| admitted[i]).collect();
            let k = committee_size(net.delegation_ratio, net.len()).min(candidates.len());
            let delegates = select_from(&net.profiles, &candidates, k, &mut rng);

            let outcome = if delegates.is_empty() {
                RoundOutcome::idle()
            } else {
                let votes: BTreeMap<usize, Vote> = {
                    let ctx = AttackContext {
                        net: &net,
                        admitted: &admitted,
                        delegates: &delegates,
                        step,
                        episode,
                    };
                    delegates
                        .iter()
                        .filter(|&&d| net.roles[d].is_malicious())
                        .map(|&d| (d, self.attack.vote(&ctx, d, &mut attack_rng)))
                        .collect()
                };
                run_consensus_round(
                    &mut net,
                    &delegates,
                    &|d| votes.get(&d).copied().unwrap_or(Vote::Invalid),
                    self.attack.equivocation_detection(),
                    &self.consensus,
                    &self.trust,
                    &mut rng,
                )?
            };
            for &(node, kind) in &outcome.evidence {
                self.log(episode, step, node, EvidenceKind::Round(kind));
            }

            let perturbations = {
                let ctx = AttackContext {
                    net: &net,
                    admitted: &admitted,
                    delegates: &delegates,
                    step,
                    episode,
                };
                self.attack.step(&ctx, &mut attack_rng)
            };
            corruptions = self.apply_perturbations(&mut net, &perturbations, episode, step)?;
            self.attack.after_step(&net);
            net.pending_tx += self.consensus.batch_size;

            let trusts = net.trusts();
            let cm = classify(&trusts, &net.roles, self.cfg.theta)?;
            let (h, m) = net.class_means();
            let kappa = collusion_score(h, m, self.reward.kappa_max);
            let r_step = step_reward(outcome.verified_tx, self.consensus.batch_size, outcome.block_created);
            let reward = compute_reward(&cm, r_step, kappa, &self.reward);
            if !reward.is_finite() {
                return Err(SimError::NonFinite("reward"));
            }
            cumulative += reward;
            kappa_sum += kappa;

            history.push(outcome.verified_tx, outcome.block_created, delegates.len());
            let next = extract_state(&net, &history, &scales, &corruptions);
            if !next.is_finite() {
                return Err(SimError::NonFinite("state vector"));
            }
            agent.observe(&Transition {
                state,
                action,
                reward,
                next_state: next,
                terminal: step == self.cfg.steps,
            })?;
            if let Some(t) = self.trace.as_mut() {
                t.push(StepTrace {
                    step,
                    action,
                    delegation_ratio: net.delegation_ratio,
                    committee: delegates.len(),
                    block_created: outcome.block_created,
                    reward,
                    f1: f1(&cm),
                });
            }
            state = next;
        }

        let cm = classify(&net.trusts(), &net.roles, self.cfg.theta)?;
        let scores = cm.scores();
        let (h, m) = net.class_means();
        let record = EpisodeRecord {
            episode,
            cumulative_reward: cumulative,
            f1: scores.f1,
            precision: scores.precision,
            recall: scores.recall,
            tp: cm.tp,
            fp: cm.fp,
            fn_: cm.fn_,
            tn: cm.tn,
            throughput: net.verified_tx_total,
            chain_length: net.chain_length,
            mean_kappa: kappa_sum / self.cfg.steps as f64,
            trust_separation: match (h, m) {
                (Some(h), Some(m)) => h - m,
                _ => 0.0,
            },
            delegation_ratio: net.delegation_ratio,
        };
        self.last_network = Some(net);
        Ok(record)
    }

    fn apply_perturbations(
        &mut self,
        net: &mut NetworkState,
        perturbations: &[Perturbation],
        episode: usize,
        step: usize,
    ) -> Result<Vec<Corruption>> {
        let mut corruptions = Vec::new();
        for p in perturbations {
            if p.target >= net.len() {
                return Err(SimError::DelegateOutOfRange {
                    index: p.target,
                    nodes: net.len(),
                });
            }
            match p.kind {
                PerturbationKind::BoostAlpha(m) if m > 0.0 => {
                    net.profiles[p.target].boost_alpha(m);
                    self.log(episode, step, p.target, EvidenceKind::Boost(m));
                }
                PerturbationKind::PenalizeBeta(m) if m > 0.0 => {
                    net.profiles[p.target].penalize_beta(m);
                    self.log(episode, step, p.target, EvidenceKind::Penalty(m));
                }
                PerturbationKind::CorruptObservation { mask, value } => corruptions.push(Corruption {
                    node: p.target,
                    mask,
                    value,
                }),
                _ => {}
            }
        }
        Ok(corruptions)
    }
}
