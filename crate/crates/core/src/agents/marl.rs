//! Parameter-sharing multi-agent pool: one network, per-agent replay
//! buffers and exploration streams, majority-vote joint action.

use rand::SeedableRng;

use super::drl::DeepCore;
use super::nn::DuelingNetwork;
use super::replay::ReplayBuffer;
use super::{epsilon_greedy, Agent, AgentHyperparams, Checkpoint, EpsilonSchedule, Transition};
use crate::env::{Action, StateVector};
use crate::error::Result;
use crate::rng::{derive_seed, SimRng};

/// Plurality of the votes; any tie for first place resolves to Maintain.
pub fn majority_vote(votes: &[Action]) -> Action {
    let mut counts = [0usize; 3];
    for v in votes {
        counts[v.index()] += 1;
    }
    let top = *counts.iter().max().unwrap_or(&0);
    let leaders: Vec<usize> = (0..3).filter(|&i| counts[i] == top).collect();
    match leaders.as_slice() {
        [only] => Action::ALL[*only],
        _ => Action::Maintain,
    }
}

pub struct MarlAgent {
    core: DeepCore,
    buffers: Vec<ReplayBuffer>,
    streams: Vec<SimRng>,
    sampler: SimRng,
    schedule: EpsilonSchedule,
    epsilon: f64,
    steps: u64,
    seed: u64,
    last_votes: Vec<Action>,
    last_loss: Option<f64>,
}

impl MarlAgent {
    pub const NAME: &'static str = "marl";

    pub fn new(hp: AgentHyperparams, episodes: usize, seed: u64) -> Self {
        let mut init = SimRng::seed_from_u64(derive_seed(seed, "agent-marl-init", 0));
        let core = DeepCore::new(&hp, &mut init);
        Self::with_core(core, hp, episodes, seed)
    }

    fn with_core(core: DeepCore, hp: AgentHyperparams, episodes: usize, seed: u64) -> Self {
        let n = hp.marl_agents.max(1);
        Self {
            buffers: (0..n).map(|_| ReplayBuffer::new(hp.buffer_capacity)).collect(),
            streams: (0..n)
                .map(|i| SimRng::seed_from_u64(derive_seed(seed, "agent-marl", i as u64)))
                .collect(),
            sampler: SimRng::seed_from_u64(derive_seed(seed, "agent-marl-replay", 0)),
            schedule: EpsilonSchedule::new(hp.eps_start, hp.eps_min, hp.eps_decay_fraction, episodes),
            epsilon: hp.eps_start,
            steps: 0,
            seed,
            last_votes: Vec::new(),
            last_loss: None,
            core,
        }
    }

    pub(crate) fn restore(hp: AgentHyperparams, seed: u64, online: DuelingNetwork, target: DuelingNetwork) -> Self {
        let core = DeepCore::from_network(&hp, online, target);
        Self::with_core(core, hp, 1, seed)
    }

    pub fn pool_size(&self) -> usize {
        self.buffers.len()
    }

    pub fn core(&self) -> &DeepCore {
        &self.core
    }

    pub fn last_votes(&self) -> &[Action] {
        &self.last_votes
    }

    pub fn buffer_lens(&self) -> Vec<usize> {
        self.buffers.iter().map(ReplayBuffer::len).collect()
    }

    /// Q-values as seen by pool member `_agent`; identical for all members.
    pub fn agent_q_values(&self, _agent: usize, state: &StateVector) -> [f64; 3] {
        self.core.q_values(state)
    }

    pub fn set_epsilon(&mut self, eps: f64) {
        self.epsilon = eps;
    }

    /// Every member draws its own epsilon-greedy vote from the shared values.
    pub fn marl_act(&mut self, state: &StateVector) -> Action {
        let q = self.core.q_values(state);
        let eps = self.epsilon;
        self.last_votes = self.streams.iter_mut().map(|r| epsilon_greedy(&q, eps, r)).collect();
        majority_vote(&self.last_votes)
    }

    /// Whether the shared update fires at this environment step count.
    pub fn update_due(&self, step: u64) -> bool {
        step > 0 && step.is_multiple_of(self.core_hp().marl_sync_every)
    }

    fn core_hp(&self) -> &AgentHyperparams {
        self.core.hyperparams()
    }

    /// Pooled batch sizes per buffer: equal shares over nonempty buffers.
    pub fn pooled_shares(&self) -> Vec<usize> {
        let nonempty = self.buffers.iter().filter(|b| !b.is_empty()).count();
        if nonempty == 0 {
            return vec![0; self.buffers.len()];
        }
        let per = (self.core_hp().batch_size / nonempty).max(1);
        self.buffers.iter().map(|b| if b.is_empty() { 0 } else { per.min(b.len()) }).collect()
    }

    /// One shared-parameter update from the pooled batch; no-op when all
    /// buffers are empty.
    pub fn marl_train(&mut self) -> Result<Option<f64>> {
        let shares = self.pooled_shares();
        let mut batch: Vec<&Transition> = Vec::new();
        for (buf, &n) in self.buffers.iter().zip(&shares) {
            if n == 0 {
                continue;
            }
            let idx = buf.sample_indices(n, &mut self.sampler).expect("share bounded by length");
            batch.extend(idx.into_iter().map(|i| buf.get(i)));
        }
        if batch.is_empty() {
            return Ok(None);
        }
        let loss = self.core.train(&batch)?;
        self.last_loss = Some(loss);
        Ok(Some(loss))
    }

    pub fn last_loss(&self) -> Option<f64> {
        self.last_loss
    }
}

impl Agent for MarlAgent {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn begin_episode(&mut self, episode: usize) {
        self.epsilon = self.schedule.at(episode);
    }

    fn epsilon(&self) -> f64 {
        self.epsilon
    }

    fn act(&mut self, state: &StateVector) -> Action {
        self.marl_act(state)
    }

    fn observe(&mut self, t: &Transition) -> Result<()> {
        for b in &mut self.buffers {
            b.push(t.clone());
        }
        self.steps += 1;
        if self.update_due(self.steps) {
            self.marl_train()?;
        }
        if self.steps.is_multiple_of(self.core_hp().target_sync_every) {
            self.core.sync_target();
        }
        Ok(())
    }

    fn q_values(&self, state: &StateVector) -> [f64; 3] {
        self.core.q_values(state)
    }

    fn checkpoint(&self) -> Checkpoint {
        let mut params = self.core.online.params().to_vec();
        params.extend_from_slice(self.core.target.params());
        Checkpoint {
            agent: Self::NAME.to_string(),
            seed: self.seed,
            topology: self.core.online.topology().describe(),
            hyperparams: self.core.hyperparams().clone(),
            params,
            table: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::FEATURES;

    fn votes(inc: usize, dec: usize, keep: usize) -> Vec<Action> {
        let mut v = vec![Action::Increase; inc];
        v.extend(vec![Action::Decrease; dec]);
        v.extend(vec![Action::Maintain; keep]);
        v
    }

    #[test]
    fn vote_examples() {
        assert_eq!(majority_vote(&votes(9, 7, 0)), Action::Increase);
        assert_eq!(majority_vote(&votes(8, 8, 0)), Action::Maintain);
        assert_eq!(majority_vote(&votes(6, 6, 4)), Action::Maintain);
        assert_eq!(majority_vote(&votes(3, 7, 6)), Action::Decrease);
    }

    #[test]
    fn greedy_pool_is_unanimous() {
        let mut pool = MarlAgent::new(AgentHyperparams::default(), 10, 5);
        pool.set_epsilon(0.0);
        let s = StateVector([0.4; FEATURES]);
        let a = pool.marl_act(&s);
        assert_eq!(pool.last_votes().len(), 16);
        assert!(pool.last_votes().iter().all(|v| *v == a));
    }

    #[test]
    fn update_schedule() {
        let pool = MarlAgent::new(AgentHyperparams::default(), 10, 5);
        for s in [10, 20, 30] {
            assert!(pool.update_due(s));
        }
        for s in [0, 9, 11] {
            assert!(!pool.update_due(s));
        }
    }

    #[test]
    fn pooled_shares_and_empty_noop() {
        let mut pool = MarlAgent::new(AgentHyperparams::default(), 10, 5);
        assert_eq!(pool.marl_train().unwrap(), None);
        let t = Transition {
            state: StateVector([0.2; FEATURES]),
            action: Action::Increase,
            reward: 5.0,
            next_state: StateVector([0.3; FEATURES]),
            terminal: false,
        };
        for _ in 0..5 {
            pool.observe(&t).unwrap();
        }
        assert_eq!(pool.pooled_shares(), vec![4; 16]);
        assert!(pool.marl_train().unwrap().is_some());
        let s = StateVector([0.6; FEATURES]);
        let q0 = pool.agent_q_values(0, &s);
        assert!((1..16).all(|i| pool.agent_q_values(i, &s) == q0));
    }
}
