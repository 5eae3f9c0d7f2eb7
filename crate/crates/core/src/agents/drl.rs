//! Dueling Double DQN with experience replay and a periodically synced
//! target network.

use rand::SeedableRng;

use super::nn::{argmax, double_q_target, td_loss_and_grad, Adam, DuelingNetwork, Sample, Topology};
use super::replay::ReplayBuffer;
use super::{epsilon_greedy, Agent, AgentHyperparams, Checkpoint, EpsilonSchedule, Transition};
use crate::env::{feature_ranges, Action, StateVector, FEATURES};
use crate::error::{Result, SimError};
use crate::rng::{derive_seed, SimRng};

/// Online and target networks plus optimizer, shared by DRL and MARL.
#[derive(Debug, Clone)]
pub struct DeepCore {
    pub online: DuelingNetwork,
    pub target: DuelingNetwork,
    adam: Adam,
    hp: AgentHyperparams,
    ranges: [(f64, f64); FEATURES],
    updates: u64,
}

impl DeepCore {
    pub fn new(hp: &AgentHyperparams, rng: &mut SimRng) -> Self {
        let topo = Topology::dueling(FEATURES, &hp.hidden_sizes, hp.head_hidden, Action::ALL.len());
        let online = DuelingNetwork::new(topo, rng);
        Self::from_network(hp, online.clone(), online)
    }

    pub fn from_network(hp: &AgentHyperparams, online: DuelingNetwork, target: DuelingNetwork) -> Self {
        Self {
            adam: Adam::new(online.param_count(), hp.learning_rate),
            online,
            target,
            hp: hp.clone(),
            ranges: feature_ranges(super::KAPPA_MAX),
            updates: 0,
        }
    }

    pub fn input(&self, s: &StateVector) -> [f64; FEATURES] {
        s.scaled(&self.ranges)
    }

    pub fn q_values(&self, s: &StateVector) -> [f64; 3] {
        let q = self.online.q_values(&self.input(s));
        [q[0], q[1], q[2]]
    }

    pub fn hyperparams(&self) -> &AgentHyperparams {
        &self.hp
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// One Adam step on the batch; returns the mean squared TD error.
    pub fn train(&mut self, batch: &[&Transition]) -> Result<f64> {
        let inputs: Vec<[f64; FEATURES]> = batch.iter().map(|t| self.input(&t.state)).collect();
        let targets: Vec<f64> = batch
            .iter()
            .map(|t| {
                double_q_target(
                    t.reward * self.hp.reward_scale,
                    &self.input(&t.next_state),
                    t.terminal,
                    &self.online,
                    &self.target,
                    self.hp.discount,
                )
            })
            .collect();
        let samples: Vec<Sample> = batch
            .iter()
            .zip(&inputs)
            .zip(&targets)
            .map(|((t, x), &y)| Sample {
                input: x,
                action: t.action.index(),
                target: y,
            })
            .collect();
        let clip = self.hp.clip_td.then_some(self.hp.td_clip);
        let (loss, grad) = td_loss_and_grad(&self.online, &samples, clip);
        if !loss.is_finite() {
            return Err(SimError::NonFinite("training loss"));
        }
        self.adam.step(self.online.params_mut(), &grad);
        self.updates += 1;
        Ok(loss)
    }

    pub fn sync_target(&mut self) {
        self.target.copy_from(&self.online);
    }

    pub fn greedy(&self, s: &StateVector) -> Action {
        Action::ALL[argmax(&self.q_values(s))]
    }
}

pub struct DrlAgent {
    core: DeepCore,
    buffer: ReplayBuffer,
    schedule: EpsilonSchedule,
    epsilon: f64,
    steps: u64,
    seed: u64,
    rng: SimRng,
    last_loss: Option<f64>,
}

impl DrlAgent {
    pub const NAME: &'static str = "drl";

    pub fn new(hp: AgentHyperparams, episodes: usize, seed: u64) -> Self {
        let mut init = SimRng::seed_from_u64(derive_seed(seed, "agent-drl-init", 0));
        let core = DeepCore::new(&hp, &mut init);
        Self::with_core(core, hp, episodes, seed)
    }

    fn with_core(core: DeepCore, hp: AgentHyperparams, episodes: usize, seed: u64) -> Self {
        Self {
            core,
            buffer: ReplayBuffer::new(hp.buffer_capacity),
            schedule: EpsilonSchedule::new(hp.eps_start, hp.eps_min, hp.eps_decay_fraction, episodes),
            epsilon: hp.eps_start,
            steps: 0,
            seed,
            rng: SimRng::seed_from_u64(derive_seed(seed, "agent-drl", 0)),
            last_loss: None,
        }
    }

    pub(crate) fn restore(hp: AgentHyperparams, seed: u64, online: DuelingNetwork, target: DuelingNetwork) -> Self {
        let core = DeepCore::from_network(&hp, online, target);
        Self::with_core(core, hp, 1, seed)
    }

    pub fn core(&self) -> &DeepCore {
        &self.core
    }

    pub fn last_loss(&self) -> Option<f64> {
        self.last_loss
    }
}

impl Agent for DrlAgent {
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
        let q = self.core.q_values(state);
        epsilon_greedy(&q, self.epsilon, &mut self.rng)
    }

    fn observe(&mut self, t: &Transition) -> Result<()> {
        self.buffer.push(t.clone());
        self.steps += 1;
        let hp = &self.core.hp;
        if let Some(idx) = self.buffer.sample_indices(hp.batch_size, &mut self.rng) {
            let batch: Vec<&Transition> = idx.iter().map(|&i| self.buffer.get(i)).collect();
            self.last_loss = Some(self.core.train(&batch)?);
        }
        if self.steps.is_multiple_of(self.core.hp.target_sync_every) {
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
            hyperparams: self.core.hp.clone(),
            params,
            table: Vec::new(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use rand::Rng;

    fn random_state(rng: &mut SimRng) -> StateVector {
        let mut s = [0.0; FEATURES];
        for v in &mut s {
            *v = rng.random_range(0.0..1.0);
        }
        StateVector(s)
    }

    #[test]
    fn sync_copies_and_is_idempotent() {
        let hp = AgentHyperparams::default();
        let mut rng = stream(1, "drl", 0);
        let mut core = DeepCore::new(&hp, &mut rng);
        let initial_target = core.target.clone();
        let t = Transition {
            state: random_state(&mut rng),
            action: Action::Increase,
            reward: 10.0,
            next_state: random_state(&mut rng),
            terminal: false,
        };
        core.train(&[&t]).unwrap();
        assert_eq!(core.target, initial_target);
        assert_ne!(core.online, core.target);
        core.sync_target();
        let snapshot = core.target.clone();
        core.sync_target();
        assert_eq!(core.target, snapshot);
        for _ in 0..20 {
            let x = core.input(&random_state(&mut rng));
            assert_eq!(core.online.q_values(&x), core.target.q_values(&x));
        }
    }

    #[test]
    fn insufficient_buffer_skips_training() {
        let mut agent = DrlAgent::new(AgentHyperparams::default(), 10, 3);
        let mut rng = stream(2, "drl", 0);
        let t = Transition {
            state: random_state(&mut rng),
            action: Action::Maintain,
            reward: 1.0,
            next_state: random_state(&mut rng),
            terminal: true,
        };
        for _ in 0..63 {
            agent.observe(&t).unwrap();
        }
        assert!(agent.last_loss().is_none());
        assert_eq!(agent.core().updates(), 0);
        agent.observe(&t).unwrap();
        assert!(agent.last_loss().unwrap() >= 0.0);
    }
}
