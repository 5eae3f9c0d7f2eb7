//! Defense agents that steer the delegation ratio.
//!
//! Agents are selected by name from a registry: `rl` (tabular Q-learning),
//! `drl` (Dueling Double DQN) and `marl` (parameter-sharing pool).

mod checkpoint;
mod drl;
mod marl;
pub mod nn;
mod replay;
mod tabular;

pub use checkpoint::Checkpoint;
pub use drl::{DeepCore, DrlAgent};
pub use marl::{majority_vote, MarlAgent};
pub use replay::ReplayBuffer;
pub use tabular::{bin, bin_counts, discretize, QTable, StateKey, TabularAgent};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, StateVector};
use crate::error::{Result, SimError};

/// Cap on the collusion feature assumed by discretization and input scaling.
pub const KAPPA_MAX: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: StateVector,
    pub action: Action,
    pub reward: f64,
    pub next_state: StateVector,
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AgentHyperparams {
    pub tabular_learning_rate: f64,
    pub learning_rate: f64,
    pub discount: f64,
    pub eps_start: f64,
    pub eps_min: f64,
    /// Fraction of the run after which epsilon sits at its floor.
    pub eps_decay_fraction: f64,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub hidden_sizes: Vec<usize>,
    pub head_hidden: usize,
    pub target_sync_every: u64,
    pub marl_sync_every: u64,
    pub marl_agents: usize,
    pub clip_td: bool,
    pub td_clip: f64,
    /// Rewards are multiplied by this before deep TD targets are formed.
    pub reward_scale: f64,
}

impl Default for AgentHyperparams {
    fn default() -> Self {
        Self {
            tabular_learning_rate: 0.1,
            learning_rate: 5e-4,
            discount: 0.99,
            eps_start: 1.0,
            eps_min: 0.05,
            eps_decay_fraction: 0.8,
            buffer_capacity: 10_000,
            batch_size: 64,
            hidden_sizes: vec![128, 64],
            head_hidden: 32,
            target_sync_every: 100,
            marl_sync_every: 10,
            marl_agents: 16,
            clip_td: true,
            td_clip: 10.0,
            reward_scale: 0.01,
        }
    }
}

impl AgentHyperparams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(SimError::Config(format!("agent: {m}")));
        if !(self.discount > 0.0 && self.discount <= 1.0) {
            return fail("discount must be in (0, 1]");
        }
        if !(0.0..=1.0).contains(&self.eps_start) || !(0.0..=1.0).contains(&self.eps_min) {
            return fail("epsilon bounds must be in [0, 1]");
        }
        if self.eps_min > self.eps_start {
            return fail("eps_min exceeds eps_start");
        }
        if !(self.eps_decay_fraction > 0.0 && self.eps_decay_fraction <= 1.0) {
            return fail("eps_decay_fraction must be in (0, 1]");
        }
        if self.batch_size == 0 || self.batch_size > self.buffer_capacity {
            return fail("batch_size must be in [1, buffer_capacity]");
        }
        if self.hidden_sizes.is_empty() || self.hidden_sizes.contains(&0) || self.head_hidden == 0 {
            return fail("layer widths must be positive");
        }
        if self.target_sync_every == 0 || self.marl_sync_every == 0 || self.marl_agents == 0 {
            return fail("sync periods and pool size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.tabular_learning_rate > 0.0 && self.reward_scale > 0.0) {
            return fail("learning rates and reward scale must be positive");
        }
        if self.clip_td && self.td_clip <= 0.0 {
            return fail("td_clip must be positive");
        }
        Ok(())
    }
}

/// Per-episode multiplicative decay that lands on `min` once `fraction` of
/// the episodes have elapsed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpsilonSchedule {
    start: f64,
    min: f64,
    factor: f64,
    floor_episode: usize,
}

impl EpsilonSchedule {
    pub fn new(start: f64, min: f64, fraction: f64, episodes: usize) -> Self {
        let floor_episode = ((fraction * episodes as f64).round() as usize).max(1);
        let factor = if start > 0.0 && min > 0.0 {
            (min / start).powf(1.0 / floor_episode as f64)
        } else {
            0.0
        };
        Self {
            start,
            min,
            factor,
            floor_episode,
        }
    }

    /// Epsilon for 0-based `episode`.
    pub fn at(&self, episode: usize) -> f64 {
        if episode >= self.floor_episode {
            return self.min;
        }
        (self.start * self.factor.powi(episode as i32)).max(self.min)
    }
}

/// Uniform random action with probability `eps`, otherwise the greedy one
/// with ties going to the lowest index.
pub fn epsilon_greedy<R: Rng + ?Sized>(q: &[f64; 3], eps: f64, rng: &mut R) -> Action {
    if rng.random::<f64>() < eps {
        Action::ALL[rng.random_range(0..3)]
    } else {
        Action::ALL[nn::argmax(q)]
    }
}

pub trait Agent: Send {
    fn name(&self) -> &'static str;

    /// Called with the 0-based episode index before the episode starts.
    fn begin_episode(&mut self, episode: usize);

    fn epsilon(&self) -> f64;

    fn act(&mut self, state: &StateVector) -> Action;

    /// Records a transition and trains as the agent's schedule dictates.
    fn observe(&mut self, t: &Transition) -> Result<()>;

    fn q_values(&self, state: &StateVector) -> [f64; 3];

    fn checkpoint(&self) -> Checkpoint;
}

type AgentCtor = fn(&AgentHyperparams, usize, u64) -> Box<dyn Agent>;

const AGENTS: &[(&str, AgentCtor)] = &[
    (TabularAgent::NAME, |hp, e, s| Box::new(TabularAgent::new(hp.clone(), e, s))),
    (DrlAgent::NAME, |hp, e, s| Box::new(DrlAgent::new(hp.clone(), e, s))),
    (MarlAgent::NAME, |hp, e, s| Box::new(MarlAgent::new(hp.clone(), e, s))),
];

pub fn agent_names() -> impl Iterator<Item = &'static str> {
    AGENTS.iter().map(|(n, _)| *n)
}

/// Builds a fresh agent for a run of `episodes` episodes.
pub fn build_agent(name: &str, hp: &AgentHyperparams, episodes: usize, seed: u64) -> Result<Box<dyn Agent>> {
    hp.validate()?;
    AGENTS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, ctor)| ctor(hp, episodes, seed))
        .ok_or_else(|| SimError::UnknownStrategy {
            kind: "agent",
            name: name.to_string(),
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    #[test]
    fn greedy_examples() {
        let mut rng = stream(0, "eps", 0);
        assert_eq!(epsilon_greedy(&[1.0, 3.0, 2.0], 0.0, &mut rng), Action::Maintain);
        assert_eq!(epsilon_greedy(&[2.0, 2.0, 1.0], 0.0, &mut rng), Action::Decrease);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut rng = stream(42, "eps", 0);
        let mut counts = [0usize; 3];
        for _ in 0..10_000 {
            counts[epsilon_greedy(&[0.0, 5.0, 0.0], 1.0, &mut rng).index()] += 1;
        }
        for c in counts {
            let f = c as f64 / 10_000.0;
            assert!((0.31..=0.35).contains(&f), "{f}");
        }
    }

    #[test]
    fn schedule_hits_floor_at_eighty_percent() {
        let s = EpsilonSchedule::new(1.0, 0.05, 0.8, 50);
        assert_eq!(s.at(0), 1.0);
        assert!(s.at(39) > 0.05);
        assert_eq!(s.at(40), 0.05);
        assert_eq!(s.at(49), 0.05);
    }

    #[test]
    fn registry_and_validation() {
        let hp = AgentHyperparams::default();
        for name in ["rl", "drl", "marl"] {
            assert_eq!(build_agent(name, &hp, 10, 1).unwrap().name(), name);
        }
        assert!(build_agent("ppo", &hp, 10, 1).is_err());
        let bad = AgentHyperparams {
            batch_size: 20_000,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn schedule_is_monotone_and_floored(episodes in 1usize..300, frac in 0.1f64..=1.0) {
            let s = EpsilonSchedule::new(1.0, 0.05, frac, episodes);
            let mut last = f64::INFINITY;
            for e in 0..episodes + 5 {
                let eps = s.at(e);
                prop_assert!(eps <= last && eps >= 0.05);
                last = eps;
            }
        }
    }
}
