//! Tabular Q-learning over a discretized state.

use std::collections::HashMap;

use rand::SeedableRng;

use super::{epsilon_greedy, Agent, AgentHyperparams, Checkpoint, EpsilonSchedule, Transition};
use crate::env::{feature_ranges, Action, StateVector, COLLUSION_SCORE, FEATURES, MEAN_TRUST, VARIANCE};
use crate::error::Result;
use crate::rng::SimRng;

pub type StateKey = [u8; FEATURES];

/// Bin count per feature: finer resolution for the most informative ones.
pub fn bin_counts() -> [u8; FEATURES] {
    let mut bins = [5u8; FEATURES];
    bins[MEAN_TRUST] = 10;
    bins[VARIANCE] = 10;
    bins[COLLUSION_SCORE] = 10;
    bins
}

pub fn bin(value: f64, lo: f64, hi: f64, bins: u8) -> u8 {
    let frac = ((value - lo) / (hi - lo)).clamp(0.0, 1.0);
    ((frac * f64::from(bins)).floor() as u8).min(bins - 1)
}

pub fn discretize(s: &StateVector) -> StateKey {
    let ranges = feature_ranges(super::KAPPA_MAX);
    let bins = bin_counts();
    let mut key = [0u8; FEATURES];
    for i in 0..FEATURES {
        key[i] = bin(s.get(i), ranges[i].0, ranges[i].1, bins[i]);
    }
    key
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct QTable {
    entries: HashMap<StateKey, [f64; 3]>,
}

impl QTable {
    pub fn get(&self, key: &StateKey) -> [f64; 3] {
        self.entries.get(key).copied().unwrap_or([0.0; 3])
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in key order, for stable serialization.
    pub fn sorted_entries(&self) -> Vec<(StateKey, [f64; 3])> {
        let mut v: Vec<_> = self.entries.iter().map(|(k, q)| (*k, *q)).collect();
        v.sort_by_key(|a| a.0);
        v
    }

    pub fn insert(&mut self, key: StateKey, q: [f64; 3]) {
        self.entries.insert(key, q);
    }

    /// One Q-learning backup; returns the new value.
    pub fn update(&mut self, s: StateKey, a: Action, r: f64, next: Option<StateKey>, lr: f64, discount: f64) -> f64 {
        let future = next.map_or(0.0, |k| self.get(&k).into_iter().fold(f64::NEG_INFINITY, f64::max));
        let q = self.entries.entry(s).or_insert([0.0; 3]);
        let slot = &mut q[a.index()];
        *slot += lr * (r + discount * future - *slot);
        *slot
    }
}

pub struct TabularAgent {
    hp: AgentHyperparams,
    seed: u64,
    table: QTable,
    schedule: EpsilonSchedule,
    epsilon: f64,
    rng: SimRng,
}

impl TabularAgent {
    pub const NAME: &'static str = "rl";

    pub fn new(hp: AgentHyperparams, episodes: usize, seed: u64) -> Self {
        Self {
            schedule: EpsilonSchedule::new(hp.eps_start, hp.eps_min, hp.eps_decay_fraction, episodes),
            epsilon: hp.eps_start,
            rng: SimRng::seed_from_u64(crate::rng::derive_seed(seed, "agent-rl", 0)),
            table: QTable::default(),
            hp,
            seed,
        }
    }

    pub fn table(&self) -> &QTable {
        &self.table
    }

    pub(crate) fn restore(hp: AgentHyperparams, seed: u64, table: QTable) -> Self {
        let mut agent = Self::new(hp, 1, seed);
        agent.table = table;
        agent
    }
}

impl Agent for TabularAgent {
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
        let q = self.table.get(&discretize(state));
        let eps = self.epsilon;
        epsilon_greedy(&q, eps, &mut self.rng)
    }

    fn observe(&mut self, t: &Transition) -> Result<()> {
        let next = (!t.terminal).then(|| discretize(&t.next_state));
        self.table.update(
            discretize(&t.state),
            t.action,
            t.reward,
            next,
            self.hp.tabular_learning_rate,
            self.hp.discount,
        );
        Ok(())
    }

    fn q_values(&self, state: &StateVector) -> [f64; 3] {
        self.table.get(&discretize(state))
    }

    fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            agent: Self::NAME.to_string(),
            seed: self.seed,
            topology: "tabular".to_string(),
            hyperparams: self.hp.clone(),
            params: Vec::new(),
            table: self.table.sorted_entries(),
        }
    }
}
