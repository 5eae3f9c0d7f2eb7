//! Bayesian trust profiles and Thompson-sampling delegate selection.
//!
//! Each node carries a Beta(alpha, beta) posterior over its reliability. Its
//! trust score is the posterior mean. Evidence updates are asymmetric: a
//! confirmed malicious act both adds negative mass and decays positive mass.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Kind of behavioral evidence observed for a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Evidence {
    Valid,
    Invalid,
    Malicious,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrustProfile {
    alpha: f64,
    beta: f64,
}

impl TrustProfile {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite() {
            Ok(Self { alpha, beta })
        } else {
            Err(SimError::InvalidProfile { alpha, beta })
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn score(&self) -> f64 {
        trust_score(self)
    }

    /// Adds positive evidence mass directly (attack perturbations).
    pub fn boost_alpha(&mut self, amount: f64) {
        debug_assert!(amount >= 0.0);
        self.alpha += amount;
    }

    /// Adds negative evidence mass directly (attack perturbations).
    pub fn penalize_beta(&mut self, amount: f64) {
        debug_assert!(amount >= 0.0);
        self.beta += amount;
    }

    /// One Thompson draw from Beta(alpha, beta) via the gamma-ratio construction.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        sample_beta(self.alpha, self.beta, rng)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrustUpdateConfig {
    pub delta_valid: f64,
    pub delta_invalid: f64,
    pub delta_malicious: f64,
    /// Multiplicative decay of alpha on confirmed malicious behavior.
    pub decay_gamma: f64,
}

impl Default for TrustUpdateConfig {
    fn default() -> Self {
        Self {
            delta_valid: 1.0,
            delta_invalid: 1.0,
            delta_malicious: 2.0,
            decay_gamma: 0.9,
        }
    }
}

impl TrustUpdateConfig {
    pub fn validate(&self) -> Result<()> {
        let deltas = [self.delta_valid, self.delta_invalid, self.delta_malicious];
        if deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(SimError::Config("trust deltas must be positive".into()));
        }
        if !(self.decay_gamma > 0.0 && self.decay_gamma < 1.0) {
            return Err(SimError::Config("decay_gamma must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// Fraction of nodes that form the consensus committee.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DelegationPolicy {
    ratio: f64,
    node_count: usize,
}

pub const MIN_DELEGATION_RATIO: f64 = 0.1;
pub const MAX_DELEGATION_RATIO: f64 = 1.0;

impl DelegationPolicy {
    pub fn new(ratio: f64, node_count: usize) -> Result<Self> {
        if !(MIN_DELEGATION_RATIO..=MAX_DELEGATION_RATIO).contains(&ratio) {
            return Err(SimError::Config(format!(
                "delegation ratio {ratio} outside [0.1, 1.0]"
            )));
        }
        if node_count == 0 {
            return Err(SimError::Config("node count must be positive".into()));
        }
        Ok(Self { ratio, node_count })
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// k = max(1, round-half-up(ratio * N)), never more than N.
    pub fn committee_size(&self) -> usize {
        committee_size(self.ratio, self.node_count)
    }
}

pub fn committee_size(ratio: f64, node_count: usize) -> usize {
    // The epsilon absorbs products such as 0.15625 * 16 landing a hair under .5.
    let k = (ratio * node_count as f64 + 0.5 + 1e-9).floor() as usize;
    k.clamp(1, node_count.max(1))
}

pub fn trust_score(profile: &TrustProfile) -> f64 {
    profile.alpha / (profile.alpha + profile.beta)
}

pub fn apply_evidence(
    profile: TrustProfile,
    kind: Evidence,
    cfg: &TrustUpdateConfig,
) -> TrustProfile {
    let TrustProfile { mut alpha, mut beta } = profile;
    match kind {
        Evidence::Valid => alpha += cfg.delta_valid,
        Evidence::Invalid => beta += cfg.delta_invalid,
        Evidence::Malicious => {
            beta += cfg.delta_malicious;
            alpha *= cfg.decay_gamma;
        }
    }
    TrustProfile { alpha, beta }
}

pub fn sample_beta<R: Rng + ?Sized>(alpha: f64, beta: f64, rng: &mut R) -> f64 {
    let x = Gamma::new(alpha, 1.0).expect("alpha > 0").sample(rng);
    let y = Gamma::new(beta, 1.0).expect("beta > 0").sample(rng);
    let total = x + y;
    if total > 0.0 {
        x / total
    } else {
        // Both draws underflowed; fall back to the posterior mean.
        alpha / (alpha + beta)
    }
}

/// Thompson selection over the whole roster.
pub fn select_delegates<R: Rng + ?Sized>(
    profiles: &[TrustProfile],
    policy: &DelegationPolicy,
    rng: &mut R,
) -> Vec<usize> {
    let candidates: Vec<usize> = (0..profiles.len()).collect();
    select_from(profiles, &candidates, policy.committee_size(), rng)
}

/// Draws one Beta sample per candidate and returns the indices of the `k`
/// largest draws, sorted ascending. Fewer candidates than `k` selects all.
pub fn select_from<R: Rng + ?Sized>(
    profiles: &[TrustProfile],
    candidates: &[usize],
    k: usize,
    rng: &mut R,
) -> Vec<usize> {
    let mut draws: Vec<(f64, usize)> = candidates
        .iter()
        .map(|&i| (profiles[i].sample(rng), i))
        .collect();
    draws.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut chosen: Vec<usize> = draws.into_iter().take(k).map(|(_, i)| i).collect();
    chosen.sort_unstable();
    chosen
}
