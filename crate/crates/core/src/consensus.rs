//! The simulated network: ground-truth roles, trust profiles, and delegated
//! consensus rounds with a two-thirds quorum.

use std::collections::BTreeMap;

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::trust::{apply_evidence, Evidence, TrustProfile, TrustUpdateConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeRole {
    Honest,
    Malicious,
}

impl NodeRole {
    pub fn is_malicious(self) -> bool {
        matches!(self, NodeRole::Malicious)
    }
}

/// Prior and noise used when a network is (re)initialized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrustInit {
    pub alpha0: f64,
    pub beta0: f64,
    pub noise_sd: f64,
    pub alpha_floor: f64,
}

impl Default for TrustInit {
    fn default() -> Self {
        Self {
            alpha0: 8.0,
            beta0: 8.0,
            noise_sd: 0.12,
            alpha_floor: 0.5,
        }
    }
}

/// What happens to a delegate that votes against a block the quorum committed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DissentEvidence {
    Invalid,
    Malicious,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConsensusConfig {
    pub batch_size: u64,
    /// Evidence for Invalid voters when the block is committed anyway.
    pub committed_dissent: DissentEvidence,
}

impl Default for ConsensusConfig {
    fn default() -> Self {
        Self {
            batch_size: 10,
            committed_dissent: DissentEvidence::Invalid,
        }
    }
}

impl ConsensusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(SimError::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub profiles: Vec<TrustProfile>,
    pub roles: Vec<NodeRole>,
    pub delegation_ratio: f64,
    pub pending_tx: u64,
    pub chain_length: u64,
    pub verified_tx_total: u64,
    pub step_index: usize,
    pub episode_index: usize,
}

pub const INITIAL_DELEGATION_RATIO: f64 = 0.5;

impl NetworkState {
    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn trusts(&self) -> Vec<f64> {
        self.profiles.iter().map(TrustProfile::score).collect()
    }

    pub fn honest(&self) -> impl Iterator<Item = usize> + '_ {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, r)| !r.is_malicious())
            .map(|(i, _)| i)
    }

    pub fn malicious(&self) -> impl Iterator<Item = usize> + '_ {
        self.roles
            .iter()
            .enumerate()
            .filter(|(_, r)| r.is_malicious())
            .map(|(i, _)| i)
    }

    pub fn malicious_count(&self) -> usize {
        self.malicious().count()
    }

    /// Mean trust of (honest, malicious) nodes; `None` for an empty class.
    pub fn class_means(&self) -> (Option<f64>, Option<f64>) {
        let mean = |ids: Vec<usize>| {
            if ids.is_empty() {
                None
            } else {
                Some(ids.iter().map(|&i| self.profiles[i].score()).sum::<f64>() / ids.len() as f64)
            }
        };
        (mean(self.honest().collect()), mean(self.malicious().collect()))
    }
}

/// Builds a fresh network: Beta(8, 8) priors with Gaussian noise on alpha and
/// exactly round(rho * n) malicious nodes at uniformly random positions.
pub fn init_network<R: Rng + ?Sized>(
    n: usize,
    malicious_ratio: f64,
    init: &TrustInit,
    rng: &mut R,
) -> Result<NetworkState> {
    if n < 2 {
        return Err(SimError::NetworkTooSmall(n));
    }
    if !(0.0..=1.0).contains(&malicious_ratio) {
        return Err(SimError::Config(format!(
            "malicious ratio {malicious_ratio} outside [0, 1]"
        )));
    }
    let noise = Normal::new(0.0, init.noise_sd)
        .map_err(|e| SimError::Config(format!("noise sd: {e}")))?;
    let profiles = (0..n)
        .map(|_| {
            let alpha = (init.alpha0 + noise.sample(rng)).max(init.alpha_floor);
            TrustProfile::new(alpha, init.beta0)
        })
        .collect::<Result<Vec<_>>>()?;

    let bad = ((malicious_ratio * n as f64) + 0.5).floor() as usize;
    let mut roles = vec![NodeRole::Honest; n];
    for i in sample(rng, n, bad.min(n)) {
        roles[i] = NodeRole::Malicious;
    }

    Ok(NetworkState {
        profiles,
        roles,
        delegation_ratio: INITIAL_DELEGATION_RATIO,
        pending_tx: 0,
        chain_length: 0,
        verified_tx_total: 0,
        step_index: 0,
        episode_index: 1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Vote {
    Valid,
    Invalid,
    Conflicting,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub block_created: bool,
    pub verified_tx: u64,
    pub delegate_votes: BTreeMap<usize, Vote>,
    /// Evidence applied to each node during this round, in application order.
    pub evidence: Vec<(usize, Evidence)>,
}

impl RoundOutcome {
    /// Outcome of a step in which no committee could be formed.
    pub fn idle() -> Self {
        Self {
            block_created: false,
            verified_tx: 0,
            delegate_votes: BTreeMap::new(),
            evidence: Vec::new(),
        }
    }

    pub fn valid_votes(&self) -> usize {
        self.delegate_votes
            .values()
            .filter(|v| **v == Vote::Valid)
            .count()
    }
}

/// Smallest number of Valid votes that commits a block: ceil(2k/3).
pub fn quorum(committee: usize) -> usize {
    (2 * committee).div_ceil(3)
}

/// Runs one delegated round and applies the resulting trust evidence.
///
/// Honest delegates vote Valid; malicious delegates vote whatever
/// `malicious_vote` says. Each Conflicting vote is detected independently with
/// probability `equivocation_detection`, which adds Malicious evidence on top
/// of the Invalid evidence every dissenting vote receives.
pub fn run_consensus_round<R: Rng + ?Sized>(
    state: &mut NetworkState,
    delegates: &[usize],
    malicious_vote: &dyn Fn(usize) -> Vote,
    equivocation_detection: f64,
    consensus: &ConsensusConfig,
    trust_cfg: &TrustUpdateConfig,
    rng: &mut R,
) -> Result<RoundOutcome> {
    if delegates.is_empty() {
        return Err(SimError::EmptyDelegates);
    }
    let n = state.len();
    if let Some(&bad) = delegates.iter().find(|&&d| d >= n) {
        return Err(SimError::DelegateOutOfRange { index: bad, nodes: n });
    }

    let delegate_votes: BTreeMap<usize, Vote> = delegates
        .iter()
        .map(|&d| {
            let vote = match state.roles[d] {
                NodeRole::Honest => Vote::Valid,
                NodeRole::Malicious => malicious_vote(d),
            };
            (d, vote)
        })
        .collect();

    let valid = delegate_votes.values().filter(|v| **v == Vote::Valid).count();
    let block_created = valid >= quorum(delegate_votes.len());
    let verified_tx = if block_created {
        consensus.batch_size
    } else {
        0
    };

    let mut evidence = Vec::new();
    for (&node, &vote) in &delegate_votes {
        match vote {
            Vote::Valid if block_created => evidence.push((node, Evidence::Valid)),
            Vote::Valid => {}
            Vote::Invalid => {
                let kind = match (block_created, consensus.committed_dissent) {
                    (true, DissentEvidence::Malicious) => Evidence::Malicious,
                    _ => Evidence::Invalid,
                };
                evidence.push((node, kind));
            }
            Vote::Conflicting => {
                evidence.push((node, Evidence::Invalid));
                if rng.random::<f64>() < equivocation_detection {
                    evidence.push((node, Evidence::Malicious));
                }
            }
        }
    }
    for &(node, kind) in &evidence {
        state.profiles[node] = apply_evidence(state.profiles[node], kind, trust_cfg);
    }

    state.pending_tx = state.pending_tx.saturating_sub(verified_tx);
    if block_created {
        state.chain_length += 1;
        state.verified_tx_total += verified_tx;
    }

    Ok(RoundOutcome {
        block_created,
        verified_tx,
        delegate_votes,
        evidence,
    })
}

/// Mean honest trust minus mean malicious trust.
pub fn trust_separation(state: &NetworkState) -> Result<f64> {
    match state.class_means() {
        (Some(h), Some(m)) => Ok(h - m),
        (None, _) => Err(SimError::MissingClass("honest")),
        (_, None) => Err(SimError::MissingClass("malicious")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn uniform_net(roles: Vec<NodeRole>, trusts: &[f64]) -> NetworkState {
        let profiles = trusts
            .iter()
            .map(|&t| TrustProfile::new(t * 100.0, (1.0 - t) * 100.0).unwrap())
            .collect();
        NetworkState {
            profiles,
            roles,
            delegation_ratio: 0.5,
            pending_tx: 0,
            chain_length: 0,
            verified_tx_total: 0,
            step_index: 0,
            episode_index: 1,
        }
    }

    #[test]
    fn init_marks_five_of_sixteen() {
        let net = init_network(16, 0.30, &TrustInit::default(), &mut stream(42, "env", 1)).unwrap();
        assert_eq!(net.malicious_count(), 5);
        assert_eq!(net.delegation_ratio, 0.5);
    }

    #[test]
    fn init_without_adversaries() {
        let net = init_network(16, 0.0, &TrustInit::default(), &mut stream(5, "env", 1)).unwrap();
        assert_eq!(net.malicious_count(), 0);
        for t in net.trusts() {
            assert!((t - 0.5).abs() < 0.05);
        }
    }

    #[test]
    fn init_rejects_tiny_networks() {
        assert!(init_network(1, 0.3, &TrustInit::default(), &mut stream(1, "env", 1)).is_err());
    }

    // Monte Carlo oracle: the noise is zero-mean, so initial trust averages 0.5.
    #[test]
    fn initial_mean_trust_is_neutral() {
        let mut total = 0.0;
        let runs = 1000;
        for seed in 0..runs {
            let net = init_network(16, 0.3, &TrustInit::default(), &mut stream(seed, "init", 0)).unwrap();
            total += net.trusts().iter().sum::<f64>() / 16.0;
        }
        let mean = total / runs as f64;
        assert!((0.48..=0.52).contains(&mean), "mean {mean}");
    }

    #[test]
    fn quorum_thresholds() {
        assert_eq!(quorum(3), 2);
        assert_eq!(quorum(5), 4);
        assert_eq!(quorum(6), 4);
        assert_eq!(quorum(9), 6);
        assert_eq!(quorum(1), 1);
    }

    fn round(net: &mut NetworkState, delegates: &[usize]) -> RoundOutcome {
        run_consensus_round(
            net,
            delegates,
            &|_| Vote::Invalid,
            0.5,
            &ConsensusConfig::default(),
            &TrustUpdateConfig::default(),
            &mut stream(0, "round", 0),
        )
        .unwrap()
    }

    #[test]
    fn unanimous_honest_commits() {
        let mut net = uniform_net(vec![NodeRole::Honest; 5], &[0.5; 5]);
        let out = round(&mut net, &[0, 1, 2, 3, 4]);
        assert!(out.block_created);
        assert_eq!(out.verified_tx, 10);
        assert_eq!(net.chain_length, 1);
    }

    #[test]
    fn three_of_five_fails_four_of_six_commits() {
        let mut roles = vec![NodeRole::Honest; 3];
        roles.extend([NodeRole::Malicious; 2]);
        let mut net = uniform_net(roles, &[0.5; 5]);
        let out = round(&mut net, &[0, 1, 2, 3, 4]);
        assert!(!out.block_created);
        assert_eq!(out.verified_tx, 0);

        let mut roles = vec![NodeRole::Honest; 4];
        roles.extend([NodeRole::Malicious; 2]);
        let mut net = uniform_net(roles, &[0.5; 6]);
        assert!(round(&mut net, &[0, 1, 2, 3, 4, 5]).block_created);
    }

    #[test]
    fn evidence_follows_votes() {
        let mut roles = vec![NodeRole::Honest; 4];
        roles.extend([NodeRole::Malicious; 2]);
        let mut net = uniform_net(roles, &[0.5; 6]);
        let before = net.profiles.clone();
        round(&mut net, &[0, 1, 2, 3, 4, 5]);
        assert!(net.profiles[0].alpha() > before[0].alpha());
        assert!(net.profiles[4].beta() > before[4].beta());
        assert_eq!(net.profiles[4].alpha(), before[4].alpha());
    }

    #[test]
    fn round_errors() {
        let mut net = uniform_net(vec![NodeRole::Honest; 3], &[0.5; 3]);
        let cfg = ConsensusConfig::default();
        let tc = TrustUpdateConfig::default();
        let mut rng = stream(0, "r", 0);
        assert!(run_consensus_round(&mut net, &[], &|_| Vote::Invalid, 0.5, &cfg, &tc, &mut rng).is_err());
        assert!(run_consensus_round(&mut net, &[7], &|_| Vote::Invalid, 0.5, &cfg, &tc, &mut rng).is_err());
    }

    #[test]
    fn all_honest_full_committee_grows_chain_every_step() {
        let mut net = init_network(16, 0.0, &TrustInit::default(), &mut stream(3, "env", 1)).unwrap();
        let all: Vec<usize> = (0..16).collect();
        for _ in 0..25 {
            round(&mut net, &all);
        }
        assert_eq!(net.chain_length, 25);
        assert_eq!(net.verified_tx_total, 250);
    }

    #[test]
    fn separation_examples() {
        let roles = vec![
            NodeRole::Honest,
            NodeRole::Honest,
            NodeRole::Malicious,
        ];
        let net = uniform_net(roles.clone(), &[0.8, 0.8, 0.3]);
        assert!((trust_separation(&net).unwrap() - 0.5).abs() < 1e-12);
        let net = uniform_net(roles.clone(), &[0.4, 0.4, 0.4]);
        assert!(trust_separation(&net).unwrap().abs() < 1e-12);
        let net = uniform_net(roles, &[0.9, 0.7, 0.2]);
        assert!((trust_separation(&net).unwrap() - 0.6).abs() < 1e-12);
        let net = uniform_net(vec![NodeRole::Honest; 2], &[0.5, 0.5]);
        assert!(trust_separation(&net).is_err());
    }
}
