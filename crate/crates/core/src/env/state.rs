//! The 16-feature observation.

use std::collections::VecDeque;

use serde::Serialize;

use crate::consensus::NetworkState;

pub const FEATURES: usize = 16;

pub const FEATURE_NAMES: [&str; FEATURES] = [
    "mean_trust",
    "variance",
    "skewness",
    "median",
    "range",
    "iqr",
    "coeff_variation",
    "verified_tx_norm",
    "chain_length_norm",
    "honest_malicious_ratio",
    "low_trust_frac",
    "high_trust_frac",
    "delegation_efficiency",
    "throughput_rate",
    "recent_block_rate",
    "collusion_score",
];

pub const MEAN_TRUST: usize = 0;
pub const VARIANCE: usize = 1;
pub const SKEWNESS: usize = 2;
pub const MEDIAN: usize = 3;
pub const RANGE: usize = 4;
pub const IQR: usize = 5;
pub const COEFF_VARIATION: usize = 6;
pub const VERIFIED_TX_NORM: usize = 7;
pub const CHAIN_LENGTH_NORM: usize = 8;
pub const HONEST_MALICIOUS_RATIO: usize = 9;
pub const LOW_TRUST_FRAC: usize = 10;
pub const HIGH_TRUST_FRAC: usize = 11;
pub const DELEGATION_EFFICIENCY: usize = 12;
pub const THROUGHPUT_RATE: usize = 13;
pub const RECENT_BLOCK_RATE: usize = 14;
pub const COLLUSION_SCORE: usize = 15;

/// Nominal range of each feature, used for discretization and input scaling.
pub fn feature_ranges(kappa_max: f64) -> [(f64, f64); FEATURES] {
    let mut r = [(0.0, 1.0); FEATURES];
    r[VARIANCE] = (0.0, 0.25);
    r[SKEWNESS] = (-3.0, 3.0);
    r[COEFF_VARIATION] = (0.0, 2.0);
    r[COLLUSION_SCORE] = (0.0, kappa_max);
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateVector(pub [f64; FEATURES]);

impl StateVector {
    pub fn get(&self, i: usize) -> f64 {
        self.0[i]
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Features mapped into roughly [0, 1] by their nominal ranges.
    pub fn scaled(&self, ranges: &[(f64, f64); FEATURES]) -> [f64; FEATURES] {
        let mut out = [0.0; FEATURES];
        for (o, (v, (lo, hi))) in out.iter_mut().zip(self.0.iter().zip(ranges)) {
            *o = (v - lo) / (hi - lo);
        }
        out
    }
}

/// Per-step results remembered for the windowed features.
#[derive(Debug, Clone)]
pub struct StepHistory {
    window: usize,
    steps: VecDeque<(u64, bool)>,
    pub last_verified: u64,
    pub last_committee: usize,
}

impl StepHistory {
    pub fn new(window: usize) -> Self {
        Self {
            window: window.max(1),
            steps: VecDeque::with_capacity(window),
            last_verified: 0,
            last_committee: 0,
        }
    }

    pub fn push(&mut self, verified: u64, block: bool, committee: usize) {
        if self.steps.len() == self.window {
            self.steps.pop_front();
        }
        self.steps.push_back((verified, block));
        self.last_verified = verified;
        self.last_committee = committee;
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

/// Normalization constants for the chain-progress features.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateScales {
    pub steps: u64,
    pub batch_size: u64,
    pub kappa_max: f64,
}

/// One observation hidden from the agent: the trust of `node` reads as
/// `value` in every feature whose bit is set in `mask`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Corruption {
    pub node: usize,
    pub mask: u16,
    pub value: f64,
}

pub fn sample_variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n as f64;
    xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// Adjusted Fisher-Pearson sample skewness; 0 for constant or tiny samples.
pub fn sample_skewness(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 3 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    if m2 <= 1e-24 {
        return 0.0;
    }
    let m3 = xs.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / n;
    let g1 = m3 / m2.powf(1.5);
    g1 * (n * (n - 1.0)).sqrt() / (n - 2.0)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// min(1/|gap|, kappa_max); 0 when either class is absent.
pub fn collusion_score(honest_mean: Option<f64>, malicious_mean: Option<f64>, kappa_max: f64) -> f64 {
    match (honest_mean, malicious_mean) {
        (Some(h), Some(m)) => {
            let gap = (h - m).abs();
            if gap < 1.0 / kappa_max {
                kappa_max
            } else {
                (1.0 / gap).min(kappa_max)
            }
        }
        _ => 0.0,
    }
}

fn trust_features(trusts: &[f64], out: &mut [f64; FEATURES]) {
    let n = trusts.len() as f64;
    let mean = trusts.iter().sum::<f64>() / n;
    let variance = sample_variance(trusts);
    let mut sorted = trusts.to_vec();
    sorted.sort_by(f64::total_cmp);
    out[MEAN_TRUST] = mean;
    out[VARIANCE] = variance;
    out[SKEWNESS] = sample_skewness(trusts);
    out[MEDIAN] = quantile_sorted(&sorted, 0.5);
    out[RANGE] = sorted[sorted.len() - 1] - sorted[0];
    out[IQR] = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    out[COEFF_VARIATION] = if mean == 0.0 { 0.0 } else { variance.sqrt() / mean };
    out[LOW_TRUST_FRAC] = trusts.iter().filter(|&&t| t < 0.3).count() as f64 / n;
    out[HIGH_TRUST_FRAC] = trusts.iter().filter(|&&t| t > 0.7).count() as f64 / n;
}

fn class_means(trusts: &[f64], net: &NetworkState) -> (Option<f64>, Option<f64>) {
    let mean = |ids: Vec<usize>| {
        (!ids.is_empty()).then(|| ids.iter().map(|&i| trusts[i]).sum::<f64>() / ids.len() as f64)
    };
    (mean(net.honest().collect()), mean(net.malicious().collect()))
}

/// Computes the observation, optionally through attacker-controlled views.
pub fn extract_state(
    net: &NetworkState,
    history: &StepHistory,
    scales: &StateScales,
    corruptions: &[Corruption],
) -> StateVector {
    let trusts = net.trusts();
    let mut f = [0.0; FEATURES];
    trust_features(&trusts, &mut f);

    let (h, m) = class_means(&trusts, net);
    f[HONEST_MALICIOUS_RATIO] = match (h, m) {
        (Some(h), Some(m)) if h + m > 0.0 => h / (h + m),
        _ => 0.5,
    };
    f[COLLUSION_SCORE] = collusion_score(h, m, scales.kappa_max);

    let batch = scales.batch_size.max(1) as f64;
    let tx_cap = (scales.steps.max(1) * scales.batch_size.max(1)) as f64;
    f[VERIFIED_TX_NORM] = (net.verified_tx_total as f64 / tx_cap).clamp(0.0, 1.0);
    f[CHAIN_LENGTH_NORM] = (net.chain_length as f64 / scales.steps.max(1) as f64).clamp(0.0, 1.0);
    f[DELEGATION_EFFICIENCY] = if history.last_committee == 0 {
        0.0
    } else {
        (history.last_verified as f64 / history.last_committee as f64 / batch).clamp(0.0, 1.0)
    };
    if !history.is_empty() {
        let len = history.len() as f64;
        let verified: u64 = history.steps.iter().map(|s| s.0).sum();
        let blocks = history.steps.iter().filter(|s| s.1).count();
        f[THROUGHPUT_RATE] = (verified as f64 / (len * batch)).clamp(0.0, 1.0);
        f[RECENT_BLOCK_RATE] = blocks as f64 / len;
    }

    for c in corruptions {
        if c.node >= trusts.len() {
            continue;
        }
        let mut seen = trusts.clone();
        seen[c.node] = c.value;
        let mut g = [0.0; FEATURES];
        trust_features(&seen, &mut g);
        for (i, v) in g.iter().enumerate() {
            if c.mask & (1 << i) != 0 {
                f[i] = *v;
            }
        }
    }
    StateVector(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::testutil::net;
    use proptest::prelude::*;

    fn scales() -> StateScales {
        StateScales {
            steps: 100,
            batch_size: 10,
            kappa_max: 10.0,
        }
    }

    #[test]
    fn degenerate_distribution() {
        let n = net(&[0.5; 16], 5);
        let s = extract_state(&n, &StepHistory::new(10), &scales(), &[]);
        for i in [VARIANCE, SKEWNESS, RANGE, IQR] {
            assert!(s.get(i).abs() < 1e-12, "{}", FEATURE_NAMES[i]);
        }
        assert!((s.get(MEAN_TRUST) - 0.5).abs() < 1e-12);
        assert!(s.get(COEFF_VARIATION).abs() < 1e-12);
        assert_eq!(s.get(COLLUSION_SCORE), 10.0);
    }

    #[test]
    fn collusion_examples() {
        assert!((collusion_score(Some(0.8), Some(0.3), 10.0) - 2.0).abs() < 1e-12);
        assert_eq!(collusion_score(Some(0.4), Some(0.4), 10.0), 10.0);
        assert_eq!(collusion_score(Some(0.4), None, 10.0), 0.0);
    }

    // Oracle values computed independently with scipy.stats on the same sample.
    #[test]
    fn statistics_match_reference() {
        let xs = [0.1, 0.2, 0.2, 0.4, 0.9];
        assert!((sample_variance(&xs) - 0.103).abs() < 1e-12);
        assert!((sample_skewness(&xs) - 1.6607968306529903).abs() < 1e-9);
        let mut s = xs.to_vec();
        s.sort_by(f64::total_cmp);
        assert!((quantile_sorted(&s, 0.25) - 0.2).abs() < 1e-12);
        assert!((quantile_sorted(&s, 0.75) - 0.4).abs() < 1e-12);
        assert!((quantile_sorted(&[1.0, 2.0, 3.0, 4.0], 0.5) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn eclipse_rewrites_masked_features_only() {
        let trusts: Vec<f64> = (0..16).map(|i| 0.3 + 0.03 * i as f64).collect();
        let n = net(&trusts, 5);
        let h = StepHistory::new(10);
        let clean = extract_state(&n, &h, &scales(), &[]);
        let seen = extract_state(
            &n,
            &h,
            &scales(),
            &[Corruption {
                node: 10,
                mask: 1 << MEAN_TRUST,
                value: 0.0,
            }],
        );
        assert!(seen.get(MEAN_TRUST) < clean.get(MEAN_TRUST));
        assert_eq!(seen.get(VARIANCE), clean.get(VARIANCE));
        assert_eq!(seen.get(COLLUSION_SCORE), clean.get(COLLUSION_SCORE));
    }

    #[test]
    fn window_features() {
        let mut h = StepHistory::new(10);
        for i in 0..15 {
            h.push(if i % 2 == 0 { 10 } else { 0 }, i % 2 == 0, 4);
        }
        assert_eq!(h.len(), 10);
        let s = extract_state(&net(&[0.5; 4], 1), &h, &scales(), &[]);
        assert!((s.get(RECENT_BLOCK_RATE) - 0.5).abs() < 1e-12);
        assert!((s.get(THROUGHPUT_RATE) - 0.5).abs() < 1e-12);
        assert!((s.get(DELEGATION_EFFICIENCY) - 0.25).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn order_statistics_sane(trusts in prop::collection::vec(0.01f64..0.99, 2..32), bad in 0usize..3) {
            let n = net(&trusts, bad.min(trusts.len()));
            let s = extract_state(&n, &StepHistory::new(10), &scales(), &[]);
            prop_assert!(s.is_finite());
            let min = trusts.iter().cloned().fold(f64::INFINITY, f64::min);
            let max = trusts.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            // The fixture rounds trusts through alpha/beta, so compare loosely.
            prop_assert!(s.get(MEDIAN) >= min - 1e-9 && s.get(MEDIAN) <= max + 1e-9);
            prop_assert!(s.get(IQR) <= s.get(RANGE) + 1e-12);
            if s.get(VARIANCE) == 0.0 {
                prop_assert!(s.get(RANGE).abs() < 1e-12);
            }
            for i in [LOW_TRUST_FRAC, HIGH_TRUST_FRAC, HONEST_MALICIOUS_RATIO] {
                prop_assert!((0.0..=1.0).contains(&s.get(i)));
            }
            prop_assert!((0.0..=10.0).contains(&s.get(COLLUSION_SCORE)));
        }
    }
}
