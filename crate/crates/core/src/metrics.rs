//! Detection metrics and per-episode aggregation.

use serde::{Deserialize, Serialize};

use crate::consensus::NodeRole;
use crate::error::{Result, SimError};

/// Positive class is "malicious"; a node is predicted malicious iff its trust
/// is strictly below the threshold.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: u32,
    pub fp: u32,
    pub fn_: u32,
    pub tn: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ConfusionMatrix {
    pub fn total(&self) -> u32 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn scores(&self) -> DetectionScores {
        let ratio = |num: u32, den: u32| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        let precision = ratio(self.tp, self.tp + self.fp);
        let recall = ratio(self.tp, self.tp + self.fn_);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        DetectionScores {
            precision,
            recall,
            f1,
        }
    }
}

pub fn classify(trusts: &[f64], roles: &[NodeRole], theta: f64) -> Result<ConfusionMatrix> {
    if trusts.len() != roles.len() {
        return Err(SimError::LengthMismatch {
            left: trusts.len(),
            right: roles.len(),
        });
    }
    let mut cm = ConfusionMatrix::default();
    for (&t, role) in trusts.iter().zip(roles) {
        let flagged = t < theta;
        match (role.is_malicious(), flagged) {
            (true, true) => cm.tp += 1,
            (true, false) => cm.fn_ += 1,
            (false, true) => cm.fp += 1,
            (false, false) => cm.tn += 1,
        }
    }
    Ok(cm)
}

pub fn f1(cm: &ConfusionMatrix) -> f64 {
    cm.scores().f1
}

/// One row of per-episode reporting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub cumulative_reward: f64,
    pub f1: f64,
    pub precision: f64,
    pub recall: f64,
    pub tp: u32,
    pub fp: u32,
    #[serde(rename = "fn")]
    pub fn_: u32,
    pub tn: u32,
    pub throughput: u64,
    pub chain_length: u64,
    pub mean_kappa: f64,
    pub trust_separation: f64,
    pub delegation_ratio: f64,
}

impl EpisodeRecord {
    pub fn confusion(&self) -> ConfusionMatrix {
        ConfusionMatrix {
            tp: self.tp,
            fp: self.fp,
            fn_: self.fn_,
            tn: self.tn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MeanSd {
    pub mean: f64,
    pub sd: f64,
}

impl MeanSd {
    /// Sample standard deviation; a single value has sd 0.
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Self::default();
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let sd = if n > 1 {
            let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
            (ss / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self { mean, sd }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TailSummary {
    pub episodes: usize,
    pub metrics: Vec<(&'static str, MeanSd)>,
}

impl TailSummary {
    pub fn get(&self, name: &str) -> Option<MeanSd> {
        self.metrics
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, m)| *m)
    }
}

pub fn aggregate_tail(records: &[EpisodeRecord], tail: usize) -> Result<TailSummary> {
    if records.is_empty() {
        return Err(SimError::Insufficient("no episode records".into()));
    }
    if tail == 0 || tail > records.len() {
        return Err(SimError::Insufficient(format!(
            "tail of {tail} requested from {} records",
            records.len()
        )));
    }
    let window = &records[records.len() - tail..];
    let column = |f: fn(&EpisodeRecord) -> f64| MeanSd::of(&window.iter().map(f).collect::<Vec<_>>());
    let metrics = vec![
        ("cumulative_reward", column(|r| r.cumulative_reward)),
        ("f1", column(|r| r.f1)),
        ("precision", column(|r| r.precision)),
        ("recall", column(|r| r.recall)),
        ("throughput", column(|r| r.throughput as f64)),
        ("chain_length", column(|r| r.chain_length as f64)),
        ("mean_kappa", column(|r| r.mean_kappa)),
        ("trust_separation", column(|r| r.trust_separation)),
        ("delegation_ratio", column(|r| r.delegation_ratio)),
    ];
    Ok(TailSummary {
        episodes: tail,
        metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cm(tp: u32, fp: u32, fn_: u32, tn: u32) -> ConfusionMatrix {
        ConfusionMatrix { tp, fp, fn_, tn }
    }

    fn roles(malicious: usize, honest: usize) -> Vec<NodeRole> {
        let mut r = vec![NodeRole::Malicious; malicious];
        r.extend(vec![NodeRole::Honest; honest]);
        r
    }

    #[test]
    fn perfect_separation() {
        let mut trusts = vec![0.2; 5];
        trusts.extend(vec![0.8; 11]);
        let m = classify(&trusts, &roles(5, 11), 0.45).unwrap();
        assert_eq!(m, cm(5, 0, 0, 11));
        assert_eq!(f1(&m), 1.0);
    }

    #[test]
    fn nothing_flagged_and_boundary_is_honest() {
        let trusts = vec![0.45; 16];
        let m = classify(&trusts, &roles(5, 11), 0.45).unwrap();
        assert_eq!((m.tp, m.fp), (0, 0));
        assert_eq!(f1(&m), 0.0);
    }

    #[test]
    fn length_mismatch_is_error() {
        assert!(classify(&[0.5], &roles(1, 1), 0.45).is_err());
    }

    // Hand computation: P = 1/12, R = 1/5, F1 = 2PR/(P+R) = 2/17.
    #[test]
    fn inverted_landscape_f1() {
        let s = cm(1, 11, 4, 0).scores();
        assert!((s.precision - 1.0 / 12.0).abs() < 1e-15);
        assert!((s.recall - 0.2).abs() < 1e-15);
        assert!((s.f1 - 2.0 / 17.0).abs() < 1e-12);
        assert!((s.f1 - 0.1176).abs() < 1e-4);
    }

    #[test]
    fn zero_recall_convention() {
        assert_eq!(f1(&cm(0, 0, 5, 11)), 0.0);
    }

    fn record(ep: usize, f1: f64) -> EpisodeRecord {
        EpisodeRecord {
            episode: ep,
            cumulative_reward: 0.0,
            f1,
            precision: 0.0,
            recall: 0.0,
            tp: 0,
            fp: 0,
            fn_: 0,
            tn: 0,
            throughput: 0,
            chain_length: 0,
            mean_kappa: 0.0,
            trust_separation: 0.0,
            delegation_ratio: 0.5,
        }
    }

    #[test]
    fn tail_aggregation() {
        let recs: Vec<_> = (0..20).map(|i| record(i, 1.0)).collect();
        let s = aggregate_tail(&recs, 10).unwrap().get("f1").unwrap();
        assert_eq!((s.mean, s.sd), (1.0, 0.0));

        let recs: Vec<_> = (0..10)
            .map(|i| record(i, if i % 2 == 0 { 0.8 } else { 1.0 }))
            .collect();
        let s = aggregate_tail(&recs, 10).unwrap().get("f1").unwrap();
        assert!((s.mean - 0.9).abs() < 1e-12);

        assert!(aggregate_tail(&recs, 11).is_err());
        assert!(aggregate_tail(&[], 1).is_err());
    }

    proptest! {
        #[test]
        fn matrix_invariants(tp in 0u32..8, fp in 0u32..12, fn_ in 0u32..8, tn in 0u32..12) {
            let m = cm(tp, fp, fn_, tn);
            let s = m.scores();
            prop_assert!((0.0..=1.0).contains(&s.f1));
            if tp == 0 {
                prop_assert_eq!(s.f1, 0.0);
            }
            prop_assert_eq!(s.f1 == 1.0, fp == 0 && fn_ == 0 && tp > 0);
            if s.precision > 0.0 && s.recall > 0.0 {
                let geo = (s.precision * s.recall).sqrt();
                let arith = (s.precision + s.recall) / 2.0;
                prop_assert!(s.f1 <= geo + 1e-12 && geo <= arith + 1e-12);
            }
        }

        #[test]
        fn totals_equal_node_count(trusts in proptest::collection::vec(0.0f64..1.0, 2..40)) {
            let n = trusts.len();
            let r: Vec<_> = (0..n).map(|i| if i % 3 == 0 { NodeRole::Malicious } else { NodeRole::Honest }).collect();
            let m = classify(&trusts, &r, 0.45).unwrap();
            prop_assert_eq!(m.total() as usize, n);
            let mal = r.iter().filter(|x| x.is_malicious()).count() as u32;
            prop_assert_eq!(m.tp + m.fn_, mal);
        }
    }
}
