//! Experiment orchestration: single runs, the agent-by-attack matrix, and
//! the files each run leaves on disk.

pub mod charts;
mod config;

pub use config::{AbacSection, ExperimentConfig, ExperimentSection, DEFAULT_EPISODES, DEFAULT_SEEDS, TDP_EPISODES};

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::agents::{build_agent, Agent};
use crate::attacks::build_attack;
use crate::env::{Environment, EvidenceEvent};
use crate::error::{Result, SimError};
use crate::metrics::{aggregate_tail, EpisodeRecord};

pub const EPISODE_COLUMNS: [&str; 14] = [
    "episode",
    "cumulative_reward",
    "f1",
    "precision",
    "recall",
    "tp",
    "fp",
    "fn",
    "tn",
    "throughput",
    "chain_length",
    "mean_kappa",
    "trust_separation",
    "delegation_ratio",
];

/// Everything one run produced in memory.
pub struct Simulation {
    pub config: ExperimentConfig,
    pub warnings: Vec<String>,
    pub records: Vec<EpisodeRecord>,
    pub agent: Box<dyn Agent>,
    pub evidence: Vec<EvidenceEvent>,
}

/// Runs the episode loop without touching the filesystem.
pub fn simulate(cfg: &ExperimentConfig, record_evidence: bool) -> Result<Simulation> {
    let mut cfg = cfg.clone();
    let warnings = cfg.resolve()?;
    for w in &warnings {
        log::warn!("{w}");
    }
    let e = &cfg.experiment;
    let episodes = cfg.episodes();
    let attack = build_attack(&e.attack, &cfg.attack)?;
    let mut agent = build_agent(&e.agent, &cfg.agent, episodes, e.seed)?;
    let mut env = Environment::new(
        cfg.network.clone(),
        cfg.consensus,
        cfg.trust,
        cfg.reward,
        attack,
        cfg.abac.load_policy()?,
        &cfg.abac.backend,
        e.seed,
    )?;
    env.record_evidence(record_evidence);
    let mut records = Vec::with_capacity(episodes);
    for episode in 1..=episodes {
        let r = env.run_episode(episode, agent.as_mut())?;
        log::debug!(
            "{}/{} seed {} episode {episode}: f1 {:.3} reward {:.1} ratio {:.2}",
            e.agent,
            e.attack,
            e.seed,
            r.f1,
            r.cumulative_reward,
            r.delegation_ratio
        );
        records.push(r);
    }
    Ok(Simulation {
        warnings,
        records,
        agent,
        evidence: env.evidence_log().to_vec(),
        config: cfg,
    })
}

pub struct RunOutput {
    pub records: Vec<EpisodeRecord>,
    pub warnings: Vec<String>,
    pub out_dir: PathBuf,
}

/// Runs one experiment and writes episodes.csv, confusion_matrix.csv,
/// summary.csv, checkpoint.bin, manifest.toml and the two charts.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let sim = simulate(cfg, false)?;
    let out = sim.config.experiment.out.clone();
    fs::create_dir_all(&out)?;
    write_episodes_csv(&out.join("episodes.csv"), &sim.records)?;
    write_confusion_csv(&out.join("confusion_matrix.csv"), sim.records.last().expect("at least one episode"))?;
    write_summary_csv(&out.join("summary.csv"), &sim.records, sim.config.experiment.tail)?;
    sim.agent.checkpoint().save(&out.join("checkpoint.bin"))?;
    write_manifest(&out.join("manifest.toml"), &sim.config, &sim.warnings)?;
    emit_charts(&sim.records, &out)?;
    Ok(RunOutput {
        records: sim.records,
        warnings: sim.warnings,
        out_dir: out,
    })
}

pub fn write_episodes_csv(path: &Path, records: &[EpisodeRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_episodes_csv(path: &Path) -> Result<Vec<EpisodeRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(SimError::from)).collect()
}

fn write_confusion_csv(path: &Path, last: &EpisodeRecord) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["", "predicted_malicious", "predicted_honest"])?;
    w.write_record(["actual_malicious", &last.tp.to_string(), &last.fn_.to_string()])?;
    w.write_record(["actual_honest", &last.fp.to_string(), &last.tn.to_string()])?;
    w.flush()?;
    Ok(())
}

fn write_summary_csv(path: &Path, records: &[EpisodeRecord], tail: usize) -> Result<()> {
    let summary = aggregate_tail(records, tail.min(records.len()))?;
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["metric", "mean", "sd", "episodes"])?;
    for (name, ms) in &summary.metrics {
        w.write_record([
            name.to_string(),
            ms.mean.to_string(),
            ms.sd.to_string(),
            summary.episodes.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct Manifest<'a> {
    crate_version: &'a str,
    warnings: &'a [String],
    config: &'a ExperimentConfig,
}

fn write_manifest(path: &Path, cfg: &ExperimentConfig, warnings: &[String]) -> Result<()> {
    let text = toml::to_string(&Manifest {
        crate_version: env!("CARGO_PKG_VERSION"),
        warnings,
        config: cfg,
    })
    .map_err(|e| SimError::Config(e.to_string()))?;
    fs::write(path, text)?;
    Ok(())
}

/// Writes reward.svg and f1.svg; one point per record.
pub fn emit_charts(records: &[EpisodeRecord], out: &Path) -> Result<()> {
    if records.is_empty() {
        return Err(SimError::Insufficient("no episode records to chart".into()));
    }
    let rewards: Vec<f64> = records.iter().map(|r| r.cumulative_reward).collect();
    let f1s: Vec<f64> = records.iter().map(|r| r.f1).collect();
    fs::write(out.join("reward.svg"), charts::line_chart("Cumulative reward per episode", "reward", &rewards))?;
    fs::write(out.join("f1.svg"), charts::line_chart("Detection F1 per episode", "F1", &f1s))?;
    Ok(())
}

/// One cell of the matrix for one seed.
pub struct MatrixRun {
    pub agent: String,
    pub attack: String,
    pub seed: u64,
    pub outcome: std::result::Result<Vec<EpisodeRecord>, String>,
    pub tail_f1: Option<f64>,
}

pub struct MatrixSummary {
    pub agents: Vec<String>,
    pub attacks: Vec<String>,
    pub runs: Vec<MatrixRun>,
    /// Median over seeds of the tail-mean F1, keyed by (attack, agent).
    pub cells: BTreeMap<(String, String), Option<f64>>,
}

impl MatrixSummary {
    pub fn cell(&self, attack: &str, agent: &str) -> Option<f64> {
        self.cells.get(&(attack.to_string(), agent.to_string())).copied().flatten()
    }

    pub fn records(&self, attack: &str, agent: &str) -> Vec<&[EpisodeRecord]> {
        self.runs
            .iter()
            .filter(|r| r.attack == attack && r.agent == agent)
            .filter_map(|r| r.outcome.as_ref().ok().map(Vec::as_slice))
            .collect()
    }
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

/// Runs every agent x attack x seed combination in parallel. A failing run
/// marks its cell missing; the rest continue. With `write` set, each run's
/// artifacts go to `<out>/<attack>-<agent>-seed<seed>/` and the matrix to
/// `<out>/matrix_f1.csv`.
pub fn run_matrix(
    base: &ExperimentConfig,
    agents: &[String],
    attacks: &[String],
    seeds: &[u64],
    write: bool,
) -> Result<MatrixSummary> {
    if agents.is_empty() || attacks.is_empty() || seeds.is_empty() {
        return Err(SimError::Config("matrix needs at least one agent, attack and seed".into()));
    }
    let root = base.experiment.out.clone();
    let mut jobs = Vec::new();
    for attack in attacks {
        for agent in agents {
            for &seed in seeds {
                jobs.push((attack.clone(), agent.clone(), seed));
            }
        }
    }
    let tail = base.experiment.tail;
    let runs: Vec<MatrixRun> = jobs
        .into_par_iter()
        .map(|(attack, agent, seed)| {
            let mut cfg = base.clone();
            cfg.experiment.attack = attack.clone();
            cfg.experiment.agent = agent.clone();
            cfg.experiment.seed = seed;
            cfg.experiment.out = root.join(format!("{attack}-{agent}-seed{seed}"));
            let result = if write {
                run_experiment(&cfg).map(|o| o.records)
            } else {
                simulate(&cfg, false).map(|s| s.records)
            };
            let outcome = result.map_err(|e| {
                log::error!("{attack}/{agent} seed {seed} failed: {e}");
                e.to_string()
            });
            let tail_f1 = outcome.as_ref().ok().and_then(|records| {
                aggregate_tail(records, tail.min(records.len()))
                    .ok()
                    .and_then(|s| s.get("f1"))
                    .map(|m| m.mean)
            });
            MatrixRun {
                agent,
                attack,
                seed,
                outcome,
                tail_f1,
            }
        })
        .collect();

    let mut cells = BTreeMap::new();
    for attack in attacks {
        for agent in agents {
            let mut vals: Vec<f64> = runs
                .iter()
                .filter(|r| &r.attack == attack && &r.agent == agent)
                .filter_map(|r| r.tail_f1)
                .collect();
            let complete = vals.len() == seeds.len();
            cells.insert((attack.clone(), agent.clone()), if complete { median(&mut vals) } else { None });
        }
    }
    let summary = MatrixSummary {
        agents: agents.to_vec(),
        attacks: attacks.to_vec(),
        runs,
        cells,
    };
    if write {
        fs::create_dir_all(&root)?;
        write_matrix_csv(&root.join("matrix_f1.csv"), &summary)?;
        write_matrix_runs_csv(&root.join("matrix_runs.csv"), &summary)?;
    }
    Ok(summary)
}

pub fn write_matrix_csv(path: &Path, m: &MatrixSummary) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["attack".to_string()];
    header.extend(m.agents.iter().cloned());
    w.write_record(&header)?;
    for attack in &m.attacks {
        let mut row = vec![attack.clone()];
        for agent in &m.agents {
            row.push(m.cell(attack, agent).map_or("NA".to_string(), |v| format!("{v:.4}")));
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_matrix_runs_csv(path: &Path, m: &MatrixSummary) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["attack", "agent", "seed", "tail_f1", "error"])?;
    for r in &m.runs {
        w.write_record([
            r.attack.clone(),
            r.agent.clone(),
            r.seed.to_string(),
            r.tail_f1.map_or("NA".to_string(), |v| format!("{v:.4}")),
            r.outcome.as_ref().err().cloned().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
