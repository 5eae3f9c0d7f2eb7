use std::fs;

use trustsim_core::agents::Checkpoint;
use trustsim_core::env::StateVector;
use trustsim_core::runner::charts::point_count;
use trustsim_core::runner::{read_episodes_csv, run_experiment, run_matrix, simulate, ExperimentConfig, EPISODE_COLUMNS};

fn small(agent: &str, attack: &str, episodes: usize) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.experiment.agent = agent.into();
    cfg.experiment.attack = attack.into();
    cfg.experiment.episodes = Some(episodes);
    cfg.experiment.tdp_extend = false;
    cfg.network.steps = 20;
    cfg
}

#[test]
fn run_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small("drl", "cra", 3);
    cfg.experiment.out = dir.path().join("run");
    let out = run_experiment(&cfg).unwrap();

    for name in [
        "episodes.csv",
        "confusion_matrix.csv",
        "summary.csv",
        "checkpoint.bin",
        "manifest.toml",
        "reward.svg",
        "f1.svg",
    ] {
        assert!(out.out_dir.join(name).is_file(), "missing {name}");
    }

    let text = fs::read_to_string(out.out_dir.join("episodes.csv")).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    assert_eq!(header, EPISODE_COLUMNS);
    assert_eq!(read_episodes_csv(&out.out_dir.join("episodes.csv")).unwrap(), out.records);

    let svg = fs::read_to_string(out.out_dir.join("f1.svg")).unwrap();
    assert_eq!(point_count(&svg), 3);

    let confusion = fs::read_to_string(out.out_dir.join("confusion_matrix.csv")).unwrap();
    let last = out.records.last().unwrap();
    assert!(confusion.contains(&format!("actual_malicious,{},{}", last.tp, last.fn_)));
}

#[test]
fn manifest_reloads_as_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small("rl", "nma", 2);
    cfg.experiment.out = dir.path().to_path_buf();
    run_experiment(&cfg).unwrap();
    let manifest: toml::Table = fs::read_to_string(dir.path().join("manifest.toml")).unwrap().parse().unwrap();
    let reloaded = ExperimentConfig::from_toml(&toml::to_string(&manifest["config"]).unwrap()).unwrap();
    assert_eq!(reloaded.experiment.agent, "rl");
    assert_eq!(reloaded.experiment.episodes, Some(2));
    assert_eq!(reloaded.network, cfg.network);
}

#[test]
fn checkpoint_restores_greedy_values() {
    for agent in ["rl", "drl", "marl"] {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = small(agent, "bfi", 2);
        cfg.experiment.out = dir.path().to_path_buf();
        run_experiment(&cfg).unwrap();
        let sim = simulate(&cfg, false).unwrap();

        let restored = Checkpoint::load(&dir.path().join("checkpoint.bin")).unwrap().restore().unwrap();
        assert_eq!(restored.name(), agent);
        let state = StateVector(std::array::from_fn(|i| 0.05 * i as f64));
        assert_eq!(restored.q_values(&state), sim.agent.q_values(&state), "{agent}");
    }
}

#[test]
fn same_seed_same_records_other_seed_differs() {
    let a = simulate(&small("marl", "aaa", 3), false).unwrap().records;
    let b = simulate(&small("marl", "aaa", 3), false).unwrap().records;
    assert_eq!(a, b);
    let mut other = small("marl", "aaa", 3);
    other.experiment.seed = 7;
    assert_ne!(simulate(&other, false).unwrap().records, a);
}

#[test]
fn matrix_covers_every_combination() {
    let dir = tempfile::tempdir().unwrap();
    let mut base = small("rl", "nma", 2);
    base.experiment.out = dir.path().to_path_buf();
    let agents = vec!["rl".to_string(), "drl".to_string()];
    let attacks = vec!["nma".to_string(), "tdp".to_string(), "none".to_string()];
    let m = run_matrix(&base, &agents, &attacks, &[1, 2], true).unwrap();
    assert_eq!(m.runs.len(), 12);
    assert!(m.runs.iter().all(|r| r.outcome.is_ok() && r.tail_f1.is_some()));
    for attack in &attacks {
        for agent in &agents {
            assert!(m.cell(attack, agent).is_some());
            assert!(dir.path().join(format!("{attack}-{agent}-seed1")).join("episodes.csv").is_file());
        }
    }

    let f1 = fs::read_to_string(dir.path().join("matrix_f1.csv")).unwrap();
    assert_eq!(f1.lines().next(), Some("attack,rl,drl"));
    assert_eq!(f1.lines().count(), 4);
    let runs = fs::read_to_string(dir.path().join("matrix_runs.csv")).unwrap();
    assert_eq!(runs.lines().count(), 13);
}

#[test]
fn unknown_names_fail_cleanly() {
    assert!(simulate(&small("ppo", "nma", 1), false).is_err());
    assert!(simulate(&small("rl", "ddos", 1), false).is_err());
    let mut cfg = small("rl", "nma", 1);
    cfg.abac.backend = "tfhe".into();
    assert!(simulate(&cfg, false).is_err());
}
