//! Command-line front end: single runs, the experiment matrix, and listings.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Parser;
use trustsim_core::agents::agent_names;
use trustsim_core::attacks::{attack_names, MATRIX_ATTACKS};
use trustsim_core::runner::{run_experiment, run_matrix, ExperimentConfig};

#[derive(Debug, Parser)]
#[command(name = "trustsim", version, about = "Trust-based delegated consensus under attack, with RL defenses")]
struct Cli {
    /// TOML configuration file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Defense agent: rl, drl or marl.
    #[arg(long)]
    agent: Option<String>,
    /// Attack family: nma, cra, aaa, bfi, tdp (or none).
    #[arg(long)]
    attack: Option<String>,
    #[arg(long)]
    episodes: Option<usize>,
    /// Steps per episode.
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run every agent against every attack instead of a single combination.
    #[arg(long)]
    matrix: bool,
    /// Comma-separated seeds for matrix mode.
    #[arg(long, value_delimiter = ',')]
    seeds: Option<Vec<u64>>,
    /// Comma-separated agent subset for matrix mode.
    #[arg(long, value_delimiter = ',')]
    agents: Option<Vec<String>>,
    /// Comma-separated attack subset for matrix mode.
    #[arg(long, value_delimiter = ',')]
    attacks: Option<Vec<String>>,
    /// Keep a short dormancy run short instead of extending it.
    #[arg(long)]
    no_tdp_extend: bool,
    /// Print the registered agents and attacks, then exit.
    #[arg(long)]
    list: bool,
}

fn build_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path).with_context(|| format!("reading {}", path.display()))?,
        None => ExperimentConfig::default(),
    };
    let e = &mut cfg.experiment;
    if let Some(a) = &cli.agent {
        e.agent = a.clone();
    }
    if let Some(a) = &cli.attack {
        e.attack = a.clone();
    }
    if cli.episodes.is_some() {
        e.episodes = cli.episodes;
    }
    if let Some(s) = cli.seed {
        e.seed = s;
    }
    if let Some(o) = &cli.out {
        e.out = o.clone();
    }
    if let Some(s) = &cli.seeds {
        e.seeds = s.clone();
    }
    if cli.no_tdp_extend {
        e.tdp_extend = false;
    }
    if let Some(s) = cli.steps {
        cfg.network.steps = s;
    }
    Ok(cfg)
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if cli.list {
        println!("agents: {}", agent_names().collect::<Vec<_>>().join(", "));
        println!("attacks: {}", attack_names().collect::<Vec<_>>().join(", "));
        return Ok(());
    }
    let cfg = build_config(&cli)?;

    if cli.matrix {
        let agents: Vec<String> = cli
            .agents
            .clone()
            .unwrap_or_else(|| agent_names().map(String::from).collect());
        let attacks: Vec<String> = cli
            .attacks
            .clone()
            .unwrap_or_else(|| MATRIX_ATTACKS.iter().map(|s| s.to_string()).collect());
        let seeds = cfg.experiment.seeds.clone();
        let m = run_matrix(&cfg, &agents, &attacks, &seeds, true)?;
        println!("{:<8}{}", "attack", agents.iter().map(|a| format!("{a:>8}")).collect::<String>());
        for attack in &attacks {
            let cells: String = agents
                .iter()
                .map(|a| m.cell(attack, a).map_or(format!("{:>8}", "NA"), |v| format!("{v:>8.3}")))
                .collect();
            println!("{attack:<8}{cells}");
        }
        println!("matrix written to {}", cfg.experiment.out.join("matrix_f1.csv").display());
        let failed = m.runs.iter().filter(|r| r.outcome.is_err()).count();
        if failed > 0 {
            bail!("{failed} run(s) failed; see log above");
        }
        return Ok(());
    }

    let out = run_experiment(&cfg)?;
    let tail = cfg.experiment.tail.min(out.records.len());
    let tail_f1 = out.records[out.records.len() - tail..].iter().map(|r| r.f1).sum::<f64>() / tail as f64;
    println!(
        "{} vs {}: {} episodes, tail-{tail} mean F1 {tail_f1:.3}; outputs in {}",
        cfg.experiment.agent,
        cfg.experiment.attack,
        out.records.len(),
        out.out_dir.display()
    );
    Ok(())
}
