use std::path::PathBuf;

use anyhow::Context;
use clap::{Parser, Subcommand};
use cmdgraph_cli::commands::{self, KChoice};
use cmdgraph_cli::service::{self, ServiceConfig};
use cmdgraph_core::MiningConfig;
use tracing_subscriber::EnvFilter;

#[derive(Parser)]
#[command(name = "cmdgraph", version, about = "Mine shell logs into a command graph and serve recommendations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Split a raw event log into cleaned sessions.
    Ingest {
        #[arg(long)]
        input: PathBuf,
        /// Parser settings (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Also write the uncleaned sessions here.
        #[arg(long)]
        raw_out: Option<PathBuf>,
    },
    /// Mine frequent gap-constrained command sequences.
    Mine {
        #[arg(long)]
        input: PathBuf,
        /// Minimum frequency; defaults to two sessions.
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long, default_value_t = 5)]
        gap: usize,
        #[arg(long, default_value_t = 2)]
        min_size: usize,
        #[arg(long, default_value_t = 20)]
        max_size: usize,
        #[arg(long, default_value_t = 1)]
        min_users: usize,
        #[arg(long, default_value_t = 1)]
        min_days: usize,
        #[arg(long, default_value_t = 0.8)]
        redundancy: f64,
        /// Keep consecutive repeats inside patterns.
        #[arg(long)]
        keep_repeats: bool,
        /// Write the raw mining output without post-filters.
        #[arg(long)]
        unfiltered: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cluster mined sequences as a starting point for macros.
    Aggregate {
        #[arg(long)]
        patterns: PathBuf,
        /// Number of clusters or `auto` for a silhouette scan.
        #[arg(long, default_value = "auto")]
        k: KChoice,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label commands with intents.
    Classify {
        #[arg(long, required_unless_present = "print_default_rules")]
        sessions: Option<PathBuf>,
        #[arg(long)]
        rules: Option<PathBuf>,
        /// Print the intent distribution.
        #[arg(long)]
        report: bool,
        /// Write per-command labels here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the built-in rules file and exit.
        #[arg(long)]
        print_default_rules: bool,
    },
    /// Build (or extend) the graph snapshot.
    BuildGraph {
        #[arg(long)]
        sessions: PathBuf,
        #[arg(long)]
        patterns: PathBuf,
        #[arg(long)]
        macros: Option<PathBuf>,
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        gap: Option<usize>,
        /// Snapshot to update incrementally with --sessions.
        #[arg(long)]
        base: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Effort-saving estimates and optional latency measurement.
    Eval {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        sessions_raw: PathBuf,
        #[arg(long)]
        sessions_processed: PathBuf,
        #[arg(long, default_value_t = 0)]
        latency_iterations: usize,
        #[arg(long, default_value_t = 1)]
        parallelism: usize,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve recommendations over HTTP.
    Serve {
        /// Service settings (TOML).
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        snapshot: Option<PathBuf>,
        #[arg(long)]
        bind: Option<String>,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        weights: Option<PathBuf>,
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Write a synthetic shell log with planted operations.
    GenCorpus {
        #[arg(long)]
        seed: Option<u64>,
        /// The small demo corpus with the restart operation.
        #[arg(long)]
        demo: bool,
        #[arg(long)]
        sessions: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        /// Write planted operations and labels here.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
}

fn print_json<T: serde::Serialize>(v: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();

    match Cli::parse().command {
        Command::Ingest { input, config, out, raw_out } => {
            let stats = commands::ingest(&commands::IngestArgs { input, config, out, raw_out })?;
            print_json(&stats)?;
        }
        Command::Mine {
            input,
            theta,
            gap,
            min_size,
            max_size,
            min_users,
            min_days,
            redundancy,
            keep_repeats,
            unfiltered,
            out,
        } => {
            let config = MiningConfig {
                theta,
                max_gap: gap,
                min_size,
                max_size,
                min_users,
                min_days,
                redundancy_r: redundancy,
                collapse_repeats: !keep_repeats,
            };
            let patterns = commands::mine_patterns(&commands::MineArgs { input, config, unfiltered, out })?;
            eprintln!("{} patterns", patterns.len());
        }
        Command::Aggregate { patterns, k, seed, out } => {
            let summary = commands::aggregate(&commands::AggregateArgs { patterns, k, seed, out })?;
            print_json(&summary)?;
        }
        Command::Classify {
            sessions,
            rules,
            report,
            out,
            print_default_rules,
        } => {
            if print_default_rules {
                print!("{}", commands::default_rules_toml());
                return Ok(());
            }
            let sessions = sessions.context("--sessions is required")?;
            let r = commands::classify(&commands::ClassifyArgs { sessions, rules, out })?;
            if report || r.total == 0 {
                print_json(&r)?;
            }
        }
        Command::BuildGraph {
            sessions,
            patterns,
            macros,
            rules,
            gap,
            base,
            out,
        } => {
            let report = commands::build_graph(&commands::BuildGraphArgs {
                sessions,
                patterns,
                macros,
                rules,
                max_gap: gap,
                base,
                out,
            })?;
            for w in &report.warnings {
                tracing::warn!("{w}");
            }
        }
        Command::Eval {
            graph,
            sessions_raw,
            sessions_processed,
            latency_iterations,
            parallelism,
            weights,
            out,
        } => {
            let report = commands::eval(&commands::EvalArgs {
                graph,
                sessions_raw,
                sessions_processed,
                latency_iterations,
                parallelism,
                weights,
                out,
            })?;
            print_json(&report)?;
        }
        Command::Serve {
            config,
            snapshot,
            bind,
            port,
            weights,
            rules,
        } => {
            let mut cfg = match config {
                Some(p) => ServiceConfig::load(&p)?,
                None => ServiceConfig::default(),
            };
            cfg.snapshot = snapshot.or(cfg.snapshot);
            cfg.bind = bind.unwrap_or(cfg.bind);
            cfg.port = port.unwrap_or(cfg.port);
            cfg.weights = weights.or(cfg.weights);
            cfg.rules = rules.or(cfg.rules);
            cfg.apply_env(|k| std::env::var(k).ok())?;
            tokio::runtime::Runtime::new()?.block_on(service::serve(cfg))?;
        }
        Command::GenCorpus {
            seed,
            demo,
            sessions,
            out,
            truth,
        } => {
            let n = commands::gen_corpus(&commands::GenCorpusArgs {
                seed,
                demo,
                sessions,
                out,
                truth,
            })?;
            eprintln!("{n} events");
        }
    }
    Ok(())
}
