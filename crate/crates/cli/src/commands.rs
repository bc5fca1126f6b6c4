//! Subcommand implementations. Each one reads and writes files so the
//! pipeline can be run step by step.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context};
use cmdgraph_core::aggregator::{build_distance_matrix, cluster, default_grid, load_macros, select_k, validate_macros, Macro};
use cmdgraph_core::corpus::{generate, CorpusConfig};
use cmdgraph_core::evaluator::{estimate, latency_report, EstimatorReport};
use cmdgraph_core::graph::{apply_update, build, snapshot_load, snapshot_save, BuildInputs, BuildReport};
use cmdgraph_core::intents::{classify_corpus, default_rules, label_commands, load_rules, rules_to_toml, IntentReport};
use cmdgraph_core::io::{read_ndjson, write_ndjson};
use cmdgraph_core::miner::{mine, post_filter};
use cmdgraph_core::parser::{parse_log, process_sessions, ParseStats};
use cmdgraph_core::recommender::DEFAULT_CACHE_CAPACITY;
use cmdgraph_core::{
    CommandRequest, Engine, IntentRule, MiningConfig, ParseConfig, RawEvent, SequencePattern, SequenceRequest, Session,
    Tag, Weights,
};
use serde::{Deserialize, Serialize};

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

fn rules_from(path: Option<&Path>) -> anyhow::Result<Vec<IntentRule>> {
    Ok(match path {
        Some(p) => load_rules(p).with_context(|| format!("loading rules {}", p.display()))?,
        None => default_rules(),
    })
}

#[derive(Debug, Clone, Default)]
pub struct GenCorpusArgs {
    pub seed: Option<u64>,
    pub demo: bool,
    pub sessions: Option<usize>,
    pub out: PathBuf,
    pub truth: Option<PathBuf>,
}

/// Writes a synthetic event log; returns the number of events.
pub fn gen_corpus(args: &GenCorpusArgs) -> anyhow::Result<usize> {
    let mut cfg = if args.demo { CorpusConfig::demo() } else { CorpusConfig::default() };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.sessions {
        cfg.sessions = n;
    }
    let corpus = generate(&cfg);
    write_ndjson(&args.out, &corpus.events)?;
    if let Some(p) = &args.truth {
        write_json(p, &corpus.truth)?;
    }
    Ok(corpus.events.len())
}

#[derive(Debug, Clone, Default)]
pub struct IngestArgs {
    pub input: PathBuf,
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    /// Sessions as split from the log, before cleaning.
    pub raw_out: Option<PathBuf>,
}

pub fn ingest(args: &IngestArgs) -> anyhow::Result<ParseStats> {
    let cfg = match &args.config {
        Some(p) => ParseConfig::load(p)?,
        None => ParseConfig::default(),
    };
    let events: Vec<RawEvent> = read_ndjson(&args.input)?;
    let parsed = parse_log(events);
    let (sessions, mut stats) = process_sessions(&parsed.sessions, &cfg);
    stats.merge(&parsed.stats);
    write_ndjson(&args.out, &sessions)?;
    if let Some(p) = &args.raw_out {
        write_ndjson(p, &parsed.sessions)?;
    }
    Ok(stats)
}

#[derive(Debug, Clone, Default)]
pub struct MineArgs {
    pub input: PathBuf,
    pub config: MiningConfig,
    /// Skip the user/day, collapse and redundancy filters.
    pub unfiltered: bool,
    pub out: PathBuf,
}

pub fn mine_patterns(args: &MineArgs) -> anyhow::Result<Vec<SequencePattern>> {
    let sessions: Vec<Session> = read_ndjson(&args.input)?;
    if sessions.is_empty() {
        bail!("{} holds no sessions", args.input.display());
    }
    let mined = mine(&sessions, &args.config)?;
    let patterns = if args.unfiltered { mined } else { post_filter(&mined, &args.config)? };
    write_ndjson(&args.out, &patterns)?;
    Ok(patterns)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KChoice {
    Auto,
    Fixed(usize),
}

impl FromStr for KChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(KChoice::Auto);
        }
        match s.parse::<usize>() {
            Ok(k) if k > 0 => Ok(KChoice::Fixed(k)),
            _ => Err(format!("expected `auto` or a positive integer, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AggregateArgs {
    pub patterns: PathBuf,
    pub k: KChoice,
    pub seed: u64,
    pub out: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterMember {
    pub commands: Vec<String>,
    pub support: usize,
}

/// One line of the clusters file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub cluster: usize,
    pub medoid: Vec<String>,
    pub members: Vec<ClusterMember>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AggregateSummary {
    pub k: usize,
    pub silhouette_scan: Vec<(usize, f64)>,
    pub largest_cluster: usize,
}

pub fn aggregate(args: &AggregateArgs) -> anyhow::Result<AggregateSummary> {
    let patterns: Vec<SequencePattern> = read_ndjson(&args.patterns)?;
    let n = patterns.len();
    if n == 0 {
        write_ndjson::<ClusterRecord, _>(&args.out, &[])?;
        return Ok(AggregateSummary::default());
    }
    let seqs: Vec<Vec<String>> = patterns.iter().map(|p| p.commands.clone()).collect();
    let m = build_distance_matrix(&seqs);
    let (k, scan) = match args.k {
        KChoice::Fixed(k) if k > n => bail!("k = {k} exceeds the {n} patterns"),
        KChoice::Fixed(k) => (k, Vec::new()),
        KChoice::Auto if n < 3 => (n, Vec::new()),
        KChoice::Auto => {
            let (lo, hi, step) = default_grid(n);
            select_k(&m, lo, hi, step, args.seed)?
        }
    };
    let c = cluster(&m, k, args.seed)?;
    let mut records: Vec<ClusterRecord> = c
        .medoids
        .iter()
        .enumerate()
        .map(|(id, &med)| ClusterRecord {
            cluster: id,
            medoid: seqs[med].clone(),
            members: Vec::new(),
        })
        .collect();
    for (i, &a) in c.assignment.iter().enumerate() {
        records[a].members.push(ClusterMember {
            commands: seqs[i].clone(),
            support: patterns[i].support,
        });
    }
    write_ndjson(&args.out, &records)?;
    Ok(AggregateSummary {
        k,
        silhouette_scan: scan,
        largest_cluster: records.iter().map(|r| r.members.len()).max().unwrap_or(0),
    })
}

#[derive(Debug, Clone, Default)]
pub struct ClassifyArgs {
    pub sessions: PathBuf,
    pub rules: Option<PathBuf>,
    /// Per-command labels, one object per line.
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelRecord {
    pub command: String,
    pub intent: String,
}

pub fn classify(args: &ClassifyArgs) -> anyhow::Result<IntentReport> {
    let sessions: Vec<Session> = read_ndjson(&args.sessions)?;
    let rules = rules_from(args.rules.as_deref())?;
    let report = classify_corpus(sessions.iter().flat_map(|s| &s.events), &rules);
    if let Some(p) = &args.out {
        let labels = label_commands(sessions.iter().flat_map(|s| &s.events), &rules);
        let rows: Vec<LabelRecord> = labels
            .into_iter()
            .map(|(command, l)| LabelRecord {
                command,
                intent: l.render(),
            })
            .collect();
        write_ndjson(p, &rows)?;
    }
    Ok(report)
}

pub fn default_rules_toml() -> String {
    rules_to_toml(&default_rules())
}

#[derive(Debug, Clone, Default)]
pub struct BuildGraphArgs {
    pub sessions: PathBuf,
    pub patterns: PathBuf,
    pub macros: Option<PathBuf>,
    pub rules: Option<PathBuf>,
    pub max_gap: Option<usize>,
    /// Existing snapshot to extend with the given sessions.
    pub base: Option<PathBuf>,
    pub out: PathBuf,
}

pub fn build_graph(args: &BuildGraphArgs) -> anyhow::Result<BuildReport> {
    let sessions: Vec<Session> = read_ndjson(&args.sessions)?;
    let patterns: Vec<SequencePattern> = read_ndjson(&args.patterns)?;
    let macros: Vec<Macro> = match &args.macros {
        Some(p) => load_macros(p)?,
        None => Vec::new(),
    };
    let rules = rules_from(args.rules.as_deref())?;
    let base = args.base.as_deref().map(snapshot_load).transpose()?;

    let mut scopes: BTreeSet<String> = sessions.iter().map(|s| s.scope.clone()).collect();
    if let Some(g) = &base {
        scopes.extend(g.scopes());
    }
    let problems = validate_macros(&macros, Some(&scopes));
    if !problems.is_empty() {
        bail!("invalid macros: {}", problems.join("; "));
    }

    let labels = label_commands(sessions.iter().flat_map(|s| &s.events), &rules);
    let max_gap = args
        .max_gap
        .or_else(|| base.as_ref().map(|g| g.meta().max_gap as usize).filter(|&g| g > 0))
        .unwrap_or(MiningConfig::default().max_gap);
    let inputs = BuildInputs {
        sessions: &sessions,
        patterns: &patterns,
        macros: &macros,
        intent_labels: &labels,
        max_gap,
    };
    let (graph, report) = match &base {
        Some(g) => apply_update(g, inputs)?,
        None => build(inputs)?,
    };
    snapshot_save(&graph, &args.out)?;
    Ok(report)
}

#[derive(Debug, Clone, Default)]
pub struct EvalArgs {
    pub graph: PathBuf,
    pub sessions_raw: PathBuf,
    pub sessions_processed: PathBuf,
    /// Latency rounds; 0 skips the latency run.
    pub latency_iterations: usize,
    pub parallelism: usize,
    pub weights: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

pub fn eval(args: &EvalArgs) -> anyhow::Result<EstimatorReport> {
    let graph = snapshot_load(&args.graph)?;
    let raw: Vec<Session> = read_ndjson(&args.sessions_raw)?;
    let processed: Vec<Session> = read_ndjson(&args.sessions_processed)?;
    let seqs: Vec<(usize, u64)> = graph
        .vertices()
        .iter()
        .filter(|v| v.tag == Tag::Seq)
        .filter_map(|v| {
            let len = v.props.get("value")?.as_list()?.len();
            Some((len, v.n()))
        })
        .collect();
    let mut report = estimate(&raw, &processed, &seqs);

    if args.latency_iterations > 0 {
        let weights = match &args.weights {
            Some(p) => Weights::load(p)?,
            None => Weights::default(),
        };
        let (commands, sequences) = latency_requests(&processed);
        let engine = Engine::new(graph, weights, DEFAULT_CACHE_CAPACITY)?;
        report.latency = Some(latency_report(
            &engine,
            &commands,
            &sequences,
            args.latency_iterations,
            args.parallelism.max(1),
        ));
    }
    if let Some(p) = &args.out {
        write_ndjson(p, [&report])?;
    }
    Ok(report)
}

/// Replays the processed sessions as requests: a prefix of every command
/// for typeahead and the command itself for sequence lookup.
fn latency_requests(sessions: &[Session]) -> (Vec<CommandRequest>, Vec<SequenceRequest>) {
    let mut commands = Vec::new();
    let mut sequences = Vec::new();
    for s in sessions {
        for c in &s.events {
            let cut = c.full_text.char_indices().nth(c.full_text.chars().count().div_ceil(2)).map_or(c.full_text.len(), |x| x.0);
            commands.push(CommandRequest {
                partial: c.full_text[..cut].to_string(),
                user: s.user.clone(),
                ip: s.ip.clone(),
                scope: s.scope.clone(),
                top_n: 5,
            });
            sequences.push(SequenceRequest {
                command: c.full_text.clone(),
                user: s.user.clone(),
                ip: s.ip.clone(),
                scope: s.scope.clone(),
                top_n: 5,
                cwd: None,
            });
        }
    }
    (commands, sequences)
}
