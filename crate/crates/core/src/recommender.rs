//! Ranked command and sequence continuations.
//!
//! Both rankers score each candidate as a weighted sum of four terms, each
//! divided by its maximum over the candidate pool: a text similarity, the
//! requesting user's count, the requesting IP's count and the global count.

use std::collections::{BTreeSet, HashMap};
use std::num::NonZeroUsize;
use std::path::Path;
use std::sync::Arc;

use arc_swap::ArcSwap;
use lru::LruCache;
use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{CmdRow, Graph, SeqRow};
use crate::parser::{is_path_prefixed, normalize_command, tokenize, ParseConfig, ParsedCommand};

pub const DEFAULT_TOP_N: usize = 5;
pub const DEFAULT_CACHE_CAPACITY: usize = 1024;

fn bigrams(s: &str) -> HashMap<(char, char), u32> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = HashMap::new();
    for w in chars.windows(2) {
        *out.entry((w[0], w[1])).or_insert(0) += 1;
    }
    out
}

/// Dice coefficient over character-bigram multisets. Strings shorter than
/// two characters score 1 when equal and 0 otherwise.
pub fn dice_similarity(p: &str, c: &str) -> f64 {
    if p.chars().count() < 2 || c.chars().count() < 2 {
        return f64::from(u8::from(p == c));
    }
    dice_with(&bigrams(p), p.chars().count() - 1, c)
}

/// `pb` holds the `np` bigrams of the first string, `c` has at least two chars.
fn dice_with(pb: &HashMap<(char, char), u32>, np: usize, c: &str) -> f64 {
    let cb = bigrams(c);
    let nc = c.chars().count() - 1;
    let shared: u32 = pb.iter().map(|(k, &v)| v.min(cb.get(k).copied().unwrap_or(0))).sum();
    2.0 * shared as f64 / (np + nc) as f64
}

/// Jaccard similarity of the token sets of two commands.
pub fn jaccard_similarity_cmd(a: &str, b: &str) -> f64 {
    let ta: BTreeSet<String> = tokenize(a).into_iter().collect();
    let tb: BTreeSet<String> = tokenize(b).into_iter().collect();
    let union = ta.union(&tb).count();
    if union == 0 {
        return 1.0;
    }
    ta.intersection(&tb).count() as f64 / union as f64
}

/// Known value closest to `token` by edit distance; ties prefer a length
/// closer to the token's, then the lexicographically smaller value.
pub fn correct_typo<S: AsRef<str>>(token: &str, known: &[S]) -> Option<String> {
    let len = token.chars().count();
    known
        .iter()
        .map(AsRef::as_ref)
        .min_by_key(|v| (strsim::levenshtein(token, v), v.chars().count().abs_diff(len), *v))
        .map(str::to_string)
}

/// How the first token of a partial command selects candidate values.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Retrieval {
    /// Direct script invocation: every `execute` command.
    Execute,
    /// Values starting with this prefix (the token itself or a correction).
    Prefix(String),
    /// Nothing known to match.
    Nothing,
}

/// Maps the first token of `partial` to a retrieval; `corrected` reports
/// whether typo correction fired.
pub fn resolve_first_token<S: AsRef<str>>(partial: &str, known: &[S]) -> (Retrieval, bool) {
    let first = partial.split_whitespace().next().unwrap_or("");
    if is_path_prefixed(first) {
        return (Retrieval::Execute, false);
    }
    if known.iter().any(|v| v.as_ref().starts_with(first)) {
        return (Retrieval::Prefix(first.to_string()), false);
    }
    match correct_typo(first, known) {
        Some(v) => (Retrieval::Prefix(v), true),
        None => (Retrieval::Nothing, false),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quad {
    pub cmd: f64,
    pub user: f64,
    pub ip: f64,
    pub freq: f64,
}

impl Default for Quad {
    fn default() -> Self {
        Self {
            cmd: 0.25,
            user: 0.25,
            ip: 0.25,
            freq: 0.25,
        }
    }
}

impl Quad {
    pub fn new(cmd: f64, user: f64, ip: f64, freq: f64) -> Self {
        Self { cmd, user, ip, freq }
    }

    fn validate(&self, name: &str) -> Result<()> {
        let all = [self.cmd, self.user, self.ip, self.freq];
        if all.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::Config(format!("{name} weights must lie in [0, 1]")));
        }
        let sum: f64 = all.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("{name} weights sum to {sum}, expected 1")));
        }
        Ok(())
    }

    fn apply(&self, c: &Components) -> f64 {
        self.cmd * c.sim + self.user * c.user + self.ip * c.ip + self.freq * c.freq
    }
}

/// Score weights for command (`command`) and sequence (`sequence`) ranking.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Weights {
    pub command: Quad,
    pub sequence: Quad,
}

impl Weights {
    pub fn validate(&self) -> Result<()> {
        self.command.validate("command")?;
        self.sequence.validate("sequence")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let w: Weights = toml::from_str(text).map_err(|e| Error::Config(format!("weights: {e}")))?;
        w.validate()?;
        Ok(w)
    }

    /// Reads weights from a TOML file; a missing file yields the defaults.
    pub fn load(path: &Path) -> Result<Self> {
        match std::fs::read_to_string(path) {
            Ok(text) => Self::parse(&text),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(Self::default()),
            Err(e) => Err(e.into()),
        }
    }
}

/// The four normalized score terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Components {
    pub sim: f64,
    pub user: f64,
    pub ip: f64,
    pub freq: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payload {
    Command(String),
    Sequence(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCandidate {
    pub payload: Payload,
    pub components: Components,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommandRequest {
    pub partial: String,
    pub user: String,
    pub ip: String,
    pub scope: String,
    pub top_n: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SequenceRequest {
    pub command: String,
    pub user: String,
    pub ip: String,
    pub scope: String,
    pub top_n: usize,
    /// Working directory `command` ran in; relative paths resolve against it.
    #[serde(default)]
    pub cwd: Option<String>,
}

/// A retrieved command with its raw counts; what the cache keeps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandRow {
    pub full_value: String,
    pub n: u64,
    pub user_n: u64,
    pub ip_n: u64,
}

fn ratio(x: u64, max: u64) -> f64 {
    if max == 0 {
        0.0
    } else {
        x as f64 / max as f64
    }
}

fn normalize_by_max(xs: &mut [f64]) {
    let max = xs.iter().copied().fold(0.0, f64::max);
    for x in xs.iter_mut() {
        *x = if max > 0.0 { *x / max } else { 0.0 };
    }
}

/// Scores retrieved rows against the partial command and keeps the top `n`.
/// Ties go to the larger global count, then the smaller text.
pub fn rank_commands(partial: &str, rows: &[CommandRow], w: &Quad, top_n: usize) -> Vec<ScoredCandidate> {
    let pb = bigrams(partial);
    let p_chars = partial.chars().count();
    let mut sims: Vec<f64> = rows
        .iter()
        .map(|r| {
            if p_chars < 2 || r.full_value.chars().count() < 2 {
                f64::from(u8::from(partial == r.full_value))
            } else {
                dice_with(&pb, p_chars - 1, &r.full_value)
            }
        })
        .collect();
    normalize_by_max(&mut sims);
    let mu = rows.iter().map(|r| r.user_n).max().unwrap_or(0);
    let mi = rows.iter().map(|r| r.ip_n).max().unwrap_or(0);
    let mn = rows.iter().map(|r| r.n).max().unwrap_or(0);
    let mut scored: Vec<(ScoredCandidate, u64)> = rows
        .iter()
        .zip(sims)
        .map(|(r, sim)| {
            let components = Components {
                sim,
                user: ratio(r.user_n, mu),
                ip: ratio(r.ip_n, mi),
                freq: ratio(r.n, mn),
            };
            let c = ScoredCandidate {
                payload: Payload::Command(r.full_value.clone()),
                score: w.apply(&components),
                components,
            };
            (c, r.n)
        })
        .collect();
    scored.sort_by(|(a, an), (b, bn)| {
        b.score
            .total_cmp(&a.score)
            .then(bn.cmp(an))
            .then_with(|| a.payload.cmp_key().cmp(&b.payload.cmp_key()))
    });
    scored.into_iter().take(top_n).map(|(c, _)| c).collect()
}

impl Payload {
    fn cmp_key(&self) -> Vec<&str> {
        match self {
            Payload::Command(c) => vec![c.as_str()],
            Payload::Sequence(s) => s.iter().map(String::as_str).collect(),
        }
    }
}

fn command_rows(graph: &Graph, rows: Vec<CmdRow>) -> Vec<CommandRow> {
    rows.into_iter()
        .map(|r| CommandRow {
            full_value: graph.full_value(r.cmd).to_string(),
            n: r.n,
            user_n: r.user_n,
            ip_n: r.ip_n,
        })
        .collect()
}

/// Runs the retrieval for `how` against the graph.
pub fn retrieve_commands(graph: &Graph, how: &Retrieval, scope: &str, user: &str, ip: &str) -> Vec<CommandRow> {
    match how {
        Retrieval::Execute => command_rows(graph, graph.query_commands_execute(scope, user, ip)),
        Retrieval::Prefix(p) => command_rows(graph, graph.query_commands_by_prefix(scope, p, user, ip)),
        Retrieval::Nothing => Vec::new(),
    }
}

fn check_request(text: &str, top_n: usize) -> Result<()> {
    if text.trim().is_empty() {
        return Err(Error::InvalidArgument("request text is empty".into()));
    }
    if top_n == 0 {
        return Err(Error::InvalidArgument("top_n must be at least 1".into()));
    }
    Ok(())
}

/// Uncached command recommendation straight from the graph.
pub fn recommend_commands(graph: &Graph, req: &CommandRequest, w: &Weights) -> Result<Vec<ScoredCandidate>> {
    check_request(&req.partial, req.top_n)?;
    let partial = req.partial.trim_start();
    let (how, _) = resolve_first_token(partial, &graph.scope_values(&req.scope));
    let rows = retrieve_commands(graph, &how, &req.scope, &req.user, &req.ip);
    Ok(rank_commands(partial, &rows, &w.command, req.top_n))
}

/// Lenient parse of an executed command for sequence lookup.
pub fn parse_executed(command: &str, cwd: Option<&str>, user: &str) -> ParsedCommand {
    let cfg = ParseConfig {
        known_commands: BTreeSet::new(),
        ..ParseConfig::default()
    };
    let home = format!("/home/{user}");
    normalize_command(command, cwd.unwrap_or("/"), &home, &cfg).unwrap_or_else(|_| ParsedCommand::unresolved(command, 0))
}

/// Sequence continuations after `req.command`.
pub fn recommend_sequences(graph: &Graph, req: &SequenceRequest, w: &Weights) -> Result<Vec<ScoredCandidate>> {
    check_request(&req.command, req.top_n)?;
    let c = parse_executed(&req.command, req.cwd.as_deref(), &req.user);
    let mut rows = graph.query_sequences_by_cmd_value(&req.scope, &c.cmd_type, &req.user, &req.ip);
    if let (Some(path), Some(file)) = (&c.accessed_path, &c.accessed_file) {
        let cmds = graph.query_commands_by_file(&req.scope, path, file);
        if !cmds.is_empty() {
            rows.extend(graph.query_sequences_by_cmds(&cmds, &req.user, &req.ip));
        }
    }
    let mut seen = BTreeSet::new();
    rows.retain(|r| seen.insert((r.seq, r.position)));
    Ok(rank_sequences(graph, &c.full_text, &rows, &w.sequence, req.top_n))
}

fn rank_sequences(graph: &Graph, executed: &str, rows: &[SeqRow], w: &Quad, top_n: usize) -> Vec<ScoredCandidate> {
    let rows: Vec<(&SeqRow, &[String])> = rows
        .iter()
        .map(|r| (r, graph.seq_commands(r.seq)))
        .filter(|(r, cmds)| (r.position as usize) < cmds.len())
        .map(|(r, cmds)| (r, &cmds[r.position as usize..]))
        .collect();
    let mut sims: Vec<f64> = rows
        .iter()
        .map(|(r, _)| jaccard_similarity_cmd(executed, graph.full_value(r.entry_cmd)))
        .collect();
    normalize_by_max(&mut sims);
    let mu = rows.iter().map(|(r, _)| r.user_n).max().unwrap_or(0);
    let mi = rows.iter().map(|(r, _)| r.ip_n).max().unwrap_or(0);
    let mn = rows.iter().map(|(r, _)| r.n).max().unwrap_or(0);

    let mut best: HashMap<&[String], (ScoredCandidate, u64)> = HashMap::new();
    for ((r, suffix), sim) in rows.iter().zip(sims) {
        let components = Components {
            sim,
            user: ratio(r.user_n, mu),
            ip: ratio(r.ip_n, mi),
            freq: ratio(r.n, mn),
        };
        let cand = ScoredCandidate {
            payload: Payload::Sequence(suffix.to_vec()),
            score: w.apply(&components),
            components,
        };
        match best.get(suffix) {
            Some((old, n)) if (old.score, *n) >= (cand.score, r.n) => {}
            _ => {
                best.insert(suffix, (cand, r.n));
            }
        }
    }
    let mut scored: Vec<(ScoredCandidate, u64)> = best.into_values().collect();
    scored.sort_by(|(a, an), (b, bn)| {
        b.score
            .total_cmp(&a.score)
            .then(bn.cmp(an))
            .then_with(|| a.payload.cmp_key().cmp(&b.payload.cmp_key()))
    });
    scored.into_iter().take(top_n).map(|(c, _)| c).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Recommendation {
    pub candidates: Vec<ScoredCandidate>,
    pub cached: bool,
}

struct Loaded {
    graph: Arc<Graph>,
    generation: u64,
    values: HashMap<String, Arc<Vec<String>>>,
}

impl Loaded {
    fn new(graph: Arc<Graph>, generation: u64) -> Self {
        let values = graph
            .scopes()
            .into_iter()
            .map(|s| {
                let v = graph.scope_values(&s);
                (s, Arc::new(v))
            })
            .collect();
        Self {
            graph,
            generation,
            values,
        }
    }
}

#[derive(Clone)]
struct CacheEntry {
    generation: u64,
    retrieval: Retrieval,
    rows: Arc<Vec<CommandRow>>,
    /// Last ranking served from this slot: (partial, top_n, result).
    ranked: Option<(String, usize, Vec<ScoredCandidate>)>,
}

type Slot = (String, String, String);

/// Serving front end: the current graph behind an atomic pointer plus a
/// per-(scope, user, IP) cache of the last command retrieval.
pub struct Engine {
    state: ArcSwap<Loaded>,
    cache: Mutex<LruCache<Slot, CacheEntry>>,
    weights: Weights,
}

impl Engine {
    pub fn new(graph: Graph, weights: Weights, cache_capacity: usize) -> Result<Self> {
        weights.validate()?;
        let cap = NonZeroUsize::new(cache_capacity)
            .ok_or_else(|| Error::Config("cache capacity must be at least 1".into()))?;
        Ok(Self {
            state: ArcSwap::from_pointee(Loaded::new(Arc::new(graph), 0)),
            cache: Mutex::new(LruCache::new(cap)),
            weights,
        })
    }

    pub fn graph(&self) -> Arc<Graph> {
        self.state.load().graph.clone()
    }

    pub fn generation(&self) -> u64 {
        self.state.load().generation
    }

    pub fn weights(&self) -> &Weights {
        &self.weights
    }

    pub fn has_scope(&self, scope: &str) -> bool {
        self.state.load().values.contains_key(scope)
    }

    /// Installs a new graph; requests already running finish on the old one.
    /// Returns the new generation.
    pub fn swap(&self, graph: Graph) -> u64 {
        let next = self.generation() + 1;
        self.state.store(Arc::new(Loaded::new(Arc::new(graph), next)));
        self.cache.lock().clear();
        next
    }

    pub fn recommend_commands(&self, req: &CommandRequest) -> Result<Recommendation> {
        check_request(&req.partial, req.top_n)?;
        let state = self.state.load_full();
        let partial = req.partial.trim_start();
        let empty = Arc::new(Vec::new());
        let known = state.values.get(&req.scope).unwrap_or(&empty);
        let (how, _) = resolve_first_token(partial, known);
        let slot = (req.scope.clone(), req.user.clone(), req.ip.clone());

        let hit = {
            let mut cache = self.cache.lock();
            match cache.get(&slot) {
                Some(e) if e.generation == state.generation && e.retrieval == how => {
                    if let Some((p, n, ranked)) = &e.ranked {
                        if p == partial && *n == req.top_n {
                            return Ok(Recommendation {
                                candidates: ranked.clone(),
                                cached: true,
                            });
                        }
                    }
                    Some(e.rows.clone())
                }
                _ => None,
            }
        };
        let (rows, cached) = match hit {
            Some(rows) => (rows, true),
            None => (
                Arc::new(retrieve_commands(&state.graph, &how, &req.scope, &req.user, &req.ip)),
                false,
            ),
        };
        let candidates = rank_commands(partial, &rows, &self.weights.command, req.top_n);
        self.cache.lock().put(
            slot,
            CacheEntry {
                generation: state.generation,
                retrieval: how,
                rows,
                ranked: Some((partial.to_string(), req.top_n, candidates.clone())),
            },
        );
        Ok(Recommendation { candidates, cached })
    }

    pub fn recommend_sequences(&self, req: &SequenceRequest) -> Result<Recommendation> {
        let graph = self.graph();
        Ok(Recommendation {
            candidates: recommend_sequences(&graph, req, &self.weights)?,
            cached: false,
        })
    }
}
