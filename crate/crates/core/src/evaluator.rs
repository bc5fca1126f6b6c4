//! Effort-saving estimates and recommendation latency measurement.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::parser::{ParsedCommand, Session, EXECUTE};
use crate::recommender::{self, CommandRequest, Engine, SequenceRequest};

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionReduction {
    pub avg: f64,
    pub max: f64,
    pub sessions: usize,
}

/// Per-session `1 - |processed| / |raw|`, paired by session id. A raw
/// session with no processed counterpart was emptied entirely; raw sessions
/// without commands are skipped.
pub fn cmdline_reduction(raw: &[Session], processed: &[Session]) -> SessionReduction {
    let kept: HashMap<&str, usize> = processed.iter().map(|s| (s.session_id.as_str(), s.events.len())).collect();
    let values: Vec<f64> = raw
        .iter()
        .filter(|s| !s.events.is_empty())
        .map(|s| {
            let y = kept.get(s.session_id.as_str()).copied().unwrap_or(0);
            (1.0 - y as f64 / s.events.len() as f64).max(0.0)
        })
        .collect();
    if values.is_empty() {
        return SessionReduction::default();
    }
    SessionReduction {
        avg: values.iter().sum::<f64>() / values.len() as f64,
        max: values.iter().copied().fold(0.0, f64::max),
        sessions: values.len(),
    }
}

/// What a user would type to reach `cmd` through a file-based suggestion:
/// the command name and the file name (just the file name for a direct
/// script invocation). `None` for commands that access no file.
pub fn typed_form(cmd: &ParsedCommand) -> Option<String> {
    let file = cmd.accessed_file.as_deref()?;
    Some(if cmd.cmd_type == EXECUTE {
        file.to_string()
    } else {
        format!("{} {}", cmd.cmd_type, file)
    })
}

/// `1 - |typed| / |full|` in characters, floored at 0.
pub fn char_ratio(typed: &str, full: &str) -> f64 {
    let f = full.chars().count();
    if f == 0 {
        return 0.0;
    }
    (1.0 - typed.chars().count() as f64 / f as f64).max(0.0)
}

/// Mean character saving over file-accessing commands; `None` when there
/// are none.
pub fn char_reduction<'a, I>(commands: I) -> Option<f64>
where
    I: IntoIterator<Item = &'a ParsedCommand>,
{
    let (sum, n) = commands
        .into_iter()
        .filter_map(|c| typed_form(c).map(|t| char_ratio(&t, &c.full_text)))
        .fold((0.0, 0usize), |(s, n), r| (s + r, n + 1));
    (n > 0).then(|| sum / n as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SeqReduction {
    pub weighted_avg: f64,
    pub min: f64,
    pub max: f64,
}

/// `1 - 1/|s|` per sequence, averaged with support weights. Input pairs are
/// (sequence length, support).
pub fn seq_reduction(items: &[(usize, u64)]) -> Option<SeqReduction> {
    let items: Vec<(f64, f64)> = items
        .iter()
        .filter(|(len, w)| *len > 0 && *w > 0)
        .map(|&(len, w)| (1.0 - 1.0 / len as f64, w as f64))
        .collect();
    if items.is_empty() {
        return None;
    }
    let total: f64 = items.iter().map(|x| x.1).sum();
    Some(SeqReduction {
        weighted_avg: items.iter().map(|(r, w)| r * w).sum::<f64>() / total,
        min: items.iter().map(|x| x.0).fold(f64::INFINITY, f64::min),
        max: items.iter().map(|x| x.0).fold(f64::NEG_INFINITY, f64::max),
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Percentiles {
    pub count: usize,
    pub p50_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

impl Percentiles {
    /// Nearest-rank percentiles of the samples.
    pub fn from_samples(samples: &[Duration]) -> Self {
        if samples.is_empty() {
            return Self::default();
        }
        let mut ms: Vec<f64> = samples.iter().map(|d| d.as_secs_f64() * 1e3).collect();
        ms.sort_by(f64::total_cmp);
        let rank = |p: f64| ms[((p * ms.len() as f64).ceil() as usize).clamp(1, ms.len()) - 1];
        Self {
            count: ms.len(),
            p50_ms: rank(0.50),
            p95_ms: rank(0.95),
            max_ms: *ms.last().expect("non-empty"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LatencyReport {
    pub uncached_command: Percentiles,
    pub cached_command: Percentiles,
    pub sequence: Percentiles,
}

/// Times `iterations` rounds, spread over `parallelism` threads. Each round
/// runs one uncached command recommendation (straight against the graph),
/// one cache-hitting repeat through the engine and one sequence
/// recommendation. Requests are taken round-robin from the slices.
pub fn latency_report(
    engine: &Engine,
    commands: &[CommandRequest],
    sequences: &[SequenceRequest],
    iterations: usize,
    parallelism: usize,
) -> LatencyReport {
    if iterations == 0 || commands.is_empty() {
        return LatencyReport::default();
    }
    let threads = parallelism.clamp(1, iterations);
    let results: Vec<(Vec<Duration>, Vec<Duration>, Vec<Duration>)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                s.spawn(move || {
                    let (mut un, mut ca, mut sq) = (Vec::new(), Vec::new(), Vec::new());
                    for i in (t..iterations).step_by(threads) {
                        let req = &commands[i % commands.len()];
                        let graph = engine.graph();
                        let start = Instant::now();
                        let _ = recommender::recommend_commands(&graph, req, engine.weights());
                        un.push(start.elapsed());

                        let _ = engine.recommend_commands(req);
                        let start = Instant::now();
                        let _ = engine.recommend_commands(req);
                        ca.push(start.elapsed());

                        if !sequences.is_empty() {
                            let sreq = &sequences[i % sequences.len()];
                            let start = Instant::now();
                            let _ = engine.recommend_sequences(sreq);
                            sq.push(start.elapsed());
                        }
                    }
                    (un, ca, sq)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("latency worker panicked")).collect()
    });
    let (mut un, mut ca, mut sq) = (Vec::new(), Vec::new(), Vec::new());
    for (a, b, c) in results {
        un.extend(a);
        ca.extend(b);
        sq.extend(c);
    }
    LatencyReport {
        uncached_command: Percentiles::from_samples(&un),
        cached_command: Percentiles::from_samples(&ca),
        sequence: Percentiles::from_samples(&sq),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EstimatorReport {
    pub cmdline_reduction_avg: f64,
    pub cmdline_reduction_max: f64,
    pub char_reduction_avg: f64,
    pub seq_reduction_weighted_avg: f64,
    pub seq_reduction_min: f64,
    pub seq_reduction_max: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latency: Option<LatencyReport>,
}

/// All three estimates over one corpus. `sequences` are (length, support)
/// pairs for mined sequences and macros.
pub fn estimate(raw: &[Session], processed: &[Session], sequences: &[(usize, u64)]) -> EstimatorReport {
    let lines = cmdline_reduction(raw, processed);
    let chars = char_reduction(processed.iter().flat_map(|s| &s.events)).unwrap_or(0.0);
    let seqs = seq_reduction(sequences).unwrap_or_default();
    EstimatorReport {
        cmdline_reduction_avg: lines.avg,
        cmdline_reduction_max: lines.max,
        char_reduction_avg: chars,
        seq_reduction_weighted_avg: seqs.weighted_avg,
        seq_reduction_min: seqs.min,
        seq_reduction_max: seqs.max,
        latency: None,
    }
}
