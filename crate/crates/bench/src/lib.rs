//! Shared fixtures for the benchmarks.

use std::collections::BTreeMap;

use cmdgraph_core::corpus::{generate, latency_fixture, CorpusConfig};
use cmdgraph_core::graph::{build, BuildInputs};
use cmdgraph_core::parser::{parse_log, process_sessions};
use cmdgraph_core::{Graph, ParseConfig, SequencePattern, Session};

/// Cleaned sessions of a generated corpus.
pub fn corpus_sessions(sessions: usize, seed: u64) -> Vec<Session> {
    let cfg = CorpusConfig {
        seed,
        sessions,
        ..CorpusConfig::default()
    };
    let parsed = parse_log(generate(&cfg).events);
    process_sessions(&parsed.sessions, &ParseConfig::default()).0
}

/// The large serving graph used for latency checks.
pub fn serving_graph(cmds: usize, seqs: usize) -> (Graph, Vec<Session>, Vec<SequencePattern>) {
    let (sessions, patterns) = latency_fixture(11, cmds, seqs);
    let (graph, _) = build(BuildInputs {
        sessions: &sessions,
        patterns: &patterns,
        macros: &[],
        intent_labels: &BTreeMap::new(),
        max_gap: 5,
    })
    .expect("fixture graph builds");
    (graph, sessions, patterns)
}
