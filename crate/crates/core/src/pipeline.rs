//! The whole offline flow in one call: raw events to a built graph.

use std::collections::BTreeMap;

use crate::aggregator::Macro;
use crate::error::Result;
use crate::graph::{build, BuildInputs, BuildReport, Graph};
use crate::intents::{default_rules, label_commands, IntentLabel, IntentRule};
use crate::miner::{mine, post_filter, MiningConfig, SequencePattern};
use crate::parser::{parse_log, process_sessions, ParseConfig, ParseStats, RawEvent, Session};

#[derive(Debug, Clone)]
pub struct Pipeline {
    pub parse: ParseConfig,
    pub mining: MiningConfig,
    pub rules: Vec<IntentRule>,
}

impl Default for Pipeline {
    fn default() -> Self {
        Self {
            parse: ParseConfig::default(),
            mining: MiningConfig::default(),
            rules: default_rules(),
        }
    }
}

#[derive(Debug)]
pub struct PipelineOutput {
    /// Sessions as split from the log, before path resolution and filtering.
    pub raw_sessions: Vec<Session>,
    pub sessions: Vec<Session>,
    pub stats: ParseStats,
    /// Mining output before the post-filters.
    pub mined: Vec<SequencePattern>,
    pub patterns: Vec<SequencePattern>,
    pub labels: BTreeMap<String, IntentLabel>,
    pub graph: Graph,
    pub report: BuildReport,
}

impl Pipeline {
    pub fn run(&self, events: Vec<RawEvent>, macros: &[Macro]) -> Result<PipelineOutput> {
        let parsed = parse_log(events);
        let (sessions, mut stats) = process_sessions(&parsed.sessions, &self.parse);
        stats.merge(&parsed.stats);
        let mined = if sessions.is_empty() {
            Vec::new()
        } else {
            mine(&sessions, &self.mining)?
        };
        let patterns = post_filter(&mined, &self.mining)?;
        let labels = label_commands(sessions.iter().flat_map(|s| &s.events), &self.rules);
        let (graph, report) = build(BuildInputs {
            sessions: &sessions,
            patterns: &patterns,
            macros,
            intent_labels: &labels,
            max_gap: self.mining.max_gap,
        })?;
        Ok(PipelineOutput {
            raw_sessions: parsed.sessions,
            sessions,
            stats,
            mined,
            patterns,
            labels,
            graph,
            report,
        })
    }
}
