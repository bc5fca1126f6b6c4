use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use rayon::prelude::*;

use super::{vertex_id, BuildMeta, Edge, EdgeType, Graph, PropValue, Props, Tag};
use crate::aggregator::Macro;
use crate::error::{Error, Result};
use crate::hash::fnv1a_parts;
use crate::intents::IntentLabel;
use crate::miner::{is_subsequence_with_gap, SequencePattern};
use crate::parser::Session;

/// Everything one pipeline run contributes to the graph.
#[derive(Debug, Clone, Copy)]
pub struct BuildInputs<'a> {
    pub sessions: &'a [Session],
    pub patterns: &'a [SequencePattern],
    pub macros: &'a [Macro],
    /// Intent label per normalized command text.
    pub intent_labels: &'a BTreeMap<String, IntentLabel>,
    /// Gap used to count sequence occurrences; must match the miner's.
    pub max_gap: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BuildReport {
    pub warnings: Vec<String>,
}

type Key = (Tag, String);
type EdgeKey = (EdgeType, Key, Key, u64);

#[derive(Default)]
struct Builder {
    vertices: BTreeMap<Key, Props>,
    edges: BTreeMap<EdgeKey, u64>,
    warnings: Vec<String>,
}

fn str_prop(s: &str) -> PropValue {
    PropValue::Str(s.to_string())
}

impl Builder {
    fn from_graph(g: &Graph) -> Self {
        let key = |i: u32| {
            let v = g.vertex(i);
            (v.tag, v.id.clone())
        };
        let vertices = g.vertices.iter().map(|v| ((v.tag, v.id.clone()), v.props.clone())).collect();
        let edges = g
            .edges
            .iter()
            .map(|e| {
                let pos = if e.etype == EdgeType::SeqCmd { e.prop.unwrap_or(0) } else { 0 };
                ((e.etype, key(e.from), key(e.to), pos), e.prop.unwrap_or(0))
            })
            .collect();
        Self {
            vertices,
            edges,
            warnings: Vec::new(),
        }
    }

    fn vertex(&mut self, tag: Tag, parts: &[&str], init: impl FnOnce() -> Props) -> Key {
        let key = (tag, vertex_id(tag, parts));
        self.vertices.entry(key.clone()).or_insert_with(init);
        key
    }

    fn simple(&mut self, tag: Tag, value: &str) -> Key {
        self.vertex(tag, &[value], || Props::from([("value".to_string(), str_prop(value))]))
    }

    fn bump_n(&mut self, key: &Key) {
        let props = self.vertices.get_mut(key).expect("vertex inserted before counting");
        let n = props.entry("n".to_string()).or_insert(PropValue::Int(0));
        if let PropValue::Int(x) = n {
            *x += 1;
        }
    }

    fn link(&mut self, etype: EdgeType, from: &Key, to: &Key) {
        self.edges.entry((etype, from.clone(), to.clone(), 0)).or_insert(0);
    }

    fn count(&mut self, etype: EdgeType, from: &Key, to: &Key) {
        *self.edges.entry((etype, from.clone(), to.clone(), 0)).or_insert(0) += 1;
    }

    fn order(&mut self, seq: &Key, cmd: &Key, pos: u64) {
        self.edges.insert((EdgeType::SeqCmd, seq.clone(), cmd.clone(), pos), pos);
    }

    fn add_sessions(&mut self, sessions: &[Session], labels: &BTreeMap<String, IntentLabel>) {
        for s in sessions {
            let scope = self.simple(Tag::Scope, &s.scope);
            let user = self.simple(Tag::User, &s.user);
            let ip = self.simple(Tag::Ip, &s.ip);
            self.link(EdgeType::ScopeUser, &scope, &user);
            self.link(EdgeType::ScopeIp, &scope, &ip);
            for c in &s.events {
                let cmd = self.vertex(Tag::Cmd, &[&s.scope, &c.full_text], || {
                    Props::from([
                        ("value".to_string(), str_prop(&c.cmd_type)),
                        ("full_value".to_string(), str_prop(&c.full_text)),
                    ])
                });
                self.bump_n(&cmd);
                self.link(EdgeType::ScopeCmd, &scope, &cmd);
                self.count(EdgeType::UserCmd, &user, &cmd);
                self.count(EdgeType::IpCmd, &ip, &cmd);
                if let Some(dir) = &c.accessed_path {
                    let path = self.vertex(Tag::Path, &[&s.scope, dir], || {
                        Props::from([("value".to_string(), str_prop(dir))])
                    });
                    self.link(EdgeType::ScopePath, &scope, &path);
                    self.link(EdgeType::CmdPath, &cmd, &path);
                    if let Some(file) = &c.accessed_file {
                        let f = self.vertex(Tag::File, &[&s.scope, dir, file], || {
                            Props::from([
                                ("value".to_string(), str_prop(file)),
                                ("path".to_string(), str_prop(dir)),
                            ])
                        });
                        self.link(EdgeType::PathFile, &path, &f);
                        self.link(EdgeType::CmdFile, &cmd, &f);
                    }
                }
                if let Some(label) = labels.get(&c.full_text) {
                    let rendered = label.render();
                    let intent = self.vertex(Tag::Intent, &[&s.scope, &rendered], || {
                        Props::from([("value".to_string(), str_prop(&rendered))])
                    });
                    self.link(EdgeType::CmdIntent, &cmd, &intent);
                }
            }
        }
    }

    fn add_sequences(&mut self, sessions: &[Session], patterns: &[SequencePattern], macros: &[Macro], g: usize) {
        // None = counted in every scope (mined); Some = macro-only scopes.
        let mut seqs: BTreeMap<&[String], Option<BTreeSet<&str>>> = BTreeMap::new();
        for p in patterns {
            seqs.insert(&p.commands, None);
        }
        for m in macros {
            match seqs.entry(&m.commands) {
                std::collections::btree_map::Entry::Vacant(v) => {
                    v.insert(Some(BTreeSet::from([m.scope.as_str()])));
                }
                std::collections::btree_map::Entry::Occupied(mut o) => {
                    if let Some(scopes) = o.get_mut() {
                        scopes.insert(&m.scope);
                    }
                }
            }
        }

        let texts: Vec<Vec<&str>> = sessions
            .iter()
            .map(|s| s.events.iter().map(|e| e.full_text.as_str()).collect())
            .collect();
        let mut containing: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, t) in texts.iter().enumerate() {
            let distinct: HashSet<&str> = t.iter().copied().collect();
            for c in distinct {
                containing.entry(c).or_default().push(i);
            }
        }
        let seqs: Vec<(&[String], Option<BTreeSet<&str>>)> = seqs.into_iter().collect();
        let hits: Vec<Vec<usize>> = seqs
            .par_iter()
            .map(|(cmds, scopes)| {
                let needle: Vec<&str> = cmds.iter().map(String::as_str).collect();
                let Some(first) = needle.first() else {
                    return Vec::new();
                };
                containing
                    .get(first)
                    .map(|cands| {
                        cands
                            .iter()
                            .copied()
                            .filter(|&i| {
                                scopes.as_ref().is_none_or(|sc| sc.contains(sessions[i].scope.as_str()))
                                    && is_subsequence_with_gap(&needle, &texts[i], g)
                            })
                            .collect()
                    })
                    .unwrap_or_default()
            })
            .collect();

        for ((cmds, _), sids) in seqs.iter().zip(hits) {
            for sid in sids {
                let s = &sessions[sid];
                let mut parts: Vec<&str> = vec![&s.scope];
                parts.extend(cmds.iter().map(String::as_str));
                let seq = self.vertex(Tag::Seq, &parts, || {
                    Props::from([("value".to_string(), PropValue::List(cmds.to_vec()))])
                });
                self.bump_n(&seq);
                let scope = (Tag::Scope, vertex_id(Tag::Scope, &[&s.scope]));
                let user = (Tag::User, vertex_id(Tag::User, &[&s.user]));
                let ip = (Tag::Ip, vertex_id(Tag::Ip, &[&s.ip]));
                self.link(EdgeType::ScopeSeq, &scope, &seq);
                self.count(EdgeType::UserSeq, &user, &seq);
                self.count(EdgeType::IpSeq, &ip, &seq);
                for (pos, c) in cmds.iter().enumerate() {
                    let cmd = (Tag::Cmd, vertex_id(Tag::Cmd, &[&s.scope, c]));
                    self.order(&seq, &cmd, pos as u64 + 1);
                }
            }
        }

        for m in macros {
            let mut parts: Vec<&str> = vec![&m.scope];
            parts.extend(m.commands.iter().map(String::as_str));
            let seq = (Tag::Seq, vertex_id(Tag::Seq, &parts));
            if !self.vertices.contains_key(&seq) {
                self.warnings.push(format!(
                    "macro `{}` in scope `{}` never occurs in the corpus; not stored",
                    m.intent, m.scope
                ));
                continue;
            }
            let intent = self.vertex(Tag::Intent, &[&m.scope, &m.intent], || {
                Props::from([("value".to_string(), str_prop(&m.intent))])
            });
            self.link(EdgeType::SeqIntent, &seq, &intent);
        }
    }

    fn finish(self, meta: BuildMeta, labels: &BTreeMap<String, IntentLabel>) -> Result<(Graph, BuildReport)> {
        let mut problems = Vec::new();
        let known: HashSet<&str> = self
            .vertices
            .iter()
            .filter(|((t, _), _)| *t == Tag::Cmd)
            .filter_map(|(_, p)| p.get("full_value").and_then(PropValue::as_str))
            .collect();
        for text in labels.keys() {
            if !known.contains(text.as_str()) {
                problems.push(format!("intent label for unknown command `{text}`"));
            }
        }
        let mut index: HashMap<&Key, u32> = HashMap::with_capacity(self.vertices.len());
        for (i, k) in self.vertices.keys().enumerate() {
            index.insert(k, i as u32);
        }
        let mut edges = Vec::with_capacity(self.edges.len());
        for ((etype, from, to, _), value) in &self.edges {
            match (index.get(from), index.get(to)) {
                (Some(&f), Some(&t)) => edges.push(Edge {
                    etype: *etype,
                    from: f,
                    to: t,
                    prop: etype.prop_name().map(|_| *value),
                }),
                _ => problems.push(format!("{etype:?} edge {} -> {} references a missing vertex", from.1, to.1)),
            }
        }
        if !problems.is_empty() {
            return Err(Error::Build(problems));
        }
        edges.sort_unstable();
        let vertices = self
            .vertices
            .into_iter()
            .map(|((tag, id), props)| super::Vertex { id, tag, props })
            .collect();
        let graph = Graph::from_parts(vertices, edges, meta)?;
        Ok((graph, BuildReport { warnings: self.warnings }))
    }
}

fn validate_inputs(inputs: &BuildInputs<'_>) -> Result<()> {
    let mut problems = Vec::new();
    if inputs.max_gap == 0 {
        problems.push("max_gap must be at least 1".to_string());
    }
    for p in inputs.patterns {
        if p.commands.is_empty() {
            problems.push("empty mined sequence".to_string());
        }
    }
    for m in inputs.macros {
        if m.commands.is_empty() || m.intent.trim().is_empty() {
            problems.push(format!("macro `{}` in scope `{}` is incomplete", m.intent, m.scope));
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(Error::Build(problems))
    }
}

fn json_hash<T: serde::Serialize>(tag: &str, value: &T) -> u64 {
    let bytes = serde_json::to_vec(value).expect("build inputs serialize");
    fnv1a_parts([tag.as_bytes(), &bytes])
}

fn meta_for(inputs: &BuildInputs<'_>) -> BuildMeta {
    BuildMeta {
        corpus_hash: json_hash("sessions", &inputs.sessions),
        config_hash: fnv1a_parts([
            inputs.max_gap.to_le_bytes().to_vec(),
            json_hash("patterns", &inputs.patterns).to_le_bytes().to_vec(),
            json_hash("macros", &inputs.macros).to_le_bytes().to_vec(),
            json_hash("labels", &inputs.intent_labels).to_le_bytes().to_vec(),
        ]),
        build_ts: inputs.sessions.iter().map(|s| s.end_ts).max().unwrap_or(0),
        sessions: inputs.sessions.len() as u64,
        max_gap: inputs.max_gap as u64,
    }
}

/// Builds a graph from one pipeline run.
pub fn build(inputs: BuildInputs<'_>) -> Result<(Graph, BuildReport)> {
    validate_inputs(&inputs)?;
    let mut b = Builder::default();
    b.add_sessions(inputs.sessions, inputs.intent_labels);
    b.add_sequences(inputs.sessions, inputs.patterns, inputs.macros, inputs.max_gap);
    b.finish(meta_for(&inputs), inputs.intent_labels)
}

/// Folds new data into an existing graph. Counts add up; new entities are
/// inserted. Sequences are counted over the new sessions only, so the
/// result equals a single build over both corpora when both runs use the
/// same sequence set.
pub fn apply_update(graph: &Graph, inputs: BuildInputs<'_>) -> Result<(Graph, BuildReport)> {
    validate_inputs(&inputs)?;
    let old = graph.meta();
    if old.max_gap != 0 && old.max_gap != inputs.max_gap as u64 {
        return Err(Error::InvalidArgument(format!(
            "update uses max_gap {} but the graph was built with {}",
            inputs.max_gap, old.max_gap
        )));
    }
    let mut b = Builder::from_graph(graph);
    b.add_sessions(inputs.sessions, inputs.intent_labels);
    b.add_sequences(inputs.sessions, inputs.patterns, inputs.macros, inputs.max_gap);
    let delta = meta_for(&inputs);
    let meta = BuildMeta {
        corpus_hash: fnv1a_parts([old.corpus_hash.to_le_bytes(), delta.corpus_hash.to_le_bytes()]),
        config_hash: fnv1a_parts([old.config_hash.to_le_bytes(), delta.config_hash.to_le_bytes()]),
        build_ts: old.build_ts.max(delta.build_ts),
        sessions: old.sessions + delta.sessions,
        max_gap: inputs.max_gap as u64,
    };
    b.finish(meta, inputs.intent_labels)
}
