//! Property graph of scopes, users, IPs, paths, files, commands, sequences
//! and intents.
//!
//! A [`Graph`] is immutable once built. Vertices are kept sorted by
//! `(tag, id)` and edges by `(type, from, to, position)`, so two graphs
//! built from the same facts compare equal and serialize to the same bytes.
//! Query indices are rebuilt on construction and after loading.

mod build;
mod query;
mod snapshot;

use std::collections::BTreeMap;
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};

use crate::hash::fnv1a_parts;

pub use build::{apply_update, build, BuildInputs, BuildReport};
pub use query::{CmdRow, SeqRow};
pub use snapshot::{snapshot_bytes, snapshot_from_bytes, snapshot_load, snapshot_save, FORMAT_VERSION, MAGIC};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Tag {
    Scope,
    User,
    Ip,
    Path,
    File,
    Cmd,
    Seq,
    Intent,
}

impl Tag {
    pub fn as_str(self) -> &'static str {
        match self {
            Tag::Scope => "scope",
            Tag::User => "user",
            Tag::Ip => "IP",
            Tag::Path => "path",
            Tag::File => "file",
            Tag::Cmd => "cmd",
            Tag::Seq => "seq",
            Tag::Intent => "intent",
        }
    }
}

impl fmt::Display for Tag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Vertex id for `tag` from its identifying parts.
///
/// Scope, user and IP vertices are identified by their raw value; every
/// other tag by a stable 64-bit hash of the tag and its parts, rendered as
/// 16 hex digits. Ids are unique per tag.
pub fn vertex_id(tag: Tag, parts: &[&str]) -> String {
    match tag {
        Tag::Scope | Tag::User | Tag::Ip => parts.first().copied().unwrap_or_default().to_string(),
        _ => {
            let h = fnv1a_parts(std::iter::once(tag.as_str()).chain(parts.iter().copied()));
            format!("{h:016x}")
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum PropValue {
    Int(u64),
    Str(String),
    List(Vec<String>),
}

impl PropValue {
    pub fn as_int(&self) -> Option<u64> {
        match self {
            PropValue::Int(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            PropValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[String]> {
        match self {
            PropValue::List(l) => Some(l),
            _ => None,
        }
    }
}

pub type Props = BTreeMap<String, PropValue>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vertex {
    pub id: String,
    pub tag: Tag,
    pub props: Props,
}

impl Vertex {
    pub fn value(&self) -> Option<&str> {
        self.props.get("value").and_then(PropValue::as_str)
    }

    pub fn n(&self) -> u64 {
        self.props.get("n").and_then(PropValue::as_int).unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EdgeType {
    ScopeCmd,
    ScopeSeq,
    ScopePath,
    ScopeUser,
    ScopeIp,
    UserCmd,
    IpCmd,
    UserSeq,
    IpSeq,
    CmdFile,
    CmdPath,
    PathFile,
    SeqCmd,
    CmdIntent,
    SeqIntent,
}

impl EdgeType {
    /// Name of the single property carried by counted / ordered edges.
    pub fn prop_name(self) -> Option<&'static str> {
        match self {
            EdgeType::UserCmd => Some("user_cmd_n"),
            EdgeType::IpCmd => Some("IP_cmd_n"),
            EdgeType::UserSeq => Some("user_seq_n"),
            EdgeType::IpSeq => Some("IP_seq_n"),
            EdgeType::SeqCmd => Some("seq_cmd_ex"),
            _ => None,
        }
    }

    pub fn endpoints(self) -> (Tag, Tag) {
        use EdgeType::*;
        match self {
            ScopeCmd => (Tag::Scope, Tag::Cmd),
            ScopeSeq => (Tag::Scope, Tag::Seq),
            ScopePath => (Tag::Scope, Tag::Path),
            ScopeUser => (Tag::Scope, Tag::User),
            ScopeIp => (Tag::Scope, Tag::Ip),
            UserCmd => (Tag::User, Tag::Cmd),
            IpCmd => (Tag::Ip, Tag::Cmd),
            UserSeq => (Tag::User, Tag::Seq),
            IpSeq => (Tag::Ip, Tag::Seq),
            CmdFile => (Tag::Cmd, Tag::File),
            CmdPath => (Tag::Cmd, Tag::Path),
            PathFile => (Tag::Path, Tag::File),
            SeqCmd => (Tag::Seq, Tag::Cmd),
            CmdIntent => (Tag::Cmd, Tag::Intent),
            SeqIntent => (Tag::Seq, Tag::Intent),
        }
    }
}

/// An edge between vertex indices. `prop` holds the value of
/// [`EdgeType::prop_name`] when the type has one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Edge {
    pub etype: EdgeType,
    pub from: u32,
    pub to: u32,
    pub prop: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildMeta {
    pub corpus_hash: u64,
    pub config_hash: u64,
    /// Latest session timestamp seen (ms); keeps builds reproducible.
    pub build_ts: i64,
    pub sessions: u64,
    pub max_gap: u64,
}

pub struct Graph {
    vertices: Vec<Vertex>,
    edges: Vec<Edge>,
    meta: BuildMeta,
    index: query::GraphIndex,
    queries: AtomicU64,
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("vertices", &self.vertices.len())
            .field("edges", &self.edges.len())
            .field("meta", &self.meta)
            .finish()
    }
}

/// Structural equality: same vertices and edges; metadata is ignored.
impl PartialEq for Graph {
    fn eq(&self, other: &Self) -> bool {
        self.vertices == other.vertices && self.edges == other.edges
    }
}

impl Graph {
    pub(crate) fn from_parts(vertices: Vec<Vertex>, edges: Vec<Edge>, meta: BuildMeta) -> crate::Result<Self> {
        let problems = check_integrity(&vertices, &edges);
        if !problems.is_empty() {
            return Err(crate::Error::Build(problems));
        }
        let index = query::GraphIndex::new(&vertices, &edges);
        let g = Self {
            vertices,
            edges,
            meta,
            index,
            queries: AtomicU64::new(0),
        };
        let problems = g.check_invariants();
        if !problems.is_empty() {
            return Err(crate::Error::Build(problems));
        }
        Ok(g)
    }

    pub fn empty() -> Self {
        Self::from_parts(Vec::new(), Vec::new(), BuildMeta::default()).expect("empty graph is valid")
    }

    pub fn vertices(&self) -> &[Vertex] {
        &self.vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn meta(&self) -> &BuildMeta {
        &self.meta
    }

    pub fn vertex(&self, idx: u32) -> &Vertex {
        &self.vertices[idx as usize]
    }

    pub fn find(&self, tag: Tag, id: &str) -> Option<u32> {
        self.index.find(tag, id)
    }

    pub fn count(&self, tag: Tag) -> usize {
        self.vertices.iter().filter(|v| v.tag == tag).count()
    }

    /// Number of graph queries served so far.
    pub fn query_count(&self) -> u64 {
        self.queries.load(Ordering::Relaxed)
    }

    pub(crate) fn bump_queries(&self) {
        self.queries.fetch_add(1, Ordering::Relaxed);
    }

    /// Count/sum relations and sequence-position coverage; empty when sound.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let nv = self.vertices.len();
        let mut user_sum = vec![0u64; nv];
        let mut ip_sum = vec![0u64; nv];
        let mut positions: Vec<Vec<u64>> = vec![Vec::new(); nv];
        for e in &self.edges {
            match e.etype {
                EdgeType::UserCmd | EdgeType::UserSeq => user_sum[e.to as usize] += e.prop.unwrap_or(0),
                EdgeType::IpCmd | EdgeType::IpSeq => ip_sum[e.to as usize] += e.prop.unwrap_or(0),
                EdgeType::SeqCmd => {
                    let pos = e.prop.unwrap_or(0);
                    let seq = &self.vertices[e.from as usize];
                    let cmd = &self.vertices[e.to as usize];
                    let expected = seq
                        .props
                        .get("value")
                        .and_then(PropValue::as_list)
                        .and_then(|l| l.get((pos as usize).wrapping_sub(1)));
                    let actual = cmd.props.get("full_value").and_then(PropValue::as_str);
                    if expected.map(String::as_str) != actual {
                        problems.push(format!("seq {} position {pos} does not point at its command", seq.id));
                    }
                    positions[e.from as usize].push(pos);
                }
                _ => {}
            }
        }
        for (i, v) in self.vertices.iter().enumerate() {
            match v.tag {
                Tag::Cmd | Tag::Seq => {
                    let n = v.n();
                    if n == 0 {
                        problems.push(format!("{} {} has n = 0", v.tag, v.id));
                    }
                    if user_sum[i] != n || ip_sum[i] != n {
                        problems.push(format!(
                            "{} {}: n = {n} but user sum = {} and IP sum = {}",
                            v.tag, v.id, user_sum[i], ip_sum[i]
                        ));
                    }
                    if v.tag == Tag::Seq {
                        let k = v.props.get("value").and_then(PropValue::as_list).map_or(0, <[String]>::len);
                        let mut ps = positions[i].clone();
                        ps.sort_unstable();
                        if ps != (1..=k as u64).collect::<Vec<_>>() {
                            problems.push(format!("seq {} positions {ps:?} do not cover 1..{k}", v.id));
                        }
                    }
                }
                _ => {}
            }
        }
        problems
    }
}

fn check_integrity(vertices: &[Vertex], edges: &[Edge]) -> Vec<String> {
    let mut problems = Vec::new();
    for w in vertices.windows(2) {
        if (w[0].tag, &w[0].id) >= (w[1].tag, &w[1].id) {
            problems.push(format!("vertices not in canonical order at {} {}", w[1].tag, w[1].id));
        }
    }
    let n = vertices.len() as u32;
    for e in edges {
        if e.from >= n || e.to >= n {
            problems.push(format!("{:?} edge {}->{} has a dangling endpoint", e.etype, e.from, e.to));
            continue;
        }
        let (ft, tt) = e.etype.endpoints();
        if vertices[e.from as usize].tag != ft || vertices[e.to as usize].tag != tt {
            problems.push(format!("{:?} edge {}->{} connects the wrong vertex types", e.etype, e.from, e.to));
        }
        match (e.etype.prop_name(), e.prop) {
            (Some(name), None) | (Some(name), Some(0)) => {
                problems.push(format!("{:?} edge {}->{} lacks a positive {name}", e.etype, e.from, e.to))
            }
            (None, Some(_)) => problems.push(format!("{:?} edge {}->{} carries a property", e.etype, e.from, e.to)),
            _ => {}
        }
    }
    problems
}
