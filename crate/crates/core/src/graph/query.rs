use std::collections::{BTreeMap, HashMap};

use super::{vertex_id, Edge, EdgeType, Graph, PropValue, Tag, Vertex};
use crate::parser::EXECUTE;

/// A command candidate with the user/IP edge counts for one requester.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CmdRow {
    pub cmd: u32,
    pub n: u64,
    pub user_n: u64,
    pub ip_n: u64,
}

/// One occurrence of an entry command inside a sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeqRow {
    pub seq: u32,
    pub entry_cmd: u32,
    /// 1-based position of the entry command.
    pub position: u64,
    pub n: u64,
    pub user_n: u64,
    pub ip_n: u64,
}

#[derive(Debug, Default)]
pub(crate) struct GraphIndex {
    by_key: HashMap<(Tag, String), u32>,
    scope_cmds: HashMap<u32, BTreeMap<String, Vec<u32>>>,
    user_cmd: HashMap<(u32, u32), u64>,
    ip_cmd: HashMap<(u32, u32), u64>,
    user_seq: HashMap<(u32, u32), u64>,
    ip_seq: HashMap<(u32, u32), u64>,
    cmd_seqs: HashMap<u32, Vec<(u32, u64)>>,
    file_cmds: HashMap<u32, Vec<u32>>,
    path_cmds: HashMap<u32, Vec<u32>>,
    cmd_files: HashMap<u32, Vec<u32>>,
}

impl GraphIndex {
    pub(crate) fn new(vertices: &[Vertex], edges: &[Edge]) -> Self {
        let mut ix = GraphIndex {
            by_key: vertices
                .iter()
                .enumerate()
                .map(|(i, v)| ((v.tag, v.id.clone()), i as u32))
                .collect(),
            ..Default::default()
        };
        for e in edges {
            let p = e.prop.unwrap_or(0);
            match e.etype {
                EdgeType::ScopeCmd => {
                    let value = vertices[e.to as usize].value().unwrap_or_default().to_string();
                    ix.scope_cmds.entry(e.from).or_default().entry(value).or_default().push(e.to);
                }
                EdgeType::UserCmd => {
                    ix.user_cmd.insert((e.from, e.to), p);
                }
                EdgeType::IpCmd => {
                    ix.ip_cmd.insert((e.from, e.to), p);
                }
                EdgeType::UserSeq => {
                    ix.user_seq.insert((e.from, e.to), p);
                }
                EdgeType::IpSeq => {
                    ix.ip_seq.insert((e.from, e.to), p);
                }
                EdgeType::SeqCmd => ix.cmd_seqs.entry(e.to).or_default().push((e.from, p)),
                EdgeType::CmdFile => {
                    ix.file_cmds.entry(e.to).or_default().push(e.from);
                    ix.cmd_files.entry(e.from).or_default().push(e.to);
                }
                EdgeType::CmdPath => ix.path_cmds.entry(e.to).or_default().push(e.from),
                _ => {}
            }
        }
        ix
    }

    pub(crate) fn find(&self, tag: Tag, id: &str) -> Option<u32> {
        self.by_key.get(&(tag, id.to_string())).copied()
    }
}

impl Graph {
    fn requester(&self, user: &str, ip: &str) -> (Option<u32>, Option<u32>) {
        (self.find(Tag::User, user), self.find(Tag::Ip, ip))
    }

    fn cmd_row(&self, cmd: u32, user: Option<u32>, ip: Option<u32>) -> CmdRow {
        let ix = &self.index;
        CmdRow {
            cmd,
            n: self.vertex(cmd).n(),
            user_n: user.and_then(|u| ix.user_cmd.get(&(u, cmd)).copied()).unwrap_or(0),
            ip_n: ip.and_then(|i| ix.ip_cmd.get(&(i, cmd)).copied()).unwrap_or(0),
        }
    }

    fn seq_rows(&self, cmd: u32, user: Option<u32>, ip: Option<u32>, out: &mut Vec<SeqRow>) {
        let ix = &self.index;
        for &(seq, position) in ix.cmd_seqs.get(&cmd).map(Vec::as_slice).unwrap_or_default() {
            out.push(SeqRow {
                seq,
                entry_cmd: cmd,
                position,
                n: self.vertex(seq).n(),
                user_n: user.and_then(|u| ix.user_seq.get(&(u, seq)).copied()).unwrap_or(0),
                ip_n: ip.and_then(|i| ix.ip_seq.get(&(i, seq)).copied()).unwrap_or(0),
            });
        }
    }

    fn scope_map(&self, scope: &str) -> Option<&BTreeMap<String, Vec<u32>>> {
        self.find(Tag::Scope, scope).and_then(|s| self.index.scope_cmds.get(&s))
    }

    /// Command values (cmd types) known under `scope`, sorted. Not counted
    /// as a query: callers snapshot this once per graph.
    pub fn scope_values(&self, scope: &str) -> Vec<String> {
        self.scope_map(scope).map(|m| m.keys().cloned().collect()).unwrap_or_default()
    }

    /// Scope names in the graph, sorted.
    pub fn scopes(&self) -> Vec<String> {
        self.vertices.iter().filter(|v| v.tag == Tag::Scope).map(|v| v.id.clone()).collect()
    }

    /// Commands of `scope` whose value starts with (or equals) `prefix`.
    pub fn query_commands_by_prefix(&self, scope: &str, prefix: &str, user: &str, ip: &str) -> Vec<CmdRow> {
        self.bump_queries();
        let Some(map) = self.scope_map(scope) else {
            return Vec::new();
        };
        let (u, i) = self.requester(user, ip);
        let mut rows: Vec<CmdRow> = map
            .range(prefix.to_string()..)
            .take_while(|(k, _)| k.starts_with(prefix))
            .flat_map(|(_, cmds)| cmds.iter().map(|&c| self.cmd_row(c, u, i)))
            .collect();
        rows.sort_unstable_by_key(|r| r.cmd);
        rows
    }

    /// Direct script invocations of `scope`.
    pub fn query_commands_execute(&self, scope: &str, user: &str, ip: &str) -> Vec<CmdRow> {
        self.bump_queries();
        let Some(cmds) = self.scope_map(scope).and_then(|m| m.get(EXECUTE)) else {
            return Vec::new();
        };
        let (u, i) = self.requester(user, ip);
        cmds.iter().map(|&c| self.cmd_row(c, u, i)).collect()
    }

    /// One row per (sequence, position) where a command with this value occurs.
    pub fn query_sequences_by_cmd_value(&self, scope: &str, value: &str, user: &str, ip: &str) -> Vec<SeqRow> {
        self.bump_queries();
        let Some(cmds) = self.scope_map(scope).and_then(|m| m.get(value)) else {
            return Vec::new();
        };
        let (u, i) = self.requester(user, ip);
        let mut out = Vec::new();
        for &c in cmds {
            self.seq_rows(c, u, i, &mut out);
        }
        out
    }

    /// Rows for the sequences containing the given command vertices.
    pub fn query_sequences_by_cmds(&self, cmds: &[u32], user: &str, ip: &str) -> Vec<SeqRow> {
        self.bump_queries();
        let (u, i) = self.requester(user, ip);
        let mut out = Vec::new();
        for &c in cmds {
            self.seq_rows(c, u, i, &mut out);
        }
        out
    }

    /// Commands connected to the file `(path, file)` of `scope`.
    pub fn query_commands_by_file(&self, scope: &str, path: &str, file: &str) -> Vec<u32> {
        self.bump_queries();
        self.find(Tag::File, &vertex_id(Tag::File, &[scope, path, file]))
            .and_then(|f| self.index.file_cmds.get(&f))
            .cloned()
            .unwrap_or_default()
    }

    /// Same answer as [`Graph::query_commands_by_file`], reached through the
    /// path vertex instead.
    pub fn query_commands_by_file_via_path(&self, scope: &str, path: &str, file: &str) -> Vec<u32> {
        self.bump_queries();
        let ix = &self.index;
        let Some(p) = self.find(Tag::Path, &vertex_id(Tag::Path, &[scope, path])) else {
            return Vec::new();
        };
        let mut out: Vec<u32> = ix
            .path_cmds
            .get(&p)
            .map(Vec::as_slice)
            .unwrap_or_default()
            .iter()
            .copied()
            .filter(|c| {
                ix.cmd_files.get(c).is_some_and(|fs| {
                    fs.iter().any(|&f| {
                        let v = self.vertex(f);
                        v.value() == Some(file) && v.props.get("path").and_then(PropValue::as_str) == Some(path)
                    })
                })
            })
            .collect();
        out.sort_unstable();
        out
    }

    /// Full command text of a cmd vertex.
    pub fn full_value(&self, cmd: u32) -> &str {
        self.vertex(cmd).props.get("full_value").and_then(PropValue::as_str).unwrap_or_default()
    }

    /// Command list of a seq vertex.
    pub fn seq_commands(&self, seq: u32) -> &[String] {
        self.vertex(seq).props.get("value").and_then(PropValue::as_list).unwrap_or_default()
    }
}
