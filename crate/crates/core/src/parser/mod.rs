//! Raw shell log → clean, path-resolved sessions.
//!
//! Events are grouped per (user, scope), split into sessions at every `ssh`
//! command, then normalized while a working directory is threaded through
//! each session. `cd` commands only move that directory and are dropped.

mod lexer;
pub mod paths;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::net::Ipv4Addr;
use std::path::Path;

use chrono::{DateTime, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use lexer::{lex, LexError, Token};
pub use paths::is_path_prefixed;

/// Marker `cmd_type` for commands that invoke a script by path.
pub const EXECUTE: &str = "execute";

/// Value used when the opening `ssh` command carries no parseable address.
pub const UNKNOWN_IP: &str = "0.0.0.0";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawEvent {
    #[serde(rename = "command")]
    pub command_text: String,
    pub scope: String,
    pub user: String,
    /// Milliseconds since the Unix epoch, UTC.
    #[serde(rename = "ts")]
    pub timestamp: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ParsedCommand {
    pub cmd_type: String,
    pub full_text: String,
    #[serde(rename = "path", default)]
    pub accessed_path: Option<String>,
    #[serde(rename = "file", default)]
    pub accessed_file: Option<String>,
    pub ts: i64,
}

impl ParsedCommand {
    /// Unnormalized form used between segmentation and path resolution.
    pub fn unresolved(text: &str, ts: i64) -> Self {
        let full_text = text.trim().to_string();
        Self {
            cmd_type: leading_cmd_type(&full_text),
            full_text,
            accessed_path: None,
            accessed_file: None,
            ts,
        }
    }

    /// UTC calendar day of execution.
    pub fn day(&self) -> NaiveDate {
        utc_day(self.ts)
    }
}

pub fn utc_day(ts_ms: i64) -> NaiveDate {
    DateTime::from_timestamp_millis(ts_ms)
        .map(|d| d.date_naive())
        .unwrap_or_default()
}

fn leading_cmd_type(text: &str) -> String {
    let first = text.split_whitespace().next().unwrap_or("");
    if is_path_prefixed(first) {
        EXECUTE.to_string()
    } else {
        first.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub ip: String,
    pub scope: String,
    pub user: String,
    pub start_ts: i64,
    pub end_ts: i64,
    #[serde(rename = "commands")]
    pub events: Vec<ParsedCommand>,
}

impl Session {
    pub fn home(&self) -> String {
        format!("/home/{}", self.user)
    }

    /// UTC day the session was opened.
    pub fn day(&self) -> NaiveDate {
        utc_day(self.start_ts)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ParseConfig {
    /// Commands seen in fewer sessions than this are dropped.
    pub min_supp: usize,
    /// Commands whose last path-like argument is an accessed file.
    pub file_commands: BTreeSet<String>,
    /// Options removed before storage, keyed by command; `*` applies to all.
    pub strip_options: BTreeMap<String, Vec<String>>,
    /// Leading tokens accepted as commands. Empty accepts anything.
    pub known_commands: BTreeSet<String>,
}

const DEFAULT_FILE_COMMANDS: &[&str] = &[
    "cat", "vi", "vim", "tail", "head", "less", "more", "grep", "sh", "rm", "touch", "cp", "mv",
];

const DEFAULT_KNOWN_COMMANDS: &[&str] = &[
    "awk", "bash", "cat", "cd", "chmod", "chown", "clear", "cp", "crontab", "curl", "date", "df",
    "dig", "docker", "du", "echo", "egrep", "env", "exit", "export", "fdisk", "fgrep", "file",
    "find", "free", "git", "grep", "gzip", "head", "history", "hostname", "htop", "id", "ifconfig",
    "ip", "iostat", "java", "jps", "jstack", "jstat", "kill", "kubectl", "less", "ln", "ls",
    "lsblk", "lsof", "make", "mkdir", "more", "mount", "mv", "nc", "netstat", "nohup", "nslookup",
    "perl", "pgrep", "ping", "pkill", "ps", "pwd", "python", "python3", "rm", "rmdir", "rsync",
    "scp", "sed", "service", "sh", "sort", "source", "ss", "stat", "su", "sudo", "systemctl",
    "tail", "tar", "tcpdump", "telnet", "top", "touch", "traceroute", "uname", "uniq", "uptime",
    "vi", "view", "vim", "vmstat", "watch", "wc", "wget", "whoami", "xargs", "zcat", "zgrep",
];

impl Default for ParseConfig {
    fn default() -> Self {
        let color: Vec<String> = ["--color", "--color=auto", "--color=always", "--color=never"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let mut strip_options = BTreeMap::new();
        strip_options.insert("*".to_string(), color);
        strip_options.insert("cat".to_string(), vec!["-n".to_string()]);
        strip_options.insert("less".to_string(), vec!["-N".to_string(), "-R".to_string()]);
        strip_options.insert("more".to_string(), vec!["-d".to_string()]);
        Self {
            min_supp: 2,
            file_commands: DEFAULT_FILE_COMMANDS.iter().map(|s| s.to_string()).collect(),
            strip_options,
            known_commands: DEFAULT_KNOWN_COMMANDS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl ParseConfig {
    pub fn validate(&self) -> Result<()> {
        if self.min_supp == 0 {
            return Err(Error::Config("min_supp must be at least 1".into()));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let cfg: Self = toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn strips(&self, cmd_type: &str, option: &str) -> bool {
        let hit = |key: &str| {
            self.strip_options
                .get(key)
                .is_some_and(|opts| opts.iter().any(|o| o == option))
        };
        hit("*") || hit(cmd_type)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RejectKind {
    Empty,
    UnbalancedQuote,
    DanglingOperator,
    UnknownCommand(String),
}

/// A command dropped because it is detectably malformed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rejected {
    pub kind: RejectKind,
    pub text: String,
}

impl fmt::Display for Rejected {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            RejectKind::Empty => write!(f, "syntax error: empty command"),
            RejectKind::UnbalancedQuote => write!(f, "syntax error: unbalanced quote in `{}`", self.text),
            RejectKind::DanglingOperator => write!(f, "syntax error: dangling operator in `{}`", self.text),
            RejectKind::UnknownCommand(c) => write!(f, "syntax error: unknown command `{c}`"),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseStats {
    pub invalid_events: usize,
    pub orphan_events: usize,
    pub malformed_ssh: usize,
    pub rejected: usize,
    pub cd_dropped: usize,
    pub rare_dropped: usize,
}

impl ParseStats {
    pub fn merge(&mut self, o: &ParseStats) {
        self.invalid_events += o.invalid_events;
        self.orphan_events += o.orphan_events;
        self.malformed_ssh += o.malformed_ssh;
        self.rejected += o.rejected;
        self.cd_dropped += o.cd_dropped;
        self.rare_dropped += o.rare_dropped;
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParseOutput {
    pub sessions: Vec<Session>,
    pub stats: ParseStats,
}

fn ssh_ip(text: &str) -> Option<String> {
    text.split_whitespace().skip(1).find_map(|tok| {
        if tok.starts_with('-') {
            return None;
        }
        let host = tok.rsplit('@').next().unwrap_or(tok);
        let host = host.split(':').next().unwrap_or(host);
        host.parse::<Ipv4Addr>().ok().map(|ip| ip.to_string())
    })
}

fn is_ssh(text: &str) -> bool {
    text.split_whitespace().next() == Some("ssh")
}

/// Splits the raw event stream into ssh-delimited sessions.
///
/// Events preceding the first `ssh` of their (user, scope) group have no
/// session to belong to and are counted as orphans.
pub fn parse_log<I>(raw: I) -> ParseOutput
where
    I: IntoIterator<Item = RawEvent>,
{
    let mut stats = ParseStats::default();
    let mut groups: BTreeMap<(String, String), Vec<RawEvent>> = BTreeMap::new();
    for ev in raw {
        if ev.command_text.trim().is_empty() || ev.timestamp <= 0 {
            stats.invalid_events += 1;
            continue;
        }
        groups.entry((ev.user.clone(), ev.scope.clone())).or_default().push(ev);
    }

    let mut sessions = Vec::new();
    for ((user, scope), mut events) in groups {
        events.sort_by_key(|e| e.timestamp);
        let mut current: Option<Session> = None;
        let mut ordinal = 0usize;
        for ev in events {
            let text = ev.command_text.trim();
            if is_ssh(text) {
                if let Some(done) = current.take() {
                    sessions.push(done);
                }
                let ip = ssh_ip(text).unwrap_or_else(|| {
                    stats.malformed_ssh += 1;
                    UNKNOWN_IP.to_string()
                });
                current = Some(Session {
                    session_id: format!("{scope}:{user}:{ordinal}"),
                    ip,
                    scope: scope.clone(),
                    user: user.clone(),
                    start_ts: ev.timestamp,
                    end_ts: ev.timestamp,
                    events: Vec::new(),
                });
                ordinal += 1;
            } else if let Some(s) = current.as_mut() {
                s.end_ts = ev.timestamp;
                s.events.push(ParsedCommand::unresolved(text, ev.timestamp));
            } else {
                stats.orphan_events += 1;
            }
        }
        if let Some(done) = current.take() {
            sessions.push(done);
        }
    }
    sessions.sort_by(|a, b| (a.start_ts, &a.session_id).cmp(&(b.start_ts, &b.session_id)));
    ParseOutput { sessions, stats }
}

/// Parses a single command line in the context of a working directory.
pub fn normalize_command(text: &str, cwd: &str, home: &str, cfg: &ParseConfig) -> Result<ParsedCommand, Rejected> {
    normalize_at(text, cwd, home, cfg, 0)
}

fn reject(kind: RejectKind, text: &str) -> Rejected {
    Rejected {
        kind,
        text: text.to_string(),
    }
}

fn normalize_at(text: &str, cwd: &str, home: &str, cfg: &ParseConfig, ts: i64) -> Result<ParsedCommand, Rejected> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(reject(RejectKind::Empty, text));
    }
    let mut tokens = lex(trimmed).map_err(|e| match e {
        LexError::UnbalancedQuote | LexError::TrailingEscape => reject(RejectKind::UnbalancedQuote, trimmed),
    })?;
    match (tokens.first(), tokens.last()) {
        (Some(Token::Op(_)), _) => return Err(reject(RejectKind::DanglingOperator, trimmed)),
        (_, Some(Token::Op(op))) if op != ";" && op != "&" => {
            return Err(reject(RejectKind::DanglingOperator, trimmed))
        }
        _ => {}
    }

    let stage_end = tokens.iter().position(|t| matches!(t, Token::Op(_))).unwrap_or(tokens.len());
    let head = match &tokens[0] {
        Token::Word { value, .. } => value.clone(),
        Token::Op(_) => unreachable!("checked above"),
    };
    let execute = is_path_prefixed(&head);
    let cmd_type = if execute { EXECUTE.to_string() } else { head.clone() };
    if !execute && !cfg.known_commands.is_empty() && !cfg.known_commands.contains(&head) {
        return Err(reject(RejectKind::UnknownCommand(head), trimmed));
    }

    // Strip configured options from the first stage.
    let mut idx = 1;
    let mut end = stage_end;
    while idx < end {
        let strip = matches!(&tokens[idx], Token::Word { value, .. } if value.starts_with('-') && cfg.strips(&cmd_type, value));
        if strip {
            tokens.remove(idx);
            end -= 1;
        } else {
            idx += 1;
        }
    }

    let target = if execute {
        Some(0)
    } else if cfg.file_commands.contains(&cmd_type) {
        file_argument(&cmd_type, &tokens[1..end]).map(|i| i + 1)
    } else {
        None
    };

    let mut accessed_path = None;
    let mut accessed_file = None;
    if let Some(ti) = target {
        if let Token::Word { raw, value } = &mut tokens[ti] {
            let abs = paths::resolve(value, cwd, home);
            let directory = value.ends_with('/') || abs == "/";
            if abs != *value {
                *raw = quote_if_needed(&abs);
                *value = abs.clone();
            }
            if directory {
                accessed_path = Some(abs);
            } else {
                let (dir, file) = paths::split_file(&abs);
                accessed_path = Some(dir);
                accessed_file = file;
            }
        }
    }

    let full_text = tokens
        .iter()
        .map(|t| match t {
            Token::Word { raw, .. } => raw.as_str(),
            Token::Op(o) => o.as_str(),
        })
        .collect::<Vec<_>>()
        .join(" ");

    Ok(ParsedCommand {
        cmd_type,
        full_text,
        accessed_path,
        accessed_file,
        ts,
    })
}

fn quote_if_needed(s: &str) -> String {
    if s.chars().any(char::is_whitespace) {
        format!("'{s}'")
    } else {
        s.to_string()
    }
}

const PATTERN_FIRST: &[&str] = &["grep", "egrep", "fgrep", "zgrep"];

/// Index (into `args`) of the argument naming the accessed file.
fn file_argument(cmd_type: &str, args: &[Token]) -> Option<usize> {
    let operands: Vec<usize> = args
        .iter()
        .enumerate()
        .filter_map(|(i, t)| match t {
            Token::Word { value, .. }
                if !value.starts_with('-') && !value.chars().all(|c| c.is_ascii_digit()) =>
            {
                Some(i)
            }
            _ => None,
        })
        .collect();
    if PATTERN_FIRST.contains(&cmd_type) && operands.len() < 2 {
        return None;
    }
    operands.last().copied()
}

/// Working-directory state threaded through a session.
struct Cwd {
    current: String,
    previous: Option<String>,
}

impl Cwd {
    /// Applies a `cd` line. Unresolvable targets land at `/`.
    fn change(&mut self, text: &str, home: &str) {
        let target = text.split_whitespace().nth(1);
        let next = match target {
            None | Some("~") => paths::normalize_abs(home),
            Some("-") => self.previous.clone().unwrap_or_else(|| "/".to_string()),
            Some(t) if t.contains('$') || t.contains('`') => "/".to_string(),
            Some(t) => paths::resolve(t.trim_matches(|c| c == '\'' || c == '"'), &self.current, home),
        };
        self.previous = Some(std::mem::replace(&mut self.current, next));
    }
}

fn is_cd(text: &str) -> bool {
    text.split_whitespace().next() == Some("cd")
}

/// Threads the working directory through `session`, rewrites accessed paths
/// to absolute form, drops `cd` commands and rejects malformed commands.
/// Idempotent.
pub fn resolve_paths(session: &Session, cfg: &ParseConfig) -> (Session, ParseStats) {
    let mut stats = ParseStats::default();
    let home = session.home();
    let mut cwd = Cwd {
        current: "/".to_string(),
        previous: None,
    };
    let mut events = Vec::with_capacity(session.events.len());
    for ev in &session.events {
        if is_cd(&ev.full_text) {
            cwd.change(&ev.full_text, &home);
            stats.cd_dropped += 1;
            continue;
        }
        match normalize_at(&ev.full_text, &cwd.current, &home, cfg, ev.ts) {
            Ok(cmd) => events.push(cmd),
            Err(_) => stats.rejected += 1,
        }
    }
    let out = Session {
        events,
        ..session.clone()
    };
    (out, stats)
}

/// Removes commands appearing in fewer than `min_supp` distinct sessions and
/// then drops sessions left empty. A single pass reaches the fixed point.
pub fn filter_rare(sessions: &[Session], min_supp: usize) -> (Vec<Session>, usize) {
    let mut session_count: HashMap<&str, usize> = HashMap::new();
    for s in sessions {
        let distinct: HashSet<&str> = s.events.iter().map(|e| e.full_text.as_str()).collect();
        for t in distinct {
            *session_count.entry(t).or_default() += 1;
        }
    }
    let mut dropped = 0;
    let out = sessions
        .iter()
        .filter_map(|s| {
            let events: Vec<ParsedCommand> = s
                .events
                .iter()
                .filter(|e| {
                    let keep = session_count[e.full_text.as_str()] >= min_supp;
                    if !keep {
                        dropped += 1;
                    }
                    keep
                })
                .cloned()
                .collect();
            (!events.is_empty()).then(|| Session {
                events,
                ..s.clone()
            })
        })
        .collect();
    (out, dropped)
}

/// Resolves every session and filters rare commands.
pub fn process_sessions(raw: &[Session], cfg: &ParseConfig) -> (Vec<Session>, ParseStats) {
    let mut stats = ParseStats::default();
    let resolved: Vec<Session> = raw
        .iter()
        .map(|s| {
            let (out, st) = resolve_paths(s, cfg);
            stats.merge(&st);
            out
        })
        .collect();
    let (filtered, dropped) = filter_rare(&resolved, cfg.min_supp);
    stats.rare_dropped = dropped;
    (filtered, stats)
}

/// Splits on whitespace and breaks absolute path tokens into components.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    for tok in text.split_whitespace() {
        if tok.starts_with('/') {
            out.extend(tok.split('/').filter(|s| !s.is_empty()).map(str::to_string));
        } else {
            out.push(tok.to_string());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(text: &str, ts: i64) -> RawEvent {
        RawEvent {
            command_text: text.into(),
            scope: "svc".into(),
            user: "alice".into(),
            timestamp: ts,
        }
    }

    fn session_of(cmds: &[&str]) -> Session {
        let mut events = vec![ev("ssh 10.0.0.5", 1)];
        events.extend(cmds.iter().enumerate().map(|(i, c)| ev(c, i as i64 + 2)));
        parse_log(events).sessions.remove(0)
    }

    fn texts(s: &Session) -> Vec<&str> {
        s.events.iter().map(|e| e.full_text.as_str()).collect()
    }

    #[test]
    fn single_segment() {
        let out = parse_log(vec![ev("ssh 10.0.0.5", 1), ev("ls", 2), ev("pwd", 3)]);
        assert_eq!(out.sessions.len(), 1);
        assert_eq!(out.sessions[0].ip, "10.0.0.5");
        assert_eq!(texts(&out.sessions[0]), ["ls", "pwd"]);
    }

    #[test]
    fn splits_on_ssh() {
        let out = parse_log(vec![ev("ssh 10.0.0.1", 1), ev("ls", 2), ev("ssh 10.0.0.2", 3), ev("pwd", 4)]);
        assert_eq!(out.sessions.len(), 2);
        assert_eq!(texts(&out.sessions[0]), ["ls"]);
        assert_eq!(out.sessions[1].ip, "10.0.0.2");
        assert_eq!(texts(&out.sessions[1]), ["pwd"]);
    }

    #[test]
    fn malformed_ssh_gets_placeholder_ip() {
        let out = parse_log(vec![ev("ssh somehost", 1), ev("ls", 2)]);
        assert_eq!(out.sessions[0].ip, UNKNOWN_IP);
        assert_eq!(out.stats.malformed_ssh, 1);
    }

    #[test]
    fn ssh_user_at_host_and_port() {
        assert_eq!(ssh_ip("ssh -p 2222 root@192.168.1.7").as_deref(), Some("192.168.1.7"));
        assert_eq!(ssh_ip("ssh 10.1.1.1:22").as_deref(), Some("10.1.1.1"));
    }

    #[test]
    fn orphans_are_counted() {
        let out = parse_log(vec![ev("ls", 1), ev("ssh 10.0.0.1", 2), ev("pwd", 3)]);
        assert_eq!(out.stats.orphan_events, 1);
        assert_eq!(out.sessions.len(), 1);
    }

    #[test]
    fn groups_by_user_and_scope() {
        let mut b = ev("ssh 10.0.0.9", 2);
        b.user = "bob".into();
        let mut b2 = ev("df -h", 3);
        b2.user = "bob".into();
        let out = parse_log(vec![ev("ssh 10.0.0.1", 1), b, ev("ls", 4), b2]);
        assert_eq!(out.sessions.len(), 2);
        for s in &out.sessions {
            assert_eq!(s.events.len(), 1);
        }
    }

    #[test]
    fn resolves_relative_file() {
        let s = session_of(&["cd /data", "cat logs/result.log"]);
        let (r, st) = resolve_paths(&s, &ParseConfig::default());
        assert_eq!(texts(&r), ["cat /data/logs/result.log"]);
        assert_eq!(r.events[0].accessed_path.as_deref(), Some("/data/logs"));
        assert_eq!(r.events[0].accessed_file.as_deref(), Some("result.log"));
        assert_eq!(st.cd_dropped, 1);
    }

    #[test]
    fn absolute_unchanged() {
        let s = session_of(&["cat /abs/x.log"]);
        let (r, _) = resolve_paths(&s, &ParseConfig::default());
        assert_eq!(texts(&r), ["cat /abs/x.log"]);
    }

    #[test]
    fn cd_chain_threads_cwd() {
        let s = session_of(&["cd /a", "cd b", "cat c.log"]);
        let (r, _) = resolve_paths(&s, &ParseConfig::default());
        assert_eq!(texts(&r), ["cat /a/b/c.log"]);
    }

    #[test]
    fn cd_dash_without_history_goes_to_root() {
        let s = session_of(&["cd -", "cat x.log"]);
        let (r, st) = resolve_paths(&s, &ParseConfig::default());
        assert_eq!(texts(&r), ["cat /x.log"]);
        assert_eq!(st.cd_dropped, 1);
    }

    #[test]
    fn cd_dash_and_home() {
        let s = session_of(&["cd /a", "cd /b", "cd -", "cat x", "cd", "cat y.log", "cd ~/logs", "tail -f z.log"]);
        let (r, _) = resolve_paths(&s, &ParseConfig::default());
        assert_eq!(
            texts(&r),
            ["cat /a/x", "cat /home/alice/y.log", "tail -f /home/alice/logs/z.log"]
        );
    }

    #[test]
    fn pipeline_entity_from_first_stage() {
        let c = normalize_command("cat /data/logs/result.log | grep error", "/", "/home/u", &ParseConfig::default()).unwrap();
        assert_eq!(c.cmd_type, "cat");
        assert_eq!(c.accessed_path.as_deref(), Some("/data/logs"));
        assert_eq!(c.accessed_file.as_deref(), Some("result.log"));
        assert_eq!(c.full_text, "cat /data/logs/result.log | grep error");
    }

    #[test]
    fn script_invocation_is_execute() {
        let c = normalize_command("./scripts/bin/startup.sh", "/", "/home/u", &ParseConfig::default()).unwrap();
        assert_eq!(c.cmd_type, EXECUTE);
        assert_eq!(c.accessed_path.as_deref(), Some("/scripts/bin"));
        assert_eq!(c.accessed_file.as_deref(), Some("startup.sh"));
        assert_eq!(c.full_text, "/scripts/bin/startup.sh");
    }

    #[test]
    fn unbalanced_quote_rejected() {
        let r = normalize_command("cat 'unterminated", "/", "/home/u", &ParseConfig::default()).unwrap_err();
        assert_eq!(r.kind, RejectKind::UnbalancedQuote);
    }

    #[test]
    fn unknown_command_rejected() {
        let r = normalize_command("cta /x.log", "/", "/home/u", &ParseConfig::default()).unwrap_err();
        assert_eq!(r.kind, RejectKind::UnknownCommand("cta".into()));
        let mut open = ParseConfig::default();
        open.known_commands.clear();
        assert!(normalize_command("cta /x.log", "/", "/home/u", &open).is_ok());
    }

    #[test]
    fn dangling_pipe_rejected() {
        let cfg = ParseConfig::default();
        assert_eq!(normalize_command("ps -ef |", "/", "/h", &cfg).unwrap_err().kind, RejectKind::DanglingOperator);
        assert_eq!(normalize_command("| grep x", "/", "/h", &cfg).unwrap_err().kind, RejectKind::DanglingOperator);
    }

    #[test]
    fn strips_configured_options() {
        let cfg = ParseConfig::default();
        let c = normalize_command("cat -n x.log", "/d", "/h", &cfg).unwrap();
        assert_eq!(c.full_text, "cat /d/x.log");
        let c = normalize_command("ls --color=auto -l", "/d", "/h", &cfg).unwrap();
        assert_eq!(c.full_text, "ls -l");
        // only cat strips -n
        let c = normalize_command("tail -n 50 x.log", "/d", "/h", &cfg).unwrap();
        assert_eq!(c.full_text, "tail -n 50 /d/x.log");
        assert_eq!(c.accessed_file.as_deref(), Some("x.log"));
    }

    #[test]
    fn grep_needs_pattern_and_file() {
        let cfg = ParseConfig::default();
        let c = normalize_command("grep error", "/d", "/h", &cfg).unwrap();
        assert!(c.accessed_file.is_none());
        let c = normalize_command("grep error logs/r.log", "/d", "/h", &cfg).unwrap();
        assert_eq!(c.full_text, "grep error /d/logs/r.log");
    }

    #[test]
    fn directory_argument_sets_path_only() {
        let c = normalize_command("rm -rf tmp/", "/d", "/h", &ParseConfig::default()).unwrap();
        assert_eq!(c.accessed_path.as_deref(), Some("/d/tmp"));
        assert!(c.accessed_file.is_none());
    }

    #[test]
    fn filter_rare_examples() {
        let mk = |cmds: &[&str]| session_of(cmds);
        let one = vec![mk(&["uniq_a", "ls"]), mk(&["ls"])];
        let (out, dropped) = filter_rare(&one, 2);
        assert_eq!(dropped, 1);
        assert!(out.iter().all(|s| texts(s) == ["ls"]));
        let (same, d) = filter_rare(&one, 1);
        assert_eq!(same, one);
        assert_eq!(d, 0);

        let corpus = vec![mk(&["X", "n1"]), mk(&["n2", "X"]), mk(&["X", "n3"])];
        let (out, _) = filter_rare(&corpus, 2);
        assert_eq!(out.len(), 3);
        assert!(out.iter().all(|s| texts(s) == ["X"]));
        let (again, d2) = filter_rare(&out, 2);
        assert_eq!(again, out);
        assert_eq!(d2, 0);
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(tokenize("cat /data/logs/result.log"), ["cat", "data", "logs", "result.log"]);
        assert_eq!(tokenize("ls"), ["ls"]);
        assert_eq!(
            tokenize("grep error /data/logs/result.log"),
            ["grep", "error", "data", "logs", "result.log"]
        );
        assert!(tokenize("cd /").is_empty() || tokenize("cd /") == ["cd"]);
    }

    #[test]
    fn day_is_utc() {
        // 2023-01-01T23:59:59.999Z and the next millisecond
        let a = utc_day(1_672_617_599_999);
        let b = utc_day(1_672_617_600_000);
        assert_eq!(a.to_string(), "2023-01-01");
        assert_eq!(b.to_string(), "2023-01-02");
    }
}
