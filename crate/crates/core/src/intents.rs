//! Rule-based classification of commands into operation intents.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parser::ParsedCommand;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentName {
    LogAnalysis,
    ConfigAnalysis,
    ProcessAnalysis,
    CrontabAnalysis,
    StorageAnalysis,
    NetworkAnalysis,
    ExecuteScript,
    CodeAnalysis,
}

/// What an intent's template binds as its parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parameter {
    None,
    /// Required accessed file name.
    FileName,
    /// Process name, when one can be read off the command.
    OptionalProcess,
}

impl IntentName {
    pub const ALL: [IntentName; 8] = [
        IntentName::LogAnalysis,
        IntentName::ConfigAnalysis,
        IntentName::ProcessAnalysis,
        IntentName::CrontabAnalysis,
        IntentName::StorageAnalysis,
        IntentName::NetworkAnalysis,
        IntentName::ExecuteScript,
        IntentName::CodeAnalysis,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IntentName::LogAnalysis => "log_analysis",
            IntentName::ConfigAnalysis => "config_analysis",
            IntentName::ProcessAnalysis => "process_analysis",
            IntentName::CrontabAnalysis => "crontab_analysis",
            IntentName::StorageAnalysis => "storage_analysis",
            IntentName::NetworkAnalysis => "network_analysis",
            IntentName::ExecuteScript => "execute_script",
            IntentName::CodeAnalysis => "code_analysis",
        }
    }

    pub fn parameter(self) -> Parameter {
        match self {
            IntentName::LogAnalysis
            | IntentName::ConfigAnalysis
            | IntentName::ExecuteScript
            | IntentName::CodeAnalysis => Parameter::FileName,
            IntentName::ProcessAnalysis | IntentName::CrontabAnalysis => Parameter::OptionalProcess,
            IntentName::StorageAnalysis | IntentName::NetworkAnalysis => Parameter::None,
        }
    }
}

impl fmt::Display for IntentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntentRule {
    pub intent: IntentName,
    /// `cmd_type` values the rule applies to; empty matches any.
    #[serde(default)]
    pub commands: BTreeSet<String>,
    /// File-name suffixes such as `.log`.
    #[serde(default)]
    pub extensions: Vec<String>,
    /// Substrings matched against the accessed directory (with a trailing `/`).
    #[serde(default)]
    pub paths: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IntentLabel {
    pub intent: IntentName,
    #[serde(default)]
    pub parameter: Option<String>,
}

impl IntentLabel {
    /// `log_analysis run.log`, `storage_analysis`, ...
    pub fn render(&self) -> String {
        match &self.parameter {
            Some(p) => format!("{} {}", self.intent, p),
            None => self.intent.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Classification {
    Label(IntentLabel),
    Unclear,
}

impl Classification {
    pub fn label(&self) -> Option<&IntentLabel> {
        match self {
            Classification::Label(l) => Some(l),
            Classification::Unclear => None,
        }
    }
}

fn set(xs: &[&str]) -> BTreeSet<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

fn list(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

const READERS: &[&str] = &["cat", "vi", "vim", "view", "tail", "head", "less", "more", "grep", "zcat", "zgrep"];

/// Shipped rule set, in priority order.
pub fn default_rules() -> Vec<IntentRule> {
    use IntentName::*;
    let rule = |intent, commands: &[&str], extensions: &[&str], paths: &[&str]| IntentRule {
        intent,
        commands: set(commands),
        extensions: list(extensions),
        paths: list(paths),
    };
    vec![
        rule(ExecuteScript, &["execute", "sh", "bash", "source", "python", "python3", "perl"], &[], &[]),
        rule(CrontabAnalysis, &["crontab"], &[], &[]),
        rule(CrontabAnalysis, READERS, &[], &["/etc/cron", "/var/spool/cron"]),
        rule(ProcessAnalysis, &["ps", "top", "htop", "kill", "pkill", "pgrep", "jps", "jstack", "jstat", "lsof"], &[], &[]),
        rule(
            NetworkAnalysis,
            &["netstat", "ss", "ping", "curl", "wget", "telnet", "ifconfig", "ip", "nslookup", "dig", "traceroute", "tcpdump", "nc"],
            &[],
            &[],
        ),
        rule(StorageAnalysis, &["df", "du", "lsblk", "mount", "fdisk", "iostat"], &[], &[]),
        rule(LogAnalysis, READERS, &[".log", ".dat", ".out", ".err", ".trace"], &["/logdir/", "/interface_logs/", "/logs/", "/log/"]),
        rule(
            ConfigAnalysis,
            READERS,
            &[".properties", ".conf", ".cfg", ".yaml", ".yml", ".xml", ".ini", ".json", ".toml", ".env"],
            &["/conf/", "/config/", "/etc/"],
        ),
        rule(
            CodeAnalysis,
            READERS,
            &[".java", ".py", ".go", ".c", ".cpp", ".h", ".js", ".ts", ".rs", ".sh", ".pl", ".rb", ".scala", ".sql"],
            &[],
        ),
    ]
}

#[derive(Debug, Deserialize, Serialize)]
struct RulesFile {
    #[serde(rename = "rule", default)]
    rules: Vec<IntentRule>,
}

/// Loads a TOML list of `[[rule]]` tables; declaration order is priority.
pub fn load_rules(path: &Path) -> Result<Vec<IntentRule>> {
    let text = std::fs::read_to_string(path)?;
    parse_rules(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn parse_rules(text: &str) -> Result<Vec<IntentRule>> {
    let file: RulesFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    validate_rules(&file.rules)?;
    Ok(file.rules)
}

pub fn rules_to_toml(rules: &[IntentRule]) -> String {
    toml::to_string(&RulesFile { rules: rules.to_vec() }).expect("rules serialize")
}

pub fn validate_rules(rules: &[IntentRule]) -> Result<()> {
    for (i, r) in rules.iter().enumerate() {
        if r.extensions.iter().chain(&r.paths).any(|p| p.is_empty()) {
            return Err(Error::Config(format!("rule {} ({}) has an empty pattern", i + 1, r.intent)));
        }
        if r.commands.is_empty() && r.extensions.is_empty() && r.paths.is_empty() {
            return Err(Error::Config(format!("rule {} ({}) matches every command", i + 1, r.intent)));
        }
    }
    Ok(())
}

fn has_extension(file: &str, ext: &str) -> bool {
    file.len() > ext.len() && file.to_ascii_lowercase().ends_with(&ext.to_ascii_lowercase())
}

impl IntentRule {
    pub fn matches(&self, cmd: &ParsedCommand) -> bool {
        if !self.commands.is_empty() && !self.commands.contains(&cmd.cmd_type) {
            return false;
        }
        if !self.extensions.is_empty() || !self.paths.is_empty() {
            let ext_hit = cmd
                .accessed_file
                .as_deref()
                .is_some_and(|f| self.extensions.iter().any(|e| has_extension(f, e)));
            let path_hit = cmd.accessed_path.as_deref().is_some_and(|p| {
                let dir = if p.ends_with('/') { p.to_string() } else { format!("{p}/") };
                self.paths.iter().any(|pat| dir.contains(pat.as_str()))
            });
            if !ext_hit && !path_hit {
                return false;
            }
        }
        if self.intent.parameter() == Parameter::FileName && cmd.accessed_file.is_none() {
            return false;
        }
        true
    }
}

/// Process name: the pattern of a `grep` stage, else the first operand of
/// the command itself.
fn process_name(cmd: &ParsedCommand) -> Option<String> {
    let mut stages = cmd.full_text.split('|');
    let first = stages.next().unwrap_or("");
    let operand = |stage: &str, skip: usize| {
        stage
            .split_whitespace()
            .skip(skip)
            .find(|w| !w.starts_with('-') && !w.chars().all(|c| c.is_ascii_digit()))
            .map(|w| w.trim_matches(|c| c == '\'' || c == '"').to_string())
            .filter(|w| !w.is_empty())
    };
    for stage in stages {
        let mut words = stage.split_whitespace();
        if matches!(words.next(), Some("grep" | "egrep" | "fgrep")) {
            if let Some(p) = operand(stage, 1) {
                return Some(p);
            }
        }
    }
    operand(first, 1)
}

/// First matching rule wins; file intents bind the accessed file.
pub fn classify(cmd: &ParsedCommand, rules: &[IntentRule]) -> Classification {
    for rule in rules {
        if !rule.matches(cmd) {
            continue;
        }
        let parameter = match rule.intent.parameter() {
            Parameter::None => None,
            Parameter::FileName => cmd.accessed_file.clone(),
            Parameter::OptionalProcess => cmd.accessed_file.clone().or_else(|| process_name(cmd)),
        };
        return Classification::Label(IntentLabel {
            intent: rule.intent,
            parameter,
        });
    }
    Classification::Unclear
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IntentReport {
    pub total: usize,
    pub counts: BTreeMap<String, usize>,
    pub percentages: BTreeMap<String, f64>,
}

pub const UNCLEAR: &str = "unclear";

pub fn classify_corpus<'a, I>(commands: I, rules: &[IntentRule]) -> IntentReport
where
    I: IntoIterator<Item = &'a ParsedCommand>,
{
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut total = 0;
    for c in commands {
        total += 1;
        let key = match classify(c, rules) {
            Classification::Label(l) => l.intent.to_string(),
            Classification::Unclear => UNCLEAR.to_string(),
        };
        *counts.entry(key).or_default() += 1;
    }
    let percentages = counts
        .iter()
        .map(|(k, &v)| (k.clone(), 100.0 * v as f64 / total as f64))
        .collect();
    IntentReport {
        total,
        counts,
        percentages,
    }
}

/// Labels for every distinct command text, skipping unclear ones.
pub fn label_commands<'a, I>(commands: I, rules: &[IntentRule]) -> BTreeMap<String, IntentLabel>
where
    I: IntoIterator<Item = &'a ParsedCommand>,
{
    let mut out = BTreeMap::new();
    for c in commands {
        if out.contains_key(&c.full_text) {
            continue;
        }
        if let Classification::Label(l) = classify(c, rules) {
            out.insert(c.full_text.clone(), l);
        }
    }
    out
}
