//! Seeded synthetic shell corpora with known ground truth.
//!
//! Sessions mix uniformly drawn background commands with planted
//! operations: fixed command runs inserted contiguously into a known number
//! of sessions. Planted commands appear nowhere else, so a planted run's
//! support equals the number of sessions it was planted in. Every generated
//! command comes from a template whose intent is known.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::intents::IntentName;
use crate::miner::SequencePattern;
use crate::parser::{normalize_command, ParseConfig, ParsedCommand, RawEvent, Session};

const BASE_TS: i64 = 1_767_571_200_000; // 2026-01-05T00:00:00Z
const SESSION_SLOT_MS: i64 = 10 * 60 * 1000;

pub const DEMO_SCOPE: &str = "OnlineServiceRLX";

/// The restart operation of the demo corpus.
pub fn demo_restart_op() -> Vec<String> {
    let base = format!("/opt/hw/app/{DEMO_SCOPE}");
    vec![
        format!("cat {base}/conf/app.properties"),
        format!("sh {base}/bin/stop.sh"),
        format!("sh {base}/bin/start.sh"),
        format!("cat {base}/logs/run.log"),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSpec {
    pub scope: String,
    /// Commands in absolute, normalized form.
    pub commands: Vec<String>,
    pub support: usize,
    /// Restrict the hosting sessions to these users (empty = any user).
    #[serde(default)]
    pub users: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub seed: u64,
    pub scopes: usize,
    pub users_per_scope: usize,
    pub ips: usize,
    pub sessions: usize,
    /// Background commands available per scope.
    pub pool_per_scope: usize,
    pub min_noise: usize,
    pub max_noise: usize,
    /// Random operations planted per scope, on top of `extra_ops`.
    pub ops_per_scope: usize,
    pub min_op_len: usize,
    pub max_op_len: usize,
    pub min_op_support: usize,
    pub max_op_support: usize,
    /// Chance that a session contains a malformed or mistyped command.
    pub error_rate: f64,
    /// Chance that a planted operation is typed relative to a `cd`.
    pub cd_rate: f64,
    pub extra_ops: Vec<PlantSpec>,
    /// Single background commands added to `support` sessions of a scope,
    /// at random positions; not tracked as planted.
    pub extra_background: Vec<PlantSpec>,
    /// Explicit scope names; generated names fill up to `scopes`.
    pub scope_names: Vec<String>,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            scopes: 3,
            users_per_scope: 6,
            ips: 24,
            sessions: 600,
            pool_per_scope: 150,
            min_noise: 3,
            max_noise: 9,
            ops_per_scope: 4,
            min_op_len: 2,
            max_op_len: 5,
            min_op_support: 6,
            max_op_support: 14,
            error_rate: 0.1,
            cd_rate: 0.4,
            extra_ops: Vec::new(),
            extra_background: Vec::new(),
            scope_names: Vec::new(),
        }
    }
}

impl CorpusConfig {
    /// The bundled demo: the restart operation in 8 sessions by 2 users,
    /// plus background traffic that includes grep-over-log commands.
    pub fn demo() -> Self {
        Self {
            seed: 2024,
            scopes: 2,
            sessions: 240,
            ops_per_scope: 3,
            scope_names: vec![DEMO_SCOPE.to_string(), "PaymentGateway".to_string()],
            extra_ops: vec![PlantSpec {
                scope: DEMO_SCOPE.to_string(),
                commands: demo_restart_op(),
                support: 8,
                users: vec!["sre01".to_string(), "sre02".to_string()],
            }],
            extra_background: [
                (DEMO_SCOPE, format!("cat {}/logs/run.log | grep ERROR", app_base(DEMO_SCOPE)), 30),
                (DEMO_SCOPE, format!("cat {}/logs/run.log | grep Exception", app_base(DEMO_SCOPE)), 12),
                (DEMO_SCOPE, "cat /opt/hw/configuration/logs/result.log".to_string(), 10),
                (DEMO_SCOPE, "cat /opt/hw/configuration/conf/server.properties".to_string(), 25),
            ]
            .into_iter()
            .map(|(scope, cmd, support)| PlantSpec {
                scope: scope.to_string(),
                commands: vec![cmd],
                support,
                users: Vec::new(),
            })
            .collect(),
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedOp {
    pub scope: String,
    pub commands: Vec<String>,
    pub support: usize,
    pub users: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub planted: Vec<PlantedOp>,
    /// Intent of every normalized command the corpus can produce.
    pub labels: BTreeMap<String, IntentName>,
    pub malformed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub events: Vec<RawEvent>,
    pub truth: GroundTruth,
}

struct Template {
    /// Absolute form; `{base}` marks the application directory.
    text: String,
    intent: IntentName,
}

fn scope_name(i: usize, cfg: &CorpusConfig) -> String {
    const NAMES: &[&str] = &[
        "OrderCenter", "PaymentGateway", "UserProfile", "BillingCore", "SearchIndex", "MessageBus", "InventorySvc",
        "AuthPortal",
    ];
    cfg.scope_names.get(i).cloned().unwrap_or_else(|| {
        let base = NAMES[i % NAMES.len()];
        if i < NAMES.len() {
            base.to_string()
        } else {
            format!("{base}{}", i / NAMES.len())
        }
    })
}

fn app_base(scope: &str) -> String {
    format!("/opt/hw/app/{scope}")
}

/// A template for slot `k` of `kind`; distinct `(tag, k)` give distinct texts.
fn template(kind: usize, base: &str, tag: &str, k: usize) -> Template {
    use IntentName::*;
    let (text, intent) = match kind % 12 {
        0 => (format!("tail -n 200 {base}/logs/{tag}{k}.log"), LogAnalysis),
        1 => (format!("grep ERROR {base}/logs/{tag}{k}.log"), LogAnalysis),
        2 => (format!("cat {base}/logs/{tag}{k}.log | grep WARN"), LogAnalysis),
        3 => (format!("cat {base}/conf/{tag}{k}.properties"), ConfigAnalysis),
        4 => (format!("vi {base}/conf/{tag}{k}.xml"), ConfigAnalysis),
        5 => (format!("ps -ef | grep {tag}{k}"), ProcessAnalysis),
        6 => (format!("netstat -anp | grep {tag}{k}"), NetworkAnalysis),
        7 => (format!("du -sh {base}/data/{tag}{k}"), StorageAnalysis),
        8 => (format!("cat /etc/cron.d/{tag}{k}"), CrontabAnalysis),
        9 => (format!("sh {base}/bin/{tag}{k}.sh"), ExecuteScript),
        10 => (format!("vi {base}/src/{tag}{k}.py"), CodeAnalysis),
        _ => (format!("less {base}/logs/{tag}{k}.out"), LogAnalysis),
    };
    Template { text, intent }
}

/// Relative rendering of `cmd` for a shell sitting in `base`, when the
/// parser would resolve it back.
fn relative_to(cmd: &str, base: &str) -> Option<String> {
    const FILE_COMMANDS: &[&str] = &["cat", "tail", "grep", "vi", "less", "sh"];
    let prefix = format!("{base}/");
    let head = cmd.split_whitespace().next()?;
    (FILE_COMMANDS.contains(&head) && cmd.contains(&prefix)).then(|| cmd.replacen(&prefix, "", 1))
}

fn normalized(text: &str) -> String {
    normalize_command(text, "/", "/root", &ParseConfig::default())
        .map(|c| c.full_text)
        .unwrap_or_else(|_| text.to_string())
}

/// Generates a corpus. Identical configs give identical corpora.
pub fn generate(cfg: &CorpusConfig) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let scopes: Vec<String> = (0..cfg.scopes.max(1)).map(|i| scope_name(i, cfg)).collect();
    let ips: Vec<String> = (0..cfg.ips.max(1))
        .map(|i| format!("10.{}.{}.{}", 20 + i / 250, (i * 7) % 250, 10 + i % 240))
        .collect();
    // Neighbouring scopes share some of their users.
    let per_scope = cfg.users_per_scope.max(1);
    let users: BTreeMap<&str, Vec<String>> = scopes
        .iter()
        .enumerate()
        .map(|(si, s)| (s.as_str(), (0..per_scope).map(|u| format!("sre{:02}", si * 2 + u + 1)).collect()))
        .collect();

    let mut labels = BTreeMap::new();
    let pools: BTreeMap<&str, Vec<String>> = scopes
        .iter()
        .map(|s| {
            let base = app_base(s);
            let pool = (0..cfg.pool_per_scope)
                .map(|k| {
                    let t = template(k, &base, "bg", k);
                    let text = normalized(&t.text);
                    labels.insert(text.clone(), t.intent);
                    text
                })
                .collect();
            (s.as_str(), pool)
        })
        .collect();

    // Session skeletons.
    struct Draft {
        scope: usize,
        user: String,
        ip: String,
        commands: Vec<String>,
        op: Option<usize>,
    }
    let mut drafts: Vec<Draft> = (0..cfg.sessions)
        .map(|i| {
            let scope = i % scopes.len();
            let us = &users[scopes[scope].as_str()];
            let n = rng.random_range(cfg.min_noise..=cfg.max_noise.max(cfg.min_noise));
            let pool = &pools[scopes[scope].as_str()];
            let commands = (0..n).map(|_| pool.choose(&mut rng).cloned().unwrap_or_default()).collect();
            Draft {
                scope,
                user: us.choose(&mut rng).cloned().expect("users exist"),
                ip: ips.choose(&mut rng).cloned().expect("ips exist"),
                commands,
                op: None,
            }
        })
        .collect();

    // Operations to plant.
    let mut specs: Vec<PlantSpec> = cfg.extra_ops.clone();
    for (si, s) in scopes.iter().enumerate() {
        let base = app_base(s);
        for o in 0..cfg.ops_per_scope {
            let len = rng.random_range(cfg.min_op_len..=cfg.max_op_len.max(cfg.min_op_len));
            let tag = format!("op{si}x{o}y");
            let mut kinds: Vec<usize> = (0..12).collect();
            kinds.shuffle(&mut rng);
            let commands = kinds[..len.min(12)]
                .iter()
                .enumerate()
                .map(|(k, &kind)| {
                    let t = template(kind, &base, &tag, k);
                    let text = normalized(&t.text);
                    labels.insert(text.clone(), t.intent);
                    text
                })
                .collect();
            specs.push(PlantSpec {
                scope: s.clone(),
                commands,
                support: rng.random_range(cfg.min_op_support..=cfg.max_op_support.max(cfg.min_op_support)),
                users: Vec::new(),
            });
        }
    }
    for spec in &cfg.extra_background {
        let Some(si) = scopes.iter().position(|s| *s == spec.scope) else {
            continue;
        };
        let mut hosts: Vec<usize> = (0..drafts.len()).filter(|&i| drafts[i].scope == si).collect();
        hosts.shuffle(&mut rng);
        for &h in hosts.iter().take(spec.support) {
            for c in &spec.commands {
                let at = rng.random_range(0..=drafts[h].commands.len());
                drafts[h].commands.insert(at, normalized(c));
            }
        }
    }
    for spec in cfg.extra_ops.iter().chain(&cfg.extra_background) {
        let intents = crate::intents::default_rules();
        for c in &spec.commands {
            let parsed = normalize_command(c, "/", "/root", &ParseConfig::default());
            if let Ok(p) = parsed {
                if let crate::intents::Classification::Label(l) = crate::intents::classify(&p, &intents) {
                    labels.insert(p.full_text, l.intent);
                }
            }
        }
    }

    let mut planted = Vec::new();
    for (oi, spec) in specs.iter().enumerate() {
        let Some(si) = scopes.iter().position(|s| *s == spec.scope) else {
            continue;
        };
        let mut hosts: Vec<usize> = drafts
            .iter()
            .enumerate()
            .filter(|(_, d)| d.scope == si && d.op.is_none() && (spec.users.is_empty() || spec.users.contains(&d.user)))
            .map(|(i, _)| i)
            .collect();
        hosts.shuffle(&mut rng);
        hosts.truncate(spec.support);
        hosts.sort_unstable();
        let mut host_users = BTreeSet::new();
        for &h in &hosts {
            drafts[h].op = Some(oi);
            host_users.insert(drafts[h].user.clone());
        }
        planted.push(PlantedOp {
            scope: spec.scope.clone(),
            commands: spec.commands.iter().map(|c| normalized(c)).collect(),
            support: hosts.len(),
            users: host_users.len(),
        });
    }

    let mut events = Vec::new();
    let mut malformed = 0;
    for (i, d) in drafts.iter().enumerate() {
        let scope = &scopes[d.scope];
        let mut ts = BASE_TS + i as i64 * SESSION_SLOT_MS + rng.random_range(0..60_000);
        let mut push = |text: String, ts: &mut i64, rng: &mut ChaCha8Rng| {
            events.push(RawEvent {
                command_text: text,
                scope: scope.clone(),
                user: d.user.clone(),
                timestamp: *ts,
            });
            *ts += rng.random_range(2_000..40_000);
        };
        push(format!("ssh {}@{}", d.user, d.ip), &mut ts, &mut rng);
        let mut lines: Vec<String> = d.commands.clone();
        if let Some(oi) = d.op {
            let base = app_base(scope);
            let op = &specs[oi].commands;
            let block: Vec<String> = if rng.random_bool(cfg.cd_rate) {
                let mut b = vec![format!("cd {base}")];
                b.extend(op.iter().map(|c| relative_to(c, &base).unwrap_or_else(|| c.clone())));
                b.push("cd".to_string());
                b
            } else {
                op.clone()
            };
            let at = rng.random_range(0..=lines.len());
            lines.splice(at..at, block);
        }
        if rng.random_bool(cfg.error_rate) {
            let bad = if rng.random_bool(0.5) {
                format!("cst {}/logs/app.log", app_base(scope))
            } else {
                "grep 'unterminated /tmp/x.log".to_string()
            };
            // only at the ends, so planted blocks stay contiguous
            if rng.random_bool(0.5) {
                lines.insert(0, bad);
            } else {
                lines.push(bad);
            }
            malformed += 1;
        }
        for l in lines {
            push(l, &mut ts, &mut rng);
        }
    }
    Corpus {
        events,
        truth: GroundTruth {
            planted,
            labels,
            malformed,
        },
    }
}

/// Sessions and sequences for a large graph: `cmds` distinct commands over
/// one scope and `seqs` sequences cut from the sessions.
pub fn latency_fixture(seed: u64, cmds: usize, seqs: usize) -> (Vec<Session>, Vec<SequencePattern>) {
    const TYPES: &[&str] = &["cat", "tail", "grep", "vi", "less", "sh", "ps", "df", "netstat", "execute"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scope = "LoadTest".to_string();
    let users: Vec<String> = (0..40).map(|u| format!("u{u:02}")).collect();
    let ips: Vec<String> = (0..80).map(|i| format!("10.9.{}.{}", i / 200, i % 200 + 1)).collect();
    let vocab: Vec<ParsedCommand> = (0..cmds)
        .map(|k| {
            let ty = TYPES[k % TYPES.len()];
            let dir = format!("/srv/app{}/logs/part{}", k % 97, k % 13);
            let file = format!("f{k}.log");
            let (full_text, path, f) = match ty {
                "execute" => (format!("{dir}/run{k}.sh"), Some(dir.clone()), Some(format!("run{k}.sh"))),
                "ps" => (format!("ps -ef | grep proc{k}"), None, None),
                "df" => (format!("df -h /srv/app{k}"), None, None),
                "netstat" => (format!("netstat -anp | grep {k}"), None, None),
                _ => (format!("{ty} {dir}/{file}"), Some(dir.clone()), Some(file)),
            };
            ParsedCommand {
                cmd_type: ty.to_string(),
                full_text,
                accessed_path: path,
                accessed_file: f,
                ts: 0,
            }
        })
        .collect();
    let per_session = 8;
    let n_sessions = cmds.div_ceil(per_session).max(1) * 2;
    let mut order: Vec<usize> = (0..cmds).collect();
    order.shuffle(&mut rng);
    let sessions: Vec<Session> = (0..n_sessions)
        .map(|i| {
            let start = BASE_TS + i as i64 * SESSION_SLOT_MS;
            let events = (0..per_session)
                .map(|j| {
                    // first pass covers every command once, later ones resample
                    let slot = i * per_session + j;
                    let k = if slot < cmds { order[slot] } else { rng.random_range(0..cmds) };
                    let mut c = vocab[k].clone();
                    c.ts = start + j as i64 * 1000;
                    c
                })
                .collect();
            Session {
                session_id: format!("{scope}:{i}"),
                ip: ips[i % ips.len()].clone(),
                scope: scope.clone(),
                user: users[(i * 7) % users.len()].clone(),
                start_ts: start,
                end_ts: start + per_session as i64 * 1000,
                events,
            }
        })
        .collect();
    let mut seen = BTreeSet::new();
    let mut patterns = Vec::new();
    while patterns.len() < seqs && seen.len() < sessions.len() * per_session {
        let s = &sessions[rng.random_range(0..sessions.len())];
        let len = rng.random_range(2..=5);
        let at = rng.random_range(0..=per_session - len);
        let commands: Vec<String> = s.events[at..at + len].iter().map(|c| c.full_text.clone()).collect();
        if seen.insert(commands.clone()) {
            patterns.push(SequencePattern {
                commands,
                support: 1,
                frequency: 1.0 / sessions.len() as f64,
                user_count: 1,
                day_count: 1,
            });
        }
    }
    (sessions, patterns)
}
