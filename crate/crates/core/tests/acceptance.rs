//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use cmdgraph_core::aggregator::{jaccard_distance, sequence_distance};
use cmdgraph_core::corpus::{demo_restart_op, generate, latency_fixture, CorpusConfig, DEMO_SCOPE};
use cmdgraph_core::evaluator::{
    char_ratio, char_reduction, cmdline_reduction, latency_report, seq_reduction, typed_form,
};
use cmdgraph_core::graph::{apply_update, build, snapshot_bytes, snapshot_from_bytes, BuildInputs, Tag};
use cmdgraph_core::miner::{mine, MiningConfig};
use cmdgraph_core::parser::{tokenize, ParsedCommand, Session};
use cmdgraph_core::pipeline::Pipeline;
use cmdgraph_core::recommender::{
    correct_typo, dice_similarity, jaccard_similarity_cmd, rank_commands, resolve_first_token, CommandRow, Payload,
    Quad, DEFAULT_CACHE_CAPACITY,
};
use cmdgraph_core::{CommandRequest, Engine, SequenceRequest, Weights};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

// ---------------------------------------------------------------- mining

fn sessions_of(txs: &[Vec<String>]) -> Vec<Session> {
    txs.iter()
        .enumerate()
        .map(|(i, t)| Session {
            session_id: format!("s{i}"),
            ip: "10.0.0.1".into(),
            scope: "s".into(),
            user: "u".into(),
            start_ts: 1_700_000_000_000,
            end_ts: 1_700_000_000_000,
            events: t.iter().map(|c| ParsedCommand::unresolved(c, 1)).collect(),
        })
        .collect()
}

/// Does `a` embed into `b` from index `from` on, previous match at `prev`?
fn embeds(a: &[String], b: &[String], g: usize, prev: Option<usize>) -> bool {
    let Some((head, rest)) = a.split_first() else {
        return true;
    };
    let (lo, hi) = match prev {
        None => (0, b.len()),
        Some(p) => (p + 1, (p + g + 1).min(b.len())),
    };
    (lo..hi).any(|i| b[i] == *head && embeds(rest, b, g, Some(i)))
}

fn enumerate_embeddings(t: &[String], g: usize, prev: usize, cur: &mut Vec<String>, out: &mut BTreeSet<Vec<String>>) {
    if cur.len() >= 2 {
        out.insert(cur.clone());
    }
    for i in prev + 1..(prev + g + 1).min(t.len()) {
        cur.push(t[i].clone());
        enumerate_embeddings(t, g, i, cur, out);
        cur.pop();
    }
}

fn brute_force(txs: &[Vec<String>], theta: f64, g: usize) -> BTreeMap<Vec<String>, usize> {
    let mut cands = BTreeSet::new();
    for t in txs {
        for start in 0..t.len() {
            let mut cur = vec![t[start].clone()];
            enumerate_embeddings(t, g, start, &mut cur, &mut cands);
        }
    }
    cands
        .into_iter()
        .filter(|c| c.len() <= 20)
        .filter_map(|c| {
            let supp = txs.iter().filter(|t| embeds(&c, t, g, None)).count();
            (supp as f64 / txs.len() as f64 >= theta).then_some((c, supp))
        })
        .collect()
}

fn mining_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let datasets = 240;
    let mut patterns_checked = 0;
    for d in 0..datasets {
        let n = rng.random_range(1..=40);
        let alphabet = rng.random_range(2..=8);
        let g = [1, 2, 5][d % 3];
        let theta = [0.1, 0.3, 0.5][(d / 3) % 3];
        let txs: Vec<Vec<String>> = (0..n)
            .map(|_| {
                let len = rng.random_range(1..=10);
                (0..len).map(|_| format!("c{}", rng.random_range(0..alphabet))).collect()
            })
            .collect();
        let cfg = MiningConfig {
            theta: Some(theta),
            max_gap: g,
            ..MiningConfig::default()
        };
        let got: BTreeMap<Vec<String>, usize> = mine(&sessions_of(&txs), &cfg)
            .map_err(|e| e.to_string())?
            .into_iter()
            .map(|p| (p.commands, p.support))
            .collect();
        let want = brute_force(&txs, theta, g);
        ensure(got == want, || {
            format!("dataset {d} (n={n}, g={g}, theta={theta}): {} mined vs {} expected", got.len(), want.len())
        })?;
        patterns_checked += want.len();
    }
    let took = start.elapsed();
    ensure(took < Duration::from_secs(300), || format!("took {took:?}"))?;
    Ok(format!("{datasets} datasets, {patterns_checked} patterns, {:.1}s", took.as_secs_f64()))
}

fn planted_recovery() -> Outcome {
    let mut checked = 0;
    for cfg in [CorpusConfig::default(), CorpusConfig::demo(), CorpusConfig { seed: 99, ..CorpusConfig::default() }] {
        let corpus = generate(&cfg);
        let out = Pipeline::default().run(corpus.events, &[]).map_err(|e| e.to_string())?;
        let found: BTreeMap<&Vec<String>, usize> = out.patterns.iter().map(|p| (&p.commands, p.support)).collect();
        for op in &corpus.truth.planted {
            match found.get(&op.commands) {
                Some(&s) if s == op.support => checked += 1,
                Some(&s) => return Err(format!("{:?}: support {s}, planted {}", op.commands, op.support)),
                None => return Err(format!("{:?} (support {}) not recovered", op.commands, op.support)),
            }
        }
    }
    Ok(format!("{checked} planted sequences recovered with exact support"))
}

// ---------------------------------------------------------------- similarity

fn random_command(rng: &mut ChaCha8Rng) -> String {
    const HEADS: &[&str] = &["cat", "vi", "grep", "tail", "ls", "sh"];
    const PARTS: &[&str] = &["data", "logs", "opt", "conf", "a", "b"];
    let mut s = HEADS[rng.random_range(0..HEADS.len())].to_string();
    for _ in 0..rng.random_range(0..3) {
        if rng.random_bool(0.5) {
            s.push_str(" /");
            let depth = rng.random_range(1..4);
            let path: Vec<&str> = (0..depth).map(|_| PARTS[rng.random_range(0..PARTS.len())]).collect();
            s.push_str(&path.join("/"));
        } else {
            s.push(' ');
            s.push_str(PARTS[rng.random_range(0..PARTS.len())]);
        }
    }
    s
}

fn brute_dice(a: &str, b: &str) -> f64 {
    let ca: Vec<char> = a.chars().collect();
    let cb: Vec<char> = b.chars().collect();
    if ca.len() < 2 || cb.len() < 2 {
        return if a == b { 1.0 } else { 0.0 };
    }
    let mut pool: Vec<(char, char)> = cb.windows(2).map(|w| (w[0], w[1])).collect();
    let mut shared = 0usize;
    for w in ca.windows(2) {
        if let Some(i) = pool.iter().position(|x| *x == (w[0], w[1])) {
            pool.remove(i);
            shared += 1;
        }
    }
    2.0 * shared as f64 / (ca.len() + cb.len() - 2) as f64
}

fn brute_jaccard_sim(a: &str, b: &str) -> f64 {
    let mut ta = tokenize(a);
    let mut tb = tokenize(b);
    ta.sort();
    ta.dedup();
    tb.sort();
    tb.dedup();
    let inter = ta.iter().filter(|t| tb.contains(t)).count();
    let union = ta.len() + tb.len() - inter;
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

fn similarity_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    for i in 0..1000 {
        let x: Vec<String> = (0..rng.random_range(1..6)).map(|_| random_command(&mut rng)).collect();
        let y: Vec<String> = (0..rng.random_range(1..6)).map(|_| random_command(&mut rng)).collect();
        let dxy = sequence_distance(&x, &y);
        ensure(dxy == sequence_distance(&y, &x), || format!("pair {i}: asymmetric"))?;
        ensure((0.0..=1.0).contains(&dxy), || format!("pair {i}: {dxy} out of range"))?;
        ensure(sequence_distance(&x, &x) == 0.0, || format!("pair {i}: d(x,x) != 0"))?;
        let same_sets = x.len() == y.len()
            && x.iter().zip(&y).all(|(a, b)| {
                tokenize(a).into_iter().collect::<BTreeSet<_>>() == tokenize(b).into_iter().collect::<BTreeSet<_>>()
            });
        ensure((dxy == 0.0) == same_sets, || format!("pair {i}: zero iff equal token sets violated"))?;

        let (a, b) = (x[0].as_str(), y[0].as_str());
        let d = dice_similarity(a, b);
        ensure((d - brute_dice(a, b)).abs() <= 1e-12, || format!("dice {a:?} {b:?}"))?;
        let j = jaccard_similarity_cmd(a, b);
        ensure((j - brute_jaccard_sim(a, b)).abs() <= 1e-12, || format!("jaccard {a:?} {b:?}"))?;
        ensure((j - (1.0 - jaccard_distance(a, b))).abs() <= 1e-12, || format!("sim != 1 - dist for {a:?} {b:?}"))?;
    }
    ensure((dice_similarity("night", "nacht") - 0.25).abs() <= 1e-12, || "night/nacht".into())?;
    Ok("1000 random pairs".into())
}

// ---------------------------------------------------------------- graph

fn graph_consistency() -> Outcome {
    let out = Pipeline::default()
        .run(generate(&CorpusConfig::default()).events, &[])
        .map_err(|e| e.to_string())?;
    let g = &out.graph;
    let problems = g.check_invariants();
    ensure(problems.is_empty(), || format!("{} invariant violations: {:?}", problems.len(), &problems[..1]))?;

    let bytes = snapshot_bytes(g);
    let back = snapshot_from_bytes(&bytes).map_err(|e| e.to_string())?;
    ensure(back == *g && back.meta() == g.meta(), || "snapshot round-trip differs".into())?;

    let mid = out.sessions.len() / 2;
    let (a, b) = out.sessions.split_at(mid);
    let in_a: BTreeSet<&str> = a.iter().flat_map(|s| s.events.iter().map(|e| e.full_text.as_str())).collect();
    let labels_a = out.labels.iter().filter(|(k, _)| in_a.contains(k.as_str())).map(|(k, v)| (k.clone(), v.clone())).collect();
    let inputs = |sessions, labels| BuildInputs {
        sessions,
        patterns: &out.patterns,
        macros: &[],
        intent_labels: labels,
        max_gap: out_gap(),
    };
    let (first, _) = build(inputs(a, &labels_a)).map_err(|e| e.to_string())?;
    let (merged, _) = apply_update(&first, inputs(b, &out.labels)).map_err(|e| e.to_string())?;
    ensure(merged == *g, || "build + update differs from a single build".into())?;
    ensure(merged.check_invariants().is_empty(), || "merged graph violates invariants".into())?;

    let (sessions, seqs) = latency_fixture(3, 6000, 1500);
    let (big, _) = build(BuildInputs {
        sessions: &sessions,
        patterns: &seqs,
        macros: &[],
        intent_labels: &BTreeMap::new(),
        max_gap: 5,
    })
    .map_err(|e| e.to_string())?;
    ensure(big.vertices().len() >= 10_000, || format!("fixture graph has {} vertices", big.vertices().len()))?;
    let big_back = snapshot_from_bytes(&snapshot_bytes(&big)).map_err(|e| e.to_string())?;
    ensure(big_back == big, || "large snapshot round-trip differs".into())?;
    Ok(format!(
        "{} vertices / {} edges checked; round-trip and split rebuild equal; {}-vertex round-trip",
        g.vertices().len(),
        g.edges().len(),
        big.vertices().len()
    ))
}

fn out_gap() -> usize {
    MiningConfig::default().max_gap
}

// ---------------------------------------------------------------- ranking

fn order(c: &[cmdgraph_core::ScoredCandidate]) -> Vec<Payload> {
    c.iter().map(|x| x.payload.clone()).collect()
}

fn ranking_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let w = Quad::default();
    for case in 0..300 {
        let rows: Vec<CommandRow> = (0..rng.random_range(2..15))
            .map(|_| CommandRow {
                full_value: random_command(&mut rng),
                n: rng.random_range(1..50),
                user_n: rng.random_range(0..10),
                ip_n: rng.random_range(0..10),
            })
            .collect();
        let mut distinct = BTreeSet::new();
        let rows: Vec<CommandRow> = rows.into_iter().filter(|r| distinct.insert(r.full_value.clone())).collect();
        let partial = random_command(&mut rng);
        let base = rank_commands(&partial, &rows, &w, rows.len());

        let k = rng.random_range(2..7);
        let scaled: Vec<CommandRow> = rows
            .iter()
            .map(|r| CommandRow {
                n: r.n * k,
                user_n: r.user_n * k,
                ip_n: r.ip_n * k,
                ..r.clone()
            })
            .collect();
        ensure(order(&base) == order(&rank_commands(&partial, &scaled, &w, rows.len())), || {
            format!("case {case}: order changed under scaling by {k}")
        })?;

        let exact = rows[0].full_value.clone();
        let ranked = rank_commands(&exact, &rows, &w, rows.len());
        let hit = ranked.iter().find(|c| c.payload == Payload::Command(exact.clone())).unwrap();
        ensure(hit.components.sim == 1.0, || format!("case {case}: exact match sim {}", hit.components.sim))?;

        let pick = rng.random_range(0..rows.len());
        let pos = |c: &[cmdgraph_core::ScoredCandidate]| {
            c.iter().position(|x| x.payload == Payload::Command(rows[pick].full_value.clone())).unwrap()
        };
        let mut bumped = rows.clone();
        bumped[pick].user_n += rng.random_range(1..5);
        let after = rank_commands(&partial, &bumped, &w, rows.len());
        ensure(pos(&after) <= pos(&base), || format!("case {case}: rank dropped after raising user count"))?;
    }

    let out = Pipeline::default()
        .run(generate(&CorpusConfig::demo()).events, &[])
        .map_err(|e| e.to_string())?;
    let host = out
        .sessions
        .iter()
        .find(|s| s.scope == DEMO_SCOPE && s.events.iter().any(|e| e.full_text.ends_with("/bin/stop.sh")))
        .ok_or("no demo session runs stop.sh")?
        .clone();
    let engine = Engine::new(out.graph, Weights::default(), DEFAULT_CACHE_CAPACITY).map_err(|e| e.to_string())?;
    let res = engine
        .recommend_sequences(&SequenceRequest {
            command: "sh /opt/hw/app/OnlineServiceRLX/bin/stop.sh".into(),
            user: host.user.clone(),
            ip: host.ip.clone(),
            scope: DEMO_SCOPE.into(),
            top_n: 5,
            cwd: None,
        })
        .map_err(|e| e.to_string())?;
    let want = Payload::Sequence(demo_restart_op()[2..].to_vec());
    let rank = res.candidates.iter().position(|c| c.payload == want);
    ensure(rank.is_some_and(|r| r < 3), || format!("restart suffix rank {rank:?}"))?;
    Ok(format!("300 random pools; stop.sh suffix ranked #{}", rank.unwrap_or(0) + 1))
}

// ---------------------------------------------------------------- latency

fn latency() -> Outcome {
    let (sessions, seqs) = latency_fixture(11, 20_000, 3_000);
    let (graph, _) = build(BuildInputs {
        sessions: &sessions,
        patterns: &seqs,
        macros: &[],
        intent_labels: &BTreeMap::new(),
        max_gap: 5,
    })
    .map_err(|e| e.to_string())?;
    let (cmds, seq_vertices) = (graph.count(Tag::Cmd), graph.count(Tag::Seq));
    ensure(cmds >= 20_000 && seq_vertices >= 3_000, || format!("{cmds} cmd / {seq_vertices} seq vertices"))?;
    let engine = Engine::new(graph, Weights::default(), DEFAULT_CACHE_CAPACITY).map_err(|e| e.to_string())?;

    let partials = [
        "c", "cat", "cat /srv/app3/logs/part5/f", "tail f120.log", "gre", "grep /srv/app9", "cst /srv", "vi", "l",
        "/srv/app1/logs", "sh", "ps -ef", "netstat", "df -h",
    ];
    let users = ["u00", "u07", "u13", "nobody"];
    let commands: Vec<CommandRequest> = partials
        .iter()
        .enumerate()
        .map(|(i, p)| CommandRequest {
            partial: p.to_string(),
            user: users[i % users.len()].into(),
            ip: format!("10.9.0.{}", i + 1),
            scope: "LoadTest".into(),
            top_n: 5,
        })
        .collect();
    let sequences: Vec<SequenceRequest> = sessions
        .iter()
        .step_by(97)
        .take(40)
        .map(|s| SequenceRequest {
            command: s.events[0].full_text.clone(),
            user: s.user.clone(),
            ip: s.ip.clone(),
            scope: s.scope.clone(),
            top_n: 5,
            cwd: None,
        })
        .collect();
    let report = latency_report(&engine, &commands, &sequences, 280, 1);
    let (u, c, s) = (report.uncached_command, report.cached_command, report.sequence);
    ensure(u.max_ms <= 200.0, || format!("uncached max {:.2} ms", u.max_ms))?;
    ensure(c.max_ms <= 10.0, || format!("cached max {:.2} ms", c.max_ms))?;
    ensure(s.max_ms <= 300.0, || format!("sequence max {:.2} ms", s.max_ms))?;
    Ok(format!(
        "{cmds} cmd / {seq_vertices} seq vertices; max uncached {:.2} ms, cached {:.3} ms, sequence {:.2} ms",
        u.max_ms, c.max_ms, s.max_ms
    ))
}

// ---------------------------------------------------------------- evaluator

fn evaluator_formulas() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cmd = |text: &str, file: Option<&str>, ty: &str| ParsedCommand {
        cmd_type: ty.into(),
        full_text: text.into(),
        accessed_path: file.map(|_| "/p".into()),
        accessed_file: file.map(Into::into),
        ts: 1,
    };
    for case in 0..300 {
        let n = rng.random_range(1..20);
        let mut raw = Vec::new();
        let mut processed = Vec::new();
        let mut expect = Vec::new();
        for i in 0..n {
            let x = rng.random_range(0..15usize);
            let y = if x == 0 { 0 } else { rng.random_range(0..=x) };
            let mk = |k: usize| Session {
                session_id: format!("s{i}"),
                ip: "10.0.0.1".into(),
                scope: "s".into(),
                user: "u".into(),
                start_ts: 1,
                end_ts: 1,
                events: (0..k).map(|j| cmd(&format!("ls {j}"), None, "ls")).collect(),
            };
            raw.push(mk(x));
            if y > 0 {
                processed.push(mk(y));
            }
            if x > 0 {
                expect.push(1.0 - y as f64 / x as f64);
            }
        }
        let got = cmdline_reduction(&raw, &processed);
        if !expect.is_empty() {
            let avg = expect.iter().sum::<f64>() / expect.len() as f64;
            let max = expect.iter().cloned().fold(0.0, f64::max);
            ensure((got.avg - avg).abs() <= 1e-12 && (got.max - max).abs() <= 1e-12, || {
                format!("case {case}: session reduction {got:?} vs {avg} / {max}")
            })?;
        }

        let cmds: Vec<ParsedCommand> = (0..rng.random_range(1..10))
            .map(|k| {
                let file = format!("f{k}.log");
                let dir = "/d".repeat(rng.random_range(1..6));
                cmd(&format!("cat {dir}/{file}"), Some(&file), "cat")
            })
            .collect();
        let manual: f64 = cmds
            .iter()
            .map(|c| {
                let typed = format!("cat {}", c.accessed_file.as_ref().unwrap());
                1.0 - typed.len() as f64 / c.full_text.len() as f64
            })
            .sum::<f64>()
            / cmds.len() as f64;
        let got = char_reduction(&cmds).unwrap();
        ensure((got - manual).abs() <= 1e-12, || format!("case {case}: char reduction {got} vs {manual}"))?;

        let items: Vec<(usize, u64)> = (0..rng.random_range(1..10)).map(|_| (rng.random_range(2..15), rng.random_range(1..20))).collect();
        let total: f64 = items.iter().map(|x| x.1 as f64).sum();
        let manual = items.iter().map(|&(l, w)| (1.0 - 1.0 / l as f64) * w as f64).sum::<f64>() / total;
        let got = seq_reduction(&items).unwrap();
        ensure((got.weighted_avg - manual).abs() <= 1e-12, || format!("case {case}: seq reduction"))?;
        ensure(got.min <= got.weighted_avg + 1e-12 && got.weighted_avg <= got.max + 1e-12, || {
            format!("case {case}: weighted average outside [min, max]")
        })?;
    }
    let worked = cmd("cat /opt/hw/configuration/logs/result.log", Some("result.log"), "cat");
    let typed = typed_form(&worked).unwrap();
    ensure(typed.len() == 14 && worked.full_text.len() == 41, || "worked example lengths".into())?;
    let r = char_ratio(&typed, &worked.full_text);
    ensure(r == 1.0 - 14.0 / 41.0 && (r - 0.659).abs() < 5e-4, || format!("worked example gave {r}"))?;
    Ok(format!("300 random cases; worked example 1 - 14/41 = {r:.3}"))
}

// ---------------------------------------------------------------- typo

fn typo_correction() -> Outcome {
    let known = ["cat", "cd", "grep"];
    ensure(correct_typo("cst", &known).as_deref() == Some("cat"), || "cst did not map to cat".into())?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let values = ["cat", "cd", "grep", "tail", "vi", "vim", "less", "sh", "ps", "df"];
    for _ in 0..1000 {
        let v = values[rng.random_range(0..values.len())];
        let cut = rng.random_range(1..=v.len());
        let token = &v[..cut];
        let (how, corrected) = resolve_first_token(&format!("{token} /x"), &values);
        ensure(!corrected, || format!("correction fired for known prefix {token:?}"))?;
        ensure(how == cmdgraph_core::recommender::Retrieval::Prefix(token.to_string()), || {
            format!("prefix {token:?} resolved to {how:?}")
        })?;
    }
    let (how, corrected) = resolve_first_token("cst /var/log/x.log", &known);
    ensure(corrected && how == cmdgraph_core::recommender::Retrieval::Prefix("cat".into()), || {
        "correction did not fire for cst".into()
    })?;
    Ok("cst -> cat; 1000 known prefixes left alone".into())
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("mining oracle equivalence", mining_oracle),
        ("planted-pattern recovery", planted_recovery),
        ("distance/similarity suites", similarity_suites),
        ("graph consistency", graph_consistency),
        ("ranking properties", ranking_properties),
        ("latency budgets", latency),
        ("evaluator formulas", evaluator_formulas),
        ("typo correction", typo_correction),
    ];
    let mut failed = 0;
    for (name, f) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail} [{secs:.1}s]"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why} [{secs:.1}s]");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all acceptance criteria passed");
}
