//! Frequent command-sequence mining under a maximum-gap constraint.
//!
//! Each session is a transaction and each normalized command an item. A
//! sequence `a` is contained in `b` w.r.t. gap `g` when it embeds at indices
//! `r_1 < … < r_k` with `r_{j+1} - r_j ≤ g`. Support counts sessions, not
//! occurrences.
//!
//! The search is a depth-first, SPAM-style prefix extension: a pattern's
//! projection keeps every end position of its embeddings in each session,
//! and only items within `g` positions of some end can extend it. Appending
//! an item never raises support, so branches below the threshold are cut.

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use chrono::NaiveDate;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parser::Session;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MiningConfig {
    /// Minimum frequency; `None` means "two sessions".
    pub theta: Option<f64>,
    pub max_gap: usize,
    pub min_size: usize,
    pub max_size: usize,
    pub min_users: usize,
    pub min_days: usize,
    pub redundancy_r: f64,
    pub collapse_repeats: bool,
}

impl Default for MiningConfig {
    fn default() -> Self {
        Self {
            theta: None,
            max_gap: 5,
            min_size: 2,
            max_size: 20,
            min_users: 1,
            min_days: 1,
            redundancy_r: 0.8,
            collapse_repeats: true,
        }
    }
}

impl MiningConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.theta {
            if !(t > 0.0 && t <= 1.0) {
                return Err(Error::Config(format!("theta must be in (0, 1], got {t}")));
            }
        }
        if self.max_gap == 0 {
            return Err(Error::Config("max_gap must be at least 1".into()));
        }
        if self.min_size < 2 || self.min_size > self.max_size {
            return Err(Error::Config(format!(
                "size bounds must satisfy 2 <= min_size <= max_size, got {}..{}",
                self.min_size, self.max_size
            )));
        }
        if !(self.redundancy_r > 0.0 && self.redundancy_r < 1.0) {
            return Err(Error::Config(format!("redundancy_r must be in (0, 1), got {}", self.redundancy_r)));
        }
        Ok(())
    }

    /// Effective frequency threshold for a dataset of `n` sessions.
    pub fn theta_for(&self, n: usize) -> f64 {
        self.theta.unwrap_or(2.0 / n.max(1) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequencePattern {
    pub commands: Vec<String>,
    pub support: usize,
    pub frequency: f64,
    #[serde(rename = "users")]
    pub user_count: usize,
    #[serde(rename = "days")]
    pub day_count: usize,
}

/// Canonical output order: support desc, length desc, then lexicographic.
pub fn pattern_order(a: &SequencePattern, b: &SequencePattern) -> Ordering {
    b.support
        .cmp(&a.support)
        .then(b.commands.len().cmp(&a.commands.len()))
        .then_with(|| a.commands.cmp(&b.commands))
}

/// Smallest session count whose frequency reaches `theta`.
pub fn min_support_count(theta: f64, n: usize) -> usize {
    let mut k = (theta * n as f64).ceil().max(1.0) as usize;
    while k > 1 && (k - 1) as f64 / n as f64 >= theta {
        k -= 1;
    }
    while (k as f64) / (n as f64) < theta {
        k += 1;
    }
    k
}

/// `a ⊑_g b`: `a` embeds into `b` with consecutive matched indices at most
/// `g` apart. The empty sequence is contained everywhere.
pub fn is_subsequence_with_gap<T: PartialEq>(a: &[T], b: &[T], g: usize) -> bool {
    if a.is_empty() {
        return true;
    }
    if a.len() > b.len() {
        return false;
    }
    // reach[p]: a[..=j] can be embedded ending exactly at b[p].
    let mut reach: Vec<bool> = b.iter().map(|x| *x == a[0]).collect();
    for item in &a[1..] {
        let mut next = vec![false; b.len()];
        let mut last_end: Option<usize> = None;
        let mut any = false;
        for p in 0..b.len() {
            if let Some(e) = last_end {
                if b[p] == *item && p - e <= g {
                    next[p] = true;
                    any = true;
                }
            }
            if reach[p] {
                last_end = Some(p);
            }
        }
        if !any {
            return false;
        }
        reach = next;
    }
    reach.iter().any(|&r| r)
}

/// Number of sessions containing `s` w.r.t. `g`.
pub fn support(dataset: &[Session], s: &[String], g: usize) -> usize {
    dataset
        .iter()
        .filter(|sess| {
            let items: Vec<&String> = sess.events.iter().map(|e| &e.full_text).collect();
            let needle: Vec<&String> = s.iter().collect();
            is_subsequence_with_gap(&needle, &items, g)
        })
        .count()
}

/// Sessions interned to item ids, with the per-session attributes the
/// post-filters need.
#[derive(Debug, Clone)]
pub struct MiningDataset {
    pub vocab: Vec<String>,
    pub transactions: Vec<Vec<u32>>,
    pub users: Vec<u32>,
    pub days: Vec<NaiveDate>,
}

impl MiningDataset {
    pub fn from_sessions(sessions: &[Session]) -> Self {
        let mut ids: HashMap<&str, u32> = HashMap::new();
        let mut vocab = Vec::new();
        let mut user_ids: HashMap<&str, u32> = HashMap::new();
        let mut transactions = Vec::with_capacity(sessions.len());
        let mut users = Vec::with_capacity(sessions.len());
        let mut days = Vec::with_capacity(sessions.len());
        for s in sessions {
            let t = s
                .events
                .iter()
                .map(|e| {
                    *ids.entry(e.full_text.as_str()).or_insert_with(|| {
                        vocab.push(e.full_text.clone());
                        (vocab.len() - 1) as u32
                    })
                })
                .collect();
            transactions.push(t);
            let n = user_ids.len() as u32;
            users.push(*user_ids.entry(s.user.as_str()).or_insert(n));
            days.push(s.day());
        }
        Self {
            vocab,
            transactions,
            users,
            days,
        }
    }

    pub fn len(&self) -> usize {
        self.transactions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }
}

/// End positions of all embeddings, per supporting session.
#[derive(Debug, Default)]
struct Projection {
    sids: Vec<u32>,
    offsets: Vec<u32>,
    ends: Vec<u32>,
}

impl Projection {
    fn support(&self) -> usize {
        self.sids.len()
    }

    fn session(&self, i: usize) -> (u32, &[u32]) {
        let lo = self.offsets[i] as usize;
        let hi = self.offsets.get(i + 1).map_or(self.ends.len(), |&o| o as usize);
        (self.sids[i], &self.ends[lo..hi])
    }

    fn push_session(&mut self, sid: u32, ends: &[u32]) {
        self.sids.push(sid);
        self.offsets.push(self.ends.len() as u32);
        self.ends.extend_from_slice(ends);
    }
}

/// Visits each position reachable from some end exactly once, ascending.
#[inline]
fn for_each_window_pos(ends: &[u32], len: usize, g: usize, mut f: impl FnMut(usize)) {
    let mut next = 0usize;
    for &e in ends {
        let lo = (e as usize + 1).max(next);
        let hi = (e as usize + g).min(len.saturating_sub(1));
        if lo > hi {
            continue;
        }
        for p in lo..=hi {
            f(p);
        }
        next = hi + 1;
    }
}

struct Search<'a> {
    data: &'a MiningDataset,
    g: usize,
    min_sup: usize,
    min_size: usize,
    max_size: usize,
    count: Vec<u32>,
    last_sid: Vec<u32>,
    slot: Vec<u32>,
    out: Vec<(Vec<u32>, usize, usize, usize)>,
}

impl<'a> Search<'a> {
    fn new(data: &'a MiningDataset, g: usize, min_sup: usize, min_size: usize, max_size: usize) -> Self {
        let v = data.vocab.len();
        Self {
            data,
            g,
            min_sup,
            min_size,
            max_size,
            count: vec![0; v],
            last_sid: vec![u32::MAX; v],
            slot: vec![u32::MAX; v],
            out: Vec::new(),
        }
    }

    fn record(&mut self, prefix: &[u32], proj: &Projection) {
        let mut users = HashSet::new();
        let mut days = HashSet::new();
        for &sid in &proj.sids {
            users.insert(self.data.users[sid as usize]);
            days.insert(self.data.days[sid as usize]);
        }
        self.out.push((prefix.to_vec(), proj.support(), users.len(), days.len()));
    }

    fn expand(&mut self, prefix: &mut Vec<u32>, proj: &Projection) {
        if prefix.len() >= self.min_size {
            self.record(prefix, proj);
        }
        if prefix.len() >= self.max_size {
            return;
        }

        // Count extension items once per supporting session.
        let mut touched: Vec<u32> = Vec::new();
        for i in 0..proj.sids.len() {
            let (sid, ends) = proj.session(i);
            let t = &self.data.transactions[sid as usize];
            let (count, last) = (&mut self.count, &mut self.last_sid);
            for_each_window_pos(ends, t.len(), self.g, |p| {
                let item = t[p] as usize;
                if last[item] != sid {
                    last[item] = sid;
                    if count[item] == 0 {
                        touched.push(item as u32);
                    }
                    count[item] += 1;
                }
            });
        }
        let mut frequent: Vec<u32> = touched
            .iter()
            .copied()
            .filter(|&it| self.count[it as usize] as usize >= self.min_sup)
            .collect();
        for &it in &touched {
            self.count[it as usize] = 0;
            self.last_sid[it as usize] = u32::MAX;
        }
        if frequent.is_empty() {
            return;
        }
        frequent.sort_unstable();

        // Build every child projection in one scan.
        for (k, &it) in frequent.iter().enumerate() {
            self.slot[it as usize] = k as u32;
        }
        let mut children: Vec<Projection> = (0..frequent.len()).map(|_| Projection::default()).collect();
        let mut ends_buf: Vec<Vec<u32>> = vec![Vec::new(); frequent.len()];
        let mut dirty: Vec<usize> = Vec::new();
        for i in 0..proj.sids.len() {
            let (sid, ends) = proj.session(i);
            let t = &self.data.transactions[sid as usize];
            let slot = &self.slot;
            for_each_window_pos(ends, t.len(), self.g, |p| {
                let s = slot[t[p] as usize];
                if s != u32::MAX {
                    let buf = &mut ends_buf[s as usize];
                    if buf.is_empty() {
                        dirty.push(s as usize);
                    }
                    buf.push(p as u32);
                }
            });
            for &s in &dirty {
                children[s].push_session(sid, &ends_buf[s]);
                ends_buf[s].clear();
            }
            dirty.clear();
        }
        for &it in &frequent {
            self.slot[it as usize] = u32::MAX;
        }

        for (it, child) in frequent.into_iter().zip(children) {
            prefix.push(it);
            self.expand(prefix, &child);
            prefix.pop();
        }
    }
}

/// Mines all sequences with frequency ≥ θ w.r.t. the gap whose length lies
/// in `[min_size, max_size]`, with exact supports, in canonical order.
pub fn mine_dataset(data: &MiningDataset, cfg: &MiningConfig) -> Result<Vec<SequencePattern>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("cannot mine an empty dataset".into()));
    }
    let n = data.len();
    let min_sup = min_support_count(cfg.theta_for(n), n);

    // Single-item projections.
    let mut occurrences: Vec<Projection> = (0..data.vocab.len()).map(|_| Projection::default()).collect();
    for (sid, t) in data.transactions.iter().enumerate() {
        let mut seen: HashMap<u32, Vec<u32>> = HashMap::new();
        for (p, &it) in t.iter().enumerate() {
            seen.entry(it).or_default().push(p as u32);
        }
        let mut items: Vec<_> = seen.into_iter().collect();
        items.sort_unstable_by_key(|(it, _)| *it);
        for (it, ends) in items {
            occurrences[it as usize].push_session(sid as u32, &ends);
        }
    }

    let roots: Vec<(u32, Projection)> = occurrences
        .into_iter()
        .enumerate()
        .filter(|(_, p)| p.support() >= min_sup)
        .map(|(i, p)| (i as u32, p))
        .collect();

    let found: Vec<(Vec<u32>, usize, usize, usize)> = roots
        .par_iter()
        .flat_map_iter(|(item, proj)| {
            let mut search = Search::new(data, cfg.max_gap, min_sup, cfg.min_size, cfg.max_size);
            let mut prefix = vec![*item];
            search.expand(&mut prefix, proj);
            search.out
        })
        .collect();

    let mut patterns: Vec<SequencePattern> = found
        .into_iter()
        .map(|(items, support, users, days)| SequencePattern {
            commands: items.iter().map(|&i| data.vocab[i as usize].clone()).collect(),
            support,
            frequency: support as f64 / n as f64,
            user_count: users,
            day_count: days,
        })
        .collect();
    patterns.sort_by(pattern_order);
    Ok(patterns)
}

pub fn mine(sessions: &[Session], cfg: &MiningConfig) -> Result<Vec<SequencePattern>> {
    mine_dataset(&MiningDataset::from_sessions(sessions), cfg)
}

fn collapse_consecutive(cmds: &[String]) -> Vec<String> {
    let mut out: Vec<String> = Vec::with_capacity(cmds.len());
    for c in cmds {
        if out.last() != Some(c) {
            out.push(c.clone());
        }
    }
    out
}

/// Applies the user/day, repetition and redundancy filters.
///
/// Redundancy: `a` is dropped when another pattern `b` that survived the
/// earlier filters satisfies `a ⊑_g b` and `f(b) ≥ r·f(a)`.
pub fn post_filter(patterns: &[SequencePattern], cfg: &MiningConfig) -> Result<Vec<SequencePattern>> {
    cfg.validate()?;
    let kept = patterns
        .iter()
        .filter(|p| p.user_count >= cfg.min_users && p.day_count >= cfg.min_days);

    let mut survivors: Vec<SequencePattern> = if cfg.collapse_repeats {
        // collapsed form -> (best pattern, original commands for tie-break)
        let mut best: HashMap<Vec<String>, (SequencePattern, Vec<String>)> = HashMap::new();
        for p in kept {
            let collapsed = collapse_consecutive(&p.commands);
            if collapsed.len() < cfg.min_size {
                continue;
            }
            let candidate = SequencePattern {
                commands: collapsed.clone(),
                ..p.clone()
            };
            match best.get_mut(&collapsed) {
                Some((cur, orig)) => {
                    let better = p.support > cur.support || (p.support == cur.support && p.commands < *orig);
                    if better {
                        *cur = candidate;
                        *orig = p.commands.clone();
                    }
                }
                None => {
                    best.insert(collapsed, (candidate, p.commands.clone()));
                }
            }
        }
        best.into_values().map(|(p, _)| p).collect()
    } else {
        kept.cloned().collect()
    };
    survivors.sort_by(pattern_order);

    let g = cfg.max_gap;
    let r = cfg.redundancy_r;
    let redundant: Vec<bool> = survivors
        .par_iter()
        .enumerate()
        .map(|(i, a)| {
            survivors.iter().enumerate().any(|(j, b)| {
                j != i
                    && b.commands.len() > a.commands.len()
                    && b.frequency + 1e-12 >= r * a.frequency
                    && is_subsequence_with_gap(&a.commands, &b.commands, g)
            })
        })
        .collect();
    Ok(survivors
        .into_iter()
        .zip(redundant)
        .filter_map(|(p, red)| (!red).then_some(p))
        .collect())
}
