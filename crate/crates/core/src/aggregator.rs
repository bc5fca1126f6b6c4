//! Distances between mined sequences, K-medoids clustering over the
//! distance matrix, silhouette-based choice of K, and the macro registry.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parser::tokenize;

/// Jaccard distance between the token sets of two commands.
pub fn jaccard_distance(a: &str, b: &str) -> f64 {
    let ta: BTreeSet<String> = tokenize(a).into_iter().collect();
    let tb: BTreeSet<String> = tokenize(b).into_iter().collect();
    set_distance(&ta, &tb)
}

fn set_distance<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    1.0 - a.intersection(b).count() as f64 / union as f64
}

/// Position-wise Jaccard distance plus a length penalty, scaled by the
/// longer length.
pub fn sequence_distance<S: AsRef<str>>(x: &[S], y: &[S]) -> f64 {
    let (lo, hi) = (x.len().min(y.len()), x.len().max(y.len()));
    if hi == 0 {
        return 0.0;
    }
    let sum: f64 = x.iter().zip(y).map(|(a, b)| jaccard_distance(a.as_ref(), b.as_ref())).sum();
    (sum + (hi - lo) as f64) / hi as f64
}

/// Symmetric distance matrix with zero diagonal, stored as its strict upper
/// triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    upper: Vec<f64>,
}

impl DistanceMatrix {
    /// Builds a matrix from a full row-major table; only `i < j` cells are read.
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut upper = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                upper.push(f(i, j));
            }
        }
        Self { n, upper }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn offset(&self, i: usize, j: usize) -> usize {
        // row i starts after rows 0..i, each of length n-1-r
        i * (2 * self.n - i - 1) / 2 + (j - i - 1)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match i.cmp(&j) {
            std::cmp::Ordering::Equal => 0.0,
            std::cmp::Ordering::Less => self.upper[self.offset(i, j)],
            std::cmp::Ordering::Greater => self.upper[self.offset(j, i)],
        }
    }
}

/// Pairwise [`sequence_distance`] over `seqs`, computed in parallel. Tokens
/// are interned once so each command pair costs one sorted merge.
pub fn build_distance_matrix<S: AsRef<str> + Sync>(seqs: &[Vec<S>]) -> DistanceMatrix {
    let mut vocab: HashMap<String, u32> = HashMap::new();
    let mut commands: HashMap<&str, u32> = HashMap::new();
    let mut token_sets: Vec<Vec<u32>> = Vec::new();
    let interned: Vec<Vec<u32>> = seqs
        .iter()
        .map(|s| {
            s.iter()
                .map(|c| {
                    let c = c.as_ref();
                    *commands.entry(c).or_insert_with(|| {
                        let mut ids: Vec<u32> = tokenize(c)
                            .into_iter()
                            .map(|t| {
                                let next = vocab.len() as u32;
                                *vocab.entry(t).or_insert(next)
                            })
                            .collect();
                        ids.sort_unstable();
                        ids.dedup();
                        token_sets.push(ids);
                        token_sets.len() as u32 - 1
                    })
                })
                .collect()
        })
        .collect();

    let cmd_dist = |a: u32, b: u32| -> f64 {
        if a == b {
            return 0.0;
        }
        let (x, y) = (&token_sets[a as usize], &token_sets[b as usize]);
        let (mut i, mut j, mut common) = (0, 0, 0usize);
        while i < x.len() && j < y.len() {
            match x[i].cmp(&y[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    common += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        let union = x.len() + y.len() - common;
        if union == 0 {
            0.0
        } else {
            1.0 - common as f64 / union as f64
        }
    };
    let seq_dist = |x: &[u32], y: &[u32]| -> f64 {
        let (lo, hi) = (x.len().min(y.len()), x.len().max(y.len()));
        if hi == 0 {
            return 0.0;
        }
        let sum: f64 = x.iter().zip(y).map(|(&a, &b)| cmd_dist(a, b)).sum();
        (sum + (hi - lo) as f64) / hi as f64
    };

    let n = interned.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (i + 1..n).map(|j| seq_dist(&interned[i], &interned[j])).collect())
        .collect();
    DistanceMatrix {
        n,
        upper: rows.concat(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clustering {
    /// Cluster id (index into `medoids`) per point.
    pub assignment: Vec<usize>,
    pub medoids: Vec<usize>,
    /// Sum of distances from each point to its medoid.
    pub loss: f64,
    /// Loss after initialization and after every accepted swap.
    pub loss_trace: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Near {
    medoid: usize,
    dist: f64,
}

const SWAP_EPS: f64 = 1e-12;
const MAX_PASSES: usize = 100;

/// K-medoids over a precomputed matrix: seeded random initial medoids, then
/// eager best-removal swaps (FasterPAM) until a full pass finds no
/// improvement. Deterministic for a given seed.
pub fn cluster(m: &DistanceMatrix, k: usize, seed: u64) -> Result<Clustering> {
    let n = m.len();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("cannot form {k} clusters from {n} points")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut medoids: Vec<usize> = rand::seq::index::sample(&mut rng, n, k).into_vec();
    medoids.sort_unstable();
    let mut is_medoid = vec![false; n];
    for &x in &medoids {
        is_medoid[x] = true;
    }

    let far = Near {
        medoid: usize::MAX,
        dist: f64::INFINITY,
    };
    let mut near = vec![far; n];
    let mut second = vec![far; n];
    for o in 0..n {
        let (a, b) = nearest_two(m, &medoids, o, None);
        near[o] = a;
        second[o] = b;
    }
    let total = |near: &[Near]| near.iter().map(|x| x.dist).sum::<f64>();
    let mut loss_trace = vec![total(&near)];

    if k < n {
        let removal_loss = |near: &[Near], second: &[Near]| {
            let mut r = vec![0.0; k];
            for (a, b) in near.iter().zip(second) {
                if b.dist.is_finite() {
                    r[a.medoid] += b.dist - a.dist;
                }
            }
            r
        };
        let mut base = removal_loss(&near, &second);
        let mut last_swap = 0usize;
        let mut steps = 0usize;
        let mut xc = 0usize;
        while steps < n * MAX_PASSES && (steps == 0 || steps - last_swap < n) {
            steps += 1;
            let j = xc;
            xc = (xc + 1) % n;
            if is_medoid[j] {
                continue;
            }
            let mut removal = base.clone();
            let mut acc = 0.0;
            if k == 1 {
                acc = (0..n).map(|o| m.get(j, o) - near[o].dist).sum();
                removal[0] = 0.0;
            }
            for o in (0..n).filter(|_| k > 1) {
                let d = m.get(j, o);
                let (a, b) = (near[o], second[o]);
                if d < a.dist {
                    acc += d - a.dist;
                    if b.dist.is_finite() {
                        removal[a.medoid] += a.dist - b.dist;
                    }
                } else if d < b.dist {
                    removal[a.medoid] += d - b.dist;
                }
            }
            let (b, best) = removal
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
            if best + acc < -SWAP_EPS {
                is_medoid[medoids[b]] = false;
                is_medoid[j] = true;
                medoids[b] = j;
                for o in 0..n {
                    let d = m.get(o, j);
                    if o == j || near[o].medoid == b && d >= second[o].dist || second[o].medoid == b && d >= near[o].dist {
                        let (x, y) = nearest_two(m, &medoids, o, None);
                        near[o] = x;
                        second[o] = y;
                    } else if near[o].medoid == b || d < near[o].dist {
                        if near[o].medoid != b {
                            second[o] = near[o];
                        }
                        near[o] = Near { medoid: b, dist: d };
                    } else if d < second[o].dist {
                        second[o] = Near { medoid: b, dist: d };
                    }
                }
                base = removal_loss(&near, &second);
                loss_trace.push(total(&near));
                last_swap = steps;
            }
        }
        for o in 0..n {
            let (x, y) = nearest_two(m, &medoids, o, None);
            near[o] = x;
            second[o] = y;
        }
    }

    let mut assignment: Vec<usize> = near.iter().map(|x| x.medoid).collect();
    for (l, &x) in medoids.iter().enumerate() {
        assignment[x] = l;
    }
    let loss = (0..n).map(|o| m.get(o, medoids[assignment[o]])).sum();
    Ok(Clustering {
        assignment,
        medoids,
        loss,
        loss_trace,
    })
}

/// Nearest and second-nearest medoid of `o`; ties go to the lower medoid slot.
fn nearest_two(m: &DistanceMatrix, medoids: &[usize], o: usize, skip: Option<usize>) -> (Near, Near) {
    let far = Near {
        medoid: usize::MAX,
        dist: f64::INFINITY,
    };
    let (mut a, mut b) = (far, far);
    for (l, &x) in medoids.iter().enumerate() {
        if Some(l) == skip {
            continue;
        }
        let d = m.get(o, x);
        if d < a.dist || (x == o && d <= a.dist) {
            b = a;
            a = Near { medoid: l, dist: d };
        } else if d < b.dist {
            b = Near { medoid: l, dist: d };
        }
    }
    (a, b)
}

/// Mean silhouette. Singleton clusters score 0, as do points whose `a` and
/// `b` are both 0.
pub fn silhouette(m: &DistanceMatrix, assignment: &[usize]) -> Result<f64> {
    let n = m.len();
    if assignment.len() != n {
        return Err(Error::InvalidArgument("assignment length differs from matrix size".into()));
    }
    let k = assignment.iter().copied().max().map_or(0, |x| x + 1);
    let mut sizes = vec![0usize; k];
    for &c in assignment {
        sizes[c] += 1;
    }
    if sizes.iter().filter(|&&s| s > 0).count() < 2 {
        return Err(Error::InvalidArgument("silhouette needs at least two clusters".into()));
    }
    let total: f64 = (0..n)
        .into_par_iter()
        .map(|i| {
            let own = assignment[i];
            if sizes[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; k];
            for j in 0..n {
                if j != i {
                    sums[assignment[j]] += m.get(i, j);
                }
            }
            let a = sums[own] / (sizes[own] - 1) as f64;
            let b = (0..k)
                .filter(|&c| c != own && sizes[c] > 0)
                .map(|c| sums[c] / sizes[c] as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                (b - a) / denom
            }
        })
        .sum();
    Ok(total / n as f64)
}

/// Default scan grid for `n` sequences: K from 2 to n-1, step max(1, n/100).
pub fn default_grid(n: usize) -> (usize, usize, usize) {
    (2, n.saturating_sub(1).max(2), (n / 100).max(1))
}

/// Silhouette per K on the grid and the best K (ties → smallest).
pub fn select_k(m: &DistanceMatrix, k_min: usize, k_max: usize, step: usize, seed: u64) -> Result<(usize, Vec<(usize, f64)>)> {
    if step == 0 || k_min > k_max || k_min < 2 || k_max > m.len() {
        return Err(Error::InvalidArgument(format!(
            "empty K grid {k_min}..={k_max} step {step} for {} points",
            m.len()
        )));
    }
    let mut scores = Vec::new();
    let mut best: Option<(usize, f64)> = None;
    for k in (k_min..=k_max).step_by(step) {
        let c = cluster(m, k, seed)?;
        let s = silhouette(m, &c.assignment)?;
        scores.push((k, s));
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((k, s));
        }
    }
    Ok((best.expect("grid is non-empty").0, scores))
}

/// A human-authored generalized sequence for one scope.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Macro {
    pub scope: String,
    pub intent: String,
    pub commands: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_cluster: Option<usize>,
}

/// Reads a macro file (one JSON object per line).
pub fn load_macros(path: &Path) -> Result<Vec<Macro>> {
    crate::io::read_ndjson(path)
}

/// Problems with a macro set; empty when valid. `known_scopes`, when given,
/// flags macros for scopes that do not exist.
pub fn validate_macros(macros: &[Macro], known_scopes: Option<&BTreeSet<String>>) -> Vec<String> {
    let mut out = Vec::new();
    let mut seen: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for (i, m) in macros.iter().enumerate() {
        let line = i + 1;
        if m.intent.trim().is_empty() {
            out.push(format!("macro {line}: empty intent"));
        }
        if m.commands.is_empty() || m.commands.iter().any(|c| c.trim().is_empty()) {
            out.push(format!("macro {line}: empty command list or blank command"));
        }
        if let Some(first) = seen.insert((&m.scope, &m.intent), line) {
            out.push(format!(
                "macro {line}: intent `{}` already defined for scope `{}` by macro {first}",
                m.intent, m.scope
            ));
        }
        if let Some(scopes) = known_scopes {
            if !scopes.contains(&m.scope) {
                out.push(format!("macro {line}: unknown scope `{}`", m.scope));
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn blocks(sizes: &[usize], within: f64, across: f64) -> (DistanceMatrix, Vec<usize>) {
        let labels: Vec<usize> = sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c, s)).collect();
        let m = DistanceMatrix::from_fn(labels.len(), |i, j| if labels[i] == labels[j] { within } else { across });
        (m, labels)
    }

    fn same_partition(a: &[usize], b: &[usize]) -> bool {
        (0..a.len()).all(|i| (0..a.len()).all(|j| (a[i] == a[j]) == (b[i] == b[j])))
    }

    #[test]
    fn jaccard_examples() {
        let c = "cat /data/logs/result.log";
        assert_eq!(jaccard_distance(c, c), 0.0);
        assert!((jaccard_distance(c, "vi /data/logs/result.log") - 0.4).abs() < 1e-12);
        assert_eq!(jaccard_distance("ls", "pwd"), 1.0);
        assert_eq!(jaccard_distance("", ""), 0.0);
    }

    #[test]
    fn sequence_distance_examples() {
        let c = "cat /a/b.log";
        assert_eq!(sequence_distance(&[c], &[c]), 0.0);
        assert!((sequence_distance(&[c], &[c, c]) - 0.5).abs() < 1e-12);
        assert_eq!(sequence_distance(&["ls", "pwd"], &["df", "top"]), 1.0);
    }

    #[test]
    fn matrix_matches_direct_distance() {
        let seqs: Vec<Vec<&str>> = vec![
            vec!["cat /a/x.log", "ls"],
            vec!["vi /a/x.log"],
            vec!["ls", "cat /a/x.log", "df -h"],
            vec!["ls"],
        ];
        let m = build_distance_matrix(&seqs);
        for i in 0..seqs.len() {
            for j in 0..seqs.len() {
                assert!((m.get(i, j) - sequence_distance(&seqs[i], &seqs[j])).abs() < 1e-12);
            }
        }
        let same = build_distance_matrix(&[vec!["ls"], vec!["ls"], vec!["ls"]]);
        assert!((0..3).all(|i| (0..3).all(|j| same.get(i, j) == 0.0)));
    }

    #[test]
    fn two_pairs_split_naturally() {
        let (m, labels) = blocks(&[2, 2], 0.0, 1.0);
        let c = cluster(&m, 2, 7).unwrap();
        assert!(same_partition(&c.assignment, &labels));
        assert_eq!(c.loss, 0.0);
        assert_eq!(silhouette(&m, &c.assignment).unwrap(), 1.0);
    }

    #[test]
    fn k_equals_n_gives_singletons() {
        let m = DistanceMatrix::from_fn(5, |i, j| (i + j) as f64 / 10.0);
        let c = cluster(&m, 5, 1).unwrap();
        let distinct: BTreeSet<usize> = c.assignment.iter().copied().collect();
        assert_eq!(distinct.len(), 5);
        assert_eq!(c.loss, 0.0);
        assert!(cluster(&m, 6, 1).is_err());
    }

    #[test]
    fn identical_points_forced_apart_score_zero() {
        let m = DistanceMatrix::from_fn(4, |_, _| 0.0);
        let c = cluster(&m, 2, 3).unwrap();
        let distinct: BTreeSet<usize> = c.assignment.iter().copied().collect();
        assert_eq!(distinct.len(), 2, "every cluster keeps its medoid");
        assert_eq!(silhouette(&m, &c.assignment).unwrap(), 0.0);
    }

    #[test]
    fn select_k_finds_blob_count() {
        let (m, _) = blocks(&[2, 2], 0.0, 1.0);
        assert_eq!(select_k(&m, 2, 3, 1, 0).unwrap().0, 2);
        let (m3, _) = blocks(&[3, 4, 3], 0.1, 0.9);
        let (k, table) = select_k(&m3, 2, 6, 1, 11).unwrap();
        let best = table.iter().map(|x| x.1).fold(f64::MIN, f64::max);
        assert_eq!(k, 3, "{table:?}");
        assert_eq!(table.iter().find(|x| x.0 == 3).unwrap().1, best);
        assert_eq!(select_k(&m3, 4, 4, 1, 0).unwrap().0, 4);
        assert!(select_k(&m3, 5, 4, 1, 0).is_err());
    }

    #[test]
    fn macros_validate() {
        let mk = |scope: &str, intent: &str, cmds: &[&str]| Macro {
            scope: scope.into(),
            intent: intent.into(),
            commands: cmds.iter().map(|s| s.to_string()).collect(),
            source_cluster: None,
        };
        let ok = vec![mk("a", "restart_service=Y", &["x", "y"]), mk("b", "restart_service=Y", &["x"])];
        assert!(validate_macros(&ok, None).is_empty());
        let dup = vec![mk("a", "i", &["x"]), mk("a", "i", &["y"])];
        assert_eq!(validate_macros(&dup, None).len(), 1);
        let empty = vec![mk("a", " ", &[])];
        assert_eq!(validate_macros(&empty, None).len(), 2);
        let scopes = BTreeSet::from(["b".to_string()]);
        assert_eq!(validate_macros(&ok, Some(&scopes)).len(), 1);
    }

    #[test]
    fn macro_file_roundtrip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("macros.ndjson");
        std::fs::write(&p, "").unwrap();
        assert!(load_macros(&p).unwrap().is_empty());
        std::fs::write(
            &p,
            concat!(
                r#"{"scope":"OnlineServiceRLX","intent":"restart_service=Y","commands":["cat conf/app.properties","sh bin/stop.sh","sh bin/start.sh","cat logs/run.log"]}"#,
                "\n",
                r#"{"scope":"x","intent":"broken""#,
                "\n"
            ),
        )
        .unwrap();
        let err = load_macros(&p).unwrap_err().to_string();
        assert!(err.contains(":2"), "{err}");
    }

    fn brute_silhouette(m: &DistanceMatrix, lab: &[usize]) -> f64 {
        let n = lab.len();
        let clusters: BTreeSet<usize> = lab.iter().copied().collect();
        let mut total = 0.0;
        for i in 0..n {
            let mates: Vec<usize> = (0..n).filter(|&j| j != i && lab[j] == lab[i]).collect();
            if mates.is_empty() {
                continue;
            }
            let a = mates.iter().map(|&j| m.get(i, j)).sum::<f64>() / mates.len() as f64;
            let mut b = f64::INFINITY;
            for &c in &clusters {
                if c == lab[i] {
                    continue;
                }
                let members: Vec<usize> = (0..n).filter(|&j| lab[j] == c).collect();
                b = b.min(members.iter().map(|&j| m.get(i, j)).sum::<f64>() / members.len() as f64);
            }
            let d = if a > b { a } else { b };
            total += if d > 0.0 { (b - a) / d } else { 0.0 };
        }
        total / n as f64
    }

    fn matrix_strategy() -> impl Strategy<Value = (DistanceMatrix, usize, u64)> {
        (4usize..30).prop_flat_map(|n| {
            (
                proptest::collection::vec(0.0f64..1.0, n * (n - 1) / 2),
                2..=n.min(8),
                any::<u64>(),
            )
                .prop_map(move |(upper, k, seed)| (DistanceMatrix { n, upper }, k, seed))
        })
    }

    proptest! {
        #[test]
        fn silhouette_matches_brute_force((m, k, seed) in matrix_strategy()) {
            let c = cluster(&m, k, seed).unwrap();
            let fast = silhouette(&m, &c.assignment).unwrap();
            prop_assert!((fast - brute_silhouette(&m, &c.assignment)).abs() < 1e-9);
            prop_assert!((-1.0..=1.0).contains(&fast));
        }

        #[test]
        fn clustering_is_deterministic_and_monotone((m, k, seed) in matrix_strategy()) {
            let a = cluster(&m, k, seed).unwrap();
            let b = cluster(&m, k, seed).unwrap();
            prop_assert_eq!(&a, &b);
            prop_assert!(a.loss_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
            let distinct: BTreeSet<usize> = a.assignment.iter().copied().collect();
            prop_assert_eq!(distinct.len(), k);
            prop_assert!((a.loss - a.loss_trace.last().unwrap()).abs() < 1e-9);
        }

        #[test]
        fn matrix_is_symmetric_with_zero_diagonal(seqs in proptest::collection::vec(
            proptest::collection::vec("(ls|cat /a/b.log|vi /a/c|df -h|grep x /a/b.log)", 1..5), 1..8)) {
            let m = build_distance_matrix(&seqs);
            for i in 0..seqs.len() {
                prop_assert_eq!(m.get(i, i), 0.0);
                for j in 0..seqs.len() {
                    prop_assert_eq!(m.get(i, j), m.get(j, i));
                    prop_assert!((0.0..=1.0).contains(&m.get(i, j)));
                }
            }
        }
    }
}
