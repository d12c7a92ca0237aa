//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use cascadepred::cascade::{Adoption, Cascade};
use cascadepred::graph::{NodeId, SocialGraph};
use nalgebra::{DMatrix, DVector};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// Random directed graph on `n` nodes with arc probability `p`.
pub fn random_arcs(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<(NodeId, NodeId)> {
    let mut arcs = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && rng.gen::<f64>() < p {
                arcs.push((u as NodeId, v as NodeId));
            }
        }
    }
    arcs
}

/// Random graph with a Hamiltonian path so the undirected projection is connected.
pub fn random_connected_arcs(n: usize, p: f64, rng: &mut ChaCha8Rng) -> Vec<(NodeId, NodeId)> {
    let mut arcs = random_arcs(n, p, rng);
    let mut order: Vec<NodeId> = (0..n as NodeId).collect();
    order.shuffle(rng);
    for w in order.windows(2) {
        if rng.gen::<bool>() {
            arcs.push((w[0], w[1]));
        } else {
            arcs.push((w[1], w[0]));
        }
    }
    arcs
}

/// Symmetric 0/1 adjacency of the undirected projection, no self-loops.
pub fn undirected_matrix(n: usize, arcs: &[(NodeId, NodeId)]) -> Vec<Vec<bool>> {
    let mut a = vec![vec![false; n]; n];
    for &(u, v) in arcs {
        if u != v {
            a[u as usize][v as usize] = true;
            a[v as usize][u as usize] = true;
        }
    }
    a
}

/// Core numbers by deleting every node of degree < k, for k = 1, 2, ...
pub fn kshell_naive(adj: &[Vec<bool>]) -> Vec<usize> {
    let n = adj.len();
    let mut alive = vec![true; n];
    let mut core = vec![0usize; n];
    let mut k = 1;
    while alive.iter().any(|&a| a) {
        loop {
            let doomed: Vec<usize> = (0..n)
                .filter(|&v| alive[v])
                .filter(|&v| (0..n).filter(|&u| alive[u] && adj[v][u]).count() < k)
                .collect();
            if doomed.is_empty() {
                break;
            }
            for v in doomed {
                alive[v] = false;
                core[v] = k - 1;
            }
        }
        k += 1;
    }
    core
}

/// Principal eigenvector of the adjacency matrix, non-negative, unit L2 norm.
pub fn eigenvector_dense(adj: &[Vec<bool>]) -> Vec<f64> {
    let n = adj.len();
    let m = DMatrix::from_fn(n, n, |i, j| if adj[i][j] { 1.0 } else { 0.0 });
    let eig = m.symmetric_eigen();
    let (idx, _) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a: &(usize, &f64), b| a.1.total_cmp(b.1))
        .unwrap();
    let col = eig.eigenvectors.column(idx);
    let sign = if col.sum() < 0.0 { -1.0 } else { 1.0 };
    let norm = col.norm();
    col.iter().map(|x| sign * x / norm).collect()
}

/// PageRank fixed point by a dense linear solve. Arc (u, v) moves mass from u to v;
/// mass of nodes without outgoing arcs is spread uniformly.
pub fn pagerank_dense(n: usize, arcs: &[(NodeId, NodeId)], d: f64) -> Vec<f64> {
    let set: BTreeSet<(NodeId, NodeId)> = arcs.iter().copied().filter(|(u, v)| u != v).collect();
    let mut outdeg = vec![0usize; n];
    for &(u, _) in &set {
        outdeg[u as usize] += 1;
    }
    let nf = n as f64;
    let mut a = DMatrix::<f64>::identity(n, n);
    for &(u, v) in &set {
        a[(v as usize, u as usize)] -= d / outdeg[u as usize] as f64;
    }
    for u in 0..n {
        if outdeg[u] == 0 {
            for v in 0..n {
                a[(v, u)] -= d / nf;
            }
        }
    }
    let b = DVector::from_element(n, (1.0 - d) / nf);
    let x = a.lu().solve(&b).expect("nonsingular");
    x.iter().copied().collect()
}

/// Unweighted shortest-path lengths by Floyd-Warshall; `None` if unreachable.
pub fn all_pairs(adj: &[Vec<bool>]) -> Vec<Vec<Option<usize>>> {
    let n = adj.len();
    let mut d: Vec<Vec<Option<usize>>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { Some(0) } else if adj[i][j] { Some(1) } else { None }).collect())
        .collect();
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                if let (Some(a), Some(b)) = (d[i][k], d[k][j]) {
                    if d[i][j].is_none_or(|c| a + b < c) {
                        d[i][j] = Some(a + b);
                    }
                }
            }
        }
    }
    d
}

pub fn bfs_distance(adj: &[Vec<bool>], s: usize, t: usize) -> Option<usize> {
    let n = adj.len();
    let mut dist = vec![usize::MAX; n];
    dist[s] = 0;
    let mut q = VecDeque::from([s]);
    while let Some(u) = q.pop_front() {
        if u == t {
            return Some(dist[u]);
        }
        for v in 0..n {
            if adj[u][v] && dist[v] == usize::MAX {
                dist[v] = dist[u] + 1;
                q.push_back(v);
            }
        }
    }
    None
}

/// Diameter of the subgraph induced by `nodes`, ignoring unreachable pairs.
pub fn induced_diameter(adj: &[Vec<bool>], nodes: &[usize]) -> usize {
    let sub: Vec<Vec<bool>> = nodes.iter().map(|&i| nodes.iter().map(|&j| adj[i][j]).collect()).collect();
    all_pairs(&sub).into_iter().flatten().flatten().max().unwrap_or(0)
}

/// `(count, entropy, gini)` from a histogram of community labels.
pub fn community_oracle(labels: &[u32]) -> (usize, f64, f64) {
    let mut hist: BTreeMap<u32, f64> = BTreeMap::new();
    for &c in labels {
        *hist.entry(c).or_default() += 1.0;
    }
    let m = labels.len() as f64;
    let entropy = hist.values().map(|&c| -(c / m) * (c / m).ln()).sum::<f64>();
    let gini = 1.0 - hist.values().map(|&c| (c / m).powi(2)).sum::<f64>();
    if labels.is_empty() {
        (0, 0.0, 0.0)
    } else {
        (hist.len(), entropy.max(0.0), gini.max(0.0))
    }
}

/// `(ape, rmse, rmsle, coverage)`, coverage `None` for fewer than ten samples.
pub fn regression_oracle(y: &[f64], y_hat: &[f64], ids: &[String]) -> (f64, f64, f64, Option<f64>) {
    let m = y.len() as f64;
    let mut ape = 0.0;
    let mut se = 0.0;
    let mut sle = 0.0;
    for (&a, &b) in y.iter().zip(y_hat) {
        ape += (b - a).abs() / a;
        se += (b - a) * (b - a);
        let l = b.max(1.0).ln() - a.max(1.0).ln();
        sle += l * l;
    }
    let k = y.len() / 10;
    let coverage = (k > 0).then(|| {
        let top = |v: &[f64]| -> BTreeSet<String> {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&i, &j| v[j].total_cmp(&v[i]).then_with(|| ids[i].cmp(&ids[j])));
            idx[..k].iter().map(|&i| ids[i].clone()).collect()
        };
        top(y).intersection(&top(y_hat)).count() as f64 / k as f64
    });
    (ape / m, (se / m).sqrt(), (sle / m).sqrt(), coverage)
}

/// Precision, recall and F1 of the positive class from raw counts.
pub fn prf_oracle(labels: &[bool], predicted: &[bool]) -> (f64, f64, f64) {
    let tp = labels.iter().zip(predicted).filter(|(l, p)| **l && **p).count() as f64;
    let fp = labels.iter().zip(predicted).filter(|(l, p)| !**l && **p).count() as f64;
    let fneg = labels.iter().zip(predicted).filter(|(l, p)| **l && !**p).count() as f64;
    let div = |a: f64, b: f64| if b == 0.0 { 0.0 } else { a / b };
    let p = div(tp, tp + fp);
    let r = div(tp, tp + fneg);
    (p, r, div(2.0 * p * r, p + r))
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = n + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Trapezoid rule on a log-spaced grid over `[a, b]`, `a > 0`.
pub fn trapezoid_log(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let (la, lb) = (a.ln(), b.ln());
    let mut prev_t = a;
    let mut prev_f = f(a);
    let mut s = 0.0;
    for i in 1..=n {
        let t = (la + (lb - la) * i as f64 / n as f64).exp();
        let ft = f(t);
        s += 0.5 * (prev_f + ft) * (t - prev_t);
        prev_t = t;
        prev_f = ft;
    }
    s
}

/// A cascade over node ids given as dense indices.
pub fn cascade_from(id: &str, nodes: &[usize], times: &[f64]) -> Cascade {
    Cascade::new(
        id,
        nodes.iter().zip(times).map(|(&v, &t)| Adoption::new(v.to_string(), t)).collect(),
    )
}

pub fn graph(n: usize, arcs: &[(NodeId, NodeId)]) -> SocialGraph {
    SocialGraph::from_edges(n, arcs, true)
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

pub fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let m = v.len();
    if m % 2 == 1 {
        v[m / 2]
    } else {
        0.5 * (v[m / 2 - 1] + v[m / 2])
    }
}
