//! Root-node centralities: out-degree, k-shell, eigenvector and PageRank.
//!
//! k-shell and eigenvector centrality use the undirected projection;
//! out-degree and PageRank follow arc direction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cascade::Cascade;
use crate::error::{Error, Result};
use crate::graph::{NodeId, SocialGraph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CentralityMeasure {
    OutDegree,
    KShell,
    Eigenvector,
    Pagerank,
}

impl CentralityMeasure {
    pub const ALL: [CentralityMeasure; 4] = [
        CentralityMeasure::OutDegree,
        CentralityMeasure::KShell,
        CentralityMeasure::Eigenvector,
        CentralityMeasure::Pagerank,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CentralityMeasure::OutDegree => "out_degree",
            CentralityMeasure::KShell => "k_shell",
            CentralityMeasure::Eigenvector => "eigenvector",
            CentralityMeasure::Pagerank => "pagerank",
        }
    }
}

impl fmt::Display for CentralityMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CentralityMeasure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown centrality measure `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CentralityTable {
    pub measure: CentralityMeasure,
    /// Indexed by dense node id.
    pub values: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl CentralityTable {
    pub fn value(&self, v: NodeId) -> f64 {
        self.values[v as usize]
    }

    pub fn mean(&self) -> f64 {
        crate::stats::mean(&self.values)
    }
}

/// Iteration controls for the two spectral measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CentralityParams {
    pub damping: f64,
    pub pagerank_tol: f64,
    pub pagerank_max_iter: usize,
    pub eigenvector_tol: f64,
    pub eigenvector_max_iter: usize,
}

impl Default for CentralityParams {
    fn default() -> Self {
        CentralityParams {
            damping: 0.85,
            pagerank_tol: 1e-10,
            pagerank_max_iter: 1000,
            eigenvector_tol: 1e-8,
            eigenvector_max_iter: 1000,
        }
    }
}

pub fn compute(
    g: &SocialGraph,
    measure: CentralityMeasure,
    params: &CentralityParams,
) -> Result<CentralityTable> {
    match measure {
        CentralityMeasure::OutDegree => Ok(out_degree(g)),
        CentralityMeasure::KShell => Ok(k_shell(g)),
        CentralityMeasure::Eigenvector => {
            eigenvector_centrality(g, params.eigenvector_tol, params.eigenvector_max_iter)
        }
        CentralityMeasure::Pagerank => {
            pagerank(g, params.damping, params.pagerank_tol, params.pagerank_max_iter)
        }
    }
}

pub fn out_degree(g: &SocialGraph) -> CentralityTable {
    CentralityTable {
        measure: CentralityMeasure::OutDegree,
        values: g.nodes().map(|v| g.followers(v).len() as f64).collect(),
        iterations: 0,
        residual: 0.0,
    }
}

/// Core numbers by bucket-sorted minimum-degree peeling (Batagelj–Zaversnik).
pub fn k_shell(g: &SocialGraph) -> CentralityTable {
    let n = g.node_count();
    let mut deg: Vec<usize> = g.nodes().map(|v| g.degree(v)).collect();
    let max_deg = deg.iter().copied().max().unwrap_or(0);

    let mut bin = vec![0usize; max_deg + 1];
    for &d in &deg {
        bin[d] += 1;
    }
    let mut start = 0;
    for b in bin.iter_mut() {
        let count = *b;
        *b = start;
        start += count;
    }
    let mut pos = vec![0usize; n];
    let mut vert = vec![0 as NodeId; n];
    for v in 0..n {
        pos[v] = bin[deg[v]];
        vert[pos[v]] = v as NodeId;
        bin[deg[v]] += 1;
    }
    for d in (1..=max_deg).rev() {
        bin[d] = bin[d - 1];
    }
    bin[0] = 0;

    for i in 0..n {
        let v = vert[i] as usize;
        for &u in g.neighbors(v as NodeId) {
            let u = u as usize;
            if deg[u] > deg[v] {
                let du = deg[u];
                let pu = pos[u];
                let pw = bin[du];
                let w = vert[pw] as usize;
                if u != w {
                    pos[u] = pw;
                    vert[pu] = w as NodeId;
                    pos[w] = pu;
                    vert[pw] = u as NodeId;
                }
                bin[du] += 1;
                deg[u] -= 1;
            }
        }
    }

    CentralityTable {
        measure: CentralityMeasure::KShell,
        values: deg.into_iter().map(|d| d as f64).collect(),
        iterations: 0,
        residual: 0.0,
    }
}

/// Power iteration on `A + I` over the undirected projection, L2-normalized.
///
/// The identity shift leaves eigenvectors unchanged and keeps bipartite
/// components from oscillating.
pub fn eigenvector_centrality(
    g: &SocialGraph,
    tol: f64,
    max_iter: usize,
) -> Result<CentralityTable> {
    let n = g.node_count();
    if g.undirected_edge_count() == 0 {
        return Err(Error::invalid("eigenvector centrality needs at least one edge"));
    }
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut y = vec![0.0; n];
    let mut delta = f64::INFINITY;
    for iter in 1..=max_iter {
        for v in 0..n {
            let s: f64 = g.neighbors(v as NodeId).iter().map(|&u| x[u as usize]).sum();
            y[v] = x[v] + s;
        }
        let norm = y.iter().map(|a| a * a).sum::<f64>().sqrt();
        for a in y.iter_mut() {
            *a /= norm;
        }
        delta = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        std::mem::swap(&mut x, &mut y);
        if delta < tol {
            return Ok(CentralityTable {
                measure: CentralityMeasure::Eigenvector,
                values: x,
                iterations: iter,
                residual: delta,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "eigenvector centrality",
        iterations: max_iter,
        residual: delta,
    })
}

/// PageRank along arc direction; mass of nodes without followers is spread
/// uniformly.
pub fn pagerank(g: &SocialGraph, damping: f64, tol: f64, max_iter: usize) -> Result<CentralityTable> {
    if !(damping > 0.0 && damping < 1.0) {
        return Err(Error::invalid(format!("damping {damping} outside (0, 1)")));
    }
    let n = g.node_count();
    if n == 0 {
        return Err(Error::invalid("pagerank of an empty graph"));
    }
    let nf = n as f64;
    let out_deg: Vec<f64> = g.nodes().map(|v| g.followers(v).len() as f64).collect();
    let mut x = vec![1.0 / nf; n];
    let mut y = vec![0.0; n];
    let mut delta = f64::INFINITY;
    for iter in 1..=max_iter {
        let dangling: f64 = (0..n).filter(|&v| out_deg[v] == 0.0).map(|v| x[v]).sum();
        let base = (1.0 - damping) / nf + damping * dangling / nf;
        for v in 0..n {
            let inflow: f64 = g
                .followees(v as NodeId)
                .iter()
                .map(|&u| x[u as usize] / out_deg[u as usize])
                .sum();
            y[v] = base + damping * inflow;
        }
        delta = x.iter().zip(&y).map(|(a, b)| (a - b).abs()).sum();
        std::mem::swap(&mut x, &mut y);
        if delta < tol {
            return Ok(CentralityTable {
                measure: CentralityMeasure::Pagerank,
                values: x,
                iterations: iter,
                residual: delta,
            });
        }
    }
    Err(Error::NoConvergence {
        what: "pagerank",
        iterations: max_iter,
        residual: delta,
    })
}

/// Centrality of the cascade's first adopter.
pub fn root_centrality_feature(
    cascade: &Cascade,
    table: &CentralityTable,
    g: &SocialGraph,
) -> Result<f64> {
    let root = cascade.root();
    let v = g
        .internal_id(&root.node)
        .ok_or_else(|| Error::RootNotInGraph {
            cascade: cascade.id.clone(),
            node: root.node.clone(),
        })?;
    Ok(table.value(v))
}
