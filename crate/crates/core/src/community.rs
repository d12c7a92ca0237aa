//! Node-to-community assignments: loaded from a file or detected with
//! multi-start Louvain, plus Newman modularity on the undirected projection.

use std::collections::HashMap;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, SocialGraph};
use crate::io::{for_each_record, parse_error};

pub type CommunityId = u32;

/// Total map from nodes to communities, with its modularity.
#[derive(Debug, Clone, PartialEq)]
pub struct CommunityAssignment {
    mapping: Vec<CommunityId>,
    community_count: usize,
    modularity: f64,
    /// Nodes that had no assignment and were given singleton communities.
    pub singletons_added: usize,
}

impl CommunityAssignment {
    /// Relabels `labels` densely in node order and computes modularity.
    pub fn from_labels(g: &SocialGraph, labels: &[CommunityId]) -> Result<Self> {
        if labels.len() != g.node_count() {
            return Err(Error::invalid(format!(
                "assignment covers {} nodes, graph has {}",
                labels.len(),
                g.node_count()
            )));
        }
        let mapping = relabel(labels);
        let community_count = mapping.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
        let modularity = modularity(g, &mapping);
        Ok(CommunityAssignment {
            mapping,
            community_count,
            modularity,
            singletons_added: 0,
        })
    }

    #[inline]
    pub fn community_of(&self, v: NodeId) -> CommunityId {
        self.mapping[v as usize]
    }

    pub fn mapping(&self) -> &[CommunityId] {
        &self.mapping
    }

    pub fn community_count(&self) -> usize {
        self.community_count
    }

    pub fn modularity(&self) -> f64 {
        self.modularity
    }
}

fn relabel(labels: &[CommunityId]) -> Vec<CommunityId> {
    let mut seen: HashMap<CommunityId, CommunityId> = HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = seen.len() as CommunityId;
            *seen.entry(l).or_insert(next)
        })
        .collect()
}

/// Reads `node_id community_id` lines. Graph nodes missing from the file
/// become singleton communities.
pub fn load_assignment(path: impl AsRef<Path>, g: &SocialGraph) -> Result<CommunityAssignment> {
    let path = path.as_ref();
    let mut labels: Vec<Option<String>> = vec![None; g.node_count()];
    for_each_record(path, |line, tokens| {
        if tokens.len() != 2 {
            return Err(parse_error(
                path,
                line,
                format!("expected `node_id community_id`, found {} fields", tokens.len()),
            ));
        }
        if tokens == ["node_id", "community_id"] {
            return Ok(());
        }
        let v = g
            .internal_id(tokens[0])
            .ok_or_else(|| Error::UnknownNode(tokens[0].to_owned()))?;
        match &labels[v as usize] {
            Some(prev) if prev != tokens[1] => Err(parse_error(
                path,
                line,
                format!("node {} assigned to both {prev} and {}", tokens[0], tokens[1]),
            )),
            _ => {
                labels[v as usize] = Some(tokens[1].to_owned());
                Ok(())
            }
        }
    })?;

    let mut ids: HashMap<String, CommunityId> = HashMap::new();
    let mut raw = Vec::with_capacity(labels.len());
    let mut singletons = 0;
    for l in labels {
        let key = match l {
            Some(s) => s,
            None => {
                singletons += 1;
                // Cannot collide with file labels: those never contain NUL.
                format!("\0singleton{}", raw.len())
            }
        };
        let next = ids.len() as CommunityId;
        raw.push(*ids.entry(key).or_insert(next));
    }
    let mut a = CommunityAssignment::from_labels(g, &raw)?;
    a.singletons_added = singletons;
    if singletons > 0 {
        log::info!("{}: {} nodes unassigned, placed in singleton communities", path.display(), singletons);
    }
    Ok(a)
}

pub fn write_assignment(g: &SocialGraph, a: &CommunityAssignment, path: impl AsRef<Path>) -> Result<()> {
    use std::io::Write;
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "node_id,community_id").map_err(io)?;
    for v in g.nodes() {
        writeln!(w, "{},{}", g.external_id(v), a.community_of(v)).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Newman modularity of `mapping` on the undirected projection:
/// `Q = sum_c [ e_c / m - (deg_c / 2m)^2 ]`.
pub fn modularity(g: &SocialGraph, mapping: &[CommunityId]) -> f64 {
    let m = g.undirected_edge_count();
    if m == 0 {
        return 0.0;
    }
    let dense = relabel(mapping);
    let k = dense.iter().map(|&c| c as usize + 1).max().unwrap_or(0);
    let mut internal = vec![0u64; k];
    let mut degree = vec![0u64; k];
    for v in g.nodes() {
        let c = dense[v as usize] as usize;
        degree[c] += g.degree(v) as u64;
        for &u in g.neighbors(v) {
            if u > v && dense[u as usize] as usize == c {
                internal[c] += 1;
            }
        }
    }
    let m = m as f64;
    internal
        .iter()
        .zip(&degree)
        .map(|(&e, &d)| {
            let frac = d as f64 / (2.0 * m);
            e as f64 / m - frac * frac
        })
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LouvainParams {
    pub starts: usize,
    pub iterations: usize,
}

impl Default for LouvainParams {
    fn default() -> Self {
        LouvainParams {
            starts: 10,
            iterations: 10,
        }
    }
}

/// Best-modularity Louvain partition over `starts` random node orders, each
/// refined for `iterations` rounds that restart from the previous partition.
pub fn louvain(g: &SocialGraph, random_seed: u64, starts: usize, iterations: usize) -> CommunityAssignment {
    let n = g.node_count();
    let base = WeightedGraph::from_social(g);
    let singletons: Vec<CommunityId> = (0..n as CommunityId).collect();
    let singleton_q = modularity(g, &singletons);

    let runs: Vec<(f64, Vec<CommunityId>)> = (0..starts.max(1))
        .into_par_iter()
        .map(|start| {
            let mut rng = ChaCha8Rng::seed_from_u64(random_seed.wrapping_add(start as u64));
            let mut best: Option<(f64, Vec<CommunityId>)> = None;
            let mut current: Option<Vec<usize>> = None;
            for _ in 0..iterations.max(1) {
                let membership = louvain_run(&base, current.as_deref(), &mut rng);
                let labels: Vec<CommunityId> = membership.iter().map(|&c| c as CommunityId).collect();
                let q = modularity(g, &labels);
                if best.as_ref().is_none_or(|(bq, _)| q > *bq) {
                    best = Some((q, labels));
                }
                current = Some(membership);
            }
            best.expect("at least one iteration")
        })
        .collect();

    let (mut best_q, mut best_labels) = (singleton_q, singletons);
    for (q, labels) in runs {
        if q > best_q {
            best_q = q;
            best_labels = labels;
        }
    }
    CommunityAssignment::from_labels(g, &best_labels).expect("labels cover the graph")
}

/// Symmetric weighted graph used across Louvain levels.
struct WeightedGraph {
    adj: Vec<Vec<(usize, f64)>>,
    /// Weight of the self-loop of each node (internal weight of a collapsed community).
    self_loop: Vec<f64>,
}

impl WeightedGraph {
    fn from_social(g: &SocialGraph) -> Self {
        let adj = g
            .nodes()
            .map(|v| g.neighbors(v).iter().map(|&u| (u as usize, 1.0)).collect())
            .collect();
        WeightedGraph {
            adj,
            self_loop: vec![0.0; g.node_count()],
        }
    }

    fn len(&self) -> usize {
        self.adj.len()
    }

    fn strength(&self, v: usize) -> f64 {
        self.adj[v].iter().map(|&(_, w)| w).sum::<f64>() + 2.0 * self.self_loop[v]
    }

    /// Collapses nodes by `community` (dense ids `0..k`).
    fn aggregate(&self, community: &[usize]) -> WeightedGraph {
        let k = community.iter().copied().max().map_or(0, |c| c + 1);
        let mut self_loop = vec![0.0; k];
        let mut maps: Vec<HashMap<usize, f64>> = vec![HashMap::new(); k];
        for v in 0..self.len() {
            let cv = community[v];
            self_loop[cv] += self.self_loop[v];
            for &(u, w) in &self.adj[v] {
                let cu = community[u];
                if cu == cv {
                    // each undirected edge is seen from both ends
                    self_loop[cv] += 0.5 * w;
                } else {
                    *maps[cv].entry(cu).or_insert(0.0) += w;
                }
            }
        }
        let adj = maps
            .into_iter()
            .map(|m| {
                let mut row: Vec<(usize, f64)> = m.into_iter().collect();
                row.sort_unstable_by_key(|&(u, _)| u);
                row
            })
            .collect();
        WeightedGraph { adj, self_loop }
    }
}

/// One multi-level Louvain pass. Returns a dense community id per base node.
fn louvain_run(base: &WeightedGraph, init: Option<&[usize]>, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut membership: Vec<usize> = match init {
        Some(p) => dense_usize(p),
        None => (0..base.len()).collect(),
    };
    let mut graph = match init {
        Some(_) => base.aggregate(&membership),
        None => base.aggregate(&(0..base.len()).collect::<Vec<_>>()),
    };
    loop {
        let (local, moved) = local_moving(&graph, rng);
        if !moved {
            break;
        }
        let local = dense_usize(&local);
        for c in membership.iter_mut() {
            *c = local[*c];
        }
        graph = graph.aggregate(&local);
    }
    membership
}

fn dense_usize(labels: &[usize]) -> Vec<usize> {
    let mut seen: HashMap<usize, usize> = HashMap::new();
    labels
        .iter()
        .map(|&l| {
            let next = seen.len();
            *seen.entry(l).or_insert(next)
        })
        .collect()
}

/// Greedy node moves until no move improves modularity.
fn local_moving(g: &WeightedGraph, rng: &mut ChaCha8Rng) -> (Vec<usize>, bool) {
    let n = g.len();
    let strength: Vec<f64> = (0..n).map(|v| g.strength(v)).collect();
    let two_m: f64 = strength.iter().sum();
    let mut community: Vec<usize> = (0..n).collect();
    if two_m == 0.0 {
        return (community, false);
    }
    let mut total: Vec<f64> = strength.clone();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);

    let mut link: Vec<f64> = vec![0.0; n];
    let mut touched: Vec<usize> = Vec::new();
    let mut any_move = false;
    loop {
        let mut moved = false;
        for &v in &order {
            let cv = community[v];
            let kv = strength[v];
            touched.clear();
            for &(u, w) in &g.adj[v] {
                let cu = community[u];
                if link[cu] == 0.0 {
                    touched.push(cu);
                }
                link[cu] += w;
            }
            total[cv] -= kv;
            let gain = |c: usize, l: f64| l - total[c] * kv / two_m;
            let mut best_c = cv;
            let mut best_gain = gain(cv, link[cv]);
            for &c in &touched {
                let gc = gain(c, link[c]);
                if gc > best_gain + 1e-12 {
                    best_gain = gc;
                    best_c = c;
                }
            }
            total[best_c] += kv;
            for &c in &touched {
                link[c] = 0.0;
            }
            link[cv] = 0.0;
            if best_c != cv {
                community[v] = best_c;
                moved = true;
                any_move = true;
            }
        }
        if !moved {
            break;
        }
    }
    (community, any_move)
}
