//! Early-stage feature vectors.
//!
//! Method A: community diversity of adopters, frontiers and non-adopters
//! plus the mean adoption time. Method B: surface sizes, path-length
//! statistics, the same community block and step-time statistics.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cascade::{EarlyStage, FrontierSplit, SurfaceSet};
use crate::community::{CommunityAssignment, CommunityId};
use crate::error::{Error, Result};
use crate::graph::{NodeId, SocialGraph};
use crate::stats::{coefficient_of_variation, mean};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FeatureMethod {
    A,
    B,
}

impl FeatureMethod {
    pub fn names(self) -> &'static [&'static str] {
        match self {
            FeatureMethod::A => &METHOD_A_NAMES,
            FeatureMethod::B => &METHOD_B_NAMES,
        }
    }
}

impl fmt::Display for FeatureMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureMethod::A => f.write_str("A"),
            FeatureMethod::B => f.write_str("B"),
        }
    }
}

impl FromStr for FeatureMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A" | "a" => Ok(FeatureMethod::A),
            "B" | "b" => Ok(FeatureMethod::B),
            _ => Err(Error::invalid(format!("unknown feature method `{s}`"))),
        }
    }
}

const COMMUNITY_BLOCK: [&str; 12] = [
    "adopters_communities",
    "adopters_entropy",
    "adopters_gini",
    "frontiers_communities",
    "frontiers_entropy",
    "frontiers_gini",
    "non_adopters_communities",
    "non_adopters_entropy",
    "non_adopters_gini",
    "shared_adopters_frontiers",
    "shared_adopters_non_adopters",
    "shared_frontiers_non_adopters",
];

pub const METHOD_A_NAMES: [&str; 13] = [
    COMMUNITY_BLOCK[0],
    COMMUNITY_BLOCK[1],
    COMMUNITY_BLOCK[2],
    COMMUNITY_BLOCK[3],
    COMMUNITY_BLOCK[4],
    COMMUNITY_BLOCK[5],
    COMMUNITY_BLOCK[6],
    COMMUNITY_BLOCK[7],
    COMMUNITY_BLOCK[8],
    COMMUNITY_BLOCK[9],
    COMMUNITY_BLOCK[10],
    COMMUNITY_BLOCK[11],
    "mean_adoption_time",
];

pub const METHOD_B_NAMES: [&str; 19] = [
    "first_surface_size",
    "second_surface_size",
    "mean_step_distance",
    "cv_step_distance",
    "diameter",
    COMMUNITY_BLOCK[0],
    COMMUNITY_BLOCK[1],
    COMMUNITY_BLOCK[2],
    COMMUNITY_BLOCK[3],
    COMMUNITY_BLOCK[4],
    COMMUNITY_BLOCK[5],
    COMMUNITY_BLOCK[6],
    COMMUNITY_BLOCK[7],
    COMMUNITY_BLOCK[8],
    COMMUNITY_BLOCK[9],
    COMMUNITY_BLOCK[10],
    COMMUNITY_BLOCK[11],
    "mean_step_time",
    "cv_step_time",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub cascade_id: String,
    pub method: FeatureMethod,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn names(&self) -> &'static [&'static str] {
        self.method.names()
    }
}

/// How a node set spreads over communities.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CommunityStats {
    pub count: usize,
    /// Natural-log Shannon entropy of the community shares.
    pub entropy: f64,
    /// Gini impurity `1 - sum p_c^2`.
    pub gini: f64,
}

pub fn community_features(nodes: &[NodeId], assignment: &CommunityAssignment) -> CommunityStats {
    if nodes.is_empty() {
        return CommunityStats::default();
    }
    let mut hist: HashMap<CommunityId, usize> = HashMap::new();
    for &v in nodes {
        *hist.entry(assignment.community_of(v)).or_insert(0) += 1;
    }
    let mut counts: Vec<(CommunityId, usize)> = hist.into_iter().collect();
    counts.sort_unstable();
    let total = nodes.len() as f64;
    let mut entropy = 0.0;
    let mut sq = 0.0;
    for &(_, c) in &counts {
        let p = c as f64 / total;
        entropy -= p * p.ln();
        sq += p * p;
    }
    CommunityStats {
        count: counts.len(),
        entropy: entropy.max(0.0),
        gini: (1.0 - sq).max(0.0),
    }
}

/// Number of communities touched by both node sets.
pub fn shared_communities(a: &[NodeId], b: &[NodeId], assignment: &CommunityAssignment) -> usize {
    let ca: HashSet<CommunityId> = a.iter().map(|&v| assignment.community_of(v)).collect();
    let cb: HashSet<CommunityId> = b.iter().map(|&v| assignment.community_of(v)).collect();
    ca.intersection(&cb).count()
}

/// Reusable BFS state sized to the graph.
pub struct BfsScratch {
    stamp: Vec<u32>,
    dist: Vec<u32>,
    epoch: u32,
    queue: VecDeque<NodeId>,
}

impl BfsScratch {
    pub fn new(n: usize) -> Self {
        BfsScratch {
            stamp: vec![0; n],
            dist: vec![0; n],
            epoch: 0,
            queue: VecDeque::new(),
        }
    }

    fn next_epoch(&mut self) {
        self.epoch = self.epoch.wrapping_add(1);
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
        self.queue.clear();
    }

    /// Undirected hop distance from `src` to `dst`, or `None` beyond `cap` hops.
    pub fn distance(&mut self, g: &SocialGraph, src: NodeId, dst: NodeId, cap: u32) -> Option<u32> {
        if src == dst {
            return Some(0);
        }
        self.next_epoch();
        let e = self.epoch;
        self.stamp[src as usize] = e;
        self.dist[src as usize] = 0;
        self.queue.push_back(src);
        while let Some(v) = self.queue.pop_front() {
            let d = self.dist[v as usize];
            if d >= cap {
                break;
            }
            for &u in g.neighbors(v) {
                if self.stamp[u as usize] == e {
                    continue;
                }
                if u == dst {
                    return Some(d + 1);
                }
                self.stamp[u as usize] = e;
                self.dist[u as usize] = d + 1;
                self.queue.push_back(u);
            }
        }
        None
    }
}

/// Hop distances between consecutive early adopters on the undirected
/// projection. Pairs farther than `cap` hops, disconnected, or involving a
/// node missing from the graph get `cap + 1`.
pub fn step_distances(es: &EarlyStage, g: &SocialGraph, cap: u32) -> Vec<f64> {
    let mut scratch = BfsScratch::new(g.node_count());
    step_distances_with(es, g, cap, &mut scratch)
}

pub fn step_distances_with(
    es: &EarlyStage,
    g: &SocialGraph,
    cap: u32,
    scratch: &mut BfsScratch,
) -> Vec<f64> {
    let cap = cap.max(1);
    let ids = es.resolve(g);
    ids.windows(2)
        .map(|w| match (w[0], w[1]) {
            (Some(a), Some(b)) => scratch.distance(g, a, b, cap).unwrap_or(cap + 1) as f64,
            _ => (cap + 1) as f64,
        })
        .collect()
}

/// Longest finite shortest path within the subgraph induced by the early
/// adopters (undirected). 0 when the induced subgraph has no edges.
pub fn cascade_diameter(es: &EarlyStage, g: &SocialGraph) -> usize {
    let nodes: Vec<NodeId> = {
        let mut v: Vec<NodeId> = es.resolve(g).into_iter().flatten().collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let local: HashMap<NodeId, usize> = nodes.iter().enumerate().map(|(i, &v)| (v, i)).collect();
    let adj: Vec<Vec<usize>> = nodes
        .iter()
        .map(|&v| {
            g.neighbors(v)
                .iter()
                .filter_map(|u| local.get(u).copied())
                .collect()
        })
        .collect();
    let k = nodes.len();
    let mut best = 0;
    let mut dist = vec![usize::MAX; k];
    let mut queue = VecDeque::new();
    for s in 0..k {
        dist.iter_mut().for_each(|d| *d = usize::MAX);
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            best = best.max(dist[v]);
            for &u in &adj[v] {
                if dist[u] == usize::MAX {
                    dist[u] = dist[v] + 1;
                    queue.push_back(u);
                }
            }
        }
    }
    best
}

fn community_block(s: &SurfaceSet, fs: &FrontierSplit, assignment: &CommunityAssignment) -> [f64; 12] {
    let groups = [&s.adopters, &fs.frontiers, &fs.non_adopters];
    let mut out = [0.0; 12];
    for (i, grp) in groups.iter().enumerate() {
        let st = community_features(grp, assignment);
        out[3 * i] = st.count as f64;
        out[3 * i + 1] = st.entropy;
        out[3 * i + 2] = st.gini;
    }
    out[9] = shared_communities(&s.adopters, &fs.frontiers, assignment) as f64;
    out[10] = shared_communities(&s.adopters, &fs.non_adopters, assignment) as f64;
    out[11] = shared_communities(&fs.frontiers, &fs.non_adopters, assignment) as f64;
    out
}

pub fn features_a(
    es: &EarlyStage,
    s: &SurfaceSet,
    fs: &FrontierSplit,
    assignment: &CommunityAssignment,
) -> FeatureVector {
    let mut values = community_block(s, fs, assignment).to_vec();
    let times: Vec<f64> = es.times().collect();
    values.push(mean(&times));
    FeatureVector {
        cascade_id: es.cascade_id.clone(),
        method: FeatureMethod::A,
        values,
    }
}

pub fn features_b(
    es: &EarlyStage,
    s: &SurfaceSet,
    fs: &FrontierSplit,
    assignment: &CommunityAssignment,
    g: &SocialGraph,
    cap: u32,
) -> FeatureVector {
    let mut scratch = BfsScratch::new(g.node_count());
    features_b_with(es, s, fs, assignment, g, cap, &mut scratch)
}

pub fn features_b_with(
    es: &EarlyStage,
    s: &SurfaceSet,
    fs: &FrontierSplit,
    assignment: &CommunityAssignment,
    g: &SocialGraph,
    cap: u32,
    scratch: &mut BfsScratch,
) -> FeatureVector {
    let steps = step_distances_with(es, g, cap, scratch);
    let gaps = es.gaps();
    let mut values = Vec::with_capacity(METHOD_B_NAMES.len());
    values.push(s.first_surface.len() as f64);
    values.push(s.second_surface.len() as f64);
    values.push(mean(&steps));
    values.push(coefficient_of_variation(&steps));
    values.push(cascade_diameter(es, g) as f64);
    values.extend_from_slice(&community_block(s, fs, assignment));
    values.push(mean(&gaps));
    values.push(coefficient_of_variation(&gaps));
    FeatureVector {
        cascade_id: es.cascade_id.clone(),
        method: FeatureMethod::B,
        values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::{early_stage, frontier_split, surfaces, Adoption, Cascade};

    fn assignment(g: &SocialGraph, labels: &[u32]) -> CommunityAssignment {
        CommunityAssignment::from_labels(g, labels).unwrap()
    }

    #[test]
    fn one_community_has_no_diversity() {
        let g = SocialGraph::from_edges(10, &[], true);
        let a = assignment(&g, &[0; 10]);
        let nodes: Vec<NodeId> = (0..10).collect();
        let st = community_features(&nodes, &a);
        assert_eq!(st.count, 1);
        assert_eq!(st.entropy, 0.0);
        assert_eq!(st.gini, 0.0);
    }

    #[test]
    fn even_split_entropy() {
        let g = SocialGraph::from_edges(10, &[], true);
        let labels: Vec<u32> = (0..10).map(|i| (i / 5) as u32).collect();
        let a = assignment(&g, &labels);
        let nodes: Vec<NodeId> = (0..10).collect();
        let st = community_features(&nodes, &a);
        assert_eq!(st.count, 2);
        assert!((st.entropy - 2f64.ln()).abs() < 1e-15);
        assert!((st.gini - 0.5).abs() < 1e-15);
        assert_eq!(community_features(&[], &a), CommunityStats::default());
    }

    #[test]
    fn shared_counts() {
        let g = SocialGraph::from_edges(4, &[], true);
        let a = assignment(&g, &[0, 0, 1, 1]);
        assert_eq!(shared_communities(&[0, 1], &[2, 3], &a), 0);
        assert_eq!(shared_communities(&[0, 2], &[0, 2], &a), 2);
        assert_eq!(shared_communities(&[], &[0], &a), 0);
    }

    fn stage(nodes: &[&str], times: &[f64]) -> EarlyStage {
        let c = Cascade::new(
            "t",
            nodes.iter().zip(times).map(|(n, &t)| Adoption::new(*n, t)).collect(),
        );
        early_stage(&c, nodes.len()).unwrap()
    }

    #[test]
    fn neighbors_are_one_step_apart() {
        let g = SocialGraph::from_edges(3, &[(0, 1), (2, 1)], true);
        let es = stage(&["0", "1", "2"], &[0.0, 1.0, 2.0]);
        assert_eq!(step_distances(&es, &g, 5), vec![1.0, 1.0]);
    }

    #[test]
    fn disconnected_pairs_get_sentinel() {
        let g = SocialGraph::from_edges(4, &[(0, 1), (2, 3)], true);
        let es = stage(&["0", "2", "ghost"], &[0.0, 1.0, 2.0]);
        assert_eq!(step_distances(&es, &g, 5), vec![6.0, 6.0]);
        // beyond the cap
        let path: Vec<(NodeId, NodeId)> = (0..9).map(|i| (i, i + 1)).collect();
        let g = SocialGraph::from_edges(10, &path, true);
        let es = stage(&["0", "9"], &[0.0, 1.0]);
        assert_eq!(step_distances(&es, &g, 5), vec![6.0]);
        assert_eq!(step_distances(&es, &g, 9), vec![9.0]);
    }

    #[test]
    fn diameter_of_induced_path() {
        let g = SocialGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (3, 0)], true);
        let es = stage(&["0", "1", "2"], &[0.0, 1.0, 2.0]);
        assert_eq!(cascade_diameter(&es, &g), 2);
        let g = SocialGraph::from_edges(3, &[], true);
        assert_eq!(cascade_diameter(&es, &g), 0);
    }

    #[test]
    fn method_a_degenerate_groups() {
        // 0 -> 1, 0 -> 2: both followers exposed at t=0; observation at t=10.
        let g = SocialGraph::from_edges(4, &[(0, 1), (0, 2), (3, 0)], true);
        let a = assignment(&g, &[0; 4]);
        let es = stage(&["0", "3"], &[0.0, 10.0]);
        let s = surfaces(&es, &g);
        let fs = frontier_split(&s, es.t_obs, f64::INFINITY).unwrap();
        let f = features_a(&es, &s, &fs, &a);
        assert_eq!(f.values.len(), 13);
        assert_eq!(&f.values[0..6], &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]);
        assert_eq!(&f.values[6..9], &[0.0, 0.0, 0.0]);
        assert_eq!(&f.values[9..12], &[1.0, 0.0, 0.0]);
        assert_eq!(f.values[12], 5.0);
    }

    #[test]
    fn method_b_constant_gaps_and_isolated_adopters() {
        let g = SocialGraph::from_edges(3, &[], true);
        let a = assignment(&g, &[0, 1, 2]);
        let es = stage(&["0", "1", "2"], &[0.0, 3.0, 6.0]);
        let s = surfaces(&es, &g);
        let fs = frontier_split(&s, es.t_obs, 3.0).unwrap();
        let f = features_b(&es, &s, &fs, &a, &g, 5);
        assert_eq!(f.values.len(), 19);
        assert_eq!(f.values[0], 0.0);
        assert_eq!(f.values[1], 0.0);
        assert_eq!(f.values[2], 6.0);
        assert_eq!(f.values[3], 0.0);
        assert_eq!(f.values[4], 0.0);
        assert_eq!(f.values[17], 3.0);
        assert_eq!(f.values[18], 0.0);
        assert!(f.values.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn names_match_lengths() {
        assert_eq!(FeatureMethod::A.names().len(), 13);
        assert_eq!(FeatureMethod::B.names().len(), 19);
        let unique: HashSet<_> = METHOD_B_NAMES.iter().collect();
        assert_eq!(unique.len(), 19);
    }
}
