//! Immutable follower graph.
//!
//! An arc `u -> v` means `u` is followed by `v`: information posted by `u`
//! reaches `v`. Nodes get dense ids `0..n` in first-seen order; the
//! external token of every node is kept for output.
//!
//! Three compressed adjacency layouts are materialized at build time:
//! out-arcs (followers), in-arcs (followees) and the undirected projection
//! (their sorted union), which is what k-shell, eigenvector centrality,
//! Louvain and the path-length features walk.

use std::collections::HashMap;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{for_each_record, parse_error};

pub type NodeId = u32;

/// Counters collected while building a graph.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadStats {
    pub input_edges: usize,
    pub self_loops: usize,
    pub duplicates: usize,
}

#[derive(Debug, Clone, PartialEq)]
struct Csr {
    offsets: Vec<usize>,
    targets: Vec<NodeId>,
}

impl Csr {
    /// `arcs` must be sorted by `(src, dst)` and deduplicated.
    fn from_sorted(n: usize, arcs: &[(NodeId, NodeId)]) -> Self {
        let mut offsets = vec![0usize; n + 1];
        for &(s, _) in arcs {
            offsets[s as usize + 1] += 1;
        }
        for i in 0..n {
            offsets[i + 1] += offsets[i];
        }
        let targets = arcs.iter().map(|&(_, d)| d).collect();
        Csr { offsets, targets }
    }

    #[inline]
    fn row(&self, v: NodeId) -> &[NodeId] {
        let v = v as usize;
        &self.targets[self.offsets[v]..self.offsets[v + 1]]
    }
}

#[derive(Debug, Clone)]
pub struct SocialGraph {
    directed: bool,
    edge_count: usize,
    out: Csr,
    inc: Csr,
    und: Csr,
    external_ids: Vec<String>,
    index: HashMap<String, NodeId>,
    stats: LoadStats,
}

impl PartialEq for SocialGraph {
    fn eq(&self, other: &Self) -> bool {
        self.directed == other.directed
            && self.edge_count == other.edge_count
            && self.out == other.out
            && self.inc == other.inc
            && self.external_ids == other.external_ids
    }
}

/// Accumulates edges between external tokens and assigns dense ids.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    directed: bool,
    external_ids: Vec<String>,
    index: HashMap<String, NodeId>,
    edges: Vec<(NodeId, NodeId)>,
}

impl GraphBuilder {
    pub fn new(directed: bool) -> Self {
        GraphBuilder {
            directed,
            ..Default::default()
        }
    }

    /// Registers a node without edges. Returns its dense id.
    pub fn add_node(&mut self, token: &str) -> NodeId {
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = NodeId::try_from(self.external_ids.len()).expect("more than u32::MAX nodes");
        self.external_ids.push(token.to_owned());
        self.index.insert(token.to_owned(), id);
        id
    }

    pub fn add_edge(&mut self, src: &str, dst: &str) {
        let s = self.add_node(src);
        let d = self.add_node(dst);
        self.edges.push((s, d));
    }

    pub fn build(self) -> SocialGraph {
        SocialGraph::assemble(self.external_ids, self.index, self.edges, self.directed)
    }
}

impl SocialGraph {
    /// Builds a graph over nodes `0..n` whose external ids are their decimal indices.
    pub fn from_edges(n: usize, edges: &[(NodeId, NodeId)], directed: bool) -> Self {
        let external_ids: Vec<String> = (0..n).map(|i| i.to_string()).collect();
        let index = external_ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as NodeId))
            .collect();
        assert!(
            edges.iter().all(|&(a, b)| (a as usize) < n && (b as usize) < n),
            "edge endpoint out of range"
        );
        Self::assemble(external_ids, index, edges.to_vec(), directed)
    }

    fn assemble(
        external_ids: Vec<String>,
        index: HashMap<String, NodeId>,
        edges: Vec<(NodeId, NodeId)>,
        directed: bool,
    ) -> Self {
        let n = external_ids.len();
        let mut stats = LoadStats {
            input_edges: edges.len(),
            ..Default::default()
        };
        let mut arcs: Vec<(NodeId, NodeId)> = Vec::with_capacity(if directed {
            edges.len()
        } else {
            2 * edges.len()
        });
        for (s, d) in edges {
            if s == d {
                stats.self_loops += 1;
                continue;
            }
            arcs.push((s, d));
            if !directed {
                arcs.push((d, s));
            }
        }
        let before = arcs.len();
        arcs.sort_unstable();
        arcs.dedup();
        let arc_count = arcs.len();
        // In undirected mode every collapsed edge removes two arcs.
        stats.duplicates = if directed {
            before - arc_count
        } else {
            (before - arc_count) / 2
        };
        let edge_count = if directed { arc_count } else { arc_count / 2 };

        let out = Csr::from_sorted(n, &arcs);
        let mut rev: Vec<(NodeId, NodeId)> = arcs.iter().map(|&(s, d)| (d, s)).collect();
        drop(arcs);
        rev.sort_unstable();
        let inc = Csr::from_sorted(n, &rev);
        drop(rev);

        let und = if directed {
            let mut offsets = Vec::with_capacity(n + 1);
            let mut targets = Vec::with_capacity(out.targets.len());
            offsets.push(0);
            for v in 0..n as NodeId {
                merge_sorted_unique(out.row(v), inc.row(v), &mut targets);
                offsets.push(targets.len());
            }
            targets.shrink_to_fit();
            Csr { offsets, targets }
        } else {
            out.clone()
        };

        SocialGraph {
            directed,
            edge_count,
            out,
            inc,
            und,
            external_ids,
            index,
            stats,
        }
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    pub fn node_count(&self) -> usize {
        self.external_ids.len()
    }

    /// Directed inputs: number of distinct arcs. Undirected inputs: number of
    /// distinct unordered edges.
    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Number of stored directed arcs (twice the edge count for undirected inputs).
    pub fn arc_count(&self) -> usize {
        self.out.targets.len()
    }

    /// Number of distinct unordered adjacent pairs in the undirected projection.
    pub fn undirected_edge_count(&self) -> usize {
        self.und.targets.len() / 2
    }

    pub fn load_stats(&self) -> &LoadStats {
        &self.stats
    }

    fn check(&self, v: NodeId) -> Result<()> {
        if (v as usize) < self.node_count() {
            Ok(())
        } else {
            Err(Error::UnknownNode(v.to_string()))
        }
    }

    /// Followers of `v`, sorted and distinct.
    pub fn out_neighbors(&self, v: NodeId) -> Result<&[NodeId]> {
        self.check(v)?;
        Ok(self.out.row(v))
    }

    /// Nodes that `v` follows, sorted and distinct.
    pub fn in_neighbors(&self, v: NodeId) -> Result<&[NodeId]> {
        self.check(v)?;
        Ok(self.inc.row(v))
    }

    pub fn out_degree(&self, v: NodeId) -> Result<usize> {
        Ok(self.out_neighbors(v)?.len())
    }

    pub fn in_degree(&self, v: NodeId) -> Result<usize> {
        Ok(self.in_neighbors(v)?.len())
    }

    // Unchecked accessors for hot loops; they panic on ids outside `0..n`.

    #[inline]
    pub fn followers(&self, v: NodeId) -> &[NodeId] {
        self.out.row(v)
    }

    #[inline]
    pub fn followees(&self, v: NodeId) -> &[NodeId] {
        self.inc.row(v)
    }

    /// Neighbors in the undirected projection.
    #[inline]
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        self.und.row(v)
    }

    #[inline]
    pub fn degree(&self, v: NodeId) -> usize {
        self.und.row(v).len()
    }

    pub fn external_id(&self, v: NodeId) -> &str {
        &self.external_ids[v as usize]
    }

    pub fn internal_id(&self, token: &str) -> Option<NodeId> {
        self.index.get(token).copied()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        0..self.node_count() as NodeId
    }

    /// All stored arcs in `(src, dst)` order.
    pub fn arcs(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.nodes()
            .flat_map(move |u| self.followers(u).iter().map(move |&v| (u, v)))
    }
}

fn merge_sorted_unique(a: &[NodeId], b: &[NodeId], out: &mut Vec<NodeId>) {
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}

/// Reads an edge list: one `src dst` pair per line, separated by whitespace
/// or a comma; `#` lines are comments.
pub fn load_edge_list(path: impl AsRef<Path>, directed: bool) -> Result<SocialGraph> {
    let path = path.as_ref();
    let mut builder = GraphBuilder::new(directed);
    for_each_record(path, |line, tokens| {
        if tokens.len() != 2 {
            return Err(parse_error(
                path,
                line,
                format!("expected `src dst`, found {} fields", tokens.len()),
            ));
        }
        builder.add_edge(tokens[0], tokens[1]);
        Ok(())
    })?;
    if builder.edges.is_empty() {
        return Err(Error::EmptyGraph(path.to_path_buf()));
    }
    let g = builder.build();
    log::debug!(
        "loaded {}: {} nodes, {} edges, {:?}",
        path.display(),
        g.node_count(),
        g.edge_count(),
        g.load_stats()
    );
    Ok(g)
}

/// Writes the graph as an edge list that [`load_edge_list`] reads back.
/// Undirected graphs emit each edge once.
pub fn write_edge_list(g: &SocialGraph, path: impl AsRef<Path>) -> Result<()> {
    use std::io::Write;
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    for (u, v) in g.arcs() {
        if !g.is_directed() && u > v {
            continue;
        }
        writeln!(w, "{} {}", g.external_id(u), g.external_id(v)).map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
