//! Synthetic graphs and cascades with known generating parameters.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{Adoption, Cascade};
use crate::error::{Error, Result};
use crate::graph::{NodeId, SocialGraph};
use crate::pointprocess::{kernel_from_theta, relaxation_density, ReactionKernel};

/// Preferential-attachment follower graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphConfig {
    pub nodes: usize,
    /// Accounts each newcomer follows.
    pub attachment: usize,
    /// Probability that a followed account follows back.
    pub reciprocity: f64,
}

impl Default for GraphConfig {
    fn default() -> Self {
        GraphConfig {
            nodes: 10_000,
            attachment: 3,
            reciprocity: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum CascadeModel {
    SeismicGen {
        p: f64,
        theta: f64,
        s0: f64,
        horizon: f64,
    },
    RppGen {
        alpha: f64,
        mu: f64,
        sigma: f64,
        n_events: usize,
        horizon: f64,
    },
    IndependentCascade {
        edge_prob: f64,
        theta: f64,
        s0: f64,
        min_size: usize,
        max_size: usize,
        horizon: f64,
    },
}

impl Default for CascadeModel {
    fn default() -> Self {
        CascadeModel::IndependentCascade {
            edge_prob: 0.3,
            theta: 0.44,
            s0: 300.0,
            min_size: 60,
            max_size: 5_000,
            horizon: 1e7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub graph: GraphConfig,
    pub cascade_model: CascadeModel,
    pub cascade_count: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            graph: GraphConfig::default(),
            cascade_model: CascadeModel::default(),
            cascade_count: 1_000,
            seed: 0,
        }
    }
}

/// Each newcomer follows `attachment` distinct earlier accounts chosen with
/// probability proportional to follower count plus one. Following `u`
/// creates the arc `u -> v`.
pub fn generate_graph(cfg: &GraphConfig, seed: u64) -> Result<SocialGraph> {
    if cfg.nodes < 2 {
        return Err(Error::invalid(format!("need at least 2 nodes, got {}", cfg.nodes)));
    }
    if cfg.attachment == 0 {
        return Err(Error::invalid("attachment must be at least 1"));
    }
    if !(0.0..=1.0).contains(&cfg.reciprocity) {
        return Err(Error::invalid(format!("reciprocity {} outside [0, 1]", cfg.reciprocity)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Node u appears (followers(u) + 1) times.
    let mut urn: Vec<NodeId> = vec![0];
    let mut edges: Vec<(NodeId, NodeId)> = Vec::with_capacity(cfg.nodes * cfg.attachment);
    let mut picked: Vec<NodeId> = Vec::with_capacity(cfg.attachment);
    for v in 1..cfg.nodes as NodeId {
        picked.clear();
        let want = cfg.attachment.min(v as usize);
        while picked.len() < want {
            let u = urn[rng.gen_range(0..urn.len())];
            if !picked.contains(&u) {
                picked.push(u);
            }
        }
        for &u in &picked {
            edges.push((u, v));
            urn.push(u);
            if cfg.reciprocity > 0.0 && rng.gen_bool(cfg.reciprocity) {
                edges.push((v, u));
                urn.push(v);
            }
        }
        urn.push(v);
    }
    Ok(SocialGraph::from_edges(cfg.nodes, &edges, true))
}

/// Cascade with the index of each event's triggering event.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedCascade {
    pub cascade: Cascade,
    /// `None` for the root.
    pub parents: Vec<Option<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeismicSimConfig {
    pub root: NodeId,
    pub p: f64,
    pub kernel: ReactionKernel,
    pub horizon: f64,
    pub max_events: usize,
}

pub const DEFAULT_MAX_EVENTS: usize = 100_000;

fn pick_unadopted(
    rng: &mut ChaCha8Rng,
    candidates: &[NodeId],
    adopted: &HashSet<NodeId>,
    n_nodes: usize,
) -> Option<NodeId> {
    let open: Vec<NodeId> = candidates.iter().copied().filter(|v| !adopted.contains(v)).collect();
    if !open.is_empty() {
        return Some(open[rng.gen_range(0..open.len())]);
    }
    if adopted.len() >= n_nodes {
        return None;
    }
    loop {
        let v = rng.gen_range(0..n_nodes) as NodeId;
        if !adopted.contains(&v) {
            return Some(v);
        }
    }
}

/// Thinning simulation of `λ(t) = p Σ n_i φ(t - t_i)` with `n_i` the
/// follower count of the i-th adopter. Each accepted event is attributed to
/// a parent in proportion to its intensity term; the adopter is an
/// un-adopted follower of the parent (any un-adopted node otherwise).
pub fn simulate_seismic(g: &SocialGraph, cfg: &SeismicSimConfig, seed: u64) -> Result<SimulatedCascade> {
    if !(cfg.p >= 0.0 && cfg.p.is_finite()) {
        return Err(Error::invalid(format!("infectiousness must be non-negative, got {}", cfg.p)));
    }
    if (cfg.root as usize) >= g.node_count() {
        return Err(Error::UnknownNode(cfg.root.to_string()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_nodes = g.node_count();
    let mut adopted: HashSet<NodeId> = HashSet::from([cfg.root]);
    let mut nodes = vec![cfg.root];
    let mut times = vec![0.0];
    let mut marks = vec![g.followers(cfg.root).len() as f64];
    let mut parents = vec![None];
    let k = cfg.kernel;
    let intensity = |t: f64, times: &[f64], marks: &[f64]| -> f64 {
        cfg.p * times.iter().zip(marks).map(|(&ti, &n)| n * k.density(t - ti)).sum::<f64>()
    };

    let mut t = 0.0;
    let mut terms = Vec::new();
    loop {
        // The kernel is non-increasing, so the intensity at the left end
        // bounds it until the next accepted event.
        let bound = intensity(t, &times, &marks);
        if !(bound > 0.0) {
            break;
        }
        t += exponential(&mut rng, bound);
        if t > cfg.horizon {
            break;
        }
        let lam = intensity(t, &times, &marks);
        if rng.gen::<f64>() * bound > lam {
            continue;
        }
        if nodes.len() >= cfg.max_events {
            return Err(Error::Supercritical(cfg.max_events));
        }
        terms.clear();
        terms.extend(times.iter().zip(&marks).map(|(&ti, &n)| n * k.density(t - ti)));
        let mut u = rng.gen::<f64>() * terms.iter().sum::<f64>();
        let mut parent = terms.len() - 1;
        for (i, w) in terms.iter().enumerate() {
            if u < *w {
                parent = i;
                break;
            }
            u -= w;
        }
        let Some(v) = pick_unadopted(&mut rng, g.followers(nodes[parent]), &adopted, n_nodes) else {
            break;
        };
        adopted.insert(v);
        nodes.push(v);
        times.push(t);
        marks.push(g.followers(v).len() as f64);
        parents.push(Some(parent));
    }
    let events = nodes
        .iter()
        .zip(&times)
        .map(|(&v, &t)| Adoption::new(g.external_id(v), t))
        .collect();
    Ok(SimulatedCascade {
        cascade: Cascade::new(format!("seismic-{seed}"), events),
        parents,
    })
}

/// Exponential waiting time with the given rate.
fn exponential(rng: &mut ChaCha8Rng, rate: f64) -> f64 {
    -(-rng.gen::<f64>()).ln_1p() / rate
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RppSimConfig {
    pub alpha: f64,
    pub mu: f64,
    pub sigma: f64,
    /// Total adoptions including the root.
    pub n_events: usize,
    pub horizon: f64,
}

/// Thinning simulation of `λ(t) = α f(t; μ, σ) N(t)` with `N(0) = 1`.
/// Stops at `n_events` adoptions or at the horizon.
pub fn simulate_rpp(alpha: f64, mu: f64, sigma: f64, n_events: usize, seed: u64) -> Result<Cascade> {
    simulate_rpp_with(
        &RppSimConfig {
            alpha,
            mu,
            sigma,
            n_events,
            horizon: f64::INFINITY,
        },
        seed,
    )
}

pub fn simulate_rpp_with(cfg: &RppSimConfig, seed: u64) -> Result<Cascade> {
    if !(cfg.alpha >= 0.0 && cfg.sigma > 0.0 && cfg.mu.is_finite()) {
        return Err(Error::invalid(format!(
            "RPP simulation needs alpha >= 0 and sigma > 0, got alpha={}, sigma={}",
            cfg.alpha, cfg.sigma
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mode = (cfg.mu - cfg.sigma * cfg.sigma).exp();
    let peak = relaxation_density(mode, cfg.mu, cfg.sigma);
    let mut times = vec![0.0];
    let mut t = 0.0;
    while times.len() < cfg.n_events.max(1) {
        let count = times.len() as f64;
        // The density rises to its mode and decays after it.
        let f_bound = if t < mode { peak } else { relaxation_density(t, cfg.mu, cfg.sigma) };
        let bound = cfg.alpha * f_bound * count;
        if !(bound > 0.0) {
            break;
        }
        t += exponential(&mut rng, bound);
        if !(t <= cfg.horizon) {
            break;
        }
        let lam = cfg.alpha * relaxation_density(t, cfg.mu, cfg.sigma) * count;
        if rng.gen::<f64>() * bound <= lam {
            times.push(t);
        }
    }
    let events = times
        .iter()
        .enumerate()
        .map(|(i, &t)| Adoption::new(i.to_string(), t))
        .collect();
    Ok(Cascade::new(format!("rpp-{seed}"), events))
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Pending {
    time: f64,
    node: NodeId,
}

impl Eq for Pending {}

impl Ord for Pending {
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.node.cmp(&self.node))
    }
}

impl PartialOrd for Pending {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Continuous-time independent cascade: every new adopter infects each
/// follower with probability `edge_prob` after a delay drawn from the
/// reaction kernel. Stops at the horizon or at `max_size` adopters.
pub fn simulate_independent_cascade(
    g: &SocialGraph,
    root: NodeId,
    edge_prob: f64,
    kernel: &ReactionKernel,
    horizon: f64,
    max_size: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(NodeId, f64)> {
    let mut adopted: HashSet<NodeId> = HashSet::new();
    let mut out = Vec::new();
    let mut heap = BinaryHeap::from([Pending { time: 0.0, node: root }]);
    while let Some(Pending { time, node }) = heap.pop() {
        if time > horizon || out.len() >= max_size {
            break;
        }
        if !adopted.insert(node) {
            continue;
        }
        out.push((node, time));
        for &w in g.followers(node) {
            if !adopted.contains(&w) && rng.gen_bool(edge_prob) {
                heap.push(Pending {
                    time: time + kernel.quantile(rng.gen()),
                    node: w,
                });
            }
        }
    }
    out
}

/// Picks a node with probability proportional to its follower count.
fn degree_weighted_root(g: &SocialGraph, cumulative: &[u64], rng: &mut ChaCha8Rng) -> NodeId {
    let total = *cumulative.last().expect("graph has arcs");
    let x = rng.gen_range(0..total);
    let v = cumulative.partition_point(|&c| c <= x);
    debug_assert!(!g.followers(v as NodeId).is_empty());
    v as NodeId
}

const MAX_ATTEMPTS_PER_CASCADE: usize = 10_000;

/// Generates `cfg.cascade_count` cascades on `g`. Cascade `i` uses seed
/// `cfg.seed + i`; roots are drawn proportionally to follower count and
/// samples below the minimum size (or supercritical ones) are redrawn.
pub fn generate_cascades(g: &SocialGraph, cfg: &SynthConfig) -> Result<Vec<Cascade>> {
    let mut cumulative = Vec::with_capacity(g.node_count());
    let mut acc = 0u64;
    for v in g.nodes() {
        acc += g.followers(v).len() as u64;
        cumulative.push(acc);
    }
    if acc == 0 && !matches!(cfg.cascade_model, CascadeModel::RppGen { .. }) {
        return Err(Error::invalid("graph has no arcs to spread along"));
    }
    (0..cfg.cascade_count)
        .into_par_iter()
        .map(|i| {
            let seed = cfg.seed.wrapping_add(i as u64);
            let id = format!("c{i:06}");
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let events = match &cfg.cascade_model {
                CascadeModel::IndependentCascade {
                    edge_prob,
                    theta,
                    s0,
                    min_size,
                    max_size,
                    horizon,
                } => {
                    let kernel = kernel_from_theta(*theta, *s0)?;
                    let mut found = None;
                    for _ in 0..MAX_ATTEMPTS_PER_CASCADE {
                        let root = degree_weighted_root(g, &cumulative, &mut rng);
                        let ev = simulate_independent_cascade(g, root, *edge_prob, &kernel, *horizon, *max_size, &mut rng);
                        if ev.len() >= *min_size {
                            found = Some(ev);
                            break;
                        }
                    }
                    let ev = found.ok_or_else(|| {
                        Error::invalid(format!("no cascade reached {min_size} adopters in {MAX_ATTEMPTS_PER_CASCADE} attempts"))
                    })?;
                    ev.into_iter()
                        .map(|(v, t)| Adoption::new(g.external_id(v), t))
                        .collect()
                }
                CascadeModel::SeismicGen { p, theta, s0, horizon } => {
                    let kernel = kernel_from_theta(*theta, *s0)?;
                    let mut found = None;
                    for attempt in 0..MAX_ATTEMPTS_PER_CASCADE {
                        let root = degree_weighted_root(g, &cumulative, &mut rng);
                        let sim_cfg = SeismicSimConfig {
                            root,
                            p: *p,
                            kernel,
                            horizon: *horizon,
                            max_events: DEFAULT_MAX_EVENTS,
                        };
                        let sim_seed = seed.wrapping_mul(0x9e37_79b9).wrapping_add(attempt as u64);
                        match simulate_seismic(g, &sim_cfg, sim_seed) {
                            Ok(sim) => {
                                found = Some(sim.cascade.events().to_vec());
                                break;
                            }
                            Err(Error::Supercritical(_)) => continue,
                            Err(e) => return Err(e),
                        }
                    }
                    found.ok_or(Error::Supercritical(DEFAULT_MAX_EVENTS))?
                }
                CascadeModel::RppGen {
                    alpha,
                    mu,
                    sigma,
                    n_events,
                    horizon,
                } => simulate_rpp_with(
                    &RppSimConfig {
                        alpha: *alpha,
                        mu: *mu,
                        sigma: *sigma,
                        n_events: *n_events,
                        horizon: *horizon,
                    },
                    seed,
                )?
                .events()
                .to_vec(),
            };
            Ok(Cascade::new(id, events))
        })
        .collect()
}
