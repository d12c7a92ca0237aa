//! Cascade data model: adoption timelines, early-stage prefixes, exposure
//! surfaces and the frontier / non-adopter split of the first surface.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{NodeId, SocialGraph};
use crate::io::{for_each_record, parse_error};

/// One adoption: external node token and time since the root adoption.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adoption {
    pub node: String,
    pub time: f64,
}

impl Adoption {
    pub fn new(node: impl Into<String>, time: f64) -> Self {
        Adoption {
            node: node.into(),
            time,
        }
    }
}

/// A time-ordered set of distinct adopters whose first event is at time 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cascade {
    pub id: String,
    events: Vec<Adoption>,
}

impl Cascade {
    /// Sorts events by time (stable), keeps each node's earliest adoption and
    /// shifts times so the root sits at 0.
    ///
    /// Panics if `events` is empty.
    pub fn new(id: impl Into<String>, mut events: Vec<Adoption>) -> Self {
        assert!(!events.is_empty(), "a cascade needs at least one adoption");
        events.sort_by(|a, b| a.time.total_cmp(&b.time));
        let mut seen = HashSet::with_capacity(events.len());
        events.retain(|e| seen.insert(e.node.clone()));
        let t0 = events[0].time;
        for e in events.iter_mut() {
            e.time -= t0;
        }
        Cascade {
            id: id.into(),
            events,
        }
    }

    pub fn events(&self) -> &[Adoption] {
        &self.events
    }

    pub fn root(&self) -> &Adoption {
        &self.events[0]
    }

    pub fn final_size(&self) -> usize {
        self.events.len()
    }

    pub fn t_end(&self) -> f64 {
        self.events.last().map_or(0.0, |e| e.time)
    }

    /// Number of adoptions at or before `t`.
    pub fn size_at(&self, t: f64) -> usize {
        self.events.partition_point(|e| e.time <= t)
    }

    /// Multiplies every timestamp by `factor`.
    pub fn scale_time(&self, factor: f64) -> Cascade {
        Cascade {
            id: self.id.clone(),
            events: self
                .events
                .iter()
                .map(|e| Adoption::new(e.node.clone(), e.time * factor))
                .collect(),
        }
    }
}

/// Reads `cascade_id,node_id,timestamp` records and keeps cascades with at
/// least `min_size` distinct adopters, in order of first appearance.
pub fn load_cascades(path: impl AsRef<Path>, min_size: usize) -> Result<Vec<Cascade>> {
    let path = path.as_ref();
    let mut order: Vec<String> = Vec::new();
    let mut events: HashMap<String, Vec<Adoption>> = HashMap::new();
    for_each_record(path, |line, tokens| {
        if tokens.len() != 3 {
            return Err(parse_error(
                path,
                line,
                format!("expected `cascade_id,node_id,timestamp`, found {} fields", tokens.len()),
            ));
        }
        if tokens == ["cascade_id", "node_id", "timestamp"] {
            return Ok(());
        }
        let time: f64 = tokens[2]
            .parse()
            .ok()
            .filter(|t: &f64| t.is_finite())
            .ok_or_else(|| parse_error(path, line, format!("bad timestamp `{}`", tokens[2])))?;
        let list = events.entry(tokens[0].to_owned()).or_insert_with(|| {
            order.push(tokens[0].to_owned());
            Vec::new()
        });
        list.push(Adoption::new(tokens[1], time));
        Ok(())
    })?;

    let total = order.len();
    let cascades: Vec<Cascade> = order
        .into_iter()
        .map(|id| {
            let ev = events.remove(&id).unwrap_or_default();
            Cascade::new(id, ev)
        })
        .filter(|c| c.final_size() >= min_size)
        .collect();
    log::info!(
        "{}: kept {} of {} cascades with >= {} adopters",
        path.display(),
        cascades.len(),
        total,
        min_size
    );
    Ok(cascades)
}

pub fn write_cascades(cascades: &[Cascade], path: impl AsRef<Path>) -> Result<()> {
    use std::io::Write;
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "cascade_id,node_id,timestamp").map_err(io)?;
    for c in cascades {
        for e in c.events() {
            writeln!(w, "{},{},{}", c.id, e.node, e.time).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}

/// The first `n` adoptions of a cascade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EarlyStage {
    pub cascade_id: String,
    pub prefix: Vec<Adoption>,
    /// Time of the n-th adoption.
    pub t_obs: f64,
    pub n: usize,
}

impl EarlyStage {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.prefix.iter().map(|a| a.time)
    }

    /// Consecutive inter-adoption gaps (`n - 1` values).
    pub fn gaps(&self) -> Vec<f64> {
        self.prefix.windows(2).map(|w| w[1].time - w[0].time).collect()
    }

    /// Dense ids of prefix adopters, `None` for nodes absent from the graph.
    pub fn resolve(&self, g: &SocialGraph) -> Vec<Option<NodeId>> {
        self.prefix.iter().map(|a| g.internal_id(&a.node)).collect()
    }
}

pub fn early_stage(c: &Cascade, n: usize) -> Result<EarlyStage> {
    if n == 0 || c.final_size() < n {
        return Err(Error::CascadeTooShort {
            cascade: c.id.clone(),
            size: c.final_size(),
            needed: n.max(1),
        });
    }
    let prefix = c.events()[..n].to_vec();
    Ok(EarlyStage {
        cascade_id: c.id.clone(),
        t_obs: prefix[n - 1].time,
        prefix,
        n,
    })
}

/// Adopters and the first two exposure surfaces around them.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SurfaceSet {
    /// Early-stage adopters present in the graph, in adoption order.
    pub adopters: Vec<NodeId>,
    /// Followers of adopters that have not adopted, sorted.
    pub first_surface: Vec<NodeId>,
    /// Aligned with `first_surface`: earliest adoption time among the
    /// node's adopting followees.
    pub exposure_time: Vec<f64>,
    /// Followers of `first_surface` outside adopters and `first_surface`, sorted.
    pub second_surface: Vec<NodeId>,
    /// Early-stage adopters that were not found in the graph.
    pub skipped_adopters: usize,
}

impl SurfaceSet {
    pub fn exposure_of(&self, v: NodeId) -> Option<f64> {
        self.first_surface
            .binary_search(&v)
            .ok()
            .map(|i| self.exposure_time[i])
    }
}

pub fn surfaces(es: &EarlyStage, g: &SocialGraph) -> SurfaceSet {
    let mut adopters = Vec::with_capacity(es.prefix.len());
    let mut times = Vec::with_capacity(es.prefix.len());
    let mut skipped = 0;
    for (a, id) in es.prefix.iter().zip(es.resolve(g)) {
        match id {
            Some(v) => {
                adopters.push(v);
                times.push(a.time);
            }
            None => skipped += 1,
        }
    }
    if skipped > 0 {
        log::debug!(
            "cascade {}: {} early adopters missing from the graph",
            es.cascade_id,
            skipped
        );
    }
    let adopter_set: HashSet<NodeId> = adopters.iter().copied().collect();

    let mut exposure: HashMap<NodeId, f64> = HashMap::new();
    for (&a, &t) in adopters.iter().zip(&times) {
        for &f in g.followers(a) {
            if adopter_set.contains(&f) {
                continue;
            }
            exposure
                .entry(f)
                .and_modify(|e| {
                    if t < *e {
                        *e = t
                    }
                })
                .or_insert(t);
        }
    }
    let mut first: Vec<(NodeId, f64)> = exposure.into_iter().collect();
    first.sort_unstable_by_key(|&(v, _)| v);

    let mut second: HashSet<NodeId> = HashSet::new();
    for &(v, _) in &first {
        for &w in g.followers(v) {
            if !adopter_set.contains(&w) && first.binary_search_by_key(&w, |&(u, _)| u).is_err() {
                second.insert(w);
            }
        }
    }
    let mut second_surface: Vec<NodeId> = second.into_iter().collect();
    second_surface.sort_unstable();

    SurfaceSet {
        adopters,
        first_surface: first.iter().map(|&(v, _)| v).collect(),
        exposure_time: first.iter().map(|&(_, t)| t).collect(),
        second_surface,
        skipped_adopters: skipped,
    }
}

/// First-surface nodes exposed recently (frontiers) versus long ago.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrontierSplit {
    pub frontiers: Vec<NodeId>,
    pub non_adopters: Vec<NodeId>,
    pub t_lambda: f64,
}

/// A node is a frontier when `t_obs - exposure_time <= t_lambda`.
pub fn frontier_split(s: &SurfaceSet, t_obs: f64, t_lambda: f64) -> Result<FrontierSplit> {
    if t_lambda.is_nan() || t_lambda < 0.0 {
        return Err(Error::invalid(format!("t_lambda must be >= 0, got {t_lambda}")));
    }
    let mut split = FrontierSplit {
        t_lambda,
        ..Default::default()
    };
    for (&v, &t) in s.first_surface.iter().zip(&s.exposure_time) {
        if t_obs - t <= t_lambda {
            split.frontiers.push(v);
        } else {
            split.non_adopters.push(v);
        }
    }
    Ok(split)
}

/// Median inter-adoption gap of the early stage (0 for a single adoption).
pub fn default_t_lambda(es: &EarlyStage) -> f64 {
    crate::stats::median(&es.gaps())
}
