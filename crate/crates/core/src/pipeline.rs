//! End-to-end runs: `benchmark` (load, preprocess, predict, evaluate, report)
//! and `validate` (input cross-checks and a corpus census).

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{self, Cascade, EarlyStage};
use crate::centrality::{self, CentralityMeasure, CentralityTable};
use crate::community::{self, CommunityAssignment};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::eval::{self, ExperimentReport, Method, MlConfig, PreparedInputs, TimingReport};
use crate::features::{self, BfsScratch, FeatureMethod};
use crate::graph::{self, SocialGraph};
use crate::ml::{Dataset, Task};
use crate::pointprocess::{self, ReactionKernel};

/// Root-node features of method C, in column order.
pub const METHOD_C_NAMES: [&str; 4] = ["out_degree", "k_shell", "eigenvector", "pagerank"];

/// Point-process predictions above this are reported at this value.
pub const PREDICTION_CAP: f64 = 1e12;

/// Corpus summary in the shape of a dataset statistics table.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Census {
    pub nodes: usize,
    pub edges: usize,
    pub communities: Option<usize>,
    pub modularity: Option<f64>,
    pub avg_out_degree: Option<f64>,
    pub avg_k_shell: Option<f64>,
    pub avg_eigenvector: Option<f64>,
    pub avg_pagerank: Option<f64>,
    pub cascades: usize,
    pub mean_cascade_size: Option<f64>,
}

impl Census {
    fn set_centrality(&mut self, t: &CentralityTable) {
        let v = Some(t.mean());
        match t.measure {
            CentralityMeasure::OutDegree => self.avg_out_degree = v,
            CentralityMeasure::KShell => self.avg_k_shell = v,
            CentralityMeasure::Eigenvector => self.avg_eigenvector = v,
            CentralityMeasure::Pagerank => self.avg_pagerank = v,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PointProcessSummary {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<ReactionKernel>,
    pub theta_fitted: bool,
    pub seismic_untrackable: usize,
    pub rpp_not_converged: usize,
    pub rpp_unfittable: usize,
    pub capped_predictions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config: RunConfig,
    pub census: Census,
    pub warnings: Vec<String>,
    pub point_process: PointProcessSummary,
    pub experiments: Vec<ExperimentReport>,
    pub timings: TimingReport,
}

impl BenchmarkReport {
    fn new(cfg: &RunConfig) -> Self {
        BenchmarkReport {
            status: "running".into(),
            error: None,
            config: cfg.clone(),
            census: Census::default(),
            warnings: Vec::new(),
            point_process: PointProcessSummary::default(),
            experiments: Vec::new(),
            timings: TimingReport::new(),
        }
    }

    pub fn experiment(&self, method: Method, task: Task, percentile: Option<f64>) -> Option<&ExperimentReport> {
        self.experiments
            .iter()
            .find(|e| e.method == method && e.task == task && e.percentile == percentile)
    }

    /// JSON without the timing section, for run-to-run comparison.
    pub fn to_json_without_timings(&self) -> Result<String> {
        let mut v = serde_json::to_value(self)?;
        if let Some(obj) = v.as_object_mut() {
            obj.remove("timings");
        }
        Ok(serde_json::to_string_pretty(&v)?)
    }
}

pub const REPORT_JSON: &str = "report.json";
pub const METRICS_CSV: &str = "metrics.csv";

fn require_path<'a>(p: &'a Option<PathBuf>, key: &str) -> Result<&'a Path> {
    p.as_deref()
        .ok_or_else(|| Error::Config(format!("missing required key '{key}'")))
}

fn with_pool<T: Send>(workers: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Loads cascades, drops those rooted outside the graph, and sorts by id.
fn load_corpus(path: &Path, g: &SocialGraph, min_size: usize, warnings: &mut Vec<String>) -> Result<Vec<Cascade>> {
    let mut corpus = cascade::load_cascades(path, min_size)?;
    let before = corpus.len();
    corpus.retain(|c| g.internal_id(&c.root().node).is_some());
    let dropped = before - corpus.len();
    if dropped > 0 {
        let msg = format!("{dropped} cascades rejected: root not in graph");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    if corpus.is_empty() {
        return Err(Error::invalid(format!("no cascades >= min_size {min_size}")));
    }
    corpus.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(corpus)
}

fn early_stages(corpus: &[Cascade], n: usize) -> Result<Vec<EarlyStage>> {
    corpus.iter().map(|c| cascade::early_stage(c, n)).collect()
}

/// Method A or B feature rows for every early stage.
pub fn compute_features(
    method: FeatureMethod,
    stages: &[EarlyStage],
    g: &SocialGraph,
    assignment: &CommunityAssignment,
    t_lambda: Option<f64>,
    bfs_cap: u32,
) -> Result<Vec<Vec<f64>>> {
    stages
        .par_iter()
        .map_init(
            || BfsScratch::new(g.node_count()),
            |scratch, es| {
                let s = cascade::surfaces(es, g);
                let tl = t_lambda.unwrap_or_else(|| cascade::default_t_lambda(es));
                let fs = cascade::frontier_split(&s, es.t_obs, tl)?;
                let fv = match method {
                    FeatureMethod::A => features::features_a(es, &s, &fs, assignment),
                    FeatureMethod::B => features::features_b_with(es, &s, &fs, assignment, g, bfs_cap, scratch),
                };
                Ok(fv.values)
            },
        )
        .collect()
}

/// Per-horizon predictions `[h][i]` with counters for degenerate fits.
pub struct HorizonPredictions {
    pub predictions: Vec<Vec<f64>>,
    pub failed: usize,
    pub not_converged: usize,
    pub capped: usize,
}

fn cap_prediction(p: f64, observed: f64, capped: &mut usize) -> f64 {
    if p.is_finite() && p <= PREDICTION_CAP {
        p.max(observed)
    } else {
        *capped += 1;
        PREDICTION_CAP
    }
}

fn transpose(per_cascade: Vec<Vec<f64>>, horizons: usize) -> Vec<Vec<f64>> {
    (0..horizons)
        .map(|h| per_cascade.iter().map(|row| row[h]).collect())
        .collect()
}

/// SEISMIC predictions; untrackable cascades keep their observed size.
pub fn seismic_predictions(
    stages: &[EarlyStage],
    g: &SocialGraph,
    kernel: &ReactionKernel,
    horizons: &[f64],
) -> Result<HorizonPredictions> {
    let rows: Vec<(Vec<f64>, bool, usize)> = stages
        .par_iter()
        .map(|es| {
            let observed = es.prefix.len() as f64;
            match pointprocess::seismic_fit(es, g, kernel) {
                Ok(fit) => {
                    let mut capped = 0;
                    let row = horizons
                        .iter()
                        .map(|h| cap_prediction(pointprocess::seismic_predict(&fit, kernel, h * es.t_obs), observed, &mut capped))
                        .collect();
                    Ok((row, false, capped))
                }
                Err(Error::Untrackable(_)) => Ok((vec![observed; horizons.len()], true, 0)),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let failed = rows.iter().filter(|r| r.1).count();
    let capped = rows.iter().map(|r| r.2).sum();
    Ok(HorizonPredictions {
        predictions: transpose(rows.into_iter().map(|r| r.0).collect(), horizons.len()),
        failed,
        not_converged: 0,
        capped,
    })
}

/// RPP predictions. Cascade `i` fits with seed `seed + i`; unfittable
/// cascades keep their observed size.
pub fn rpp_predictions(
    stages: &[EarlyStage],
    restarts: usize,
    max_iter: usize,
    seed: u64,
    horizons: &[f64],
) -> Result<HorizonPredictions> {
    let rows: Vec<(Vec<f64>, u8, usize)> = stages
        .par_iter()
        .enumerate()
        .map(|(i, es)| {
            let observed = es.prefix.len() as f64;
            match pointprocess::rpp_fit(es, restarts, max_iter, seed.wrapping_add(i as u64)) {
                Ok(fit) => {
                    let mut capped = 0;
                    let row = horizons
                        .iter()
                        .map(|h| cap_prediction(pointprocess::rpp_predict(&fit, h * es.t_obs), observed, &mut capped))
                        .collect();
                    Ok((row, if fit.converged { 0 } else { 2 }, capped))
                }
                Err(Error::InvalidArgument(_)) => Ok((vec![observed; horizons.len()], 1, 0)),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;
    let failed = rows.iter().filter(|r| r.1 == 1).count();
    let not_converged = rows.iter().filter(|r| r.1 == 2).count();
    let capped = rows.iter().map(|r| r.2).sum();
    Ok(HorizonPredictions {
        predictions: transpose(rows.into_iter().map(|r| r.0).collect(), horizons.len()),
        failed,
        not_converged,
        capped,
    })
}

/// Reaction kernel from the configured exponent, or fitted to the corpus.
pub fn resolve_kernel(cfg: &RunConfig, corpus: &[Cascade], g: &SocialGraph) -> Result<(ReactionKernel, bool)> {
    match cfg.theta {
        Some(theta) => Ok((pointprocess::kernel_from_theta(theta, cfg.s0)?, false)),
        None => {
            let samples = pointprocess::reaction_times(corpus, g);
            let theta = pointprocess::fit_theta_powerlaw(&samples, cfg.s0)?;
            log::info!("fitted kernel exponent {theta:.4} from {} reaction times", samples.len());
            Ok((pointprocess::kernel_from_theta(theta, cfg.s0)?, true))
        }
    }
}

fn single_model(ml: &MlConfig, choice: eval::ModelChoice, task: Task) -> MlConfig {
    let mut one = ml.clone();
    match task {
        Task::Regression => one.regressors = vec![choice],
        Task::Classification => one.classifiers = vec![choice],
    }
    one
}

/// Runs regression and every percentile's classification for one method,
/// one model at a time so each model gets its own timing entry.
fn run_experiments(
    inputs: &PreparedInputs,
    method: Method,
    cfg: &RunConfig,
    timings: &mut TimingReport,
    timing_prefix: &str,
) -> Result<Vec<ExperimentReport>> {
    let ml = &cfg.ml;
    let mut out = Vec::new();
    let direct = method.is_point_process() && ml.pp_direct_threshold;

    let regression = if method.is_point_process() {
        eval::run_regression_experiment(inputs, method, ml, cfg.seed)?
    } else {
        let mut parts = Vec::new();
        for &choice in &ml.regressors {
            let one = single_model(ml, choice, Task::Regression);
            let name = format!("{timing_prefix}:{}", choice.as_str());
            let r = timings.time_task(&name, None, || eval::run_regression_experiment(inputs, method, &one, cfg.seed))?;
            parts.push(r);
        }
        merge(parts)
    };
    out.push(regression);

    for &q in &cfg.percentiles {
        if direct {
            out.push(eval::run_classification_experiment(inputs, method, q, ml, cfg.seed)?);
            continue;
        }
        let mut parts = Vec::new();
        for &choice in &ml.classifiers {
            let one = single_model(ml, choice, Task::Classification);
            let name = format!("{timing_prefix}:{}", choice.as_str());
            let r = timings.time_task(&name, None, || eval::run_classification_experiment(inputs, method, q, &one, cfg.seed))?;
            parts.push(r);
        }
        out.push(merge(parts));
    }
    Ok(out)
}

fn merge(parts: Vec<ExperimentReport>) -> ExperimentReport {
    let mut it = parts.into_iter();
    let mut first = it.next().expect("at least one model");
    for p in it {
        first.blocks.extend(p.blocks);
    }
    first.best = eval::best_blocks(&first.blocks);
    first
}

fn feature_dataset(rows: Vec<Vec<f64>>, corpus: &[Cascade]) -> Result<Dataset> {
    let targets = corpus.iter().map(|c| c.final_size() as f64).collect();
    let ids = corpus.iter().map(|c| c.id.clone()).collect();
    Dataset::new(rows, targets, ids)
}

fn run_benchmark(cfg: &RunConfig, report: &mut BenchmarkReport) -> Result<()> {
    cfg.validate()?;
    let graph_path = require_path(&cfg.graph, "graph")?;
    let cascades_path = require_path(&cfg.cascades, "cascades")?;
    let timings = &mut report.timings;

    let (g, corpus) = timings.time_task("graph_load", None, || -> Result<_> {
        let g = graph::load_edge_list(graph_path, cfg.directed)?;
        let corpus = load_corpus(cascades_path, &g, cfg.early_n, &mut report.warnings)?;
        Ok((g, corpus))
    })?;
    report.census.nodes = g.node_count();
    report.census.edges = g.edge_count();
    report.census.cascades = corpus.len();
    report.census.mean_cascade_size =
        Some(corpus.iter().map(|c| c.final_size() as f64).sum::<f64>() / corpus.len() as f64);
    let stages = early_stages(&corpus, cfg.early_n)?;
    let observed: Vec<f64> = stages.iter().map(|s| s.prefix.len() as f64).collect();

    let needs_communities = cfg.methods.iter().any(|m| matches!(m, Method::A | Method::B));
    let assignment = if needs_communities {
        let a = timings.time_task("community_detection", None, || -> Result<_> {
            match &cfg.communities {
                Some(p) => community::load_assignment(p, &g),
                None => Ok(community::louvain(&g, cfg.seed, cfg.community.starts, cfg.community.iterations)),
            }
        })?;
        if a.singletons_added > 0 {
            report.warnings.push(format!("{} nodes missing from the community file became singletons", a.singletons_added));
        }
        report.census.communities = Some(a.community_count());
        report.census.modularity = Some(a.modularity());
        Some(a)
    } else {
        None
    };

    for &method in &cfg.methods {
        let inputs = match method {
            Method::A | Method::B => {
                let fm = if method == Method::A { FeatureMethod::A } else { FeatureMethod::B };
                let a = assignment.as_ref().expect("communities computed for A and B");
                let rows = timings.time_task(&format!("feature_computation:{fm}"), Some(stages.len()), || {
                    compute_features(fm, &stages, &g, a, cfg.t_lambda, cfg.bfs_cap)
                })?;
                PreparedInputs::Features {
                    data: feature_dataset(rows, &corpus)?,
                    observed: observed.clone(),
                }
            }
            Method::C => {
                let mut tables = Vec::new();
                for m in CentralityMeasure::ALL {
                    let t = timings.time_task(&format!("centrality:{m}"), None, || centrality::compute(&g, m, &cfg.centrality))?;
                    report.census.set_centrality(&t);
                    tables.push(t);
                }
                let rows = corpus
                    .iter()
                    .map(|c| tables.iter().map(|t| centrality::root_centrality_feature(c, t, &g)).collect())
                    .collect::<Result<Vec<Vec<f64>>>>()?;
                PreparedInputs::Features {
                    data: feature_dataset(rows, &corpus)?,
                    observed: observed.clone(),
                }
            }
            Method::Seismic | Method::Rpp => {
                let name = format!("training_prediction:{method}");
                let hp = timings.time_task(&name, Some(stages.len()), || -> Result<_> {
                    if method == Method::Seismic {
                        let (kernel, fitted) = resolve_kernel(cfg, &corpus, &g)?;
                        report.point_process.kernel = Some(kernel);
                        report.point_process.theta_fitted = fitted;
                        seismic_predictions(&stages, &g, &kernel, &cfg.horizons)
                    } else {
                        rpp_predictions(&stages, cfg.rpp.restarts, cfg.rpp.max_iter, cfg.seed, &cfg.horizons)
                    }
                })?;
                let pp = &mut report.point_process;
                pp.capped_predictions += hp.capped;
                if method == Method::Seismic {
                    pp.seismic_untrackable = hp.failed;
                } else {
                    pp.rpp_unfittable = hp.failed;
                    pp.rpp_not_converged = hp.not_converged;
                }
                PreparedInputs::Horizons {
                    ids: corpus.iter().map(|c| c.id.clone()).collect(),
                    final_sizes: corpus.iter().map(|c| c.final_size() as f64).collect(),
                    observed: observed.clone(),
                    horizons: cfg.horizons.clone(),
                    predictions: hp.predictions,
                }
            }
        };
        let prefix = format!("training_prediction:{method}");
        let reports = run_experiments(&inputs, method, cfg, timings, &prefix)?;
        report.experiments.extend(reports);
    }
    Ok(())
}

/// Writes `report.json` and `metrics.csv` into the output directory.
pub fn write_reports(report: &BenchmarkReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json_path = dir.join(REPORT_JSON);
    fs::write(&json_path, serde_json::to_string_pretty(report)?).map_err(|e| Error::io(&json_path, e))?;

    let csv_path = dir.join(METRICS_CSV);
    let mut f = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    let mut text = String::from("method,task,percentile,block,metric,mean,std\n");
    for e in &report.experiments {
        let task = match e.task {
            Task::Regression => "regression",
            Task::Classification => "classification",
        };
        let pct = e.percentile.map(|p| p.to_string()).unwrap_or_default();
        for b in &e.blocks {
            for (metric, mean) in &b.mean {
                text.push_str(&format!("{},{task},{pct},{},{metric},{mean},{}\n", e.method, b.label, b.std[metric]));
            }
        }
    }
    f.write_all(text.as_bytes()).map_err(|e| Error::io(&csv_path, e))
}

/// Full benchmark run. Reports are written even when a stage fails; the
/// failure is recorded in the report and returned.
pub fn cmd_benchmark(cfg: &RunConfig) -> Result<BenchmarkReport> {
    let mut report = BenchmarkReport::new(cfg);
    let outcome = with_pool(cfg.workers, || run_benchmark(cfg, &mut report)).and_then(|r| r);
    report.status = if outcome.is_ok() { "ok" } else { "failed" }.into();
    if let Err(e) = &outcome {
        report.error = Some(e.to_string());
    }
    // Only the failed-config case skips writing: nothing ran.
    if !matches!(&outcome, Err(Error::Config(_))) {
        write_reports(&report, &cfg.output_dir)?;
    }
    outcome.map(|_| report)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub census: Census,
    pub warnings: Vec<String>,
    pub errors: Vec<String>,
    pub counts: BTreeMap<String, usize>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.warnings.is_empty() && self.errors.is_empty()
    }
}

/// Dry run: loads every configured input, cross-checks ids and builds the
/// census. Problems are reported, never raised.
pub fn cmd_validate(cfg: &RunConfig) -> ValidationReport {
    let mut rep = ValidationReport::default();
    if let Err(e) = cfg.validate() {
        rep.errors.push(e.to_string());
    }
    let Some(graph_path) = cfg.graph.as_deref() else {
        rep.errors.push("no graph configured".into());
        return rep;
    };
    let g = match graph::load_edge_list(graph_path, cfg.directed) {
        Ok(g) => g,
        Err(e) => {
            rep.errors.push(e.to_string());
            return rep;
        }
    };
    rep.census.nodes = g.node_count();
    rep.census.edges = g.edge_count();
    let stats = g.load_stats();
    if stats.self_loops > 0 {
        rep.warnings.push(format!("{} self-loops dropped", stats.self_loops));
    }
    if stats.duplicates > 0 {
        rep.warnings.push(format!("{} duplicate edges dropped", stats.duplicates));
    }
    for m in CentralityMeasure::ALL {
        match centrality::compute(&g, m, &cfg.centrality) {
            Ok(t) => rep.census.set_centrality(&t),
            Err(e) => rep.warnings.push(format!("centrality {m}: {e}")),
        }
    }

    if let Some(p) = cfg.communities.as_deref() {
        match community::load_assignment(p, &g) {
            Ok(a) => {
                rep.census.communities = Some(a.community_count());
                rep.census.modularity = Some(a.modularity());
                rep.counts.insert("nodes_without_community".into(), a.singletons_added);
                if a.singletons_added > 0 {
                    rep.warnings.push(format!("{} graph nodes have no community", a.singletons_added));
                }
            }
            Err(e) => rep.errors.push(e.to_string()),
        }
    }

    match cfg.cascades.as_deref() {
        None => rep.errors.push("no cascades configured".into()),
        Some(p) => match cascade::load_cascades(p, 1) {
            Err(e) => rep.errors.push(e.to_string()),
            Ok(corpus) => {
                rep.census.cascades = corpus.len();
                if !corpus.is_empty() {
                    rep.census.mean_cascade_size =
                        Some(corpus.iter().map(|c| c.final_size() as f64).sum::<f64>() / corpus.len() as f64);
                }
                let mut unknown_adoptions = 0;
                let mut cascades_with_unknown = 0;
                let mut unknown_roots = 0;
                let mut short = 0;
                for c in &corpus {
                    let missing = c.events().iter().filter(|e| g.internal_id(&e.node).is_none()).count();
                    unknown_adoptions += missing;
                    cascades_with_unknown += usize::from(missing > 0);
                    unknown_roots += usize::from(g.internal_id(&c.root().node).is_none());
                    short += usize::from(c.final_size() < cfg.early_n);
                }
                rep.counts.insert("unknown_adoptions".into(), unknown_adoptions);
                rep.counts.insert("unknown_roots".into(), unknown_roots);
                rep.counts.insert("short_cascades".into(), short);
                if unknown_adoptions > 0 {
                    rep.warnings.push(format!(
                        "{unknown_adoptions} adoptions in {cascades_with_unknown} cascades reference nodes absent from the graph"
                    ));
                }
                if unknown_roots > 0 {
                    rep.warnings.push(format!("{unknown_roots} cascades have a root absent from the graph"));
                }
                if short > 0 {
                    rep.warnings.push(format!("{short} cascades have fewer than {} adoptions", cfg.early_n));
                }
            }
        },
    }
    rep
}
