//! Labeling, metrics, experiment protocols and stage timing.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ml::{self, Dataset, ForestParams, Standardizer, Task, TreeParams};

/// Percentile threshold and the resulting viral labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelingConfig {
    pub percentile: f64,
    pub threshold: f64,
    pub labels: Vec<bool>,
}

impl LabelingConfig {
    pub fn viral_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l).count()
    }
}

/// Nearest-rank percentile threshold; a cascade is viral iff its size is at
/// least the threshold.
pub fn label_cascades(sizes: &[f64], percentile: f64) -> Result<LabelingConfig> {
    if sizes.is_empty() {
        return Err(Error::invalid("cannot label an empty corpus"));
    }
    if !(percentile > 0.0 && percentile <= 100.0) {
        return Err(Error::invalid(format!("percentile must be in (0, 100], got {percentile}")));
    }
    let mut sorted = sizes.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((percentile / 100.0) * sorted.len() as f64).ceil() as usize;
    let threshold = sorted[rank.clamp(1, sorted.len()) - 1];
    Ok(LabelingConfig {
        percentile,
        threshold,
        labels: sizes.iter().map(|&s| s >= threshold).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub ape: f64,
    pub rmse: f64,
    pub rmsle: f64,
    /// Absent for fewer than 10 samples.
    pub top10_coverage: Option<f64>,
}

impl RegressionMetrics {
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        m.insert("ape".to_owned(), self.ape);
        m.insert("rmse".to_owned(), self.rmse);
        m.insert("rmsle".to_owned(), self.rmsle);
        if let Some(c) = self.top10_coverage {
            m.insert("top10_coverage".to_owned(), c);
        }
        m
    }
}

/// Indices of the `k` largest values; ties go to the smaller id.
fn top_set(values: &[f64], ids: &[String], k: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then_with(|| ids[a].cmp(&ids[b])));
    order.truncate(k);
    order.sort_unstable();
    order
}

/// APE, RMSE, RMSLE and top-10% coverage. Predictions are clamped to at
/// least 1 before taking logs.
pub fn regression_metrics(y: &[f64], y_hat: &[f64], ids: &[String]) -> Result<RegressionMetrics> {
    let m = y.len();
    if y_hat.len() != m || ids.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: if y_hat.len() != m { y_hat.len() } else { ids.len() },
        });
    }
    if m == 0 {
        return Err(Error::invalid("no samples to score"));
    }
    if y.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::invalid("regression targets must be positive"));
    }
    let (mut ape, mut se, mut sle) = (0.0, 0.0, 0.0);
    for (&t, &p) in y.iter().zip(y_hat) {
        ape += (p - t).abs() / t;
        se += (p - t) * (p - t);
        let dl = p.max(1.0).ln() - t.ln();
        sle += dl * dl;
    }
    let mf = m as f64;
    let top10_coverage = (m >= 10).then(|| {
        let k = m / 10;
        let true_top = top_set(y, ids, k);
        let pred_top = top_set(y_hat, ids, k);
        let hits = pred_top.iter().filter(|i| true_top.binary_search(i).is_ok()).count();
        hits as f64 / k as f64
    });
    Ok(RegressionMetrics {
        ape: ape / mf,
        rmse: (se / mf).sqrt(),
        rmsle: (sle / mf).sqrt(),
        top10_coverage,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl ClassificationMetrics {
    pub fn to_map(&self) -> BTreeMap<String, f64> {
        let mut m = BTreeMap::new();
        m.insert("precision".to_owned(), self.precision);
        m.insert("recall".to_owned(), self.recall);
        m.insert("f1".to_owned(), self.f1);
        m
    }
}

/// Precision, recall and F1 of the positive (viral) class; empty
/// denominators give 0.
pub fn classification_metrics(labels: &[bool], predicted: &[bool]) -> Result<ClassificationMetrics> {
    if labels.len() != predicted.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            got: predicted.len(),
        });
    }
    let (mut tp, mut fp, mut fneg) = (0usize, 0usize, 0usize);
    for (&l, &p) in labels.iter().zip(predicted) {
        match (l, p) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fneg += 1,
            (false, false) => {}
        }
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fneg);
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(ClassificationMetrics { precision, recall, f1 })
}

/// Metrics of one configuration (model or horizon) across folds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub label: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<f64>,
    pub per_fold: Vec<BTreeMap<String, f64>>,
    pub mean: BTreeMap<String, f64>,
    /// Population standard deviation across folds.
    pub std: BTreeMap<String, f64>,
}

impl MetricReport {
    pub fn from_folds(label: impl Into<String>, horizon: Option<f64>, per_fold: Vec<BTreeMap<String, f64>>) -> Self {
        let mut mean = BTreeMap::new();
        let mut std = BTreeMap::new();
        let mut keys: Vec<&String> = per_fold.iter().flat_map(|f| f.keys()).collect();
        keys.sort();
        keys.dedup();
        for key in keys {
            let vals: Vec<f64> = per_fold.iter().filter_map(|f| f.get(key).copied()).collect();
            mean.insert(key.clone(), crate::stats::mean(&vals));
            std.insert(key.clone(), crate::stats::population_std(&vals));
        }
        MetricReport {
            label: label.into(),
            horizon,
            per_fold,
            mean,
            std,
        }
    }
}

/// Best value of each metric over the blocks of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestEntry {
    pub value: f64,
    pub block: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "A")]
    A,
    #[serde(rename = "B")]
    B,
    #[serde(rename = "C")]
    C,
    #[serde(rename = "rpp")]
    Rpp,
    #[serde(rename = "seismic")]
    Seismic,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::A, Method::B, Method::C, Method::Rpp, Method::Seismic];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::A => "A",
            Method::B => "B",
            Method::C => "C",
            Method::Rpp => "rpp",
            Method::Seismic => "seismic",
        }
    }

    pub fn is_point_process(self) -> bool {
        matches!(self, Method::Rpp | Method::Seismic)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "a" => Ok(Method::A),
            "b" => Ok(Method::B),
            "c" => Ok(Method::C),
            "rpp" => Ok(Method::Rpp),
            "seismic" => Ok(Method::Seismic),
            _ => Err(Error::invalid(format!("unknown method '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub method: Method,
    pub task: Task,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub percentile: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<f64>>,
    pub blocks: Vec<MetricReport>,
    pub best: BTreeMap<String, BestEntry>,
}

fn lower_is_better(metric: &str) -> bool {
    matches!(metric, "ape" | "rmse" | "rmsle")
}

/// Best mean of each metric over `blocks`: lowest for error metrics,
/// highest otherwise.
pub fn best_blocks(blocks: &[MetricReport]) -> BTreeMap<String, BestEntry> {
    let mut best: BTreeMap<String, BestEntry> = BTreeMap::new();
    for b in blocks {
        for (metric, &value) in &b.mean {
            let better = match best.get(metric) {
                None => true,
                Some(cur) if lower_is_better(metric) => value < cur.value,
                Some(cur) => value > cur.value,
            };
            if better {
                best.insert(
                    metric.clone(),
                    BestEntry {
                        value,
                        block: b.label.clone(),
                    },
                );
            }
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelChoice {
    LinearRegression,
    LogisticRegression,
    DecisionTree,
    RandomForest,
}

impl ModelChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelChoice::LinearRegression => "linear_regression",
            ModelChoice::LogisticRegression => "logistic_regression",
            ModelChoice::DecisionTree => "decision_tree",
            ModelChoice::RandomForest => "random_forest",
        }
    }
}

/// Learner hyperparameters shared by every supervised experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlConfig {
    pub folds: usize,
    pub stratify: bool,
    pub regressors: Vec<ModelChoice>,
    pub classifiers: Vec<ModelChoice>,
    pub ridge: f64,
    pub logistic_l2: f64,
    pub logistic_max_iter: usize,
    pub logistic_tol: f64,
    pub tree: TreeParams,
    pub forest: ForestParams,
    /// Fit regressors on `ln(size)` and exponentiate predictions.
    pub log_target: bool,
    /// Point-process classification by thresholding the horizon prediction
    /// instead of training a classifier on the horizon predictions.
    pub pp_direct_threshold: bool,
}

impl Default for MlConfig {
    fn default() -> Self {
        MlConfig {
            folds: 10,
            stratify: true,
            regressors: vec![ModelChoice::LinearRegression, ModelChoice::RandomForest],
            classifiers: vec![ModelChoice::LogisticRegression, ModelChoice::RandomForest],
            ridge: 1e-6,
            logistic_l2: 1.0,
            logistic_max_iter: 100,
            logistic_tol: 1e-8,
            tree: TreeParams::default(),
            forest: ForestParams::default(),
            log_target: false,
            pp_direct_threshold: false,
        }
    }
}

/// Inputs of one experiment, rows aligned across fields.
#[derive(Debug, Clone, PartialEq)]
pub enum PreparedInputs {
    /// Feature rows (methods A, B, C) with final sizes as targets.
    Features {
        data: Dataset,
        observed: Vec<f64>,
    },
    /// Point-process predictions per horizon (`predictions[h][i]`).
    Horizons {
        ids: Vec<String>,
        final_sizes: Vec<f64>,
        observed: Vec<f64>,
        horizons: Vec<f64>,
        predictions: Vec<Vec<f64>>,
    },
}

impl PreparedInputs {
    pub fn len(&self) -> usize {
        match self {
            PreparedInputs::Features { data, .. } => data.len(),
            PreparedInputs::Horizons { ids, .. } => ids.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn final_sizes(&self) -> Vec<f64> {
        match self {
            PreparedInputs::Features { data, .. } => data.targets().to_vec(),
            PreparedInputs::Horizons { final_sizes, .. } => final_sizes.clone(),
        }
    }
}

fn fit_model(
    choice: ModelChoice,
    train: &Dataset,
    task: Task,
    cfg: &MlConfig,
    seed: u64,
) -> Result<ml::TrainedPredictor> {
    match (choice, task) {
        (ModelChoice::LinearRegression, Task::Regression) => ml::fit_linear_regression(train, cfg.ridge),
        (ModelChoice::LogisticRegression, Task::Classification) => {
            ml::fit_logistic_regression(train, cfg.logistic_l2, cfg.logistic_max_iter, cfg.logistic_tol)
        }
        (ModelChoice::DecisionTree, _) => ml::fit_tree_with(train, cfg.tree, seed, task),
        (ModelChoice::RandomForest, _) => ml::fit_random_forest(train, cfg.forest, seed, task),
        (c, t) => Err(Error::Config(format!("{} cannot be used for {t:?}", c.as_str()))),
    }
}

/// Standardizes on the training fold, fits, and predicts the test fold.
fn train_and_predict(
    choice: ModelChoice,
    data: &Dataset,
    train: &[usize],
    test: &[usize],
    task: Task,
    cfg: &MlConfig,
    seed: u64,
) -> Result<Vec<f64>> {
    let train_set = data.subset(train);
    let scaler = Standardizer::fit(train_set.rows());
    let mut train_set = Dataset::new(
        scaler.transform(train_set.rows()),
        train_set.targets().to_vec(),
        train_set.ids().to_vec(),
    )?;
    let log_target = cfg.log_target && task == Task::Regression;
    if log_target {
        train_set = train_set.with_targets(train_set.targets().iter().map(|y| y.ln()).collect())?;
    }
    let test_rows: Vec<Vec<f64>> = test.iter().map(|&i| data.rows()[i].clone()).collect();
    let model = fit_model(choice, &train_set, task, cfg, seed)?;
    let mut out = ml::predict(&model, &scaler.transform(&test_rows))?;
    if log_target {
        out.iter_mut().for_each(|v| *v = v.exp());
    }
    Ok(out)
}

fn cross_validate<F>(
    data: &Dataset,
    folds: usize,
    stratify: Option<&[bool]>,
    seed: u64,
    score: F,
) -> Result<Vec<BTreeMap<String, f64>>>
where
    F: Fn(usize, &[usize], &[usize]) -> Result<BTreeMap<String, f64>> + Sync,
{
    let assignment = ml::kfold_split(data.ids(), folds, stratify, seed)?;
    // Rows in id order, so results do not depend on the input order.
    let ids = data.ids();
    let mut splits = ml::fold_indices(&assignment, folds);
    for (train, test) in &mut splits {
        train.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
        test.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
    }
    splits
        .par_iter()
        .enumerate()
        .map(|(f, (train, test))| score(f, train, test))
        .collect()
}

/// Regression protocol: k-fold CV per configured regressor for feature
/// methods; one block per horizon, without CV, for point-process methods.
pub fn run_regression_experiment(
    inputs: &PreparedInputs,
    method: Method,
    cfg: &MlConfig,
    seed: u64,
) -> Result<ExperimentReport> {
    let mut blocks = Vec::new();
    let mut horizons_out = None;
    match inputs {
        PreparedInputs::Features { data, observed } => {
            if method.is_point_process() {
                return Err(Error::Config(format!("method {method} needs horizon predictions")));
            }
            for &choice in &cfg.regressors {
                let per_fold = cross_validate(data, cfg.folds, None, seed, |f, train, test| {
                    let mut pred = train_and_predict(choice, data, train, test, Task::Regression, cfg, seed + f as u64)?;
                    if cfg.log_target {
                        for (p, &i) in pred.iter_mut().zip(test) {
                            *p = p.max(observed[i]);
                        }
                    }
                    let y: Vec<f64> = test.iter().map(|&i| data.targets()[i]).collect();
                    let ids: Vec<String> = test.iter().map(|&i| data.ids()[i].clone()).collect();
                    Ok(regression_metrics(&y, &pred, &ids)?.to_map())
                })?;
                blocks.push(MetricReport::from_folds(choice.as_str(), None, per_fold));
            }
        }
        PreparedInputs::Horizons {
            ids,
            final_sizes,
            horizons,
            predictions,
            ..
        } => {
            if !method.is_point_process() {
                return Err(Error::Config(format!("method {method} needs feature rows")));
            }
            for (h, pred) in horizons.iter().zip(predictions) {
                let metrics = regression_metrics(final_sizes, pred, ids)?;
                blocks.push(MetricReport::from_folds(format!("horizon={h}"), Some(*h), vec![metrics.to_map()]));
            }
            horizons_out = Some(horizons.clone());
        }
    }
    Ok(ExperimentReport {
        method,
        task: Task::Regression,
        percentile: None,
        threshold: None,
        horizons: horizons_out,
        best: best_blocks(&blocks),
        blocks,
    })
}

/// Classification protocol at one percentile threshold. Point-process
/// methods feed `ln(1 + prediction)` at every horizon to the classifiers,
/// or threshold each horizon's prediction directly when configured.
pub fn run_classification_experiment(
    inputs: &PreparedInputs,
    method: Method,
    percentile: f64,
    cfg: &MlConfig,
    seed: u64,
) -> Result<ExperimentReport> {
    let labeling = label_cascades(&inputs.final_sizes(), percentile)?;
    let labels = &labeling.labels;
    let targets: Vec<f64> = labels.iter().map(|&l| l as u8 as f64).collect();
    let mut blocks = Vec::new();
    let mut horizons_out = None;

    let data = match inputs {
        PreparedInputs::Features { data, .. } => {
            if method.is_point_process() {
                return Err(Error::Config(format!("method {method} needs horizon predictions")));
            }
            data.with_targets(targets)?
        }
        PreparedInputs::Horizons {
            ids,
            horizons,
            predictions,
            ..
        } => {
            if !method.is_point_process() {
                return Err(Error::Config(format!("method {method} needs feature rows")));
            }
            horizons_out = Some(horizons.clone());
            if cfg.pp_direct_threshold {
                for (h, pred) in horizons.iter().zip(predictions) {
                    let predicted: Vec<bool> = pred.iter().map(|&p| p >= labeling.threshold).collect();
                    let m = classification_metrics(labels, &predicted)?;
                    blocks.push(MetricReport::from_folds(format!("threshold@horizon={h}"), Some(*h), vec![m.to_map()]));
                }
                return Ok(ExperimentReport {
                    method,
                    task: Task::Classification,
                    percentile: Some(percentile),
                    threshold: Some(labeling.threshold),
                    horizons: horizons_out,
                    best: best_blocks(&blocks),
                    blocks,
                });
            }
            let rows: Vec<Vec<f64>> = (0..ids.len())
                .map(|i| predictions.iter().map(|p| p[i].max(0.0).ln_1p()).collect())
                .collect();
            Dataset::new(rows, targets, ids.clone())?
        }
    };

    let stratify = cfg.stratify.then_some(labels.as_slice());
    for &choice in &cfg.classifiers {
        let per_fold = cross_validate(&data, cfg.folds, stratify, seed, |f, train, test| {
            let train_labels = train.iter().map(|&i| labels[i]);
            let positives = train_labels.clone().filter(|&l| l).count();
            if positives == 0 || positives == train.len() {
                return Err(Error::SingleClass(format!("fold {f}")));
            }
            let prob = train_and_predict(choice, &data, train, test, Task::Classification, cfg, seed + f as u64)?;
            let predicted: Vec<bool> = prob.iter().map(|&p| p >= 0.5).collect();
            let truth: Vec<bool> = test.iter().map(|&i| labels[i]).collect();
            Ok(classification_metrics(&truth, &predicted)?.to_map())
        })?;
        blocks.push(MetricReport::from_folds(choice.as_str(), None, per_fold));
    }
    Ok(ExperimentReport {
        method,
        task: Task::Classification,
        percentile: Some(percentile),
        threshold: Some(labeling.threshold),
        horizons: horizons_out,
        best: best_blocks(&blocks),
        blocks,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingEntry {
    pub task: String,
    pub total_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub per_sample_seconds: Option<f64>,
}

/// Wall-clock time per named stage, in execution order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub entries: Vec<TimingEntry>,
}

impl TimingReport {
    pub fn new() -> Self {
        Self::default()
    }

    /// Runs `thunk`, recording its duration under `task`. Repeated names
    /// accumulate into one entry.
    pub fn time_task<T>(&mut self, task: &str, samples: Option<usize>, thunk: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = thunk();
        let secs = start.elapsed().as_secs_f64();
        self.record(task, secs, samples);
        log::info!("{task}: {secs:.3}s");
        out
    }

    pub fn record(&mut self, task: &str, seconds: f64, samples: Option<usize>) {
        let entry = match self.entries.iter_mut().position(|e| e.task == task) {
            Some(i) => &mut self.entries[i],
            None => {
                self.entries.push(TimingEntry {
                    task: task.to_owned(),
                    total_seconds: 0.0,
                    samples: None,
                    per_sample_seconds: None,
                });
                self.entries.last_mut().expect("just pushed")
            }
        };
        entry.total_seconds += seconds;
        if let Some(n) = samples {
            let total = entry.samples.unwrap_or(0) + n;
            entry.samples = Some(total);
            entry.per_sample_seconds = (total > 0).then(|| entry.total_seconds / total as f64);
        }
    }

    pub fn get(&self, task: &str) -> Option<&TimingEntry> {
        self.entries.iter().find(|e| e.task == task)
    }

    pub fn task_names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.task.as_str()).collect()
    }
}
