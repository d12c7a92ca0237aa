//! Supervised learners and cross-validation folds.
//!
//! Models: ridge linear regression, L2 logistic regression (IRLS), CART
//! trees and bagged random forests. Trained models serialize to a small
//! versioned binary file: the 8-byte magic `CPMODEL\0`, a little-endian
//! `u32` format version, then the model as CBOR.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 8] = b"CPMODEL\0";
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Regression,
    Classification,
}

/// Feature matrix with aligned targets and unique row ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    rows: Vec<Vec<f64>>,
    targets: Vec<f64>,
    ids: Vec<String>,
    dim: usize,
}

impl Dataset {
    pub fn new(rows: Vec<Vec<f64>>, targets: Vec<f64>, ids: Vec<String>) -> Result<Self> {
        if rows.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                got: targets.len(),
            });
        }
        if rows.len() != ids.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                got: ids.len(),
            });
        }
        let dim = rows.first().map_or(0, Vec::len);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
            if r.iter().any(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("row {} ({}) has a non-finite feature", i, ids[i])));
            }
        }
        if let Some(i) = targets.iter().position(|y| !y.is_finite()) {
            return Err(Error::invalid(format!("target of {} is not finite", ids[i])));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::invalid(format!("duplicate row id {id}")));
            }
        }
        Ok(Dataset {
            rows,
            targets,
            ids,
            dim,
        })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            rows: idx.iter().map(|&i| self.rows[i].clone()).collect(),
            targets: idx.iter().map(|&i| self.targets[i]).collect(),
            ids: idx.iter().map(|&i| self.ids[i].clone()).collect(),
            dim: self.dim,
        }
    }

    /// Same rows and ids with replaced targets.
    pub fn with_targets(&self, targets: Vec<f64>) -> Result<Dataset> {
        Dataset::new(self.rows.clone(), targets, self.ids.clone())
    }

    fn check_binary(&self) -> Result<()> {
        if self.targets.iter().any(|&y| y != 0.0 && y != 1.0) {
            return Err(Error::invalid("classification targets must be 0 or 1"));
        }
        Ok(())
    }

    fn has_both_classes(&self) -> bool {
        self.targets.iter().any(|&y| y == 1.0) && self.targets.iter().any(|&y| y == 0.0)
    }
}

/// Assigns each of the `ids` to one of `k` folds. With labels, positives
/// are dealt round-robin first and negatives continue the rotation, so both
/// fold sizes and per-fold positive counts differ by at most one. The
/// assignment depends on the ids, not on their order.
pub fn kfold_split(
    ids: &[String],
    k: usize,
    stratify_labels: Option<&[bool]>,
    seed: u64,
) -> Result<Vec<usize>> {
    let m = ids.len();
    if k < 2 {
        return Err(Error::invalid(format!("need at least 2 folds, got {k}")));
    }
    if k > m {
        return Err(Error::invalid(format!("{k} folds for {m} rows")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_id: Vec<usize> = (0..m).collect();
    by_id.sort_by(|&a, &b| ids[a].cmp(&ids[b]));
    let order: Vec<usize> = match stratify_labels {
        Some(labels) => {
            if labels.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    got: labels.len(),
                });
            }
            let mut pos: Vec<usize> = by_id.iter().copied().filter(|&i| labels[i]).collect();
            let mut neg: Vec<usize> = by_id.iter().copied().filter(|&i| !labels[i]).collect();
            pos.shuffle(&mut rng);
            neg.shuffle(&mut rng);
            pos.into_iter().chain(neg).collect()
        }
        None => {
            by_id.shuffle(&mut rng);
            by_id
        }
    };
    let mut folds = vec![0; m];
    for (slot, i) in order.into_iter().enumerate() {
        folds[i] = slot % k;
    }
    Ok(folds)
}

/// `(train, test)` index lists for every fold of an assignment.
pub fn fold_indices(assignment: &[usize], k: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    (0..k)
        .map(|f| {
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..assignment.len()).partition(|&i| assignment[i] == f);
            (train, test)
        })
        .collect()
}

/// Per-column z-scoring fitted on training rows; constant columns keep scale 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Standardizer {
        let d = rows.first().map_or(0, Vec::len);
        let m = rows.len().max(1) as f64;
        let mut means = vec![0.0; d];
        for r in rows {
            for (acc, x) in means.iter_mut().zip(r) {
                *acc += x;
            }
        }
        means.iter_mut().for_each(|x| *x /= m);
        let mut scales = vec![0.0; d];
        for r in rows {
            for j in 0..d {
                scales[j] += (r[j] - means[j]).powi(2);
            }
        }
        for s in &mut scales {
            *s = (*s / m).sqrt();
            if !(*s > 1e-12) {
                *s = 1.0;
            }
        }
        Standardizer { means, scales }
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .map(|(j, x)| (x - self.means[j]) / self.scales[j])
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorKind {
    LinearRegression,
    LogisticRegression,
    DecisionTree,
    RandomForestRegressor,
    RandomForestClassifier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        value: f64,
    },
    /// Rows with `x[feature] <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub task: Task,
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict_row(&self, x: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                TreeNode::Leaf { value } => return value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, at: usize) -> usize {
            match t.nodes[at] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(t, left).max(go(t, right)),
            }
        }
        go(self, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Linear { weights: Vec<f64>, intercept: f64 },
    Logistic { weights: Vec<f64>, intercept: f64 },
    Tree(Tree),
    Forest { task: Task, trees: Vec<Tree> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPredictor {
    pub kind: PredictorKind,
    pub seed: u64,
    pub dim: usize,
    pub model: Model,
}

impl TrainedPredictor {
    pub fn is_classifier(&self) -> bool {
        matches!(
            self.kind,
            PredictorKind::LogisticRegression | PredictorKind::RandomForestClassifier
        ) || matches!(&self.model, Model::Tree(t) if t.task == Task::Classification)
    }

    /// Weights and intercept of the linear models.
    pub fn coefficients(&self) -> Option<(&[f64], f64)> {
        match &self.model {
            Model::Linear { weights, intercept } | Model::Logistic { weights, intercept } => {
                Some((weights, *intercept))
            }
            _ => None,
        }
    }
}

/// Ridge least squares with an unpenalized intercept, solved by QR on the
/// centered design stacked over `√ridge · I`.
pub fn fit_linear_regression(d: &Dataset, ridge: f64) -> Result<TrainedPredictor> {
    if d.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    if !(ridge >= 0.0) {
        return Err(Error::invalid(format!("ridge must be non-negative, got {ridge}")));
    }
    let (m, p) = (d.len(), d.dim());
    let x_mean: Vec<f64> = (0..p)
        .map(|j| d.rows.iter().map(|r| r[j]).sum::<f64>() / m as f64)
        .collect();
    let y_mean = d.targets.iter().sum::<f64>() / m as f64;

    let solve = |ridge: f64| -> (DVector<f64>, bool) {
        let mut a = DMatrix::<f64>::zeros(m + p, p);
        let mut b = DVector::<f64>::zeros(m + p);
        for (i, r) in d.rows.iter().enumerate() {
            for j in 0..p {
                a[(i, j)] = r[j] - x_mean[j];
            }
            b[i] = d.targets[i] - y_mean;
        }
        let root = ridge.sqrt();
        for j in 0..p {
            a[(m + j, j)] = root;
        }
        let qr = a.qr();
        let r = qr.r();
        let max_diag = (0..p).map(|j| r[(j, j)].abs()).fold(0.0, f64::max);
        let deficient = (0..p).any(|j| r[(j, j)].abs() <= 1e-10 * max_diag.max(1e-300));
        let qtb = qr.q().transpose() * b;
        let w = r
            .solve_upper_triangular(&qtb)
            .unwrap_or_else(|| DVector::zeros(p));
        (w, deficient)
    };

    let (mut w, deficient) = solve(ridge);
    if p > 0 && deficient {
        if ridge == 0.0 {
            log::warn!("rank-deficient design; using ridge 1e-8");
            w = solve(1e-8).0;
        } else {
            w = solve(ridge).0;
        }
    }
    let weights: Vec<f64> = w.iter().copied().collect();
    let intercept = y_mean - weights.iter().zip(&x_mean).map(|(w, x)| w * x).sum::<f64>();
    Ok(TrainedPredictor {
        kind: PredictorKind::LinearRegression,
        seed: 0,
        dim: p,
        model: Model::Linear { weights, intercept },
    })
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Regularized negative log-likelihood `Σ ln(1+e^{z_i}) - y_i z_i + (l2/2)‖w‖²`
/// with the intercept unpenalized.
pub fn logistic_loss(d: &Dataset, weights: &[f64], intercept: f64, l2: f64) -> f64 {
    let data: f64 = d
        .rows
        .iter()
        .zip(&d.targets)
        .map(|(r, &y)| {
            let z = intercept + r.iter().zip(weights).map(|(x, w)| x * w).sum::<f64>();
            softplus(z) - y * z
        })
        .sum();
    data + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Newton (IRLS) on the L2-regularized log-loss with step halving.
pub fn fit_logistic_regression(
    d: &Dataset,
    l2: f64,
    max_iter: usize,
    tol: f64,
) -> Result<TrainedPredictor> {
    d.check_binary()?;
    if !d.has_both_classes() {
        return Err(Error::SingleClass(format!("{} rows", d.len())));
    }
    let p = d.dim();
    let q = p + 1;
    // beta[0] is the intercept.
    let mut beta = DVector::<f64>::zeros(q);
    let loss_of = |b: &DVector<f64>| {
        let w: Vec<f64> = b.iter().skip(1).copied().collect();
        logistic_loss(d, &w, b[0], l2)
    };
    let mut loss = loss_of(&beta);
    for _ in 0..max_iter {
        let mut grad = DVector::<f64>::zeros(q);
        let mut hess = DMatrix::<f64>::zeros(q, q);
        for (r, &y) in d.rows.iter().zip(&d.targets) {
            let z = beta[0] + r.iter().zip(beta.iter().skip(1)).map(|(x, w)| x * w).sum::<f64>();
            let mu = sigmoid(z);
            let wgt = mu * (1.0 - mu);
            let resid = mu - y;
            grad[0] += resid;
            for j in 0..p {
                grad[j + 1] += resid * r[j];
            }
            hess[(0, 0)] += wgt;
            for j in 0..p {
                let xj = r[j] * wgt;
                hess[(0, j + 1)] += xj;
                for k in j..p {
                    hess[(j + 1, k + 1)] += xj * r[k];
                }
            }
        }
        for j in 0..p {
            grad[j + 1] += l2 * beta[j + 1];
            hess[(j + 1, j + 1)] += l2;
        }
        for a in 0..q {
            for b in 0..a {
                hess[(a, b)] = hess[(b, a)];
            }
        }
        if grad.norm() < tol {
            break;
        }
        let step = match hess.clone().cholesky() {
            Some(ch) => ch.solve(&grad),
            None => {
                let jitter = 1e-8 * (1.0 + hess.diagonal().amax());
                let shifted = hess + DMatrix::<f64>::identity(q, q) * jitter;
                match shifted.cholesky() {
                    Some(ch) => ch.solve(&grad),
                    None => grad.clone(),
                }
            }
        };
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..60 {
            let cand = &beta - &step * t;
            let cand_loss = loss_of(&cand);
            if cand_loss < loss {
                beta = cand;
                loss = cand_loss;
                improved = true;
                break;
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(TrainedPredictor {
        kind: PredictorKind::LogisticRegression,
        seed: 0,
        dim: p,
        model: Model::Logistic {
            weights: beta.iter().skip(1).copied().collect(),
            intercept: beta[0],
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features examined per split; `None` means all.
    pub max_features: Option<usize>,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 10,
            min_leaf: 1,
            max_features: None,
        }
    }
}

const SPLIT_TIE_TOL: f64 = 1e-12;

struct TreeBuilder<'a> {
    d: &'a Dataset,
    task: Task,
    params: TreeParams,
    nodes: Vec<TreeNode>,
    rng: ChaCha8Rng,
    features: Vec<usize>,
    sorted: Vec<usize>,
}

impl TreeBuilder<'_> {
    fn leaf_value(&self, idx: &[usize]) -> f64 {
        idx.iter().map(|&i| self.d.targets[i]).sum::<f64>() / idx.len() as f64
    }

    /// Impurity mass of a node from its count, sum and sum of squares:
    /// weighted Gini for 0/1 labels, sum of squared deviations otherwise.
    fn cost(&self, n: f64, s: f64, ss: f64) -> f64 {
        if n == 0.0 {
            return 0.0;
        }
        match self.task {
            Task::Classification => 2.0 * s * (n - s) / n,
            Task::Regression => (ss - s * s / n).max(0.0),
        }
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let at = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            value: self.leaf_value(&idx),
        });
        let n = idx.len();
        if depth >= self.params.max_depth || n < 2 * self.params.min_leaf.max(1) {
            return at;
        }
        let (s, ss) = idx.iter().fold((0.0, 0.0), |(s, ss), &i| {
            let y = self.d.targets[i];
            (s + y, ss + y * y)
        });
        let parent_cost = self.cost(n as f64, s, ss);
        if parent_cost <= SPLIT_TIE_TOL {
            return at;
        }

        let dim = self.d.dim();
        let k = self.params.max_features.unwrap_or(dim).clamp(1, dim.max(1));
        let mut candidates: Vec<usize> = if k < dim {
            self.features.partial_shuffle(&mut self.rng, k);
            self.features[..k].to_vec()
        } else {
            (0..dim).collect()
        };
        candidates.sort_unstable();

        let min_leaf = self.params.min_leaf.max(1);
        let mut best: Option<(f64, usize, f64)> = None;
        for &f in &candidates {
            self.sorted.clear();
            self.sorted.extend_from_slice(&idx);
            let rows = &self.d.rows;
            self.sorted
                .sort_unstable_by(|&a, &b| rows[a][f].total_cmp(&rows[b][f]).then(a.cmp(&b)));
            let (mut ls, mut lss) = (0.0, 0.0);
            for pos in 0..n - 1 {
                let i = self.sorted[pos];
                let y = self.d.targets[i];
                ls += y;
                lss += y * y;
                let nl = pos + 1;
                let nr = n - nl;
                if nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let a = rows[i][f];
                let b = rows[self.sorted[pos + 1]][f];
                if a == b {
                    continue;
                }
                let cost = self.cost(nl as f64, ls, lss) + self.cost(nr as f64, s - ls, ss - lss);
                let improves = match best {
                    None => cost < parent_cost - SPLIT_TIE_TOL,
                    Some((bc, _, _)) => cost < bc - SPLIT_TIE_TOL,
                };
                if improves {
                    let mut thr = 0.5 * (a + b);
                    if !(thr < b) {
                        thr = a;
                    }
                    best = Some((cost, f, thr));
                }
            }
        }
        let Some((_, feature, threshold)) = best else {
            return at;
        };
        let (left_idx, right_idx): (Vec<usize>, Vec<usize>) =
            idx.into_iter().partition(|&i| self.d.rows[i][feature] <= threshold);
        let left = self.build(left_idx, depth + 1);
        let right = self.build(right_idx, depth + 1);
        self.nodes[at] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        };
        at
    }
}

fn grow_tree(d: &Dataset, rows: Vec<usize>, params: TreeParams, task: Task, seed: u64) -> Tree {
    let mut builder = TreeBuilder {
        d,
        task,
        params,
        nodes: Vec::new(),
        rng: ChaCha8Rng::seed_from_u64(seed),
        features: (0..d.dim()).collect(),
        sorted: Vec::with_capacity(rows.len()),
    };
    builder.build(rows, 0);
    Tree {
        task,
        nodes: builder.nodes,
    }
}

/// CART tree; classification leaves hold the positive-class fraction.
pub fn fit_tree(
    d: &Dataset,
    max_depth: usize,
    min_leaf: usize,
    seed: u64,
    task: Task,
) -> Result<TrainedPredictor> {
    fit_tree_with(
        d,
        TreeParams {
            max_depth,
            min_leaf,
            max_features: None,
        },
        seed,
        task,
    )
}

pub fn fit_tree_with(d: &Dataset, params: TreeParams, seed: u64, task: Task) -> Result<TrainedPredictor> {
    if d.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    if task == Task::Classification {
        d.check_binary()?;
    }
    let tree = grow_tree(d, (0..d.len()).collect(), params, task, seed);
    Ok(TrainedPredictor {
        kind: PredictorKind::DecisionTree,
        seed,
        dim: d.dim(),
        model: Model::Tree(tree),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ForestParams {
    pub trees: usize,
    pub max_depth: usize,
    pub min_leaf: usize,
    /// Features per split; `None` means `⌈√d⌉`.
    pub max_features: Option<usize>,
    pub bootstrap: bool,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            trees: 50,
            max_depth: 10,
            min_leaf: 1,
            max_features: None,
            bootstrap: true,
        }
    }
}

/// Bagged CART. Tree `t` draws its bootstrap sample and feature subsets from
/// seed `seed + t`. Classifier probability is the mean of tree leaf fractions.
pub fn fit_random_forest(d: &Dataset, params: ForestParams, seed: u64, task: Task) -> Result<TrainedPredictor> {
    if d.is_empty() {
        return Err(Error::invalid("empty training set"));
    }
    if params.trees == 0 {
        return Err(Error::invalid("forest needs at least one tree"));
    }
    if task == Task::Classification {
        d.check_binary()?;
    }
    let m = d.len();
    let max_features = params
        .max_features
        .unwrap_or_else(|| (d.dim() as f64).sqrt().ceil() as usize);
    let tree_params = TreeParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        max_features: Some(max_features),
    };
    let trees = (0..params.trees)
        .map(|t| {
            let tree_seed = seed.wrapping_add(t as u64);
            let rows = if params.bootstrap {
                let mut rng = ChaCha8Rng::seed_from_u64(tree_seed ^ 0x9e37_79b9_7f4a_7c15);
                (0..m).map(|_| rng.gen_range(0..m)).collect()
            } else {
                (0..m).collect()
            };
            grow_tree(d, rows, tree_params, task, tree_seed)
        })
        .collect();
    Ok(TrainedPredictor {
        kind: match task {
            Task::Regression => PredictorKind::RandomForestRegressor,
            Task::Classification => PredictorKind::RandomForestClassifier,
        },
        seed,
        dim: d.dim(),
        model: Model::Forest { task, trees },
    })
}

/// Regression value or positive-class probability for every row.
pub fn predict(p: &TrainedPredictor, rows: &[Vec<f64>]) -> Result<Vec<f64>> {
    if let Some(r) = rows.iter().find(|r| r.len() != p.dim) {
        return Err(Error::DimensionMismatch {
            expected: p.dim,
            got: r.len(),
        });
    }
    let dot = |w: &[f64], b: f64, r: &[f64]| b + w.iter().zip(r).map(|(w, x)| w * x).sum::<f64>();
    Ok(rows
        .iter()
        .map(|r| match &p.model {
            Model::Linear { weights, intercept } => dot(weights, *intercept, r),
            Model::Logistic { weights, intercept } => sigmoid(dot(weights, *intercept, r)),
            Model::Tree(t) => t.predict_row(r),
            Model::Forest { trees, .. } => {
                trees.iter().map(|t| t.predict_row(r)).sum::<f64>() / trees.len() as f64
            }
        })
        .collect())
}

/// Class labels at the 0.5 probability threshold.
pub fn predict_labels(p: &TrainedPredictor, rows: &[Vec<f64>]) -> Result<Vec<bool>> {
    Ok(predict(p, rows)?.into_iter().map(|q| q >= 0.5).collect())
}

pub fn save_model(p: &TrainedPredictor, path: &Path) -> Result<()> {
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut buf = Vec::new();
    buf.extend_from_slice(MODEL_MAGIC);
    buf.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    ciborium::into_writer(p, &mut buf).map_err(|e| Error::ModelFormat(e.to_string()))?;
    file.write_all(&buf).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<TrainedPredictor> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    if bytes.len() < 12 || &bytes[..8] != MODEL_MAGIC {
        return Err(Error::ModelFormat("not a model file".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != MODEL_FORMAT_VERSION {
        return Err(Error::ModelFormat(format!("unsupported model version {version}")));
    }
    ciborium::from_reader(&bytes[12..]).map_err(|e| Error::ModelFormat(e.to_string()))
}
