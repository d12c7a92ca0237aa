//! Run configuration, read from TOML.
//!
//! Every key is optional; unknown keys are rejected. Example:
//!
//! ```toml
//! graph = "graph.csv"
//! cascades = "cascades.csv"
//! output_dir = "out"
//! methods = ["A", "B", "C", "rpp", "seismic"]
//! early_n = 50
//! s0 = 300.0
//! seed = 7
//!
//! [ml]
//! folds = 10
//! classifiers = ["logistic_regression", "random_forest"]
//!
//! [ml.forest]
//! trees = 50
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::centrality::CentralityParams;
use crate::community::LouvainParams;
use crate::error::{Error, Result};
use crate::eval::{Method, MlConfig, ModelChoice};
use crate::pointprocess::RppParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub graph: Option<PathBuf>,
    pub cascades: Option<PathBuf>,
    /// Precomputed community assignment; detected with Louvain when absent.
    pub communities: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub directed: bool,
    pub methods: Vec<Method>,
    /// Adoptions observed per cascade; shorter cascades are dropped.
    pub early_n: usize,
    /// Frontier recency window; per-cascade median adoption gap when absent.
    pub t_lambda: Option<f64>,
    pub percentiles: Vec<f64>,
    /// Prediction times as multiples of the observation time.
    pub horizons: Vec<f64>,
    pub s0: f64,
    /// Kernel exponent; fitted from corpus reaction times when absent.
    pub theta: Option<f64>,
    pub bfs_cap: u32,
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub workers: usize,
    pub centrality: CentralityParams,
    pub community: LouvainParams,
    pub rpp: RppParams,
    pub ml: MlConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            graph: None,
            cascades: None,
            communities: None,
            output_dir: PathBuf::from("out"),
            directed: true,
            methods: Method::ALL.to_vec(),
            early_n: 50,
            t_lambda: None,
            percentiles: vec![50.0, 75.0, 90.0],
            horizons: vec![2.0, 4.0, 6.0, 8.0, 10.0],
            s0: 30_000.0,
            theta: None,
            bfs_cap: 5,
            seed: 0,
            workers: 0,
            centrality: CentralityParams::default(),
            community: LouvainParams::default(),
            rpp: RppParams::default(),
            ml: MlConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks value ranges; run before any heavy work.
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.methods.is_empty() {
            return bad("no methods selected".into());
        }
        let needs_rpp = self.methods.contains(&Method::Rpp);
        let min_n = if needs_rpp { 3 } else { 2 };
        if self.early_n < min_n {
            return bad(format!("early_n must be at least {min_n}, got {}", self.early_n));
        }
        if let Some(t) = self.t_lambda {
            if !(t >= 0.0) {
                return bad(format!("t_lambda must be >= 0, got {t}"));
            }
        }
        if self.percentiles.iter().any(|&p| !(p > 0.0 && p <= 100.0)) {
            return bad(format!("percentiles must be in (0, 100]: {:?}", self.percentiles));
        }
        if self.horizons.is_empty() || self.horizons.iter().any(|&h| !(h >= 1.0 && h.is_finite())) {
            return bad(format!("horizons must be finite multiples >= 1: {:?}", self.horizons));
        }
        if !(self.s0 > 0.0 && self.s0.is_finite()) {
            return bad(format!("s0 must be positive, got {}", self.s0));
        }
        if let Some(theta) = self.theta {
            if !(theta > 0.0 && theta.is_finite()) {
                return bad(format!("theta must be positive, got {theta}"));
            }
        }
        if self.bfs_cap == 0 {
            return bad("bfs_cap must be at least 1".into());
        }
        if !(self.centrality.damping > 0.0 && self.centrality.damping < 1.0) {
            return bad(format!("damping must be in (0, 1), got {}", self.centrality.damping));
        }
        if self.community.starts == 0 || self.community.iterations == 0 {
            return bad("community starts and iterations must be positive".into());
        }
        if self.rpp.restarts == 0 || self.rpp.max_iter == 0 {
            return bad("rpp restarts and max_iter must be positive".into());
        }
        let ml = &self.ml;
        if ml.folds < 2 {
            return bad(format!("ml.folds must be at least 2, got {}", ml.folds));
        }
        if ml.regressors.is_empty() || ml.classifiers.is_empty() {
            return bad("ml.regressors and ml.classifiers must be non-empty".into());
        }
        if ml.regressors.contains(&ModelChoice::LogisticRegression) {
            return bad("logistic_regression is not a regressor".into());
        }
        if ml.classifiers.contains(&ModelChoice::LinearRegression) {
            return bad("linear_regression is not a classifier".into());
        }
        if ml.forest.trees == 0 {
            return bad("ml.forest.trees must be positive".into());
        }
        if !(ml.ridge >= 0.0 && ml.logistic_l2 >= 0.0) {
            return bad("ml.ridge and ml.logistic_l2 must be non-negative".into());
        }
        Ok(())
    }
}
