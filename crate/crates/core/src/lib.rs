//! Cascade popularity prediction toolkit.
//!
//! Three families of predictors share one evaluation harness:
//!
//! - root-node centrality ([`centrality`]) fed to simple learners,
//! - structural, community and temporal features of the early stage
//!   ([`features`]) fed to supervised learners ([`ml`]),
//! - per-cascade intensity models ([`pointprocess`]): a reinforced Poisson
//!   process with log-normal relaxation and a self-exciting process with a
//!   power-law reaction kernel.
//!
//! [`eval`] labels cascades, computes regression and classification metrics
//! and times every stage; [`pipeline`] wires everything into the
//! `benchmark` and `validate` runs exposed by the command-line tool.

pub mod cascade;
pub mod centrality;
pub mod community;
pub mod config;
pub mod error;
pub mod eval;
pub mod features;
pub mod graph;
pub mod ml;
pub mod pipeline;
pub mod pointprocess;
pub mod synth;

mod io;
mod stats;

pub use cascade::{Adoption, Cascade, EarlyStage, FrontierSplit, SurfaceSet};
pub use centrality::{CentralityMeasure, CentralityTable};
pub use community::CommunityAssignment;
pub use config::RunConfig;
pub use error::{Error, Result};
pub use eval::{MetricReport, TimingReport};
pub use features::{FeatureMethod, FeatureVector};
pub use graph::{NodeId, SocialGraph};
pub use ml::{Dataset, TrainedPredictor};
pub use pointprocess::{ReactionKernel, RppFit, SeismicFit};
