use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use cascadepred::cascade::{self, early_stage};
use cascadepred::centrality::{self, CentralityMeasure, CentralityParams};
use cascadepred::community;
use cascadepred::eval::Method;
use cascadepred::features::FeatureMethod;
use cascadepred::graph;
use cascadepred::pipeline;
use cascadepred::pointprocess;
use cascadepred::synth::{self, CascadeModel, SynthConfig};
use cascadepred::RunConfig;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "cascadepred", version, about = "Cascade popularity prediction benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a graph and cascade file, report counts, optionally write normalized copies.
    Ingest(IngestArgs),
    /// Generate a synthetic graph and cascade corpus.
    Synth(SynthArgs),
    /// Detect (Louvain) or load communities and write `node_id,community_id`.
    Communities(CommunitiesArgs),
    /// Compute one centrality measure and write `node_id,value`.
    Centrality(CentralityArgs),
    /// Compute method A or B feature rows for every cascade.
    Features(FeaturesArgs),
    /// Fit a point-process model per cascade and predict at the horizons.
    FitPp(FitPpArgs),
    /// Run the full benchmark described by a config file.
    Benchmark(RunArgs),
    /// Check inputs and print a corpus census without running any method.
    Validate(RunArgs),
}

#[derive(Args)]
struct GraphOpts {
    #[arg(long)]
    graph: PathBuf,
    /// Treat every edge line as an undirected edge.
    #[arg(long)]
    undirected: bool,
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    graph: GraphOpts,
    #[arg(long)]
    cascades: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    min_size: usize,
    /// Directory for normalized `graph.csv` and `cascades.csv`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SynthModel {
    Ic,
    Seismic,
    Rpp,
}

#[derive(Args)]
struct SynthArgs {
    /// TOML file with a full synthetic configuration; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    attachment: Option<usize>,
    #[arg(long)]
    reciprocity: Option<f64>,
    #[arg(long = "count")]
    cascade_count: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    model: Option<SynthModel>,
}

#[derive(Args)]
struct CommunitiesArgs {
    #[command(flatten)]
    graph: GraphOpts,
    /// Run Louvain.
    #[arg(long, conflicts_with = "load")]
    detect: bool,
    /// Read an assignment file instead of detecting.
    #[arg(long)]
    load: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    starts: usize,
    #[arg(long, default_value_t = 10)]
    iterations: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CentralityArgs {
    #[command(flatten)]
    graph: GraphOpts,
    #[arg(long)]
    measure: CentralityMeasure,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FeaturesArgs {
    #[command(flatten)]
    graph: GraphOpts,
    #[arg(long)]
    cascades: PathBuf,
    /// Community assignment file; Louvain runs when omitted.
    #[arg(long)]
    communities: Option<PathBuf>,
    #[arg(long)]
    method: FeatureMethod,
    #[arg(long, default_value_t = 50)]
    early_n: usize,
    #[arg(long)]
    t_lambda: Option<f64>,
    #[arg(long, default_value_t = 5)]
    bfs_cap: u32,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PpModel {
    Seismic,
    Rpp,
}

#[derive(Args)]
struct FitPpArgs {
    /// Required for seismic (follower counts).
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    undirected: bool,
    #[arg(long)]
    cascades: PathBuf,
    #[arg(long, value_enum)]
    model: PpModel,
    #[arg(long, default_value_t = 30000.0)]
    s0: f64,
    #[arg(long, conflicts_with = "fit_theta")]
    theta: Option<f64>,
    /// Fit the kernel exponent from corpus reaction times.
    #[arg(long)]
    fit_theta: bool,
    #[arg(long, value_delimiter = ',', default_value = "2,4,6,8,10")]
    horizons: Vec<f64>,
    #[arg(long, default_value_t = 50)]
    early_n: usize,
    #[arg(long, default_value_t = 5)]
    restarts: usize,
    #[arg(long, default_value_t = 100)]
    max_iter: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    cascades: Option<PathBuf>,
    #[arg(long)]
    communities: Option<PathBuf>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    #[arg(long)]
    early_n: Option<usize>,
    #[arg(long)]
    s0: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($field:ident) => {
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone();
                }
            };
            ($field:ident, opt) => {
                if let Some(v) = &self.$field {
                    cfg.$field = Some(v.clone());
                }
            };
        }
        set!(graph, opt);
        set!(cascades, opt);
        set!(communities, opt);
        set!(theta, opt);
        set!(output_dir);
        set!(methods);
        set!(early_n);
        set!(s0);
        set!(seed);
        set!(workers);
        Ok(cfg)
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(std::io::BufWriter::new(
            fs::File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::BufWriter::new(std::io::stdout().lock())),
    })
}

fn load_graph(opts: &GraphOpts) -> Result<graph::SocialGraph> {
    Ok(graph::load_edge_list(&opts.graph, !opts.undirected)?)
}

fn ingest(a: &IngestArgs) -> Result<()> {
    let g = load_graph(&a.graph)?;
    let mut summary = serde_json::json!({
        "nodes": g.node_count(),
        "edges": g.edge_count(),
        "load": g.load_stats(),
    });
    let corpus = match &a.cascades {
        Some(p) => {
            let c = cascade::load_cascades(p, a.min_size)?;
            summary["cascades"] = c.len().into();
            Some(c)
        }
        None => None,
    };
    if let Some(dir) = &a.out {
        fs::create_dir_all(dir)?;
        graph::write_edge_list(&g, dir.join("graph.csv"))?;
        if let Some(c) = &corpus {
            cascade::write_cascades(c, dir.join("cascades.csv"))?;
        }
    }
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn synth_cmd(a: &SynthArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str::<SynthConfig>(&text)?
        }
        None => SynthConfig::default(),
    };
    if let Some(v) = a.nodes {
        cfg.graph.nodes = v;
    }
    if let Some(v) = a.attachment {
        cfg.graph.attachment = v;
    }
    if let Some(v) = a.reciprocity {
        cfg.graph.reciprocity = v;
    }
    if let Some(v) = a.cascade_count {
        cfg.cascade_count = v;
    }
    if let Some(v) = a.seed {
        cfg.seed = v;
    }
    if let Some(m) = a.model {
        cfg.cascade_model = match m {
            SynthModel::Ic => CascadeModel::default(),
            SynthModel::Seismic => CascadeModel::SeismicGen {
                p: 0.2,
                theta: 0.44,
                s0: 300.0,
                horizon: 1e6,
            },
            SynthModel::Rpp => CascadeModel::RppGen {
                alpha: 6.0,
                mu: 2.0,
                sigma: 1.0,
                n_events: 5_000,
                horizon: f64::INFINITY,
            },
        };
    }
    let g = synth::generate_graph(&cfg.graph, cfg.seed)?;
    let corpus = synth::generate_cascades(&g, &cfg)?;
    fs::create_dir_all(&a.out)?;
    graph::write_edge_list(&g, a.out.join("graph.csv"))?;
    cascade::write_cascades(&corpus, a.out.join("cascades.csv"))?;
    log::info!(
        "wrote {} nodes, {} edges, {} cascades to {}",
        g.node_count(),
        g.edge_count(),
        corpus.len(),
        a.out.display()
    );
    Ok(())
}

fn communities_cmd(a: &CommunitiesArgs) -> Result<()> {
    let g = load_graph(&a.graph)?;
    let assignment = match (&a.load, a.detect) {
        (Some(p), _) => community::load_assignment(p, &g)?,
        (None, true) => community::louvain(&g, a.seed, a.starts, a.iterations),
        (None, false) => bail!("pass --detect or --load FILE"),
    };
    log::info!(
        "{} communities, modularity {:.6}",
        assignment.community_count(),
        assignment.modularity()
    );
    match &a.out {
        Some(p) => community::write_assignment(&g, &assignment, p)?,
        None => {
            let mut w = output(None)?;
            writeln!(w, "node_id,community_id")?;
            for v in g.nodes() {
                writeln!(w, "{},{}", g.external_id(v), assignment.community_of(v))?;
            }
        }
    }
    Ok(())
}

fn centrality_cmd(a: &CentralityArgs) -> Result<()> {
    let g = load_graph(&a.graph)?;
    let table = centrality::compute(&g, a.measure, &CentralityParams::default())?;
    let mut w = output(a.out.as_deref())?;
    writeln!(w, "node_id,value")?;
    for v in g.nodes() {
        writeln!(w, "{},{}", g.external_id(v), table.value(v))?;
    }
    Ok(())
}

fn features_cmd(a: &FeaturesArgs) -> Result<()> {
    let g = load_graph(&a.graph)?;
    let corpus = cascade::load_cascades(&a.cascades, a.early_n)?;
    let assignment = match &a.communities {
        Some(p) => community::load_assignment(p, &g)?,
        None => community::louvain(&g, a.seed, 10, 10),
    };
    let stages = corpus
        .iter()
        .map(|c| early_stage(c, a.early_n))
        .collect::<cascadepred::Result<Vec<_>>>()?;
    let rows = pipeline::compute_features(a.method, &stages, &g, &assignment, a.t_lambda, a.bfs_cap)?;
    let mut w = output(a.out.as_deref())?;
    writeln!(w, "cascade_id,{}", a.method.names().join(","))?;
    for (es, row) in stages.iter().zip(rows) {
        let vals: Vec<String> = row.iter().map(f64::to_string).collect();
        writeln!(w, "{},{}", es.cascade_id, vals.join(","))?;
    }
    Ok(())
}

fn fit_pp_cmd(a: &FitPpArgs) -> Result<()> {
    let corpus = cascade::load_cascades(&a.cascades, a.early_n)?;
    let stages = corpus
        .iter()
        .map(|c| early_stage(c, a.early_n))
        .collect::<cascadepred::Result<Vec<_>>>()?;
    let mut w = output(a.out.as_deref())?;
    let preds: Vec<String> = a.horizons.iter().map(|h| format!("prediction@{h}")).collect();
    let fmt_row = |row: &[f64]| row.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
    match a.model {
        PpModel::Seismic => {
            let Some(gp) = &a.graph else {
                bail!("--graph is required for seismic");
            };
            let g = graph::load_edge_list(gp, !a.undirected)?;
            let theta = match (a.theta, a.fit_theta) {
                (Some(t), _) => t,
                (None, true) => pointprocess::fit_theta_powerlaw(&pointprocess::reaction_times(&corpus, &g), a.s0)?,
                (None, false) => bail!("pass --theta or --fit-theta"),
            };
            let k = pointprocess::kernel_from_theta(theta, a.s0)?;
            log::info!("kernel theta={theta:.4} s0={} c={:.4e}", k.s0, k.c);
            writeln!(w, "cascade_id,p_hat,theta,c,t_obs,{}", preds.join(","))?;
            for es in &stages {
                match pointprocess::seismic_fit(es, &g, &k) {
                    Ok(fit) => {
                        let row: Vec<f64> = a
                            .horizons
                            .iter()
                            .map(|h| pointprocess::seismic_predict(&fit, &k, h * es.t_obs))
                            .collect();
                        writeln!(w, "{},{},{theta},{},{},{}", es.cascade_id, fit.p_hat, k.c, es.t_obs, fmt_row(&row))?;
                    }
                    Err(cascadepred::Error::Untrackable(_)) => {
                        let row = vec![es.prefix.len() as f64; a.horizons.len()];
                        writeln!(w, "{},,{theta},{},{},{}", es.cascade_id, k.c, es.t_obs, fmt_row(&row))?;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
        }
        PpModel::Rpp => {
            writeln!(w, "cascade_id,alpha,mu,sigma,converged,t_obs,{}", preds.join(","))?;
            for (i, es) in stages.iter().enumerate() {
                let fit = pointprocess::rpp_fit(es, a.restarts, a.max_iter, a.seed + i as u64)?;
                let row: Vec<f64> = a
                    .horizons
                    .iter()
                    .map(|h| pointprocess::rpp_predict(&fit, h * es.t_obs))
                    .collect();
                writeln!(
                    w,
                    "{},{},{},{},{},{},{}",
                    es.cascade_id,
                    fit.alpha,
                    fit.mu,
                    fit.sigma,
                    fit.converged,
                    es.t_obs,
                    fmt_row(&row)
                )?;
            }
        }
    }
    Ok(())
}

fn benchmark_cmd(a: &RunArgs) -> Result<()> {
    let cfg = a.resolve()?;
    let report = pipeline::cmd_benchmark(&cfg)?;
    log::info!(
        "{} experiments written to {}",
        report.experiments.len(),
        cfg.output_dir.join(pipeline::REPORT_JSON).display()
    );
    Ok(())
}

fn validate_cmd(a: &RunArgs) -> Result<()> {
    let cfg = a.resolve()?;
    let rep = pipeline::cmd_validate(&cfg);
    for w in &rep.warnings {
        log::warn!("{w}");
    }
    for e in &rep.errors {
        log::error!("{e}");
    }
    println!("{}", serde_json::to_string_pretty(&rep)?);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Synth(a) => synth_cmd(a),
        Command::Communities(a) => communities_cmd(a),
        Command::Centrality(a) => centrality_cmd(a),
        Command::Features(a) => features_cmd(a),
        Command::FitPp(a) => fit_pp_cmd(a),
        Command::Benchmark(a) => benchmark_cmd(a),
        Command::Validate(a) => validate_cmd(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::FAILURE
        }
    }
}
