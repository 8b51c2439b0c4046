use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use robotability_core::ahp::UncomparedPolicy;
use robotability_core::pipeline::{
    self, build_graph, derive_weights, evaluate, extract, load_graph, load_segmentized, segmentize, Exports, Manifest,
    RunConfig,
};
use robotability_core::scoring::MissingPolicy;
use robotability_core::synth::SynthConfig;
use robotability_core::{Error, Result};

#[derive(Debug, Parser)]
#[command(name = "robotability", version, about = "Sidewalk robotability scoring pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Contingency matrix, weights and transitivity report from votes.
    DeriveWeights(RunArgs),
    /// Validate the sidewalk network and write node and edge tables.
    BuildGraph(RunArgs),
    /// Place computation points along every edge.
    Segmentize(RunArgs),
    /// Build the normalized feature matrix.
    Extract(RunArgs),
    /// Score every point for a profile.
    Score(RunArgs),
    /// Per-zone means and percentile ranks.
    Aggregate(RunArgs),
    /// Top and bottom zone bands.
    Rank(RunArgs),
    /// Every stage from inputs to rankings.
    Run(RunArgs),
    /// Generate a synthetic city with a planted downtown.
    SynthCity(SynthArgs),
    /// Serve a finished run over HTTP.
    Serve(ServeArgs),
}

/// Run settings; each flag overrides the config file.
#[derive(Debug, Args)]
struct RunArgs {
    /// TOML run config.
    #[arg(long, short = 'c', env = "ROBOTABILITY_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long)]
    votes: Option<PathBuf>,
    /// Weight file or `fixture:<column>`.
    #[arg(long)]
    weights: Option<String>,
    /// Sidewalk lines as GeoJSON.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long)]
    nodes: Option<PathBuf>,
    #[arg(long)]
    edges: Option<PathBuf>,
    #[arg(long)]
    catalog: Option<PathBuf>,
    #[arg(long)]
    zones: Option<PathBuf>,
    #[arg(long)]
    elevation: Option<PathBuf>,
    /// Point spacing in meters.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    slope_k: Option<usize>,
    #[arg(long)]
    slope_d: Option<f64>,
    #[arg(long)]
    smoothing: Option<f64>,
    /// neutral-fill or error.
    #[arg(long, value_parser = parse_uncompared)]
    uncompared: Option<UncomparedPolicy>,
    /// renormalize, zero-fill or propagate-missing.
    #[arg(long)]
    missing_policy: Option<MissingPolicy>,
    /// Profile JSON path, `full` or `trashbot`.
    #[arg(long)]
    profile: Option<String>,
    /// Fraction of zones in each ranking band.
    #[arg(long)]
    band: Option<f64>,
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for extraction and scoring.
    #[arg(long, short = 'j')]
    workers: Option<usize>,
}

fn parse_uncompared(s: &str) -> std::result::Result<UncomparedPolicy, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|_| format!("unknown policy `{s}`"))
}

impl RunArgs {
    fn resolve(self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = self.$f { cfg.$f = Some(v); } )* };
        }
        // a weight-input flag replaces whichever input the file named
        if self.votes.is_some() {
            cfg.weights = None;
        }
        if self.weights.is_some() {
            cfg.votes = None;
        }
        set!(votes, weights, graph, nodes, edges, catalog, zones, elevation, slope_k, slope_d, profile, seed, workers);
        if let Some(v) = self.threshold {
            cfg.threshold = v;
        }
        if let Some(v) = self.smoothing {
            cfg.smoothing = v;
        }
        if let Some(v) = self.uncompared {
            cfg.uncompared = v;
        }
        if let Some(v) = self.missing_policy {
            cfg.missing_policy = v;
        }
        if let Some(v) = self.band {
            cfg.band = v;
        }
        if let Some(v) = self.out {
            cfg.out = v;
        }
        cfg.validate()?;
        std::fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// TOML generation parameters.
    #[arg(long, short = 'c')]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    blocks_x: Option<usize>,
    #[arg(long)]
    blocks_y: Option<usize>,
    /// Block edge in meters.
    #[arg(long)]
    block: Option<f64>,
    #[arg(long)]
    zone_blocks: Option<usize>,
    #[arg(long, short = 'o', default_value = "city")]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// Output directory of a finished run.
    #[arg(long, env = "ROBOTABILITY_ARTIFACT_DIR", default_value = "out")]
    artifacts: PathBuf,
    #[arg(long, env = "ROBOTABILITY_ADDR", default_value = robotability_service::DEFAULT_ADDR)]
    addr: String,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.category().exit_code() as u8)
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::DeriveWeights(a) => {
            let cfg = a.resolve()?;
            with_manifest(&cfg, |m| {
                let w = derive_weights(&cfg, m)?;
                print_weights(&w.weights);
                if let Some(r) = &w.report {
                    println!(
                        "transitivity: {} of {} pooled triples cyclic ({:.4})",
                        r.inter_rater_violations, r.triples_evaluated, r.violation_fraction
                    );
                }
                Ok(())
            })
        }
        Command::BuildGraph(a) => {
            let cfg = a.resolve()?;
            with_manifest(&cfg, |m| {
                let g = build_graph(&cfg, m)?;
                println!("{} nodes, {} edges", g.nodes().len(), g.edges().len());
                Ok(())
            })
        }
        Command::Segmentize(a) => {
            let cfg = a.resolve()?;
            with_manifest(&cfg, |m| {
                let g = graph_for(&cfg, m)?;
                let seg = segmentize(&cfg, &g, m)?;
                println!("{} points", seg.len());
                Ok(())
            })
        }
        Command::Extract(a) => {
            let cfg = a.resolve()?;
            with_manifest(&cfg, |m| {
                let seg = if cfg.out.join("points.csv").exists() && !has_graph_input(&cfg) {
                    load_segmentized(&cfg.out, m.threshold())?
                } else {
                    let g = graph_for(&cfg, m)?;
                    segmentize(&cfg, &g, m)?
                };
                let fm = extract(&cfg, &seg, m)?;
                println!("{} points x {} features", fm.n_points(), fm.n_features());
                for w in fm.warnings() {
                    log::warn!("{w}");
                }
                Ok(())
            })
        }
        Command::Score(a) => score_like(a, Exports::Scores),
        Command::Aggregate(a) => score_like(a, Exports::Zones),
        Command::Rank(a) => score_like(a, Exports::Ranking),
        Command::Run(a) => {
            let cfg = a.resolve()?;
            let (_, outcome) = pipeline::run_all(&cfg)?;
            print_summary(&outcome);
            Ok(())
        }
        Command::SynthCity(a) => {
            let mut sc = match &a.config {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                    toml::from_str::<SynthConfig>(&text).map_err(|e| Error::parse(p, 0, e.message().to_string()))?
                }
                None => SynthConfig::default(),
            };
            if let Some(v) = a.seed {
                sc.seed = v;
            }
            if let Some(v) = a.blocks_x {
                sc.blocks_x = v;
            }
            if let Some(v) = a.blocks_y {
                sc.blocks_y = v;
            }
            if let Some(v) = a.block {
                sc.block = v;
            }
            if let Some(v) = a.zone_blocks {
                sc.zone_blocks = v;
            }
            let city = pipeline::synth_city(&sc, &a.out)?;
            println!(
                "{} nodes, {} edges, {} zones, {} votes -> {}",
                city.graph.nodes().len(),
                city.graph.edges().len(),
                city.zones.len(),
                city.votes.len(),
                a.out.display()
            );
            Ok(())
        }
        Command::Serve(a) => {
            let state = robotability_service::AppState::load(&a.artifacts).map_err(service_err)?;
            let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io(Path::new(&a.addr), e))?;
            rt.block_on(robotability_service::serve(&a.addr, state)).map_err(service_err)
        }
    }
}

fn service_err(e: robotability_service::ServiceError) -> Error {
    match e {
        robotability_service::ServiceError::Load(inner) => inner,
        other => Error::invalid(other.to_string()),
    }
}

fn has_graph_input(cfg: &RunConfig) -> bool {
    cfg.graph.is_some() || (cfg.nodes.is_some() && cfg.edges.is_some())
}

/// The configured network, or the tables a previous `build-graph` wrote.
fn graph_for(cfg: &RunConfig, m: &mut Manifest) -> Result<robotability_core::graph::SidewalkGraph> {
    if has_graph_input(cfg) {
        build_graph(cfg, m)
    } else {
        load_graph(&cfg.out)
    }
}

fn with_manifest(cfg: &RunConfig, f: impl FnOnce(&mut Manifest) -> Result<()>) -> Result<()> {
    let mut m = Manifest::load_or_default(&cfg.out)?;
    f(&mut m)?;
    m.write(&cfg.out)
}

fn score_like(a: RunArgs, exports: Exports) -> Result<()> {
    let cfg = a.resolve()?;
    with_manifest(&cfg, |m| {
        let (_, outcome) = evaluate(&cfg, m, exports)?;
        print_summary(&outcome);
        Ok(())
    })
}

fn print_weights(w: &robotability_core::ahp::WeightSet) {
    let width = w.features().iter().map(String::len).max().unwrap_or(7).max(7);
    println!("{:<width$}  weight", "feature");
    for i in w.ranking() {
        println!("{:<width$}  {:.4}", w.features()[i], w.weights()[i]);
    }
}

fn print_summary(o: &pipeline::ProfileOutcome) {
    let scored = o.field.scores.iter().filter(|s| s.is_some()).count();
    println!("profile {} ({})", o.profile.name, o.token);
    println!("graph score {:.6} over {} of {} points", o.graph_score, scored, o.field.scores.len());
    let ids = |v: &[robotability_core::scoring::ZoneAggregate]| {
        v.iter().map(|z| z.zone_id.as_str()).collect::<Vec<_>>().join(", ")
    };
    println!("top: {}", ids(&o.ranking.top));
    println!("bottom: {}", ids(&o.ranking.bottom));
    if let Some(r) = o.ratio {
        println!("max/min zone ratio {r:.4}");
    }
}
