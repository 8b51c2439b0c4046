//! Batch stages that read inputs, write artifacts into an output directory
//! and keep a manifest of digests and parameters. Each stage can pick up
//! the artifacts of earlier ones.

mod artifacts;
mod config;
mod manifest;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

pub use artifacts::{
    load_segmentized, num, profile_token, ranking_json, scores_csv, scores_geojson, write_ranking, write_scores,
    write_zone_scores, zone_properties, zones_geojson, Artifacts, ProfileOutcome,
};
pub use config::RunConfig;
pub use manifest::{sha256_file, InputRecord, Manifest, MANIFEST_FILE};

use crate::ahp::{
    self, features_in_votes, principal_weights, read_votes, read_weights, subset_weights, write_matrix,
    write_weights, ContingencyMatrix, TransitivityReport, WeightSet,
};
use crate::catalog::{Extractor, FeatureCatalog};
use crate::error::{write_file, Error, Result};
use crate::extract::{assemble_feature_matrix, DataSources, FeatureMatrix};
use crate::fixtures::{self, WeightColumn};
use crate::graph::{
    read_edges_csv, read_graph_geojson, read_nodes_csv, write_edges_csv, write_nodes_csv, write_points,
    SegmentizedGraph, SidewalkGraph,
};
use crate::scoring::{BaseWeights, RobotProfile};
use crate::synth::{SynthCity, SynthConfig};

/// Output of the weight stage.
#[derive(Debug, Clone)]
pub struct WeightsOutcome {
    /// Weights over the catalog's active features (or every voted feature).
    pub weights: WeightSet,
    pub base: BaseWeights,
    pub report: Option<TransitivityReport>,
}

fn stage<T>(name: &'static str, r: Result<T>) -> Result<T> {
    r.map_err(|e| e.in_stage(name))
}

/// Loads the catalog and applies the run's slope and elevation overrides.
pub fn load_catalog(cfg: &RunConfig) -> Result<(FeatureCatalog, PathBuf)> {
    let path = cfg.require(&cfg.catalog, "catalog")?;
    let catalog = FeatureCatalog::load(path)?;
    let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
    if cfg.elevation.is_none() && cfg.slope_k.is_none() && cfg.slope_d.is_none() {
        return Ok((catalog, root));
    }
    let excluded = catalog.excluded().clone();
    let features = catalog
        .features()
        .iter()
        .cloned()
        .map(|mut f| {
            if let Some(Extractor::Slope { raster, k, d }) = &mut f.extractor {
                if let Some(e) = &cfg.elevation {
                    *raster = e.to_string_lossy().into_owned();
                }
                if let Some(v) = cfg.slope_k {
                    *k = v;
                }
                if let Some(v) = cfg.slope_d {
                    *d = v;
                }
            }
            f
        })
        .collect();
    Ok((FeatureCatalog::new(features, excluded)?, root))
}

fn absolute(p: &Path) -> PathBuf {
    std::fs::canonicalize(p).unwrap_or_else(|_| p.to_path_buf())
}

/// `derive-weights`: contingency matrix, weights and transitivity audit from
/// votes, or a weight file / built-in column taken as is.
pub fn derive_weights(cfg: &RunConfig, manifest: &mut Manifest) -> Result<WeightsOutcome> {
    stage("derive-weights", derive_weights_inner(cfg, manifest))
}

fn derive_weights_inner(cfg: &RunConfig, manifest: &mut Manifest) -> Result<WeightsOutcome> {
    cfg.check_weight_input()?;
    let catalog = match &cfg.catalog {
        Some(_) => Some(load_catalog(cfg)?.0),
        None => None,
    };
    let out = &cfg.out;
    if let Some(path) = &cfg.votes {
        let votes = read_votes(path)?;
        manifest.record_input("votes", path)?;
        manifest.set("smoothing", cfg.smoothing);
        manifest.set("uncompared", cfg.uncompared);
        let features = match &catalog {
            Some(c) => c.all_ids(),
            None => features_in_votes(&votes),
        };
        let matrix = ContingencyMatrix::build(&votes, &features, cfg.smoothing, cfg.uncompared)?;
        let report = ahp::transitivity_report(&votes, &features)?;
        let weights = match &catalog {
            Some(c) if c.active_ids().len() < features.len() => {
                subset_weights(&matrix, &c.active_ids().into_iter().collect())?
            }
            _ => principal_weights(&matrix)?,
        };
        write_matrix(&out.join("matrix.csv"), &matrix)?;
        write_weights(&out.join("weights.csv"), &weights, Some(cfg.smoothing))?;
        let rep = serde_json::to_string_pretty(&report).expect("report serializes");
        write_file(&out.join("transitivity.json"), rep + "\n")?;
        manifest.record_outputs(out, &["matrix.csv", "weights.csv", "transitivity.json"])?;
        return Ok(WeightsOutcome { weights, base: BaseWeights::Matrix(matrix), report: Some(report) });
    }
    let choice = cfg.weights.as_deref().expect("checked above");
    let mut ws = if let Some(name) = choice.strip_prefix("fixture:") {
        let col = WeightColumn::from_name(name).ok_or_else(|| Error::invalid(format!("unknown weight column `{name}`")))?;
        manifest.set("weights", choice);
        fixtures::weight_set(col)
    } else {
        let path = Path::new(choice);
        manifest.record_input("weights", path)?;
        read_weights(path)?.0
    };
    if let Some(c) = &catalog {
        let active: BTreeSet<String> = c.active_ids().into_iter().collect();
        let have: BTreeSet<String> = ws.features().iter().cloned().collect();
        if have != active {
            ws = ws.rescaled_subset(&active)?;
        }
    }
    let stale = out.join("matrix.csv");
    if stale.exists() {
        std::fs::remove_file(&stale).map_err(|e| Error::io(&stale, e))?;
        manifest.outputs.remove("matrix.csv");
    }
    write_weights(&out.join("weights.csv"), &ws, None)?;
    manifest.record_outputs(out, &["weights.csv"])?;
    Ok(WeightsOutcome { weights: ws.clone(), base: BaseWeights::Fixed(ws), report: None })
}

/// `build-graph`: validates the network and writes node and edge tables.
pub fn build_graph(cfg: &RunConfig, manifest: &mut Manifest) -> Result<SidewalkGraph> {
    stage("build-graph", (|| {
        let graph = match (&cfg.graph, &cfg.nodes, &cfg.edges) {
            (Some(g), _, _) => {
                manifest.record_input("graph", g)?;
                read_graph_geojson(g)?
            }
            (None, Some(n), Some(e)) => {
                manifest.record_input("nodes", n)?;
                manifest.record_input("edges", e)?;
                SidewalkGraph::build(read_nodes_csv(n)?, read_edges_csv(e)?)?
            }
            _ => return Err(Error::invalid("a `graph` file or both `nodes` and `edges` are required")),
        };
        write_nodes_csv(&cfg.out.join("nodes.csv"), &graph)?;
        write_edges_csv(&cfg.out.join("edges.csv"), &graph)?;
        manifest.record_outputs(&cfg.out, &["nodes.csv", "edges.csv"])?;
        Ok(graph)
    })())
}

/// Reads the graph tables written by [`build_graph`].
pub fn load_graph(dir: &Path) -> Result<SidewalkGraph> {
    SidewalkGraph::build(read_nodes_csv(&dir.join("nodes.csv"))?, read_edges_csv(&dir.join("edges.csv"))?)
}

/// `segmentize`: computation points at spacing `threshold`.
pub fn segmentize(cfg: &RunConfig, graph: &SidewalkGraph, manifest: &mut Manifest) -> Result<SegmentizedGraph> {
    stage("segmentize", (|| {
        cfg.validate()?;
        let seg = SegmentizedGraph::segmentize(graph, cfg.threshold)?;
        write_points(&cfg.out.join("points.csv"), &seg)?;
        manifest.set("threshold", cfg.threshold);
        manifest.record_outputs(&cfg.out, &["points.csv"])?;
        log::info!("{} edges -> {} points at T = {}", graph.edges().len(), seg.len(), cfg.threshold);
        Ok(seg)
    })())
}

/// `extract`: the normalized feature matrix for every active feature.
pub fn extract(cfg: &RunConfig, graph: &SegmentizedGraph, manifest: &mut Manifest) -> Result<FeatureMatrix> {
    stage("extract", (|| {
        let (catalog, root) = load_catalog(cfg)?;
        manifest.record_input("catalog", cfg.catalog.as_deref().expect("loaded"))?;
        let sources = DataSources::load_for(&catalog, &root)?;
        for f in catalog.active() {
            for name in f.extractor.as_ref().map(Extractor::sources).unwrap_or_default() {
                let path = root.join(name);
                if path.exists() {
                    manifest.record_input(&format!("source:{name}"), &path)?;
                }
            }
        }
        if let Some(k) = cfg.slope_k {
            manifest.set("slope_k", k);
        }
        if let Some(d) = cfg.slope_d {
            manifest.set("slope_d", d);
        }
        let matrix = crate::par::with_workers(cfg.workers, || {
            assemble_feature_matrix(graph, &catalog, &sources, &Default::default())
        })?;
        matrix.write(&cfg.out)?;
        write_file(&cfg.out.join("catalog.toml"), catalog.to_toml())?;
        manifest.set("source_root", absolute(&root).to_string_lossy());
        manifest.catalog_active = catalog.active_ids();
        manifest.record_outputs(&cfg.out, &["features.bin", "features.json", "catalog.toml"])?;
        Ok(matrix)
    })())
}

/// The profile named by the config: a JSON file, `full` or `trashbot`.
pub fn resolve_profile(cfg: &RunConfig, catalog: &FeatureCatalog, manifest: &mut Manifest) -> Result<RobotProfile> {
    match cfg.profile.as_deref() {
        None | Some("full") => Ok(RobotProfile::full(catalog)),
        Some("trashbot") => Ok(RobotProfile::trashbot(catalog)),
        Some(path) => {
            let p = Path::new(path);
            manifest.record_input("profile", p)?;
            RobotProfile::from_json(&crate::error::read_to_string(p)?)
        }
    }
}

/// Which exports a scoring command writes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exports {
    Scores,
    Zones,
    Ranking,
    All,
}

/// `score`, `aggregate` and `rank`: evaluates the profile over the
/// artifacts in the output directory.
pub fn evaluate(cfg: &RunConfig, manifest: &mut Manifest, exports: Exports) -> Result<(Artifacts, ProfileOutcome)> {
    let name = match exports {
        Exports::Zones => "aggregate",
        Exports::Ranking => "rank",
        _ => "score",
    };
    stage(name, (|| {
        cfg.validate()?;
        let out = &cfg.out;
        if let Some(z) = &cfg.zones {
            manifest.record_input("zones", z)?;
            let zones = crate::geo::read_zones(z)?;
            let text = serde_json::to_string(&crate::geo::zones_to_geojson(&zones)).expect("json");
            write_file(&out.join("zones.geojson"), text + "\n")?;
        }
        manifest.set("missing_policy", cfg.missing_policy);
        manifest.set("band", cfg.band);
        manifest.write(out)?;
        let art = Artifacts::load(out)?;
        let profile = resolve_profile(cfg, &art.catalog, manifest)?;
        let outcome = crate::par::with_workers(cfg.workers, || art.evaluate(&profile))?;
        let mut written = Vec::new();
        if matches!(exports, Exports::Scores | Exports::All) {
            written.extend(write_scores(out, &art, &outcome)?);
        }
        if matches!(exports, Exports::Zones | Exports::All) {
            written.extend(write_zone_scores(out, &art, &outcome)?);
        }
        if matches!(exports, Exports::Ranking | Exports::All) {
            written.extend(write_ranking(out, &art, &outcome)?);
        }
        let profile_text = serde_json::to_string_pretty(&profile).expect("profile serializes") + "\n";
        write_file(&out.join("profile.json"), profile_text)?;
        written.push("profile.json");
        manifest.profile = Some(profile.name.clone());
        manifest.active_features = profile.ordered_features(&art.catalog)?;
        manifest.record_outputs(out, &written)?;
        Ok((art, outcome))
    })())
}

/// Every stage from raw inputs to rankings.
pub fn run_all(cfg: &RunConfig) -> Result<(Artifacts, ProfileOutcome)> {
    cfg.validate()?;
    let mut manifest = Manifest::load_or_default(&cfg.out)?;
    derive_weights(cfg, &mut manifest)?;
    let graph = build_graph(cfg, &mut manifest)?;
    let seg = segmentize(cfg, &graph, &mut manifest)?;
    extract(cfg, &seg, &mut manifest)?;
    let result = evaluate(cfg, &mut manifest, Exports::All)?;
    manifest.write(&cfg.out)?;
    Ok(result)
}

/// `synth-city`: writes a synthetic city and its run config into `out`.
pub fn synth_city(cfg: &SynthConfig, out: &Path) -> Result<SynthCity> {
    stage("synth-city", (|| {
        let city = SynthCity::generate(cfg)?;
        city.write(out)?;
        Ok(city)
    })())
}

/// Run config for a directory written by [`synth_city`], with outputs in `out`.
pub fn synth_run_config(city_dir: &Path, out: &Path) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(&city_dir.join("config.toml"))?;
    cfg.out = out.to_path_buf();
    Ok(cfg)
}
