use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use super::manifest::Manifest;
use crate::ahp::{read_matrix, read_weights, WeightSet};
use crate::catalog::{FeatureCatalog, Polarity};
use crate::error::{write_file, Error, Result};
use crate::extract::{extract_column, DataSources, FeatureMatrix};
use crate::geo::{feature, feature_collection, read_zones, Zone};
use crate::graph::{read_edges_csv, read_points, SamplePoint, SegmentizedGraph};
use crate::numfmt::{lossless, round_sig9, sig9};
use crate::scoring::{
    aggregate_graph, aggregate_zones, apply_profile, max_min_ratio, rank_zones, score_selected, BaseWeights,
    MissingPolicy, RobotProfile, ScoreField, ZoneAggregate, ZoneAssignment, ZoneRanking,
};

/// Everything needed to score a profile, immutable once built.
#[derive(Debug)]
pub struct Artifacts {
    pub catalog: FeatureCatalog,
    pub base: BaseWeights,
    pub matrix: FeatureMatrix,
    pub graph: SegmentizedGraph,
    pub zones: Vec<Zone>,
    pub assignment: ZoneAssignment,
    pub missing_policy: MissingPolicy,
    pub band: f64,
    /// Directory that catalog source paths are relative to.
    pub source_root: Option<PathBuf>,
    sources: OnceLock<std::result::Result<DataSources, String>>,
}

impl Artifacts {
    /// Checks that the pieces agree with each other.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        catalog: FeatureCatalog,
        base: BaseWeights,
        matrix: FeatureMatrix,
        graph: SegmentizedGraph,
        zones: Vec<Zone>,
        missing_policy: MissingPolicy,
        band: f64,
        source_root: Option<PathBuf>,
    ) -> Result<Self> {
        let active = catalog.active_ids();
        if matrix.feature_ids() != active.as_slice() {
            return Err(Error::invalid(format!(
                "feature matrix columns [{}] do not match the catalog's active features [{}]",
                matrix.feature_ids().join(", "),
                active.join(", ")
            )));
        }
        if matrix.n_points() != graph.len() {
            return Err(Error::invalid(format!(
                "feature matrix has {} rows but the graph has {} points",
                matrix.n_points(),
                graph.len()
            )));
        }
        let covered = match &base {
            BaseWeights::Matrix(m) => m.features().to_vec(),
            BaseWeights::Fixed(w) => w.features().to_vec(),
        };
        let uncovered: Vec<&str> = active.iter().filter(|id| !covered.contains(id)).map(String::as_str).collect();
        if !uncovered.is_empty() {
            return Err(Error::invalid(format!("base weights lack active features: {}", uncovered.join(", "))));
        }
        if !(band > 0.0 && band <= 0.5) {
            return Err(Error::invalid(format!("band must lie in (0, 0.5], got {band}")));
        }
        let xy: Vec<[f64; 2]> = graph.points().iter().map(SamplePoint::xy).collect();
        let assignment = ZoneAssignment::new(&xy, &zones);
        Ok(Self {
            catalog,
            base,
            matrix,
            graph,
            zones,
            assignment,
            missing_policy,
            band,
            source_root,
            sources: OnceLock::new(),
        })
    }

    /// Reads a run directory written by the pipeline.
    pub fn load(dir: &Path) -> Result<Self> {
        let need = |name: &str| {
            let p = dir.join(name);
            if p.exists() {
                Ok(p)
            } else {
                let msg = "artifact is missing; run the earlier stages first";
                Err(Error::io(&p, std::io::Error::new(std::io::ErrorKind::NotFound, msg)))
            }
        };
        let manifest = Manifest::load_or_default(dir)?;
        let catalog = FeatureCatalog::load(&need("catalog.toml")?)?;
        let base = if dir.join("matrix.csv").exists() {
            BaseWeights::Matrix(read_matrix(&dir.join("matrix.csv"))?)
        } else {
            BaseWeights::Fixed(read_weights(&need("weights.csv")?)?.0)
        };
        need("features.bin")?;
        let matrix = FeatureMatrix::read(dir)?;
        let graph = load_segmentized(dir, manifest.threshold())?;
        let zones = read_zones(&need("zones.geojson")?)?;
        let policy = manifest.missing_policy()?;
        let band = manifest.band();
        Self::new(catalog, base, matrix, graph, zones, policy, band, manifest.source_root())
    }

    fn sources(&self) -> Result<&DataSources> {
        let loaded = self.sources.get_or_init(|| {
            let root = self.source_root.as_deref().ok_or("the run did not record where its sources live")?;
            DataSources::load_for(&self.catalog, root).map_err(|e| e.to_string())
        });
        loaded.as_ref().map_err(|e| Error::Extraction(e.clone()))
    }

    /// Scores `profile` and aggregates it over the zones.
    pub fn evaluate(&self, profile: &RobotProfile) -> Result<ProfileOutcome> {
        let (weights, polarities) = apply_profile(profile, &self.base, &self.catalog)?;
        let mut matrix = std::borrow::Cow::Borrowed(&self.matrix);
        for (id, params) in &profile.extractor_param_overrides {
            let ex = self
                .catalog
                .get(id)
                .and_then(|f| f.extractor.as_ref())
                .expect("validated profile")
                .with_overrides(params)?;
            let col = extract_column(&self.graph, id, &ex, self.sources()?)?;
            matrix = std::borrow::Cow::Owned(matrix.with_column(id, col)?);
        }
        let mut field = score_selected(&matrix, &weights, &polarities, self.missing_policy)?;
        field.profile = profile.name.clone();
        let graph_score = aggregate_graph(&field)?;
        let zones = aggregate_zones(&field, &self.assignment, &self.zones)?;
        let ranking = rank_zones(&zones, self.band)?;
        let ratio = max_min_ratio(&zones);
        Ok(ProfileOutcome {
            token: profile_token(profile),
            profile: profile.clone(),
            weights,
            polarities,
            field,
            graph_score,
            zones,
            ranking,
            ratio,
            percentiles: OnceLock::new(),
        })
    }
}

/// Rebuilds the segmentized graph from `points.csv` and `edges.csv`.
pub fn load_segmentized(dir: &Path, threshold: f64) -> Result<SegmentizedGraph> {
    let edges = read_edges_csv(&dir.join("edges.csv"))?;
    let index: BTreeMap<&str, usize> = edges.iter().enumerate().map(|(i, e)| (e.id.as_str(), i)).collect();
    let points_path = dir.join("points.csv");
    let points = read_points(&points_path)?
        .into_iter()
        .map(|r| {
            let edge = *index
                .get(r.edge_id.as_str())
                .ok_or_else(|| Error::UnknownId { kind: "edge", id: r.edge_id.clone() })?;
            Ok(SamplePoint { x: r.x, y: r.y, edge, offset: r.offset })
        })
        .collect::<Result<Vec<_>>>()?;
    SegmentizedGraph::from_points(
        points,
        edges.iter().map(|e| e.id.clone()).collect(),
        edges.iter().map(|e| e.width).collect(),
        threshold,
    )
}

/// Short content hash of a profile; equal profiles share a token.
pub fn profile_token(profile: &RobotProfile) -> String {
    let digest = Sha256::digest(profile.canonical_json().as_bytes());
    hex::encode(&digest[..8])
}

/// Rounded to 9 significant digits, with -0 folded into 0.
pub fn num(x: f64) -> Value {
    let r = round_sig9(x);
    json!(if r == 0.0 { 0.0 } else { r })
}

fn opt_num(x: Option<f64>) -> Value {
    x.map_or(Value::Null, num)
}

/// A scored profile.
#[derive(Debug)]
pub struct ProfileOutcome {
    pub profile: RobotProfile,
    pub token: String,
    pub weights: WeightSet,
    pub polarities: BTreeMap<String, Polarity>,
    pub field: ScoreField,
    pub graph_score: f64,
    pub zones: Vec<ZoneAggregate>,
    pub ranking: ZoneRanking,
    pub ratio: Option<f64>,
    percentiles: OnceLock<Vec<Option<f64>>>,
}

impl ProfileOutcome {
    pub fn point_percentiles(&self) -> &[Option<f64>] {
        self.percentiles.get_or_init(|| self.field.percentiles())
    }

    /// The response document shared by the batch pipeline and the service.
    pub fn response(&self, catalog: &FeatureCatalog, policy: MissingPolicy, band: f64) -> Value {
        let ordered = catalog.in_catalog_order(&self.profile.included_features).unwrap_or_default();
        let weights: Vec<Value> = ordered
            .iter()
            .map(|id| {
                json!({
                    "feature_id": id,
                    "weight": opt_num(self.weights.get(id)),
                    "polarity": self.polarities.get(id).map_or(0.0, |p| p.sign()) as i64,
                })
            })
            .collect();
        let zones: Vec<Value> = self.zones.iter().map(zone_properties).map(Value::Object).collect();
        let ids = |list: &[ZoneAggregate]| list.iter().map(|z| json!(z.zone_id)).collect::<Vec<_>>();
        let scored = self.field.scores.iter().filter(|s| s.is_some()).count();
        json!({
            "profile": {
                "name": self.profile.name,
                "token": self.token,
                "weight_source": self.profile.weight_source.to_string(),
                "included_features": ordered,
            },
            "weights": {
                "source": self.weights.source().to_string(),
                "features": weights,
            },
            "summary": {
                "graph_score": num(self.graph_score),
                "scored_points": scored,
                "total_points": self.field.len(),
                "zone_count": self.zones.len(),
                "zones_with_data": self.zones.iter().filter(|z| z.mean_score.is_some()).count(),
                "max_min_zone_ratio": opt_num(self.ratio),
                "missing_policy": policy.name(),
                "band": num(band),
            },
            "zones": zones,
            "ranking": {
                "top": ids(&self.ranking.top),
                "bottom": ids(&self.ranking.bottom),
            },
        })
    }

    pub fn response_text(&self, catalog: &FeatureCatalog, policy: MissingPolicy, band: f64) -> String {
        serde_json::to_string_pretty(&self.response(catalog, policy, band)).expect("json") + "\n"
    }
}

pub fn zone_properties(z: &ZoneAggregate) -> Map<String, Value> {
    let mut m = Map::new();
    m.insert("zone_id".into(), json!(z.zone_id));
    m.insert("mean_score".into(), opt_num(z.mean_score));
    m.insert("point_count".into(), json!(z.point_count));
    m.insert("percentile_rank".into(), opt_num(z.percentile_rank));
    m
}

/// Zone polygons with their aggregate properties.
pub fn zones_geojson(zones: &[Zone], aggregates: &[ZoneAggregate]) -> Value {
    feature_collection(
        zones
            .iter()
            .zip(aggregates)
            .map(|(z, a)| feature(z.geometry(), zone_properties(a)))
            .collect(),
    )
}

/// `point_id,x,y,score,coverage`; unscored points leave `score` empty.
pub fn scores_csv(graph: &SegmentizedGraph, field: &ScoreField) -> String {
    let mut s = String::with_capacity(field.len() * 56);
    s.push_str("point_id,x,y,score,coverage\n");
    for (i, p) in graph.points().iter().enumerate() {
        let score = field.scores[i].map(sig9).unwrap_or_default();
        let _ = writeln!(s, "{i},{},{},{score},{}", lossless(p.x), lossless(p.y), sig9(field.coverage[i]));
    }
    s
}

/// One point feature per computation point.
pub fn scores_geojson(graph: &SegmentizedGraph, field: &ScoreField, percentiles: &[Option<f64>]) -> String {
    let mut s = String::with_capacity(field.len() * 160);
    s.push_str("{\"type\":\"FeatureCollection\",\"features\":[");
    for (i, p) in graph.points().iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let opt = |v: Option<f64>| v.map_or_else(|| "null".to_string(), sig9);
        let _ = write!(
            s,
            "\n{{\"type\":\"Feature\",\"geometry\":{{\"type\":\"Point\",\"coordinates\":[{},{}]}},\
             \"properties\":{{\"point_id\":{i},\"score\":{},\"coverage\":{},\"percentile\":{}}}}}",
            sig9(p.x),
            sig9(p.y),
            opt(field.scores[i]),
            sig9(field.coverage[i]),
            opt(percentiles[i]),
        );
    }
    s.push_str("\n]}\n");
    s
}

/// `ranking.json`: zones in the top and bottom bands.
pub fn ranking_json(outcome: &ProfileOutcome, band: f64) -> Value {
    let list = |l: &[ZoneAggregate]| l.iter().map(zone_properties).map(Value::Object).collect::<Vec<_>>();
    json!({
        "profile": outcome.profile.name,
        "band": num(band),
        "top": list(&outcome.ranking.top),
        "bottom": list(&outcome.ranking.bottom),
        "max_min_zone_ratio": opt_num(outcome.ratio),
    })
}

/// Point exports and the response document.
pub fn write_scores(dir: &Path, art: &Artifacts, outcome: &ProfileOutcome) -> Result<Vec<&'static str>> {
    write_file(&dir.join("scores.csv"), scores_csv(&art.graph, &outcome.field))?;
    write_file(
        &dir.join("scores.geojson"),
        scores_geojson(&art.graph, &outcome.field, outcome.point_percentiles()),
    )?;
    write_file(&dir.join("profile_result.json"), outcome.response_text(&art.catalog, art.missing_policy, art.band))?;
    Ok(vec!["scores.csv", "scores.geojson", "profile_result.json"])
}

pub fn write_zone_scores(dir: &Path, art: &Artifacts, outcome: &ProfileOutcome) -> Result<Vec<&'static str>> {
    let zones = serde_json::to_string(&zones_geojson(&art.zones, &outcome.zones)).expect("json");
    write_file(&dir.join("zone_scores.geojson"), zones + "\n")?;
    Ok(vec!["zone_scores.geojson"])
}

pub fn write_ranking(dir: &Path, art: &Artifacts, outcome: &ProfileOutcome) -> Result<Vec<&'static str>> {
    let text = serde_json::to_string_pretty(&ranking_json(outcome, art.band)).expect("json");
    write_file(&dir.join("ranking.json"), text + "\n")?;
    Ok(vec!["ranking.json"])
}
