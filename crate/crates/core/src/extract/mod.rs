//! Per-point feature extraction and the normalized feature matrix.

mod elevation;
mod kinds;
mod sources;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use elevation::{ElevationSampler, OutOfBounds};
pub use kinds::{
    additive_layer_count, density_join, edge_width, minmax_normalize, nearest_facility_distance, nearest_value,
    observation_count_join, proximity_from_distance, slope_gradient, threshold_binary, threshold_join,
    uniform_feature, Normalized,
};
pub use sources::{DataSources, PointData, Source};

use crate::catalog::{Extractor, FeatureCatalog, FeatureDef};
use crate::error::{write_file, Error, Result};
use crate::graph::SegmentizedGraph;

/// Post-processing applied to a raw column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    /// `(v - min) / (max - min)`.
    MinMax,
    /// `1 - minmax(v)`.
    Proximity,
    /// Values already lie in [0, 1].
    Identity,
}

/// Normalized values for one feature, NaN marking missing points.
#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub values: Vec<f64>,
    pub raw_stats: Option<(f64, f64)>,
    pub transform: Transform,
    pub degenerate: bool,
}

impl Column {
    fn from_normalized(n: Normalized, transform: Transform) -> Self {
        Column {
            values: n.values.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect(),
            raw_stats: Some((n.min, n.max)),
            transform,
            degenerate: n.degenerate,
        }
    }

    fn identity(values: Vec<f64>) -> Self {
        Column { values, raw_stats: None, transform: Transform::Identity, degenerate: false }
    }
}

/// Point × feature matrix of normalized values in [0, 1].
///
/// Stored column-major; missing entries are NaN.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    feature_ids: Vec<String>,
    n_points: usize,
    columns: Vec<Column>,
    warnings: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Sidecar {
    n_points: usize,
    features: Vec<SidecarFeature>,
    #[serde(default)]
    warnings: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct SidecarFeature {
    id: String,
    transform: Transform,
    raw_min: Option<f64>,
    raw_max: Option<f64>,
    degenerate: bool,
}

impl FeatureMatrix {
    /// Builds a matrix from normalized columns. `None` marks missing data.
    pub fn from_values(feature_ids: Vec<String>, columns: Vec<Vec<Option<f64>>>) -> Result<Self> {
        let cols = columns
            .into_iter()
            .map(|c| Column::identity(c.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect()))
            .collect();
        Self::from_columns(feature_ids, cols, Vec::new())
    }

    pub fn from_columns(feature_ids: Vec<String>, columns: Vec<Column>, warnings: Vec<String>) -> Result<Self> {
        if feature_ids.len() != columns.len() {
            return Err(Error::invalid("feature id count does not match column count"));
        }
        let mut seen = std::collections::BTreeSet::new();
        for id in &feature_ids {
            if !seen.insert(id) {
                return Err(Error::DuplicateId { kind: "feature", id: id.clone() });
            }
        }
        let n_points = columns.first().map_or(0, |c| c.values.len());
        for (id, c) in feature_ids.iter().zip(&columns) {
            if c.values.len() != n_points {
                return Err(Error::invalid(format!("column `{id}` has {} rows, expected {n_points}", c.values.len())));
            }
            if let Some(v) = c.values.iter().find(|v| !v.is_nan() && !(0.0..=1.0).contains(*v)) {
                return Err(Error::invalid(format!("column `{id}` holds {v}, outside [0, 1]")));
            }
        }
        Ok(Self { feature_ids, n_points, columns, warnings })
    }

    pub fn feature_ids(&self) -> &[String] {
        &self.feature_ids
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn n_features(&self) -> usize {
        self.feature_ids.len()
    }

    pub fn feature_index(&self, id: &str) -> Option<usize> {
        self.feature_ids.iter().position(|f| f == id)
    }

    pub fn column(&self, feature: usize) -> &Column {
        &self.columns[feature]
    }

    pub fn value(&self, point: usize, feature: usize) -> Option<f64> {
        let v = self.columns[feature].values[point];
        (!v.is_nan()).then_some(v)
    }

    pub fn is_missing(&self, point: usize, feature: usize) -> bool {
        self.columns[feature].values[point].is_nan()
    }

    pub fn raw_stats(&self, feature: usize) -> Option<(f64, f64)> {
        self.columns[feature].raw_stats
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Replaces the column for `id`, keeping feature order.
    pub fn with_column(&self, id: &str, column: Column) -> Result<Self> {
        let i = self.feature_index(id).ok_or_else(|| Error::UnknownId { kind: "feature", id: id.to_string() })?;
        let mut cols = self.columns.clone();
        cols[i] = column;
        Self::from_columns(self.feature_ids.clone(), cols, self.warnings.clone())
    }

    /// Writes `features.bin` (little-endian f64, column-major, NaN for
    /// missing) and the `features.json` sidecar into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let mut bytes = Vec::with_capacity(self.n_points * self.columns.len() * 8);
        for c in &self.columns {
            for v in &c.values {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        write_file(&dir.join("features.bin"), bytes)?;
        let sidecar = Sidecar {
            n_points: self.n_points,
            features: self
                .feature_ids
                .iter()
                .zip(&self.columns)
                .map(|(id, c)| SidecarFeature {
                    id: id.clone(),
                    transform: c.transform,
                    raw_min: c.raw_stats.map(|s| s.0),
                    raw_max: c.raw_stats.map(|s| s.1),
                    degenerate: c.degenerate,
                })
                .collect(),
            warnings: self.warnings.clone(),
        };
        let json = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
        write_file(&dir.join("features.json"), json + "\n")
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let meta_path = dir.join("features.json");
        let text = crate::error::read_to_string(&meta_path)?;
        let sidecar: Sidecar = serde_json::from_str(&text)
            .map_err(|e| Error::parse(&meta_path, e.line() as u64, e.to_string()))?;
        let bin_path = dir.join("features.bin");
        let bytes = std::fs::read(&bin_path).map_err(|e| Error::io(&bin_path, e))?;
        let expected = sidecar.n_points * sidecar.features.len() * 8;
        if bytes.len() != expected {
            return Err(Error::Extraction(format!(
                "{}: {} bytes, expected {expected} for {} points × {} features",
                bin_path.display(),
                bytes.len(),
                sidecar.n_points,
                sidecar.features.len()
            )));
        }
        let mut chunks = bytes.chunks_exact(8).map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")));
        let mut ids = Vec::new();
        let mut cols = Vec::new();
        for f in sidecar.features {
            let values: Vec<f64> = chunks.by_ref().take(sidecar.n_points).collect();
            let raw_stats = f.raw_min.zip(f.raw_max);
            ids.push(f.id);
            cols.push(Column { values, raw_stats, transform: f.transform, degenerate: f.degenerate });
        }
        let mut m = Self::from_columns(ids, cols, sidecar.warnings)?;
        m.n_points = sidecar.n_points;
        Ok(m)
    }
}

fn points_source<'a>(sources: &'a DataSources, feature: &str, name: &str) -> Result<&'a PointData> {
    sources.points(name).ok_or_else(|| Error::MissingSource { feature: feature.to_string() })
}

fn required_column<'a>(data: &'a PointData, feature: &str, name: &str) -> Result<&'a [f64]> {
    data.column(name)
        .ok_or_else(|| Error::Extraction(format!("source for `{feature}` lacks a `{name}` column")))
}

fn normalize_full(raw: Vec<f64>) -> Result<Normalized> {
    minmax_normalize(&raw.into_iter().map(Some).collect::<Vec<_>>())
}

/// Runs one extractor and its transform over every point.
pub fn extract_column(graph: &SegmentizedGraph, feature: &str, ex: &Extractor, sources: &DataSources) -> Result<Column> {
    ex.validate()?;
    let col = match ex {
        Extractor::Density { source, radius, class_weights } => {
            let data = points_source(sources, feature, source)?;
            let raw = density_join(graph, &data.coords, data.classes.as_deref(), class_weights, *radius)?;
            Column::from_normalized(normalize_full(raw)?, Transform::MinMax)
        }
        Extractor::ObservationMean { source } => {
            let data = points_source(sources, feature, source)?;
            let counts = required_column(data, feature, "count")?;
            let raw = observation_count_join(graph, &data.coords, counts)?;
            Column::from_normalized(minmax_normalize(&raw)?, Transform::MinMax)
        }
        Extractor::Proximity { source } => {
            let data = points_source(sources, feature, source)?;
            let dist = nearest_facility_distance(graph, &data.coords)?;
            Column::from_normalized(proximity_from_distance(&dist)?, Transform::Proximity)
        }
        Extractor::Threshold { source, threshold } => {
            let data = points_source(sources, feature, source)?;
            let channels: Vec<&[f64]> = data.columns.iter().map(|(_, v)| v.as_slice()).collect();
            Column::identity(threshold_join(graph, &data.coords, &channels, *threshold)?)
        }
        Extractor::LayerCount { sources: names, radius } => {
            let layers: Vec<&[[f64; 2]]> = names
                .iter()
                .map(|n| points_source(sources, feature, n).map(|d| d.coords.as_slice()))
                .collect::<Result<_>>()?;
            let raw = additive_layer_count(graph, &layers, *radius)?;
            Column::from_normalized(normalize_full(raw)?, Transform::MinMax)
        }
        Extractor::Slope { raster, k, d } => {
            let sampler =
                sources.raster(raster).ok_or_else(|| Error::MissingSource { feature: feature.to_string() })?;
            let xy: Vec<[f64; 2]> = graph.points().iter().map(|p| p.xy()).collect();
            let elev = sampler.sample_all(&xy)?;
            let raw = slope_gradient(graph, &elev, *k, *d)?;
            Column::from_normalized(minmax_normalize(&raw)?, Transform::MinMax)
        }
        Extractor::Uniform { value } => Column::identity(uniform_feature(graph.len(), *value)?),
        Extractor::EdgeWidth => {
            let raw = edge_width(graph);
            if raw.iter().all(Option::is_none) {
                return Err(Error::MissingSource { feature: feature.to_string() });
            }
            Column::from_normalized(minmax_normalize(&raw)?, Transform::MinMax)
        }
        Extractor::NearestValue { source } => {
            let data = points_source(sources, feature, source)?;
            let values = required_column(data, feature, "value")?;
            Column::from_normalized(normalize_full(nearest_value(graph, &data.coords, values)?)?, Transform::MinMax)
        }
    };
    Ok(col)
}

fn extractor_of(def: &FeatureDef) -> Result<&Extractor> {
    def.extractor
        .as_ref()
        .ok_or_else(|| Error::invalid(format!("active feature `{}` has no extractor", def.id)))
}

/// Extracts every active feature of `catalog` in catalog order.
///
/// `overrides` maps feature id to extractor parameter overrides.
pub fn assemble_feature_matrix(
    graph: &SegmentizedGraph,
    catalog: &FeatureCatalog,
    sources: &DataSources,
    overrides: &BTreeMap<String, BTreeMap<String, f64>>,
) -> Result<FeatureMatrix> {
    for id in overrides.keys() {
        if catalog.get(id).is_none() {
            return Err(Error::UnknownId { kind: "feature", id: id.clone() });
        }
    }
    let mut missing = Vec::new();
    for def in catalog.active() {
        for name in extractor_of(def)?.sources() {
            if !sources.contains(name) {
                missing.push(def.id.clone());
                break;
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingSource { feature: missing.join("`, `") });
    }
    let mut ids = Vec::new();
    let mut cols = Vec::new();
    let mut warnings = Vec::new();
    for def in catalog.active() {
        let mut ex = extractor_of(def)?.clone();
        if let Some(o) = overrides.get(&def.id) {
            ex = ex.with_overrides(o)?;
        }
        let col = extract_column(graph, &def.id, &ex, sources)?;
        if col.degenerate {
            let msg = format!("feature `{}` is constant over all points; normalized to 0.5", def.id);
            log::warn!("{msg}");
            warnings.push(msg);
        }
        let absent = col.values.iter().filter(|v| v.is_nan()).count();
        if absent > 0 {
            log::info!("feature `{}`: {absent} of {} points missing", def.id, graph.len());
        }
        ids.push(def.id.clone());
        cols.push(col);
    }
    FeatureMatrix::from_columns(ids, cols, warnings)
}
