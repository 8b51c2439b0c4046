//! Input datasets for extractors: point tables and elevation rasters.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde_json::Value;

use super::elevation::ElevationSampler;
use crate::catalog::FeatureCatalog;
use crate::error::{read_to_string, write_file, Error, Result};
use crate::geo::{features_of, read_json};
use crate::numfmt::lossless;

/// Point locations with an optional class label and named numeric columns.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointData {
    pub coords: Vec<[f64; 2]>,
    pub classes: Option<Vec<String>>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl PointData {
    pub fn from_coords(coords: Vec<[f64; 2]>) -> Self {
        Self { coords, classes: None, columns: Vec::new() }
    }

    pub fn with_classes(coords: Vec<[f64; 2]>, classes: Vec<String>) -> Self {
        Self { coords, classes: Some(classes), columns: Vec::new() }
    }

    pub fn with_column(mut self, name: &str, values: Vec<f64>) -> Self {
        self.columns.push((name.to_string(), values));
        self
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// Delimited text with `x,y` plus any of `class` and numeric columns.
    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| Error::parse(path, 1, e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let pos = |name: &str| headers.iter().position(|h| h == name);
        let (xi, yi) = match (pos("x"), pos("y")) {
            (Some(x), Some(y)) => (x, y),
            _ => return Err(Error::parse(path, 1, "point table needs `x` and `y` columns")),
        };
        let ci = pos("class");
        let numeric: Vec<(usize, String)> = headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != xi && *i != yi && Some(*i) != ci)
            .map(|(i, h)| (i, h.clone()))
            .collect();
        let mut data = PointData {
            coords: Vec::new(),
            classes: ci.map(|_| Vec::new()),
            columns: numeric.iter().map(|(_, h)| (h.clone(), Vec::new())).collect(),
        };
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::parse(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line());
            let num = |i: usize| -> Result<f64> {
                let s = rec.get(i).unwrap_or("");
                s.parse::<f64>()
                    .map_err(|_| Error::parse(path, line, format!("column `{}`: `{s}` is not a number", headers[i])))
            };
            data.coords.push([num(xi)?, num(yi)?]);
            if let (Some(ci), Some(classes)) = (ci, data.classes.as_mut()) {
                classes.push(rec.get(ci).unwrap_or("").to_string());
            }
            for (k, (i, _)) in numeric.iter().enumerate() {
                data.columns[k].1.push(num(*i)?);
            }
        }
        Ok(data)
    }

    /// GeoJSON Point features; `class` and numeric properties are kept.
    pub fn read_geojson(path: &Path) -> Result<Self> {
        let doc = read_json(path)?;
        let feats = features_of(&doc, path)?;
        let mut data = PointData::default();
        let mut classes = Vec::new();
        let mut has_class = false;
        let mut cols: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for (i, f) in feats.iter().enumerate() {
            let g = f.get("geometry").unwrap_or(&Value::Null);
            if g.get("type").and_then(Value::as_str) != Some("Point") {
                return Err(Error::parse(path, 0, format!("feature {i} is not a Point")));
            }
            let c = g.get("coordinates").and_then(Value::as_array);
            let xy = c.and_then(|c| Some([c.first()?.as_f64()?, c.get(1)?.as_f64()?]));
            data.coords.push(xy.ok_or_else(|| Error::parse(path, 0, format!("feature {i} has bad coordinates")))?);
            let props = f.get("properties").and_then(Value::as_object);
            let class = props.and_then(|p| p.get("class")).and_then(Value::as_str);
            has_class |= class.is_some();
            classes.push(class.unwrap_or("").to_string());
            if let Some(p) = props {
                for (k, v) in p {
                    if let Some(x) = v.as_f64() {
                        cols.entry(k.clone()).or_insert_with(|| vec![f64::NAN; i]).push(x);
                    }
                }
            }
            for v in cols.values_mut() {
                v.resize(i + 1, f64::NAN);
            }
        }
        if has_class {
            data.classes = Some(classes);
        }
        data.columns = cols.into_iter().collect();
        Ok(data)
    }

    pub fn read(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("geojson") | Some("json") => Self::read_geojson(path),
            _ => Self::read_csv(path),
        }
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut header = vec!["x".to_string(), "y".to_string()];
        if self.classes.is_some() {
            header.push("class".into());
        }
        header.extend(self.columns.iter().map(|(n, _)| n.clone()));
        let mut s = header.join(",");
        s.push('\n');
        for (i, p) in self.coords.iter().enumerate() {
            s.push_str(&format!("{},{}", lossless(p[0]), lossless(p[1])));
            if let Some(c) = &self.classes {
                s.push(',');
                s.push_str(&c[i]);
            }
            for (_, v) in &self.columns {
                s.push(',');
                s.push_str(&lossless(v[i]));
            }
            s.push('\n');
        }
        write_file(path, s)
    }
}

#[derive(Debug, Clone)]
pub enum Source {
    Points(Arc<PointData>),
    Raster(Arc<ElevationSampler>),
}

/// Datasets keyed by the source name used in the catalog.
#[derive(Debug, Clone, Default)]
pub struct DataSources {
    sources: BTreeMap<String, Source>,
}

impl DataSources {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_points(&mut self, name: &str, data: PointData) {
        self.sources.insert(name.to_string(), Source::Points(Arc::new(data)));
    }

    pub fn insert_raster(&mut self, name: &str, raster: ElevationSampler) {
        self.sources.insert(name.to_string(), Source::Raster(Arc::new(raster)));
    }

    pub fn contains(&self, name: &str) -> bool {
        self.sources.contains_key(name)
    }

    pub fn points(&self, name: &str) -> Option<&PointData> {
        match self.sources.get(name) {
            Some(Source::Points(p)) => Some(p),
            _ => None,
        }
    }

    pub fn raster(&self, name: &str) -> Option<&ElevationSampler> {
        match self.sources.get(name) {
            Some(Source::Raster(r)) => Some(r),
            _ => None,
        }
    }

    /// Loads every file referenced by the catalog's active features,
    /// relative to `base`. Files that do not exist are skipped so that
    /// assembly can report which feature lacks data.
    pub fn load_for(catalog: &FeatureCatalog, base: &Path) -> Result<Self> {
        let mut out = Self::new();
        for f in catalog.active() {
            let Some(ex) = &f.extractor else { continue };
            let is_raster = matches!(ex, crate::catalog::Extractor::Slope { .. });
            for name in ex.sources() {
                if out.contains(name) {
                    continue;
                }
                let path: PathBuf = base.join(name);
                if !path.exists() {
                    continue;
                }
                if is_raster {
                    out.insert_raster(name, ElevationSampler::read(&path)?);
                } else {
                    out.insert_points(name, PointData::read(&path)?);
                }
            }
        }
        Ok(out)
    }
}
