//! Feature definitions and the feature catalog.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{read_to_string, Error, Result};

/// Default match radius for spatial joins, in meters.
pub const DEFAULT_JOIN_RADIUS: f64 = 7.5;
/// Default neighbor cap for the slope gradient.
pub const DEFAULT_SLOPE_K: usize = 8;
/// Default neighbor distance for the slope gradient, in meters.
pub const DEFAULT_SLOPE_D: f64 = 30.0;

/// Direction of a feature's contribution to the score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Polarity {
    Positive,
    Negative,
}

impl Polarity {
    pub fn sign(self) -> f64 {
        match self {
            Polarity::Positive => 1.0,
            Polarity::Negative => -1.0,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Polarity::Positive => Polarity::Negative,
            Polarity::Negative => Polarity::Positive,
        }
    }

    pub fn from_i64(v: i64) -> Option<Self> {
        match v {
            1 => Some(Polarity::Positive),
            -1 => Some(Polarity::Negative),
            _ => None,
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Polarity::Positive => "+1",
            Polarity::Negative => "-1",
        })
    }
}

impl Serialize for Polarity {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_i8(self.sign() as i8)
    }
}

impl<'de> Deserialize<'de> for Polarity {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Polarity::from_i64(v)
            .ok_or_else(|| serde::de::Error::custom(format!("polarity must be +1 or -1, got {v}")))
    }
}

fn default_radius() -> f64 {
    DEFAULT_JOIN_RADIUS
}

fn default_k() -> usize {
    DEFAULT_SLOPE_K
}

fn default_d() -> f64 {
    DEFAULT_SLOPE_D
}

/// How a feature's raw per-point value is computed.
///
/// Every extractor orients its raw value so that more of the phenomenon
/// gives a larger number; the feature's polarity carries the direction.
/// Source paths are resolved relative to the catalog file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Extractor {
    /// Sum of per-class weights of items within `radius` (file `x,y,class`).
    /// An empty weight table weighs every item 1.
    Density {
        source: String,
        #[serde(default = "default_radius")]
        radius: f64,
        #[serde(default)]
        class_weights: BTreeMap<String, f64>,
    },
    /// Mean of observation counts joined to their nearest point (file `x,y,count`).
    ObservationMean { source: String },
    /// Closeness to the nearest facility, `1 - minmax(distance)` (file `x,y`).
    Proximity { source: String },
    /// 1 when every channel of the nearest measurement strictly exceeds
    /// `threshold` (file `x,y,v1[,v2..]`).
    Threshold { source: String, threshold: f64 },
    /// Number of layers with at least one item within `radius` (files `x,y`).
    LayerCount {
        sources: Vec<String>,
        #[serde(default = "default_radius")]
        radius: f64,
    },
    /// Mean absolute slope to the `k` nearest points within `d` meters.
    Slope {
        raster: String,
        #[serde(default = "default_k")]
        k: usize,
        #[serde(default = "default_d")]
        d: f64,
    },
    /// Same value at every point; not normalized.
    Uniform { value: f64 },
    /// Width attribute of the point's source edge.
    EdgeWidth,
    /// Value of the nearest sample (file `x,y,value`).
    NearestValue { source: String },
}

impl Extractor {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Extractor::Density { .. } => "density",
            Extractor::ObservationMean { .. } => "observation_mean",
            Extractor::Proximity { .. } => "proximity",
            Extractor::Threshold { .. } => "threshold",
            Extractor::LayerCount { .. } => "layer_count",
            Extractor::Slope { .. } => "slope",
            Extractor::Uniform { .. } => "uniform",
            Extractor::EdgeWidth => "edge_width",
            Extractor::NearestValue { .. } => "nearest_value",
        }
    }

    /// Source files this extractor reads, relative to the catalog.
    pub fn sources(&self) -> Vec<&str> {
        match self {
            Extractor::Density { source, .. }
            | Extractor::ObservationMean { source }
            | Extractor::Proximity { source }
            | Extractor::Threshold { source, .. }
            | Extractor::NearestValue { source } => vec![source.as_str()],
            Extractor::LayerCount { sources, .. } => sources.iter().map(String::as_str).collect(),
            Extractor::Slope { raster, .. } => vec![raster.as_str()],
            Extractor::Uniform { .. } | Extractor::EdgeWidth => Vec::new(),
        }
    }

    /// Applies numeric parameter overrides (`radius`, `k`, `d`, `threshold`,
    /// `value`). Keys that the kind does not take are rejected.
    pub fn with_overrides(&self, overrides: &BTreeMap<String, f64>) -> Result<Extractor> {
        let mut out = self.clone();
        for (key, &v) in overrides {
            let ok = match (&mut out, key.as_str()) {
                (Extractor::Density { radius, .. }, "radius")
                | (Extractor::LayerCount { radius, .. }, "radius") => {
                    *radius = v;
                    true
                }
                (Extractor::Slope { k, .. }, "k") => {
                    if v.fract() != 0.0 || v < 1.0 {
                        return Err(Error::invalid(format!("slope k must be a positive integer, got {v}")));
                    }
                    *k = v as usize;
                    true
                }
                (Extractor::Slope { d, .. }, "d") => {
                    *d = v;
                    true
                }
                (Extractor::Threshold { threshold, .. }, "threshold") => {
                    *threshold = v;
                    true
                }
                (Extractor::Uniform { value }, "value") => {
                    *value = v;
                    true
                }
                _ => false,
            };
            if !ok {
                return Err(Error::invalid(format!(
                    "parameter `{key}` does not apply to extractor kind `{}`",
                    self.kind_name()
                )));
            }
        }
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{name} must be a positive finite number, got {v}")))
            }
        };
        match self {
            Extractor::Density { radius, class_weights, .. } => {
                positive("radius", *radius)?;
                for (class, w) in class_weights {
                    if !w.is_finite() || *w < 0.0 {
                        return Err(Error::invalid(format!("class weight for `{class}` must be non-negative, got {w}")));
                    }
                }
                Ok(())
            }
            Extractor::LayerCount { radius, sources } => {
                if sources.is_empty() {
                    return Err(Error::invalid("layer_count needs at least one source"));
                }
                positive("radius", *radius)
            }
            Extractor::Slope { k, d, .. } => {
                if *k < 1 {
                    return Err(Error::invalid("slope k must be at least 1"));
                }
                positive("slope d", *d)
            }
            Extractor::Uniform { value } => {
                if (0.0..=1.0).contains(value) {
                    Ok(())
                } else {
                    Err(Error::invalid(format!("uniform value must lie in [0, 1], got {value}")))
                }
            }
            Extractor::Threshold { threshold, .. } => {
                if threshold.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid("threshold must be finite"))
                }
            }
            _ => Ok(()),
        }
    }
}

/// One robotability indicator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDef {
    pub id: String,
    pub display_name: String,
    pub polarity: Polarity,
    /// `None` only for excluded features.
    pub extractor: Option<Extractor>,
}

/// Ordered feature list plus the subset excluded from scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureCatalog {
    features: Vec<FeatureDef>,
    excluded: BTreeMap<String, String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CatalogFile {
    #[serde(rename = "feature")]
    features: Vec<CatalogEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CatalogEntry {
    id: String,
    name: String,
    polarity: Polarity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    excluded: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    extractor: Option<Extractor>,
}

impl FeatureCatalog {
    pub fn new(features: Vec<FeatureDef>, excluded: BTreeMap<String, String>) -> Result<Self> {
        let mut seen = HashSet::new();
        for f in &features {
            if f.id.is_empty() {
                return Err(Error::invalid("feature id must not be empty"));
            }
            if !seen.insert(f.id.as_str()) {
                return Err(Error::DuplicateId { kind: "feature", id: f.id.clone() });
            }
        }
        for id in excluded.keys() {
            if !seen.contains(id.as_str()) {
                return Err(Error::UnknownId { kind: "feature", id: id.clone() });
            }
        }
        for f in &features {
            if excluded.contains_key(&f.id) {
                continue;
            }
            match &f.extractor {
                Some(e) => e.validate().map_err(|err| Error::invalid(format!("feature `{}`: {err}", f.id)))?,
                None => {
                    return Err(Error::invalid(format!(
                        "active feature `{}` has no extractor; register one or exclude it",
                        f.id
                    )))
                }
            }
        }
        Ok(Self { features, excluded })
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let file: CatalogFile =
            toml::from_str(text).map_err(|e| Error::invalid(format!("catalog: {e}")))?;
        let mut excluded = BTreeMap::new();
        let features = file
            .features
            .into_iter()
            .map(|e| {
                if let Some(reason) = e.excluded {
                    excluded.insert(e.id.clone(), reason);
                }
                FeatureDef {
                    id: e.id,
                    display_name: e.name,
                    polarity: e.polarity,
                    extractor: e.extractor,
                }
            })
            .collect();
        Self::new(features, excluded)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        let file = CatalogFile {
            features: self
                .features
                .iter()
                .map(|f| CatalogEntry {
                    id: f.id.clone(),
                    name: f.display_name.clone(),
                    polarity: f.polarity,
                    excluded: self.excluded.get(&f.id).cloned(),
                    extractor: f.extractor.clone(),
                })
                .collect(),
        };
        toml::to_string(&file).expect("catalog serializes")
    }

    /// All features, active and excluded, in catalog order.
    pub fn features(&self) -> &[FeatureDef] {
        &self.features
    }

    pub fn get(&self, id: &str) -> Option<&FeatureDef> {
        self.features.iter().find(|f| f.id == id)
    }

    pub fn is_excluded(&self, id: &str) -> bool {
        self.excluded.contains_key(id)
    }

    pub fn exclusion_reason(&self, id: &str) -> Option<&str> {
        self.excluded.get(id).map(String::as_str)
    }

    pub fn excluded(&self) -> &BTreeMap<String, String> {
        &self.excluded
    }

    pub fn active(&self) -> impl Iterator<Item = &FeatureDef> {
        self.features.iter().filter(|f| !self.excluded.contains_key(&f.id))
    }

    pub fn active_ids(&self) -> Vec<String> {
        self.active().map(|f| f.id.clone()).collect()
    }

    pub fn all_ids(&self) -> Vec<String> {
        self.features.iter().map(|f| f.id.clone()).collect()
    }

    /// Orders `ids` by catalog position, rejecting ids not in the catalog.
    pub fn in_catalog_order(&self, ids: &BTreeSet<String>) -> Result<Vec<String>> {
        for id in ids {
            if self.get(id).is_none() {
                return Err(Error::UnknownId { kind: "feature", id: id.clone() });
            }
        }
        Ok(self
            .features
            .iter()
            .filter(|f| ids.contains(&f.id))
            .map(|f| f.id.clone())
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[[feature]]
id = "ped"
name = "Pedestrian density"
polarity = -1
extractor = { kind = "observation_mean", source = "ped.csv" }

[[feature]]
id = "gps"
name = "GPS signal strength"
polarity = 1
extractor = { kind = "uniform", value = 1.0 }

[[feature]]
id = "light"
name = "Street lighting"
polarity = 1
excluded = "data not available"
"#;

    #[test]
    fn parses_and_round_trips() {
        let cat = FeatureCatalog::from_toml(SAMPLE).unwrap();
        assert_eq!(cat.features().len(), 3);
        assert_eq!(cat.active_ids(), vec!["ped", "gps"]);
        assert_eq!(cat.exclusion_reason("light"), Some("data not available"));
        assert_eq!(cat.get("ped").unwrap().polarity, Polarity::Negative);
        let again = FeatureCatalog::from_toml(&cat.to_toml()).unwrap();
        assert_eq!(again, cat);
    }

    #[test]
    fn rejects_bad_polarity_and_duplicates() {
        let bad = SAMPLE.replace("polarity = -1", "polarity = 0");
        assert!(FeatureCatalog::from_toml(&bad).is_err());
        let dup = SAMPLE.replace("id = \"gps\"", "id = \"ped\"");
        assert!(matches!(FeatureCatalog::from_toml(&dup), Err(Error::DuplicateId { .. })));
    }

    #[test]
    fn active_feature_needs_extractor() {
        let bad = SAMPLE.replace("excluded = \"data not available\"", "");
        assert!(FeatureCatalog::from_toml(&bad).is_err());
    }

    #[test]
    fn overrides_apply_by_kind() {
        let e = Extractor::Slope { raster: "dem.asc".into(), k: 8, d: 30.0 };
        let mut o = BTreeMap::new();
        o.insert("k".to_string(), 4.0);
        o.insert("d".to_string(), 20.0);
        assert_eq!(
            e.with_overrides(&o).unwrap(),
            Extractor::Slope { raster: "dem.asc".into(), k: 4, d: 20.0 }
        );
        o.insert("radius".to_string(), 3.0);
        assert!(e.with_overrides(&o).is_err());
        let u = Extractor::Uniform { value: 1.0 };
        let o = BTreeMap::from([("value".to_string(), 1.2)]);
        assert!(u.with_overrides(&o).is_err());
    }
}
