use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ahp::{subset_weights, ContingencyMatrix, WeightSet};
use crate::catalog::{FeatureCatalog, Polarity};
use crate::error::{Error, Result};
use crate::fixtures::{self, WeightColumn};

/// Where a profile's weights come from.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum WeightChoice {
    /// The run's own matrix or weight file.
    #[default]
    Base,
    /// A built-in published column, rescaled over the included features.
    Fixture(WeightColumn),
}

impl fmt::Display for WeightChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WeightChoice::Base => f.write_str("base"),
            WeightChoice::Fixture(c) => write!(f, "fixture:{}", c.name()),
        }
    }
}

impl FromStr for WeightChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "base" {
            return Ok(WeightChoice::Base);
        }
        s.strip_prefix("fixture:")
            .and_then(WeightColumn::from_name)
            .map(WeightChoice::Fixture)
            .ok_or_else(|| Error::invalid(format!("unknown weight source `{s}` (expected base or fixture:<column>)")))
    }
}

impl TryFrom<String> for WeightChoice {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<WeightChoice> for String {
    fn from(w: WeightChoice) -> String {
        w.to_string()
    }
}

/// Robot-specific feature selection, polarity and extractor adjustments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotProfile {
    pub name: String,
    pub included_features: BTreeSet<String>,
    #[serde(default)]
    pub polarity_overrides: BTreeMap<String, Polarity>,
    #[serde(default)]
    pub extractor_param_overrides: BTreeMap<String, BTreeMap<String, f64>>,
    #[serde(default)]
    pub weight_source: WeightChoice,
}

/// One problem with a profile document, keyed by the offending field.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldIssue {
    pub field: String,
    pub message: String,
}

impl FieldIssue {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

/// Weights a run was built with.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseWeights {
    Matrix(ContingencyMatrix),
    Fixed(WeightSet),
}

impl RobotProfile {
    /// Every active feature, catalog polarities, base weights.
    pub fn full(catalog: &FeatureCatalog) -> Self {
        Self {
            name: "full".into(),
            included_features: catalog.active_ids().into_iter().collect(),
            polarity_overrides: BTreeMap::new(),
            extractor_param_overrides: BTreeMap::new(),
            weight_source: WeightChoice::Base,
        }
    }

    /// The delivery-robot profile: active features minus traffic
    /// management, zoning, shade, intersection safety, vehicle traffic and
    /// bike lanes.
    pub fn trashbot(catalog: &FeatureCatalog) -> Self {
        let mut p = Self::full(catalog);
        p.name = "trashbot".into();
        for id in fixtures::TRASHBOT_EXCLUDED {
            p.included_features.remove(id);
        }
        p
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::invalid(format!("profile: {e}")))
    }

    /// Compact JSON with sorted keys; equal profiles give equal bytes.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("profile serializes")
    }

    /// Field-level validation against `catalog`.
    pub fn check(&self, catalog: &FeatureCatalog) -> Vec<FieldIssue> {
        let mut issues = Vec::new();
        if self.name.trim().is_empty() {
            issues.push(FieldIssue::new("name", "must not be empty"));
        }
        for id in &self.included_features {
            match catalog.get(id) {
                None => issues.push(FieldIssue::new("included_features", format!("unknown feature `{id}`"))),
                Some(_) if catalog.is_excluded(id) => issues.push(FieldIssue::new(
                    "included_features",
                    format!("feature `{id}` is excluded: {}", catalog.exclusion_reason(id).unwrap_or("")),
                )),
                Some(_) => {}
            }
        }
        if self.included_features.len() < 2 {
            issues.push(FieldIssue::new("included_features", "at least 2 features are required"));
        }
        for id in self.polarity_overrides.keys() {
            if !self.included_features.contains(id) {
                issues.push(FieldIssue::new(format!("polarity_overrides.{id}"), "feature is not included"));
            }
        }
        for (id, params) in &self.extractor_param_overrides {
            let field = format!("extractor_param_overrides.{id}");
            if !self.included_features.contains(id) {
                issues.push(FieldIssue::new(field, "feature is not included"));
                continue;
            }
            match catalog.get(id).and_then(|f| f.extractor.as_ref()) {
                Some(ex) => {
                    if let Err(e) = ex.with_overrides(params) {
                        issues.push(FieldIssue::new(field, e.to_string()));
                    }
                }
                None => issues.push(FieldIssue::new(field, "feature has no extractor")),
            }
        }
        issues
    }

    pub fn validate(&self, catalog: &FeatureCatalog) -> Result<()> {
        let issues = self.check(catalog);
        if issues.is_empty() {
            return Ok(());
        }
        let msg: Vec<String> = issues.iter().map(|i| format!("{}: {}", i.field, i.message)).collect();
        Err(Error::invalid(format!("profile `{}`: {}", self.name, msg.join("; "))))
    }

    /// Included features in catalog order.
    pub fn ordered_features(&self, catalog: &FeatureCatalog) -> Result<Vec<String>> {
        catalog.in_catalog_order(&self.included_features)
    }
}

fn require_all(available: &[String], wanted: &BTreeSet<String>) -> Result<()> {
    let missing: Vec<&str> = wanted.iter().filter(|id| !available.contains(id)).map(String::as_str).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(Error::MissingSource { feature: missing.join("`, `") })
    }
}

/// Weights and polarities for `profile`.
///
/// Matrix bases are re-solved on the included submatrix; fixed weight sets
/// are rescaled over the included features.
pub fn apply_profile(
    profile: &RobotProfile,
    base: &BaseWeights,
    catalog: &FeatureCatalog,
) -> Result<(WeightSet, BTreeMap<String, Polarity>)> {
    profile.validate(catalog)?;
    let keep = &profile.included_features;
    let weights = match (profile.weight_source, base) {
        (WeightChoice::Base, BaseWeights::Matrix(m)) => {
            require_all(m.features(), keep)?;
            subset_weights(m, keep)?
        }
        (WeightChoice::Base, BaseWeights::Fixed(ws)) => {
            require_all(ws.features(), keep)?;
            if ws.features().len() == keep.len() {
                ws.clone()
            } else {
                ws.rescaled_subset(keep)?
            }
        }
        (WeightChoice::Fixture(col), _) => {
            let ws = fixtures::weight_set(col);
            require_all(ws.features(), keep)?;
            ws.rescaled_subset(keep)?
        }
    };
    let polarities = keep
        .iter()
        .map(|id| {
            let p = profile
                .polarity_overrides
                .get(id)
                .copied()
                .or_else(|| catalog.get(id).map(|f| f.polarity))
                .expect("validated feature");
            (id.clone(), p)
        })
        .collect();
    Ok((weights, polarities))
}
