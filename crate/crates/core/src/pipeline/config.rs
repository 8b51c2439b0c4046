use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ahp::UncomparedPolicy;
use crate::error::{read_to_string, Error, Result};
use crate::scoring::MissingPolicy;

/// Settings for a batch run. Relative paths in a config file resolve
/// against the file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Pairwise vote file.
    pub votes: Option<PathBuf>,
    /// Weight file, or `fixture:<column>` for a built-in column.
    pub weights: Option<String>,
    /// Sidewalk graph as line features.
    pub graph: Option<PathBuf>,
    /// Node and edge tables, an alternative to `graph`.
    pub nodes: Option<PathBuf>,
    pub edges: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub zones: Option<PathBuf>,
    /// Replaces the raster of every slope extractor.
    pub elevation: Option<PathBuf>,
    pub threshold: f64,
    /// Override slope `k` and `d` for every slope extractor.
    pub slope_k: Option<usize>,
    pub slope_d: Option<f64>,
    pub smoothing: f64,
    pub uncompared: UncomparedPolicy,
    pub missing_policy: MissingPolicy,
    /// Profile document, or `full` / `trashbot`.
    pub profile: Option<String>,
    pub band: f64,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub workers: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            votes: None,
            weights: None,
            graph: None,
            nodes: None,
            edges: None,
            catalog: None,
            zones: None,
            elevation: None,
            threshold: 15.0,
            slope_k: None,
            slope_d: None,
            smoothing: 1.0,
            uncompared: UncomparedPolicy::NeutralFill,
            missing_policy: MissingPolicy::Renormalize,
            profile: None,
            band: 0.1,
            out: PathBuf::from("out"),
            seed: None,
            workers: None,
        }
    }
}

fn rebase(base: &Path, p: &mut Option<PathBuf>) {
    if let Some(path) = p {
        if path.is_relative() {
            *path = base.join(&*path);
        }
    }
}

fn rebase_str(base: &Path, s: &mut Option<String>) {
    if let Some(v) = s {
        let builtin = v.starts_with("fixture:") || v == "full" || v == "trashbot";
        if !builtin && Path::new(v.as_str()).is_relative() {
            *v = base.join(v.as_str()).to_string_lossy().into_owned();
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let line = e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() as u64 + 1)
                .unwrap_or(0);
            Error::parse(path, line, e.message().to_string())
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [
            &mut cfg.votes,
            &mut cfg.graph,
            &mut cfg.nodes,
            &mut cfg.edges,
            &mut cfg.catalog,
            &mut cfg.zones,
            &mut cfg.elevation,
        ] {
            rebase(base, p);
        }
        rebase_str(base, &mut cfg.weights);
        rebase_str(base, &mut cfg.profile);
        let sets_out = text.parse::<toml::Table>().is_ok_and(|t| t.contains_key("out"));
        if sets_out && cfg.out.is_relative() {
            cfg.out = base.join(&cfg.out);
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_to_string(path)?, path)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Numeric parameter checks.
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold.is_finite() && self.threshold > 0.0) {
            return Err(Error::invalid(format!("threshold must be positive, got {}", self.threshold)));
        }
        if self.slope_k == Some(0) {
            return Err(Error::invalid("slope k must be at least 1"));
        }
        if let Some(d) = self.slope_d {
            if !(d.is_finite() && d > 0.0) {
                return Err(Error::invalid(format!("slope d must be positive, got {d}")));
            }
        }
        if !(self.smoothing.is_finite() && self.smoothing >= 0.0) {
            return Err(Error::invalid(format!("smoothing must be non-negative, got {}", self.smoothing)));
        }
        if !(self.band > 0.0 && self.band <= 0.5) {
            return Err(Error::invalid(format!("band must lie in (0, 0.5], got {}", self.band)));
        }
        if self.graph.is_some() && (self.nodes.is_some() || self.edges.is_some()) {
            return Err(Error::invalid("give either `graph` or `nodes` + `edges`, not both"));
        }
        Ok(())
    }

    /// Exactly one of `votes` and `weights` must be set.
    pub fn check_weight_input(&self) -> Result<()> {
        match (&self.votes, &self.weights) {
            (Some(_), Some(_)) => Err(Error::invalid("give either `votes` or `weights`, not both")),
            (None, None) => Err(Error::invalid("one of `votes` or `weights` is required")),
            _ => Ok(()),
        }
    }

    pub fn require<'a, T>(&self, value: &'a Option<T>, name: &str) -> Result<&'a T> {
        value.as_ref().ok_or_else(|| Error::invalid(format!("`{name}` is required for this command")))
    }
}
