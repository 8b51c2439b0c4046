use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{read_to_string, write_file, Error, Result};
use crate::scoring::MissingPolicy;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: String,
    pub sha256: String,
}

/// Inputs, parameters and outputs of the runs in one directory.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Manifest {
    pub engine: String,
    pub inputs: BTreeMap<String, InputRecord>,
    pub parameters: BTreeMap<String, Value>,
    /// Active features of the catalog used for extraction.
    pub catalog_active: Vec<String>,
    /// Features scored by the last profile.
    pub active_features: Vec<String>,
    pub profile: Option<String>,
    pub outputs: BTreeMap<String, String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl Manifest {
    pub fn load_or_default(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let mut m = if path.exists() {
            let text = read_to_string(&path)?;
            serde_json::from_str(&text).map_err(|e| Error::parse(&path, e.line() as u64, e.to_string()))?
        } else {
            Manifest::default()
        };
        m.engine = format!("robotability-core {}", env!("CARGO_PKG_VERSION"));
        Ok(m)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        write_file(&dir.join(MANIFEST_FILE), text + "\n")
    }

    pub fn record_input(&mut self, name: &str, path: &Path) -> Result<()> {
        let sha256 = sha256_file(path)?;
        self.inputs.insert(name.to_string(), InputRecord { path: path.display().to_string(), sha256 });
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl Serialize) {
        self.parameters.insert(key.to_string(), serde_json::to_value(value).expect("parameter serializes"));
    }

    pub fn record_outputs(&mut self, dir: &Path, names: &[&str]) -> Result<()> {
        for name in names {
            self.outputs.insert(name.to_string(), sha256_file(&dir.join(name))?);
        }
        Ok(())
    }

    pub fn threshold(&self) -> f64 {
        self.parameters.get("threshold").and_then(Value::as_f64).unwrap_or(15.0)
    }

    pub fn band(&self) -> f64 {
        self.parameters.get("band").and_then(Value::as_f64).unwrap_or(0.1)
    }

    pub fn missing_policy(&self) -> Result<MissingPolicy> {
        match self.parameters.get("missing_policy").and_then(Value::as_str) {
            Some(s) => s.parse(),
            None => Ok(MissingPolicy::default()),
        }
    }

    pub fn source_root(&self) -> Option<PathBuf> {
        self.parameters.get("source_root").and_then(Value::as_str).map(PathBuf::from)
    }
}
