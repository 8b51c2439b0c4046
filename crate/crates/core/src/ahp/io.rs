//! Vote, weight and matrix files.

use std::path::Path;

use super::{ContingencyMatrix, PairwiseVote, WeightSet, WeightSource};
use crate::error::{read_to_string, write_file, Error, Result};
use crate::numfmt::lossless;

const VOTE_HEADER: [&str; 4] = ["rater_id", "feature_a", "feature_b", "chosen"];

/// Reads `rater_id,feature_a,feature_b,chosen` records.
pub fn read_votes(path: &Path) -> Result<Vec<PairwiseVote>> {
    let text = read_to_string(path)?;
    parse_votes(&text, path)
}

pub(crate) fn parse_votes(text: &str, path: &Path) -> Result<Vec<PairwiseVote>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| Error::parse(path, 1, e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != VOTE_HEADER {
        return Err(Error::parse(path, 1, format!("expected header `{}`", VOTE_HEADER.join(","))));
    }
    let mut out = Vec::new();
    for rec in rdr.deserialize::<PairwiseVote>() {
        match rec {
            Ok(v) => {
                if v.feature_a == v.feature_b || (v.chosen != v.feature_a && v.chosen != v.feature_b) {
                    return Err(Error::parse(path, out.len() as u64 + 2, "chosen must be one of two distinct features"));
                }
                out.push(v);
            }
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                return Err(Error::parse(path, line, e.to_string()));
            }
        }
    }
    Ok(out)
}

pub fn write_votes(path: &Path, votes: &[PairwiseVote]) -> Result<()> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    wtr.write_record(VOTE_HEADER).expect("in-memory write");
    for v in votes {
        wtr.serialize(v).expect("in-memory write");
    }
    write_file(path, wtr.into_inner().expect("in-memory write"))
}

/// Writes `feature_id,weight` lines after a `#` comment header. Values are
/// written losslessly.
pub fn write_weights(path: &Path, weights: &WeightSet, smoothing: Option<f64>) -> Result<()> {
    write_file(path, format_weights(weights, smoothing))
}

pub(crate) fn format_weights(weights: &WeightSet, smoothing: Option<f64>) -> String {
    let mut s = format!("# source: {}\n", weights.source());
    if let Some(sm) = smoothing {
        s.push_str(&format!("# smoothing: {}\n", lossless(sm)));
    }
    s.push_str("feature_id,weight\n");
    for (id, w) in weights.iter() {
        s.push_str(&format!("{id},{}\n", lossless(w)));
    }
    s
}

/// Returns the weight set and the recorded smoothing, if any.
pub fn read_weights(path: &Path) -> Result<(WeightSet, Option<f64>)> {
    parse_weights(&read_to_string(path)?, path)
}

pub(crate) fn parse_weights(text: &str, path: &Path) -> Result<(WeightSet, Option<f64>)> {
    let mut source = WeightSource::File(path.display().to_string());
    let mut smoothing = None;
    let mut ids = Vec::new();
    let mut ws = Vec::new();
    let mut saw_header = false;
    for (i, line) in text.lines().enumerate() {
        let lineno = i as u64 + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((k, v)) = comment.split_once(':') {
                match k.trim() {
                    "source" => source = v.trim().parse().map_err(|e: Error| Error::parse(path, lineno, e.to_string()))?,
                    "smoothing" => {
                        smoothing = Some(v.trim().parse().map_err(|_| Error::parse(path, lineno, "bad smoothing value"))?)
                    }
                    _ => {}
                }
            }
            continue;
        }
        if !saw_header {
            if line != "feature_id,weight" {
                return Err(Error::parse(path, lineno, "expected header `feature_id,weight`"));
            }
            saw_header = true;
            continue;
        }
        let (id, w) = line
            .split_once(',')
            .ok_or_else(|| Error::parse(path, lineno, "expected `feature_id,weight`"))?;
        let w: f64 = w.trim().parse().map_err(|_| Error::parse(path, lineno, format!("bad weight `{w}`")))?;
        ids.push(id.trim().to_string());
        ws.push(w);
    }
    let set = WeightSet::new(ids, ws, source).map_err(|e| Error::parse(path, 0, e.to_string()))?;
    Ok((set, smoothing))
}

/// Square CSV: header `feature,<ids..>`, then one row per feature.
pub fn write_matrix(path: &Path, m: &ContingencyMatrix) -> Result<()> {
    let mut s = format!("# smoothing: {}\nfeature", lossless(m.smoothing()));
    for f in m.features() {
        s.push(',');
        s.push_str(f);
    }
    s.push('\n');
    for (i, f) in m.features().iter().enumerate() {
        s.push_str(f);
        for j in 0..m.len() {
            s.push(',');
            s.push_str(&lossless(m.entry(i, j)));
        }
        s.push('\n');
    }
    write_file(path, s)
}

pub fn read_matrix(path: &Path) -> Result<ContingencyMatrix> {
    let text = read_to_string(path)?;
    let mut smoothing = 0.0;
    let mut features: Option<Vec<String>> = None;
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let lineno = i as u64 + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(c) = line.strip_prefix('#') {
            if let Some(v) = c.trim().strip_prefix("smoothing:") {
                smoothing = v.trim().parse().map_err(|_| Error::parse(path, lineno, "bad smoothing"))?;
            }
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        match &features {
            None => {
                if cells.first() != Some(&"feature") {
                    return Err(Error::parse(path, lineno, "expected header starting with `feature`"));
                }
                features = Some(cells[1..].iter().map(|s| s.to_string()).collect());
            }
            Some(f) => {
                let row = entries.len() / f.len().max(1);
                if cells.len() != f.len() + 1 || f.get(row).map(String::as_str) != Some(cells[0]) {
                    return Err(Error::parse(path, lineno, "row does not match the header order"));
                }
                for c in &cells[1..] {
                    entries.push(c.parse::<f64>().map_err(|_| Error::parse(path, lineno, format!("bad entry `{c}`")))?);
                }
            }
        }
    }
    let features = features.ok_or_else(|| Error::parse(path, 0, "empty matrix file"))?;
    ContingencyMatrix::from_entries(features, entries, smoothing).map_err(|e| Error::parse(path, 0, e.to_string()))
}
