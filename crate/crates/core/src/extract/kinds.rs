//! Raw per-point extractors. Each returns one value per graph point, with
//! `None` marking missing data where the kind allows it.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::graph::{GridIndex, SegmentizedGraph};
use crate::par;

/// Result of min-max scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct Normalized {
    pub values: Vec<Option<f64>>,
    pub min: f64,
    pub max: f64,
    /// Constant input; every present value was mapped to 0.5.
    pub degenerate: bool,
}

/// `(v - min) / (max - min)` over present values.
pub fn minmax_normalize(raw: &[Option<f64>]) -> Result<Normalized> {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    let mut present = 0usize;
    for v in raw.iter().flatten() {
        if !v.is_finite() {
            return Err(Error::Extraction(format!("non-finite raw value {v}")));
        }
        min = min.min(*v);
        max = max.max(*v);
        present += 1;
    }
    if present == 0 {
        return Err(Error::Extraction("every value is missing; nothing to normalize".into()));
    }
    let degenerate = min == max;
    let range = max - min;
    let values = raw
        .iter()
        .map(|v| v.map(|v| if degenerate { 0.5 } else { ((v - min) / range).clamp(0.0, 1.0) }))
        .collect();
    Ok(Normalized { values, min, max, degenerate })
}

fn item_index(items: &[[f64; 2]], radius: f64) -> Result<Option<GridIndex>> {
    if items.is_empty() {
        return Ok(None);
    }
    GridIndex::new(items.to_vec(), radius).map(Some)
}

fn check_radius(radius: f64) -> Result<()> {
    if radius.is_finite() && radius > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("join radius must be positive, got {radius}")))
    }
}

/// Sum of class weights of the items within `radius` of each point. With
/// an empty weight table every item counts 1.
pub fn density_join(
    graph: &SegmentizedGraph,
    items: &[[f64; 2]],
    classes: Option<&[String]>,
    class_weights: &BTreeMap<String, f64>,
    radius: f64,
) -> Result<Vec<f64>> {
    check_radius(radius)?;
    let weights: Vec<f64> = if class_weights.is_empty() {
        vec![1.0; items.len()]
    } else {
        let classes = classes.ok_or_else(|| Error::invalid("weighted density needs a `class` column"))?;
        if classes.len() != items.len() {
            return Err(Error::invalid("class column length does not match item count"));
        }
        classes
            .iter()
            .map(|c| {
                class_weights
                    .get(c)
                    .copied()
                    .ok_or_else(|| Error::invalid(format!("item class `{c}` has no weight")))
            })
            .collect::<Result<_>>()?
    };
    let Some(index) = item_index(items, radius)? else {
        return Ok(vec![0.0; graph.len()]);
    };
    Ok(par::map_slice(graph.points(), |p| {
        let mut hits: Vec<usize> = Vec::new();
        index.for_each_within(p.xy(), radius, |id, _| hits.push(id));
        hits.sort_unstable();
        hits.iter().map(|&i| weights[i]).sum()
    }))
}

/// Joins each observation to its nearest point and averages the counts
/// per point. Points without observations are missing.
pub fn observation_count_join(graph: &SegmentizedGraph, coords: &[[f64; 2]], counts: &[f64]) -> Result<Vec<Option<f64>>> {
    if coords.len() != counts.len() {
        return Err(Error::invalid("observation coordinates and counts differ in length"));
    }
    if let Some(c) = counts.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
        return Err(Error::invalid(format!("observation counts must be non-negative, got {c}")));
    }
    let nearest = par::map_slice(coords, |&q| graph.nearest_point(q));
    let mut sum = vec![0.0; graph.len()];
    let mut n = vec![0u32; graph.len()];
    for (&p, &c) in nearest.iter().zip(counts) {
        sum[p] += c;
        n[p] += 1;
    }
    Ok(sum.into_iter().zip(n).map(|(s, k)| (k > 0).then(|| s / k as f64)).collect())
}

/// Euclidean distance from each point to the nearest facility.
pub fn nearest_facility_distance(graph: &SegmentizedGraph, facilities: &[[f64; 2]]) -> Result<Vec<f64>> {
    let index = item_index(facilities, graph.threshold())?
        .ok_or_else(|| Error::Extraction("facility list is empty".into()))?;
    Ok(par::map_slice(graph.points(), |p| index.nearest_with_distance(p.xy()).1))
}

/// `1 - minmax(distance)`: 1 at the closest point, 0 at the farthest.
pub fn proximity_from_distance(distance: &[f64]) -> Result<Normalized> {
    let raw: Vec<Option<f64>> = distance.iter().map(|d| Some(*d)).collect();
    let mut n = minmax_normalize(&raw)?;
    if !n.degenerate {
        for v in n.values.iter_mut().flatten() {
            *v = 1.0 - *v;
        }
    }
    Ok(n)
}

/// 1 when every channel strictly exceeds `threshold`, else 0.
pub fn threshold_binary(channels: &[f64], threshold: f64) -> f64 {
    if !channels.is_empty() && channels.iter().all(|v| *v > threshold) {
        1.0
    } else {
        0.0
    }
}

/// Applies [`threshold_binary`] to the measurement nearest each point.
pub fn threshold_join(
    graph: &SegmentizedGraph,
    coords: &[[f64; 2]],
    channels: &[&[f64]],
    threshold: f64,
) -> Result<Vec<f64>> {
    if channels.is_empty() {
        return Err(Error::invalid("threshold extractor needs at least one value column"));
    }
    if channels.iter().any(|c| c.len() != coords.len()) {
        return Err(Error::invalid("measurement columns differ in length"));
    }
    let index = item_index(coords, graph.threshold())?
        .ok_or_else(|| Error::Extraction("measurement set is empty".into()))?;
    Ok(par::map_slice(graph.points(), |p| {
        let m = index.nearest(p.xy());
        let vals: Vec<f64> = channels.iter().map(|c| c[m]).collect();
        threshold_binary(&vals, threshold)
    }))
}

/// Number of layers with at least one item within `radius`.
pub fn additive_layer_count(graph: &SegmentizedGraph, layers: &[&[[f64; 2]]], radius: f64) -> Result<Vec<f64>> {
    check_radius(radius)?;
    let indices: Vec<GridIndex> = layers
        .iter()
        .filter_map(|l| item_index(l, radius).transpose())
        .collect::<Result<_>>()?;
    Ok(par::map_slice(graph.points(), |p| {
        indices.iter().filter(|idx| idx.any_within(p.xy(), radius)).count() as f64
    }))
}

/// Mean absolute slope from each point to its `k` nearest neighbors within
/// `d` meters. Points with no neighbor in range are missing. Neighbors at
/// zero distance are skipped.
pub fn slope_gradient(graph: &SegmentizedGraph, elevations: &[f64], k: usize, d: f64) -> Result<Vec<Option<f64>>> {
    if k < 1 {
        return Err(Error::invalid("slope k must be at least 1"));
    }
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::invalid(format!("slope d must be positive, got {d}")));
    }
    if elevations.len() != graph.len() {
        return Err(Error::invalid("one elevation per point is required"));
    }
    if let Some(i) = elevations.iter().position(|e| !e.is_finite()) {
        return Err(Error::Extraction(format!("elevation at point {i} is not finite")));
    }
    let index = graph.index();
    Ok(par::map_range(graph.len(), |i| {
        let p = graph.points()[i].xy();
        let nbrs = index.k_nearest_within(p, k, d);
        if nbrs.is_empty() {
            return None;
        }
        let total: f64 = nbrs.iter().map(|&(j, dist)| ((elevations[j] - elevations[i]) / dist).abs()).sum();
        Some(total / nbrs.len() as f64)
    }))
}

/// The same value at every point.
pub fn uniform_feature(n: usize, value: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&value) {
        return Err(Error::invalid(format!("uniform value must lie in [0, 1], got {value}")));
    }
    Ok(vec![value; n])
}

/// Width of each point's source edge, missing when the edge has none.
pub fn edge_width(graph: &SegmentizedGraph) -> Vec<Option<f64>> {
    graph.points().iter().map(|p| graph.edge_widths()[p.edge]).collect()
}

/// Value of the sample nearest each point.
pub fn nearest_value(graph: &SegmentizedGraph, coords: &[[f64; 2]], values: &[f64]) -> Result<Vec<f64>> {
    if coords.len() != values.len() {
        return Err(Error::invalid("sample coordinates and values differ in length"));
    }
    let index = item_index(coords, graph.threshold())?
        .ok_or_else(|| Error::Extraction("sample set is empty".into()))?;
    Ok(par::map_slice(graph.points(), |p| values[index.nearest(p.xy())]))
}
