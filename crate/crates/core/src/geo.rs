//! Zone polygons and GeoJSON reading/writing.

use std::path::Path;

use serde_json::{json, Map, Value};

use crate::error::{read_to_string, Error, Result};

/// One polygon: an outer ring followed by optional holes. Rings are stored
/// open (the closing vertex is dropped).
#[derive(Debug, Clone, PartialEq)]
pub struct Polygon {
    pub rings: Vec<Vec<[f64; 2]>>,
}

fn segments_cross(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let orient = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        let v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
        if v > 0.0 {
            1
        } else if v < 0.0 {
            -1
        } else {
            0
        }
    };
    let on_seg = |a: [f64; 2], b: [f64; 2], c: [f64; 2]| {
        c[0] >= a[0].min(b[0]) && c[0] <= a[0].max(b[0]) && c[1] >= a[1].min(b[1]) && c[1] <= a[1].max(b[1])
    };
    let (o1, o2, o3, o4) = (orient(p1, p2, q1), orient(p1, p2, q2), orient(q1, q2, p1), orient(q1, q2, p2));
    if o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0 {
        return true;
    }
    (o1 == 0 && on_seg(p1, p2, q1))
        || (o2 == 0 && on_seg(p1, p2, q2))
        || (o3 == 0 && on_seg(q1, q2, p1))
        || (o4 == 0 && on_seg(q1, q2, p2))
}

impl Polygon {
    /// Validates ring size, finiteness and simplicity. Accepts rings with or
    /// without the repeated closing vertex.
    pub fn new(rings: Vec<Vec<[f64; 2]>>) -> Result<Self> {
        if rings.is_empty() {
            return Err(Error::invalid("polygon has no rings"));
        }
        let mut open = Vec::with_capacity(rings.len());
        for mut ring in rings {
            if ring.len() > 1 && ring.first() == ring.last() {
                ring.pop();
            }
            if ring.len() < 3 {
                return Err(Error::invalid("polygon ring needs at least 3 distinct vertices"));
            }
            if ring.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
                return Err(Error::invalid("polygon ring has a non-finite coordinate"));
            }
            let n = ring.len();
            for i in 0..n {
                for j in i + 1..n {
                    // skip adjacent segments, which share a vertex
                    if j == i + 1 || (i == 0 && j == n - 1) {
                        continue;
                    }
                    if segments_cross(ring[i], ring[(i + 1) % n], ring[j], ring[(j + 1) % n]) {
                        return Err(Error::invalid("polygon ring is self-intersecting"));
                    }
                }
            }
            open.push(ring);
        }
        Ok(Self { rings: open })
    }

    pub fn rect(x0: f64, y0: f64, x1: f64, y1: f64) -> Self {
        Self::new(vec![vec![[x0, y0], [x1, y0], [x1, y1], [x0, y1]]]).expect("axis-aligned rectangle")
    }

    pub fn bbox(&self) -> [f64; 4] {
        let mut b = [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY];
        for p in self.rings.iter().flatten() {
            b[0] = b[0].min(p[0]);
            b[1] = b[1].min(p[1]);
            b[2] = b[2].max(p[0]);
            b[3] = b[3].max(p[1]);
        }
        b
    }

    /// Boundary-inclusive containment (even-odd rule over all rings).
    pub fn contains(&self, p: [f64; 2]) -> bool {
        let mut inside = false;
        for ring in &self.rings {
            let n = ring.len();
            for i in 0..n {
                let a = ring[i];
                let b = ring[(i + 1) % n];
                if on_segment(a, b, p) {
                    return true;
                }
                if (a[1] > p[1]) != (b[1] > p[1]) {
                    let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
                    if p[0] < x {
                        inside = !inside;
                    }
                }
            }
        }
        inside
    }

    /// GeoJSON coordinates (closed rings).
    pub fn to_geojson_coords(&self) -> Value {
        Value::Array(
            self.rings
                .iter()
                .map(|r| {
                    let mut pts: Vec<Value> = r.iter().map(|p| json!([p[0], p[1]])).collect();
                    pts.push(json!([r[0][0], r[0][1]]));
                    Value::Array(pts)
                })
                .collect(),
        )
    }
}

fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
    if cross.abs() > 1e-9 * len.max(1.0) {
        return false;
    }
    p[0] >= a[0].min(b[0]) && p[0] <= a[0].max(b[0]) && p[1] >= a[1].min(b[1]) && p[1] <= a[1].max(b[1])
}

/// A named zone made of one or more polygons.
#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub id: String,
    pub parts: Vec<Polygon>,
}

impl Zone {
    pub fn new(id: impl Into<String>, parts: Vec<Polygon>) -> Result<Self> {
        if parts.is_empty() {
            return Err(Error::invalid("zone has no polygons"));
        }
        Ok(Self { id: id.into(), parts })
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.parts.iter().any(|poly| poly.contains(p))
    }

    pub fn bbox(&self) -> [f64; 4] {
        self.parts.iter().map(Polygon::bbox).fold(
            [f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY],
            |a, b| [a[0].min(b[0]), a[1].min(b[1]), a[2].max(b[2]), a[3].max(b[3])],
        )
    }

    pub fn geometry(&self) -> Value {
        if self.parts.len() == 1 {
            json!({"type": "Polygon", "coordinates": self.parts[0].to_geojson_coords()})
        } else {
            json!({
                "type": "MultiPolygon",
                "coordinates": self.parts.iter().map(Polygon::to_geojson_coords).collect::<Vec<_>>(),
            })
        }
    }
}

fn coord(v: &Value) -> Result<[f64; 2]> {
    let a = v.as_array().ok_or_else(|| Error::invalid("coordinate is not an array"))?;
    let x = a.first().and_then(Value::as_f64);
    let y = a.get(1).and_then(Value::as_f64);
    match (x, y) {
        (Some(x), Some(y)) => Ok([x, y]),
        _ => Err(Error::invalid("coordinate needs two numbers")),
    }
}

pub(crate) fn coord_list(v: &Value) -> Result<Vec<[f64; 2]>> {
    v.as_array()
        .ok_or_else(|| Error::invalid("expected a coordinate list"))?
        .iter()
        .map(coord)
        .collect()
}

fn polygon_from(v: &Value) -> Result<Polygon> {
    let rings = v
        .as_array()
        .ok_or_else(|| Error::invalid("polygon coordinates must be an array of rings"))?
        .iter()
        .map(coord_list)
        .collect::<Result<Vec<_>>>()?;
    Polygon::new(rings)
}

/// Features of a FeatureCollection, or an error naming the file.
pub(crate) fn features_of(doc: &Value, path: &Path) -> Result<Vec<Value>> {
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(Error::parse(path, 1, "expected a GeoJSON FeatureCollection"));
    }
    Ok(doc.get("features").and_then(Value::as_array).cloned().unwrap_or_default())
}

pub(crate) fn read_json(path: &Path) -> Result<Value> {
    let text = read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e.line() as u64, e.to_string()))
}

/// Reads Polygon/MultiPolygon features. The zone id comes from the
/// `zone_id` (or `id`) property, else the feature position.
pub fn read_zones(path: &Path) -> Result<Vec<Zone>> {
    let doc = read_json(path)?;
    zones_from_geojson(&doc, path)
}

pub fn zones_from_geojson(doc: &Value, path: &Path) -> Result<Vec<Zone>> {
    let mut zones = Vec::new();
    for (i, f) in features_of(doc, path)?.iter().enumerate() {
        let props = f.get("properties");
        let id = props
            .and_then(|p| p.get("zone_id").or_else(|| p.get("id")))
            .map(|v| match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            })
            .unwrap_or_else(|| i.to_string());
        let geom = f.get("geometry").ok_or_else(|| Error::parse(path, 0, format!("zone {id} has no geometry")))?;
        let coords = geom.get("coordinates").unwrap_or(&Value::Null);
        let wrap = |e: Error| Error::invalid(format!("zone `{id}`: {e}"));
        let parts = match geom.get("type").and_then(Value::as_str) {
            Some("Polygon") => vec![polygon_from(coords).map_err(wrap)?],
            Some("MultiPolygon") => coords
                .as_array()
                .ok_or_else(|| Error::invalid(format!("zone `{id}`: bad MultiPolygon")))?
                .iter()
                .map(|p| polygon_from(p).map_err(wrap))
                .collect::<Result<Vec<_>>>()?,
            other => return Err(Error::invalid(format!("zone `{id}` has unsupported geometry {other:?}"))),
        };
        zones.push(Zone::new(id, parts)?);
    }
    Ok(zones)
}

pub fn zones_to_geojson(zones: &[Zone]) -> Value {
    feature_collection(
        zones
            .iter()
            .map(|z| {
                let mut props = Map::new();
                props.insert("zone_id".into(), Value::String(z.id.clone()));
                feature(z.geometry(), props)
            })
            .collect(),
    )
}

pub fn feature(geometry: Value, properties: Map<String, Value>) -> Value {
    json!({"type": "Feature", "geometry": geometry, "properties": Value::Object(properties)})
}

pub fn feature_collection(features: Vec<Value>) -> Value {
    json!({"type": "FeatureCollection", "features": features})
}
