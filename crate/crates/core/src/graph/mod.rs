//! Sidewalk network, segmentization into computation points, and spatial
//! lookups over those points.
//!
//! Coordinates are planar meters (x east, y north); no reprojection is done.

mod index;
mod io;

use std::collections::HashMap;

use crate::error::{Error, Result};

pub use index::GridIndex;
pub use io::{
    read_edges_csv, read_graph_geojson, read_nodes_csv, read_points, write_edges_csv, write_graph_geojson,
    write_nodes_csv, write_points, PointRecord,
};

/// Tolerance when checking supplied lengths and polyline endpoints.
pub const LENGTH_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct Node {
    pub id: String,
    pub x: f64,
    pub y: f64,
}

/// Input edge before validation. An empty polyline means a straight
/// segment between the endpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSpec {
    pub id: String,
    pub a: String,
    pub b: String,
    pub polyline: Vec<[f64; 2]>,
    pub length: Option<f64>,
    pub width: Option<f64>,
}

impl EdgeSpec {
    pub fn straight(id: &str, a: &str, b: &str) -> Self {
        Self {
            id: id.to_string(),
            a: a.to_string(),
            b: b.to_string(),
            polyline: Vec::new(),
            length: None,
            width: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: String,
    /// Node indices.
    pub a: usize,
    pub b: usize,
    pub polyline: Vec<[f64; 2]>,
    pub length: f64,
    pub width: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SidewalkGraph {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
}

pub fn arc_length(polyline: &[[f64; 2]]) -> f64 {
    polyline
        .windows(2)
        .map(|w| (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]))
        .sum()
}

fn same_place(p: [f64; 2], q: [f64; 2]) -> bool {
    (p[0] - q[0]).hypot(p[1] - q[1]) <= LENGTH_TOLERANCE
}

impl SidewalkGraph {
    /// Validates ids, coordinates and endpoints, and computes edge lengths.
    pub fn build(nodes: Vec<Node>, edges: Vec<EdgeSpec>) -> Result<Self> {
        let mut node_idx = HashMap::with_capacity(nodes.len());
        for (i, n) in nodes.iter().enumerate() {
            if !(n.x.is_finite() && n.y.is_finite()) {
                return Err(Error::invalid(format!("node `{}` has a non-finite coordinate", n.id)));
            }
            if node_idx.insert(n.id.as_str(), i).is_some() {
                return Err(Error::DuplicateId { kind: "node", id: n.id.clone() });
            }
        }
        let mut edge_ids = HashMap::with_capacity(edges.len());
        let mut out = Vec::with_capacity(edges.len());
        for e in edges {
            if edge_ids.insert(e.id.clone(), ()).is_some() {
                return Err(Error::DuplicateId { kind: "edge", id: e.id });
            }
            let lookup = |id: &str| {
                node_idx.get(id).copied().ok_or_else(|| {
                    Error::invalid(format!("edge `{}` references missing node `{id}`", e.id))
                })
            };
            let a = lookup(&e.a)?;
            let b = lookup(&e.b)?;
            let pa = [nodes[a].x, nodes[a].y];
            let pb = [nodes[b].x, nodes[b].y];
            let polyline = if e.polyline.is_empty() { vec![pa, pb] } else { e.polyline };
            if polyline.len() < 2 {
                return Err(Error::invalid(format!("edge `{}` polyline needs at least 2 vertices", e.id)));
            }
            if polyline.iter().any(|p| !(p[0].is_finite() && p[1].is_finite())) {
                return Err(Error::invalid(format!("edge `{}` has a non-finite coordinate", e.id)));
            }
            if !same_place(polyline[0], pa) || !same_place(polyline[polyline.len() - 1], pb) {
                return Err(Error::invalid(format!(
                    "edge `{}` polyline does not start at `{}` and end at `{}`",
                    e.id, e.a, e.b
                )));
            }
            let length = arc_length(&polyline);
            if let Some(given) = e.length {
                if (given - length).abs() > LENGTH_TOLERANCE {
                    return Err(Error::invalid(format!(
                        "edge `{}` declares length {given} but its polyline measures {length}",
                        e.id
                    )));
                }
            }
            if let Some(w) = e.width {
                if !(w.is_finite() && w >= 0.0) {
                    return Err(Error::invalid(format!("edge `{}` has invalid width {w}", e.id)));
                }
            }
            out.push(Edge { id: e.id, a, b, polyline, length, width: e.width });
        }
        Ok(Self { nodes, edges: out })
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn total_length(&self) -> f64 {
        self.edges.iter().map(|e| e.length).sum()
    }
}

/// Position `offset` meters along `polyline` (clamped to its ends).
pub fn interpolate(polyline: &[[f64; 2]], offset: f64) -> [f64; 2] {
    let mut remaining = offset;
    for w in polyline.windows(2) {
        let seg = (w[1][0] - w[0][0]).hypot(w[1][1] - w[0][1]);
        if remaining <= seg && seg > 0.0 {
            let t = remaining / seg;
            return [w[0][0] + t * (w[1][0] - w[0][0]), w[0][1] + t * (w[1][1] - w[0][1])];
        }
        remaining -= seg;
    }
    polyline[polyline.len() - 1]
}

/// A computation point sampled along an edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePoint {
    pub x: f64,
    pub y: f64,
    /// Index of the edge this point was first emitted for.
    pub edge: usize,
    /// Arc offset along that edge, meters.
    pub offset: f64,
}

impl SamplePoint {
    pub fn xy(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// Sampled points plus a spatial index; point ids are vector positions.
#[derive(Debug, Clone)]
pub struct SegmentizedGraph {
    points: Vec<SamplePoint>,
    edge_ids: Vec<String>,
    edge_widths: Vec<Option<f64>>,
    /// Point ids along each edge, ordered by arc offset.
    edge_points: Vec<Vec<u32>>,
    threshold: f64,
    index: GridIndex,
}

impl SegmentizedGraph {
    /// Places `ceil(L / threshold) + 1` evenly spaced points on every edge
    /// of length `L > 0`, endpoints included. Points at shared nodes are
    /// emitted once.
    pub fn segmentize(graph: &SidewalkGraph, threshold: f64) -> Result<Self> {
        if !(threshold.is_finite() && threshold > 0.0) {
            return Err(Error::invalid(format!("segmentization threshold must be positive, got {threshold}")));
        }
        let mut points = Vec::new();
        let mut node_point: Vec<Option<u32>> = vec![None; graph.nodes.len()];
        let mut edge_points = Vec::with_capacity(graph.edges.len());
        for (ei, e) in graph.edges.iter().enumerate() {
            let intervals = if e.length > 0.0 { (e.length / threshold).ceil() as usize } else { 0 };
            let mut ids = Vec::with_capacity(intervals + 1);
            let mut endpoint = |node: usize, offset: f64, points: &mut Vec<SamplePoint>| -> u32 {
                *node_point[node].get_or_insert_with(|| {
                    let n = &graph.nodes[node];
                    points.push(SamplePoint { x: n.x, y: n.y, edge: ei, offset });
                    (points.len() - 1) as u32
                })
            };
            ids.push(endpoint(e.a, 0.0, &mut points));
            for j in 1..intervals {
                let offset = e.length * j as f64 / intervals as f64;
                let [x, y] = interpolate(&e.polyline, offset);
                points.push(SamplePoint { x, y, edge: ei, offset });
                ids.push((points.len() - 1) as u32);
            }
            let b = endpoint(e.b, e.length, &mut points);
            if intervals > 0 {
                ids.push(b);
            }
            edge_points.push(ids);
        }
        if points.is_empty() {
            return Err(Error::invalid("graph has no edges to segmentize"));
        }
        let index = GridIndex::new(points.iter().map(SamplePoint::xy).collect(), threshold)?;
        Ok(Self {
            points,
            edge_ids: graph.edges.iter().map(|e| e.id.clone()).collect(),
            edge_widths: graph.edges.iter().map(|e| e.width).collect(),
            edge_points,
            threshold,
            index,
        })
    }

    /// Rebuilds from exported points (e.g. a `points.csv` artifact).
    pub fn from_points(
        points: Vec<SamplePoint>,
        edge_ids: Vec<String>,
        edge_widths: Vec<Option<f64>>,
        threshold: f64,
    ) -> Result<Self> {
        if edge_ids.len() != edge_widths.len() {
            return Err(Error::invalid("edge id and width lists differ in length"));
        }
        let mut edge_points: Vec<Vec<u32>> = vec![Vec::new(); edge_ids.len()];
        for (i, p) in points.iter().enumerate() {
            let list = edge_points
                .get_mut(p.edge)
                .ok_or_else(|| Error::invalid(format!("point {i} references unknown edge index {}", p.edge)))?;
            list.push(i as u32);
        }
        for list in &mut edge_points {
            list.sort_by(|&a, &b| points[a as usize].offset.total_cmp(&points[b as usize].offset));
        }
        let index = GridIndex::new(points.iter().map(SamplePoint::xy).collect(), threshold)?;
        Ok(Self { points, edge_ids, edge_widths, edge_points, threshold, index })
    }

    pub fn points(&self) -> &[SamplePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn index(&self) -> &GridIndex {
        &self.index
    }

    pub fn edge_ids(&self) -> &[String] {
        &self.edge_ids
    }

    pub fn edge_widths(&self) -> &[Option<f64>] {
        &self.edge_widths
    }

    /// Point ids along edge `edge` in arc order. After [`Self::segmentize`]
    /// shared endpoints are listed on every edge; after [`Self::from_points`]
    /// only points first emitted for the edge are.
    pub fn points_on_edge(&self, edge: usize) -> &[u32] {
        &self.edge_points[edge]
    }

    pub fn nearest_point(&self, q: [f64; 2]) -> usize {
        self.index.nearest(q)
    }

    pub fn points_within(&self, q: [f64; 2], radius: f64) -> Result<Vec<usize>> {
        self.index.within(q, radius)
    }
}
