//! Graph and point files: delimited node/edge tables, GeoJSON line
//! features, and the `point_id,x,y,edge_id,offset` export.

use std::collections::HashMap;
use std::path::Path;

use serde_json::{json, Map, Value};

use super::{EdgeSpec, Node, SegmentizedGraph, SidewalkGraph};
use crate::error::{read_to_string, write_file, Error, Result};
use crate::geo::{coord_list, feature, feature_collection, features_of, read_json};
use crate::numfmt::lossless;

struct Table<'a> {
    path: &'a Path,
    columns: HashMap<String, usize>,
    rows: Vec<(u64, Vec<String>)>,
}

impl<'a> Table<'a> {
    fn read(path: &'a Path, required: &[&str]) -> Result<Self> {
        let text = read_to_string(path)?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| Error::parse(path, 1, e.to_string()))?;
        let columns: HashMap<String, usize> = headers.iter().enumerate().map(|(i, h)| (h.to_string(), i)).collect();
        for r in required {
            if !columns.contains_key(*r) {
                return Err(Error::parse(path, 1, format!("missing column `{r}`")));
            }
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::parse(path, e.position().map_or(0, |p| p.line()), e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line());
            rows.push((line, rec.iter().map(str::to_string).collect()));
        }
        Ok(Self { path, columns, rows })
    }

    fn cell<'r>(&self, row: &'r [String], col: &str) -> Option<&'r str> {
        self.columns.get(col).and_then(|&i| row.get(i)).map(String::as_str).filter(|s| !s.is_empty())
    }

    fn num(&self, line: u64, row: &[String], col: &str) -> Result<Option<f64>> {
        match self.cell(row, col) {
            None => Ok(None),
            Some(s) => s
                .parse::<f64>()
                .map(Some)
                .map_err(|_| Error::parse(self.path, line, format!("column `{col}`: `{s}` is not a number"))),
        }
    }

    fn req_num(&self, line: u64, row: &[String], col: &str) -> Result<f64> {
        self.num(line, row, col)?
            .ok_or_else(|| Error::parse(self.path, line, format!("column `{col}` is empty")))
    }

    fn req_str(&self, line: u64, row: &[String], col: &str) -> Result<String> {
        self.cell(row, col)
            .map(str::to_string)
            .ok_or_else(|| Error::parse(self.path, line, format!("column `{col}` is empty")))
    }
}

/// `node_id,x,y`
pub fn read_nodes_csv(path: &Path) -> Result<Vec<Node>> {
    let t = Table::read(path, &["node_id", "x", "y"])?;
    t.rows
        .iter()
        .map(|(line, row)| {
            Ok(Node {
                id: t.req_str(*line, row, "node_id")?,
                x: t.req_num(*line, row, "x")?,
                y: t.req_num(*line, row, "y")?,
            })
        })
        .collect()
}

/// `edge_id,node_a,node_b[,width][,length]`; edges are straight segments.
pub fn read_edges_csv(path: &Path) -> Result<Vec<EdgeSpec>> {
    let t = Table::read(path, &["edge_id", "node_a", "node_b"])?;
    t.rows
        .iter()
        .map(|(line, row)| {
            Ok(EdgeSpec {
                id: t.req_str(*line, row, "edge_id")?,
                a: t.req_str(*line, row, "node_a")?,
                b: t.req_str(*line, row, "node_b")?,
                polyline: Vec::new(),
                length: t.num(*line, row, "length")?,
                width: t.num(*line, row, "width")?,
            })
        })
        .collect()
}

pub fn write_nodes_csv(path: &Path, graph: &SidewalkGraph) -> Result<()> {
    let mut s = String::from("node_id,x,y\n");
    for n in graph.nodes() {
        s.push_str(&format!("{},{},{}\n", n.id, lossless(n.x), lossless(n.y)));
    }
    write_file(path, s)
}

pub fn write_edges_csv(path: &Path, graph: &SidewalkGraph) -> Result<()> {
    let mut s = String::from("edge_id,node_a,node_b,width\n");
    for e in graph.edges() {
        let width = e.width.map(lossless).unwrap_or_default();
        s.push_str(&format!("{},{},{},{width}\n", e.id, graph.nodes()[e.a].id, graph.nodes()[e.b].id));
    }
    write_file(path, s)
}

fn prop_string(props: Option<&Value>, key: &str) -> Option<String> {
    props.and_then(|p| p.get(key)).and_then(|v| match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    })
}

/// LineString features with optional `edge_id`, `node_a`, `node_b`,
/// `width` properties. Without node ids, endpoints at identical
/// coordinates become one node.
pub fn read_graph_geojson(path: &Path) -> Result<SidewalkGraph> {
    let doc = read_json(path)?;
    let mut nodes: Vec<Node> = Vec::new();
    let mut by_coord: HashMap<(u64, u64), usize> = HashMap::new();
    let mut by_id: HashMap<String, usize> = HashMap::new();
    let mut edges = Vec::new();
    for (i, f) in features_of(&doc, path)?.iter().enumerate() {
        let props = f.get("properties");
        let geom = f.get("geometry").ok_or_else(|| Error::parse(path, 0, format!("feature {i} has no geometry")))?;
        if geom.get("type").and_then(Value::as_str) != Some("LineString") {
            return Err(Error::parse(path, 0, format!("feature {i} is not a LineString")));
        }
        let line = coord_list(geom.get("coordinates").unwrap_or(&Value::Null))
            .map_err(|e| Error::parse(path, 0, format!("feature {i}: {e}")))?;
        if line.len() < 2 {
            return Err(Error::parse(path, 0, format!("feature {i} has fewer than 2 vertices")));
        }
        let mut endpoint = |p: [f64; 2], id: Option<String>| -> String {
            match id {
                Some(id) => {
                    if !by_id.contains_key(&id) {
                        by_id.insert(id.clone(), nodes.len());
                        nodes.push(Node { id: id.clone(), x: p[0], y: p[1] });
                    }
                    id
                }
                None => {
                    let key = (p[0].to_bits(), p[1].to_bits());
                    let idx = *by_coord.entry(key).or_insert_with(|| {
                        let id = format!("n{}", nodes.len());
                        by_id.insert(id.clone(), nodes.len());
                        nodes.push(Node { id, x: p[0], y: p[1] });
                        nodes.len() - 1
                    });
                    nodes[idx].id.clone()
                }
            }
        };
        let a = endpoint(line[0], prop_string(props, "node_a"));
        let b = endpoint(line[line.len() - 1], prop_string(props, "node_b"));
        let width = props.and_then(|p| p.get("width")).and_then(Value::as_f64);
        edges.push(EdgeSpec {
            id: prop_string(props, "edge_id").unwrap_or_else(|| format!("e{i}")),
            a,
            b,
            polyline: line,
            length: None,
            width,
        });
    }
    SidewalkGraph::build(nodes, edges)
}

pub fn write_graph_geojson(path: &Path, graph: &SidewalkGraph) -> Result<()> {
    let features = graph
        .edges()
        .iter()
        .map(|e| {
            let mut props = Map::new();
            props.insert("edge_id".into(), json!(e.id));
            props.insert("node_a".into(), json!(graph.nodes()[e.a].id));
            props.insert("node_b".into(), json!(graph.nodes()[e.b].id));
            if let Some(w) = e.width {
                props.insert("width".into(), json!(w));
            }
            let coords: Vec<Value> = e.polyline.iter().map(|p| json!([p[0], p[1]])).collect();
            feature(json!({"type": "LineString", "coordinates": coords}), props)
        })
        .collect();
    let text = serde_json::to_string(&feature_collection(features)).expect("json");
    write_file(path, text)
}

/// A row of the points export.
#[derive(Debug, Clone, PartialEq)]
pub struct PointRecord {
    pub point_id: u64,
    pub x: f64,
    pub y: f64,
    pub edge_id: String,
    pub offset: f64,
}

pub fn write_points(path: &Path, seg: &SegmentizedGraph) -> Result<()> {
    let mut s = String::with_capacity(seg.len() * 48);
    s.push_str("point_id,x,y,edge_id,offset\n");
    for (i, p) in seg.points().iter().enumerate() {
        s.push_str(&format!(
            "{i},{},{},{},{}\n",
            lossless(p.x),
            lossless(p.y),
            seg.edge_ids()[p.edge],
            lossless(p.offset)
        ));
    }
    write_file(path, s)
}

pub fn read_points(path: &Path) -> Result<Vec<PointRecord>> {
    let t = Table::read(path, &["point_id", "x", "y", "edge_id", "offset"])?;
    t.rows
        .iter()
        .enumerate()
        .map(|(i, (line, row))| {
            let id = t.req_num(*line, row, "point_id")?;
            if id != i as f64 {
                return Err(Error::parse(path, *line, "point ids must be 0, 1, 2, ... in order"));
            }
            Ok(PointRecord {
                point_id: i as u64,
                x: t.req_num(*line, row, "x")?,
                y: t.req_num(*line, row, "y")?,
                edge_id: t.req_str(*line, row, "edge_id")?,
                offset: t.req_num(*line, row, "offset")?,
            })
        })
        .collect()
}


#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SidewalkGraph {
        SidewalkGraph::build(
            vec![
                Node { id: "a".into(), x: 0.0, y: 0.0 },
                Node { id: "b".into(), x: 30.0, y: 0.0 },
                Node { id: "c".into(), x: 30.0, y: 40.0 },
            ],
            vec![
                EdgeSpec { width: Some(2.5), ..EdgeSpec::straight("ab", "a", "b") },
                EdgeSpec::straight("bc", "b", "c"),
            ],
        )
        .unwrap()
    }

    #[test]
    fn csv_pair_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = sample();
        write_nodes_csv(&dir.path().join("nodes.csv"), &g).unwrap();
        write_edges_csv(&dir.path().join("edges.csv"), &g).unwrap();
        let back = SidewalkGraph::build(
            read_nodes_csv(&dir.path().join("nodes.csv")).unwrap(),
            read_edges_csv(&dir.path().join("edges.csv")).unwrap(),
        )
        .unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn geojson_round_trip_and_inferred_nodes() {
        let dir = tempfile::tempdir().unwrap();
        let g = sample();
        let p = dir.path().join("g.geojson");
        write_graph_geojson(&p, &g).unwrap();
        assert_eq!(read_graph_geojson(&p).unwrap(), g);

        let bare = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{},"geometry":{"type":"LineString","coordinates":[[0,0],[10,0]]}},
            {"type":"Feature","properties":{"width":3},"geometry":{"type":"LineString","coordinates":[[10,0],[10,5],[20,5]]}}]}"#;
        std::fs::write(&p, bare).unwrap();
        let g = read_graph_geojson(&p).unwrap();
        assert_eq!(g.nodes().len(), 3);
        assert_eq!(g.edges()[1].length, 15.0);
        assert_eq!(g.edges()[1].width, Some(3.0));
    }

    #[test]
    fn points_export_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let seg = SegmentizedGraph::segmentize(&sample(), 15.0).unwrap();
        let p = dir.path().join("points.csv");
        write_points(&p, &seg).unwrap();
        let rows = read_points(&p).unwrap();
        assert_eq!(rows.len(), seg.len());
        for (r, s) in rows.iter().zip(seg.points()) {
            assert_eq!((r.x, r.y, r.offset), (s.x, s.y, s.offset));
            assert_eq!(r.edge_id, seg.edge_ids()[s.edge]);
        }
    }

    #[test]
    fn malformed_rows_report_lines() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nodes.csv");
        std::fs::write(&p, "node_id,x,y\na,0,0\nb,zz,1\n").unwrap();
        match read_nodes_csv(&p) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
