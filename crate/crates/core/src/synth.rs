//! Seeded synthetic cities: a block grid with a planted low-robotability
//! downtown, per-feature datasets, an elevation surface, zones and votes.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ahp::{self, PairwiseVote};
use crate::catalog::{Extractor, FeatureCatalog, FeatureDef};
use crate::error::{write_file, Result};
use crate::extract::{DataSources, ElevationSampler, PointData};
use crate::fixtures::{self, WeightColumn};
use crate::geo::{zones_to_geojson, Polygon, Zone};
use crate::graph::{self, EdgeSpec, Node, SegmentizedGraph, SidewalkGraph};

/// Generation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub blocks_x: usize,
    pub blocks_y: usize,
    /// Block edge length in meters.
    pub block: f64,
    /// Spacing used to place per-point observations.
    pub threshold: f64,
    /// Zone edge length in blocks; zones are centered on intersections.
    pub zone_blocks: usize,
    /// Downtown focus; defaults to the intersection nearest the center.
    pub downtown_center: Option<[f64; 2]>,
    /// Zones whose center lies within this distance are downtown.
    pub downtown_radius: f64,
    /// Fraction of points with a dashcam-style observation.
    pub observation_coverage: f64,
    pub raters: usize,
    pub votes_per_rater: usize,
    pub raster_cell: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            blocks_x: 10,
            blocks_y: 10,
            block: 100.0,
            threshold: 15.0,
            zone_blocks: 1,
            downtown_center: None,
            downtown_radius: 101.0,
            observation_coverage: 0.826,
            raters: 47,
            votes_per_rater: 34,
            raster_cell: 10.0,
        }
    }
}

/// Planted structure, recorded so tests can check what the pipeline recovers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Plant {
    pub seed: u64,
    pub center: [f64; 2],
    pub radius: f64,
    /// Length scale of the downtown intensity `exp(-(d / sigma)^2)`.
    pub sigma: f64,
    pub downtown_zones: Vec<String>,
    /// Weight column the votes were sampled from.
    pub vote_weights: String,
}

/// Everything a pipeline run needs, in memory.
#[derive(Debug, Clone)]
pub struct SynthCity {
    pub config: SynthConfig,
    pub graph: SidewalkGraph,
    pub catalog: FeatureCatalog,
    /// Point datasets keyed by catalog source name.
    pub point_data: BTreeMap<String, PointData>,
    pub elevation: ElevationSampler,
    pub zones: Vec<Zone>,
    pub votes: Vec<PairwiseVote>,
    pub plant: Plant,
}

pub const ELEVATION_SOURCE: &str = "data/elevation.asc";

fn src(name: &str) -> String {
    format!("data/{name}.csv")
}

/// Catalog of all 24 indicators with the five city-scale exclusions and
/// synthetic source files for the other 19.
pub fn synthetic_catalog() -> FeatureCatalog {
    let layer_sources: Vec<String> = fixtures::TRAFFIC_LAYERS.iter().map(|l| src(&format!("traffic/{l}"))).collect();
    let extractor = |id: &str| -> Option<Extractor> {
        Some(match id {
            "pedestrian_density" => Extractor::ObservationMean { source: src("pedestrians") },
            "crowd_dynamics" => Extractor::ObservationMean { source: src("crowds") },
            "bicycle_traffic" => Extractor::ObservationMean { source: src("bicycles") },
            "surface_condition" => Extractor::NearestValue { source: src("surface_condition") },
            "surface_roughness" => Extractor::NearestValue { source: src("surface_roughness") },
            "vehicle_traffic" => Extractor::NearestValue { source: src("vehicle_traffic") },
            "sidewalk_width" => Extractor::EdgeWidth,
            "street_furniture" => Extractor::Density {
                source: src("street_furniture"),
                radius: crate::catalog::DEFAULT_JOIN_RADIUS,
                class_weights: fixtures::furniture_weights(),
            },
            "curb_ramps" | "bike_lanes" | "cctv" => Extractor::Density {
                source: src(id),
                radius: crate::catalog::DEFAULT_JOIN_RADIUS,
                class_weights: BTreeMap::new(),
            },
            "intersection_safety" => Extractor::LayerCount {
                sources: vec![src("safety/signals"), src("safety/refuge_islands")],
                radius: crate::catalog::DEFAULT_JOIN_RADIUS,
            },
            "traffic_management" => Extractor::LayerCount {
                sources: layer_sources.clone(),
                radius: crate::catalog::DEFAULT_JOIN_RADIUS,
            },
            "wireless" => Extractor::Threshold { source: src("wireless"), threshold: 10.0 },
            "charging_proximity" => Extractor::Proximity { source: src("charging") },
            "slope_gradient" => Extractor::Slope {
                raster: ELEVATION_SOURCE.into(),
                k: crate::catalog::DEFAULT_SLOPE_K,
                d: crate::catalog::DEFAULT_SLOPE_D,
            },
            "digital_maps" | "gps_signal" | "zoning_laws" => Extractor::Uniform { value: 1.0 },
            _ => return None,
        })
    };
    let excluded: BTreeMap<String, String> =
        fixtures::NYC_EXCLUDED.iter().map(|(id, r)| (id.to_string(), r.to_string())).collect();
    let features = fixtures::FEATURES
        .iter()
        .map(|(id, name, pol)| FeatureDef {
            id: id.to_string(),
            display_name: name.to_string(),
            polarity: *pol,
            extractor: if excluded.contains_key(*id) { None } else { extractor(id) },
        })
        .collect();
    FeatureCatalog::new(features, excluded).expect("synthetic catalog is valid")
}

struct Gen {
    rng: ChaCha8Rng,
    center: [f64; 2],
    sigma: f64,
}

impl Gen {
    fn intensity(&self, p: [f64; 2]) -> f64 {
        let d2 = (p[0] - self.center[0]).powi(2) + (p[1] - self.center[1]).powi(2);
        (-d2 / (self.sigma * self.sigma)).exp()
    }

    fn unit(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    fn noise(&mut self, amp: f64) -> f64 {
        (self.rng.gen::<f64>() * 2.0 - 1.0) * amp
    }

    fn jitter(&mut self, p: [f64; 2], r: f64) -> [f64; 2] {
        let a = self.unit() * 2.0 * PI;
        let d = self.unit() * r;
        [p[0] + d * a.cos(), p[1] + d * a.sin()]
    }
}

fn grid_graph(cfg: &SynthConfig, g: &mut Gen) -> Result<SidewalkGraph> {
    let (nx, ny) = (cfg.blocks_x + 1, cfg.blocks_y + 1);
    let id = |i: usize, j: usize| format!("n{i}_{j}");
    let mut nodes = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            nodes.push(Node { id: id(i, j), x: i as f64 * cfg.block, y: j as f64 * cfg.block });
        }
    }
    let mut edges = Vec::new();
    let mut add = |a: (usize, usize), b: (usize, usize), g: &mut Gen| {
        let pa = [a.0 as f64 * cfg.block, a.1 as f64 * cfg.block];
        let pb = [b.0 as f64 * cfg.block, b.1 as f64 * cfg.block];
        let mid = [(pa[0] + pb[0]) / 2.0, (pa[1] + pb[1]) / 2.0];
        let width = (4.5 - 3.0 * g.intensity(mid) + g.noise(0.4)).max(0.8);
        let mut e = EdgeSpec::straight(&format!("e{}", edges.len()), &id(a.0, a.1), &id(b.0, b.1));
        e.polyline = vec![pa, pb];
        e.width = Some((width * 100.0).round() / 100.0);
        edges.push(e);
    };
    for j in 0..ny {
        for i in 0..cfg.blocks_x {
            add((i, j), (i + 1, j), g);
        }
    }
    for j in 0..cfg.blocks_y {
        for i in 0..nx {
            add((i, j), (i, j + 1), g);
        }
    }
    SidewalkGraph::build(nodes, edges)
}

fn zones(cfg: &SynthConfig) -> Vec<Zone> {
    let size = cfg.zone_blocks.max(1) as f64 * cfg.block;
    let x0 = -cfg.block / 2.0;
    let y0 = -cfg.block / 2.0;
    let w = cfg.blocks_x as f64 * cfg.block + cfg.block;
    let h = cfg.blocks_y as f64 * cfg.block + cfg.block;
    let (zx, zy) = ((w / size).ceil() as usize, (h / size).ceil() as usize);
    let mut out = Vec::with_capacity(zx * zy);
    for j in 0..zy {
        for i in 0..zx {
            let (ax, ay) = (x0 + i as f64 * size, y0 + j as f64 * size);
            let rect = Polygon::rect(ax, ay, (ax + size).min(x0 + w), (ay + size).min(y0 + h));
            out.push(Zone::new(format!("z{j:03}_{i:03}"), vec![rect]).expect("zone has a polygon"));
        }
    }
    out
}

fn sample_votes(cfg: &SynthConfig, g: &mut Gen, column: WeightColumn) -> Vec<PairwiseVote> {
    let col = fixtures::published_column(column);
    let ids: Vec<String> = col.iter().map(|(id, _)| id.to_string()).collect();
    let w: BTreeMap<&str, f64> = col.iter().copied().collect();
    let pairs = ahp::enumerate_pairs(&ids).expect("fixture ids are unique");
    let mut votes = Vec::with_capacity(cfg.raters * cfg.votes_per_rater);
    for r in 0..cfg.raters {
        let rater = format!("r{:02}", r + 1);
        let picked: Vec<&(String, String)> = pairs.choose_multiple(&mut g.rng, cfg.votes_per_rater.min(pairs.len())).collect();
        for (a, b) in picked {
            let pa = w[a.as_str()] / (w[a.as_str()] + w[b.as_str()]);
            let chosen = if g.unit() < pa { a } else { b };
            votes.push(PairwiseVote::new(&rater, a, b, chosen));
        }
    }
    votes
}

impl SynthCity {
    pub fn generate(cfg: &SynthConfig) -> Result<Self> {
        let center = cfg.downtown_center.unwrap_or([
            (cfg.blocks_x / 2) as f64 * cfg.block,
            (cfg.blocks_y / 2) as f64 * cfg.block,
        ]);
        let sigma = 1.5 * cfg.downtown_radius;
        let mut g = Gen { rng: ChaCha8Rng::seed_from_u64(cfg.seed), center, sigma };
        let graph = grid_graph(cfg, &mut g)?;
        let seg = SegmentizedGraph::segmentize(&graph, cfg.threshold)?;
        let mut data: BTreeMap<String, PointData> = BTreeMap::new();

        // per-point observations, some points left without any
        for (name, base, amp) in [("pedestrians", 4.0, 60.0), ("crowds", 1.0, 12.0), ("bicycles", 1.0, 8.0)] {
            let mut coords = Vec::new();
            let mut counts = Vec::new();
            for p in seg.points() {
                if g.unit() >= cfg.observation_coverage {
                    continue;
                }
                let xy = p.xy();
                let i = g.intensity(xy);
                coords.push(g.jitter(xy, 1.0));
                counts.push((base + amp * i + g.noise(amp * 0.15)).max(0.0).round());
            }
            data.insert(src(name), PointData::from_coords(coords).with_column("count", counts));
        }

        let nodes: Vec<[f64; 2]> = graph.nodes().iter().map(|n| [n.x, n.y]).collect();
        let mids: Vec<[f64; 2]> = graph
            .edges()
            .iter()
            .map(|e| graph::interpolate(&e.polyline, e.length / 2.0))
            .collect();

        for (name, at_nodes, f) in [
            ("surface_condition", false, (|i: f64, n: f64| 0.9 - 0.6 * i + n) as fn(f64, f64) -> f64),
            ("surface_roughness", false, |i, n| 0.15 + 0.6 * i + n),
            ("vehicle_traffic", true, |i, n| 200.0 + 1500.0 * i + 600.0 * n),
        ] {
            let sites = if at_nodes { &nodes } else { &mids };
            let mut coords = Vec::with_capacity(sites.len());
            let mut vals = Vec::with_capacity(sites.len());
            for &s in sites {
                let i = g.intensity(s);
                let n = g.noise(0.1);
                coords.push(g.jitter(s, 2.0));
                vals.push(f(i, n));
            }
            data.insert(src(name), PointData::from_coords(coords).with_column("value", vals));
        }

        // street furniture: item count grows towards downtown
        {
            let classes: Vec<&str> = fixtures::FURNITURE_WEIGHTS.iter().map(|(c, _)| *c).collect();
            let mut coords = Vec::new();
            let mut labels = Vec::new();
            for p in seg.points() {
                let xy = p.xy();
                let lambda = 0.3 + 2.5 * g.intensity(xy);
                let n = (lambda + g.noise(lambda * 0.5)).round().max(0.0) as usize;
                for _ in 0..n {
                    coords.push(g.jitter(xy, 5.0));
                    labels.push(classes[g.rng.gen_range(0..classes.len())].to_string());
                }
            }
            data.insert(src("street_furniture"), PointData::with_classes(coords, labels));
        }

        // corner infrastructure, sparser downtown
        let corners = |g: &mut Gen, name: &str, p_far: f64, p_near: f64, data: &mut BTreeMap<String, PointData>| {
            let mut coords = Vec::new();
            for &n in &nodes {
                let i = g.intensity(n);
                let p = p_far + (p_near - p_far) * i;
                for (dx, dy) in [(3.0, 3.0), (-3.0, 3.0), (3.0, -3.0), (-3.0, -3.0)] {
                    if g.unit() < p {
                        coords.push([n[0] + dx, n[1] + dy]);
                    }
                }
            }
            data.insert(src(name), PointData::from_coords(coords));
        };
        corners(&mut g, "curb_ramps", 0.95, 0.2, &mut data);
        corners(&mut g, "cctv", 0.4, 0.05, &mut data);
        corners(&mut g, "safety/signals", 0.6, 0.05, &mut data);
        corners(&mut g, "safety/refuge_islands", 0.4, 0.02, &mut data);
        for layer in fixtures::TRAFFIC_LAYERS {
            corners(&mut g, &format!("traffic/{layer}"), 0.3, 0.02, &mut data);
        }

        // bike lane markers along edges away from downtown
        {
            let mut coords = Vec::new();
            for e in graph.edges() {
                let mid = graph::interpolate(&e.polyline, e.length / 2.0);
                if g.unit() < 0.5 * (1.0 - g.intensity(mid)) {
                    let mut s = 0.0;
                    while s <= e.length {
                        coords.push(graph::interpolate(&e.polyline, s));
                        s += 10.0;
                    }
                }
            }
            data.insert(src("bike_lanes"), PointData::from_coords(coords));
        }

        // wireless measurements: slower downtown
        {
            let mut coords = Vec::new();
            let (mut down, mut up) = (Vec::new(), Vec::new());
            for &s in nodes.iter().chain(&mids) {
                let i = g.intensity(s);
                coords.push(g.jitter(s, 2.0));
                down.push((25.0 - 20.0 * i + g.noise(6.0)).max(0.0));
                up.push((22.0 - 18.0 * i + g.noise(6.0)).max(0.0));
            }
            data.insert(
                src("wireless"),
                PointData::from_coords(coords).with_column("download", down).with_column("upload", up),
            );
        }

        // charging stations, always one at each far corner
        {
            let w = cfg.blocks_x as f64 * cfg.block;
            let h = cfg.blocks_y as f64 * cfg.block;
            let mut coords = vec![[0.0, 0.0], [w, h], [0.0, h], [w, 0.0]];
            for &n in &nodes {
                if g.unit() < 0.04 * (1.0 - g.intensity(n)) {
                    coords.push(g.jitter(n, 4.0));
                }
            }
            data.insert(src("charging"), PointData::from_coords(coords));
        }

        // terrain: gentle tilt plus ripples that are steep downtown
        let cell = cfg.raster_cell;
        let margin = 2.0 * cell;
        let origin = [-margin, -margin];
        let ncols = ((cfg.blocks_x as f64 * cfg.block + 2.0 * margin) / cell).ceil() as usize + 1;
        let nrows = ((cfg.blocks_y as f64 * cfg.block + 2.0 * margin) / cell).ceil() as usize + 1;
        let phase = g.unit() * 2.0 * PI;
        let tilt = [0.002 + 0.004 * g.unit(), 0.002 + 0.004 * g.unit()];
        let (c, s2) = (center, sigma * sigma);
        let elevation = ElevationSampler::from_fn(ncols, nrows, origin, cell, |x, y| {
            let i = (-((x - c[0]).powi(2) + (y - c[1]).powi(2)) / s2).exp();
            10.0 + tilt[0] * x + tilt[1] * y + 3.0 * i * ((x / 20.0 + phase).sin() + (y / 20.0 + phase).cos())
        })?;

        let zones = zones(cfg);
        let downtown_zones = zones
            .iter()
            .filter(|z| {
                let b = z.bbox();
                let zc = [(b[0] + b[2]) / 2.0, (b[1] + b[3]) / 2.0];
                (zc[0] - center[0]).hypot(zc[1] - center[1]) <= cfg.downtown_radius
            })
            .map(|z| z.id.clone())
            .collect();
        let votes = sample_votes(cfg, &mut g, WeightColumn::All);
        Ok(Self {
            config: cfg.clone(),
            graph,
            catalog: synthetic_catalog(),
            point_data: data,
            elevation,
            zones,
            votes,
            plant: Plant {
                seed: cfg.seed,
                center,
                radius: cfg.downtown_radius,
                sigma,
                downtown_zones,
                vote_weights: WeightColumn::All.name().into(),
            },
        })
    }

    pub fn sources(&self) -> DataSources {
        let mut s = DataSources::new();
        for (name, d) in &self.point_data {
            s.insert_points(name, d.clone());
        }
        s.insert_raster(ELEVATION_SOURCE, self.elevation.clone());
        s
    }

    /// Writes inputs and a run config into `dir`:
    /// `nodes.csv`, `edges.csv`, `catalog.toml`, `data/`, `zones.geojson`,
    /// `votes.csv`, `plant.json` and `config.toml`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        graph::write_nodes_csv(&dir.join("nodes.csv"), &self.graph)?;
        graph::write_edges_csv(&dir.join("edges.csv"), &self.graph)?;
        write_file(&dir.join("catalog.toml"), self.catalog.to_toml())?;
        for (name, d) in &self.point_data {
            d.write_csv(&dir.join(name))?;
        }
        self.elevation.write(&dir.join(ELEVATION_SOURCE))?;
        let zones = serde_json::to_string_pretty(&zones_to_geojson(&self.zones)).expect("json");
        write_file(&dir.join("zones.geojson"), zones + "\n")?;
        ahp::write_votes(&dir.join("votes.csv"), &self.votes)?;
        let plant = serde_json::to_string_pretty(&self.plant).expect("json");
        write_file(&dir.join("plant.json"), plant + "\n")?;
        let config = format!(
            "votes = \"votes.csv\"\nnodes = \"nodes.csv\"\nedges = \"edges.csv\"\ncatalog = \"catalog.toml\"\n\
             zones = \"zones.geojson\"\nthreshold = {:?}\nseed = {}\n",
            self.config.threshold, self.config.seed
        );
        write_file(&dir.join("config.toml"), config)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ten_by_ten_counts() {
        let city = SynthCity::generate(&SynthConfig::default()).unwrap();
        assert_eq!(city.graph.edges().len(), 220);
        assert_eq!(city.graph.nodes().len(), 121);
        let seg = SegmentizedGraph::segmentize(&city.graph, 15.0).unwrap();
        // 220 * 8 before sharing, each of the 121 nodes counted once after
        let before = 220 * ((100.0f64 / 15.0).ceil() as usize + 1);
        assert_eq!(before, 1760);
        assert_eq!(seg.len(), 220 * 6 + 121);
        assert_eq!(city.zones.len(), 121);
        assert_eq!(city.plant.downtown_zones.len(), 5);
    }

    #[test]
    fn catalog_has_nineteen_active() {
        let c = synthetic_catalog();
        assert_eq!(c.features().len(), 24);
        assert_eq!(c.active_ids().len(), 19);
    }

    #[test]
    fn same_seed_same_city() {
        let a = SynthCity::generate(&SynthConfig::default()).unwrap();
        let b = SynthCity::generate(&SynthConfig::default()).unwrap();
        assert_eq!(a.point_data, b.point_data);
        assert_eq!(a.votes, b.votes);
        let c = SynthCity::generate(&SynthConfig { seed: 7, ..SynthConfig::default() }).unwrap();
        assert_ne!(a.votes, c.votes);
    }
}
