use serde::{Deserialize, Serialize};

use super::{rank_fraction, ScoreField};
use crate::error::{Error, Result};
use crate::geo::Zone;
use crate::par;

/// Slack for percentile band comparisons.
const BAND_EPS: f64 = 1e-12;

/// Zone index of each point; the first zone in input order wins on shared
/// boundaries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ZoneAssignment {
    zone_of: Vec<Option<u32>>,
    n_zones: usize,
}

impl ZoneAssignment {
    pub fn new(points: &[[f64; 2]], zones: &[Zone]) -> Self {
        let boxes: Vec<[f64; 4]> = zones.iter().map(Zone::bbox).collect();
        let zone_of = par::map_slice(points, |&p| {
            boxes
                .iter()
                .zip(zones)
                .position(|(b, z)| p[0] >= b[0] && p[0] <= b[2] && p[1] >= b[1] && p[1] <= b[3] && z.contains(p))
                .map(|i| i as u32)
        });
        Self { zone_of, n_zones: zones.len() }
    }

    pub fn zone_of(&self, point: usize) -> Option<usize> {
        self.zone_of[point].map(|z| z as usize)
    }

    pub fn len(&self) -> usize {
        self.zone_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zone_of.is_empty()
    }

    pub fn n_zones(&self) -> usize {
        self.n_zones
    }
}

/// Mean score of the scored points inside one zone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneAggregate {
    pub zone_id: String,
    /// `None` when the zone holds no scored point.
    pub mean_score: Option<f64>,
    pub point_count: usize,
    /// Rank among zones with data: `r / (n - 1)` over (mean, zone id).
    pub percentile_rank: Option<f64>,
}

/// Zone means for `field` given a precomputed point assignment. Points
/// with zero coverage are left out, as in [`super::aggregate_graph`].
pub fn aggregate_zones(field: &ScoreField, assignment: &ZoneAssignment, zones: &[Zone]) -> Result<Vec<ZoneAggregate>> {
    if assignment.len() != field.len() || assignment.n_zones() != zones.len() {
        return Err(Error::invalid("zone assignment does not match the score field or zone list"));
    }
    let nz = zones.len();
    let (sums, counts) = par::chunked_reduce(
        field.len(),
        (vec![0.0f64; nz], vec![0usize; nz]),
        |(mut s, mut c), i| {
            if let (Some(z), Some(v)) = (assignment.zone_of(i), field.scores[i]) {
                if field.coverage[i] == 0.0 {
                    return (s, c);
                }
                s[z] += v;
                c[z] += 1;
            }
            (s, c)
        },
        |(mut s, mut c), (s2, c2)| {
            for z in 0..nz {
                s[z] += s2[z];
                c[z] += c2[z];
            }
            (s, c)
        },
    );
    let mut out: Vec<ZoneAggregate> = zones
        .iter()
        .enumerate()
        .map(|(z, zone)| ZoneAggregate {
            zone_id: zone.id.clone(),
            mean_score: (counts[z] > 0).then(|| sums[z] / counts[z] as f64),
            point_count: counts[z],
            percentile_rank: None,
        })
        .collect();
    let mut order: Vec<usize> = (0..nz).filter(|&z| out[z].mean_score.is_some()).collect();
    order.sort_by(|&a, &b| by_mean(&out[a], &out[b]));
    let n = order.len();
    for (r, &z) in order.iter().enumerate() {
        out[z].percentile_rank = Some(rank_fraction(r, n));
    }
    Ok(out)
}

fn by_mean(a: &ZoneAggregate, b: &ZoneAggregate) -> std::cmp::Ordering {
    let (x, y) = (a.mean_score.unwrap_or(f64::NAN), b.mean_score.unwrap_or(f64::NAN));
    x.total_cmp(&y).then_with(|| a.zone_id.cmp(&b.zone_id))
}

/// Zones in the top and bottom percentile bands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoneRanking {
    /// Descending by mean score.
    pub top: Vec<ZoneAggregate>,
    /// Ascending by mean score.
    pub bottom: Vec<ZoneAggregate>,
}

/// Top band: percentile ≥ 1 − band. Bottom band: percentile ≤ band. A zone
/// that qualifies for both (the median at band 0.5) is listed only in top.
pub fn rank_zones(aggregates: &[ZoneAggregate], band: f64) -> Result<ZoneRanking> {
    if !(band > 0.0 && band <= 0.5) {
        return Err(Error::invalid(format!("band must lie in (0, 0.5], got {band}")));
    }
    let mut top: Vec<ZoneAggregate> = aggregates
        .iter()
        .filter(|a| a.percentile_rank.is_some_and(|r| r >= 1.0 - band - BAND_EPS))
        .cloned()
        .collect();
    let mut bottom: Vec<ZoneAggregate> = aggregates
        .iter()
        .filter(|a| a.percentile_rank.is_some_and(|r| r <= band + BAND_EPS && r < 1.0 - band - BAND_EPS))
        .cloned()
        .collect();
    top.sort_by(|a, b| {
        let (x, y) = (a.mean_score.unwrap_or(f64::NAN), b.mean_score.unwrap_or(f64::NAN));
        y.total_cmp(&x).then_with(|| a.zone_id.cmp(&b.zone_id))
    });
    bottom.sort_by(by_mean);
    Ok(ZoneRanking { top, bottom })
}

/// Highest over lowest zone mean; `None` unless every mean is positive.
pub fn max_min_ratio(aggregates: &[ZoneAggregate]) -> Option<f64> {
    let means: Vec<f64> = aggregates.iter().filter_map(|a| a.mean_score).collect();
    let min = means.iter().copied().fold(f64::INFINITY, f64::min);
    let max = means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (!means.is_empty() && min > 0.0).then(|| max / min)
}
