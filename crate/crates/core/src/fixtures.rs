//! Published reference data: the 24-indicator feature list, the six
//! published weight columns, and the street-furniture and
//! traffic-management tables.

use std::collections::BTreeMap;

use crate::ahp::{WeightSet, WeightSource};
use crate::catalog::Polarity;

/// `(id, display name, polarity)` for all 24 indicators.
pub const FEATURES: [(&str, &str, Polarity); 24] = {
    use Polarity::{Negative as N, Positive as P};
    [
        ("pedestrian_density", "Pedestrian density", N),
        ("crowd_dynamics", "Crowd dynamics", N),
        ("pedestrian_flow", "Pedestrian flow", N),
        ("surface_condition", "Surface condition", P),
        ("sidewalk_width", "Sidewalk width", P),
        ("street_furniture", "Density of street furniture", N),
        ("intersection_safety", "Intersection safety", P),
        ("weather", "Weather conditions", P),
        ("curb_ramps", "Curb ramp availability", P),
        ("wireless", "Wireless communication infrastructure", P),
        ("digital_maps", "Existence of detailed digital maps of the area", P),
        ("surface_roughness", "Sidewalk / Surface roughness", N),
        ("gps_signal", "GPS signal strength", P),
        ("local_attitudes", "Local attitudes towards robots", P),
        ("vehicle_traffic", "Vehicle traffic", N),
        ("traffic_management", "Traffic management systems", P),
        ("slope_gradient", "Slope gradient", N),
        ("zoning_laws", "Zoning laws and regulation", P),
        ("street_lighting", "Street lighting", P),
        ("bicycle_traffic", "Bicycle traffic", N),
        ("charging_proximity", "Proximity to charging stations", P),
        ("bike_lanes", "Bike lane availability", P),
        ("cctv", "Surveillance coverage (CCTV)", P),
        ("shade", "Existence of shade", P),
    ]
};

/// Features left out of the city-scale run, with the reason.
pub const NYC_EXCLUDED: [(&str, &str); 5] = [
    ("pedestrian_flow", "data not available"),
    ("weather", "determined in real time at deployment"),
    ("local_attitudes", "data not available"),
    ("street_lighting", "data not available"),
    ("shade", "data not available"),
];

/// Factors the trash-collecting robot profile leaves out.
pub const TRASHBOT_EXCLUDED: [&str; 6] = [
    "traffic_management",
    "zoning_laws",
    "shade",
    "intersection_safety",
    "vehicle_traffic",
    "bike_lanes",
];

/// Published weight columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightColumn {
    All,
    Academia,
    Industry,
    Other,
    NycPoc,
    Trashbot,
}

impl WeightColumn {
    pub const ALL: [WeightColumn; 6] = [
        WeightColumn::All,
        WeightColumn::Academia,
        WeightColumn::Industry,
        WeightColumn::Other,
        WeightColumn::NycPoc,
        WeightColumn::Trashbot,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WeightColumn::All => "all",
            WeightColumn::Academia => "academia",
            WeightColumn::Industry => "industry",
            WeightColumn::Other => "other",
            WeightColumn::NycPoc => "nyc-poc",
            WeightColumn::Trashbot => "trashbot",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == name)
    }

    fn index(self) -> usize {
        self as usize
    }
}

// Columns: All, Academia, Industry, Other, NYC POC, Trashbot. NaN = not used.
const NA: f64 = f64::NAN;
const WEIGHT_TABLE: [(&str, [f64; 6]); 24] = [
    ("pedestrian_density", [0.111, 0.080, 0.069, 0.062, 0.147, 0.173]),
    ("crowd_dynamics", [0.084, 0.082, 0.046, 0.034, 0.095, 0.119]),
    ("pedestrian_flow", [0.081, 0.072, 0.023, 0.034, NA, NA]),
    ("surface_condition", [0.066, 0.063, 0.053, 0.050, 0.092, 0.119]),
    ("sidewalk_width", [0.062, 0.058, 0.063, 0.064, 0.079, 0.083]),
    ("street_furniture", [0.059, 0.061, 0.060, 0.058, 0.076, 0.090]),
    ("intersection_safety", [0.057, 0.051, 0.024, 0.019, 0.066, NA]),
    ("weather", [0.049, 0.058, 0.038, 0.040, NA, NA]),
    ("curb_ramps", [0.048, 0.055, 0.044, 0.049, 0.060, 0.078]),
    ("wireless", [0.046, 0.032, 0.054, 0.056, 0.054, 0.057]),
    ("digital_maps", [0.040, 0.035, 0.026, 0.037, 0.048, 0.062]),
    ("surface_roughness", [0.036, 0.043, 0.052, 0.062, 0.038, 0.038]),
    ("gps_signal", [0.034, 0.031, 0.038, 0.028, 0.041, 0.051]),
    ("local_attitudes", [0.032, 0.033, 0.047, 0.046, NA, NA]),
    ("vehicle_traffic", [0.031, 0.034, 0.037, 0.026, 0.038, NA]),
    ("traffic_management", [0.030, 0.032, 0.041, 0.049, 0.034, NA]),
    ("slope_gradient", [0.029, 0.038, 0.048, 0.062, 0.037, 0.048]),
    ("zoning_laws", [0.026, 0.033, 0.038, 0.037, 0.031, NA]),
    ("street_lighting", [0.019, 0.020, 0.037, 0.023, NA, NA]),
    ("bicycle_traffic", [0.017, 0.028, 0.018, 0.021, 0.020, 0.025]),
    ("charging_proximity", [0.015, 0.017, 0.043, 0.043, 0.018, 0.023]),
    ("bike_lanes", [0.012, 0.016, 0.029, 0.037, 0.013, 0.016]),
    ("cctv", [0.012, 0.014, 0.035, 0.034, 0.014, 0.019]),
    ("shade", [0.008, 0.014, 0.037, 0.030, NA, NA]),
];

/// The column exactly as published (three decimals, sums to roughly 1).
pub fn published_column(column: WeightColumn) -> Vec<(&'static str, f64)> {
    WEIGHT_TABLE
        .iter()
        .filter_map(|(id, row)| {
            let w = row[column.index()];
            (!w.is_nan()).then_some((*id, w))
        })
        .collect()
}

/// The published column rescaled to sum to exactly 1.
pub fn weight_set(column: WeightColumn) -> WeightSet {
    let col = published_column(column);
    let ids = col.iter().map(|(id, _)| id.to_string()).collect();
    let raw = col.iter().map(|(_, w)| *w).collect();
    WeightSet::from_unnormalized(ids, raw, WeightSource::File(format!("fixture:{}", column.name())))
        .expect("published weights are positive")
}

/// Street-furniture classes and their footprint weights.
pub const FURNITURE_WEIGHTS: [(&str, f64); 12] = [
    ("bus_stop_shelter", 2.0),
    ("trash_can", 0.5),
    ("linknyc", 2.0),
    ("city_bench", 1.5),
    ("bicycle_parking_shelter", 2.0),
    ("bicycle_rack", 1.5),
    ("tree", 0.15),
    ("newsstand", 3.0),
    ("parking_meter", 0.15),
    ("scaffolding", 2.0),
    ("fire_hydrant", 0.25),
    ("street_sign", 0.05),
];

pub fn furniture_weights() -> BTreeMap<String, f64> {
    FURNITURE_WEIGHTS.iter().map(|(c, w)| (c.to_string(), *w)).collect()
}

/// Traffic-management layers; each present layer adds 1.
pub const TRAFFIC_LAYERS: [&str; 6] = [
    "neighborhood_slow_zones",
    "turn_traffic_calming",
    "sip_corridors",
    "sip_intersections",
    "barnes_dance_intersections",
    "leading_pedestrian_intervals",
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn column_sizes_match_published_table() {
        assert_eq!(published_column(WeightColumn::All).len(), 24);
        assert_eq!(published_column(WeightColumn::NycPoc).len(), 19);
        assert_eq!(published_column(WeightColumn::Trashbot).len(), 15);
    }

    #[test]
    fn fixture_sets_are_normalized() {
        for c in WeightColumn::ALL {
            let ws = weight_set(c);
            assert!((ws.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12, "{c:?}");
        }
    }

    #[test]
    fn pedestrian_density_reference_values() {
        let get = |c| published_column(c).into_iter().find(|(id, _)| *id == "pedestrian_density").unwrap().1;
        assert_eq!(get(WeightColumn::All), 0.111);
        assert_eq!(get(WeightColumn::NycPoc), 0.147);
        assert_eq!(get(WeightColumn::Trashbot), 0.173);
    }

    #[test]
    fn nyc_poc_excludes_exactly_the_unavailable_five() {
        let poc: Vec<_> = published_column(WeightColumn::NycPoc).into_iter().map(|(id, _)| id).collect();
        for (id, _) in NYC_EXCLUDED {
            assert!(!poc.contains(&id));
        }
        assert_eq!(poc.len() + NYC_EXCLUDED.len(), FEATURES.len());
    }
}
