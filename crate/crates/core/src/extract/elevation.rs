//! Regular-grid elevation raster (ESRI ASCII grid layout).

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{read_to_string, write_file, Error, Result};
use crate::numfmt::lossless;

/// What to do with queries outside the raster extent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutOfBounds {
    /// Clamp to the nearest edge cell.
    #[default]
    Clamp,
    Error,
}

/// Elevation grid. Row 0 is the northernmost row; cell centers sit at
/// `origin + (col + 0.5, row_from_south + 0.5) * cell_size`.
#[derive(Debug, Clone, PartialEq)]
pub struct ElevationSampler {
    ncols: usize,
    nrows: usize,
    /// Lower-left corner of the grid.
    origin: [f64; 2],
    cell_size: f64,
    nodata: Option<f64>,
    values: Vec<f64>,
    out_of_bounds: OutOfBounds,
}

impl ElevationSampler {
    pub fn new(ncols: usize, nrows: usize, origin: [f64; 2], cell_size: f64, values: Vec<f64>, nodata: Option<f64>) -> Result<Self> {
        if !(cell_size.is_finite() && cell_size > 0.0) {
            return Err(Error::invalid(format!("raster cell size must be positive, got {cell_size}")));
        }
        if ncols == 0 || nrows == 0 || values.len() != ncols * nrows {
            return Err(Error::invalid(format!(
                "raster is {ncols}x{nrows} but holds {} values",
                values.len()
            )));
        }
        Ok(Self { ncols, nrows, origin, cell_size, nodata, values, out_of_bounds: OutOfBounds::Clamp })
    }

    /// Rasterizes `f` at cell centers.
    pub fn from_fn(ncols: usize, nrows: usize, origin: [f64; 2], cell_size: f64, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(ncols * nrows);
        for row in 0..nrows {
            let y = origin[1] + ((nrows - 1 - row) as f64 + 0.5) * cell_size;
            for col in 0..ncols {
                let x = origin[0] + (col as f64 + 0.5) * cell_size;
                values.push(f(x, y));
            }
        }
        Self::new(ncols, nrows, origin, cell_size, values, None)
    }

    pub fn with_out_of_bounds(mut self, policy: OutOfBounds) -> Self {
        self.out_of_bounds = policy;
        self
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    fn cell(&self, col: usize, row_from_south: usize) -> f64 {
        let v = self.values[(self.nrows - 1 - row_from_south) * self.ncols + col];
        match self.nodata {
            Some(nd) if v == nd => f64::NAN,
            _ => v,
        }
    }

    /// Bilinear interpolation between cell centers. Returns
    /// `(elevation, clamped)`; NaN when a contributing cell is nodata.
    pub fn sample(&self, p: [f64; 2]) -> Result<(f64, bool)> {
        let fx = (p[0] - self.origin[0]) / self.cell_size - 0.5;
        let fy = (p[1] - self.origin[1]) / self.cell_size - 0.5;
        let max_x = (self.ncols - 1) as f64;
        let max_y = (self.nrows - 1) as f64;
        let outside = fx < -0.5 || fy < -0.5 || fx > max_x + 0.5 || fy > max_y + 0.5;
        if outside && self.out_of_bounds == OutOfBounds::Error {
            return Err(Error::Extraction(format!("({}, {}) lies outside the elevation raster", p[0], p[1])));
        }
        let fx = fx.clamp(0.0, max_x);
        let fy = fy.clamp(0.0, max_y);
        let c0 = fx.floor() as usize;
        let r0 = fy.floor() as usize;
        let c1 = (c0 + 1).min(self.ncols - 1);
        let r1 = (r0 + 1).min(self.nrows - 1);
        let tx = fx - c0 as f64;
        let ty = fy - r0 as f64;
        let lerp = |a: f64, b: f64, t: f64| if t == 0.0 { a } else { a + (b - a) * t };
        let south = lerp(self.cell(c0, r0), self.cell(c1, r0), tx);
        let north = lerp(self.cell(c0, r1), self.cell(c1, r1), tx);
        Ok((lerp(south, north, ty), outside))
    }

    /// Samples every point; non-finite results name the offending point.
    pub fn sample_all(&self, points: &[[f64; 2]]) -> Result<Vec<f64>> {
        let clamped = AtomicUsize::new(0);
        let samples = crate::par::map_slice(points, |&p| {
            self.sample(p).map(|(v, c)| {
                if c {
                    clamped.fetch_add(1, Ordering::Relaxed);
                }
                v
            })
        });
        let mut out = Vec::with_capacity(points.len());
        for (i, s) in samples.into_iter().enumerate() {
            let v = s?;
            if !v.is_finite() {
                return Err(Error::Extraction(format!(
                    "elevation at point {i} ({}, {}) is not finite",
                    points[i][0], points[i][1]
                )));
            }
            out.push(v);
        }
        let clamped = clamped.into_inner();
        if clamped > 0 {
            log::warn!("{clamped} points fall outside the elevation raster; clamped to its edge");
        }
        Ok(out)
    }

    pub fn to_ascii_grid(&self) -> String {
        let mut s = format!(
            "ncols {}\nnrows {}\nxllcorner {}\nyllcorner {}\ncellsize {}\n",
            self.ncols,
            self.nrows,
            lossless(self.origin[0]),
            lossless(self.origin[1]),
            lossless(self.cell_size)
        );
        if let Some(nd) = self.nodata {
            s.push_str(&format!("NODATA_value {}\n", lossless(nd)));
        }
        for row in self.values.chunks(self.ncols) {
            let line: Vec<String> = row.iter().map(|v| lossless(*v)).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, self.to_ascii_grid())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&read_to_string(path)?, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut header = std::collections::HashMap::new();
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let first = line.split_whitespace().next().unwrap_or("");
            if first.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) && values.is_empty() {
                let mut parts = line.split_whitespace();
                let key = parts.next().unwrap_or("").to_ascii_lowercase();
                let val: f64 = parts
                    .next()
                    .and_then(|v| v.parse().ok())
                    .ok_or_else(|| Error::parse(path, i as u64 + 1, format!("bad header value for `{key}`")))?;
                header.insert(key, val);
            } else {
                for tok in line.split_whitespace() {
                    values.push(
                        tok.parse::<f64>()
                            .map_err(|_| Error::parse(path, i as u64 + 1, format!("bad elevation `{tok}`")))?,
                    );
                }
            }
        }
        let get = |k: &str| header.get(k).copied().ok_or_else(|| Error::parse(path, 0, format!("missing `{k}`")));
        let ncols = get("ncols")? as usize;
        let nrows = get("nrows")? as usize;
        let cell = get("cellsize")?;
        let (x0, y0) = match (header.get("xllcorner"), header.get("xllcenter")) {
            (Some(&x), _) => (x, get("yllcorner")?),
            (None, Some(&x)) => (x - cell / 2.0, get("yllcenter")? - cell / 2.0),
            _ => return Err(Error::parse(path, 0, "missing `xllcorner`")),
        };
        let nodata = header.get("nodata_value").copied();
        Self::new(ncols, nrows, [x0, y0], cell, values, nodata).map_err(|e| Error::parse(path, 0, e.to_string()))
    }
}
