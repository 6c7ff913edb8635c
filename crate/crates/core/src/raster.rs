//! Scalar rasters (for example surface temperature) and their conversion
//! into binary ground truth.

use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gridmap::GroundTruthMap;
use crate::seeding::stream_rng;
use crate::textgrid::{read_text_grid, write_text_grid};

#[derive(Debug, Clone, PartialEq)]
pub struct RasterGrid {
    pub width: usize,
    pub height: usize,
    /// Meters per cell.
    pub resolution: f64,
    /// Row-major from the southern row.
    pub values: Vec<f64>,
}

impl RasterGrid {
    pub fn new(width: usize, height: usize, resolution: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::Data(format!(
                "{} values for a {width} x {height} raster",
                values.len()
            )));
        }
        if !(resolution.is_finite() && resolution > 0.0) {
            return Err(Error::Data(format!("resolution {resolution} is not positive")));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite raster value {v}")));
        }
        Ok(Self {
            width,
            height,
            resolution,
            values,
        })
    }

    pub fn read<R: BufRead>(r: R) -> Result<Self> {
        let g = read_text_grid(r)?;
        Self::new(g.width, g.height, g.resolution, g.values)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(std::io::BufReader::new(f))
    }

    pub fn write<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        write_text_grid(w, self.width, self.height, self.resolution, &self.values)
    }
}

/// Ground truth obtained by thresholding a raster.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub map: GroundTruthMap,
    pub interesting_fraction: f64,
    /// No cell reached the threshold.
    pub degenerate: bool,
}

/// Marks a cell interesting iff its value is at least `threshold`.
pub fn threshold_raster(raster: &RasterGrid, threshold: f64) -> Result<Ingested> {
    if threshold.is_nan() {
        return Err(Error::Usage("threshold is NaN".into()));
    }
    let cells = raster.values.iter().map(|&v| u8::from(v >= threshold)).collect();
    let map = GroundTruthMap::new(raster.width, raster.height, raster.resolution, cells)?;
    let interesting_fraction = map.interesting_fraction();
    Ok(Ingested {
        degenerate: map.interesting_count() == 0,
        interesting_fraction,
        map,
    })
}

pub fn ingest_raster(path: &Path, threshold: f64) -> Result<Ingested> {
    threshold_raster(&RasterGrid::load(path)?, threshold)
}

/// A smooth synthetic temperature field in °C: a gentle gradient plus a few
/// warm patches, with small per-cell noise.
pub fn synthetic_temperature_field(width: usize, height: usize, resolution: f64, seed: u64) -> Result<RasterGrid> {
    let mut rng = stream_rng(seed, 0x7261_7374, 0);
    let w = width as f64;
    let h = height as f64;
    let gx: f64 = rng.random_range(-2.0..2.0);
    let gy: f64 = rng.random_range(-2.0..2.0);
    let patches: Vec<(f64, f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                rng.random_range(0.1..0.9) * w,
                rng.random_range(0.1..0.9) * h,
                rng.random_range(0.15..0.3) * w.min(h),
                rng.random_range(4.0..8.0),
            )
        })
        .collect();
    let mut values = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let (fx, fy) = (x as f64 + 0.5, y as f64 + 0.5);
            let mut t = 21.0 + gx * (fx / w - 0.5) + gy * (fy / h - 0.5);
            for &(cx, cy, s, a) in &patches {
                let d2 = (fx - cx).powi(2) + (fy - cy).powi(2);
                t += a * (-d2 / (2.0 * s * s)).exp();
            }
            t += rng.random_range(-0.3..0.3);
            values.push((t * 100.0).round() / 100.0);
        }
    }
    RasterGrid::new(width, height, resolution, values)
}
