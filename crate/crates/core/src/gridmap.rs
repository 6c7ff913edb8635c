//! Binary occupancy mapping with an altitude-dependent sensor.
//!
//! Cells hold the posterior probability that the terrain is "interesting".
//! Measurements are square patches whose side grows with altitude; a patch
//! taken from above the lowest altitude is sensed at a coarser resolution and
//! each coarse pixel is applied to all map cells under it. Fusion is the
//! usual log-odds update, so the order of independent measurements does not
//! matter as long as no cell saturates at the clamp.

use std::io::{BufRead, Write};

use rand::Rng;

use crate::error::{Error, Result};
use crate::seeding::{mix64, unit_f64};
use crate::textgrid::{read_text_grid, write_pgm, write_text_grid};

/// Cell probabilities are kept inside `[P_MIN, 1 - P_MIN]` after fusion.
pub const P_MIN: f64 = 1e-4;

fn log_odds_limit() -> f64 {
    ((1.0 - P_MIN) / P_MIN).ln()
}

fn sigmoid(l: f64) -> f64 {
    1.0 / (1.0 + (-l).exp())
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Class importance weights `w1` (interesting) and `w2` (uninteresting).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ImportanceWeights {
    w1: f64,
    w2: f64,
}

impl ImportanceWeights {
    pub fn new(w1: f64, w2: f64) -> Result<Self> {
        if !(w1 >= 0.0 && w2 >= 0.0 && ((w1 + w2) - 1.0).abs() <= 1e-12) {
            return Err(Error::Config(format!(
                "importance weights must be non-negative and sum to 1, got {w1} and {w2}"
            )));
        }
        Ok(Self { w1, w2 })
    }

    pub fn from_interesting(w1: f64) -> Result<Self> {
        Self::new(w1, 1.0 - w1)
    }

    pub fn interesting(&self) -> f64 {
        self.w1
    }

    pub fn uninteresting(&self) -> f64 {
        self.w2
    }

    /// Weights applied to the `p` and `1 - p` terms for a cell at `p`.
    #[inline]
    fn split(&self, p: f64) -> (f64, f64) {
        if p > 0.5 {
            (self.w1, 1.0 - self.w1)
        } else if p < 0.5 {
            (self.w2, 1.0 - self.w2)
        } else {
            (0.5, 0.5)
        }
    }
}

impl Default for ImportanceWeights {
    fn default() -> Self {
        Self { w1: 0.8, w2: 1.0 - 0.8 }
    }
}

#[inline]
fn xlog2x(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        x * x.log2()
    }
}

#[inline]
pub(crate) fn weighted_entropy_unchecked(p: f64, w: &ImportanceWeights) -> f64 {
    let (wp, wq) = w.split(p);
    -(wp * xlog2x(p) + wq * xlog2x(1.0 - p))
}

/// Importance-weighted binary entropy of one cell, in bits.
pub fn weighted_cell_entropy(p: f64, w: &ImportanceWeights) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
    }
    Ok(weighted_entropy_unchecked(p, w))
}

/// Memoizes `f(p)` on the exact bit pattern of `p`. Fused maps hold few
/// distinct values, so most lookups hit.
pub(crate) struct ValueCache<F: Fn(f64) -> f64> {
    keys: [u64; 256],
    vals: [f64; 256],
    f: F,
}

impl<F: Fn(f64) -> f64> ValueCache<F> {
    pub(crate) fn new(f: F) -> Self {
        Self {
            // NaN bit pattern never produced by a valid probability
            keys: [u64::MAX; 256],
            vals: [0.0; 256],
            f,
        }
    }

    #[inline]
    pub(crate) fn get(&mut self, p: f64) -> f64 {
        let bits = p.to_bits();
        let slot = (mix64(bits) & 255) as usize;
        if self.keys[slot] != bits {
            self.keys[slot] = bits;
            self.vals[slot] = (self.f)(p);
        }
        self.vals[slot]
    }
}

/// Neumaier compensated summation.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn total(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Sensor accuracy per flight altitude.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorModel {
    entries: Vec<(f64, f64)>,
}

impl SensorModel {
    pub fn new(entries: Vec<(f64, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Config("sensor model needs at least one altitude".into()));
        }
        for (i, &(alt, acc)) in entries.iter().enumerate() {
            if !(alt > 0.0 && alt.is_finite()) {
                return Err(Error::Config(format!("sensor altitude {alt} must be positive")));
            }
            if !(acc > 0.5 && acc <= 1.0) {
                return Err(Error::Config(format!(
                    "sensor accuracy {acc} at {alt} m must lie in (0.5, 1]"
                )));
            }
            if i > 0 && alt <= entries[i - 1].0 {
                return Err(Error::Config("sensor altitudes must be strictly increasing".into()));
            }
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    pub fn accuracy(&self, altitude: f64) -> Result<f64> {
        self.entries
            .iter()
            .find(|(a, _)| (a - altitude).abs() < 1e-9)
            .map(|&(_, acc)| acc)
            .ok_or_else(|| Error::Config(format!("no sensor accuracy for altitude {altitude} m")))
    }

    /// Side of one sensor pixel in map cells at `altitude`; the lowest
    /// altitude senses at map resolution.
    pub fn block_size(&self, altitude: f64) -> usize {
        ((altitude / self.entries[0].0).round() as usize).max(1)
    }
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            entries: vec![(5.0, 0.99), (10.0, 0.735), (15.0, 0.625)],
        }
    }
}

/// Inclusive-exclusive rectangle of map cells `[x0, x0 + w) x [y0, y0 + h)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellRect {
    pub x0: usize,
    pub y0: usize,
    pub w: usize,
    pub h: usize,
}

impl CellRect {
    pub fn area(&self) -> usize {
        self.w * self.h
    }

    pub fn contains(&self, x: usize, y: usize) -> bool {
        x >= self.x0 && x < self.x0 + self.w && y >= self.y0 && y < self.y0 + self.h
    }

    pub fn fits(&self, width: usize, height: usize) -> bool {
        self.x0 + self.w <= width && self.y0 + self.h <= height
    }

    /// `(x, y)` cells in row-major order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.y0..self.y0 + self.h).flat_map(move |y| (self.x0..self.x0 + self.w).map(move |x| (x, y)))
    }
}

/// Unclipped square footprint in cell coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RawFootprint {
    pub x0: i64,
    pub y0: i64,
    pub side: usize,
}

impl RawFootprint {
    pub fn clip(&self, width: usize, height: usize) -> Option<CellRect> {
        let x_lo = self.x0.max(0);
        let y_lo = self.y0.max(0);
        let x_hi = (self.x0 + self.side as i64).min(width as i64);
        let y_hi = (self.y0 + self.side as i64).min(height as i64);
        (x_hi > x_lo && y_hi > y_lo).then(|| CellRect {
            x0: x_lo as usize,
            y0: y_lo as usize,
            w: (x_hi - x_lo) as usize,
            h: (y_hi - y_lo) as usize,
        })
    }
}

fn snap(v: f64, up: bool) -> i64 {
    let r = v.round();
    if (v - r).abs() < 1e-9 {
        r as i64
    } else if up {
        v.ceil() as i64
    } else {
        v.floor() as i64
    }
}

/// Square footprint of side `factor * altitude` centred below `position`
/// (meters, `[x east, y north, z up]`), before clipping to the map.
pub fn raw_footprint(position: [f64; 3], factor: f64, resolution: f64) -> Result<RawFootprint> {
    let [x, y, z] = position;
    if !(z > 0.0) {
        return Err(Error::InvalidPosition(format!("altitude {z} must be positive")));
    }
    let side = ((factor * z / resolution).round() as usize).max(1);
    let half = side as f64 / 2.0;
    // an odd remainder goes to the west and north side
    Ok(RawFootprint {
        x0: snap(x / resolution - half, false),
        y0: snap(y / resolution - half, true),
        side,
    })
}

/// Footprint of a measurement at `position`, clipped to a `width x height` map.
pub fn footprint(
    position: [f64; 3],
    factor: f64,
    width: usize,
    height: usize,
    resolution: f64,
) -> Result<CellRect> {
    let [x, y, _] = position;
    let (xmax, ymax) = (width as f64 * resolution, height as f64 * resolution);
    if !(0.0..=xmax).contains(&x) || !(0.0..=ymax).contains(&y) {
        return Err(Error::InvalidPosition(format!(
            "({x}, {y}) lies outside the {xmax} x {ymax} m terrain"
        )));
    }
    raw_footprint(position, factor, resolution)?
        .clip(width, height)
        .ok_or_else(|| Error::InvalidPosition("footprint does not overlap the map".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthMap {
    width: usize,
    height: usize,
    resolution: f64,
    cells: Vec<u8>,
}

impl GroundTruthMap {
    pub fn new(width: usize, height: usize, resolution: f64, cells: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || cells.len() != width * height {
            return Err(Error::Data(format!(
                "{} labels do not fill a {width} x {height} map",
                cells.len()
            )));
        }
        if cells.iter().any(|&c| c > 1) {
            return Err(Error::Data("ground-truth labels must be 0 or 1".into()));
        }
        if !(resolution > 0.0) {
            return Err(Error::Data("resolution must be positive".into()));
        }
        Ok(Self {
            width,
            height,
            resolution,
            cells,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn label(&self, x: usize, y: usize) -> u8 {
        self.cells[y * self.width + x]
    }

    pub fn interesting_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c == 1).count()
    }

    pub fn interesting_fraction(&self) -> f64 {
        self.interesting_count() as f64 / self.cells.len() as f64
    }

    pub fn roi_mask(&self) -> Vec<bool> {
        self.cells.iter().map(|&c| c == 1).collect()
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let g = read_text_grid(r)?;
        let cells = g
            .values
            .iter()
            .map(|&v| {
                if v == 0.0 {
                    Ok(0)
                } else if v == 1.0 {
                    Ok(1)
                } else {
                    Err(Error::Data(format!("label {v} is not 0 or 1")))
                }
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::new(g.width, g.height, g.resolution, cells)
    }

    pub fn write_text<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        write_text_grid(w, self.width, self.height, self.resolution, &self.cells)
    }

    pub fn write_pgm<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let bytes: Vec<u8> = self.cells.iter().map(|&c| c * 255).collect();
        write_pgm(w, self.width, self.height, &bytes)
    }
}

/// Source of uniform draws for sensor noise, keyed by sensor pixel.
pub trait NoiseSource {
    fn uniform(&mut self, pixel_key: u64) -> f64;
}

/// Sequential draws from an RNG; the key is ignored.
pub struct RngNoise<'a, R: Rng + ?Sized>(pub &'a mut R);

impl<R: Rng + ?Sized> NoiseSource for RngNoise<'_, R> {
    fn uniform(&mut self, _pixel_key: u64) -> f64 {
        self.0.random::<f64>()
    }
}

/// Noise that depends only on `(seed, step, agent, pixel)`, so two runs that
/// sense the same pixel at the same step see the same flip.
#[derive(Debug, Clone, Copy)]
pub struct KeyedNoise {
    base: u64,
}

impl KeyedNoise {
    pub fn new(seed: u64, step: usize, agent: usize) -> Self {
        Self {
            base: mix64(mix64(seed) ^ mix64(((step as u64) << 32) | agent as u64)),
        }
    }
}

impl NoiseSource for KeyedNoise {
    fn uniform(&mut self, pixel_key: u64) -> f64 {
        unit_f64(mix64(self.base ^ mix64(pixel_key)))
    }
}

fn pixel_key(x: i64, y: i64) -> u64 {
    ((x as u64) << 32) ^ (y as u32 as u64)
}

/// A simulated class-label patch.
#[derive(Debug, Clone, PartialEq)]
pub struct Measurement {
    pub position: [f64; 3],
    pub footprint: CellRect,
    /// Observed labels over `footprint`, row-major.
    pub values: Vec<u8>,
    pub accuracy: f64,
    pub agent: usize,
    pub step: usize,
}

impl Measurement {
    pub fn value(&self, x: usize, y: usize) -> u8 {
        let r = &self.footprint;
        self.values[(y - r.y0) * r.w + (x - r.x0)]
    }
}

/// Senses `gt` from `position`. Each sensor pixel reports the majority label
/// of the cells it covers (ties count as interesting), flipped with
/// probability `1 - accuracy`.
pub fn simulate_measurement<N: NoiseSource + ?Sized>(
    gt: &GroundTruthMap,
    position: [f64; 3],
    sensor: &SensorModel,
    factor: f64,
    noise: &mut N,
    agent: usize,
    step: usize,
) -> Result<Measurement> {
    let accuracy = sensor.accuracy(position[2])?;
    let block = sensor.block_size(position[2]);
    let rect = footprint(position, factor, gt.width, gt.height, gt.resolution)?;
    let raw = raw_footprint(position, factor, gt.resolution)?;
    let mut values = vec![0u8; rect.area()];
    let k = block as i64;
    let bx_lo = (rect.x0 as i64 - raw.x0).div_euclid(k);
    let bx_hi = ((rect.x0 + rect.w) as i64 - 1 - raw.x0).div_euclid(k);
    let by_lo = (rect.y0 as i64 - raw.y0).div_euclid(k);
    let by_hi = ((rect.y0 + rect.h) as i64 - 1 - raw.y0).div_euclid(k);
    for by in by_lo..=by_hi {
        let ay = raw.y0 + by * k;
        let ys = (ay.max(rect.y0 as i64) as usize)..((ay + k).min((rect.y0 + rect.h) as i64) as usize);
        for bx in bx_lo..=bx_hi {
            let ax = raw.x0 + bx * k;
            let xs =
                (ax.max(rect.x0 as i64) as usize)..((ax + k).min((rect.x0 + rect.w) as i64) as usize);
            let mut ones = 0usize;
            let mut total = 0usize;
            for y in ys.clone() {
                for x in xs.clone() {
                    ones += gt.label(x, y) as usize;
                    total += 1;
                }
            }
            let truth = u8::from(2 * ones >= total);
            let observed = if noise.uniform(pixel_key(ax, ay)) < accuracy {
                truth
            } else {
                1 - truth
            };
            for y in ys.clone() {
                let row = (y - rect.y0) * rect.w;
                for x in xs.clone() {
                    values[row + x - rect.x0] = observed;
                }
            }
        }
    }
    Ok(Measurement {
        position,
        footprint: rect,
        values,
        accuracy,
        agent,
        step,
    })
}

/// Posterior belief over a binary map.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    prob: Vec<f64>,
    log_odds: Vec<f64>,
}

impl OccupancyGrid {
    /// Every cell at probability 0.5.
    pub fn uniform(width: usize, height: usize, resolution: f64) -> Self {
        Self {
            width,
            height,
            resolution,
            prob: vec![0.5; width * height],
            log_odds: vec![0.0; width * height],
        }
    }

    pub fn from_probabilities(width: usize, height: usize, resolution: f64, prob: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || prob.len() != width * height {
            return Err(Error::Data(format!(
                "{} probabilities do not fill a {width} x {height} grid",
                prob.len()
            )));
        }
        if let Some(p) = prob.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
        }
        let log_odds = prob.iter().map(|&p| logit(p)).collect();
        Ok(Self {
            width,
            height,
            resolution,
            prob,
            log_odds,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.prob.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prob.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.prob
    }

    pub fn probability(&self, x: usize, y: usize) -> f64 {
        self.prob[y * self.width + x]
    }

    /// Bayesian log-odds update with a measurement; see the module docs.
    pub fn fuse(&mut self, m: &Measurement) -> Result<()> {
        let r = m.footprint;
        if !r.fits(self.width, self.height) {
            return Err(Error::InvalidMeasurement(format!(
                "footprint {r:?} exceeds the {} x {} grid",
                self.width, self.height
            )));
        }
        if m.values.len() != r.area() {
            return Err(Error::InvalidMeasurement(format!(
                "{} values for a {} x {} footprint",
                m.values.len(),
                r.w,
                r.h
            )));
        }
        if !(m.accuracy > 0.0 && m.accuracy <= 1.0) {
            return Err(Error::InvalidMeasurement(format!("accuracy {}", m.accuracy)));
        }
        let limit = log_odds_limit();
        let delta = (m.accuracy / (1.0 - m.accuracy)).ln();
        let mut last = (f64::NAN, f64::NAN);
        for (row_values, y) in m.values.chunks(r.w).zip(r.y0..r.y0 + r.h) {
            let base = y * self.width + r.x0;
            for (i, &v) in row_values.iter().enumerate() {
                let idx = base + i;
                let step = if v == 1 { delta } else { -delta };
                let l = (self.log_odds[idx].clamp(-limit, limit) + step).clamp(-limit, limit);
                self.log_odds[idx] = l;
                if l.to_bits() != last.0.to_bits() {
                    last = (l, sigmoid(l));
                }
                self.prob[idx] = last.1;
            }
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(r: R) -> Result<Self> {
        let g = read_text_grid(r)?;
        Self::from_probabilities(g.width, g.height, g.resolution, g.values)
    }

    pub fn write_text<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        write_text_grid(w, self.width, self.height, self.resolution, &self.prob)
    }

    pub fn write_pgm<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        let bytes: Vec<u8> = self.prob.iter().map(|p| (p * 255.0).round() as u8).collect();
        write_pgm(w, self.width, self.height, &bytes)
    }
}

/// Free-function form of [`OccupancyGrid::fuse`].
pub fn fuse_measurement(grid: &mut OccupancyGrid, m: &Measurement) -> Result<()> {
    grid.fuse(m)
}

/// Sum of weighted cell entropies, optionally restricted to `mask`.
pub fn map_entropy(grid: &OccupancyGrid, w: &ImportanceWeights, mask: Option<&[bool]>) -> Result<f64> {
    if let Some(m) = mask {
        if m.len() != grid.len() {
            return Err(Error::Domain(format!(
                "mask has {} cells, grid has {}",
                m.len(),
                grid.len()
            )));
        }
    }
    let mut cache = ValueCache::new(|p| weighted_entropy_unchecked(p, w));
    let mut sum = CompensatedSum::default();
    match mask {
        None => grid.prob.iter().for_each(|&p| sum.add(cache.get(p))),
        Some(m) => grid
            .prob
            .iter()
            .zip(m)
            .filter(|(_, &keep)| keep)
            .for_each(|(&p, _)| sum.add(cache.get(p))),
    }
    Ok(sum.total())
}
