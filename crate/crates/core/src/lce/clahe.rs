//! Contrast-limited adaptive histogram equalization.
//!
//! Each tile gets an `n_bins` histogram whose bins are clipped at
//! `clip_limit * tile_pixels`; the clipped mass is spread evenly over all
//! bins in a single pass and the tile mapping is the resulting CDF,
//! `m(v) = CDF(bin(v))`. Pixels blend the mappings of the four nearest tile
//! centers bilinearly; past the outermost centers the nearest tile is used.

use serde::{Deserialize, Serialize};

use crate::error::{DehazeError, Result};
use crate::raster::{ImageGray, ImageRgb};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TileMode {
    /// Tiles of `ceil(width / d) x ceil(height / d)` pixels.
    FractionalGrid(usize),
    /// Square tiles of the given side, clamped to the image size.
    FixedKernel(usize),
}

impl TileMode {
    /// Tile width and height for an image of the given size.
    pub fn tile_size(&self, width: usize, height: usize) -> (usize, usize) {
        match *self {
            TileMode::FractionalGrid(d) => (width.div_ceil(d).max(1), height.div_ceil(d).max(1)),
            TileMode::FixedKernel(side) => (side.min(width).max(1), side.min(height).max(1)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClaheConfig {
    pub clip_limit: f64,
    pub tile_mode: TileMode,
    pub n_bins: usize,
}

impl Default for ClaheConfig {
    fn default() -> Self {
        Self {
            clip_limit: 0.008,
            tile_mode: TileMode::FractionalGrid(8),
            n_bins: 256,
        }
    }
}

impl ClaheConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.clip_limit > 0.0 && self.clip_limit <= 1.0) {
            return Err(DehazeError::Config(format!(
                "clip limit must lie in (0, 1], got {}",
                self.clip_limit
            )));
        }
        if self.n_bins < 2 {
            return Err(DehazeError::Config("CLAHE needs at least 2 bins".into()));
        }
        match self.tile_mode {
            TileMode::FractionalGrid(0) => {
                Err(DehazeError::Config("tile grid denominator must be positive".into()))
            }
            TileMode::FixedKernel(side) if side < 2 => {
                Err(DehazeError::Config("fixed tile side must be at least 2".into()))
            }
            _ => Ok(()),
        }
    }
}

#[inline]
pub(crate) fn bin_of(v: f64, n_bins: usize) -> usize {
    ((v * n_bins as f64) as usize).min(n_bins - 1)
}

/// Histogram of `values` with every bin clipped at `limit` and the removed
/// mass added back uniformly to all bins.
pub fn clipped_histogram(values: impl Iterator<Item = f64>, n_bins: usize, limit: f64) -> Vec<f64> {
    let mut hist = vec![0.0; n_bins];
    for v in values {
        hist[bin_of(v, n_bins)] += 1.0;
    }
    let excess: f64 = hist.iter().map(|&h| (h - limit).max(0.0)).sum();
    if excess > 0.0 {
        let share = excess / n_bins as f64;
        for h in &mut hist {
            *h = h.min(limit) + share;
        }
    }
    hist
}

fn cdf_mapping(hist: &[f64]) -> Vec<f64> {
    let total: f64 = hist.iter().sum();
    let mut acc = 0.0;
    hist.iter()
        .map(|&h| {
            acc += h;
            (acc / total).min(1.0)
        })
        .collect()
}

/// Tile extents along one axis: `(start, end)` half-open ranges.
fn tile_spans(len: usize, tile: usize) -> Vec<(usize, usize)> {
    (0..len.div_ceil(tile))
        .map(|k| (k * tile, ((k + 1) * tile).min(len)))
        .collect()
}

/// For each coordinate, the two tiles to blend and the weight of the second.
fn axis_weights(len: usize, spans: &[(usize, usize)]) -> Vec<(usize, usize, f64)> {
    let centers: Vec<f64> = spans
        .iter()
        .map(|&(a, b)| (a + b) as f64 / 2.0 - 0.5)
        .collect();
    (0..len)
        .map(|p| {
            let p = p as f64;
            let last = centers.len() - 1;
            if p <= centers[0] {
                (0, 0, 0.0)
            } else if p >= centers[last] {
                (last, last, 0.0)
            } else {
                let k = centers.partition_point(|&c| c <= p) - 1;
                let w = (p - centers[k]) / (centers[k + 1] - centers[k]);
                (k, k + 1, w)
            }
        })
        .collect()
}

pub fn clahe_channel(ch: &ImageGray, cfg: &ClaheConfig) -> Result<ImageGray> {
    cfg.validate()?;
    let (width, height) = ch.dims();
    let (tw, th) = cfg.tile_mode.tile_size(width, height);
    let xs = tile_spans(width, tw);
    let ys = tile_spans(height, th);
    let data = ch.as_slice();

    let mut maps = Vec::with_capacity(xs.len() * ys.len());
    for &(y0, y1) in &ys {
        for &(x0, x1) in &xs {
            let count = (x1 - x0) * (y1 - y0);
            let values = (y0..y1).flat_map(|y| data[y * width + x0..y * width + x1].iter().copied());
            let hist = clipped_histogram(values, cfg.n_bins, cfg.clip_limit * count as f64);
            maps.push(cdf_mapping(&hist));
        }
    }

    let wx = axis_weights(width, &xs);
    let wy = axis_weights(height, &ys);
    let ncols = xs.len();
    let map_at = |tx: usize, ty: usize, bin: usize| maps[ty * ncols + tx][bin];

    let mut out = Vec::with_capacity(width * height);
    for (y, &(ty0, ty1, fy)) in wy.iter().enumerate() {
        for (x, &(tx0, tx1, fx)) in wx.iter().enumerate() {
            let bin = bin_of(data[y * width + x], cfg.n_bins);
            let top = map_at(tx0, ty0, bin) * (1.0 - fx) + map_at(tx1, ty0, bin) * fx;
            let bottom = map_at(tx0, ty1, bin) * (1.0 - fx) + map_at(tx1, ty1, bin) * fx;
            out.push(top * (1.0 - fy) + bottom * fy);
        }
    }
    ImageGray::from_vec_clamped(width, height, out)
}

pub fn clahe_rgb(img: &ImageRgb, cfg: &ClaheConfig) -> Result<ImageRgb> {
    let [r, g, b] = img.split_channels();
    let (r, g, b) = (
        clahe_channel(&r, cfg)?,
        clahe_channel(&g, cfg)?,
        clahe_channel(&b, cfg)?,
    );
    ImageRgb::from_channels([&r, &g, &b])
}

/// Plain global histogram equalization: one tile, no clipping.
pub fn global_hist_eq(ch: &ImageGray, n_bins: usize) -> Result<ImageGray> {
    if n_bins < 2 {
        return Err(DehazeError::Config("histogram equalization needs at least 2 bins".into()));
    }
    let n = ch.as_slice().len() as f64;
    let hist = clipped_histogram(ch.as_slice().iter().copied(), n_bins, n);
    let map = cdf_mapping(&hist);
    Ok(ch.map(|v| map[bin_of(v, n_bins)]))
}

pub fn global_hist_eq_rgb(img: &ImageRgb, n_bins: usize) -> Result<ImageRgb> {
    let [r, g, b] = img.split_channels();
    let (r, g, b) = (
        global_hist_eq(&r, n_bins)?,
        global_hist_eq(&g, n_bins)?,
        global_hist_eq(&b, n_bins)?,
    );
    ImageRgb::from_channels([&r, &g, &b])
}
