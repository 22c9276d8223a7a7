//! Automatic color equalization.
//!
//! Each pixel's response is the distance-weighted average of the clamped
//! slope of its differences to every other pixel,
//!
//! ```text
//! R(x) = Σ_{y≠x} w(x,y) s(I(x) - I(y)) / Σ_{y≠x} w(x,y),   w = 1 / ‖x - y‖
//! ```
//!
//! followed by a per-channel min-max rescale. [`ace_exact`] evaluates the
//! double sum directly. [`ace_fast`] replaces `I(x)` with a set of uniform
//! levels, computes one FFT convolution per level, and interpolates between
//! the two levels that bracket each pixel.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft::Fft2d;
use crate::error::{DehazeError, Result};
use crate::raster::{ImageGray, ImageRgb};

/// Largest side accepted by the quadratic reference implementation.
pub const EXACT_SIZE_LIMIT: usize = 64;

/// Ranges of R narrower than this are treated as constant.
const FLAT_RANGE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AceConfig {
    pub slope_alpha: f64,
    pub levels: usize,
}

impl Default for AceConfig {
    fn default() -> Self {
        Self {
            slope_alpha: 5.0,
            levels: 8,
        }
    }
}

impl AceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.slope_alpha >= 1.0) {
            return Err(DehazeError::Config(format!(
                "ACE slope must be at least 1, got {}",
                self.slope_alpha
            )));
        }
        if self.levels < 2 {
            return Err(DehazeError::Config("ACE needs at least 2 levels".into()));
        }
        Ok(())
    }
}

#[inline]
pub fn slope_function(d: f64, alpha: f64) -> f64 {
    (alpha * d).clamp(-1.0, 1.0)
}

#[inline]
fn weight(dx: isize, dy: isize) -> f64 {
    if dx == 0 && dy == 0 {
        0.0
    } else {
        1.0 / ((dx * dx + dy * dy) as f64).sqrt()
    }
}

fn rescale(width: usize, height: usize, r: &[f64]) -> Result<ImageGray> {
    let (lo, hi) = r
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let data = if hi - lo < FLAT_RANGE {
        vec![0.5; r.len()]
    } else {
        r.iter().map(|&v| (v - lo) / (hi - lo)).collect()
    };
    ImageGray::from_vec_clamped(width, height, data)
}

/// Raw response `R` by direct summation over all pixel pairs.
pub fn ace_response_exact(ch: &ImageGray, cfg: &AceConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    let (w, h) = ch.dims();
    if w > EXACT_SIZE_LIMIT || h > EXACT_SIZE_LIMIT {
        return Err(DehazeError::SizeGuard {
            width: w,
            height: h,
            limit: EXACT_SIZE_LIMIT,
        });
    }
    let (kw, kh) = (2 * w - 1, 2 * h - 1);
    let table: Vec<f64> = (0..kh)
        .flat_map(|j| (0..kw).map(move |i| weight(i as isize - (w as isize - 1), j as isize - (h as isize - 1))))
        .collect();
    let data = ch.as_slice();
    let mut r = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let v = data[y * w + x];
            let term = |qx: usize, qy: usize| {
                let wt = table[(y + h - 1 - qy) * kw + x + w - 1 - qx];
                (wt * slope_function(v - data[qy * w + qx], cfg.slope_alpha), wt)
            };
            // Offsets +k and -k are added as a pair first so the summation
            // order is unchanged by a horizontal flip.
            let (mut num, mut den) = (0.0, 0.0);
            for qy in 0..h {
                for k in 0..w {
                    let right = (x + k < w).then(|| term(x + k, qy));
                    let left = (k > 0 && k <= x).then(|| term(x - k, qy));
                    let (n, d) = match (right, left) {
                        (Some(a), Some(b)) => (a.0 + b.0, a.1 + b.1),
                        (Some(a), None) | (None, Some(a)) => a,
                        (None, None) => continue,
                    };
                    num += n;
                    den += d;
                }
            }
            r.push(if den > 0.0 { num / den } else { 0.0 });
        }
    }
    Ok(r)
}

/// Quadratic-cost reference. Rejects channels larger than
/// [`EXACT_SIZE_LIMIT`] on either side.
pub fn ace_exact(ch: &ImageGray, cfg: &AceConfig) -> Result<ImageGray> {
    let r = ace_response_exact(ch, cfg)?;
    rescale(ch.width(), ch.height(), &r)
}

/// Level-interpolated ACE for one image size, reusable across channels.
pub struct FastAce {
    width: usize,
    height: usize,
    pad_w: usize,
    pad_h: usize,
    fft: Fft2d,
    kernel: Vec<Complex64>,
    norm: Vec<f64>,
    cfg: AceConfig,
}

impl FastAce {
    pub fn new(width: usize, height: usize, cfg: AceConfig) -> Result<Self> {
        cfg.validate()?;
        let pad_w = (2 * width - 1).next_power_of_two();
        let pad_h = (2 * height - 1).next_power_of_two();
        let fft = Fft2d::new(pad_w, pad_h);

        // Kernel for offsets (dx, dy) with |dx| < width, |dy| < height,
        // stored with wraparound so circular convolution acts linearly on
        // the zero-padded image region.
        let mut kernel = vec![Complex64::default(); pad_w * pad_h];
        for dy in -(height as isize - 1)..height as isize {
            for dx in -(width as isize - 1)..width as isize {
                let i = dy.rem_euclid(pad_h as isize) as usize * pad_w
                    + dx.rem_euclid(pad_w as isize) as usize;
                kernel[i] = Complex64::new(weight(dx, dy), 0.0);
            }
        }
        fft.forward(&mut kernel);

        let mut this = Self {
            width,
            height,
            pad_w,
            pad_h,
            fft,
            kernel,
            norm: Vec::new(),
            cfg,
        };
        let ones = vec![1.0; width * height];
        let (norm, _) = this.convolve_pair(&ones, None);
        this.norm = norm;
        Ok(this)
    }

    /// Convolves one or two real signals with the weight kernel in a single
    /// complex transform (the second rides in the imaginary part).
    fn convolve_pair(&self, a: &[f64], b: Option<&[f64]>) -> (Vec<f64>, Vec<f64>) {
        let (w, h) = (self.width, self.height);
        let mut buf = vec![Complex64::default(); self.pad_w * self.pad_h];
        for y in 0..h {
            for x in 0..w {
                let im = b.map_or(0.0, |b| b[y * w + x]);
                buf[y * self.pad_w + x] = Complex64::new(a[y * w + x], im);
            }
        }
        self.fft.forward(&mut buf);
        buf.iter_mut().zip(&self.kernel).for_each(|(v, k)| *v *= k);
        self.fft.inverse(&mut buf);
        let mut re = Vec::with_capacity(w * h);
        let mut im = Vec::with_capacity(if b.is_some() { w * h } else { 0 });
        for y in 0..h {
            for v in &buf[y * self.pad_w..y * self.pad_w + w] {
                re.push(v.re);
                if b.is_some() {
                    im.push(v.im);
                }
            }
        }
        (re, im)
    }

    fn level(&self, j: usize) -> f64 {
        j as f64 / (self.cfg.levels - 1) as f64
    }

    /// Raw interpolated response `R` for one channel.
    pub fn response(&self, ch: &ImageGray) -> Result<Vec<f64>> {
        if ch.dims() != (self.width, self.height) {
            return Err(DehazeError::Shape(format!(
                "engine built for {}x{}, channel is {}x{}",
                self.width,
                self.height,
                ch.width(),
                ch.height()
            )));
        }
        let data = ch.as_slice();
        let alpha = self.cfg.slope_alpha;
        let n_levels = self.cfg.levels;
        let slope_at = |j: usize| -> Vec<f64> {
            let l = self.level(j);
            data.iter().map(|&v| slope_function(l - v, alpha)).collect()
        };

        let mut per_level: Vec<Vec<f64>> = Vec::with_capacity(n_levels);
        let mut j = 0;
        while j < n_levels {
            let a = slope_at(j);
            if j + 1 < n_levels {
                let b = slope_at(j + 1);
                let (ca, cb) = self.convolve_pair(&a, Some(&b));
                per_level.push(ca);
                per_level.push(cb);
                j += 2;
            } else {
                per_level.push(self.convolve_pair(&a, None).0);
                j += 1;
            }
        }

        let step = (n_levels - 1) as f64;
        Ok(data
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let pos = (v * step).clamp(0.0, step);
                let lo = (pos.floor() as usize).min(n_levels - 2);
                let t = pos - lo as f64;
                let conv = (1.0 - t) * per_level[lo][i] + t * per_level[lo + 1][i];
                if self.norm[i] > 0.0 {
                    conv / self.norm[i]
                } else {
                    0.0
                }
            })
            .collect())
    }

    pub fn apply(&self, ch: &ImageGray) -> Result<ImageGray> {
        let r = self.response(ch)?;
        rescale(self.width, self.height, &r)
    }
}

pub fn ace_fast(ch: &ImageGray, cfg: &AceConfig) -> Result<ImageGray> {
    FastAce::new(ch.width(), ch.height(), *cfg)?.apply(ch)
}

/// Fast ACE on each channel independently.
pub fn ace_rgb(img: &ImageRgb, cfg: &AceConfig) -> Result<ImageRgb> {
    let engine = FastAce::new(img.width(), img.height(), *cfg)?;
    let [r, g, b] = img.split_channels();
    let (r, g, b) = (engine.apply(&r)?, engine.apply(&g)?, engine.apply(&b)?);
    ImageRgb::from_channels([&r, &g, &b])
}
