//! STRESS: stretch every pixel between the average minimum and maximum of
//! random radial sprays drawn around it.
//!
//! Randomness is counter-based. The stream of pixel `(x, y)` at iteration
//! `i` is a fixed window of a ChaCha8 stream keyed by the seed, with stream
//! id = pixel index and word offset = `i * WORDS_PER_ITERATION`. The output
//! therefore depends only on the image and the configuration, never on the
//! order in which pixels are visited.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{DehazeError, Result};
use crate::raster::ImageRgb;

/// Extra attempts for a sample that lands outside the image or on the center.
pub const MAX_REDRAWS: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StressConfig {
    pub n_samples: usize,
    pub n_iterations: usize,
    /// Spray radius in pixels; `None` means `max(width, height)`.
    pub radius: Option<usize>,
    pub seed: u64,
}

impl Default for StressConfig {
    fn default() -> Self {
        Self {
            n_samples: 5,
            n_iterations: 150,
            radius: None,
            seed: 0,
        }
    }
}

impl StressConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 || self.n_iterations == 0 {
            return Err(DehazeError::Config(
                "STRESS needs at least one sample and one iteration".into(),
            ));
        }
        if self.radius == Some(0) {
            return Err(DehazeError::Config("spray radius must be at least 1".into()));
        }
        Ok(())
    }

    pub fn radius_for(&self, width: usize, height: usize) -> usize {
        self.radius.unwrap_or(width.max(height)).max(1)
    }
}

/// Draws `n` spray positions around `center`.
///
/// Angle is uniform on `[0, 2π)` and distance is `radius * u` with `u`
/// uniform on `(0, 1]`, rounded to the nearest pixel. A position outside
/// the image or equal to the center is redrawn up to [`MAX_REDRAWS`] times;
/// the last attempt is then clamped to the image border.
pub fn spray_sample<R: Rng>(
    center: (usize, usize),
    width: usize,
    height: usize,
    radius: usize,
    n: usize,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let (cx, cy) = (center.0 as f64, center.1 as f64);
    let radius = radius as f64;
    (0..n)
        .map(|_| {
            let mut attempt = (0.0, 0.0);
            for _ in 0..=MAX_REDRAWS {
                let theta = rng.random::<f64>() * std::f64::consts::TAU;
                let dist = radius * (1.0 - rng.random::<f64>());
                let px = (cx + dist * theta.cos()).round();
                let py = (cy + dist * theta.sin()).round();
                attempt = (px, py);
                let inside = px >= 0.0 && py >= 0.0 && px < width as f64 && py < height as f64;
                if inside && (px, py) != (cx, cy) {
                    return (px as usize, py as usize);
                }
            }
            (
                attempt.0.clamp(0.0, (width - 1) as f64) as usize,
                attempt.1.clamp(0.0, (height - 1) as f64) as usize,
            )
        })
        .collect()
}

/// Upper bound on 32-bit words one iteration can consume: two `f64` draws
/// (two words each) per attempt.
fn words_per_iteration(n_samples: usize) -> u128 {
    (n_samples * (MAX_REDRAWS + 1) * 4) as u128
}

/// Random stream for pixel `index` at `iteration`.
pub fn pixel_stream(seed: u64, index: usize, iteration: usize, n_samples: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng.set_word_pos(iteration as u128 * words_per_iteration(n_samples));
    rng
}

pub fn stress(img: &ImageRgb, cfg: &StressConfig) -> Result<ImageRgb> {
    cfg.validate()?;
    let (w, h) = img.dims();
    let radius = cfg.radius_for(w, h);
    let src = img.as_slice();
    let inv_iters = 1.0 / cfg.n_iterations as f64;

    let mut out = vec![0.0; w * h * 3];
    out.par_chunks_mut(w * 3).enumerate().for_each(|(y, row)| {
        // Same streams as `pixel_stream`, without re-keying per pixel.
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        for x in 0..w {
            let index = y * w + x;
            rng.set_stream(index as u64);
            let p = &src[index * 3..index * 3 + 3];
            let mut sum_min = [0.0; 3];
            let mut sum_max = [0.0; 3];
            for it in 0..cfg.n_iterations {
                rng.set_word_pos(it as u128 * words_per_iteration(cfg.n_samples));
                let mut lo = [p[0], p[1], p[2]];
                let mut hi = lo;
                for (sx, sy) in spray_sample((x, y), w, h, radius, cfg.n_samples, &mut rng) {
                    let q = &src[(sy * w + sx) * 3..(sy * w + sx) * 3 + 3];
                    for c in 0..3 {
                        lo[c] = lo[c].min(q[c]);
                        hi[c] = hi[c].max(q[c]);
                    }
                }
                for c in 0..3 {
                    sum_min[c] += lo[c];
                    sum_max[c] += hi[c];
                }
            }
            for c in 0..3 {
                let (lo, hi) = (sum_min[c] * inv_iters, sum_max[c] * inv_iters);
                row[x * 3 + c] = if hi > lo { (p[c] - lo) / (hi - lo) } else { 0.5 };
            }
        }
    });
    ImageRgb::from_vec_clamped(w, h, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_radius_stays_in_neighborhood() {
        let mut rng = pixel_stream(3, 0, 0, 64);
        for (x, y) in spray_sample((5, 5), 11, 11, 1, 64, &mut rng) {
            assert!(x.abs_diff(5) <= 1 && y.abs_diff(5) <= 1);
            assert_ne!((x, y), (5, 5));
        }
    }

    #[test]
    fn replay_is_identical() {
        let a = spray_sample((3, 4), 10, 10, 6, 20, &mut pixel_stream(42, 7, 3, 20));
        let b = spray_sample((3, 4), 10, 10, 6, 20, &mut pixel_stream(42, 7, 3, 20));
        assert_eq!(a, b);
    }

    #[test]
    fn single_pixel_image_clamps() {
        let s = spray_sample((0, 0), 1, 1, 5, 8, &mut pixel_stream(0, 0, 0, 8));
        assert!(s.iter().all(|&p| p == (0, 0)));
    }

    #[test]
    fn constant_image_is_half() {
        let img = ImageRgb::filled(6, 5, [0.3, 0.6, 0.1]).unwrap();
        let cfg = StressConfig { n_iterations: 10, ..Default::default() };
        assert!(stress(&img, &cfg).unwrap().as_slice().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn two_pixel_image() {
        let img = ImageRgb::from_vec(2, 1, vec![0.0, 0.0, 0.0, 1.0, 1.0, 1.0]).unwrap();
        let out = stress(&img, &StressConfig::default()).unwrap();
        assert_eq!(out.pixel(0, 0), [0.0; 3]);
        assert_eq!(out.pixel(1, 0), [1.0; 3]);
    }

    #[test]
    fn channel_permutation_commutes() {
        let img = ImageRgb::from_fn(9, 7, |x, y| {
            [x as f64 / 8.0, y as f64 / 6.0, ((x * y) % 5) as f64 / 4.0]
        })
        .unwrap();
        let perm = ImageRgb::from_fn(9, 7, |x, y| {
            let [r, g, b] = img.pixel(x, y);
            [b, r, g]
        })
        .unwrap();
        let cfg = StressConfig { n_iterations: 20, seed: 9, ..Default::default() };
        let a = stress(&img, &cfg).unwrap();
        let b = stress(&perm, &cfg).unwrap();
        for y in 0..7 {
            for x in 0..9 {
                let [r, g, bb] = a.pixel(x, y);
                assert_eq!(b.pixel(x, y), [bb, r, g]);
            }
        }
    }

    #[test]
    fn seed_changes_output() {
        let img = ImageRgb::from_fn(8, 8, |x, y| [((x * 3 + y) % 7) as f64 / 6.0; 3]).unwrap();
        let a = stress(&img, &StressConfig { n_iterations: 3, seed: 1, ..Default::default() }).unwrap();
        let b = stress(&img, &StressConfig { n_iterations: 3, seed: 2, ..Default::default() }).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn bad_config() {
        let img = ImageRgb::filled(2, 2, [0.5; 3]).unwrap();
        assert!(stress(&img, &StressConfig { n_samples: 0, ..Default::default() }).is_err());
        assert!(stress(&img, &StressConfig { radius: Some(0), ..Default::default() }).is_err());
    }
}
