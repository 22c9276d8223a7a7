//! Back-end local contrast enhancement filters and the global baselines
//! they are compared against.

pub mod ace;
pub mod clahe;
mod fft;
pub mod stress;

pub use ace::{ace_exact, ace_fast, ace_rgb, slope_function, AceConfig, FastAce};
pub use clahe::{clahe_channel, clahe_rgb, global_hist_eq, global_hist_eq_rgb, ClaheConfig, TileMode};
pub use stress::{spray_sample, stress, StressConfig};

use crate::error::{DehazeError, Result};
use crate::raster::ImageRgb;

/// `v -> v^gamma` on every sample.
pub fn gamma_correct(img: &ImageRgb, gamma: f64) -> Result<ImageRgb> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(DehazeError::Range(format!("gamma must be positive, got {gamma}")));
    }
    Ok(img.map(|v| v.powf(gamma)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_examples() {
        let img = ImageRgb::from_vec(1, 2, vec![0.25, 0.0, 1.0, 0.5, 0.75, 0.1]).unwrap();
        assert_eq!(gamma_correct(&img, 1.0).unwrap(), img);
        let sq = gamma_correct(&img, 0.5).unwrap();
        assert_eq!(sq.as_slice()[0], 0.5);
        for g in [0.2, 0.35, 3.0] {
            let out = gamma_correct(&img, g).unwrap();
            assert_eq!(out.as_slice()[1], 0.0);
            assert_eq!(out.as_slice()[2], 1.0);
        }
        assert!(gamma_correct(&img, 0.0).is_err());
        assert!(gamma_correct(&img, -1.0).is_err());
    }

    #[test]
    fn gamma_monotone() {
        let v = ImageRgb::filled(1, 1, [0.4; 3]).unwrap();
        let a = gamma_correct(&v, 0.5).unwrap().as_slice()[0];
        let b = gamma_correct(&v, 2.0).unwrap().as_slice()[0];
        assert!(a > 0.4 && 0.4 > b);
    }
}
