//! Blind contrast-restoration indicators computed between an original and a
//! restored image:
//!
//! * `e`: relative gain in visible-edge pixels,
//! * `sigma`: fraction of pixels saturated in the restored image only,
//! * `r_bar`: geometric mean gradient ratio over the restored visible edges.
//!
//! Edge visibility is a fixed Sobel threshold on the channel-mean luminance,
//! so values are comparable between runs of this crate and not to numbers
//! produced by other edge-visibility detectors.

use serde::{Deserialize, Serialize};

use crate::error::{DehazeError, Result};
use crate::raster::{ImageGray, ImageRgb};

pub const DEFAULT_EDGE_THRESHOLD: f64 = 0.05;
/// Added to the original gradient before dividing.
pub const GRADIENT_EPS: f64 = 1e-6;
pub const SATURATION_LOW: f64 = 1.0 / 255.0;
pub const SATURATION_HIGH: f64 = 254.0 / 255.0;

pub const FLAG_NO_ORIGINAL_EDGES: &str = "no_visible_edges_in_original";
pub const FLAG_EMPTY_EDGE_MASK: &str = "no_visible_edges_in_restored";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub image: String,
    pub config: String,
    pub e: f64,
    pub sigma: f64,
    pub r_bar: f64,
    pub flags: Vec<String>,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }
}

/// Unnormalized 3x3 Sobel gradient magnitude with replicated borders.
pub fn sobel_magnitude(gray: &ImageGray) -> Vec<f64> {
    let (w, h) = gray.dims();
    let at = |x: isize, y: isize| {
        gray.get(
            x.clamp(0, w as isize - 1) as usize,
            y.clamp(0, h as isize - 1) as usize,
        )
    };
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let gx = (at(x + 1, y - 1) + 2.0 * at(x + 1, y) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x - 1, y) + at(x - 1, y + 1));
            let gy = (at(x - 1, y + 1) + 2.0 * at(x, y + 1) + at(x + 1, y + 1))
                - (at(x - 1, y - 1) + 2.0 * at(x, y - 1) + at(x + 1, y - 1));
            out.push((gx * gx + gy * gy).sqrt());
        }
    }
    out
}

/// Binary mask (0 / 1) of pixels whose luminance gradient exceeds `threshold`.
pub fn visible_edges(img: &ImageRgb, threshold: f64) -> Result<ImageGray> {
    if !(threshold > 0.0) {
        return Err(DehazeError::Range(format!("edge threshold must be positive, got {threshold}")));
    }
    let grad = sobel_magnitude(&img.luminance());
    ImageGray::from_vec(
        img.width(),
        img.height(),
        grad.into_iter().map(|g| if g > threshold { 1.0 } else { 0.0 }).collect(),
    )
}

fn same_shape(a: &ImageRgb, b: &ImageRgb) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(DehazeError::Shape(format!(
            "original is {}x{} but restored is {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok(())
}

fn count_edges(img: &ImageRgb, threshold: f64) -> Result<usize> {
    Ok(visible_edges(img, threshold)?.as_slice().iter().filter(|&&m| m > 0.0).count())
}

/// `(n_r - n_0) / n_0`, plus whether the `n_0 = 0` convention (return `n_r`) applied.
pub fn metric_e_flagged(original: &ImageRgb, restored: &ImageRgb, threshold: f64) -> Result<(f64, bool)> {
    same_shape(original, restored)?;
    let n0 = count_edges(original, threshold)?;
    let nr = count_edges(restored, threshold)?;
    Ok(if n0 == 0 {
        (nr as f64, true)
    } else {
        ((nr as f64 - n0 as f64) / n0 as f64, false)
    })
}

pub fn metric_e(original: &ImageRgb, restored: &ImageRgb) -> Result<f64> {
    metric_e_flagged(original, restored, DEFAULT_EDGE_THRESHOLD).map(|(e, _)| e)
}

fn is_saturated(v: f64) -> bool {
    v <= SATURATION_LOW || v >= SATURATION_HIGH
}

pub fn metric_sigma(original: &ImageRgb, restored: &ImageRgb) -> Result<f64> {
    same_shape(original, restored)?;
    let lo = original.luminance();
    let lr = restored.luminance();
    let fresh = lo
        .as_slice()
        .iter()
        .zip(lr.as_slice())
        .filter(|(&o, &r)| is_saturated(r) && !is_saturated(o))
        .count();
    Ok(fresh as f64 / original.pixel_count() as f64)
}

/// Geometric mean gradient ratio, plus whether the mask was empty (result 1).
pub fn metric_rbar_flagged(original: &ImageRgb, restored: &ImageRgb, threshold: f64) -> Result<(f64, bool)> {
    same_shape(original, restored)?;
    if !(threshold > 0.0) {
        return Err(DehazeError::Range(format!("edge threshold must be positive, got {threshold}")));
    }
    let go = sobel_magnitude(&original.luminance());
    let gr = sobel_magnitude(&restored.luminance());
    let (sum, n) = go
        .iter()
        .zip(&gr)
        .filter(|(_, &r)| r > threshold)
        .fold((0.0, 0usize), |(s, n), (&o, &r)| (s + (r / (o + GRADIENT_EPS)).ln(), n + 1));
    Ok(if n == 0 { (1.0, true) } else { ((sum / n as f64).exp(), false) })
}

pub fn metric_rbar(original: &ImageRgb, restored: &ImageRgb, threshold: f64) -> Result<f64> {
    metric_rbar_flagged(original, restored, threshold).map(|(r, _)| r)
}

/// All three metrics at the default threshold, with empty provenance.
pub fn evaluate(original: &ImageRgb, restored: &ImageRgb) -> Result<MetricsReport> {
    evaluate_labeled(original, restored, "", "")
}

pub fn evaluate_labeled(
    original: &ImageRgb,
    restored: &ImageRgb,
    image: &str,
    config: &str,
) -> Result<MetricsReport> {
    let (e, no_edges) = metric_e_flagged(original, restored, DEFAULT_EDGE_THRESHOLD)?;
    let sigma = metric_sigma(original, restored)?;
    let (r_bar, empty_mask) = metric_rbar_flagged(original, restored, DEFAULT_EDGE_THRESHOLD)?;
    let mut flags = Vec::new();
    if no_edges {
        flags.push(FLAG_NO_ORIGINAL_EDGES.to_string());
    }
    if empty_mask {
        flags.push(FLAG_EMPTY_EDGE_MASK.to_string());
    }
    Ok(MetricsReport {
        image: image.to_string(),
        config: config.to_string(),
        e,
        sigma,
        r_bar,
        flags,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(height: f64) -> ImageRgb {
        ImageRgb::from_fn(8, 6, |x, _| [if x < 4 { 0.0 } else { height }; 3]).unwrap()
    }

    fn ramp() -> ImageRgb {
        ImageRgb::from_fn(64, 16, |x, _| [0.25 + 0.5 * x as f64 / 63.0; 3]).unwrap()
    }

    #[test]
    fn edges() {
        let c = ImageRgb::filled(5, 5, [0.4; 3]).unwrap();
        assert!(visible_edges(&c, 0.05).unwrap().as_slice().iter().all(|&m| m == 0.0));
        let m = visible_edges(&step(1.0), 0.05).unwrap();
        for y in 0..6 {
            for x in 0..8 {
                assert_eq!(m.get(x, y) > 0.0, x == 3 || x == 4, "({x},{y})");
            }
        }
        assert!(visible_edges(&step(0.01), 0.05).unwrap().as_slice().iter().all(|&m| m == 0.0));
    }

    #[test]
    fn e_examples() {
        let a = step(1.0);
        assert_eq!(metric_e(&a, &a).unwrap(), 0.0);
        // Two steps instead of one: twice the edge pixels.
        let b = ImageRgb::from_fn(8, 6, |x, _| [if x < 2 || (4..6).contains(&x) { 0.0 } else { 1.0 }; 3]).unwrap();
        let n0 = count_edges(&a, 0.05).unwrap();
        let nb = count_edges(&b, 0.05).unwrap();
        assert_eq!(metric_e(&a, &b).unwrap(), (nb as f64 - n0 as f64) / n0 as f64);
        let c = ImageRgb::from_fn(16, 4, |x, _| [if x < 8 { 0.0 } else { 1.0 }; 3]).unwrap();
        let d = ImageRgb::from_fn(16, 4, |x, _| [if x < 4 || (8..12).contains(&x) { 0.0 } else { 1.0 }; 3]).unwrap();
        assert_eq!(count_edges(&c, 0.05).unwrap(), 8);
        assert_eq!(count_edges(&d, 0.05).unwrap(), 24);
        let e = ImageRgb::from_fn(16, 4, |x, _| [if !(5..11).contains(&x) { 0.0 } else { 1.0 }; 3]).unwrap();
        assert_eq!(count_edges(&e, 0.05).unwrap(), 16);
        assert_eq!(metric_e(&c, &e).unwrap(), 1.0);
    }

    #[test]
    fn e_without_original_edges() {
        let flat = ImageRgb::filled(8, 6, [0.5; 3]).unwrap();
        let (e, flagged) = metric_e_flagged(&flat, &step(1.0), 0.05).unwrap();
        assert!(flagged);
        assert_eq!(e, 12.0);
    }

    #[test]
    fn sigma_examples() {
        let r = ramp();
        assert_eq!(metric_sigma(&r, &r).unwrap(), 0.0);
        let black = ImageRgb::filled(64, 16, [0.0; 3]).unwrap();
        assert_eq!(metric_sigma(&r, &black).unwrap(), 1.0);
        let half = ImageRgb::from_fn(64, 16, |x, y| if y < 8 { [1.0; 3] } else { r.pixel(x, y) }).unwrap();
        assert_eq!(metric_sigma(&r, &half).unwrap(), 0.5);
    }

    #[test]
    fn rbar_examples() {
        let r = ramp();
        assert!((metric_rbar(&r, &r, 0.05).unwrap() - 1.0).abs() < 1e-3);
        let stretched = r.map(|v| 0.5 + 2.0 * (v - 0.5));
        assert!((metric_rbar(&r, &stretched, 0.05).unwrap() - 2.0).abs() < 0.05);
        let flat = ImageRgb::filled(4, 4, [0.2; 3]).unwrap();
        assert_eq!(metric_rbar_flagged(&flat, &flat, 0.05).unwrap(), (1.0, true));
    }

    #[test]
    fn shape_errors() {
        let a = ImageRgb::filled(4, 4, [0.2; 3]).unwrap();
        let b = ImageRgb::filled(4, 5, [0.2; 3]).unwrap();
        assert!(matches!(metric_e(&a, &b), Err(DehazeError::Shape(_))));
        assert!(matches!(metric_sigma(&a, &b), Err(DehazeError::Shape(_))));
        assert!(matches!(evaluate(&a, &b), Err(DehazeError::Shape(_))));
    }

    #[test]
    fn report_key_order() {
        let r = ramp();
        let report = evaluate_labeled(&r, &r, "ramp", "inv-clahe").unwrap();
        let json = serde_json::to_string(&report).unwrap();
        let keys = ["\"image\"", "\"config\"", "\"e\"", "\"sigma\"", "\"r_bar\"", "\"flags\""];
        let pos: Vec<usize> = keys.iter().map(|k| json.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{json}");
    }
}
