//! Dark-channel λ prior with matting-Laplacian refinement.
//!
//! `λ̂ = 1 - min_c min_{y∈Ω} f_init_c(y) / A_c` is smoothed by solving
//! `(L + β I) λ = β λ̂`, min-max normalized to `λ_norm`, and folded into
//! `min(λ_norm, 1 - λ_norm)`.

pub mod matting;
pub mod sparse;

pub use matting::{matting_laplacian, refine_lambda, Refinement};
pub use sparse::{conjugate_gradient, CgSolution, SparseSymMatrix};

use serde::{Deserialize, Serialize};

use crate::error::{DehazeError, Result};
use crate::frontend::LambdaField;
use crate::raster::{ImageGray, ImageRgb};

/// Lower bound applied to each airlight component.
pub const AIRLIGHT_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    /// Ω is `(2 * patch_radius + 1)²`.
    pub patch_radius: usize,
    pub matting_eps: f64,
    pub matting_window_radius: usize,
    /// Data-fidelity weight of the refinement cost.
    pub beta: f64,
    pub cg_tol: f64,
    pub cg_max_iter: usize,
    /// Fraction of brightest dark-channel pixels searched for the airlight.
    pub airlight_fraction: f64,
    /// Largest side the Laplacian is built for.
    pub max_side: usize,
    /// Refine at reduced resolution instead of failing on large images.
    pub downscale_large: bool,
}

impl Default for PriorConfig {
    fn default() -> Self {
        Self {
            patch_radius: 7,
            matting_eps: 1e-7,
            matting_window_radius: 1,
            beta: 1e-4,
            cg_tol: 1e-5,
            cg_max_iter: 2000,
            airlight_fraction: 0.001,
            max_side: 256,
            downscale_large: false,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("matting_eps", self.matting_eps),
            ("beta", self.beta),
            ("cg_tol", self.cg_tol),
        ];
        if let Some((name, v)) = positive.iter().find(|(_, v)| !(*v > 0.0)) {
            return Err(DehazeError::Config(format!("{name} must be positive, got {v}")));
        }
        if !(self.airlight_fraction > 0.0 && self.airlight_fraction <= 1.0) {
            return Err(DehazeError::Config(format!(
                "airlight_fraction must lie in (0, 1], got {}",
                self.airlight_fraction
            )));
        }
        if self.patch_radius == 0
            || self.matting_window_radius == 0
            || self.cg_max_iter == 0
            || self.max_side == 0
        {
            return Err(DehazeError::Config(
                "patch_radius, matting_window_radius, cg_max_iter and max_side must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Separable min filter over a `(2r+1)²` window truncated at the borders.
fn min_filter(values: &[f64], width: usize, height: usize, r: usize) -> Vec<f64> {
    let mut rows = vec![0.0; values.len()];
    for y in 0..height {
        let line = &values[y * width..(y + 1) * width];
        for x in 0..width {
            let (a, b) = (x.saturating_sub(r), (x + r).min(width - 1));
            rows[y * width + x] = line[a..=b].iter().copied().fold(f64::INFINITY, f64::min);
        }
    }
    let mut out = vec![0.0; values.len()];
    for y in 0..height {
        let (a, b) = (y.saturating_sub(r), (y + r).min(height - 1));
        for x in 0..width {
            out[y * width + x] = (a..=b).map(|k| rows[k * width + x]).fold(f64::INFINITY, f64::min);
        }
    }
    out
}

/// Channel minimum followed by a windowed minimum.
pub fn dark_channel(img: &ImageRgb, patch_radius: usize) -> ImageGray {
    let (w, h) = img.dims();
    let per_pixel: Vec<f64> = img.pixels().map(|[r, g, b]| r.min(g).min(b)).collect();
    ImageGray::from_vec_clamped(w, h, min_filter(&per_pixel, w, h, patch_radius))
        .expect("same dimensions as the source image")
}

/// Brightest pixel (by channel sum) among the `ceil(fraction * N)` pixels
/// with the largest dark-channel value. Ties keep the lower pixel index.
pub fn estimate_atmospheric_light(img: &ImageRgb, dark: &ImageGray, fraction: f64) -> Result<[f64; 3]> {
    if img.dims() != dark.dims() {
        return Err(DehazeError::Shape("dark channel does not match the image".into()));
    }
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(DehazeError::Range(format!("fraction must lie in (0, 1], got {fraction}")));
    }
    let n = img.pixel_count();
    let take = ((fraction * n as f64).ceil() as usize).clamp(1, n);
    let d = dark.as_slice();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[b].total_cmp(&d[a]).then(a.cmp(&b)));
    let px = img.as_slice();
    let sum = |i: usize| px[3 * i] + px[3 * i + 1] + px[3 * i + 2];
    let best = order[..take]
        .iter()
        .copied()
        .reduce(|a, b| if sum(b) > sum(a) { b } else { a })
        .expect("at least one candidate");
    Ok([0, 1, 2].map(|c| px[3 * best + c].max(AIRLIGHT_FLOOR)))
}

/// `λ = 1 - min_c min_Ω f_init_c / A_c`, clamped to `[0, 1]`.
pub fn lambda_dcp(f_init: &ImageRgb, airlight: [f64; 3], patch_radius: usize) -> Result<LambdaField> {
    if airlight.iter().any(|&a| !(a >= AIRLIGHT_FLOOR)) {
        return Err(DehazeError::Range(format!(
            "airlight components must be at least {AIRLIGHT_FLOOR}, got {airlight:?}"
        )));
    }
    let (w, h) = f_init.dims();
    let ratio: Vec<f64> = f_init
        .pixels()
        .map(|p| (0..3).map(|c| p[c] / airlight[c]).fold(f64::INFINITY, f64::min))
        .collect();
    let lambda = min_filter(&ratio, w, h, patch_radius)
        .into_iter()
        .map(|m| (1.0 - m).clamp(0.0, 1.0))
        .collect();
    LambdaField::new(w, h, 1, lambda)
}

/// `min(λ_norm, 1 - λ_norm)` where `λ_norm` is the min-max normalized field.
pub fn combine_lambda(values: &[f64], width: usize, height: usize) -> Result<LambdaField> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    if !(hi > lo) {
        return Err(DehazeError::DegenerateImage(
            "refined lambda is constant; cannot normalize".into(),
        ));
    }
    let out = values
        .iter()
        .map(|&v| {
            let norm = ((v - lo) / (hi - lo)).clamp(0.0, 1.0);
            norm.min(1.0 - norm)
        })
        .collect();
    LambdaField::new(width, height, 1, out)
}

/// Full dark-channel path on a normalized image: airlight, λ̂, refinement
/// and combination.
pub fn dcp_lambda(f_init: &ImageRgb, cfg: &PriorConfig) -> Result<LambdaField> {
    cfg.validate()?;
    let (w, h) = f_init.dims();
    let dark = dark_channel(f_init, cfg.patch_radius);
    let airlight = estimate_atmospheric_light(f_init, &dark, cfg.airlight_fraction)?;
    let lambda_hat = lambda_dcp(f_init, airlight, cfg.patch_radius)?;

    let fits = w <= cfg.max_side && h <= cfg.max_side;
    let refined = if fits || !cfg.downscale_large {
        let l = matting_laplacian(f_init, cfg.matting_eps, cfg.matting_window_radius, cfg.max_side)?;
        refine_lambda(lambda_hat.as_slice(), w, h, &l, cfg.beta, cfg.cg_tol, cfg.cg_max_iter)?.values
    } else {
        let scale = cfg.max_side as f64 / w.max(h) as f64;
        let (sw, sh) = (
            ((w as f64 * scale).floor() as usize).max(1),
            ((h as f64 * scale).floor() as usize).max(1),
        );
        let small_img = f_init.resize_bilinear(sw, sh)?;
        let small_hat = lambda_hat.to_gray()?.resize_bilinear(sw, sh)?;
        let l = matting_laplacian(&small_img, cfg.matting_eps, cfg.matting_window_radius, cfg.max_side)?;
        let sol = refine_lambda(small_hat.as_slice(), sw, sh, &l, cfg.beta, cfg.cg_tol, cfg.cg_max_iter)?;
        // Upsampling goes through the unit-range gray type; refinement
        // overshoot outside [0, 1] is clipped there.
        ImageGray::from_vec_clamped(sw, sh, sol.values)?
            .resize_bilinear(w, h)?
            .into_vec()
    };
    combine_lambda(&refined, w, h)
}
