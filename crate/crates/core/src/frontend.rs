//! Global front-end filter.
//!
//! The input is min-max normalized over all samples (`f_init`), a weight
//! field λ is built, and every channel is darkened by λ times the pixel's
//! Euclidean norm: `f_g = f_init - λ ‖f_init‖`, clamped to `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{DehazeError, Result};
use crate::prior::{self, PriorConfig};
use crate::raster::{global_minmax, ImageGray, ImageRgb};

/// How the subtraction weight λ is built from `f_init`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaMode {
    /// Spatially constant weight.
    Constant(f64),
    /// `λ = 1 - f_init`, per channel.
    Inverted,
    /// Dark-channel estimate refined by the matting Laplacian.
    DarkChannelPrior,
}

impl Default for LambdaMode {
    fn default() -> Self {
        LambdaMode::Constant(FrontendConfig::DEFAULT_CONSTANT)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FrontendConfig {
    pub alpha: f64,
    pub beta: f64,
    pub lambda_mode: LambdaMode,
}

impl FrontendConfig {
    pub const DEFAULT_CONSTANT: f64 = 0.35;

    pub fn validate(&self) -> Result<()> {
        if self.alpha == 0.0 || !self.alpha.is_finite() {
            return Err(DehazeError::Config(format!(
                "alpha must be finite and non-zero, got {}",
                self.alpha
            )));
        }
        if !self.beta.is_finite() {
            return Err(DehazeError::Config("beta must be finite".into()));
        }
        if let LambdaMode::Constant(c) = self.lambda_mode {
            if !(0.0..=1.0).contains(&c) {
                return Err(DehazeError::Config(format!(
                    "constant lambda must lie in [0, 1], got {c}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 0.0,
            lambda_mode: LambdaMode::default(),
        }
    }
}

/// Per-pixel weight map in `[0, 1]`, either scalar (broadcast over the
/// channels) or one value per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct LambdaField {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
}

impl LambdaField {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(DehazeError::Shape(format!(
                "lambda fields have 1 or 3 channels, got {channels}"
            )));
        }
        if width == 0 || height == 0 || data.len() != width * height * channels {
            return Err(DehazeError::Shape(format!(
                "lambda data of length {} does not fit {width}x{height}x{channels}",
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(DehazeError::Range(format!("lambda value {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    pub fn scalar(gray: ImageGray) -> Self {
        let (width, height) = gray.dims();
        Self {
            width,
            height,
            channels: 1,
            data: gray.into_vec(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    /// Weight applied to channel `c` of pixel `i`.
    #[inline]
    pub fn at(&self, i: usize, c: usize) -> f64 {
        if self.channels == 1 {
            self.data[i]
        } else {
            self.data[i * 3 + c]
        }
    }

    /// Scalar view; errors on a 3-channel field.
    pub fn to_gray(&self) -> Result<ImageGray> {
        if self.channels != 1 {
            return Err(DehazeError::Shape("expected a scalar lambda field".into()));
        }
        ImageGray::from_vec(self.width, self.height, self.data.clone())
    }
}

/// `α (v - x_min) / (x_max - x_min) + β`, clamped to `[0, 1]`.
pub fn normalize_init(img: &ImageRgb, alpha: f64, beta: f64) -> Result<ImageRgb> {
    let (lo, hi) = global_minmax(img);
    if hi <= lo {
        return Err(DehazeError::DegenerateImage(format!(
            "constant image (every sample is {lo}); normalization is undefined"
        )));
    }
    let range = hi - lo;
    Ok(img.map(|v| alpha * (v - lo) / range + beta))
}

pub fn lambda_constant(c: f64, width: usize, height: usize) -> Result<LambdaField> {
    if !(0.0..=1.0).contains(&c) {
        return Err(DehazeError::Range(format!(
            "constant lambda must lie in [0, 1], got {c}"
        )));
    }
    LambdaField::new(width, height, 1, vec![c; width * height])
}

pub fn lambda_inverted(f_init: &ImageRgb) -> LambdaField {
    LambdaField {
        width: f_init.width(),
        height: f_init.height(),
        channels: 3,
        data: f_init.as_slice().iter().map(|v| 1.0 - v).collect(),
    }
}

/// Euclidean norm of each pixel over its three channels, in `[0, √3]`.
///
/// Returned as a plain vector because values above 1 are expected.
pub fn pixel_norm(f_init: &ImageRgb) -> Vec<f64> {
    f_init
        .pixels()
        .map(|[r, g, b]| (r * r + g * g + b * b).sqrt())
        .collect()
}

/// `f_g = f_init - λ ‖f_init‖` per channel, clamped to `[0, 1]`.
pub fn apply_general_filter(f_init: &ImageRgb, lambda: &LambdaField) -> Result<ImageRgb> {
    if f_init.dims() != lambda.dims() {
        return Err(DehazeError::Shape(format!(
            "image is {}x{} but lambda is {}x{}",
            f_init.width(),
            f_init.height(),
            lambda.width,
            lambda.height
        )));
    }
    let norms = pixel_norm(f_init);
    let data = f_init
        .as_slice()
        .chunks_exact(3)
        .zip(&norms)
        .enumerate()
        .flat_map(|(i, (px, &n))| [0, 1, 2].map(|c| px[c] - lambda.at(i, c) * n))
        .collect();
    ImageRgb::from_vec_clamped(f_init.width(), f_init.height(), data)
}

/// Builds λ for `mode` from an already-normalized image.
pub fn build_lambda(
    f_init: &ImageRgb,
    mode: LambdaMode,
    prior_cfg: Option<&PriorConfig>,
) -> Result<LambdaField> {
    match mode {
        LambdaMode::Constant(c) => lambda_constant(c, f_init.width(), f_init.height()),
        LambdaMode::Inverted => Ok(lambda_inverted(f_init)),
        LambdaMode::DarkChannelPrior => {
            let default_cfg = PriorConfig::default();
            prior::dcp_lambda(f_init, prior_cfg.unwrap_or(&default_cfg))
        }
    }
}

/// Normalization, λ construction, then the subtraction filter.
pub fn run_frontend(
    img: &ImageRgb,
    cfg: &FrontendConfig,
    prior_cfg: Option<&PriorConfig>,
) -> Result<ImageRgb> {
    cfg.validate()?;
    let f_init = normalize_init(img, cfg.alpha, cfg.beta)?;
    let lambda = build_lambda(&f_init, cfg.lambda_mode, prior_cfg)?;
    apply_general_filter(&f_init, &lambda)
}
