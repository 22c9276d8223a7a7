//! Pixel buffers, file I/O, and the global statistics shared by every stage.
//!
//! All intensities are `f64` in `[0, 1]`. 8-bit codes are read as `c / 255`
//! with no gamma linearization and written back with round-half-up
//! quantization.

use std::path::Path;

use image::{ImageError, ImageFormat, RgbImage};

use crate::error::{DehazeError, Result};

/// Dense row-major RGB image with interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRgb {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

/// Dense row-major single-channel image.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGray {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

fn check_dims(width: usize, height: usize, len: usize, channels: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(DehazeError::Shape(format!(
            "image dimensions must be positive, got {width}x{height}"
        )));
    }
    if len != width * height * channels {
        return Err(DehazeError::Shape(format!(
            "expected {} samples for {width}x{height}x{channels}, got {len}",
            width * height * channels
        )));
    }
    Ok(())
}

fn check_unit(data: &[f64]) -> Result<()> {
    match data.iter().position(|v| !(0.0..=1.0).contains(v)) {
        Some(i) => Err(DehazeError::Range(format!(
            "sample {i} = {} is outside [0, 1]",
            data[i]
        ))),
        None => Ok(()),
    }
}

#[inline]
fn clamp_unit(v: f64) -> f64 {
    // NaN maps to 0 so the [0, 1] invariant cannot be broken by a bad filter.
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

/// Encodes a unit intensity as an 8-bit code, rounding halves up.
#[inline]
pub fn quantize(v: f64) -> u8 {
    (clamp_unit(v) * 255.0 + 0.5).floor() as u8
}

impl ImageRgb {
    /// Builds an image from interleaved RGB samples, rejecting values outside `[0, 1]`.
    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height, data.len(), 3)?;
        check_unit(&data)?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    /// Like [`ImageRgb::from_vec`] but clamps every sample into `[0, 1]`.
    pub fn from_vec_clamped(width: usize, height: usize, mut data: Vec<f64>) -> Result<Self> {
        check_dims(width, height, data.len(), 3)?;
        data.iter_mut().for_each(|v| *v = clamp_unit(*v));
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self> {
        let data = (0..width * height).flat_map(|_| rgb).collect();
        Self::from_vec(width, height, data)
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * 3);
        for y in 0..height {
            for x in 0..width {
                data.extend_from_slice(&f(x, y));
            }
        }
        Self::from_vec_clamped(width, height, data)
    }

    /// Replicates a gray image into three identical channels.
    pub fn from_gray(gray: &ImageGray) -> Self {
        Self::from_channels([gray, gray, gray]).expect("identical shapes")
    }

    pub fn from_channels(channels: [&ImageGray; 3]) -> Result<Self> {
        let [r, g, b] = channels;
        if r.dims() != g.dims() || r.dims() != b.dims() {
            return Err(DehazeError::Shape(
                "channel planes have different dimensions".into(),
            ));
        }
        let data = r
            .data
            .iter()
            .zip(&g.data)
            .zip(&b.data)
            .flat_map(|((&r, &g), &b)| [r, g, b])
            .collect();
        Ok(Self {
            width: r.width,
            height: r.height,
            data,
        })
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

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Interleaved samples, `[r, g, b, r, g, b, ...]` row by row.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl ExactSizeIterator<Item = [f64; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }

    pub fn channel(&self, c: usize) -> ImageGray {
        assert!(c < 3, "channel index {c} out of range");
        ImageGray {
            width: self.width,
            height: self.height,
            data: self.data.iter().skip(c).step_by(3).copied().collect(),
        }
    }

    pub fn split_channels(&self) -> [ImageGray; 3] {
        [self.channel(0), self.channel(1), self.channel(2)]
    }

    /// Applies `f` to every sample, clamping the result into `[0, 1]`.
    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| clamp_unit(f(v))).collect(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Mean of `(R + G + B) / 3` per pixel.
    pub fn luminance(&self) -> ImageGray {
        ImageGray {
            width: self.width,
            height: self.height,
            data: self.pixels().map(|[r, g, b]| (r + g + b) / 3.0).collect(),
        }
    }

    /// 8-bit interleaved buffer using the round-half-up quantizer.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        check_dims(width, height, bytes.len(), 3)?;
        Ok(Self {
            width,
            height,
            data: bytes.iter().map(|&b| f64::from(b) / 255.0).collect(),
        })
    }

    /// Bilinear resampling to a new size, sampling at pixel centers.
    pub fn resize_bilinear(&self, width: usize, height: usize) -> Result<Self> {
        let planes = self.split_channels();
        let [r, g, b] = [
            planes[0].resize_bilinear(width, height)?,
            planes[1].resize_bilinear(width, height)?,
            planes[2].resize_bilinear(width, height)?,
        ];
        Self::from_channels([&r, &g, &b])
    }
}

impl ImageGray {
    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(width, height, data.len(), 1)?;
        check_unit(&data)?;
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_vec_clamped(width: usize, height: usize, mut data: Vec<f64>) -> Result<Self> {
        check_dims(width, height, data.len(), 1)?;
        data.iter_mut().for_each(|v| *v = clamp_unit(*v));
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::from_vec(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::from_vec_clamped(width, height, data)
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

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn min_max(&self) -> (f64, f64) {
        min_max(&self.data)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| clamp_unit(f(v))).collect(),
        }
    }

    pub fn resize_bilinear(&self, width: usize, height: usize) -> Result<Self> {
        check_dims(width, height, width * height, 1)?;
        let sx = self.width as f64 / width as f64;
        let sy = self.height as f64 / height as f64;
        let sample_axis = |dst: usize, scale: f64, len: usize| {
            let pos = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (len - 1) as f64);
            let lo = pos.floor() as usize;
            let hi = (lo + 1).min(len - 1);
            (lo, hi, pos - lo as f64)
        };
        Self::from_fn(width, height, |x, y| {
            let (x0, x1, fx) = sample_axis(x, sx, self.width);
            let (y0, y1, fy) = sample_axis(y, sy, self.height);
            let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
            let bottom = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
            top * (1.0 - fy) + bottom * fy
        })
    }
}

fn min_max(data: &[f64]) -> (f64, f64) {
    data.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        })
}

/// Reads an 8-bit PNG, JPEG, or binary PPM. Gray sources are replicated to RGB.
pub fn load_image(path: impl AsRef<Path>) -> Result<ImageRgb> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => DehazeError::NotFound {
            path: path.to_path_buf(),
        },
        _ => DehazeError::Io {
            path: path.to_path_buf(),
            source: e,
        },
    })?;
    let decoded = image::load_from_memory(&bytes).map_err(|e| DehazeError::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let rgb = decoded.to_rgb8();
    let (w, h) = rgb.dimensions();
    ImageRgb::from_rgb8(w as usize, h as usize, rgb.as_raw())
}

/// Writes an 8-bit PNG.
pub fn save_image(img: &ImageRgb, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let buf = RgbImage::from_raw(img.width as u32, img.height as u32, img.to_rgb8())
        .expect("buffer length matches dimensions");
    buf.save_with_format(path, ImageFormat::Png)
        .map_err(|e| DehazeError::Io {
            path: path.to_path_buf(),
            source: match e {
                ImageError::IoError(io) => io,
                other => std::io::Error::other(other.to_string()),
            },
        })
}

/// Joint minimum and maximum over all three channels.
pub fn global_minmax(img: &ImageRgb) -> (f64, f64) {
    min_max(&img.data)
}

/// Forward haze model: `I = J t + A (1 - t)` per pixel and channel.
pub fn synthesize_haze(clean: &ImageRgb, transmission: &ImageGray, airlight: [f64; 3]) -> Result<ImageRgb> {
    if clean.dims() != transmission.dims() {
        return Err(DehazeError::Shape(format!(
            "radiance is {}x{} but transmission is {}x{}",
            clean.width, clean.height, transmission.width, transmission.height
        )));
    }
    if airlight.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(DehazeError::Range(format!(
            "airlight {airlight:?} must lie in [0, 1]"
        )));
    }
    let data = clean
        .data
        .chunks_exact(3)
        .zip(&transmission.data)
        .flat_map(|(j, &t)| {
            [0, 1, 2].map(|c| clamp_unit(j[c] * t + airlight[c] * (1.0 - t)))
        })
        .collect();
    Ok(ImageRgb {
        width: clean.width,
        height: clean.height,
        data,
    })
}

/// Lays out equally sized panels row-major on a grid with `columns` columns.
/// Unused cells of the last row stay black.
pub fn tile_panels(panels: &[ImageRgb], columns: usize) -> Result<ImageRgb> {
    let first = panels
        .first()
        .ok_or_else(|| DehazeError::Shape("no panels to compose".into()))?;
    let (pw, ph) = first.dims();
    if panels.iter().any(|p| p.dims() != (pw, ph)) {
        return Err(DehazeError::Shape("panels differ in size".into()));
    }
    let columns = columns.clamp(1, panels.len());
    let rows = panels.len().div_ceil(columns);
    let (w, h) = (pw * columns, ph * rows);
    let mut data = vec![0.0; w * h * 3];
    for (k, panel) in panels.iter().enumerate() {
        let (ox, oy) = ((k % columns) * pw, (k / columns) * ph);
        for y in 0..ph {
            let src = &panel.data[y * pw * 3..(y + 1) * pw * 3];
            let start = ((oy + y) * w + ox) * 3;
            data[start..start + pw * 3].copy_from_slice(src);
        }
    }
    ImageRgb::from_vec(w, h, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_png_gray(path: &Path, w: u32, h: u32, bytes: Vec<u8>) {
        image::GrayImage::from_raw(w, h, bytes)
            .unwrap()
            .save_with_format(path, ImageFormat::Png)
            .unwrap();
    }

    #[test]
    fn load_white_and_black_pixels() {
        let dir = tempfile::tempdir().unwrap();
        let white = dir.path().join("w.png");
        let black = dir.path().join("b.png");
        write_png_gray(&white, 1, 1, vec![255]);
        write_png_gray(&black, 1, 1, vec![0]);
        assert_eq!(load_image(&white).unwrap().as_slice(), &[1.0, 1.0, 1.0]);
        assert_eq!(load_image(&black).unwrap().as_slice(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn load_binary_ppm() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.ppm");
        let mut bytes = b"P6\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 0, 51, 0, 255, 102]);
        std::fs::write(&path, bytes).unwrap();
        let img = load_image(&path).unwrap();
        assert_eq!(img.dims(), (2, 1));
        assert_eq!(img.pixel(0, 0), [1.0, 0.0, 0.2]);
        assert_eq!(img.pixel(1, 0), [0.0, 1.0, 0.4]);
    }

    #[test]
    fn truncated_file_is_decode_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.png");
        let img = ImageRgb::filled(4, 4, [0.3, 0.5, 0.7]).unwrap();
        save_image(&img, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() / 2]).unwrap();
        match load_image(&path) {
            Err(DehazeError::Decode { path: p, .. }) => assert_eq!(p, path),
            other => panic!("expected decode error, got {other:?}"),
        }
    }

    #[test]
    fn missing_file_is_not_found() {
        let err = load_image("/definitely/not/here.png").unwrap_err();
        assert!(matches!(err, DehazeError::NotFound { .. }));
        assert!(err.to_string().contains("/definitely/not/here.png"));
    }

    #[test]
    fn half_rounds_up() {
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(0.0), 0);
        assert_eq!(quantize(1.0), 255);
    }

    #[test]
    fn save_into_missing_dir_is_io_error() {
        let img = ImageRgb::filled(1, 1, [0.5; 3]).unwrap();
        let err = save_image(&img, "/nonexistent-dir/x/out.png").unwrap_err();
        assert!(matches!(err, DehazeError::Io { .. }));
    }

    #[test]
    fn minmax_examples() {
        let c = ImageRgb::filled(3, 2, [0.4; 3]).unwrap();
        assert_eq!(global_minmax(&c), (0.4, 0.4));
        let img = ImageRgb::from_vec(2, 1, vec![0.3, 0.2, 0.5, 0.7, 0.6, 0.4]).unwrap();
        assert_eq!(global_minmax(&img), (0.2, 0.7));
        let full = ImageRgb::from_vec(1, 2, vec![0.0, 0.5, 0.5, 0.5, 1.0, 0.5]).unwrap();
        assert_eq!(global_minmax(&full), (0.0, 1.0));
    }

    #[test]
    fn haze_model_limits() {
        let j = ImageRgb::from_fn(3, 3, |x, y| [x as f64 / 3.0, y as f64 / 3.0, 0.5]).unwrap();
        let a = [0.9, 0.8, 0.7];
        let clear = synthesize_haze(&j, &ImageGray::filled(3, 3, 1.0).unwrap(), a).unwrap();
        assert_eq!(clear, j);
        let opaque = synthesize_haze(&j, &ImageGray::filled(3, 3, 0.0).unwrap(), a).unwrap();
        assert!(opaque.pixels().all(|p| p == a));
        let black = ImageRgb::filled(2, 2, [0.0; 3]).unwrap();
        let half = synthesize_haze(&black, &ImageGray::filled(2, 2, 0.5).unwrap(), [1.0; 3]).unwrap();
        assert!(half.as_slice().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn haze_shape_mismatch() {
        let j = ImageRgb::filled(3, 3, [0.1; 3]).unwrap();
        let t = ImageGray::filled(2, 3, 0.5).unwrap();
        assert!(matches!(
            synthesize_haze(&j, &t, [1.0; 3]),
            Err(DehazeError::Shape(_))
        ));
    }

    #[test]
    fn rejects_out_of_range_samples() {
        assert!(matches!(
            ImageRgb::from_vec(1, 1, vec![0.0, 1.5, 0.0]),
            Err(DehazeError::Range(_))
        ));
        assert!(matches!(
            ImageGray::from_vec(0, 1, vec![]),
            Err(DehazeError::Shape(_))
        ));
    }

    #[test]
    fn panels_row_major() {
        let a = ImageRgb::filled(2, 1, [0.0; 3]).unwrap();
        let b = ImageRgb::filled(2, 1, [1.0; 3]).unwrap();
        let grid = tile_panels(&[a.clone(), b.clone(), a], 2).unwrap();
        assert_eq!(grid.dims(), (4, 2));
        assert_eq!(grid.pixel(2, 0), [1.0; 3]);
        assert_eq!(grid.pixel(1, 1), [0.0; 3]);
    }
}
