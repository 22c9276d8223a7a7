//! Row/column 2-D FFT on a row-major complex buffer.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub(crate) struct Fft2d {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2d {
    pub fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            row_inv: planner.plan_fft_inverse(width),
            col_fwd: planner.plan_fft_forward(height),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn forward(&self, buf: &mut [Complex64]) {
        self.run(buf, &self.row_fwd, &self.col_fwd);
    }

    /// Inverse transform, scaled so that `inverse(forward(x)) == x`.
    pub fn inverse(&self, buf: &mut [Complex64]) {
        self.run(buf, &self.row_inv, &self.col_inv);
        let scale = 1.0 / self.len() as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
    }

    fn run(&self, buf: &mut [Complex64], rows: &Arc<dyn Fft<f64>>, cols: &Arc<dyn Fft<f64>>) {
        debug_assert_eq!(buf.len(), self.len());
        rows.process(buf);
        let mut t = transpose(buf, self.width, self.height);
        cols.process(&mut t);
        let back = transpose(&t, self.height, self.width);
        buf.copy_from_slice(&back);
    }
}

fn transpose(src: &[Complex64], width: usize, height: usize) -> Vec<Complex64> {
    let mut dst = vec![Complex64::default(); src.len()];
    for y in 0..height {
        for x in 0..width {
            dst[x * height + y] = src[y * width + x];
        }
    }
    dst
}
