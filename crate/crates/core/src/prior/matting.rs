//! Closed-form matting Laplacian and the λ refinement solve.

use super::sparse::{conjugate_gradient, SparseSymMatrix};
use crate::error::{DehazeError, Result};
use crate::raster::ImageRgb;

type Mat3 = [[f64; 3]; 3];

fn invert3(m: &Mat3) -> Option<Mat3> {
    let c00 = m[1][1] * m[2][2] - m[1][2] * m[2][1];
    let c01 = m[1][2] * m[2][0] - m[1][0] * m[2][2];
    let c02 = m[1][0] * m[2][1] - m[1][1] * m[2][0];
    let det = m[0][0] * c00 + m[0][1] * c01 + m[0][2] * c02;
    if det == 0.0 || !det.is_finite() {
        return None;
    }
    let inv = 1.0 / det;
    Some([
        [
            c00 * inv,
            (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv,
            (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv,
        ],
        [
            c01 * inv,
            (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv,
            (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv,
        ],
        [
            c02 * inv,
            (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv,
            (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv,
        ],
    ])
}

/// Builds `L` over every `(2r+1)²` window lying fully inside the image:
///
/// ```text
/// L(i,j) = Σ_k [ δ_ij - (1 + (I_i-μ_k)ᵀ (Σ_k + ε/|w| Id)⁻¹ (I_j-μ_k)) / |w| ]
/// ```
///
/// Each pair is evaluated once and written to both `(i, j)` and `(j, i)`, so
/// the result is exactly symmetric.
pub fn matting_laplacian(
    img: &ImageRgb,
    eps: f64,
    window_radius: usize,
    size_limit: usize,
) -> Result<SparseSymMatrix> {
    let (w, h) = img.dims();
    if w > size_limit || h > size_limit {
        return Err(DehazeError::SizeGuard {
            width: w,
            height: h,
            limit: size_limit,
        });
    }
    if window_radius == 0 {
        return Err(DehazeError::Config("matting window radius must be at least 1".into()));
    }
    let r = window_radius;
    let side = 2 * r + 1;
    let win = side * side;
    // Entries of row i live at offsets |dx|, |dy| ≤ 2r from pixel i.
    let span = 4 * r + 1;
    let slot = |dx: isize, dy: isize| ((dy + 2 * r as isize) as usize) * span + (dx + 2 * r as isize) as usize;
    let mut acc = vec![0.0; w * h * span * span];

    let px = img.as_slice();
    let color = |i: usize| [px[3 * i], px[3 * i + 1], px[3 * i + 2]];
    let mut members = Vec::with_capacity(win);
    let mut centered = Vec::with_capacity(win);

    if w >= side && h >= side {
        for cy in r..h - r {
            for cx in r..w - r {
                members.clear();
                for y in cy - r..=cy + r {
                    for x in cx - r..=cx + r {
                        members.push(y * w + x);
                    }
                }
                let mut mean = [0.0; 3];
                for &i in &members {
                    let c = color(i);
                    (0..3).for_each(|k| mean[k] += c[k]);
                }
                mean.iter_mut().for_each(|m| *m /= win as f64);
                centered.clear();
                centered.extend(members.iter().map(|&i| {
                    let c = color(i);
                    [c[0] - mean[0], c[1] - mean[1], c[2] - mean[2]]
                }));
                let mut cov = [[0.0; 3]; 3];
                for d in &centered {
                    for a in 0..3 {
                        for b in 0..3 {
                            cov[a][b] += d[a] * d[b];
                        }
                    }
                }
                for (a, row) in cov.iter_mut().enumerate() {
                    for v in row.iter_mut() {
                        *v /= win as f64;
                    }
                    row[a] += eps / win as f64;
                }
                let inv = invert3(&cov).ok_or_else(|| {
                    DehazeError::DegenerateImage(format!(
                        "singular window covariance at ({cx}, {cy}); increase eps"
                    ))
                })?;
                let projected: Vec<[f64; 3]> = centered
                    .iter()
                    .map(|d| {
                        [0, 1, 2].map(|a| inv[a][0] * d[0] + inv[a][1] * d[1] + inv[a][2] * d[2])
                    })
                    .collect();
                for p in 0..win {
                    for q in p..win {
                        let affinity = (1.0
                            + projected[p][0] * centered[q][0]
                            + projected[p][1] * centered[q][1]
                            + projected[p][2] * centered[q][2])
                            / win as f64;
                        let value = if p == q { 1.0 - affinity } else { -affinity };
                        let (i, j) = (members[p], members[q]);
                        let dx = (j % w) as isize - (i % w) as isize;
                        let dy = (j / w) as isize - (i / w) as isize;
                        acc[i * span * span + slot(dx, dy)] += value;
                        if p != q {
                            acc[j * span * span + slot(-dx, -dy)] += value;
                        }
                    }
                }
            }
        }
    }

    let rows = (0..w * h)
        .map(|i| {
            let (x, y) = ((i % w) as isize, (i / w) as isize);
            let base = &acc[i * span * span..(i + 1) * span * span];
            let mut row = Vec::new();
            for sy in 0..span {
                for sx in 0..span {
                    let (nx, ny) = (x + sx as isize - 2 * r as isize, y + sy as isize - 2 * r as isize);
                    if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                        continue;
                    }
                    let v = base[sy * span + sx];
                    if v != 0.0 || (nx, ny) == (x, y) {
                        row.push((ny as usize * w + nx as usize, v));
                    }
                }
            }
            row
        })
        .collect();
    Ok(SparseSymMatrix::from_rows(rows))
}

/// Outcome of the refinement solve. `values` is the raw solution and may
/// leave `[0, 1]` slightly.
#[derive(Debug, Clone, PartialEq)]
pub struct Refinement {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `(L + β I) λ = β λ̂`, warm-started at `λ̂`.
pub fn refine_lambda(
    lambda_hat: &[f64],
    width: usize,
    height: usize,
    laplacian: &SparseSymMatrix,
    beta: f64,
    tol: f64,
    max_iter: usize,
) -> Result<Refinement> {
    if !(beta > 0.0) {
        return Err(DehazeError::Config(format!("beta must be positive, got {beta}")));
    }
    if lambda_hat.len() != width * height || laplacian.dim() != lambda_hat.len() {
        return Err(DehazeError::Shape(format!(
            "lambda has {} entries, image {width}x{height}, Laplacian dimension {}",
            lambda_hat.len(),
            laplacian.dim()
        )));
    }
    let rhs: Vec<f64> = lambda_hat.iter().map(|v| beta * v).collect();
    let sol = conjugate_gradient(laplacian, beta, &rhs, lambda_hat.to_vec(), tol, max_iter)?;
    Ok(Refinement {
        width,
        height,
        values: sol.x,
        iterations: sol.iterations,
        relative_residual: sol.relative_residual,
    })
}
