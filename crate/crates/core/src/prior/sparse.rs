use crate::error::{DehazeError, Result};

/// Square sparse matrix in compressed-row form, storing both triangles.
///
/// Builders are expected to write `(i, j)` and `(j, i)` with the same value;
/// [`SparseSymMatrix::is_symmetric`] checks it.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSymMatrix {
    /// Builds from per-row `(col, value)` lists. Columns within a row must be
    /// strictly increasing.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for row in rows {
            debug_assert!(row.windows(2).all(|w| w[0].0 < w[1].0));
            for (c, v) in row {
                debug_assert!(c < n);
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let span = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[span.clone()].binary_search(&j) {
            Ok(k) => self.vals[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).map(|(_, v)| v).sum()).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| self.row(i).all(|(j, v)| self.get(j, i) == v))
    }

    /// `out = A x`
    pub fn mul_vec_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row(i).map(|(j, v)| v * x[j]).sum();
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.mul_vec_into(x, &mut out);
        out
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.mul_vec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Row-major dense copy; test and debugging aid for small matrices.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n * self.n];
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                d[i * self.n + j] = v;
            }
        }
        d
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `‖A x - b‖ / ‖b‖` of the returned iterate.
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Jacobi-preconditioned conjugate gradient for `(A + shift I) x = b`.
pub fn conjugate_gradient(
    a: &SparseSymMatrix,
    shift: f64,
    b: &[f64],
    x0: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<CgSolution> {
    let n = a.dim();
    if b.len() != n || x0.len() != n {
        return Err(DehazeError::Shape(format!(
            "system of size {n} given rhs of length {} and guess of length {}",
            b.len(),
            x0.len()
        )));
    }
    let apply = |x: &[f64], out: &mut [f64]| {
        a.mul_vec_into(x, out);
        out.iter_mut().zip(x).for_each(|(o, xi)| *o += shift * xi);
    };
    let inv_diag: Vec<f64> = a
        .diagonal()
        .iter()
        .map(|d| {
            let d = d + shift;
            if d.abs() > f64::MIN_POSITIVE {
                1.0 / d
            } else {
                1.0
            }
        })
        .collect();

    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return Ok(CgSolution {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }

    let mut x = x0;
    let mut ax = vec![0.0; n];
    apply(&x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut residual = dot(&r, &r).sqrt() / b_norm;

    let mut iterations = 0;
    while residual > tol {
        if iterations == max_iter {
            return Err(DehazeError::Solver {
                iterations,
                residual,
            });
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            // Not positive definite along p; no further progress possible.
            return Err(DehazeError::Solver {
                iterations,
                residual,
            });
        }
        let step = rz / pap;
        x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += step * pi);
        r.iter_mut().zip(&ap).for_each(|(ri, api)| *ri -= step * api);
        z.iter_mut()
            .zip(r.iter().zip(&inv_diag))
            .for_each(|(zi, (ri, di))| *zi = ri * di);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
        residual = dot(&r, &r).sqrt() / b_norm;
        iterations += 1;
    }

    // Report the true residual rather than the recursively updated one.
    apply(&x, &mut ax);
    let true_residual = b
        .iter()
        .zip(&ax)
        .map(|(bi, ai)| (bi - ai).powi(2))
        .sum::<f64>()
        .sqrt()
        / b_norm;
    Ok(CgSolution {
        x,
        iterations,
        relative_residual: true_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// 1-D path-graph Laplacian.
    fn path_laplacian(n: usize) -> SparseSymMatrix {
        let rows = (0..n)
            .map(|i| {
                let mut row = Vec::new();
                if i > 0 {
                    row.push((i - 1, -1.0));
                }
                let deg = (i > 0) as usize + (i + 1 < n) as usize;
                row.push((i, deg as f64));
                if i + 1 < n {
                    row.push((i + 1, -1.0));
                }
                row
            })
            .collect();
        SparseSymMatrix::from_rows(rows)
    }

    #[test]
    fn basic_accessors() {
        let l = path_laplacian(4);
        assert_eq!(l.dim(), 4);
        assert_eq!(l.nnz(), 10);
        assert_eq!(l.get(1, 2), -1.0);
        assert_eq!(l.get(0, 3), 0.0);
        assert!(l.is_symmetric());
        assert!(l.row_sums().iter().all(|&s| s == 0.0));
        assert_eq!(l.mul_vec(&[1.0; 4]), vec![0.0; 4]);
    }

    #[test]
    fn solves_shifted_laplacian() {
        let l = path_laplacian(50);
        let truth: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let mut b = l.mul_vec(&truth);
        b.iter_mut().zip(&truth).for_each(|(bi, t)| *bi += 0.5 * t);
        let sol = conjugate_gradient(&l, 0.5, &b, vec![0.0; 50], 1e-12, 500).unwrap();
        assert!(sol.relative_residual <= 1e-11);
        for (a, t) in sol.x.iter().zip(&truth) {
            assert!((a - t).abs() < 1e-9);
        }
    }

    #[test]
    fn reports_non_convergence() {
        let l = path_laplacian(200);
        let b: Vec<f64> = (0..200).map(|i| (i % 7) as f64).collect();
        match conjugate_gradient(&l, 1e-6, &b, vec![0.0; 200], 1e-14, 3) {
            Err(DehazeError::Solver { iterations, residual }) => {
                assert_eq!(iterations, 3);
                assert!(residual > 1e-14);
            }
            other => panic!("expected solver error, got {other:?}"),
        }
    }

    #[test]
    fn zero_rhs() {
        let l = path_laplacian(5);
        let sol = conjugate_gradient(&l, 1.0, &[0.0; 5], vec![1.0; 5], 1e-8, 10).unwrap();
        assert_eq!(sol.x, vec![0.0; 5]);
    }
}
