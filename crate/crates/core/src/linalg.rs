//! Small dense row-major matrices over any [`Scalar`].
//!
//! State dimensions here never exceed 3, so plain `Vec` storage is enough.

use crate::autodiff::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Mat<T = f64> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::constant(1.0);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Mat {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn diag(values: &[T]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn values(&self) -> Mat<f64> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(Scalar::value).collect(),
        }
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!(self.cols, other.rows, "matmul shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = self[(i, 0)] * other[(0, j)];
                for k in 1..self.cols {
                    acc += self[(i, k)] * other[(k, j)];
                }
                out[(i, j)] = acc;
            }
        }
        out
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(self.cols, v.len(), "matvec shape mismatch");
        (0..self.rows)
            .map(|i| {
                let mut acc = self[(i, 0)] * v[0];
                for k in 1..self.cols {
                    acc += self[(i, k)] * v[k];
                }
                acc
            })
            .collect()
    }

    pub fn add(&self, other: &Mat<T>) -> Mat<T> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(a, b)| *a + *b)
                .collect(),
        }
    }

    /// `(M + Mᵀ) / 2`.
    pub fn symmetrize(&mut self) {
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                let avg = (self[(i, j)] + self[(j, i)]) * 0.5;
                self[(i, j)] = avg;
                self[(j, i)] = avg;
            }
        }
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

impl<T> std::ops::Index<(usize, usize)> for Mat<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Mat<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Lower Cholesky factor of a symmetric positive semi-definite matrix.
/// Zero pivots (degenerate directions) are allowed and produce zero columns.
pub fn cholesky(m: &Mat<f64>) -> Option<Mat<f64>> {
    let n = m.rows;
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut d = m[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d < -1e-10 * (1.0 + m[(j, j)].abs()) {
            return None;
        }
        let d = d.max(0.0).sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = m[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = if d > 0.0 { s / d } else { 0.0 };
        }
    }
    Some(l)
}

/// Log-determinant and inverse of a symmetric positive definite matrix.
pub fn spd_inverse(m: &Mat<f64>) -> Option<(f64, Mat<f64>)> {
    let n = m.rows;
    let l = cholesky(m)?;
    if (0..n).any(|i| l[(i, i)] <= 0.0) {
        return None;
    }
    let logdet = 2.0 * (0..n).map(|i| l[(i, i)].ln()).sum::<f64>();
    // invert L then form L⁻ᵀ L⁻¹
    let mut linv = Mat::zeros(n, n);
    for i in 0..n {
        linv[(i, i)] = 1.0 / l[(i, i)];
        for j in 0..i {
            let mut s = 0.0;
            for k in j..i {
                s -= l[(i, k)] * linv[(k, j)];
            }
            linv[(i, j)] = s / l[(i, i)];
        }
    }
    Some((logdet, linv.transpose().matmul(&linv)))
}

/// Smallest eigenvalue of a symmetric matrix of size ≤ 3 via Jacobi sweeps.
pub fn min_eigenvalue(m: &Mat<f64>) -> f64 {
    let n = m.rows;
    let mut a = m.clone();
    for _ in 0..50 {
        let mut off = 0.0;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                if a[(p, q)].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * a[(p, q)]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                let mut rot = Mat::<f64>::identity(n);
                rot[(p, p)] = c;
                rot[(q, q)] = c;
                rot[(p, q)] = s;
                rot[(q, p)] = -s;
                a = rot.transpose().matmul(&a).matmul(&rot);
            }
        }
    }
    (0..n).map(|i| a[(i, i)]).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn inverse_of_spd() {
        let m = Mat::from_rows(vec![vec![4.0, 1.0], vec![1.0, 3.0]]);
        let (logdet, inv) = spd_inverse(&m).unwrap();
        assert_relative_eq!(logdet, 11f64.ln(), epsilon = 1e-14);
        let id = m.matmul(&inv);
        assert_relative_eq!(id[(0, 0)], 1.0, epsilon = 1e-14);
        assert_relative_eq!(id[(0, 1)], 0.0, epsilon = 1e-14);
    }

    #[test]
    fn eigen_of_diag_and_rotated() {
        let m = Mat::from_rows(vec![vec![2.0, 1.0], vec![1.0, 2.0]]);
        assert_relative_eq!(min_eigenvalue(&m), 1.0, epsilon = 1e-12);
        let d = Mat::diag(&[3.0, -0.5, 7.0]);
        assert_relative_eq!(min_eigenvalue(&d), -0.5);
    }

    #[test]
    fn cholesky_allows_zero_pivot() {
        let m = Mat::diag(&[0.0, 4.0]);
        let l = cholesky(&m).unwrap();
        assert_eq!(l[(1, 1)], 2.0);
        assert_eq!(l[(0, 0)], 0.0);
    }
}
