//! Small dense complex matrices. Sizes here never exceed a few dozen rows, so
//! everything is a plain row-major `Vec`.

use std::ops::{Index, IndexMut};

use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        CMatrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self[(r, c)]).collect()
    }

    /// `self * other`
    pub fn mul(&self, other: &CMatrix) -> CMatrix {
        assert_eq!(self.cols, other.rows, "dimension mismatch");
        CMatrix::from_fn(self.rows, other.cols, |r, c| {
            (0..self.cols).map(|k| self[(r, k)] * other[(k, c)]).sum()
        })
    }

    /// `selfᴴ * self`
    pub fn gram(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.cols, |i, j| {
            (0..self.rows).map(|k| self[(k, i)].conj() * self[(k, j)]).sum()
        })
    }

    /// Frobenius norm of `selfᴴ self − I`.
    pub fn unitarity_residual(&self) -> f64 {
        let g = self.gram();
        let mut acc = 0.0;
        for i in 0..g.rows {
            for j in 0..g.cols {
                let target = if i == j { 1.0 } else { 0.0 };
                acc += (g[(i, j)] - target).norm_sqr();
            }
        }
        acc.sqrt()
    }

    /// Orthonormalizes the columns in place with modified Gram-Schmidt run
    /// twice. Column `j` of the result spans the same flag as the input and
    /// the implied triangular factor has a positive real diagonal.
    ///
    /// Panics if the columns are linearly dependent.
    pub fn orthonormalize_columns(&mut self) {
        for j in 0..self.cols {
            for _pass in 0..2 {
                for i in 0..j {
                    let proj: Complex64 = (0..self.rows).map(|k| self[(k, i)].conj() * self[(k, j)]).sum();
                    for k in 0..self.rows {
                        let q = self[(k, i)];
                        self[(k, j)] -= proj * q;
                    }
                }
            }
            let norm = (0..self.rows).map(|k| self[(k, j)].norm_sqr()).sum::<f64>().sqrt();
            assert!(norm > 0.0, "rank-deficient input to orthonormalize_columns");
            for k in 0..self.rows {
                self[(k, j)] /= norm;
            }
        }
    }
}

impl Index<(usize, usize)> for CMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for CMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.cols + c]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_unitary() {
        assert_eq!(CMatrix::identity(5).unitarity_residual(), 0.0);
    }

    #[test]
    fn gram_schmidt_on_fixed_matrix() {
        let mut m = CMatrix::from_fn(3, 3, |r, c| Complex64::new((r + 2 * c) as f64 + 1.0, (r * c) as f64 - 1.0));
        m[(0, 0)] += 5.0;
        let original = m.clone();
        m.orthonormalize_columns();
        assert!(m.unitarity_residual() < 1e-13);
        // R = Qᴴ A is upper triangular with positive diagonal
        let mut qh = CMatrix::zeros(3, 3);
        for r in 0..3 {
            for c in 0..3 {
                qh[(r, c)] = m[(c, r)].conj();
            }
        }
        let r = qh.mul(&original);
        for i in 0..3 {
            assert!(r[(i, i)].re > 0.0 && r[(i, i)].im.abs() < 1e-12);
            for j in 0..i {
                assert!(r[(i, j)].norm() < 1e-12);
            }
        }
    }
}
