//! Dense Hermitian operators and their eigendecomposition.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CVector = DVector<Complex64>;
pub type CMatrix = DMatrix<Complex64>;

/// Tolerance for the Hermiticity check on construction.
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: CMatrix,
}

impl HermitianOperator {
    /// Wraps `matrix`, rejecting it unless `m[(i,j)] == conj(m[(j,i)])` to
    /// within [`HERMITIAN_TOL`]. The stored matrix is the exact Hermitian part.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::Dimension {
                context: "hermitian operator (square)",
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        let n = matrix.nrows();
        for i in 0..n {
            for j in 0..=i {
                let d = matrix[(i, j)] - matrix[(j, i)].conj();
                if !(d.norm() <= HERMITIAN_TOL) {
                    return Err(Error::Config(format!(
                        "matrix is not Hermitian at ({i}, {j}): deviation {:e}",
                        d.norm()
                    )));
                }
            }
        }
        Ok(Self::from_hermitian_part(&matrix))
    }

    pub fn from_real(matrix: DMatrix<f64>) -> Result<Self> {
        Self::new(matrix.map(|x| Complex64::new(x, 0.0)))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::Dimension { context: "matrix rows", expected: n, found: bad.len() });
        }
        Self::from_real(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn zeros(n: usize) -> Self {
        Self { matrix: CMatrix::zeros(n, n) }
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        Self {
            matrix: CMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    Complex64::new(values[i], 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            }),
        }
    }

    pub(crate) fn from_hermitian_part(m: &CMatrix) -> Self {
        let matrix = (m + m.adjoint()).map(|z| z * 0.5);
        Self { matrix }
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.matrix[(i, j)]
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn is_real(&self) -> bool {
        self.matrix.iter().all(|z| z.im == 0.0)
    }

    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let x = CVector::from_column_slice(v);
        (&self.matrix * x).as_slice().to_vec()
    }

    /// Maximum absolute row sum; an upper bound on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        self.matrix
            .row_iter()
            .map(|r| r.iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Sub-block with rows `rows` and columns `cols`.
    pub fn block(&self, rows: &[usize], cols: &[usize]) -> CMatrix {
        CMatrix::from_fn(rows.len(), cols.len(), |a, b| self.matrix[(rows[a], cols[b])])
    }

    pub fn principal(&self, idx: &[usize]) -> HermitianOperator {
        Self { matrix: self.block(idx, idx) }
    }

    pub fn shifted(&self, shift: f64) -> HermitianOperator {
        let mut m = self.matrix.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += shift;
        }
        Self { matrix: m }
    }

    /// `self ⊗ I_n`.
    pub fn kron_identity_right(&self, n: usize) -> CMatrix {
        let d = self.dimension();
        let mut out = CMatrix::zeros(d * n, d * n);
        for i in 0..d {
            for j in 0..d {
                let z = self.matrix[(i, j)];
                if z == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for k in 0..n {
                    out[(i * n + k, j * n + k)] = z;
                }
            }
        }
        out
    }

    /// `I_n ⊗ self`.
    pub fn kron_identity_left(&self, n: usize) -> CMatrix {
        let d = self.dimension();
        let mut out = CMatrix::zeros(d * n, d * n);
        for k in 0..n {
            out.view_mut((k * d, k * d), (d, d)).copy_from(&self.matrix);
        }
        out
    }

    /// Ascending eigenvalues with orthonormal eigenvector columns.
    ///
    /// Each eigenvector is rotated so its largest-magnitude component is real
    /// and positive, which makes the output independent of solver phase.
    pub fn eigh(&self) -> (Vec<f64>, CMatrix) {
        let n = self.dimension();
        if n == 0 {
            return (Vec::new(), CMatrix::zeros(0, 0));
        }
        let (values, vectors) = if self.is_real() {
            let re = self.matrix.map(|z| z.re);
            let eig = SymmetricEigen::new(re);
            (eig.eigenvalues.as_slice().to_vec(), eig.eigenvectors.map(|x| Complex64::new(x, 0.0)))
        } else {
            let eig = SymmetricEigen::new(self.matrix.clone());
            (eig.eigenvalues.as_slice().to_vec(), eig.eigenvectors)
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
        let sorted_values: Vec<f64> = order.iter().map(|&k| values[k]).collect();
        let mut sorted_vectors = CMatrix::zeros(n, n);
        for (col, &k) in order.iter().enumerate() {
            let mut v = vectors.column(k).clone_owned();
            fix_phase(v.as_mut_slice());
            sorted_vectors.set_column(col, &v);
        }
        (sorted_values, sorted_vectors)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.is_real() {
            let mut v = self.matrix.map(|z| z.re).symmetric_eigenvalues().as_slice().to_vec();
            v.sort_by(f64::total_cmp);
            v
        } else {
            let mut v = self.matrix.clone().symmetric_eigenvalues().as_slice().to_vec();
            v.sort_by(f64::total_cmp);
            v
        }
    }
}

/// Rotates `v` so its first largest-magnitude component is real positive.
pub fn fix_phase(v: &mut [Complex64]) {
    let mut best = 0;
    let mut best_norm = -1.0;
    for (i, z) in v.iter().enumerate() {
        // Ties are resolved towards the lower index, with a relative margin so
        // round-off cannot flip the pivot between runs.
        if z.norm() > best_norm * (1.0 + 1e-9) {
            best = i;
            best_norm = z.norm();
        }
    }
    if best_norm <= 0.0 {
        return;
    }
    let phase = v[best].conj() / best_norm;
    for z in v.iter_mut() {
        *z *= phase;
    }
}

pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm2(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(1.0, 0.0), c(2.0, 0.0), c(0.0, 0.0)]);
        assert!(HermitianOperator::new(m).is_err());
        let m = CMatrix::from_row_slice(2, 2, &[c(0.0, 1.0), c(0.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(HermitianOperator::new(m).is_err());
    }

    #[test]
    fn complex_hermitian_eigen() {
        // Pauli-y has eigenvalues ±1.
        let m = CMatrix::from_row_slice(2, 2, &[c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)]);
        let op = HermitianOperator::new(m).unwrap();
        let (vals, vecs) = op.eigh();
        assert_abs_diff_eq!(vals[0], -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(vals[1], 1.0, epsilon = 1e-14);
        let v0: Vec<_> = vecs.column(0).iter().copied().collect();
        let hv = op.apply(&v0);
        for (a, b) in hv.iter().zip(&v0) {
            assert_abs_diff_eq!((a - b * vals[0]).norm(), 0.0, epsilon = 1e-13);
        }
    }

    #[test]
    fn kron_shapes() {
        let a = HermitianOperator::from_rows(&[vec![1.0, 2.0], vec![2.0, 3.0]]).unwrap();
        let left = a.kron_identity_left(3);
        let right = a.kron_identity_right(3);
        assert_eq!(left.nrows(), 6);
        assert_eq!(right[(0, 3)], c(2.0, 0.0));
        assert_eq!(left[(0, 1)], c(2.0, 0.0));
        assert_eq!(left[(0, 3)], c(0.0, 0.0));
    }
}
