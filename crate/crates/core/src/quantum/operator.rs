use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use num_complex::Complex64;

use super::layout::SpaceLayout;
use crate::error::{Error, Result};

/// Spaces smaller than this are stored densely.
pub const DENSE_THRESHOLD: usize = 64;

/// Entrywise tolerance for the Hermiticity check, relative to max(1, max|A|).
pub const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone)]
enum Storage {
    Sparse(CsrMatrix<Complex64>),
    Dense(DMatrix<Complex64>),
}

/// Complex operator on a [`SpaceLayout`].
///
/// Arithmetic between operators panics if the layouts differ, in the same
/// way nalgebra panics on mismatched shapes.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    layout: SpaceLayout,
    storage: Storage,
    hermitian: bool,
}

impl OperatorMatrix {
    /// Builds from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(
        layout: &SpaceLayout,
        triplets: impl IntoIterator<Item = (usize, usize, Complex64)>,
        hermitian: bool,
    ) -> Self {
        let dim = layout.total_dim();
        let storage = if dim < DENSE_THRESHOLD {
            let mut m = DMatrix::zeros(dim, dim);
            for (i, j, v) in triplets {
                m[(i, j)] += v;
            }
            Storage::Dense(m)
        } else {
            let mut coo = CooMatrix::new(dim, dim);
            for (i, j, v) in triplets {
                if v != Complex64::default() {
                    coo.push(i, j, v);
                }
            }
            Storage::Sparse(CsrMatrix::from(&coo))
        };
        OperatorMatrix {
            layout: layout.clone(),
            storage,
            hermitian,
        }
    }

    pub fn from_dense(layout: &SpaceLayout, matrix: DMatrix<Complex64>, hermitian: bool) -> Result<Self> {
        let dim = layout.total_dim();
        if matrix.nrows() != dim || matrix.ncols() != dim {
            return Err(Error::LayoutMismatch {
                expected: dim,
                found: matrix.nrows(),
            });
        }
        Ok(OperatorMatrix {
            layout: layout.clone(),
            storage: Storage::Dense(matrix),
            hermitian,
        }
        .normalized_storage())
    }

    pub fn zeros(layout: &SpaceLayout) -> Self {
        Self::from_triplets(layout, std::iter::empty(), true)
    }

    pub fn identity(layout: &SpaceLayout) -> Self {
        Self::diagonal_from(layout, |_| 1.0)
    }

    /// Real diagonal operator with entries `f(index)`.
    pub fn diagonal_from(layout: &SpaceLayout, f: impl Fn(usize) -> f64) -> Self {
        let dim = layout.total_dim();
        Self::from_triplets(layout, (0..dim).map(|i| (i, i, Complex64::new(f(i), 0.0))), true)
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.layout.total_dim()
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    /// Hermiticity hint carried alongside the entries.
    pub fn hermitian_hint(&self) -> bool {
        self.hermitian
    }

    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Sparse(m) => m.nnz(),
            Storage::Dense(m) => m.iter().filter(|v| **v != Complex64::default()).count(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<Complex64> {
        match &self.storage {
            Storage::Sparse(m) => DMatrix::from(m),
            Storage::Dense(m) => m.clone(),
        }
    }

    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        match &self.storage {
            Storage::Sparse(m) => m
                .get_entry(row, col)
                .map(|e| e.into_value())
                .unwrap_or_default(),
            Storage::Dense(m) => m[(row, col)],
        }
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    /// Visits every stored entry.
    pub fn for_each_entry(&self, mut f: impl FnMut(usize, usize, Complex64)) {
        match &self.storage {
            Storage::Sparse(m) => {
                for (i, j, v) in m.triplet_iter() {
                    f(i, j, *v);
                }
            }
            Storage::Dense(m) => {
                for j in 0..m.ncols() {
                    for i in 0..m.nrows() {
                        let v = m[(i, j)];
                        if v != Complex64::default() {
                            f(i, j, v);
                        }
                    }
                }
            }
        }
    }

    pub fn adjoint(&self) -> Self {
        let storage = match &self.storage {
            Storage::Sparse(m) => {
                let mut t = m.transpose();
                for v in t.values_mut() {
                    *v = v.conj();
                }
                Storage::Sparse(t)
            }
            Storage::Dense(m) => Storage::Dense(m.adjoint()),
        };
        OperatorMatrix {
            layout: self.layout.clone(),
            storage,
            hermitian: self.hermitian,
        }
    }

    pub fn scale(&self, factor: impl Into<Complex64>) -> Self {
        let factor = factor.into();
        let storage = match &self.storage {
            Storage::Sparse(m) => Storage::Sparse(m * factor),
            Storage::Dense(m) => Storage::Dense(m * factor),
        };
        OperatorMatrix {
            layout: self.layout.clone(),
            storage,
            hermitian: self.hermitian && factor.im == 0.0,
        }
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        match &self.storage {
            Storage::Sparse(m) => m.values().iter().map(|v| v.norm()).fold(0.0, f64::max),
            Storage::Dense(m) => m.iter().map(|v| v.norm()).fold(0.0, f64::max),
        }
    }

    /// max |A_ij - B_ij|.
    pub fn max_abs_diff(&self, other: &OperatorMatrix) -> f64 {
        (self - other).max_abs()
    }

    /// max |A - A^dag| entrywise.
    pub fn hermiticity_error(&self) -> f64 {
        self.max_abs_diff(&self.adjoint())
    }

    /// Verifies the Hermiticity invariant and sets the flag.
    pub fn checked_hermitian(mut self) -> Result<Self> {
        let err = self.hermiticity_error();
        if err > HERMITIAN_TOL * self.max_abs().max(1.0) {
            return Err(Error::NotHermitian(err));
        }
        self.hermitian = true;
        Ok(self)
    }

    pub fn commutator(&self, other: &OperatorMatrix) -> OperatorMatrix {
        let mut c = &(self * other) - &(other * self);
        c.hermitian = false;
        c
    }

    /// y = A x.
    pub fn apply(&self, x: &DVector<Complex64>) -> DVector<Complex64> {
        let mut y = DVector::zeros(self.dim());
        self.apply_into(x.as_slice(), y.as_mut_slice());
        y
    }

    /// y = A x on raw slices; the hot loop of every propagator.
    pub fn apply_into(&self, x: &[Complex64], y: &mut [Complex64]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        match &self.storage {
            Storage::Sparse(m) => {
                let (offsets, cols, vals) = m.csr_data();
                for (row, out) in y.iter_mut().enumerate() {
                    let mut acc = Complex64::default();
                    for k in offsets[row]..offsets[row + 1] {
                        acc += vals[k] * x[cols[k]];
                    }
                    *out = acc;
                }
            }
            Storage::Dense(m) => {
                let dim = m.nrows();
                for (row, out) in y.iter_mut().enumerate() {
                    let mut acc = Complex64::default();
                    for col in 0..dim {
                        acc += m[(row, col)] * x[col];
                    }
                    *out = acc;
                }
            }
        }
    }

    /// A M.
    pub fn mul_dense_left(&self, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        assert_eq!(m.nrows(), self.dim());
        match &self.storage {
            Storage::Sparse(a) => {
                let (offsets, cols, vals) = a.csr_data();
                let mut out = DMatrix::zeros(m.nrows(), m.ncols());
                for c in 0..m.ncols() {
                    let src = m.column(c);
                    let mut dst = out.column_mut(c);
                    for row in 0..a.nrows() {
                        let mut acc = Complex64::default();
                        for k in offsets[row]..offsets[row + 1] {
                            acc += vals[k] * src[cols[k]];
                        }
                        dst[row] = acc;
                    }
                }
                out
            }
            Storage::Dense(a) => a * m,
        }
    }

    /// M A.
    pub fn mul_dense_right(&self, m: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        assert_eq!(m.ncols(), self.dim());
        match &self.storage {
            Storage::Sparse(a) => {
                let (offsets, cols, vals) = a.csr_data();
                let mut out = DMatrix::zeros(m.nrows(), m.ncols());
                // (M A)[:, c] = sum_r M[:, r] A[r, c]
                for r in 0..a.nrows() {
                    let src = m.column(r);
                    for k in offsets[r]..offsets[r + 1] {
                        let v = vals[k];
                        let mut dst = out.column_mut(cols[k]);
                        for (d, s) in dst.iter_mut().zip(src.iter()) {
                            *d += s * v;
                        }
                    }
                }
                out
            }
            Storage::Dense(a) => m * a,
        }
    }

    /// Tr(A M).
    pub fn trace_product(&self, m: &DMatrix<Complex64>) -> Complex64 {
        let mut acc = Complex64::default();
        self.for_each_entry(|i, j, v| acc += v * m[(j, i)]);
        acc
    }

    fn normalized_storage(self) -> Self {
        let dim = self.dim();
        match self.storage {
            Storage::Dense(m) if dim >= DENSE_THRESHOLD => {
                let mut coo = CooMatrix::new(dim, dim);
                for j in 0..dim {
                    for i in 0..dim {
                        let v = m[(i, j)];
                        if v != Complex64::default() {
                            coo.push(i, j, v);
                        }
                    }
                }
                OperatorMatrix {
                    storage: Storage::Sparse(CsrMatrix::from(&coo)),
                    ..self
                }
            }
            storage => OperatorMatrix { storage, ..self },
        }
    }

    fn combine(&self, other: &OperatorMatrix, sign: f64) -> OperatorMatrix {
        assert_eq!(self.layout, other.layout, "operator layouts differ");
        let s = Complex64::new(sign, 0.0);
        let storage = match (&self.storage, &other.storage) {
            (Storage::Sparse(a), Storage::Sparse(b)) => Storage::Sparse(a + &(b * s)),
            (Storage::Dense(a), Storage::Dense(b)) => Storage::Dense(a + b * s),
            (Storage::Dense(a), Storage::Sparse(b)) => Storage::Dense(a + DMatrix::from(b) * s),
            (Storage::Sparse(a), Storage::Dense(b)) => Storage::Dense(DMatrix::from(a) + b * s),
        };
        OperatorMatrix {
            layout: self.layout.clone(),
            storage,
            hermitian: self.hermitian && other.hermitian,
        }
        .normalized_storage()
    }
}

impl Add for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn add(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        self.combine(rhs, 1.0)
    }
}

impl Sub for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn sub(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        self.combine(rhs, -1.0)
    }
}

impl Neg for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn neg(self) -> OperatorMatrix {
        self.scale(-1.0)
    }
}

impl Mul for &OperatorMatrix {
    type Output = OperatorMatrix;
    fn mul(self, rhs: &OperatorMatrix) -> OperatorMatrix {
        assert_eq!(self.layout, rhs.layout, "operator layouts differ");
        let storage = match (&self.storage, &rhs.storage) {
            (Storage::Sparse(a), Storage::Sparse(b)) => Storage::Sparse(a * b),
            (Storage::Dense(a), Storage::Dense(b)) => Storage::Dense(a * b),
            (Storage::Dense(a), Storage::Sparse(_)) => Storage::Dense(rhs.mul_dense_right(a)),
            (Storage::Sparse(_), Storage::Dense(b)) => Storage::Dense(self.mul_dense_left(b)),
        };
        OperatorMatrix {
            layout: self.layout.clone(),
            storage,
            hermitian: false,
        }
        .normalized_storage()
    }
}

/// Sum of operators that all share one layout.
pub fn sum<'a>(layout: &SpaceLayout, terms: impl IntoIterator<Item = &'a OperatorMatrix>) -> OperatorMatrix {
    terms
        .into_iter()
        .fold(OperatorMatrix::zeros(layout), |acc, t| &acc + t)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sample(layout: &SpaceLayout) -> OperatorMatrix {
        let d = layout.total_dim();
        OperatorMatrix::from_triplets(
            layout,
            (0..d).flat_map(|i| {
                [
                    (i, i, c(i as f64, 0.0)),
                    (i, (i + 1) % d, c(0.5, 0.25 * i as f64)),
                    (i, (3 * i + 2) % d, c(-1.0, 1.0)),
                ]
            }),
            false,
        )
    }

    #[test]
    fn sparse_and_dense_paths_agree() {
        for n in [2usize, 40] {
            let layout = SpaceLayout::new(n, &[2]).unwrap();
            let a = sample(&layout);
            assert_eq!(a.is_dense(), layout.total_dim() < DENSE_THRESHOLD);
            let b = a.adjoint();
            let da = a.to_dense();
            let db = b.to_dense();
            assert!(((&a * &b).to_dense() - &da * &db).norm() < 1e-12);
            assert!(((&a + &b).to_dense() - (&da + &db)).norm() < 1e-12);
            let x = DVector::from_fn(layout.total_dim(), |i, _| c(i as f64 * 0.1, -1.0));
            assert!((a.apply(&x) - &da * &x).norm() < 1e-12);
            let m = DMatrix::from_fn(layout.total_dim(), 3.min(layout.total_dim()), |i, j| c(i as f64, j as f64));
            assert!((a.mul_dense_left(&m) - &da * &m).norm() < 1e-9);
            let mt = m.adjoint();
            assert!((a.mul_dense_right(&mt) - &mt * &da).norm() < 1e-9);
            let rho = DMatrix::from_fn(layout.total_dim(), layout.total_dim(), |i, j| c((i + j) as f64, 0.0));
            assert!((a.trace_product(&rho) - (&da * &rho).trace()).norm() < 1e-9);
        }
    }

    #[test]
    fn hermiticity_check() {
        let layout = SpaceLayout::new(3, &[4]).unwrap();
        let a = sample(&layout);
        assert!(a.clone().checked_hermitian().is_err());
        let h = &a + &a.adjoint();
        assert!(h.hermiticity_error() < 1e-14);
        assert!(h.checked_hermitian().unwrap().hermitian_hint());
    }

    #[test]
    fn from_dense_checks_shape() {
        let layout = SpaceLayout::new(1, &[]).unwrap();
        assert!(OperatorMatrix::from_dense(&layout, DMatrix::zeros(3, 3), true).is_err());
    }
}
