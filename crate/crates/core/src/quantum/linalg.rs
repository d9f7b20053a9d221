//! Dense Hermitian eigensolver and the J_x eigenbasis convention.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::builders::{spin_factor_entries, SpinAxis};
use crate::error::{Error, Result};

/// Eigendecomposition A = V diag(values) V^dag of a Hermitian matrix,
/// eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: DVector<f64>,
    pub vectors: DMatrix<Complex64>,
}

// Parallelism lives in sweeps; each solve stays sequential so results do
// not depend on the thread count.
fn sequential() {
    static ONCE: std::sync::Once = std::sync::Once::new();
    ONCE.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

pub fn hermitian_eigen(a: &DMatrix<Complex64>) -> Result<HermitianEigen> {
    sequential();
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::Numeric("eigendecomposition of a non-square matrix".into()));
    }
    let m = faer::Mat::<Complex64>::from_fn(n, n, |i, j| a[(i, j)]);
    let evd = m
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::Numeric(format!("Hermitian eigensolver did not converge: {e:?}")))?;
    let s = evd.S().column_vector();
    let u = evd.U();
    Ok(HermitianEigen {
        values: DVector::from_fn(n, |i, _| s[i].re),
        vectors: DMatrix::from_fn(n, n, |i, j| u[(i, j)]),
    })
}

/// Eigenvalues only, ascending.
pub fn hermitian_eigenvalues(a: &DMatrix<Complex64>) -> Result<Vec<f64>> {
    sequential();
    let n = a.nrows();
    let m = faer::Mat::<Complex64>::from_fn(n, n, |i, j| a[(i, j)]);
    m.self_adjoint_eigenvalues(faer::Side::Lower)
        .map_err(|e| Error::Numeric(format!("Hermitian eigensolver did not converge: {e:?}")))
}

/// Columns are the J_x eigenstates |j, m⟩_x in the spin-factor ordering
/// (column s has m = j - s).
///
/// The phases are fixed by |j, m⟩_x = R |j, m⟩_z with R the π rotation
/// about (x + z)/√2, which maps J_z to J_x and J_y to -J_y. Under this
/// convention Σ d_m |j, m⟩_x is the coherent state pointing along
/// (cos θ, 0, sin θ).
pub fn x_eigenbasis(spin_count: usize) -> DMatrix<Complex64> {
    let dim = spin_count + 1;
    let mut generator = DMatrix::<f64>::zeros(dim, dim);
    for axis in [SpinAxis::X, SpinAxis::Z] {
        for (r, c, v) in spin_factor_entries(spin_count, axis) {
            generator[(r, c)] += v.re * FRAC_1_SQRT_2;
        }
    }
    let eig = generator.symmetric_eigen();
    // R = exp(-i π n·J)
    let phases = DMatrix::from_diagonal(&DVector::from_fn(dim, |k, _| {
        Complex64::from_polar(1.0, -PI * eig.eigenvalues[k])
    }));
    let v = eig.eigenvectors.map(|x| Complex64::new(x, 0.0));
    &v * phases * v.adjoint()
}
