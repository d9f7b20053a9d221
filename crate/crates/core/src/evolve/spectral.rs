use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::Result;
use crate::quantum::{hermitian_eigen, OperatorMatrix, QuantumState, StateRepr};

fn phases(values: &DVector<f64>, t: f64) -> DVector<Complex64> {
    values.map(|e| Complex64::from_polar(1.0, -e * t))
}

/// Exact stepping in the eigenbasis of `h`.
pub(super) fn propagate(
    h: &OperatorMatrix,
    state0: &QuantumState,
    times: &[f64],
    mut visit: impl FnMut(f64, &QuantumState) -> Result<()>,
) -> Result<()> {
    let eig = hermitian_eigen(&h.to_dense())?;
    let v = &eig.vectors;
    let layout = state0.layout();
    match state0.repr() {
        StateRepr::Pure(psi) => {
            let coeffs = v.ad_mul(psi);
            let mut out = DVector::zeros(psi.len());
            for &t in times {
                let rotated = phases(&eig.values, t).component_mul(&coeffs);
                out.gemv(Complex64::new(1.0, 0.0), v, &rotated, Complex64::default());
                visit(t, &QuantumState::from_repr_unchecked(layout, StateRepr::Pure(out.clone())))?;
            }
        }
        StateRepr::Mixed(rho) => {
            // propagate the eigen-ensemble of ρ0 instead of ρ itself
            let ens = hermitian_eigen(rho)?;
            let keep: Vec<usize> = (0..ens.values.len()).filter(|&k| ens.values[k] > 1e-15).collect();
            let weights: Vec<f64> = keep.iter().map(|&k| ens.values[k]).collect();
            let members = DMatrix::from_fn(rho.nrows(), keep.len(), |r, c| ens.vectors[(r, keep[c])]);
            let coeffs = v.ad_mul(&members);
            for &t in times {
                let p = phases(&eig.values, t);
                let mut rotated = coeffs.clone();
                for (r, mut row) in rotated.row_iter_mut().enumerate() {
                    row *= p[r];
                }
                let evolved = v * rotated;
                let mut weighted = evolved.clone();
                for (c, mut col) in weighted.column_iter_mut().enumerate() {
                    col *= Complex64::new(weights[c], 0.0);
                }
                let back = weighted * evolved.adjoint();
                let sym = (&back + back.adjoint()).scale(0.5);
                visit(t, &QuantumState::from_repr_unchecked(layout, StateRepr::Mixed(sym)))?;
            }
        }
    }
    Ok(())
}
