use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::UnitaryOptions;
use crate::error::{Error, Result};
use crate::quantum::{OperatorMatrix, QuantumState, StateRepr};

struct LanczosStep {
    result: DVector<Complex64>,
    error: f64,
}

/// Lanczos approximation of exp(-i tau H) v with the usual a-posteriori
/// error estimate beta0 * h_{m+1,m} * tau * |[exp(-i tau T) e1]_m|.
fn lanczos_exp(h: &OperatorMatrix, v: &DVector<Complex64>, tau: f64, max_dim: usize) -> LanczosStep {
    let dim = v.len();
    let m_max = max_dim.min(dim).max(1);
    let one = Complex64::new(1.0, 0.0);
    let beta0 = v.norm();
    let mut basis: Vec<DVector<Complex64>> = vec![v.unscale(beta0)];
    let mut alpha = Vec::with_capacity(m_max);
    let mut beta = Vec::with_capacity(m_max);
    let mut w = DVector::zeros(dim);
    let mut residual;
    let floor = 1e-12 * h.max_abs().max(1e-300);
    loop {
        let k = alpha.len();
        h.apply_into(basis[k].as_slice(), w.as_mut_slice());
        alpha.push(basis[k].dotc(&w).re);
        // full reorthogonalisation, two passes
        for _ in 0..2 {
            for q in &basis {
                let overlap = q.dotc(&w);
                w.axpy(-overlap, q, one);
            }
        }
        residual = w.norm();
        if alpha.len() == m_max || residual < floor {
            break;
        }
        beta.push(residual);
        basis.push(w.unscale(residual));
    }
    let m = alpha.len();
    let t = DMatrix::from_fn(m, m, |r, c| {
        if r == c {
            alpha[r]
        } else if r + 1 == c {
            beta[r]
        } else if c + 1 == r {
            beta[c]
        } else {
            0.0
        }
    });
    let eig = t.symmetric_eigen();
    let q = &eig.eigenvectors;
    let y = DVector::from_fn(m, |r, _| {
        (0..m)
            .map(|k| Complex64::from_polar(1.0, -tau * eig.eigenvalues[k]) * q[(r, k)] * q[(0, k)])
            .sum::<Complex64>()
    });
    let error = if residual < floor || m == dim {
        0.0
    } else {
        beta0 * residual * tau * y[m - 1].norm()
    };
    let mut result = DVector::zeros(dim);
    for (q, c) in basis.iter().zip(y.iter()) {
        result.axpy(*c * beta0, q, one);
    }
    LanczosStep { result, error }
}

pub(super) fn propagate(
    h: &OperatorMatrix,
    state0: &QuantumState,
    times: &[f64],
    options: &UnitaryOptions,
    mut visit: impl FnMut(f64, &QuantumState) -> Result<()>,
) -> Result<()> {
    let mut psi = match state0.repr() {
        StateRepr::Pure(v) => v.clone(),
        StateRepr::Mixed(_) => {
            return Err(Error::Numeric(
                "Krylov stepping needs a pure state; use the Lindblad integrator with zero noise".into(),
            ))
        }
    };
    let layout = state0.layout();
    let mut now = 0.0;
    let mut tau = (options.krylov_dim as f64 / 4.0) / h.max_abs().max(1e-12);
    for &target in times {
        while target - now > 1e-14 * target.max(1.0) {
            let step = tau.min(target - now);
            let attempt = lanczos_exp(h, &psi, step, options.krylov_dim);
            if attempt.error > options.tol * step {
                tau = step * 0.5;
                if tau < 1e-14 * target.max(1.0) {
                    return Err(Error::Numeric("Krylov step size underflow".into()));
                }
                continue;
            }
            psi = attempt.result;
            now += step;
            if attempt.error < 0.1 * options.tol * step && step == tau {
                tau *= 1.5;
            }
        }
        now = target;
        visit(target, &QuantumState::from_repr_unchecked(layout, StateRepr::Pure(psi.clone())))?;
    }
    Ok(())
}
