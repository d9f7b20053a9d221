//! Time propagation: exact spectral stepping, Krylov stepping for large
//! spaces, and a density-matrix Lindblad integrator with motional heating.

mod cutoff;
mod krylov;
mod lindblad;
mod record;
mod spectral;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{OperatorMatrix, QuantumState};

pub use cutoff::{with_cutoff_escalation, CutoffPolicy};
pub use lindblad::{evolve_lindblad, propagate_lindblad, LindbladOptions, LindbladStats, NoiseParams};
pub use record::{record, Observable, Recorder, Series, Trajectory, TrajectoryMeta};

/// Largest dimension handled by dense eigendecomposition.
pub const SPECTRAL_LIMIT: usize = 2048;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Spectral up to [`SPECTRAL_LIMIT`], Krylov above.
    #[default]
    Auto,
    Spectral,
    Krylov,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitaryOptions {
    /// Error allowed per unit of propagated time.
    pub tol: f64,
    pub method: Method,
    /// Largest Krylov subspace.
    pub krylov_dim: usize,
}

impl Default for UnitaryOptions {
    fn default() -> Self {
        UnitaryOptions {
            tol: 1e-8,
            method: Method::Auto,
            krylov_dim: 30,
        }
    }
}

/// Uniform grid of `points` times spanning [start, end].
pub fn linear_grid(start: f64, end: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![start],
        _ => (0..points)
            .map(|k| start + (end - start) * k as f64 / (points - 1) as f64)
            .collect(),
    }
}

pub(crate) fn check_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::param("times", "grid is empty"));
    }
    if times.iter().any(|t| !t.is_finite()) || times[0] < 0.0 {
        return Err(Error::param("times", "grid must be finite and start at t >= 0"));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("times", "grid must be strictly increasing"));
    }
    Ok(())
}

pub(crate) fn check_hamiltonian(h: &OperatorMatrix, state: &QuantumState) -> Result<()> {
    h.layout().check_same(state.layout())?;
    let err = h.hermiticity_error();
    if err > crate::quantum::HERMITIAN_TOL * h.max_abs().max(1.0) {
        return Err(Error::NotHermitian(err));
    }
    Ok(())
}

/// Propagates `state0` (the state at t = 0) under `h` and hands the state at
/// each grid time to `visit`. Returns the method that was used.
pub fn propagate_unitary(
    h: &OperatorMatrix,
    state0: &QuantumState,
    times: &[f64],
    options: &UnitaryOptions,
    visit: impl FnMut(f64, &QuantumState) -> Result<()>,
) -> Result<Method> {
    check_hamiltonian(h, state0)?;
    check_grid(times)?;
    if !(options.tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    let method = match options.method {
        Method::Auto if h.dim() <= SPECTRAL_LIMIT => Method::Spectral,
        Method::Auto => Method::Krylov,
        m => m,
    };
    match method {
        Method::Krylov => krylov::propagate(h, state0, times, options, visit)?,
        _ => spectral::propagate(h, state0, times, visit)?,
    }
    Ok(method)
}

/// Collecting form of [`propagate_unitary`].
pub fn evolve_unitary(
    h: &OperatorMatrix,
    state0: &QuantumState,
    times: &[f64],
    options: &UnitaryOptions,
) -> Result<Vec<QuantumState>> {
    let mut out = Vec::with_capacity(times.len());
    propagate_unitary(h, state0, times, options, |_, s| {
        out.push(s.clone());
        Ok(())
    })?;
    Ok(out)
}
