//! Hilbert-space composition, collective-spin and boson operator algebra,
//! state preparation and expectation values.

mod builders;
mod layout;
mod linalg;
mod operator;
mod state;

pub use builders::{
    boson_op, boson_parity_op, collective_spin_op, fock_edge_projector, spin_parity_op, spin_squared,
    total_parity_op, BosonOp, SpinAxis,
};
pub use layout::{BasisIndex, Mode, SpaceLayout};
pub use linalg::{hermitian_eigen, hermitian_eigenvalues, x_eigenbasis, HermitianEigen};
pub use operator::{sum, OperatorMatrix, DENSE_THRESHOLD, HERMITIAN_TOL};
pub use state::{
    coherent_spin_amplitudes, coherent_spin_state, dicke_amplitudes, expectation, ghz_amplitudes, ghz_state,
    thermal_cutoff, thermal_populations, thermal_state, wigner_amplitudes, BosonInit, QuantumState, StateRepr,
};
