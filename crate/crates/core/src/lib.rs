//! Spin-boson dynamics and force-metrology toolkit for trapped-ion
//! crystals.
//!
//! The crate builds the Jahn-Teller / Dicke / Rabi spin-boson Hamiltonians
//! on the symmetric Dicke sector, propagates them (unitary and Lindblad),
//! evaluates the closed-form sensing formulas and runs the end-to-end
//! sensing protocols.

pub mod analytic;
pub mod error;
pub mod evolve;
pub mod models;
pub mod quantum;
pub mod sensing;
pub mod units;

pub use error::{Error, Result};
pub use models::{ModelParams, StrongDerived, WeakDerived};
pub use quantum::{Mode, OperatorMatrix, QuantumState, SpaceLayout};
pub use units::HBAR;

pub use num_complex::Complex64;
