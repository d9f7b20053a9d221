//! Shared fixtures for the benchmarks.

use spinforge::units::YOCTONEWTON;
use spinforge::ModelParams;

/// Jahn-Teller parameters of the first figure with `spin_count` spins.
pub fn jahn_teller(spin_count: usize) -> ModelParams {
    ModelParams {
        spin_count,
        g_x: 5.0,
        g_y: 3.0,
        delta_x: -85.0,
        delta_y: -80.0,
        big_delta: 1.0,
        f_dx: 10.0 * YOCTONEWTON,
        f_dy: 15.0 * YOCTONEWTON,
        r0_x: 14.5e-9,
        r0_y: 14.5e-9,
    }
}

/// Strong-coupling single ion, one mode.
pub fn strong_ion() -> ModelParams {
    ModelParams {
        spin_count: 1,
        g_x: 2.5,
        delta_x: 0.5,
        big_delta: 300.0,
        f_dx: 3.0 * YOCTONEWTON,
        ..Default::default()
    }
}
