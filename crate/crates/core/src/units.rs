//! Physical constants and conversions between SI inputs and the internal
//! unit system.
//!
//! Internally every frequency is an angular rate in rad/ms (numerically the
//! same as krad/s) and every time is in ms. Forces stay in newtons and
//! lengths in meters; `HBAR` only appears where the two meet. Quoted
//! "kHz"/"MHz" values are read as angular rates: `2.5kHz` means 2.5 rad/ms.

use std::fmt;

use crate::error::{Error, Result};

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_8e-34;

/// 1 yN in newtons.
pub const YOCTONEWTON: f64 = 1e-24;
/// 1 xN in newtons.
pub const XONTONEWTON: f64 = 1e-27;
/// 1 aN in newtons.
pub const ATTONEWTON: f64 = 1e-18;
pub const NANOMETER: f64 = 1e-9;

/// Milliseconds per second.
const MS_PER_S: f64 = 1e3;

/// Printed at the top of every generated artifact.
pub const CONVENTION_NOTE: &str =
    "units: angular rates in rad/ms (kHz read as krad/s = rad/ms), time in ms, force in N, length in m";

/// Immutable bundle of the constants used by the conversions below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub hbar: f64,
}

impl PhysicalConstants {
    pub const SI: PhysicalConstants = PhysicalConstants { hbar: HBAR };
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self::SI
    }
}

fn positive(name: &str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::param(name, format!("must be positive and finite, got {value}")))
    }
}

/// Ground-state spread r0 = sqrt(hbar / (2 m omega)) in meters.
///
/// `omega` is the trap angular frequency in rad/s.
pub fn ground_state_spread(mass: f64, omega: f64) -> Result<f64> {
    let mass = positive("mass", mass)?;
    let omega = positive("omega", omega)?;
    Ok((HBAR / (2.0 * mass * omega)).sqrt())
}

/// Inverse of [`ground_state_spread`]: the trap angular frequency (rad/s)
/// giving spread `r0` for an ion of mass `mass`.
pub fn trap_frequency_for_spread(mass: f64, r0: f64) -> Result<f64> {
    let mass = positive("mass", mass)?;
    let r0 = positive("r0", r0)?;
    Ok(HBAR / (2.0 * mass * r0 * r0))
}

/// Force energy F = r0 f_d / 2 in joules.
pub fn force_energy(f_d: f64, r0: f64) -> f64 {
    0.5 * r0 * f_d
}

/// F/hbar as an angular rate in rad/ms.
pub fn force_rate(f_d: f64, r0: f64) -> f64 {
    force_energy(f_d, r0) / HBAR / MS_PER_S
}

/// Inverse of [`force_rate`]: the force amplitude (N) whose F/hbar equals
/// `rate` (rad/ms).
pub fn force_from_rate(rate: f64, r0: f64) -> f64 {
    2.0 * rate * HBAR * MS_PER_S / r0
}

/// Omega_f = 2 g r0 f_d / (hbar delta) in rad/ms.
///
/// `g` and `delta` are in rad/ms; only their ratio enters.
pub fn omega_f(g: f64, r0: f64, f_d: f64, delta: f64) -> Result<f64> {
    if delta == 0.0 {
        return Err(Error::param("delta", "force detuning must be nonzero"));
    }
    Ok(4.0 * g * force_rate(f_d, r0) / delta)
}

/// Force amplitude (N) that produces a given Omega_f (rad/ms).
pub fn force_from_omega_f(omega_f: f64, g: f64, r0: f64, delta: f64) -> Result<f64> {
    if g == 0.0 {
        return Err(Error::param("g", "coupling must be nonzero to map Omega_f to a force"));
    }
    Ok(force_from_rate(omega_f * delta / (4.0 * g), r0))
}

pub fn ms_to_s(t: f64) -> f64 {
    t / MS_PER_S
}

pub fn s_to_ms(t: f64) -> f64 {
    t * MS_PER_S
}

/// Physical dimension of a parsed quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Force,
    Length,
    AngularRate,
    Time,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Force => "force",
            Dimension::Length => "length",
            Dimension::AngularRate => "angular rate",
            Dimension::Time => "time",
        };
        f.write_str(s)
    }
}

// Longest suffixes first so that "ms" wins over "s" and "yN" over "N".
// The scale is a decimal exponent so that "1.5yN" parses to exactly 1.5e-24.
const SUFFIXES: &[(&str, Dimension, i32)] = &[
    ("kHz", Dimension::AngularRate, 0),
    ("MHz", Dimension::AngularRate, 3),
    ("yN", Dimension::Force, -24),
    ("xN", Dimension::Force, -27),
    ("aN", Dimension::Force, -18),
    ("nm", Dimension::Length, -9),
    ("ms", Dimension::Time, 0),
    ("N", Dimension::Force, 0),
    ("s", Dimension::Time, 3),
];

/// Parses `<float><suffix>` into internal units (N, m, rad/ms, ms).
///
/// A bare number is taken to be in internal units already.
pub fn parse_quantity(text: &str, expected: Dimension) -> Result<f64> {
    let text = text.trim();
    let bad = |reason: String| Error::param(text, reason);
    let (number, shift) = match SUFFIXES.iter().find(|(s, _, _)| text.ends_with(s)) {
        Some(&(suffix, dim, shift)) => {
            if dim != expected {
                return Err(bad(format!("unit `{suffix}` is a {dim}, expected a {expected}")));
            }
            (text[..text.len() - suffix.len()].trim(), shift)
        }
        None => (text, 0),
    };
    let not_a_number = || bad(format!("cannot parse `{number}` as a number"));
    let (mantissa, exponent) = match number.find(['e', 'E']) {
        Some(at) => (&number[..at], number[at + 1..].parse::<i32>().map_err(|_| not_a_number())?),
        None => (number, 0),
    };
    if mantissa.is_empty() || !mantissa.chars().all(|c| c.is_ascii_digit() || matches!(c, '.' | '+' | '-')) {
        return Err(not_a_number());
    }
    let value: f64 = format!("{mantissa}e{}", exponent + shift)
        .parse()
        .map_err(|_| not_a_number())?;
    if !value.is_finite() {
        return Err(bad("value must be finite".into()));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const YB171_MASS: f64 = 2.838e-25;

    #[test]
    fn spread_round_trips_through_trap_frequency() {
        let omega = trap_frequency_for_spread(YB171_MASS, 14.5e-9).unwrap();
        // hbar / (2 m r0^2) ~ 884 krad/s
        assert_relative_eq!(omega / 1e3, 884.0, max_relative = 2e-3);
        let r0 = ground_state_spread(YB171_MASS, omega).unwrap();
        assert_relative_eq!(r0, 14.5e-9, max_relative = 1e-12);
    }

    #[test]
    fn spread_scaling() {
        let r1 = ground_state_spread(YB171_MASS, 1e6).unwrap();
        let r2 = ground_state_spread(2.0 * YB171_MASS, 1e6).unwrap();
        assert_relative_eq!(r2, r1 / 2f64.sqrt(), max_relative = 1e-14);
        let mut last = f64::INFINITY;
        for omega in [1e3, 1e5, 1e7, 1e9, 1e12] {
            let r = ground_state_spread(YB171_MASS, omega).unwrap();
            assert!(r < last);
            last = r;
        }
    }

    #[test]
    fn spread_rejects_nonpositive() {
        assert!(ground_state_spread(0.0, 1.0).is_err());
        assert!(ground_state_spread(1.0, -1.0).is_err());
    }

    #[test]
    fn force_rate_for_fig2_force() {
        let rate = force_rate(1.5 * YOCTONEWTON, 14.5e-9);
        assert_relative_eq!(rate, 0.1031, max_relative = 1e-3);
        assert_eq!(force_rate(0.0, 14.5e-9), 0.0);
    }

    #[test]
    fn omega_f_for_fig2() {
        let w = omega_f(5.0, 14.5e-9, 1.5 * YOCTONEWTON, 60.0).unwrap();
        let by_hand = 2.0 * 5e3 * 14.5e-9 * 1.5e-24 / (1.0545718e-34 * 60e3) / 1e3;
        assert_relative_eq!(w, by_hand, max_relative = 1e-12);
        assert_relative_eq!(w, 0.0344, max_relative = 2e-3);
        assert_eq!(omega_f(5.0, 14.5e-9, 0.0, 60.0).unwrap(), 0.0);
        assert!(omega_f(5.0, 14.5e-9, 1.0, 0.0).is_err());
    }

    #[test]
    fn force_round_trips() {
        for f in [1e-27, 1.5e-24, 3e-21] {
            let back = force_from_rate(force_rate(f, 15e-9), 15e-9);
            assert_relative_eq!(back, f, max_relative = 1e-12);
            let w = omega_f(2.5, 15e-9, f, -7.0).unwrap();
            let back = force_from_omega_f(w, 2.5, 15e-9, -7.0).unwrap();
            assert_relative_eq!(back, f, max_relative = 1e-12);
        }
    }

    #[test]
    fn parses_suffixes() {
        assert_eq!(parse_quantity("1.5yN", Dimension::Force).unwrap(), 1.5e-24);
        assert_eq!(parse_quantity("68xN", Dimension::Force).unwrap(), 68e-27);
        assert_eq!(parse_quantity("2aN", Dimension::Force).unwrap(), 2e-18);
        assert_eq!(parse_quantity("0N", Dimension::Force).unwrap(), 0.0);
        assert_eq!(parse_quantity("14.5nm", Dimension::Length).unwrap(), 14.5e-9);
        assert_eq!(parse_quantity("2.5kHz", Dimension::AngularRate).unwrap(), 2.5);
        assert_eq!(parse_quantity("2.7MHz", Dimension::AngularRate).unwrap(), 2700.0);
        assert_eq!(parse_quantity("38.6ms", Dimension::Time).unwrap(), 38.6);
        assert_eq!(parse_quantity("0.002s", Dimension::Time).unwrap(), 2.0);
        assert_eq!(parse_quantity("-85", Dimension::AngularRate).unwrap(), -85.0);
        assert_eq!(parse_quantity("1e-3 yN", Dimension::Force).unwrap(), 1e-27);
    }

    #[test]
    fn rejects_wrong_dimension_and_garbage() {
        assert!(parse_quantity("3kHz", Dimension::Force).is_err());
        assert!(parse_quantity("abcN", Dimension::Force).is_err());
        assert!(parse_quantity("inf", Dimension::Time).is_err());
    }
}
