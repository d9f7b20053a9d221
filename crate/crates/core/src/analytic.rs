//! Closed-form sensing formulas: the one-axis-twisting signal and variance,
//! frequency uncertainty, GHZ parity sensitivity, and the strong-coupling
//! phonon signal with its minimal detectable force.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{derive_strong, ModelParams, StrongMode};
use crate::quantum::x_eigenbasis;
use crate::units::{ms_to_s, HBAR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    WeakCss,
    GhzParity,
    StrongPhonon,
    HarmonicOscillator,
}

impl Protocol {
    pub fn label(self) -> &'static str {
        match self {
            Protocol::WeakCss => "weak_css",
            Protocol::GhzParity => "ghz_parity",
            Protocol::StrongPhonon => "strong_phonon",
            Protocol::HarmonicOscillator => "harmonic_oscillator",
        }
    }
}

/// A force sensitivity f·√t in N/√Hz (single shot, T = t) together with
/// the bare minimal force.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensitivityQuote {
    /// N/√Hz.
    pub value: f64,
    /// Minimal force at the readout time, N.
    pub force: f64,
    /// ms.
    pub achieved_at_time: f64,
    pub protocol: Protocol,
}

impl SensitivityQuote {
    pub(crate) fn from_force(force: f64, t_ms: f64, protocol: Protocol) -> Self {
        SensitivityQuote {
            value: force * ms_to_s(t_ms).sqrt(),
            force,
            achieved_at_time: t_ms,
            protocol,
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::param("t", format!("evolution time must be positive, got {t}")));
    }
    Ok(())
}

/// Phase point of the twisting signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakSignalPoint {
    pub j: f64,
    pub theta: f64,
    /// Twisting angle ξ = χ² t (signed with the detuning).
    pub xi: f64,
    /// Force phase φ_f = Ω_f t.
    pub phi_f: f64,
    /// Continuous branch of atan(tan ξ cos θ).
    pub kappa: f64,
}

impl WeakSignalPoint {
    pub fn new(j: f64, theta: f64, xi: f64, phi_f: f64) -> Self {
        WeakSignalPoint {
            j,
            theta,
            xi,
            phi_f,
            kappa: unwrapped_kappa(theta, xi),
        }
    }

    pub fn signal(&self) -> f64 {
        oat_signal(self.j, self.theta, self.xi, self.phi_f)
    }
}

/// atan(tan ξ cos θ) on the branch continuous in ξ with κ(0) = 0.
///
/// κ is the winding angle of cos ξ + i cos θ sin ξ; it agrees with
/// sign(cos θ) ξ at every multiple of π/2, which fixes the branch.
pub fn unwrapped_kappa(theta: f64, xi: f64) -> f64 {
    let c = theta.cos();
    let principal = (c * xi.sin()).atan2(xi.cos());
    let reference = c.signum() * xi;
    principal + 2.0 * PI * ((reference - principal) / (2.0 * PI)).round()
}

/// ⟨J_z⟩ = j sin θ (1 - sin²θ sin²ξ)^p cos(φ_f + (2j-1) κ) with the
/// amplitude exponent p = (2j-1)/2.
pub fn oat_signal(j: f64, theta: f64, xi: f64, phi_f: f64) -> f64 {
    oat_signal_with_exponent(j, theta, xi, phi_f, (2.0 * j - 1.0) / 2.0)
}

/// Same as [`oat_signal`] with a free amplitude exponent.
pub fn oat_signal_with_exponent(j: f64, theta: f64, xi: f64, phi_f: f64, exponent: f64) -> f64 {
    let (st, sx) = (theta.sin(), xi.sin());
    let kappa = unwrapped_kappa(theta, xi);
    j * st * (1.0 - st * st * sx * sx).powf(exponent) * (phi_f + (2.0 * j - 1.0) * kappa).cos()
}

/// ∂⟨J_z⟩/∂φ_f.
pub fn oat_signal_slope(j: f64, theta: f64, xi: f64, phi_f: f64) -> f64 {
    let (st, sx) = (theta.sin(), xi.sin());
    let kappa = unwrapped_kappa(theta, xi);
    let amp = (1.0 - st * st * sx * sx).powf((2.0 * j - 1.0) / 2.0);
    -j * st * amp * (phi_f + (2.0 * j - 1.0) * kappa).sin()
}

/// ⟨ΔJ_z²⟩ for the θ = π/2 start:
/// j/2 + j(2j-1)/4 + (j(2j-1)/4) cos^{2(j-1)}(2ξ) cos 2φ_f - j² cos^{2(2j-1)}(ξ) cos² φ_f.
pub fn oat_variance_halfpi(j: f64, xi: f64, phi_f: f64) -> f64 {
    let q = j * (2.0 * j - 1.0) / 4.0;
    let pair = (2.0 * xi).cos().powi((2.0 * (j - 1.0)).round() as i32);
    let single = xi.cos().powi((2.0 * (2.0 * j - 1.0)).round() as i32);
    j / 2.0 + q + q * pair * (2.0 * phi_f).cos() - j * j * single * phi_f.cos().powi(2)
}

/// ⟨ΔJ_z²⟩ for any start angle θ.
///
/// With T₊ = J_z + iJ_y transverse to the twisting axis,
/// ⟨J_z²⟩ = Re⟨T₊²⟩/2 + (j(j+1) - ⟨J_x²⟩)/2 where ⟨J_x²⟩ is conserved and
/// ⟨T₊²⟩ = j(j-1/2) sin²θ e^{2iφ_f} (cos 2ξ + i cos θ sin 2ξ)^{2j-2}.
/// Reduces to [`oat_variance_halfpi`] at θ = π/2.
pub fn oat_variance(j: f64, theta: f64, xi: f64, phi_f: f64) -> f64 {
    let (st, ct) = (theta.sin(), theta.cos());
    let two_j = (2.0 * j).round() as i32;
    let z2 = Complex64::new((2.0 * xi).cos(), ct * (2.0 * xi).sin());
    let t2 = Complex64::from_polar(1.0, 2.0 * phi_f) * z2.powi(two_j - 2) * (j * (j - 0.5) * st * st);
    let jx2 = j * j * ct * ct + 0.5 * j * st * st;
    let second = 0.5 * t2.re + 0.5 * (j * (j + 1.0) - jx2);
    let mean = oat_signal(j, theta, xi, phi_f);
    (second - mean * mean).max(0.0)
}

/// δΩ_f = ⟨ΔJ_z²⟩^{1/2} / (|∂⟨J_z⟩/∂Ω_f| √ν) with ∂/∂Ω_f = t ∂/∂φ_f.
///
/// Returns +∞ at a zero-slope point (slope below 1e-12 j per radian, where
/// rounding dominates).
pub fn frequency_uncertainty(j: f64, theta: f64, xi: f64, phi_f: f64, t: f64, repetitions: f64) -> f64 {
    let per_radian = oat_signal_slope(j, theta, xi, phi_f);
    if per_radian.abs() < 1e-12 * j || !per_radian.is_finite() || !(repetitions > 0.0) || t == 0.0 {
        return f64::INFINITY;
    }
    oat_variance(j, theta, xi, phi_f).sqrt() / ((t * per_radian).abs() * repetitions.sqrt())
}

/// Standard quantum limit 1/√(T t N).
pub fn sql_frequency_uncertainty(spin_count: usize, t: f64, total_time: f64) -> f64 {
    1.0 / (total_time * t * spin_count as f64).sqrt()
}

/// φ0 such that the GHZ parity fringe reads ⟨Π_s⟩ = cos(N φ_f + φ0).
///
/// Depends only on the phase convention of the J_x eigenbasis.
pub fn ghz_parity_offset(spin_count: usize) -> f64 {
    let basis = x_eigenbasis(spin_count);
    let n = spin_count;
    let overlap: Complex64 = (0..=n)
        .map(|s| {
            let sign = if s % 2 == 0 { 1.0 } else { -1.0 };
            basis[(s, n)].conj() * basis[(s, 0)] * sign
        })
        .sum();
    overlap.arg()
}

pub fn ghz_parity(spin_count: usize, phi_f: f64) -> f64 {
    (spin_count as f64 * phi_f + ghz_parity_offset(spin_count)).cos()
}

/// f√T = ħ δ_x / (2 N g_x r0_x √t).
pub fn ghz_sensitivity(params: &ModelParams, t: f64) -> Result<SensitivityQuote> {
    check_time(t)?;
    if params.delta_x == 0.0 {
        return Err(Error::param("delta_x", "must be nonzero"));
    }
    if params.g_x == 0.0 {
        return Err(Error::param("g_x", "must be nonzero"));
    }
    if !(params.r0_x > 0.0) || params.spin_count == 0 {
        return Err(Error::param("r0_x", "spread and spin count must be positive"));
    }
    let n = params.spin_count as f64;
    let t_s = ms_to_s(t);
    // δ/g is a ratio of rates, so the rad/ms units cancel
    let per_shot = HBAR * (params.delta_x / params.g_x).abs() / (2.0 * n * params.r0_x * t_s);
    Ok(SensitivityQuote::from_force(per_shot, t, Protocol::GhzParity))
}

/// f_min = ħ π √(1 - λ_x²) / (t r0_x √N).
pub fn min_force_strong(params: &ModelParams, t: f64) -> Result<SensitivityQuote> {
    check_time(t)?;
    let strong = derive_strong(params)?;
    let n = params.spin_count as f64;
    let force = HBAR * PI * (1.0 - strong.x.lambda_sq).sqrt() / (ms_to_s(t) * params.r0_x * n.sqrt());
    Ok(SensitivityQuote::from_force(force, t, Protocol::StrongPhonon))
}

fn check_spread(r0: f64) -> Result<()> {
    if !(r0.is_finite() && r0 > 0.0) {
        return Err(Error::param("r0", "spread must be positive"));
    }
    Ok(())
}

/// Off-resonant harmonic oscillator at δt = kπ: f = ħπ / (t r0).
pub fn min_force_harmonic(r0: f64, t: f64) -> Result<SensitivityQuote> {
    check_time(t)?;
    check_spread(r0)?;
    let force = HBAR * PI / (ms_to_s(t) * r0);
    Ok(SensitivityQuote::from_force(force, t, Protocol::HarmonicOscillator))
}

/// Resonantly driven harmonic oscillator: f = 2ħ / (r0 t).
pub fn min_force_harmonic_resonant(r0: f64, t: f64) -> Result<SensitivityQuote> {
    check_time(t)?;
    check_spread(r0)?;
    let force = 2.0 * HBAR / (ms_to_s(t) * r0);
    Ok(SensitivityQuote::from_force(force, t, Protocol::HarmonicOscillator))
}

/// Phonon-number statistics of the strong-coupling protocol.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrongSignal {
    pub mean_n: f64,
    pub std_n: f64,
    pub snr: f64,
}

/// Exact ⟨a^dag a⟩ and its spread for the quadratic sector Hamiltonian
/// started from vacuum.
///
/// The state stays Gaussian: with r = 1/(1-λ²) and s = sin υt, c = cos υt,
/// ⟨a⟩ = -ε[(1 - c) + i (υ/δ) s], the squeezed part has
/// N_f = s²(√r - 1/√r)²/4 and M = ⟨δa²⟩ = [(r - 1/r)s² + 2i s c (√r - 1/√r)]/4,
/// and Var(n) = N_f(N_f+1) + |M|² + |α|²(2N_f+1) + 2 Re(α*² M).
pub fn strong_signal(mode: &StrongMode, t: f64) -> StrongSignal {
    let r = 1.0 / (1.0 - mode.lambda_sq);
    let phase = mode.upsilon * t;
    let (s, c) = phase.sin_cos();
    let ratio = mode.upsilon / mode.delta;
    let alpha = Complex64::new(-mode.epsilon * (1.0 - c), -mode.epsilon * ratio * s);
    let k = r.sqrt() - 1.0 / r.sqrt();
    let n_f = s * s * k * k / 4.0;
    let m = Complex64::new((r - 1.0 / r) * s * s, 2.0 * s * c * k) / 4.0;
    let a2 = alpha.norm_sqr();
    let var = n_f * (n_f + 1.0) + m.norm_sqr() + a2 * (2.0 * n_f + 1.0) + 2.0 * (alpha.conj() * alpha.conj() * m).re;
    let mean_n = a2 + n_f;
    let std_n = var.max(0.0).sqrt();
    let snr = if std_n > 0.0 { mean_n / std_n } else { 0.0 };
    StrongSignal { mean_n, std_n, snr }
}
