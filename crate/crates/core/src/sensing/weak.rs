use std::f64::consts::PI;

use super::{
    boson_inits, quote_from_uncertainty, simulate, start_cutoff, weak_displacement_phonons, Estimate, ModelFidelity,
    ProtocolKind, ProtocolSpec, Readout, SensingReport,
};
use crate::analytic::{oat_signal, oat_signal_slope, unwrapped_kappa};
use crate::error::{Error, Result};
use crate::evolve::Observable;
use crate::models::{build_full, build_oat, derive_weak, WeakDerived};
use crate::quantum::{coherent_spin_amplitudes, collective_spin_op, QuantumState, SpaceLayout, SpinAxis};
use crate::units::force_from_omega_f;

/// Ramsey-type readout of a coherent spin state under one-axis twisting.
///
/// Records ⟨J_z⟩ and its variance, fits Ω_f to the twisting signal over
/// [0.9, 1.1] t around the readout and attaches the projection-noise
/// uncertainty δΩ_f = ΔJ_z / (|∂⟨J_z⟩/∂Ω_f| √ν) at the readout time.
/// A readout on a zero-slope point gives an infinite uncertainty and a
/// warning.
pub fn run_weak_css(spec: &ProtocolSpec) -> Result<SensingReport> {
    spec.expect(ProtocolKind::WeakCss)?;
    let p = &spec.params;
    let weak = derive_weak(p)?;
    let twist = WeakDerived::twist_rate(p)?;
    let t_r = spec.readout_time()?;
    let nu = spec.repetitions()?;
    let (times, k_r) = spec.time_grid(t_r)?;
    let n = p.spin_count;
    let j = n as f64 / 2.0;
    let spin0 = coherent_spin_amplitudes(n, spec.theta);
    let jz = |l: &SpaceLayout| Ok(vec![Observable::new("Jz", collective_spin_op(l, SpinAxis::Z)).with_variance()]);

    let traj = match spec.model_fidelity {
        ModelFidelity::Full => {
            let [mx, my] = weak_displacement_phonons(p);
            let start = p.layout(start_cutoff(spec, mx), start_cutoff(spec, my))?;
            simulate(
                spec,
                "full",
                &start,
                &times,
                |l| build_full(p, l),
                |l| QuantumState::product(l, &spin0, &boson_inits(spec, l)),
                jz,
            )?
        }
        ModelFidelity::Effective => {
            let layout = SpaceLayout::spin_only(n);
            simulate(
                spec,
                "one_axis_twisting",
                &layout,
                &times,
                |l| build_oat(p, l),
                |l| QuantumState::product(l, &spin0, &[]),
                jz,
            )?
        }
    };

    let signal = traj.get("Jz").ok_or_else(|| Error::Numeric("missing Jz series".into()))?;
    let var = traj.variance("Jz").ok_or_else(|| Error::Numeric("missing var(Jz) series".into()))?;
    let omega = fit_omega(j, spec.theta, twist, &times, signal, t_r, signal[k_r])?;

    let mut warnings = Vec::new();
    let slope = oat_signal_slope(j, spec.theta, twist * t_r, omega * t_r);
    let d_omega = if slope.abs() < 1e-12 * j {
        warnings.push(format!("readout at t = {t_r} ms sits on a zero-slope point; uncertainty is unbounded"));
        f64::INFINITY
    } else {
        var[k_r].sqrt() / ((t_r * slope).abs() * nu.sqrt())
    };
    let force = force_from_omega_f(omega, p.g_x, p.r0_x, p.delta_x)?;
    let d_force = force_from_omega_f(d_omega, p.g_x, p.r0_x, p.delta_x)?.abs();
    log::debug!("weak readout: Ω_f = {omega} (true {}) ± {d_omega}", weak.omega_f);

    Ok(SensingReport {
        spec: spec.clone(),
        readout: Readout {
            time: t_r,
            repetitions: nu,
            omega_f: Some(Estimate {
                value: omega,
                uncertainty: d_omega,
            }),
            force: Estimate {
                value: force,
                uncertainty: d_force,
            },
        },
        signal: traj,
        snr: None,
        sensitivity: quote_from_uncertainty(d_force, t_r, nu, ProtocolKind::WeakCss),
        min_force: None,
        warnings,
    })
}

/// Least-squares Ω_f of the twisting signal near the readout.
///
/// Both branches of the local inversion at the readout seed a damped
/// Gauss-Newton fit; the better fit wins and ties go to the positive
/// branch. Assumes |Ω_f t| < π at the readout.
fn fit_omega(j: f64, theta: f64, twist: f64, times: &[f64], signal: &[f64], t_r: f64, s_r: f64) -> Result<f64> {
    let window: Vec<(f64, f64)> = times
        .iter()
        .zip(signal)
        .filter(|(t, _)| **t >= 0.9 * t_r && **t <= 1.1 * t_r)
        .map(|(t, s)| (*t, *s))
        .collect();
    let xi_r = twist * t_r;
    let amplitude = oat_signal(j, theta, xi_r, 0.0).hypot(oat_signal(j, theta, xi_r, PI / 2.0));
    if amplitude < 1e-9 * j {
        return Err(Error::Fit(format!("signal amplitude vanishes at the readout t = {t_r} ms")));
    }
    let base = (s_r / amplitude).clamp(-1.0, 1.0).acos();
    let offset = (2.0 * j - 1.0) * unwrapped_kappa(theta, xi_r);
    let mut best: Option<(f64, f64)> = None;
    for branch in [base, -base] {
        let phi = wrap(branch - offset);
        let (omega, sse) = gauss_newton(j, theta, twist, &window, phi / t_r);
        if best.is_none_or(|(_, b)| sse < b * (1.0 - 1e-9) - 1e-300) {
            best = Some((omega, sse));
        }
    }
    let (omega, _) = best.ok_or_else(|| Error::Fit("no readout samples".into()))?;
    if !omega.is_finite() {
        return Err(Error::Fit("Ω_f fit diverged".into()));
    }
    Ok(omega)
}

fn wrap(phi: f64) -> f64 {
    phi - 2.0 * PI * (phi / (2.0 * PI)).round()
}

fn sse(j: f64, theta: f64, twist: f64, window: &[(f64, f64)], omega: f64) -> f64 {
    window
        .iter()
        .map(|(t, s)| (s - oat_signal(j, theta, twist * t, omega * t)).powi(2))
        .sum()
}

fn gauss_newton(j: f64, theta: f64, twist: f64, window: &[(f64, f64)], mut omega: f64) -> (f64, f64) {
    let mut err = sse(j, theta, twist, window, omega);
    for _ in 0..100 {
        let (mut jr, mut jj) = (0.0, 0.0);
        for (t, s) in window {
            let r = s - oat_signal(j, theta, twist * t, omega * t);
            let d = t * oat_signal_slope(j, theta, twist * t, omega * t);
            jr += d * r;
            jj += d * d;
        }
        if jj <= 0.0 || !jj.is_finite() {
            break;
        }
        let mut step = jr / jj;
        let mut improved = false;
        for _ in 0..40 {
            let trial = sse(j, theta, twist, window, omega + step);
            if trial <= err {
                omega += step;
                err = trial;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        let scale = omega.abs().max(1e-12 / window.last().map_or(1.0, |w| w.0));
        if !improved || step.abs() <= 1e-13 * scale {
            break;
        }
    }
    (omega, err)
}
