use std::f64::consts::PI;

use super::{
    boson_inits, quote_from_uncertainty, simulate, start_cutoff, weak_displacement_phonons, Estimate, ModelFidelity,
    ProtocolKind, ProtocolSpec, Readout, SensingReport,
};
use crate::analytic::ghz_parity_offset;
use crate::error::{Error, Result};
use crate::evolve::Observable;
use crate::models::{build_full, build_oat};
use crate::quantum::{ghz_amplitudes, spin_parity_op, QuantumState, SpaceLayout};
use crate::units::force_from_omega_f;

/// Smallest phase the fringe must sweep over the window to be fitted.
const MIN_EXCURSION: f64 = 0.5;

/// GHZ parity readout.
///
/// Records ⟨Π_s⟩(t), fits A cos(ω t + φ0) with the basis offset φ0 known,
/// and reads Ω_f = ω / N. The uncertainty assumes the readout is biased
/// onto a fringe midpoint, where δΩ_f = 1 / (A N t √ν).
///
/// With the J_x eigenbasis phases used here φ0 is 0 for every N, so the
/// fringe is even in Ω_f and only its magnitude is reported.
pub fn run_ghz_parity(spec: &ProtocolSpec) -> Result<SensingReport> {
    spec.expect(ProtocolKind::GhzParity)?;
    let p = &spec.params;
    let t_r = spec.readout_time()?;
    let nu = spec.repetitions()?;
    let (times, _) = spec.time_grid(t_r)?;
    let n = p.spin_count;
    let spin0 = ghz_amplitudes(n)?;
    let parity = |l: &SpaceLayout| Ok(vec![Observable::new("parity", spin_parity_op(l))]);

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
                parity,
            )?
        }
        ModelFidelity::Effective => simulate(
            spec,
            "one_axis_twisting",
            &SpaceLayout::spin_only(n),
            &times,
            |l| build_oat(p, l),
            |l| QuantumState::product(l, &spin0, &[]),
            parity,
        )?,
    };
    let signal = traj.get("parity").ok_or_else(|| Error::Numeric("missing parity series".into()))?;
    let fringe = fit_fringe(&times, signal, ghz_parity_offset(n))?;
    let window = times.last().copied().unwrap_or(0.0);
    if (fringe.omega * window).abs() < MIN_EXCURSION {
        return Err(Error::Fit(format!(
            "flat fringe: phase moves {:.3} rad over the {window} ms window; increase the force or the window",
            (fringe.omega * window).abs()
        )));
    }
    let nf = n as f64;
    let omega = fringe.omega / nf;
    let d_omega = 1.0 / (fringe.amplitude * nf * t_r * nu.sqrt());
    let force = force_from_omega_f(omega, p.g_x, p.r0_x, p.delta_x)?;
    let d_force = force_from_omega_f(d_omega, p.g_x, p.r0_x, p.delta_x)?.abs();
    let mut warnings = Vec::new();
    if fringe.amplitude < 0.9 {
        warnings.push(format!("fringe contrast {:.3} is well below one", fringe.amplitude));
    }
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
        sensitivity: quote_from_uncertainty(d_force, t_r, nu, ProtocolKind::GhzParity),
        min_force: None,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Fringe {
    omega: f64,
    amplitude: f64,
}

/// Best amplitude (clamped to [0, 1]) and squared residual at frequency ω.
fn fringe_fit_at(times: &[f64], y: &[f64], offset: f64, omega: f64) -> (f64, f64) {
    let (mut yc, mut cc, mut yy) = (0.0, 0.0, 0.0);
    for (t, v) in times.iter().zip(y) {
        let c = (omega * t + offset).cos();
        yc += v * c;
        cc += c * c;
        yy += v * v;
    }
    let a = if cc > 0.0 { (yc / cc).clamp(0.0, 1.0) } else { 0.0 };
    (a, yy - 2.0 * a * yc + a * a * cc)
}

/// Grid scan up to the Nyquist frequency followed by golden-section
/// refinement. Ties between ±ω go to the positive frequency.
fn fit_fringe(times: &[f64], y: &[f64], offset: f64) -> Result<Fringe> {
    let span = times.last().copied().unwrap_or(0.0) - times[0];
    if times.len() < 4 || span <= 0.0 {
        return Err(Error::Fit("too few fringe samples".into()));
    }
    let dt = span / (times.len() - 1) as f64;
    let omega_max = PI / dt;
    let step = PI / (4.0 * span);
    let count = (omega_max / step).ceil() as i64;
    let mut best = (0.0, f64::INFINITY);
    for k in 0..=count {
        for sign in [1.0, -1.0] {
            let w = sign * k as f64 * step;
            let (_, r) = fringe_fit_at(times, y, offset, w);
            if r < best.1 * (1.0 - 1e-12) {
                best = (w, r);
            }
        }
    }
    let (mut lo, mut hi) = (best.0 - step, best.0 + step);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let cost = |w: f64| fringe_fit_at(times, y, offset, w).1;
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (cost(x1), cost(x2));
    while hi - lo > 1e-13 * best.0.abs().max(step) {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = cost(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = cost(x2);
        }
    }
    let omega = 0.5 * (lo + hi);
    let omega = if cost(omega) <= best.1 { omega } else { best.0 };
    let (amplitude, _) = fringe_fit_at(times, y, offset, omega);
    if amplitude < 1e-6 {
        return Err(Error::Fit("parity fringe has no contrast".into()));
    }
    Ok(Fringe { omega, amplitude })
}
