use nalgebra::DVector;
use num_complex::Complex64;

use super::{
    boson_inits, quote_from_uncertainty, simulate, start_cutoff, Estimate, ModelFidelity, ProtocolKind, ProtocolSpec,
    Readout, SensingReport,
};
use crate::analytic::{min_force_strong, strong_signal, SensitivityQuote};
use crate::error::{Error, Result};
use crate::evolve::{Observable, Series, Trajectory};
use crate::models::{build_full, build_strong_effective, derive_strong, ModelParams, StrongVariant};
use crate::quantum::{boson_op, dicke_amplitudes, BosonOp, Mode, QuantumState, SpaceLayout};
use crate::units::YOCTONEWTON;

/// Phonon-number readout in the strong-coupling regime, spin in |j, -j⟩.
///
/// Records ⟨n_x⟩, its variance and SNR = ⟨n_x⟩ / Δn_x. The force magnitude
/// is read from ⟨n_x⟩ through the noiseless closed-form calibration
/// ⟨n_x⟩ = k f² + n_0, so heating biases it upwards.
pub fn run_strong_phonon(spec: &ProtocolSpec) -> Result<SensingReport> {
    spec.expect(ProtocolKind::StrongPhonon)?;
    let p = &spec.params;
    let t_r = spec.readout_time()?;
    let nu = spec.repetitions()?;
    let (times, k_r) = spec.time_grid(t_r)?;
    let mut traj = simulate_strong(spec, &times)?;
    let mean = traj.get("n_x").ok_or_else(|| Error::Numeric("missing n_x series".into()))?.to_vec();
    let var = traj.variance("n_x").ok_or_else(|| Error::Numeric("missing var(n_x) series".into()))?.to_vec();
    let snr: Vec<f64> = mean.iter().zip(&var).map(|(m, v)| ratio(*m, *v)).collect();
    let snr_r = snr[k_r];
    traj.series.push(Series {
        name: "snr".into(),
        values: snr,
    });

    let mut warnings = Vec::new();
    let (gain, floor) = calibration(p, t_r)?;
    let excess = (mean[k_r] - floor).max(0.0);
    let force = (excess / gain).sqrt() * YOCTONEWTON;
    // d⟨n⟩/df = 2 k f
    let slope = 2.0 * gain * force / (YOCTONEWTON * YOCTONEWTON);
    let d_force = if slope > 0.0 {
        var[k_r].sqrt() / (slope * nu.sqrt())
    } else {
        warnings.push("no phonon signal above the squeezing floor; uncertainty is unbounded".into());
        f64::INFINITY
    };
    let sensitivity = if snr_r > 0.0 {
        // f / SNR, the force at which the signal would equal its spread
        SensitivityQuote::from_force(p.f_dx.abs() / snr_r, t_r, ProtocolKind::StrongPhonon.protocol())
    } else {
        quote_from_uncertainty(d_force, t_r, nu, ProtocolKind::StrongPhonon)
    };
    Ok(SensingReport {
        spec: spec.clone(),
        signal: traj,
        readout: Readout {
            time: t_r,
            repetitions: nu,
            omega_f: None,
            force: Estimate {
                value: force,
                uncertainty: d_force,
            },
        },
        snr: Some(snr_r),
        sensitivity,
        min_force: None,
        warnings,
    })
}

fn ratio(mean: f64, var: f64) -> f64 {
    if var > 0.0 {
        mean / var.sqrt()
    } else {
        0.0
    }
}

/// (k, n_0) with ⟨n⟩ = k (f / yN)² + n_0 in the noiseless sector model.
fn calibration(p: &ModelParams, t: f64) -> Result<(f64, f64)> {
    let mut q = p.clone();
    q.f_dx = 0.0;
    let floor = strong_signal(&derive_strong(&q)?.x, t).mean_n;
    q.f_dx = YOCTONEWTON;
    let unit = strong_signal(&derive_strong(&q)?.x, t).mean_n;
    Ok((unit - floor, floor))
}

fn simulate_strong(spec: &ProtocolSpec, times: &[f64]) -> Result<Trajectory> {
    let p = &spec.params;
    let strong = derive_strong(p)?;
    // ⟨n⟩ is periodic in 2π/υ; one period bounds it
    let peak = |m: &crate::models::StrongMode| {
        (0..=32)
            .map(|k| strong_signal(m, k as f64 / 16.0 * m.optimal_time()))
            .map(|s| s.mean_n + 3.0 * s.std_n)
            .fold(0.0, f64::max)
    };
    let cx = start_cutoff(spec, peak(&strong.x));
    let cy = strong.y.as_ref().map_or(0, |m| start_cutoff(spec, peak(m)));
    let number = |l: &SpaceLayout| Ok(vec![Observable::new("n_x", boson_op(l, Mode::X, BosonOp::Number)?).with_variance()]);
    match spec.model_fidelity {
        ModelFidelity::Effective => {
            let cutoffs: Vec<usize> = if p.uses_mode_y() { vec![cx, cy] } else { vec![cx] };
            let start = SpaceLayout::new(0, &cutoffs)?;
            let vacuum_spin = DVector::from_element(1, Complex64::new(1.0, 0.0));
            simulate(
                spec,
                "strong_sector",
                &start,
                times,
                |l| build_strong_effective(p, l, StrongVariant::LowestSpinSector),
                |l| QuantumState::product(l, &vacuum_spin, &boson_inits(spec, l)),
                number,
            )
        }
        ModelFidelity::Full => {
            let n = p.spin_count;
            let down = dicke_amplitudes(n, n);
            simulate(
                spec,
                "full",
                &p.layout(cx, cy.max(1))?,
                times,
                |l| build_full(p, l),
                |l| QuantumState::product(l, &down, &boson_inits(spec, l)),
                number,
            )
        }
    }
}

/// SNR of the phonon readout at the spec's readout time, with the force
/// along x replaced by `force`.
pub fn snr_at_readout(spec: &ProtocolSpec, force: f64) -> Result<f64> {
    let t_r = spec.readout_time()?;
    let mut s = spec.clone();
    s.params.f_dx = force;
    s.evolve_time = Some(t_r);
    s.expect(ProtocolKind::StrongPhonon)?;
    let traj = simulate_strong(&s, &[t_r])?;
    let mean = traj.get("n_x").ok_or_else(|| Error::Numeric("missing n_x series".into()))?[0];
    let var = traj.variance("n_x").ok_or_else(|| Error::Numeric("missing var(n_x) series".into()))?[0];
    Ok(ratio(mean, var))
}

/// Force at which the readout SNR equals `snr_target`.
///
/// Brackets [f/4, 4f] around the noiseless closed-form minimal force,
/// checks SNR is increasing over five log-spaced probes, then bisects in
/// log f to a relative width of 1e-4.
pub fn search_min_force(spec: &ProtocolSpec, snr_target: f64) -> Result<SensitivityQuote> {
    spec.expect(ProtocolKind::StrongPhonon)?;
    if !(snr_target.is_finite() && snr_target > 0.0) {
        return Err(Error::param("snr_target", "must be positive"));
    }
    let t_r = spec.readout_time()?;
    let guess = min_force_strong(&spec.params, t_r)?.force * snr_target;
    let (mut lo, mut hi) = (guess.ln() - 4f64.ln(), guess.ln() + 4f64.ln());
    let probes: Vec<(f64, f64)> = (0..5)
        .map(|k| {
            let x = lo + (hi - lo) * k as f64 / 4.0;
            snr_at_readout(spec, x.exp()).map(|s| (x, s))
        })
        .collect::<Result<_>>()?;
    if probes.windows(2).any(|w| w[1].1 <= w[0].1) {
        let values: Vec<String> = probes.iter().map(|(x, s)| format!("{:.3e} N -> {s:.4}", x.exp())).collect();
        return Err(Error::Bracket(format!("SNR is not increasing in f: {}", values.join(", "))));
    }
    let (first, last) = (probes[0].1, probes[4].1);
    if !(first < snr_target && snr_target < last) {
        return Err(Error::Bracket(format!(
            "SNR spans [{first:.4}, {last:.4}] over [{:.3e}, {:.3e}] N, target {snr_target}",
            lo.exp(),
            hi.exp()
        )));
    }
    for w in probes.windows(2) {
        if w[0].1 < snr_target && snr_target <= w[1].1 {
            (lo, hi) = (w[0].0, w[1].0);
        }
    }
    while hi - lo > 1e-4 {
        let mid = 0.5 * (lo + hi);
        if snr_at_readout(spec, mid.exp())? < snr_target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let force = (0.5 * (lo + hi)).exp();
    Ok(SensitivityQuote::from_force(force, t_r, ProtocolKind::StrongPhonon.protocol()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::min_force_harmonic;
    use crate::evolve::NoiseParams;
    use crate::models::DEFAULT_R0;
    use std::f64::consts::PI;

    fn fig4(g: f64) -> ProtocolSpec {
        let p = ModelParams {
            spin_count: 1,
            g_x: g,
            delta_x: 0.14,
            big_delta: 270.0,
            ..Default::default()
        };
        let mut s = ProtocolSpec::new(ProtocolKind::StrongPhonon, p);
        s.model_fidelity = ModelFidelity::Effective;
        s
    }

    #[test]
    fn unit_snr_at_closed_form_minimum() {
        for g in [0.5, 1.5, 2.5] {
            let mut s = fig4(g);
            let t = s.readout_time().unwrap();
            s.params.f_dx = min_force_strong(&s.params, t).unwrap().force;
            let r = run_strong_phonon(&s).unwrap();
            assert!((r.snr.unwrap() - 1.0).abs() < 0.03, "g={g}: {:?}", r.snr);
        }
    }

    #[test]
    fn snr_peaks_at_half_period() {
        let mut s = fig4(2.5);
        let t = s.readout_time().unwrap();
        // signal-dominated regime; far below f_min squeezing noise dominates
        s.params.f_dx = 2.0 * min_force_strong(&s.params, t).unwrap().force;
        let r = run_strong_phonon(&s).unwrap();
        let snr = r.signal.get("snr").unwrap();
        let (k, _) = snr.iter().enumerate().fold((0, 0.0), |b, (k, v)| if *v > b.1 { (k, *v) } else { b });
        let dt = r.signal.times[1] - r.signal.times[0];
        assert!((r.signal.times[k] - t).abs() <= dt, "{} vs {t}", r.signal.times[k]);
        let upsilon = derive_strong(&s.params).unwrap().x.upsilon;
        assert!((upsilon * t - PI).abs() < 1e-12);
    }

    #[test]
    fn estimator_recovers_known_force() {
        for f in [3e-25, 6e-25, 1.2e-24] {
            let mut s = fig4(2.0);
            s.params.f_dx = f;
            let est = run_strong_phonon(&s).unwrap().readout.force;
            assert!((est.value - f).abs() <= est.uncertainty, "{est:?}");
            assert!((est.value / f - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn decoupled_search_is_the_harmonic_oscillator() {
        let s = fig4(0.0);
        let t = s.readout_time().unwrap();
        let q = search_min_force(&s, 1.0).unwrap();
        let ho = min_force_harmonic(DEFAULT_R0, t).unwrap();
        assert!((q.force / ho.force - 1.0).abs() < 0.01, "{} vs {}", q.force, ho.force);
    }

    #[test]
    fn heating_raises_the_minimal_force() {
        let quiet = fig4(2.5);
        let mut warm = quiet.clone();
        warm.noise = Some(NoiseParams::from_heating_rate(0.005, NoiseParams::DEFAULT_NBAR).unwrap());
        let a = search_min_force(&quiet, 1.0).unwrap().force;
        let b = search_min_force(&warm, 1.0).unwrap().force;
        assert!(b > a, "{b} <= {a}");
        let t = quiet.readout_time().unwrap();
        assert!((a / min_force_strong(&quiet.params, t).unwrap().force - 1.0).abs() < 0.03);
    }

    #[test]
    fn full_model_agrees_with_sector() {
        let mut s = ProtocolSpec::new(
            ProtocolKind::StrongPhonon,
            ModelParams {
                spin_count: 2,
                g_x: 2.5,
                delta_x: 0.5,
                big_delta: 300.0,
                f_dx: 3.0 * YOCTONEWTON,
                ..Default::default()
            },
        );
        s.grid.points = 60;
        let full = run_strong_phonon(&s).unwrap();
        s.model_fidelity = ModelFidelity::Effective;
        let sector = run_strong_phonon(&s).unwrap();
        let a = full.signal.get("n_x").unwrap();
        let b = sector.signal.get("n_x").unwrap();
        let peak = b.iter().cloned().fold(0.0, f64::max);
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 0.05 * peak);
        }
    }

    #[test]
    fn soft_mode_is_rejected() {
        let mut s = fig4(5.0);
        s.params.f_dx = 1e-25;
        assert!(run_strong_phonon(&s).is_err());
    }
}
