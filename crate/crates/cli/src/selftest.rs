//! Invariant suites run by `spinforge selftest`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use serde_json::{json, Map};
use spinforge::analytic::{oat_signal, oat_signal_with_exponent, oat_variance_halfpi};
use spinforge::evolve::{
    evolve_lindblad, evolve_unitary, linear_grid, record, LindbladOptions, Method, NoiseParams, Observable,
    UnitaryOptions,
};
use spinforge::models::{build_effective_lmg, build_full, build_oat, build_strong_effective, derive_weak, StrongVariant};
use spinforge::quantum::{
    coherent_spin_state, collective_spin_op, dicke_amplitudes, spin_squared, sum, total_parity_op, BosonInit, OperatorMatrix,
    QuantumState, SpaceLayout, SpinAxis, StateRepr,
};
use spinforge::units::YOCTONEWTON;
use spinforge::{Complex64, ModelParams};

use crate::error::CliResult;
use crate::figures::{fig1_params, Check};
use crate::output::{Artifact, Table};

/// Entrywise operator identities.
pub const ALGEBRA_TOL: f64 = 1e-10;
/// SUSY factorisation, entrywise.
pub const SUSY_TOL: f64 = 1e-9;
/// Norm and trace drift.
pub const NORM_TOL: f64 = 1e-9;
/// Lowest allowed density-matrix eigenvalue.
pub const POSITIVITY_TOL: f64 = 1e-7;
/// Signal and variance formulas against propagation.
pub const ORACLE_TOL: f64 = 1e-8;

fn i() -> Complex64 {
    Complex64::new(0.0, 1.0)
}

fn su2(checks: &mut Vec<Check>) -> CliResult<()> {
    for n in [1usize, 2, 3, 5, 8, 12] {
        let l = SpaceLayout::new(n, &[2])?;
        let [jx, jy, jz] = [SpinAxis::X, SpinAxis::Y, SpinAxis::Z].map(|a| collective_spin_op(&l, a));
        let j = l.j();
        let errs = [
            jx.commutator(&jy).max_abs_diff(&jz.scale(i())),
            jy.commutator(&jz).max_abs_diff(&jx.scale(i())),
            jz.commutator(&jx).max_abs_diff(&jy.scale(i())),
            spin_squared(&l).max_abs_diff(&OperatorMatrix::identity(&l).scale(j * (j + 1.0))),
        ];
        checks.push(Check::at_most(format!("su2 algebra, N={n}"), errs.iter().cloned().fold(0.0, f64::max), ALGEBRA_TOL));
    }
    Ok(())
}

fn parity(checks: &mut Vec<Check>) -> CliResult<()> {
    let cases = [
        ("rabi", ModelParams { spin_count: 1, g_x: 0.7, delta_x: 1.1, big_delta: 2.3, ..Default::default() }, vec![12]),
        ("dicke", ModelParams { spin_count: 4, g_x: 2.0, delta_x: 30.0, big_delta: 5.0, ..Default::default() }, vec![8]),
        ("jahn_teller", ModelParams { spin_count: 3, ..fig1_params() }, vec![5, 5]),
    ];
    for (name, p, cutoffs) in cases {
        let free = ModelParams { f_dx: 0.0, f_dy: 0.0, ..p.clone() };
        let l = SpaceLayout::new(p.spin_count, &cutoffs)?;
        let pi = total_parity_op(&l);
        let commutator = build_full(&free, &l)?.commutator(&pi).max_abs();
        checks.push(Check::at_most(format!("[H, parity] at zero force, {name}"), commutator, ALGEBRA_TOL));
        let forced = ModelParams { f_dx: 3.0 * YOCTONEWTON, ..free };
        let broken = build_full(&forced, &l)?.commutator(&pi).max_abs();
        checks.push(Check::at_least(format!("[H, parity] with a force, {name}"), broken, 1e-3));
    }
    Ok(())
}

fn susy(checks: &mut Vec<Check>) -> CliResult<()> {
    let mut p = fig1_params();
    let w = derive_weak(&p)?;
    p.big_delta = w.chi_x * w.chi_y;
    let l = SpaceLayout::spin_only(p.spin_count);
    let h = build_effective_lmg(&p, &l)?.spin;
    let [jx, jy] = [SpinAxis::X, SpinAxis::Y].map(|a| collective_spin_op(&l, a));
    let id = OperatorMatrix::identity(&l);
    let g = w.gamma_susy;
    let left = sum(&l, &[jx.scale(w.chi_x), jy.scale(i() * w.chi_y), id.scale(g)]);
    let right = sum(&l, &[jx.scale(w.chi_x), jy.scale(-i() * w.chi_y), id.scale(g.conj())]);
    let factorized = &(&left * &right) - &id.scale(g.norm_sqr());
    checks.push(Check::at_most("SUSY factorisation at Delta = chi_x chi_y", h.max_abs_diff(&factorized), SUSY_TOL));
    Ok(())
}

fn unitarity(checks: &mut Vec<Check>) -> CliResult<()> {
    let p = ModelParams { spin_count: 3, ..fig1_params() };
    let l = p.layout(6, 6)?;
    let h = build_full(&p, &l)?;
    let psi = coherent_spin_state(&l, FRAC_PI_4)?;
    let times = linear_grid(0.0, 5.0, 11);
    for method in [Method::Spectral, Method::Krylov] {
        let opts = UnitaryOptions { method, ..Default::default() };
        let states = evolve_unitary(&h, &psi, &times, &opts)?;
        let drift = states.iter().map(|s| (s.norm() - 1.0).abs()).fold(0.0, f64::max);
        checks.push(Check::at_most(format!("norm drift, {method:?}"), drift, NORM_TOL));
    }

    let q = ModelParams { spin_count: 1, g_x: 2.5, delta_x: 0.5, big_delta: 300.0, f_dx: 3.0 * YOCTONEWTON, ..Default::default() };
    let l = SpaceLayout::new(0, &[20])?;
    let h = build_strong_effective(&q, &l, StrongVariant::LowestSpinSector)?;
    // the spin factor of a spin-free layout is one-dimensional
    let rho0 = QuantumState::product(&l, &dicke_amplitudes(0, 0), &[BosonInit::Thermal(0.3)])?;
    let noise = NoiseParams::from_heating_rate(0.1, NoiseParams::DEFAULT_NBAR)?;
    let states = evolve_lindblad(&h, spinforge::Mode::X, &noise, &rho0, &linear_grid(0.0, 4.0, 9), &LindbladOptions::default())?;
    let (mut trace, mut lowest, mut herm) = (0.0f64, f64::INFINITY, 0.0f64);
    for s in &states {
        trace = trace.max((s.norm() - 1.0).abs());
        lowest = lowest.min(s.min_eigenvalue()?);
        if let StateRepr::Mixed(m) = s.repr() {
            herm = herm.max((m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max));
        }
    }
    checks.push(Check::at_most("Lindblad trace drift", trace, NORM_TOL));
    checks.push(Check::at_least("Lindblad lowest eigenvalue", lowest, -POSITIVITY_TOL));
    checks.push(Check::at_most("Lindblad hermiticity", herm, 1e-12));
    Ok(())
}

fn oracle(checks: &mut Vec<Check>) -> CliResult<()> {
    for n in [1usize, 2, 4, 6] {
        let p = ModelParams { spin_count: n, g_x: 5.0, delta_x: 60.0, f_dx: 1.5 * YOCTONEWTON, ..Default::default() };
        let w = derive_weak(&p)?;
        let c = w.chi_x * w.chi_x;
        let l = SpaceLayout::spin_only(n);
        let h = build_oat(&p, &l)?;
        let j = n as f64 / 2.0;
        let times = linear_grid(0.0, 2.0 * PI / c, 41);
        let opts = UnitaryOptions { tol: 1e-12, ..Default::default() };
        let jz = || vec![Observable::new("Jz", collective_spin_op(&l, SpinAxis::Z)).with_variance()];
        for theta in [FRAC_PI_4, FRAC_PI_2] {
            let states = evolve_unitary(&h, &coherent_spin_state(&l, theta)?, &times, &opts)?;
            let traj = record(&times, &states, jz())?;
            let exact = traj.get("Jz").unwrap_or_default();
            let dev = times
                .iter()
                .zip(exact)
                .map(|(t, e)| (oat_signal(j, theta, c * t, w.omega_f * t) - e).abs())
                .fold(0.0, f64::max);
            checks.push(Check::at_most(format!("signal formula vs propagation, N={n}, theta={theta:.4}"), dev, ORACLE_TOL));
            if theta == FRAC_PI_2 && (n == 2 || n == 4) {
                let var = traj.variance("Jz").unwrap_or_default();
                let dev = times
                    .iter()
                    .zip(var)
                    .map(|(t, v)| (oat_variance_halfpi(j, c * t, w.omega_f * t) - v).abs())
                    .fold(0.0, f64::max);
                checks.push(Check::at_most(format!("variance formula vs propagation, N={n}"), dev, ORACLE_TOL));
            }
        }
        if n >= 2 {
            // the integer exponent 2j - 1 misses at ξ = π/4
            let t = FRAC_PI_4 / c;
            let states = evolve_unitary(&h, &coherent_spin_state(&l, FRAC_PI_2)?, &[0.0, t], &opts)?;
            let exact = record(&[0.0, t], &states, jz())?.get("Jz").map_or(f64::NAN, |s| s[1]);
            let miss = (oat_signal_with_exponent(j, FRAC_PI_2, FRAC_PI_4, w.omega_f * t, 2.0 * j - 1.0) - exact).abs();
            checks.push(Check::at_least(format!("exponent 2j-1 control misses, N={n}"), miss, 1e-2));
        }
    }
    Ok(())
}

/// Every suite, in a fixed order.
pub fn run_checks() -> CliResult<Vec<Check>> {
    let mut checks = Vec::new();
    su2(&mut checks)?;
    parity(&mut checks)?;
    susy(&mut checks)?;
    unitarity(&mut checks)?;
    oracle(&mut checks)?;
    Ok(checks)
}

/// The checks as `selftest_data.csv` (index, value, limit, pass) with the
/// names in the meta file.
pub fn artifact(checks: &[Check]) -> CliResult<Artifact> {
    let mut table = Table::new(vec!["check".into(), "value".into(), "limit".into(), "pass".into()]);
    for (k, c) in checks.iter().enumerate() {
        table.push_row(vec![k as f64, c.value, c.limit, if c.pass { 1.0 } else { 0.0 }]);
    }
    let mut meta = Map::new();
    meta.insert("checks".into(), json!(checks));
    meta.insert(
        "tolerances".into(),
        json!({
            "algebra": ALGEBRA_TOL,
            "susy": SUSY_TOL,
            "norm": NORM_TOL,
            "positivity": POSITIVITY_TOL,
            "oracle": ORACLE_TOL,
        }),
    );
    Ok(Artifact::new("selftest", table, meta))
}
