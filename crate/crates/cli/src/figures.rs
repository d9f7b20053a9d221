//! Reproduction drivers for the five figures. Each returns its table, a
//! meta record with everything needed to regenerate it, and the checks the
//! data must pass before it is written.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;
use serde_json::{json, Map, Value};
use spinforge::analytic::{min_force_strong, oat_signal};
use spinforge::evolve::{
    linear_grid, propagate_unitary, with_cutoff_escalation, CutoffPolicy, NoiseParams, Observable, Recorder,
    Trajectory, TrajectoryMeta, UnitaryOptions,
};
use spinforge::models::{build_effective_lmg, build_full, derive_strong, derive_weak, ModelParams, WeakDerived};
use spinforge::quantum::{collective_spin_op, BasisIndex, BosonInit, QuantumState, SpaceLayout, SpinAxis};
use spinforge::sensing::{
    run, sweep, ModelFidelity, ProtocolKind, ProtocolSpec, SensingReport, SweepAxis, SweepOptions, SweepPoint,
};
use spinforge::units::YOCTONEWTON;

use crate::error::{CliError, CliResult};
use crate::output::{Artifact, Table};

/// Agreement between full and effective ⟨J_z⟩, in units of j.
pub const SPIN_TOL: f64 = 0.05;
/// Agreement between full and sector ⟨n_x⟩, relative to the peak.
pub const PHONON_TOL: f64 = 0.05;
/// Numeric vs closed-form minimal force.
pub const FMIN_TOL: f64 = 0.03;
/// SNR shift allowed when the reservoir occupation doubles.
pub const NBAR_SPLIT_TOL: f64 = 0.01;

/// One pass/fail test attached to an artifact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    /// `true` when the value must not exceed the limit, `false` when it must
    /// reach it.
    pub upper: bool,
    pub pass: bool,
}

impl Check {
    pub fn at_most(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            limit,
            upper: true,
            pass: value <= limit,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, limit: f64) -> Self {
        Check {
            name: name.into(),
            value,
            limit,
            upper: false,
            pass: value >= limit,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = if self.upper { "<=" } else { ">=" };
        let verdict = if self.pass { "pass" } else { "FAIL" };
        write!(f, "{verdict} {}: {:.4e} {op} {:.4e}", self.name, self.value, self.limit)
    }
}

pub struct FigureOutput {
    pub artifact: Artifact,
    pub checks: Vec<Check>,
}

impl FigureOutput {
    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }
}

/// Which Δ of the LMG comparison to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeltaMode {
    /// Δ = χ_x χ_y, the supersymmetric point.
    Single,
    /// Δ = 2 χ_x χ_y.
    Double,
    #[default]
    Both,
}

impl DeltaMode {
    fn multipliers(self) -> Vec<f64> {
        match self {
            DeltaMode::Single => vec![1.0],
            DeltaMode::Double => vec![2.0],
            DeltaMode::Both => vec![1.0, 2.0],
        }
    }
}

impl FromStr for DeltaMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "1x" => Ok(DeltaMode::Single),
            "2x" => Ok(DeltaMode::Double),
            "both" => Ok(DeltaMode::Both),
            other => Err(format!("unknown delta mode `{other}` (1x, 2x, both)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureOptions {
    pub delta_mode: DeltaMode,
    /// Detunings of the sensitivity-vs-coupling figure, rad/ms.
    pub coupling_deltas: Vec<f64>,
    /// Detunings of the heating figure, rad/ms.
    pub heating_deltas: Vec<f64>,
    /// Force multipliers of f_min, paired with `heating_deltas`.
    pub multipliers: Vec<f64>,
    /// Time or sweep grid size; each figure has its own default.
    pub points: Option<usize>,
}

impl Default for FigureOptions {
    fn default() -> Self {
        FigureOptions {
            delta_mode: DeltaMode::Both,
            coupling_deltas: vec![0.14, 0.18, 0.25],
            heating_deltas: vec![1.4, 2.1, 3.0],
            multipliers: vec![1.05, 1.14, 1.14],
            points: None,
        }
    }
}

/// Runs figure `n` (1 to 5).
pub fn figure(n: u32, options: &FigureOptions) -> CliResult<FigureOutput> {
    match n {
        1 => figure1(options),
        2 => figure2(options),
        3 => figure3(options),
        4 => figure4(options),
        5 => figure5(options),
        other => Err(CliError::config("figure", format!("no figure {other}; choose 1 to 5"))),
    }
}

fn stem(n: u32) -> String {
    format!("fig{n}")
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn series(traj: &Trajectory, name: &str) -> CliResult<Vec<f64>> {
    traj.get(name)
        .map(<[f64]>::to_vec)
        .ok_or_else(|| CliError::Invariant(format!("missing series {name}")))
}

fn label(x: f64) -> String {
    format!("{x}")
}

pub fn fig1_params() -> ModelParams {
    ModelParams {
        spin_count: 8,
        g_x: 5.0,
        g_y: 3.0,
        delta_x: -85.0,
        delta_y: -80.0,
        f_dx: 10.0 * YOCTONEWTON,
        f_dy: 15.0 * YOCTONEWTON,
        ..Default::default()
    }
}

/// Fock cutoff per mode of the Jahn-Teller comparison.
pub const FIG1_CUTOFF: usize = 14;
pub const FIG1_WINDOW: f64 = 40.0;

/// ⟨J_z⟩ of the full model from |j, j⟩|0, 0⟩, with cutoff escalation.
fn fig1_full(p: &ModelParams, times: &[f64]) -> CliResult<Trajectory> {
    let start = p.layout(FIG1_CUTOFF, FIG1_CUTOFF)?;
    let (traj, _) = with_cutoff_escalation(&start, &CutoffPolicy::default(), |l| {
        let h = build_full(p, l)?;
        let s0 = QuantumState::basis(l, BasisIndex { spin: 0, fock: [0, 0] });
        let mut rec = Recorder::new(vec![Observable::new("Jz", collective_spin_op(l, SpinAxis::Z))])?;
        let method = propagate_unitary(&h, &s0, times, &UnitaryOptions::default(), |t, s| rec.observe(t, s))?;
        let edge = rec.max_edge_population();
        let meta = TrajectoryMeta {
            generator: format!("full/{method:?}").to_lowercase(),
            dim: l.total_dim(),
            fock_cutoffs: l.fock_cutoffs().to_vec(),
            tol: UnitaryOptions::default().tol,
            ..Default::default()
        };
        Ok((rec.finish(meta), edge))
    })?;
    Ok(traj)
}

fn fig1_lmg(p: &ModelParams, times: &[f64]) -> CliResult<Trajectory> {
    let l = SpaceLayout::spin_only(p.spin_count);
    let h = build_effective_lmg(p, &l)?.spin;
    let s0 = QuantumState::basis(&l, BasisIndex { spin: 0, fock: [0, 0] });
    let mut rec = Recorder::new(vec![Observable::new("Jz", collective_spin_op(&l, SpinAxis::Z))])?;
    let method = propagate_unitary(&h, &s0, times, &UnitaryOptions::default(), |t, s| rec.observe(t, s))?;
    Ok(rec.finish(TrajectoryMeta {
        generator: format!("lmg/{method:?}").to_lowercase(),
        dim: l.total_dim(),
        tol: UnitaryOptions::default().tol,
        ..Default::default()
    }))
}

fn figure1(options: &FigureOptions) -> CliResult<FigureOutput> {
    let times = linear_grid(0.0, FIG1_WINDOW, options.points.unwrap_or(161));
    let base = fig1_params();
    let w = derive_weak(&base)?;
    let j = base.spin_count as f64 / 2.0;
    let mut columns = vec![("t_ms".to_string(), times.clone())];
    let mut checks = Vec::new();
    let mut variants = Vec::new();
    for m in options.delta_mode.multipliers() {
        let p = ModelParams {
            big_delta: m * w.chi_x * w.chi_y,
            ..base.clone()
        };
        let full = fig1_full(&p, &times)?;
        let lmg = fig1_lmg(&p, &times)?;
        let (a, b) = (series(&full, "Jz")?, series(&lmg, "Jz")?);
        let tag = format!("delta{}x", label(m));
        checks.push(Check::at_most(format!("max |Jz_full - Jz_lmg| / j, {tag}"), max_abs_diff(&a, &b) / j, SPIN_TOL));
        columns.push((format!("Jz_full_{tag}"), a));
        columns.push((format!("Jz_lmg_{tag}"), b));
        variants.push(json!({
            "delta_multiplier": m,
            "params": p,
            "full": full.meta,
            "lmg": lmg.meta,
        }));
    }
    let mut meta = Map::new();
    meta.insert("figure".into(), json!(1));
    meta.insert(
        "description".into(),
        json!("<J_z>(t), full Jahn-Teller model vs LMG, N = 8, start |j,j>|0,0>, Delta = k chi_x chi_y"),
    );
    meta.insert("chi".into(), json!({"chi_x": w.chi_x, "chi_y": w.chi_y}));
    meta.insert("times".into(), json!({"start": 0.0, "end": FIG1_WINDOW, "points": times.len()}));
    meta.insert("variants".into(), json!(variants));
    meta.insert("tolerances".into(), json!({"spin_over_j": SPIN_TOL}));
    finish(1, Table::from_columns(columns)?, meta, checks)
}

pub fn fig2_spec(points: Option<usize>) -> ProtocolSpec {
    let p = ModelParams {
        spin_count: 6,
        g_x: 5.0,
        delta_x: 60.0,
        f_dx: 1.5 * YOCTONEWTON,
        ..Default::default()
    };
    let mut s = ProtocolSpec::new(ProtocolKind::WeakCss, p);
    s.initial_boson = BosonInit::Thermal(0.6);
    if let Some(points) = points {
        s.grid.points = points;
    }
    s
}

fn figure2(options: &FigureOptions) -> CliResult<FigureOutput> {
    let spec = fig2_spec(options.points);
    let report = run(&spec)?;
    let p = &spec.params;
    let j = p.spin_count as f64 / 2.0;
    let twist = WeakDerived::twist_rate(p)?;
    let omega = derive_weak(p)?.omega_f;
    let times = report.signal.times.clone();
    let full = series(&report.signal, "Jz")?;
    let analytic: Vec<f64> = times.iter().map(|t| oat_signal(j, spec.theta, twist * t, omega * t)).collect();
    let checks = vec![Check::at_most("max |Jz_full - Jz_oat| / j", max_abs_diff(&full, &analytic) / j, SPIN_TOL)];
    let mut meta = Map::new();
    meta.insert("figure".into(), json!(2));
    meta.insert(
        "description".into(),
        json!("<J_z>(t), full model from a thermal phonon state vs the one-axis twisting signal formula"),
    );
    meta.insert("spec".into(), json!(spec));
    meta.insert("twist_rate".into(), json!(twist));
    meta.insert("omega_f".into(), json!(omega));
    meta.insert("report".into(), report_summary(&report));
    meta.insert("tolerances".into(), json!({"spin_over_j": SPIN_TOL}));
    let table = Table::from_columns(vec![
        ("t_ms".into(), times),
        ("Jz_full_thermal".into(), full),
        ("Jz_oat_analytic".into(), analytic),
    ])?;
    finish(2, table, meta, checks)
}

pub fn fig3_spec(spin_count: usize, fidelity: ModelFidelity, points: Option<usize>) -> CliResult<ProtocolSpec> {
    let p = ModelParams {
        spin_count,
        g_x: 2.5,
        delta_x: 0.5,
        big_delta: 300.0,
        f_dx: 3.0 * YOCTONEWTON,
        ..Default::default()
    };
    let period = 2.0 * PI / derive_strong(&p)?.x.upsilon;
    let mut s = ProtocolSpec::new(ProtocolKind::StrongPhonon, p);
    s.model_fidelity = fidelity;
    s.grid.window_end = Some(2.0 * period);
    s.grid.points = points.unwrap_or(241);
    Ok(s)
}

fn figure3(options: &FigureOptions) -> CliResult<FigureOutput> {
    let mut columns = Vec::new();
    let mut checks = Vec::new();
    let mut runs = Vec::new();
    for n in 1..=3 {
        let full = run(&fig3_spec(n, ModelFidelity::Full, options.points)?)?;
        let sector = run(&fig3_spec(n, ModelFidelity::Effective, options.points)?)?;
        if columns.is_empty() {
            columns.push(("t_ms".to_string(), full.signal.times.clone()));
        }
        let (a, b) = (series(&full.signal, "n_x")?, series(&sector.signal, "n_x")?);
        let peak = b.iter().cloned().fold(0.0, f64::max);
        checks.push(Check::at_most(
            format!("max |n_full - n_effective| / peak, N={n}"),
            max_abs_diff(&a, &b) / peak,
            PHONON_TOL,
        ));
        columns.push((format!("n_x_full_N{n}"), a));
        columns.push((format!("n_x_effective_N{n}"), b));
        runs.push(json!({
            "spin_count": n,
            "full": report_summary(&full),
            "effective": report_summary(&sector),
        }));
    }
    let mut meta = Map::new();
    meta.insert("figure".into(), json!(3));
    meta.insert(
        "description".into(),
        json!("<n_x>(t) from |j,-j>|0>, full model vs the strong-coupling effective model, N = 1, 2, 3"),
    );
    meta.insert("runs".into(), json!(runs));
    meta.insert("tolerances".into(), json!({"phonon_over_peak": PHONON_TOL}));
    finish(3, Table::from_columns(columns)?, meta, checks)
}

/// Coupling grid of the sensitivity figure: 0.5 to 2.5 rad/ms.
pub fn fig4_couplings(points: Option<usize>) -> Vec<f64> {
    let n = points.unwrap_or(21).max(2);
    (0..n).map(|k| (5.0 * (n - 1 - k) as f64 + 25.0 * k as f64) / (10.0 * (n - 1) as f64)).collect()
}

pub fn fig4_template(delta: f64) -> ProtocolSpec {
    let p = ModelParams {
        spin_count: 1,
        delta_x: delta,
        big_delta: 270.0,
        // only the search result is plotted; the report runs at this force
        f_dx: 0.1 * YOCTONEWTON,
        ..Default::default()
    };
    let mut s = ProtocolSpec::new(ProtocolKind::StrongPhonon, p);
    s.model_fidelity = ModelFidelity::Effective;
    s.grid.points = 16;
    s
}

fn figure4(options: &FigureOptions) -> CliResult<FigureOutput> {
    let couplings = fig4_couplings(options.points);
    let search = SweepOptions {
        search_min_force: true,
        snr_target: 1.0,
    };
    let mut columns = vec![("g_x".to_string(), couplings.clone())];
    let mut checks = Vec::new();
    let mut runs = Vec::new();
    for &delta in &options.coupling_deltas {
        let template = fig4_template(delta);
        let points = sweep(SweepAxis::GX, &couplings, &template, &search)?;
        let (mut numeric, mut analytic, mut times, mut failures) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let mut worst: f64 = 0.0;
        for pt in &points {
            let spec = SweepAxis::GX.apply(&template, pt.value)?;
            let closed = spec.readout_time().and_then(|t| min_force_strong(&spec.params, t));
            match (&pt.outcome, closed) {
                (Ok(SensingReport { min_force: Some(q), .. }), Ok(a)) => {
                    worst = worst.max((q.force / a.force - 1.0).abs());
                    numeric.push(q.value);
                    analytic.push(a.value);
                    times.push(q.achieved_at_time);
                }
                (outcome, closed) => {
                    let why = match (outcome, &closed) {
                        (Err(e), _) | (_, Err(e)) => e.to_string(),
                        _ => "no search result".into(),
                    };
                    failures.push(json!({"g_x": pt.value, "error": why}));
                    worst = f64::INFINITY;
                    numeric.push(f64::NAN);
                    analytic.push(f64::NAN);
                    times.push(f64::NAN);
                }
            }
        }
        let tag = format!("delta{}", label(delta));
        checks.push(Check::at_most(format!("max |f_numeric / f_analytic - 1|, {tag}"), worst, FMIN_TOL));
        columns.push((format!("sensitivity_numeric_{tag}"), numeric));
        columns.push((format!("sensitivity_analytic_{tag}"), analytic));
        columns.push((format!("t_ms_{tag}"), times));
        runs.push(json!({"delta_x": delta, "template": template, "failures": failures}));
    }
    let mut meta = Map::new();
    meta.insert("figure".into(), json!(4));
    meta.insert(
        "description".into(),
        json!("force sensitivity f_min sqrt(t) in N/sqrt(Hz) at t = pi/upsilon vs g_x; SNR = 1 search vs closed form"),
    );
    meta.insert("g_x".into(), json!(couplings));
    meta.insert("search".into(), json!(search));
    meta.insert("runs".into(), json!(runs));
    meta.insert("tolerances".into(), json!({"fmin_relative": FMIN_TOL, "search_log_width": 1e-4}));
    finish(4, Table::from_columns(columns)?, meta, checks)
}

/// Heating grid of the SNR figure: 0 to 0.1 per ms.
pub fn fig5_heating(points: Option<usize>) -> Vec<f64> {
    let n = points.unwrap_or(21).max(2);
    (0..n).map(|k| k as f64 / (10.0 * (n - 1) as f64)).collect()
}

/// Strong-protocol template at detuning `delta` with the force set to
/// `multiplier` times the closed-form minimal force; the window ends at the
/// readout.
pub fn fig5_template(delta: f64, multiplier: f64) -> CliResult<ProtocolSpec> {
    let mut p = ModelParams {
        spin_count: 1,
        g_x: 25.0,
        delta_x: delta,
        big_delta: 2700.0,
        ..Default::default()
    };
    let t = derive_strong(&p)?.x.optimal_time();
    p.f_dx = multiplier * min_force_strong(&p, t)?.force;
    let mut s = ProtocolSpec::new(ProtocolKind::StrongPhonon, p);
    s.model_fidelity = ModelFidelity::Effective;
    s.noise = Some(NoiseParams::from_heating_rate(0.0, NoiseParams::DEFAULT_NBAR)?);
    s.grid.window_end = Some(t);
    s.grid.points = 2;
    Ok(s)
}

/// Heating rate at which degradation and quotes are compared.
pub const FIG5_REFERENCE_RATE: f64 = 0.05;

fn snr_of(point: &SweepPoint) -> f64 {
    match &point.outcome {
        Ok(r) => r.snr.unwrap_or(f64::NAN),
        Err(_) => f64::NAN,
    }
}

fn figure5(options: &FigureOptions) -> CliResult<FigureOutput> {
    let deltas = &options.heating_deltas;
    if options.multipliers.len() != deltas.len() {
        return Err(CliError::config(
            "--multipliers",
            format!("{} multipliers for {} detunings", options.multipliers.len(), deltas.len()),
        ));
    }
    let rates = fig5_heating(options.points);
    let mut columns = vec![("heating_rate_per_ms".to_string(), rates.clone())];
    let mut checks = Vec::new();
    let mut runs = Vec::new();
    let mut degradation = Vec::new();
    let none = SweepOptions::default();
    for (&delta, &mult) in deltas.iter().zip(&options.multipliers) {
        let template = fig5_template(delta, mult)?;
        let points = sweep(SweepAxis::HeatingRate, &rates, &template, &none)?;
        let snr: Vec<f64> = points.iter().map(snr_of).collect();
        let failures: Vec<Value> = points
            .iter()
            .filter_map(|p| p.outcome.as_ref().err().map(|e| json!({"heating_rate": p.value, "error": e.to_string()})))
            .collect();
        let tag = format!("delta{}", label(delta));
        // smallest drop between neighbours; positive when strictly decreasing
        let drop = if snr.iter().any(|v| v.is_nan()) {
            f64::NEG_INFINITY
        } else {
            snr.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min)
        };
        checks.push(Check::at_least(format!("min SNR drop between heating steps, {tag}"), drop, f64::MIN_POSITIVE));

        // n̄ split regression at the reference rate
        let reference = |nbar: f64| -> CliResult<f64> {
            let mut s = template.clone();
            s.noise = Some(NoiseParams::from_heating_rate(FIG5_REFERENCE_RATE, nbar)?);
            Ok(run(&s)?.snr.unwrap_or(f64::NAN))
        };
        let (s20, s40) = (reference(NoiseParams::DEFAULT_NBAR)?, reference(2.0 * NoiseParams::DEFAULT_NBAR)?);
        let clean = snr[0];
        degradation.push((delta, 1.0 - s20 / clean));
        checks.push(Check::at_most(format!("|SNR(nbar=40) / SNR(nbar=20) - 1|, {tag}"), (s40 / s20 - 1.0).abs(), NBAR_SPLIT_TOL));
        runs.push(json!({
            "delta_x": delta,
            "force_multiplier": mult,
            "template": template,
            "snr_at_reference_rate": {"nbar_20": s20, "nbar_40": s40},
            "failures": failures,
        }));
        columns.push((format!("snr_{tag}"), snr));
    }
    // larger detuning, smaller degradation
    let mut sorted = degradation.clone();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let margin = sorted.windows(2).map(|w| w[0].1 - w[1].1).fold(f64::INFINITY, f64::min);
    if sorted.len() > 1 {
        checks.push(Check::at_least(
            format!("degradation margin between neighbouring detunings at {FIG5_REFERENCE_RATE}/ms"),
            margin,
            f64::MIN_POSITIVE,
        ));
    }

    // sensitivity quotes at the reference heating rate
    let quote_template = {
        let mut s = fig5_template(deltas.first().copied().unwrap_or(2.1), 1.0)?;
        s.noise = Some(NoiseParams::from_heating_rate(FIG5_REFERENCE_RATE, NoiseParams::DEFAULT_NBAR)?);
        // the readout moves with the detuning
        s.grid.window_end = None;
        s
    };
    let search = SweepOptions {
        search_min_force: true,
        snr_target: 1.0,
    };
    let quotes: Vec<Value> = sweep(SweepAxis::DeltaX, deltas, &quote_template, &search)?
        .iter()
        .map(|p| match &p.outcome {
            Ok(SensingReport { min_force: Some(q), .. }) => json!({"delta_x": p.value, "quote": q}),
            Ok(_) => json!({"delta_x": p.value, "error": "no search result"}),
            Err(e) => json!({"delta_x": p.value, "error": e.to_string()}),
        })
        .collect();

    let mut meta = Map::new();
    meta.insert("figure".into(), json!(5));
    meta.insert(
        "description".into(),
        json!("SNR at t = pi/upsilon vs heating rate (Lindblad), force = multiplier * f_min, nbar_res = 20"),
    );
    meta.insert("heating_rate_per_ms".into(), json!(rates));
    meta.insert("runs".into(), json!(runs));
    meta.insert("degradation_at_reference_rate".into(), json!(degradation));
    meta.insert("quotes_at_reference_rate".into(), json!(quotes));
    meta.insert("reference_rate_per_ms".into(), json!(FIG5_REFERENCE_RATE));
    meta.insert("tolerances".into(), json!({"nbar_split": NBAR_SPLIT_TOL, "search_log_width": 1e-4}));
    finish(5, Table::from_columns(columns)?, meta, checks)
}

/// The report without its time series.
pub fn report_summary(r: &SensingReport) -> Value {
    json!({
        "spec": r.spec,
        "generator": r.signal.meta,
        "readout": r.readout,
        "snr": r.snr,
        "sensitivity": r.sensitivity,
        "min_force": r.min_force,
        "warnings": r.warnings,
    })
}

fn finish(n: u32, table: Table, mut meta: Map<String, Value>, checks: Vec<Check>) -> CliResult<FigureOutput> {
    meta.insert("checks".into(), json!(checks));
    Ok(FigureOutput {
        artifact: Artifact::new(stem(n), table, meta),
        checks,
    })
}
