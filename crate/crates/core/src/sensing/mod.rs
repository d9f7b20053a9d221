//! End-to-end sensing protocols: prepare, evolve, measure, estimate.
//!
//! Every driver takes a [`ProtocolSpec`], propagates the chosen model on a
//! uniform time grid that contains the readout time exactly, and inverts
//! the recorded signal into a force estimate with its projection-noise
//! uncertainty.

mod ghz;
mod strong;
mod sweep;
mod weak;

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analytic::{Protocol, SensitivityQuote};
use crate::error::{Error, Result};
use crate::evolve::{
    linear_grid, propagate_lindblad, propagate_unitary, with_cutoff_escalation, CutoffPolicy, LindbladOptions,
    NoiseParams, Observable, Recorder, Trajectory, TrajectoryMeta, UnitaryOptions,
};
use crate::models::{derive_strong, ModelParams, WeakDerived};
use crate::quantum::{thermal_cutoff, BosonInit, Mode, OperatorMatrix, QuantumState, SpaceLayout};

pub use ghz::run_ghz_parity;
pub use strong::{run_strong_phonon, search_min_force, snr_at_readout};
pub use sweep::{sweep, sweep_with_progress, SweepAxis, SweepOptions, SweepPoint, THREADS_ENV};
pub use weak::run_weak_css;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    WeakCss,
    GhzParity,
    StrongPhonon,
}

impl ProtocolKind {
    pub fn label(self) -> &'static str {
        self.protocol().label()
    }

    pub fn protocol(self) -> Protocol {
        match self {
            ProtocolKind::WeakCss => Protocol::WeakCss,
            ProtocolKind::GhzParity => Protocol::GhzParity,
            ProtocolKind::StrongPhonon => Protocol::StrongPhonon,
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weak_css" => Ok(ProtocolKind::WeakCss),
            "ghz_parity" => Ok(ProtocolKind::GhzParity),
            "strong_phonon" => Ok(ProtocolKind::StrongPhonon),
            other => Err(Error::param(
                "protocol",
                format!("unknown protocol `{other}` (weak_css, ghz_parity, strong_phonon)"),
            )),
        }
    }
}

/// Which Hamiltonian drives a simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFidelity {
    /// The full spin-boson model.
    #[default]
    Full,
    /// One-axis twisting (weak protocols) or the lowest-spin-sector boson
    /// model (strong protocol).
    Effective,
}

impl ModelFidelity {
    pub fn label(self) -> &'static str {
        match self {
            ModelFidelity::Full => "full",
            ModelFidelity::Effective => "effective",
        }
    }
}

impl FromStr for ModelFidelity {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(ModelFidelity::Full),
            "effective" => Ok(ModelFidelity::Effective),
            other => Err(Error::param("model", format!("unknown model `{other}` (full, effective)"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub points: usize,
    /// End of the recorded window, ms. Defaults to twice the readout time.
    pub window_end: Option<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            points: 400,
            window_end: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Numerics {
    pub tol: f64,
    /// Starting Fock cutoff; estimated from the parameters when absent.
    pub cutoff: Option<usize>,
    pub cutoff_policy: CutoffPolicy,
}

impl Default for Numerics {
    fn default() -> Self {
        Numerics {
            tol: 1e-8,
            cutoff: None,
            cutoff_policy: CutoffPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub kind: ProtocolKind,
    pub params: ModelParams,
    /// Heating of mode x; switches the propagation to the master equation.
    pub noise: Option<NoiseParams>,
    /// Readout time t, ms. Defaults to 2π/|χ²| for the weak protocols and
    /// π/υ_x for the strong one.
    pub evolve_time: Option<f64>,
    /// Total measurement time T ≥ t, ms. Defaults to t (one repetition).
    pub total_time: Option<f64>,
    /// Initial state of every phonon mode.
    pub initial_boson: BosonInit,
    pub model_fidelity: ModelFidelity,
    /// Polar angle of the initial coherent spin state (weak protocol).
    pub theta: f64,
    pub grid: Grid,
    pub numerics: Numerics,
}

impl ProtocolSpec {
    pub fn new(kind: ProtocolKind, params: ModelParams) -> Self {
        ProtocolSpec {
            kind,
            params,
            noise: None,
            evolve_time: None,
            total_time: None,
            initial_boson: BosonInit::Vacuum,
            model_fidelity: ModelFidelity::Full,
            theta: FRAC_PI_2,
            grid: Grid::default(),
            numerics: Numerics::default(),
        }
    }

    pub fn readout_time(&self) -> Result<f64> {
        if let Some(t) = self.evolve_time {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::param("evolve_time", format!("must be positive, got {t}")));
            }
            return Ok(t);
        }
        match self.kind {
            ProtocolKind::WeakCss | ProtocolKind::GhzParity => {
                let twist = WeakDerived::twist_rate(&self.params)?;
                if twist == 0.0 {
                    return Err(Error::param("evolve_time", "no twisting (g_x = 0); give the readout time"));
                }
                Ok(2.0 * PI / twist.abs())
            }
            ProtocolKind::StrongPhonon => Ok(derive_strong(&self.params)?.x.optimal_time()),
        }
    }

    /// ν = T / t.
    pub fn repetitions(&self) -> Result<f64> {
        let t = self.readout_time()?;
        let total = self.total_time.unwrap_or(t);
        if !total.is_finite() || total < t * (1.0 - 1e-12) {
            return Err(Error::param("total_time", format!("T = {total} ms is shorter than t = {t} ms")));
        }
        Ok((total / t).max(1.0))
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(0.0..=PI).contains(&self.theta) {
            return Err(Error::param("theta", format!("must lie in [0, π], got {}", self.theta)));
        }
        if let Some(noise) = &self.noise {
            noise.validate()?;
        }
        if let BosonInit::Thermal(nbar) = self.initial_boson {
            if !(nbar.is_finite() && nbar >= 0.0) {
                return Err(Error::param("nbar", format!("must be >= 0, got {nbar}")));
            }
        }
        if self.grid.points < 2 {
            return Err(Error::param("points", "grid needs at least two points"));
        }
        if !(self.numerics.tol > 0.0) {
            return Err(Error::param("tol", "must be positive"));
        }
        if self.numerics.cutoff == Some(0) {
            return Err(Error::param("cutoff", "must be at least 1"));
        }
        let t = self.readout_time()?;
        self.repetitions()?;
        if let Some(end) = self.grid.window_end {
            if !(end.is_finite() && end >= t) {
                return Err(Error::param("window_end", format!("window end {end} ms precedes the readout at {t} ms")));
            }
        }
        Ok(())
    }

    fn has_heating(&self) -> bool {
        self.noise.is_some_and(|n| n.gamma_dec > 0.0)
    }

    /// Uniform grid over the window with the point nearest `t_r` moved onto
    /// it; returns the grid and the readout index.
    fn time_grid(&self, t_r: f64) -> Result<(Vec<f64>, usize)> {
        let end = self.grid.window_end.unwrap_or(2.0 * t_r);
        let mut times = linear_grid(0.0, end, self.grid.points);
        let k = times
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t_r).abs().total_cmp(&(b.1 - t_r).abs()))
            .map(|(k, _)| k)
            .ok_or_else(|| Error::param("points", "empty grid"))?;
        times[k] = t_r;
        Ok((times, k))
    }

    fn expect(&self, kind: ProtocolKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::param(
                "protocol",
                format!("{} driver called with a {} spec", kind.label(), self.kind.label()),
            ));
        }
        self.validate()
    }
}

/// A value with its 1σ uncertainty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub uncertainty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Readout {
    /// ms.
    pub time: f64,
    pub repetitions: f64,
    /// Estimated Ω_f in rad/ms (weak protocols only).
    pub omega_f: Option<Estimate>,
    /// Estimated force along x, N.
    pub force: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingReport {
    pub spec: ProtocolSpec,
    pub signal: Trajectory,
    pub readout: Readout,
    /// Mean over spread of the phonon number at the readout (strong only).
    pub snr: Option<f64>,
    /// Force uncertainty scaled to N/√Hz, δf √T.
    pub sensitivity: SensitivityQuote,
    /// Set when a minimal-force search ran.
    pub min_force: Option<SensitivityQuote>,
    pub warnings: Vec<String>,
}

/// Dispatches on the protocol kind.
pub fn run(spec: &ProtocolSpec) -> Result<SensingReport> {
    match spec.kind {
        ProtocolKind::WeakCss => run_weak_css(spec),
        ProtocolKind::GhzParity => run_ghz_parity(spec),
        ProtocolKind::StrongPhonon => run_strong_phonon(spec),
    }
}

/// Sensitivity quote from a force uncertainty after ν repetitions.
fn quote_from_uncertainty(df: f64, t_r: f64, nu: f64, kind: ProtocolKind) -> SensitivityQuote {
    // δf √T = δf_single √t
    SensitivityQuote::from_force(df * nu.sqrt(), t_r, kind.protocol())
}

/// Cutoff that holds the thermal start plus `mean` extra phonons.
fn start_cutoff(spec: &ProtocolSpec, mean: f64) -> usize {
    if let Some(c) = spec.numerics.cutoff {
        return c;
    }
    let thermal = match spec.initial_boson {
        BosonInit::Vacuum => 0,
        BosonInit::Thermal(nbar) => thermal_cutoff(nbar, 1e-8),
    };
    let heating = spec.noise.map_or(0.0, |n| n.heating_rate() * spec.readout_time().unwrap_or(0.0));
    let m = mean.max(0.0) + heating;
    thermal + (m + 6.0 * (m + 1.0).sqrt()).ceil() as usize + 6
}

fn boson_inits(spec: &ProtocolSpec, layout: &SpaceLayout) -> Vec<BosonInit> {
    vec![spec.initial_boson; layout.mode_count()]
}

/// Propagates with cutoff escalation and records `observables`.
fn simulate(
    spec: &ProtocolSpec,
    model: &str,
    start: &SpaceLayout,
    times: &[f64],
    hamiltonian: impl Fn(&SpaceLayout) -> Result<OperatorMatrix>,
    initial: impl Fn(&SpaceLayout) -> Result<QuantumState>,
    observables: impl Fn(&SpaceLayout) -> Result<Vec<Observable>>,
) -> Result<Trajectory> {
    let (traj, layout) = with_cutoff_escalation(start, &spec.numerics.cutoff_policy, |layout| {
        let h = hamiltonian(layout)?;
        let state0 = initial(layout)?;
        let mut rec = Recorder::new(observables(layout)?)?;
        let method = match spec.noise {
            Some(noise) if spec.has_heating() => {
                if !layout.has_mode(Mode::X) {
                    return Err(Error::param("noise", format!("the {model} model has no phonon mode to heat")));
                }
                let opts = LindbladOptions {
                    tol: spec.numerics.tol,
                    ..Default::default()
                };
                let stats = propagate_lindblad(&h, Mode::X, &noise, &state0, times, &opts, |t, s| rec.observe(t, s))?;
                log::debug!("lindblad: {} steps, {} rejected", stats.accepted, stats.rejected);
                "lindblad".to_string()
            }
            _ => {
                let opts = UnitaryOptions {
                    tol: spec.numerics.tol,
                    ..Default::default()
                };
                let m = propagate_unitary(&h, &state0, times, &opts, |t, s| rec.observe(t, s))?;
                format!("{m:?}").to_lowercase()
            }
        };
        let edge = rec.max_edge_population();
        let meta = TrajectoryMeta {
            generator: format!("{model}/{method}"),
            dim: layout.total_dim(),
            fock_cutoffs: layout.fock_cutoffs().to_vec(),
            tol: spec.numerics.tol,
            ..Default::default()
        };
        Ok((rec.finish(meta), edge))
    })?;
    log::debug!("{model}: final layout {:?}", layout.fock_cutoffs());
    Ok(traj)
}

/// Largest mean phonon number the full weak model reaches in mode x and y:
/// each J_x eigenvalue displaces the mode by up to twice its static shift.
fn weak_displacement_phonons(p: &ModelParams) -> [f64; 2] {
    let n = p.spin_count as f64;
    let j = n / 2.0;
    let shift = |g: f64, force: f64, delta: f64| {
        if delta == 0.0 {
            return 0.0;
        }
        let a = (2.0 * g.abs() / n.sqrt() * j + n.sqrt() * force.abs()) / delta.abs();
        4.0 * a * a
    };
    [
        shift(p.g_x, p.force_rate_x(), p.delta_x),
        shift(p.g_y, p.force_rate_y(), p.delta_y),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for k in [ProtocolKind::WeakCss, ProtocolKind::GhzParity, ProtocolKind::StrongPhonon] {
            assert_eq!(k.label().parse::<ProtocolKind>().unwrap(), k);
        }
        assert!("css".parse::<ProtocolKind>().is_err());
        assert_eq!("effective".parse::<ModelFidelity>().unwrap(), ModelFidelity::Effective);
    }

    #[test]
    fn grid_contains_readout_exactly() {
        let p = ModelParams {
            spin_count: 2,
            g_x: 5.0,
            delta_x: 60.0,
            ..Default::default()
        };
        let spec = ProtocolSpec::new(ProtocolKind::WeakCss, p);
        let t = spec.readout_time().unwrap();
        let (times, k) = spec.time_grid(t).unwrap();
        assert_eq!(times[k], t);
        assert!(times.windows(2).all(|w| w[1] > w[0]));
        assert_eq!(times.len(), 400);
    }

    #[test]
    fn repetitions_follow_total_time() {
        let p = ModelParams {
            spin_count: 2,
            g_x: 5.0,
            delta_x: 60.0,
            ..Default::default()
        };
        let mut spec = ProtocolSpec::new(ProtocolKind::WeakCss, p);
        spec.evolve_time = Some(2.0);
        assert_eq!(spec.repetitions().unwrap(), 1.0);
        spec.total_time = Some(10.0);
        assert_eq!(spec.repetitions().unwrap(), 5.0);
        spec.total_time = Some(1.0);
        assert!(spec.validate().is_err());
    }
}
