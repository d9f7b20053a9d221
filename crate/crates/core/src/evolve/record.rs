use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{expectation, fock_edge_projector, Mode, OperatorMatrix, QuantumState};

/// Largest imaginary part tolerated before a Hermitian expectation is cast
/// to a real number.
pub const IMAG_TOL: f64 = 1e-8;

/// Named observable, optionally with its variance recorded.
#[derive(Debug, Clone)]
pub struct Observable {
    pub name: String,
    pub op: OperatorMatrix,
    squared: Option<OperatorMatrix>,
}

impl Observable {
    pub fn new(name: impl Into<String>, op: OperatorMatrix) -> Self {
        Observable {
            name: name.into(),
            op,
            squared: None,
        }
    }

    /// Also records ⟨A²⟩ - ⟨A⟩² under the name `var(<name>)`.
    pub fn with_variance(mut self) -> Self {
        self.squared = Some(&self.op * &self.op);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    /// Free-form description of the generator (model, method).
    pub generator: String,
    pub dim: usize,
    pub fock_cutoffs: Vec<usize>,
    pub tol: f64,
    /// Largest population of the two highest Fock levels, per mode.
    pub max_edge_population: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub series: Vec<Series>,
    pub meta: TrajectoryMeta,
}

impl Trajectory {
    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.series.iter().find(|s| s.name == name).map(|s| s.values.as_slice())
    }

    pub fn variance(&self, name: &str) -> Option<&[f64]> {
        self.get(&variance_name(name))
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

pub fn variance_name(name: &str) -> String {
    format!("var({name})")
}

fn real_expectation(state: &QuantumState, op: &OperatorMatrix, name: &str) -> Result<f64> {
    let v = expectation(state, op)?;
    if v.im.abs() > IMAG_TOL * v.re.abs().max(1.0) {
        return Err(Error::Numeric(format!("⟨{name}⟩ has imaginary part {:e}", v.im)));
    }
    Ok(v.re)
}

/// Streaming recorder; feed it from a propagator callback.
#[derive(Debug, Clone)]
pub struct Recorder {
    observables: Vec<Observable>,
    edges: Vec<(Mode, OperatorMatrix)>,
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    variances: Vec<Vec<f64>>,
    max_edge: [f64; 2],
}

impl Recorder {
    /// Edge populations of every mode in the observables' layout are
    /// tracked for cutoff escalation.
    pub fn new(observables: Vec<Observable>) -> Result<Self> {
        let mut edges = Vec::new();
        if let Some(first) = observables.first() {
            let layout = first.op.layout();
            for o in &observables[1..] {
                layout.check_same(o.op.layout())?;
            }
            for mode in [Mode::X, Mode::Y] {
                if layout.has_mode(mode) {
                    edges.push((mode, fock_edge_projector(layout, mode, 2)?));
                }
            }
        }
        let n = observables.len();
        Ok(Recorder {
            observables,
            edges,
            times: Vec::new(),
            values: vec![Vec::new(); n],
            variances: vec![Vec::new(); n],
            max_edge: [0.0; 2],
        })
    }

    pub fn observe(&mut self, t: f64, state: &QuantumState) -> Result<()> {
        self.times.push(t);
        for (k, o) in self.observables.iter().enumerate() {
            let mean = real_expectation(state, &o.op, &o.name)?;
            self.values[k].push(mean);
            if let Some(sq) = &o.squared {
                let second = real_expectation(state, sq, &o.name)?;
                self.variances[k].push((second - mean * mean).max(0.0));
            }
        }
        for (mode, proj) in &self.edges {
            let p = real_expectation(state, proj, "edge")?;
            let slot = mode.slot();
            self.max_edge[slot] = self.max_edge[slot].max(p);
        }
        Ok(())
    }

    pub fn max_edge_population(&self) -> [f64; 2] {
        self.max_edge
    }

    pub fn finish(self, mut meta: TrajectoryMeta) -> Trajectory {
        meta.max_edge_population = self.max_edge;
        let mut series = Vec::new();
        for ((o, values), var) in self.observables.into_iter().zip(self.values).zip(self.variances) {
            let with_var = o.squared.is_some();
            series.push(Series { name: o.name.clone(), values });
            if with_var {
                series.push(Series {
                    name: variance_name(&o.name),
                    values: var,
                });
            }
        }
        Trajectory {
            times: self.times,
            series,
            meta,
        }
    }
}

/// Records observables over an already computed state sequence.
pub fn record(times: &[f64], states: &[QuantumState], observables: Vec<Observable>) -> Result<Trajectory> {
    if times.len() != states.len() {
        return Err(Error::LayoutMismatch {
            expected: times.len(),
            found: states.len(),
        });
    }
    let mut rec = Recorder::new(observables)?;
    for (t, s) in times.iter().zip(states) {
        rec.observe(*t, s)?;
    }
    let meta = TrajectoryMeta {
        dim: states.first().map_or(0, |s| s.layout().total_dim()),
        fock_cutoffs: states.first().map_or(Vec::new(), |s| s.layout().fock_cutoffs().to_vec()),
        ..Default::default()
    };
    Ok(rec.finish(meta))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{evolve_unitary, linear_grid, UnitaryOptions};
    use crate::models::{build_oat, ModelParams};
    use crate::quantum::{coherent_spin_state, collective_spin_op, SpaceLayout, SpinAxis};
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn identity_series_is_one() {
        let l = SpaceLayout::new(2, &[3]).unwrap();
        let s = coherent_spin_state(&l, 0.4).unwrap();
        let times = [0.0, 1.0];
        let traj = record(&times, &[s.clone(), s], vec![Observable::new("id", OperatorMatrix::identity(&l))]).unwrap();
        for v in traj.get("id").unwrap() {
            assert!((v - 1.0).abs() < 1e-12);
        }
        assert_eq!(traj.meta.dim, 12);
    }

    #[test]
    fn css_variance_without_twisting() {
        // θ = π/2 points along z: ⟨J_z⟩ = j and the transverse ⟨ΔJ_x²⟩ = j/2
        for n in [2usize, 5] {
            let l = SpaceLayout::spin_only(n);
            let p = ModelParams {
                spin_count: n,
                g_x: 0.0,
                delta_x: 1.0,
                ..Default::default()
            };
            let h = build_oat(&p, &l).unwrap();
            let psi = coherent_spin_state(&l, FRAC_PI_2).unwrap();
            let times = linear_grid(0.0, 2.0, 3);
            let states = evolve_unitary(&h, &psi, &times, &UnitaryOptions::default()).unwrap();
            let jz = Observable::new("Jz", collective_spin_op(&l, SpinAxis::Z)).with_variance();
            let jx = Observable::new("Jx", collective_spin_op(&l, SpinAxis::X)).with_variance();
            let traj = record(&times, &states, vec![jz, jx]).unwrap();
            for v in traj.variance("Jx").unwrap() {
                assert!((v - n as f64 / 4.0).abs() < 1e-10);
            }
            for v in traj.get("Jz").unwrap() {
                assert!((v - n as f64 / 2.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_mismatched_lengths() {
        let l = SpaceLayout::spin_only(1);
        let s = coherent_spin_state(&l, 0.4).unwrap();
        assert!(record(&[0.0, 1.0], &[s], vec![]).is_err());
    }
}
