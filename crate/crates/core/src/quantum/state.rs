use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::layout::{BasisIndex, Mode, SpaceLayout};
use super::linalg::{hermitian_eigenvalues, x_eigenbasis};
use super::operator::OperatorMatrix;
use crate::error::{Error, Result};

pub const NORM_TOL: f64 = 1e-9;
pub const HERMITIAN_STATE_TOL: f64 = 1e-12;
pub const POSITIVITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub enum StateRepr {
    Pure(DVector<Complex64>),
    Mixed(DMatrix<Complex64>),
}

/// Pure state vector or density matrix on a [`SpaceLayout`].
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    layout: SpaceLayout,
    repr: StateRepr,
}

/// Initial state of one boson mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "nbar")]
pub enum BosonInit {
    Vacuum,
    Thermal(f64),
}

/// Thermal occupation probabilities p_n = nbar^n / (1 + nbar)^(n + 1) for
/// n = 0..=cutoff, renormalized after truncation.
pub fn thermal_populations(cutoff: usize, nbar: f64) -> Result<Vec<f64>> {
    if !(nbar >= 0.0 && nbar.is_finite()) {
        return Err(Error::param("nbar", format!("mean occupation must be >= 0, got {nbar}")));
    }
    let mut p: Vec<f64> = if nbar == 0.0 {
        (0..=cutoff).map(|n| if n == 0 { 1.0 } else { 0.0 }).collect()
    } else {
        let ratio = nbar / (1.0 + nbar);
        (0..=cutoff)
            .map(|n| ratio.powi(n as i32) / (1.0 + nbar))
            .collect()
    };
    let total: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= total);
    Ok(p)
}

/// Smallest cutoff whose truncated thermal tail weight is below `tail`.
pub fn thermal_cutoff(nbar: f64, tail: f64) -> usize {
    if nbar <= 0.0 {
        return 1;
    }
    // Tail weight beyond cutoff c is (nbar / (1 + nbar))^(c + 1).
    let ratio = nbar / (1.0 + nbar);
    let c = (tail.ln() / ratio.ln()).ceil() - 1.0;
    (c.max(1.0)) as usize
}

/// Reduced Wigner amplitudes d_m for m = j - s, s = 0..=N.
pub fn wigner_amplitudes(spin_count: usize, theta: f64) -> Vec<f64> {
    let n = spin_count as i32;
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    // sqrt(binomial(2j, j+m)) cos^(j+m) sin^(j-m), with j+m = N - s.
    (0..=spin_count)
        .map(|k| {
            let up = n - k as i32;
            let ln_binom = ln_factorial(spin_count) - ln_factorial(up as usize) - ln_factorial(k);
            (0.5 * ln_binom).exp() * c.powi(up) * s.powi(k as i32)
        })
        .collect()
}

fn ln_factorial(n: usize) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Spin-factor amplitudes of Σ_m d_m |j, m⟩_x.
pub fn coherent_spin_amplitudes(spin_count: usize, theta: f64) -> DVector<Complex64> {
    let d = wigner_amplitudes(spin_count, theta);
    let basis = x_eigenbasis(spin_count);
    DVector::from_fn(spin_count + 1, |r, _| {
        d.iter()
            .enumerate()
            .map(|(s, &dm)| basis[(r, s)] * dm)
            .sum()
    })
}

/// Spin-factor amplitudes of (|j, j⟩_x + |j, -j⟩_x) / √2.
pub fn ghz_amplitudes(spin_count: usize) -> Result<DVector<Complex64>> {
    if spin_count == 0 {
        return Err(Error::param("spin_count", "GHZ state needs at least one spin"));
    }
    let basis = x_eigenbasis(spin_count);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    Ok((basis.column(0) + basis.column(spin_count)) * Complex64::new(h, 0.0))
}

/// Spin-factor amplitudes of |j, m⟩_z at spin index s = j - m.
pub fn dicke_amplitudes(spin_count: usize, s: usize) -> DVector<Complex64> {
    DVector::from_fn(spin_count + 1, |r, _| {
        if r == s {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::default()
        }
    })
}

impl QuantumState {
    pub fn pure(layout: &SpaceLayout, amplitudes: DVector<Complex64>) -> Result<Self> {
        let state = QuantumState {
            layout: layout.clone(),
            repr: StateRepr::Pure(amplitudes),
        };
        state.validate()?;
        Ok(state)
    }

    pub fn mixed(layout: &SpaceLayout, rho: DMatrix<Complex64>) -> Result<Self> {
        let state = QuantumState {
            layout: layout.clone(),
            repr: StateRepr::Mixed(rho),
        };
        state.validate()?;
        Ok(state)
    }

    /// Skips the eigenvalue check; used inside propagators where the
    /// invariants are tracked separately.
    pub(crate) fn from_repr_unchecked(layout: &SpaceLayout, repr: StateRepr) -> Self {
        QuantumState {
            layout: layout.clone(),
            repr,
        }
    }

    pub fn basis(layout: &SpaceLayout, at: BasisIndex) -> Self {
        let dim = layout.total_dim();
        let idx = layout.index(at);
        QuantumState {
            layout: layout.clone(),
            repr: StateRepr::Pure(DVector::from_fn(dim, |r, _| {
                if r == idx {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::default()
                }
            })),
        }
    }

    /// spin ⊗ mode_x ⊗ mode_y product state. Pure unless some mode is
    /// thermal with nbar > 0.
    pub fn product(layout: &SpaceLayout, spin: &DVector<Complex64>, bosons: &[BosonInit]) -> Result<Self> {
        if spin.len() != layout.spin_dim() {
            return Err(Error::LayoutMismatch {
                expected: layout.spin_dim(),
                found: spin.len(),
            });
        }
        if bosons.len() != layout.mode_count() {
            return Err(Error::Layout(format!(
                "{} boson initial states given for {} modes",
                bosons.len(),
                layout.mode_count()
            )));
        }
        let mut pops: [Vec<f64>; 2] = [vec![1.0], vec![1.0]];
        for (slot, init) in bosons.iter().enumerate() {
            let cutoff = layout.fock_cutoffs()[slot];
            pops[slot] = match *init {
                BosonInit::Vacuum => thermal_populations(cutoff, 0.0)?,
                BosonInit::Thermal(nbar) => thermal_populations(cutoff, nbar)?,
            };
        }
        let dim = layout.total_dim();
        let is_pure = pops.iter().all(|p| p[0] == 1.0);
        if is_pure {
            let amps = DVector::from_fn(dim, |r, _| {
                let at = layout.decompose(r);
                if at.fock == [0, 0] {
                    spin[at.spin]
                } else {
                    Complex64::default()
                }
            });
            return QuantumState::pure(layout, amps);
        }
        let rho = DMatrix::from_fn(dim, dim, |r, c| {
            let (a, b) = (layout.decompose(r), layout.decompose(c));
            if a.fock != b.fock {
                return Complex64::default();
            }
            let w = pops[0][a.fock[0]] * pops[1][a.fock[1]];
            spin[a.spin] * spin[b.spin].conj() * w
        });
        QuantumState::mixed(layout, rho)
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn repr(&self) -> &StateRepr {
        &self.repr
    }

    pub fn is_pure(&self) -> bool {
        matches!(self.repr, StateRepr::Pure(_))
    }

    pub fn as_pure(&self) -> Option<&DVector<Complex64>> {
        match &self.repr {
            StateRepr::Pure(v) => Some(v),
            StateRepr::Mixed(_) => None,
        }
    }

    pub fn density_matrix(&self) -> DMatrix<Complex64> {
        match &self.repr {
            StateRepr::Pure(v) => v * v.adjoint(),
            StateRepr::Mixed(m) => m.clone(),
        }
    }

    pub fn into_mixed(self) -> QuantumState {
        match self.repr {
            StateRepr::Pure(ref v) => QuantumState {
                repr: StateRepr::Mixed(v * v.adjoint()),
                layout: self.layout,
            },
            StateRepr::Mixed(_) => self,
        }
    }

    /// ‖ψ‖ for pure states, Tr ρ for mixed ones.
    pub fn norm(&self) -> f64 {
        match &self.repr {
            StateRepr::Pure(v) => v.norm(),
            StateRepr::Mixed(m) => m.trace().re,
        }
    }

    /// Smallest eigenvalue of the density matrix (0 for pure states).
    pub fn min_eigenvalue(&self) -> Result<f64> {
        match &self.repr {
            StateRepr::Pure(_) => Ok(0.0),
            StateRepr::Mixed(m) => Ok(hermitian_eigenvalues(m)?.first().copied().unwrap_or(0.0)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dim = self.layout.total_dim();
        match &self.repr {
            StateRepr::Pure(v) => {
                if v.len() != dim {
                    return Err(Error::LayoutMismatch { expected: dim, found: v.len() });
                }
                let norm = v.norm();
                if (norm - 1.0).abs() > NORM_TOL {
                    return Err(Error::Numeric(format!("state norm {norm} differs from 1")));
                }
            }
            StateRepr::Mixed(m) => {
                if m.nrows() != dim || m.ncols() != dim {
                    return Err(Error::LayoutMismatch { expected: dim, found: m.nrows() });
                }
                let tr = m.trace();
                if (tr - Complex64::new(1.0, 0.0)).norm() > NORM_TOL {
                    return Err(Error::Numeric(format!("density matrix trace {tr} differs from 1")));
                }
                let herm = (m - m.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
                if herm > HERMITIAN_STATE_TOL {
                    return Err(Error::Numeric(format!("density matrix not Hermitian ({herm:e})")));
                }
                let lowest = self.min_eigenvalue()?;
                if lowest < -POSITIVITY_TOL {
                    return Err(Error::Numeric(format!("density matrix eigenvalue {lowest:e} < 0")));
                }
            }
        }
        Ok(())
    }
}

/// ⟨ψ|A|ψ⟩ or Tr(ρA).
pub fn expectation(state: &QuantumState, op: &OperatorMatrix) -> Result<Complex64> {
    state.layout.check_same(op.layout())?;
    Ok(match &state.repr {
        StateRepr::Pure(v) => v.dotc(&op.apply(v)),
        StateRepr::Mixed(m) => op.trace_product(m),
    })
}

/// Coherent spin state Σ_m d_m |j, m⟩_x with the modes in vacuum.
pub fn coherent_spin_state(layout: &SpaceLayout, theta: f64) -> Result<QuantumState> {
    if !(0.0..=std::f64::consts::PI).contains(&theta) {
        return Err(Error::param("theta", format!("must lie in [0, π], got {theta}")));
    }
    let spin = coherent_spin_amplitudes(layout.spin_count(), theta);
    QuantumState::product(layout, &spin, &vec![BosonInit::Vacuum; layout.mode_count()])
}

/// GHZ state (|j, j⟩_x + |j, -j⟩_x) / √2 with the modes in vacuum.
pub fn ghz_state(layout: &SpaceLayout) -> Result<QuantumState> {
    let spin = ghz_amplitudes(layout.spin_count())?;
    QuantumState::product(layout, &spin, &vec![BosonInit::Vacuum; layout.mode_count()])
}

/// Thermal state of `mode`; the spin sits in |j, j⟩_z and any other mode
/// in vacuum. Use [`QuantumState::product`] for other spin states.
pub fn thermal_state(layout: &SpaceLayout, mode: Mode, nbar: f64) -> Result<QuantumState> {
    layout.cutoff(mode)?;
    let mut inits = vec![BosonInit::Vacuum; layout.mode_count()];
    inits[mode.slot()] = BosonInit::Thermal(nbar);
    let state = QuantumState::product(layout, &dicke_amplitudes(layout.spin_count(), 0), &inits)?;
    Ok(state.into_mixed())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::builders::{boson_op, collective_spin_op, BosonOp, SpinAxis};
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn ev(state: &QuantumState, op: &OperatorMatrix) -> f64 {
        let v = expectation(state, op).unwrap();
        assert!(v.im.abs() < 1e-9);
        v.re
    }

    #[test]
    fn css_theta_zero_is_top_x_state() {
        for n in [1usize, 4, 7] {
            let l = SpaceLayout::spin_only(n);
            let css = coherent_spin_state(&l, 0.0).unwrap();
            let basis = x_eigenbasis(n);
            let overlap = basis.column(0).dotc(css.as_pure().unwrap());
            assert_relative_eq!(overlap.norm(), 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn css_single_spin_halfpi_amplitudes() {
        let d = wigner_amplitudes(1, FRAC_PI_2);
        assert_relative_eq!(d[0], 0.5f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(d[1], 0.5f64.sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn css_mean_spin_direction() {
        // Mean spin is j (cos θ, 0, sin θ).
        for n in [1usize, 2, 5, 8] {
            let l = SpaceLayout::new(n, &[2]).unwrap();
            let j = l.j();
            for theta in [0.0, FRAC_PI_4, FRAC_PI_2, 2.0, PI] {
                let s = coherent_spin_state(&l, theta).unwrap();
                assert_relative_eq!(ev(&s, &collective_spin_op(&l, SpinAxis::X)), j * theta.cos(), epsilon = 1e-10);
                assert_relative_eq!(ev(&s, &collective_spin_op(&l, SpinAxis::Y)), 0.0, epsilon = 1e-10);
                assert_relative_eq!(ev(&s, &collective_spin_op(&l, SpinAxis::Z)), j * theta.sin(), epsilon = 1e-10);
            }
        }
        assert!(coherent_spin_state(&SpaceLayout::spin_only(2), 4.0).is_err());
    }

    #[test]
    fn ghz_moments() {
        for n in 1usize..9 {
            let l = SpaceLayout::spin_only(n);
            let g = ghz_state(&l).unwrap();
            let jx = collective_spin_op(&l, SpinAxis::X);
            assert_relative_eq!(ev(&g, &jx), 0.0, epsilon = 1e-10);
            assert_relative_eq!(ev(&g, &(&jx * &jx)), l.j() * l.j(), epsilon = 1e-10);
        }
        // N = 1: (|+⟩ + |-⟩)/√2 is |↑⟩ up to a phase.
        let g = ghz_state(&SpaceLayout::spin_only(1)).unwrap();
        assert_relative_eq!(g.as_pure().unwrap()[0].norm(), 1.0, epsilon = 1e-12);
        assert!(ghz_state(&SpaceLayout::spin_only(0)).is_err());
    }

    #[test]
    fn thermal_populations_follow_geometric_law() {
        let p = thermal_populations(3, 0.0).unwrap();
        assert_eq!(p, vec![1.0, 0.0, 0.0, 0.0]);
        // Before renormalization p0 = 1/1.6.
        let cutoff = thermal_cutoff(0.6, 1e-15);
        let p = thermal_populations(cutoff, 0.6).unwrap();
        assert_relative_eq!(p[0], 0.625, epsilon = 1e-14);
        assert!(thermal_populations(4, -0.1).is_err());
    }

    #[test]
    fn thermal_state_trace_and_mean() {
        for nbar in [0.0, 0.3, 0.6, 2.0] {
            for cutoff in [3usize, 10, thermal_cutoff(nbar, 1e-6)] {
                let l = SpaceLayout::new(1, &[cutoff]).unwrap();
                let s = thermal_state(&l, Mode::X, nbar).unwrap();
                assert!((s.norm() - 1.0).abs() < 1e-12);
            }
            let cutoff = thermal_cutoff(nbar, 1e-10);
            let l = SpaceLayout::new(0, &[cutoff]).unwrap();
            let s = thermal_state(&l, Mode::X, nbar).unwrap();
            let n = boson_op(&l, Mode::X, BosonOp::Number).unwrap();
            assert_relative_eq!(ev(&s, &n), nbar, epsilon = 1e-7);
        }
        let l = SpaceLayout::new(0, &[4]).unwrap();
        let vac = thermal_state(&l, Mode::X, 0.0).unwrap();
        assert_eq!(vac.density_matrix()[(0, 0)], Complex64::new(1.0, 0.0));
        assert_eq!(vac.density_matrix().iter().filter(|z| z.norm() > 0.0).count(), 1);
    }

    #[test]
    fn expectation_of_top_state() {
        let l = SpaceLayout::spin_only(5);
        let top = QuantumState::basis(&l, BasisIndex { spin: 0, fock: [0, 0] });
        assert_relative_eq!(ev(&top, &collective_spin_op(&l, SpinAxis::Z)), 2.5);
        let other = SpaceLayout::spin_only(4);
        assert!(expectation(&top, &collective_spin_op(&other, SpinAxis::Z)).is_err());
    }

    #[test]
    fn state_invariants_enforced() {
        let l = SpaceLayout::spin_only(1);
        assert!(QuantumState::pure(&l, DVector::from_element(2, Complex64::new(1.0, 0.0))).is_err());
        let bad = DMatrix::from_diagonal(&DVector::from_vec(vec![Complex64::new(1.5, 0.0), Complex64::new(-0.5, 0.0)]));
        assert!(QuantumState::mixed(&l, bad).is_err());
        let ok = DMatrix::from_diagonal(&DVector::from_vec(vec![Complex64::new(0.25, 0.0), Complex64::new(0.75, 0.0)]));
        assert!(QuantumState::mixed(&l, ok).is_ok());
    }
}
