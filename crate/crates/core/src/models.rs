//! Hamiltonian builders.
//!
//! Every builder returns H/ħ in rad/ms. Forces enter through
//! F_α/ħ = r0_α f_dα / (2ħ), converted by [`crate::units::force_rate`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{boson_op, collective_spin_op, sum, BosonOp, Mode, OperatorMatrix, SpaceLayout, SpinAxis};
use crate::units;

/// Physical parameters of the spin-boson model.
///
/// Rates (`g_*`, `delta_*`, `big_delta`) are angular rates in rad/ms;
/// forces in N; spreads in m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub spin_count: usize,
    pub g_x: f64,
    pub g_y: f64,
    pub delta_x: f64,
    pub delta_y: f64,
    /// Effective spin frequency Δ.
    pub big_delta: f64,
    pub f_dx: f64,
    pub f_dy: f64,
    pub r0_x: f64,
    pub r0_y: f64,
}

/// Ground-state spread used by every figure parameter set.
pub const DEFAULT_R0: f64 = 14.5e-9;

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            spin_count: 1,
            g_x: 0.0,
            g_y: 0.0,
            delta_x: 0.0,
            delta_y: 0.0,
            big_delta: 0.0,
            f_dx: 0.0,
            f_dy: 0.0,
            r0_x: DEFAULT_R0,
            r0_y: DEFAULT_R0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        if self.spin_count == 0 {
            return Err(Error::param("spin_count", "need at least one spin"));
        }
        for (name, v) in [
            ("g_x", self.g_x),
            ("g_y", self.g_y),
            ("delta_x", self.delta_x),
            ("delta_y", self.delta_y),
            ("big_delta", self.big_delta),
            ("f_dx", self.f_dx),
            ("f_dy", self.f_dy),
        ] {
            if !v.is_finite() {
                return Err(Error::param(name, "must be finite"));
            }
        }
        for (name, v) in [("r0_x", self.r0_x), ("r0_y", self.r0_y)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::param(name, format!("spread must be positive, got {v}")));
            }
        }
        Ok(())
    }

    /// F_x/ħ in rad/ms.
    pub fn force_rate_x(&self) -> f64 {
        units::force_rate(self.f_dx, self.r0_x)
    }

    pub fn force_rate_y(&self) -> f64 {
        units::force_rate(self.f_dy, self.r0_y)
    }

    /// F_x = r0_x f_dx / 2 in joules.
    pub fn force_energy_x(&self) -> f64 {
        units::force_energy(self.f_dx, self.r0_x)
    }

    /// Whether mode y takes part in the dynamics at all.
    pub fn uses_mode_y(&self) -> bool {
        self.g_y != 0.0 || self.f_dy != 0.0
    }

    /// Layout with the modes this parameter set needs.
    pub fn layout(&self, cutoff_x: usize, cutoff_y: usize) -> Result<SpaceLayout> {
        if self.uses_mode_y() {
            SpaceLayout::new(self.spin_count, &[cutoff_x, cutoff_y])
        } else {
            SpaceLayout::new(self.spin_count, &[cutoff_x])
        }
    }

    fn sqrt_n(&self) -> f64 {
        (self.spin_count as f64).sqrt()
    }

    fn check_layout(&self, layout: &SpaceLayout) -> Result<()> {
        self.validate()?;
        if layout.spin_count() != self.spin_count {
            return Err(Error::Layout(format!(
                "layout has {} spins but parameters have {}",
                layout.spin_count(),
                self.spin_count
            )));
        }
        if !layout.has_mode(Mode::X) {
            return Err(Error::Layout("model needs mode x".into()));
        }
        if self.uses_mode_y() && !layout.has_mode(Mode::Y) {
            return Err(Error::Layout("g_y or f_dy is nonzero but the layout has no mode y".into()));
        }
        Ok(())
    }
}

/// Derived weak-coupling quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeakDerived {
    /// χ_α = sqrt(4 g_α² / (N |δ_α|)).
    pub chi_x: f64,
    pub chi_y: f64,
    /// Ω_f = 2 g_x r0_x f_dx / (ħ δ_x), rad/ms.
    pub omega_f: f64,
    /// μ_α = F_α N / (2 ħ g_α).
    pub mu_x: f64,
    pub mu_y: f64,
    /// γ = μ_x χ_x + i μ_y χ_y.
    pub gamma_susy: Complex64,
}

impl WeakDerived {
    /// Signed twisting rate c = 4 g_x² / (N δ_x) in H = -c J_x² - Ω_f J_x;
    /// equals χ² for δ_x > 0.
    pub fn twist_rate(params: &ModelParams) -> Result<f64> {
        if params.delta_x == 0.0 {
            return Err(Error::param("delta_x", "must be nonzero"));
        }
        Ok(4.0 * params.g_x * params.g_x / (params.spin_count as f64 * params.delta_x))
    }
}

fn weak_mode(g: f64, delta: f64, force_rate: f64, n: f64, name: &str) -> Result<(f64, f64)> {
    if g == 0.0 && force_rate == 0.0 {
        return Ok((0.0, 0.0));
    }
    if delta == 0.0 {
        return Err(Error::param(name, "detuning must be nonzero"));
    }
    let chi = (4.0 * g * g / (n * delta.abs())).sqrt();
    let mu = if g == 0.0 {
        return Err(Error::param(name, "force on a mode without spin coupling has no weak-regime mapping"));
    } else {
        force_rate * n / (2.0 * g)
    };
    Ok((chi, mu))
}

pub fn derive_weak(params: &ModelParams) -> Result<WeakDerived> {
    params.validate()?;
    if params.delta_x == 0.0 {
        return Err(Error::param("delta_x", "detuning must be nonzero"));
    }
    let n = params.spin_count as f64;
    let (chi_x, mu_x) = weak_mode(params.g_x, params.delta_x, params.force_rate_x(), n, "delta_x")?;
    let (chi_y, mu_y) = weak_mode(params.g_y, params.delta_y, params.force_rate_y(), n, "delta_y")?;
    let omega_f = units::omega_f(params.g_x, params.r0_x, params.f_dx, params.delta_x)?;
    Ok(WeakDerived {
        chi_x,
        chi_y,
        omega_f,
        mu_x,
        mu_y,
        gamma_susy: Complex64::new(mu_x * chi_x, mu_y * chi_y),
    })
}

/// Strong-coupling quantities of one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrongMode {
    /// λ² = 4 g² / (δ Δ).
    pub lambda_sq: f64,
    /// υ = δ sqrt(1 - λ²), rad/ms.
    pub upsilon: f64,
    /// Displacement ε = √N f r0 / (2ħ δ (1 - λ²)).
    pub epsilon: f64,
    /// Squeezing ν = -ln(1 - λ²) / 4.
    pub nu: f64,
    /// Bare detuning δ, kept for the closed-form propagator.
    pub delta: f64,
}

impl StrongMode {
    pub fn lambda(&self) -> f64 {
        self.lambda_sq.max(0.0).sqrt()
    }

    /// First optimal readout time π/υ.
    pub fn optimal_time(&self) -> f64 {
        std::f64::consts::PI / self.upsilon.abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StrongDerived {
    pub x: StrongMode,
    /// `None` when mode y is not driven.
    pub y: Option<StrongMode>,
}

fn strong_mode(g: f64, delta: f64, big_delta: f64, force_rate: f64, n: f64, name: &str) -> Result<StrongMode> {
    if delta == 0.0 {
        return Err(Error::param(name, "detuning must be nonzero"));
    }
    let lambda_sq = 4.0 * g * g / (delta * big_delta);
    if lambda_sq >= 1.0 {
        return Err(Error::param(name, format!("λ² = {lambda_sq} must stay below 1")));
    }
    let one_minus = 1.0 - lambda_sq;
    Ok(StrongMode {
        lambda_sq,
        upsilon: delta * one_minus.sqrt(),
        epsilon: n.sqrt() * force_rate / (delta * one_minus),
        nu: -0.25 * one_minus.ln(),
        delta,
    })
}

pub fn derive_strong(params: &ModelParams) -> Result<StrongDerived> {
    params.validate()?;
    if params.big_delta == 0.0 {
        return Err(Error::param("big_delta", "spin frequency Δ must be nonzero"));
    }
    let n = params.spin_count as f64;
    let x = strong_mode(params.g_x, params.delta_x, params.big_delta, params.force_rate_x(), n, "delta_x")?;
    let y = if params.uses_mode_y() {
        Some(strong_mode(params.g_y, params.delta_y, params.big_delta, params.force_rate_y(), n, "delta_y")?)
    } else {
        None
    };
    Ok(StrongDerived { x, y })
}

fn spin(layout: &SpaceLayout, axis: SpinAxis) -> OperatorMatrix {
    collective_spin_op(layout, axis)
}

fn boson(layout: &SpaceLayout, mode: Mode, which: BosonOp) -> Result<OperatorMatrix> {
    boson_op(layout, mode, which)
}

/// Full Jahn-Teller model
/// δ_x n_x + δ_y n_y + Δ J_z + (2g_x/√N) J_x X_x + (2g_y/√N) J_y X_y
/// + √N (F_x/ħ) X_x + √N (F_y/ħ) X_y, with X = a^dag + a.
///
/// A layout without mode y is accepted when g_y = f_dy = 0 (Dicke and
/// Rabi limits).
pub fn build_full(params: &ModelParams, layout: &SpaceLayout) -> Result<OperatorMatrix> {
    params.check_layout(layout)?;
    let sqrt_n = params.sqrt_n();
    let mut terms = vec![spin(layout, SpinAxis::Z).scale(params.big_delta)];
    let modes = [
        (Mode::X, SpinAxis::X, params.delta_x, params.g_x, params.force_rate_x()),
        (Mode::Y, SpinAxis::Y, params.delta_y, params.g_y, params.force_rate_y()),
    ];
    for (mode, axis, delta, g, force) in modes {
        if !layout.has_mode(mode) {
            continue;
        }
        let x = boson(layout, mode, BosonOp::PositionSum)?;
        terms.push(boson(layout, mode, BosonOp::Number)?.scale(delta));
        terms.push((&spin(layout, axis) * &x).scale(2.0 * g / sqrt_n));
        terms.push(x.scale(sqrt_n * force));
    }
    sum(layout, &terms).checked_hermitian()
}

/// Effective weak-coupling Hamiltonian split into the collective-spin part
/// and the residual spin-phonon part (constant terms dropped).
#[derive(Debug, Clone)]
pub struct LmgHamiltonian {
    pub spin: OperatorMatrix,
    /// H_b plus the residual coupling; `None` on a spin-only layout.
    pub residual: Option<OperatorMatrix>,
    /// Set when some active mode has |δ| < 5 g.
    pub weak_coupling_warning: bool,
}

/// h_spin = Δ J_z - (4g_x²/Nδ_x) J_x² - (4g_y²/Nδ_y) J_y² - (4g_x F_x/ħδ_x) J_x
/// - (4g_y F_y/ħδ_y) J_y, and the residual term built on the modes of
/// `layout`.
pub fn build_effective_lmg(params: &ModelParams, layout: &SpaceLayout) -> Result<LmgHamiltonian> {
    params.validate()?;
    if layout.spin_count() != params.spin_count {
        return Err(Error::Layout("layout and parameters disagree on N".into()));
    }
    let n = params.spin_count as f64;
    let active = [
        (SpinAxis::X, params.g_x, params.delta_x, params.force_rate_x(), "delta_x"),
        (SpinAxis::Y, params.g_y, params.delta_y, params.force_rate_y(), "delta_y"),
    ];
    let mut terms = vec![spin(layout, SpinAxis::Z).scale(params.big_delta)];
    let mut warning = false;
    for (axis, g, delta, force, name) in active {
        if g == 0.0 && force == 0.0 {
            continue;
        }
        if delta == 0.0 {
            return Err(Error::param(name, "detuning must be nonzero"));
        }
        warning |= delta.abs() < 5.0 * g.abs();
        let j = spin(layout, axis);
        terms.push((&j * &j).scale(-4.0 * g * g / (n * delta)));
        terms.push(j.scale(-4.0 * g * force / delta));
    }
    let spin_part = sum(layout, &terms).checked_hermitian()?;

    let residual = if layout.mode_count() == 0 {
        None
    } else {
        let mut res = vec![boson(layout, Mode::X, BosonOp::Number)?.scale(params.delta_x)];
        if layout.has_mode(Mode::Y) {
            res.push(boson(layout, Mode::Y, BosonOp::Number)?.scale(params.delta_y));
        }
        if params.g_x != 0.0 && params.g_y != 0.0 {
            if !layout.has_mode(Mode::Y) {
                return Err(Error::Layout("residual coupling needs mode y".into()));
            }
            let (dx, dy) = (params.delta_x, params.delta_y);
            let coeff = 2.0 * params.g_x * params.g_y / (n * dx * dy);
            let ax = boson(layout, Mode::X, BosonOp::Annihilate)?;
            let ay = boson(layout, Mode::Y, BosonOp::Annihilate)?;
            let (axd, ayd) = (ax.adjoint(), ay.adjoint());
            let i = Complex64::new(0.0, 1.0);
            // i (a_x^dag a_y - a_y^dag a_x) and i (a_x^dag a_y^dag - a_y a_x)
            let hop = (&(&axd * &ay) - &(&ayd * &ax)).scale(i);
            let pair = (&(&axd * &ayd) - &(&ay * &ax)).scale(i);
            let bracket = &hop.scale(dx + dy) - &pair.scale(dx - dy);
            res.push((&spin(layout, SpinAxis::Z) * &bracket).scale(coeff));
        }
        Some(sum(layout, &res).checked_hermitian()?)
    };

    Ok(LmgHamiltonian {
        spin: spin_part,
        residual,
        weak_coupling_warning: warning,
    })
}

/// One-axis twisting model H = -c J_x² - Ω_f J_x with c = 4g_x²/(Nδ_x)
/// (= χ² for δ_x > 0) and Ω_f = 2 g_x r0_x f_dx / (ħ δ_x).
///
/// Δ, g_y and the y force are ignored. Any boson factors of `layout` are
/// spectators.
pub fn build_oat(params: &ModelParams, layout: &SpaceLayout) -> Result<OperatorMatrix> {
    params.validate()?;
    if layout.spin_count() != params.spin_count {
        return Err(Error::Layout("layout and parameters disagree on N".into()));
    }
    let twist = WeakDerived::twist_rate(params)?;
    let omega_f = units::omega_f(params.g_x, params.r0_x, params.f_dx, params.delta_x)?;
    let jx = spin(layout, SpinAxis::X);
    let h = &(&jx * &jx).scale(-twist) - &jx.scale(omega_f);
    h.checked_hermitian()
}

/// Which strong-coupling effective Hamiltonian to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrongVariant {
    /// δ n + Δ J_z + (2g²/NΔ) J_z X² + √N (F/ħ) X on spin ⊗ bosons.
    SpinBoson,
    /// The |j, -j⟩ sector: δ n - (g²/Δ) X² + √N (F/ħ) X on the bosons only.
    LowestSpinSector,
}

pub fn build_strong_effective(params: &ModelParams, layout: &SpaceLayout, variant: StrongVariant) -> Result<OperatorMatrix> {
    params.validate()?;
    if params.big_delta == 0.0 {
        return Err(Error::param("big_delta", "spin frequency Δ must be nonzero"));
    }
    if !layout.has_mode(Mode::X) || (params.uses_mode_y() && !layout.has_mode(Mode::Y)) {
        return Err(Error::Layout("layout is missing a driven mode".into()));
    }
    let n = params.spin_count as f64;
    let sqrt_n = n.sqrt();
    let mut terms = Vec::new();
    if variant == StrongVariant::SpinBoson {
        if layout.spin_count() != params.spin_count {
            return Err(Error::Layout("layout and parameters disagree on N".into()));
        }
        terms.push(spin(layout, SpinAxis::Z).scale(params.big_delta));
    }
    let modes = [
        (Mode::X, params.delta_x, params.g_x, params.force_rate_x()),
        (Mode::Y, params.delta_y, params.g_y, params.force_rate_y()),
    ];
    for (mode, delta, g, force) in modes {
        if !layout.has_mode(mode) {
            continue;
        }
        let x = boson(layout, mode, BosonOp::PositionSum)?;
        let x2 = &x * &x;
        terms.push(boson(layout, mode, BosonOp::Number)?.scale(delta));
        match variant {
            StrongVariant::SpinBoson => {
                terms.push((&spin(layout, SpinAxis::Z) * &x2).scale(2.0 * g * g / (n * params.big_delta)));
            }
            StrongVariant::LowestSpinSector => {
                terms.push(x2.scale(-g * g / params.big_delta));
            }
        }
        terms.push(x.scale(sqrt_n * force));
    }
    sum(layout, &terms).checked_hermitian()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{hermitian_eigenvalues, total_parity_op, BasisIndex};
    use crate::units::YOCTONEWTON;
    use approx::assert_relative_eq;

    pub(crate) fn fig1_params() -> ModelParams {
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

    #[test]
    fn zero_coupling_is_diagonal() {
        let p = ModelParams {
            spin_count: 2,
            delta_x: 1.5,
            delta_y: -0.5,
            big_delta: 3.0,
            ..Default::default()
        };
        let l = SpaceLayout::new(2, &[3, 2]).unwrap();
        let h = build_full(&p, &l).unwrap();
        for r in 0..l.total_dim() {
            for c in 0..l.total_dim() {
                let v = h.get(r, c);
                if r != c {
                    assert_eq!(v, Complex64::default());
                } else {
                    let at = l.decompose(r);
                    let m = 1.0 - at.spin as f64;
                    let e = 1.5 * at.fock[0] as f64 - 0.5 * at.fock[1] as f64 + 3.0 * m;
                    assert_relative_eq!(v.re, e, epsilon = 1e-14);
                }
            }
        }
    }

    #[test]
    fn rabi_limit_conserves_parity() {
        let p = ModelParams {
            spin_count: 1,
            g_x: 0.7,
            delta_x: 1.1,
            big_delta: 2.3,
            ..Default::default()
        };
        let l = SpaceLayout::new(1, &[12]).unwrap();
        let h = build_full(&p, &l).unwrap();
        assert!(h.commutator(&total_parity_op(&l)).max_abs() < 1e-10);
        let forced = ModelParams { f_dx: 3.0 * YOCTONEWTON, ..p };
        let h = build_full(&forced, &l).unwrap();
        assert!(h.commutator(&total_parity_op(&l)).max_abs() > 1e-3);
    }

    #[test]
    fn fig1_full_model_dimension() {
        let p = fig1_params();
        let l = p.layout(14, 14).unwrap();
        assert_eq!(l.total_dim(), 2025);
        let h = build_full(&p, &l).unwrap();
        assert!(h.hermitian_hint());
        assert!(h.hermiticity_error() < 1e-12);
        assert!(!h.is_dense());
    }

    #[test]
    fn layout_must_carry_driven_modes() {
        let p = fig1_params();
        let l = SpaceLayout::new(8, &[4]).unwrap();
        assert!(build_full(&p, &l).is_err());
        let l = SpaceLayout::new(7, &[4, 4]).unwrap();
        assert!(build_full(&p, &l).is_err());
    }

    #[test]
    fn residual_vanishes_without_second_coupling() {
        let p = ModelParams {
            spin_count: 3,
            g_x: 2.0,
            delta_x: 30.0,
            delta_y: 25.0,
            f_dx: YOCTONEWTON,
            ..Default::default()
        };
        let l = SpaceLayout::new(3, &[3, 3]).unwrap();
        let lmg = build_effective_lmg(&p, &l).unwrap();
        let hb = &boson_op(&l, Mode::X, BosonOp::Number).unwrap().scale(30.0)
            + &boson_op(&l, Mode::Y, BosonOp::Number).unwrap().scale(25.0);
        assert_eq!(lmg.residual.unwrap().max_abs_diff(&hb), 0.0);
        assert!(!lmg.weak_coupling_warning);
    }

    #[test]
    fn weak_coupling_warning_flag() {
        let p = ModelParams {
            spin_count: 2,
            g_x: 2.0,
            delta_x: 6.0,
            ..Default::default()
        };
        let lmg = build_effective_lmg(&p, &SpaceLayout::spin_only(2)).unwrap();
        assert!(lmg.weak_coupling_warning);
        assert!(lmg.residual.is_none());
        let bad = ModelParams { delta_x: 0.0, ..p };
        assert!(build_effective_lmg(&bad, &SpaceLayout::spin_only(2)).is_err());
    }

    #[test]
    fn residual_is_hermitian_with_both_couplings() {
        let p = fig1_params();
        let l = p.layout(3, 3).unwrap();
        let lmg = build_effective_lmg(&p, &l).unwrap();
        let res = lmg.residual.unwrap();
        assert!(res.hermiticity_error() < 1e-14);
        // The pair-creation part connects |0,0⟩ to |1,1⟩.
        let vac = l.index(BasisIndex { spin: 0, fock: [0, 0] });
        let pair = l.index(BasisIndex { spin: 0, fock: [1, 1] });
        assert!(res.get(pair, vac).norm() > 0.0);
    }

    #[test]
    fn susy_factorization_identity() {
        let mut p = fig1_params();
        let w = derive_weak(&p).unwrap();
        p.big_delta = w.chi_x * w.chi_y;
        let l = SpaceLayout::spin_only(p.spin_count);
        let h = build_effective_lmg(&p, &l).unwrap().spin;
        let [jx, jy] = [SpinAxis::X, SpinAxis::Y].map(|a| collective_spin_op(&l, a));
        let id = OperatorMatrix::identity(&l);
        let i = Complex64::new(0.0, 1.0);
        let g = w.gamma_susy;
        let left = sum(&l, &[jx.scale(w.chi_x), jy.scale(i * w.chi_y), id.scale(g)]);
        let right = sum(&l, &[jx.scale(w.chi_x), jy.scale(-i * w.chi_y), id.scale(g.conj())]);
        let factorized = &(&left * &right) - &id.scale(g.norm_sqr());
        assert!(h.max_abs_diff(&factorized) < 1e-9, "{}", h.max_abs_diff(&factorized));
    }

    #[test]
    fn oat_formula_values() {
        let p = ModelParams {
            spin_count: 6,
            g_x: 5.0,
            delta_x: 60.0,
            f_dx: 1.5 * YOCTONEWTON,
            ..Default::default()
        };
        let w = derive_weak(&p).unwrap();
        assert_relative_eq!(w.omega_f, 0.0344, max_relative = 2e-3);
        assert_relative_eq!(w.chi_x * w.chi_x, 100.0 / 360.0, max_relative = 1e-12);
        assert_relative_eq!(WeakDerived::twist_rate(&p).unwrap(), 100.0 / 360.0, max_relative = 1e-12);
        let l = SpaceLayout::spin_only(6);
        let h = build_oat(&p, &l).unwrap();
        let jx = collective_spin_op(&l, SpinAxis::X);
        assert!(h.commutator(&jx).max_abs() < 1e-12);
        let unforced = build_oat(&ModelParams { f_dx: 0.0, ..p.clone() }, &l).unwrap();
        assert!(unforced.commutator(&jx).max_abs() < 1e-12);
        assert!(build_oat(&ModelParams { delta_x: 0.0, ..p }, &l).is_err());
    }

    #[test]
    fn strong_effective_decoupled_is_oscillator() {
        let p = ModelParams {
            spin_count: 1,
            delta_x: 0.5,
            big_delta: 300.0,
            ..Default::default()
        };
        let l = SpaceLayout::new(0, &[6]).unwrap();
        let h = build_strong_effective(&p, &l, StrongVariant::LowestSpinSector).unwrap();
        let n = boson_op(&l, Mode::X, BosonOp::Number).unwrap();
        assert!(h.max_abs_diff(&n.scale(0.5)) < 1e-15);
    }

    #[test]
    fn strong_effective_spin_variant_commutes_with_jz() {
        let p = ModelParams {
            spin_count: 3,
            g_x: 2.5,
            delta_x: 0.5,
            big_delta: 300.0,
            f_dx: 3.0 * YOCTONEWTON,
            ..Default::default()
        };
        let l = SpaceLayout::new(3, &[8]).unwrap();
        let h = build_strong_effective(&p, &l, StrongVariant::SpinBoson).unwrap();
        assert!(h.commutator(&collective_spin_op(&l, SpinAxis::Z)).max_abs() < 1e-10);
        assert!(build_strong_effective(&ModelParams { big_delta: 0.0, ..p }, &l, StrongVariant::SpinBoson).is_err());
    }

    #[test]
    fn strong_sector_spectrum_is_shifted_ladder() {
        // third-figure parameters: λ² = 1/6.
        let p = ModelParams {
            spin_count: 1,
            g_x: 2.5,
            delta_x: 0.5,
            big_delta: 300.0,
            f_dx: 3.0 * YOCTONEWTON,
            ..Default::default()
        };
        let s = derive_strong(&p).unwrap().x;
        assert_relative_eq!(s.lambda_sq, 1.0 / 6.0, max_relative = 1e-12);
        assert_relative_eq!(s.upsilon, 0.5 * (5.0f64 / 6.0).sqrt(), max_relative = 1e-12);
        let l = SpaceLayout::new(0, &[120]).unwrap();
        let h = build_strong_effective(&p, &l, StrongVariant::LowestSpinSector).unwrap();
        let e = hermitian_eigenvalues(&h.to_dense()).unwrap();
        // E_n = υ(n + 1/2) - δ/2 - c²/(δ(1 - λ²)), c = √N F/ħ
        let c = p.force_rate_x();
        let offset = -0.25 - c * c / (0.5 * (1.0 - s.lambda_sq));
        for (n, en) in e.iter().take(8).enumerate() {
            assert_relative_eq!(*en, s.upsilon * (n as f64 + 0.5) + offset, epsilon = 1e-9);
        }
    }

    #[test]
    fn strong_derived_values() {
        let fig4 = ModelParams {
            spin_count: 1,
            g_x: 2.5,
            delta_x: 0.14,
            big_delta: 270.0,
            ..Default::default()
        };
        let s = derive_strong(&fig4).unwrap().x;
        assert_relative_eq!(s.lambda_sq, 0.6614, max_relative = 1e-4);
        assert_relative_eq!(s.upsilon, 0.0815, max_relative = 1e-3);
        assert_relative_eq!(s.nu, -0.25 * 0.3386f64.ln(), max_relative = 1e-3);
        assert_relative_eq!(s.nu, 0.2707, max_relative = 1e-3);

        let fig5 = ModelParams {
            g_x: 25.0,
            delta_x: 2.1,
            big_delta: 2700.0,
            ..fig4.clone()
        };
        let s = derive_strong(&fig5).unwrap().x;
        assert_relative_eq!(s.lambda_sq, 0.4409, max_relative = 1e-4);
        assert_relative_eq!(s.upsilon, 1.570, max_relative = 1e-3);
        assert_relative_eq!(s.optimal_time(), 2.0, max_relative = 1e-3);

        let decoupled = ModelParams {
            spin_count: 4,
            g_x: 0.0,
            delta_x: 0.3,
            big_delta: 100.0,
            f_dx: 2.0 * YOCTONEWTON,
            ..Default::default()
        };
        let s = derive_strong(&decoupled).unwrap().x;
        assert_eq!(s.lambda_sq, 0.0);
        assert_eq!(s.upsilon, 0.3);
        assert_eq!(s.nu, 0.0);
        let expected = 2.0 * 2e-24 * DEFAULT_R0 / (2.0 * units::HBAR * 0.3e3);
        assert_relative_eq!(s.epsilon, expected, max_relative = 1e-12);

        let too_strong = ModelParams { g_x: 3.1, ..fig4 };
        assert!(derive_strong(&too_strong).is_err());
    }
}
