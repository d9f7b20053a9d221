use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{check_grid, check_hamiltonian};
use crate::error::{Error, Result};
use crate::quantum::{boson_op, sum, BosonOp, Mode, OperatorMatrix, QuantumState, StateRepr};

/// Thermal reservoir coupled to one mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Reservoir coupling γ, 1/ms.
    pub gamma_dec: f64,
    /// Mean reservoir occupation n̄.
    pub nbar_res: f64,
}

impl NoiseParams {
    /// Reservoir occupation used when only the heating rate is given.
    pub const DEFAULT_NBAR: f64 = 20.0;

    pub fn new(gamma_dec: f64, nbar_res: f64) -> Result<Self> {
        let noise = NoiseParams { gamma_dec, nbar_res };
        noise.validate()?;
        Ok(noise)
    }

    /// γ = ⟨ṅ⟩ / n̄.
    pub fn from_heating_rate(rate: f64, nbar_res: f64) -> Result<Self> {
        if !(nbar_res > 0.0) {
            return Err(Error::param("nbar_res", "must be positive to split a heating rate"));
        }
        NoiseParams::new(rate / nbar_res, nbar_res)
    }

    pub fn quiet() -> Self {
        NoiseParams { gamma_dec: 0.0, nbar_res: 0.0 }
    }

    /// ⟨ṅ⟩ = n̄ γ, 1/ms.
    pub fn heating_rate(&self) -> f64 {
        self.nbar_res * self.gamma_dec
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_dec.is_finite() && self.gamma_dec >= 0.0) {
            return Err(Error::param("gamma_dec", "must be finite and non-negative"));
        }
        if !(self.nbar_res.is_finite() && self.nbar_res >= 0.0) {
            return Err(Error::param("nbar_res", "must be finite and non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LindbladOptions {
    /// Local error allowed per step (max-norm on ρ).
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for LindbladOptions {
    fn default() -> Self {
        LindbladOptions { tol: 1e-8, max_steps: 5_000_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LindbladStats {
    pub accepted: usize,
    pub rejected: usize,
    /// Largest |Tr ρ - 1| seen at a grid point.
    pub max_trace_error: f64,
}

/// dρ/dt = -i (K ρ - ρ K^dag) + Σ L ρ L^dag with K = H - (i/2) Σ L^dag L.
struct Generator {
    k: OperatorMatrix,
    jumps: Vec<OperatorMatrix>,
}

impl Generator {
    fn new(h: &OperatorMatrix, mode: Mode, noise: &NoiseParams) -> Result<Self> {
        let layout = h.layout();
        let a = boson_op(layout, mode, BosonOp::Annihilate)?;
        let mut jumps = Vec::new();
        let down = noise.gamma_dec * (noise.nbar_res + 1.0);
        let up = noise.gamma_dec * noise.nbar_res;
        if down > 0.0 {
            jumps.push(a.scale(down.sqrt()));
        }
        if up > 0.0 {
            jumps.push(a.adjoint().scale(up.sqrt()));
        }
        let mut terms = vec![h.clone()];
        for l in &jumps {
            terms.push((&l.adjoint() * l).scale(Complex64::new(0.0, -0.5)));
        }
        Ok(Generator { k: sum(layout, &terms), jumps })
    }

    /// Rough spectral radius, used for the first step size.
    fn scale(&self) -> f64 {
        let mut rows = vec![0.0; self.k.dim()];
        self.k.for_each_entry(|r, _, v| rows[r] += v.norm());
        let jumps: f64 = self.jumps.iter().map(|l| l.max_abs().powi(2)).sum();
        rows.into_iter().fold(0.0, f64::max) + jumps
    }

    fn apply(&self, rho: &DMatrix<Complex64>) -> DMatrix<Complex64> {
        let i = Complex64::new(0.0, 1.0);
        let k_rho = self.k.mul_dense_left(rho);
        let mut out = (k_rho.adjoint() - &k_rho) * i;
        for l in &self.jumps {
            let l_rho = l.mul_dense_left(rho);
            out += l.mul_dense_left(&l_rho.adjoint());
        }
        out
    }
}

const A: [&[f64]; 6] = [
    &[0.2],
    &[3.0 / 40.0, 9.0 / 40.0],
    &[44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0],
    &[19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0],
    &[9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0],
    &[35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// Fifth-order minus embedded fourth-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

fn combine(base: &DMatrix<Complex64>, h: f64, weights: &[f64], stages: &[DMatrix<Complex64>]) -> DMatrix<Complex64> {
    let mut out = base.clone();
    for (w, k) in weights.iter().zip(stages) {
        if *w != 0.0 {
            out.zip_apply(k, |o, x| *o += x * (h * w));
        }
    }
    out
}

/// Dormand-Prince 5(4) integration of the master equation with heating on
/// `mode`. Pure initial states are promoted to density matrices.
pub fn propagate_lindblad(
    h: &OperatorMatrix,
    mode: Mode,
    noise: &NoiseParams,
    rho0: &QuantumState,
    times: &[f64],
    options: &LindbladOptions,
    mut visit: impl FnMut(f64, &QuantumState) -> Result<()>,
) -> Result<LindbladStats> {
    check_hamiltonian(h, rho0)?;
    check_grid(times)?;
    noise.validate()?;
    if !(options.tol > 0.0) {
        return Err(Error::param("tol", "must be positive"));
    }
    let layout = rho0.layout().clone();
    let generator = Generator::new(h, mode, noise)?;
    let mut rho = rho0.density_matrix();
    let mut stats = LindbladStats::default();
    let mut now = 0.0;
    let mut step = 0.1 / generator.scale().max(1e-12);
    let mut k_first = generator.apply(&rho);
    let mut stages: Vec<DMatrix<Complex64>> = Vec::with_capacity(7);

    for &target in times {
        while target - now > 1e-13 * target.max(1.0) {
            if stats.accepted + stats.rejected >= options.max_steps {
                return Err(Error::Numeric(format!("Lindblad integrator exceeded {} steps", options.max_steps)));
            }
            let remaining = target - now;
            let lands = step >= remaining;
            let h_try = if lands { remaining } else { step };
            stages.clear();
            stages.push(k_first.clone());
            for row in A {
                let arg = combine(&rho, h_try, row, &stages);
                stages.push(generator.apply(&arg));
            }
            // stage 7 is evaluated at the fifth-order solution
            let err = E
                .iter()
                .zip(&stages)
                .filter(|(w, _)| **w != 0.0)
                .fold(DMatrix::<Complex64>::zeros(rho.nrows(), rho.ncols()), |mut acc, (w, k)| {
                    acc.zip_apply(k, |a, x| *a += x * (h_try * w));
                    acc
                })
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            let ratio = err / options.tol;
            let factor = if ratio == 0.0 { 5.0 } else { (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0) };
            if ratio <= 1.0 {
                let next = combine(&rho, h_try, A[5], &stages[..6]);
                rho = (&next + next.adjoint()).scale(0.5);
                k_first = stages[6].clone();
                stats.accepted += 1;
                now = if lands { target } else { now + h_try };
                // a short landing step says nothing about the natural step size
                if !lands || h_try >= step * 0.5 {
                    step = h_try * factor;
                }
            } else {
                stats.rejected += 1;
                step = h_try * factor.min(0.9);
            }
            if !step.is_finite() || step < 1e-15 * target.max(1.0) {
                return Err(Error::Numeric("Lindblad step size underflow".into()));
            }
        }
        now = target;
        stats.max_trace_error = stats.max_trace_error.max((rho.trace().re - 1.0).abs());
        visit(target, &QuantumState::from_repr_unchecked(&layout, StateRepr::Mixed(rho.clone())))?;
    }
    Ok(stats)
}

/// Collecting form of [`propagate_lindblad`].
pub fn evolve_lindblad(
    h: &OperatorMatrix,
    mode: Mode,
    noise: &NoiseParams,
    rho0: &QuantumState,
    times: &[f64],
    options: &LindbladOptions,
) -> Result<Vec<QuantumState>> {
    let mut out = Vec::with_capacity(times.len());
    propagate_lindblad(h, mode, noise, rho0, times, options, |_, s| {
        out.push(s.clone());
        Ok(())
    })?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{evolve_unitary, linear_grid, UnitaryOptions};
    use crate::models::{build_strong_effective, ModelParams, StrongVariant};
    use crate::quantum::{expectation, BasisIndex, SpaceLayout};
    use crate::units::YOCTONEWTON;
    use approx::assert_relative_eq;

    fn boson_setup() -> (OperatorMatrix, QuantumState) {
        let p = ModelParams {
            spin_count: 1,
            g_x: 2.5,
            delta_x: 0.5,
            big_delta: 300.0,
            f_dx: 3.0 * YOCTONEWTON,
            ..Default::default()
        };
        let l = SpaceLayout::new(0, &[25]).unwrap();
        let h = build_strong_effective(&p, &l, StrongVariant::LowestSpinSector).unwrap();
        let vac = QuantumState::basis(&l, BasisIndex { spin: 0, fock: [0, 0] });
        (h, vac)
    }

    #[test]
    fn closed_system_limit_matches_unitary() {
        let (h, vac) = boson_setup();
        let times = linear_grid(0.0, 6.0, 13);
        let opts = LindbladOptions::default();
        let open = evolve_lindblad(&h, Mode::X, &NoiseParams::quiet(), &vac, &times, &opts).unwrap();
        let closed = evolve_unitary(&h, &vac, &times, &UnitaryOptions::default()).unwrap();
        let n = boson_op(h.layout(), Mode::X, BosonOp::Number).unwrap();
        for (a, b) in open.iter().zip(&closed) {
            let (x, y) = (expectation(a, &n).unwrap().re, expectation(b, &n).unwrap().re);
            assert!((x - y).abs() < 10.0 * opts.tol * 6.0, "{x} {y}");
        }
    }

    #[test]
    fn heating_thermalises_vacuum() {
        let l = SpaceLayout::new(0, &[40]).unwrap();
        let h = OperatorMatrix::zeros(&l);
        let vac = QuantumState::basis(&l, BasisIndex { spin: 0, fock: [0, 0] });
        let noise = NoiseParams::new(0.5, 2.0).unwrap();
        assert_eq!(noise.heating_rate(), 1.0);
        let times = linear_grid(0.0, 3.0, 31);
        let opts = LindbladOptions::default();
        let states = evolve_lindblad(&h, Mode::X, &noise, &vac, &times, &opts).unwrap();
        let n = boson_op(&l, Mode::X, BosonOp::Number).unwrap();
        for (t, s) in times.iter().zip(&states) {
            let mean = expectation(s, &n).unwrap().re;
            assert_relative_eq!(mean, 2.0 * (1.0 - (-0.5 * t).exp()), epsilon = 1e-6);
            assert!((s.norm() - 1.0).abs() < 10.0 * opts.tol);
            assert!(s.min_eigenvalue().unwrap() > -1e-7);
        }
        // initial slope equals the heating rate
        let slope = expectation(&states[1], &n).unwrap().re / times[1];
        assert_relative_eq!(slope, noise.heating_rate(), max_relative = 0.05);
    }

    #[test]
    fn driven_heating_stays_physical() {
        let (h, vac) = boson_setup();
        let noise = NoiseParams::from_heating_rate(0.1, NoiseParams::DEFAULT_NBAR).unwrap();
        let times = linear_grid(0.0, 7.0, 15);
        let opts = LindbladOptions::default();
        let mut worst: f64 = 0.0;
        let stats = propagate_lindblad(&h, Mode::X, &noise, &vac, &times, &opts, |_, s| {
            worst = worst.min(s.min_eigenvalue()?);
            let rho = s.density_matrix();
            assert!((&rho - rho.adjoint()).norm() < 1e-14);
            Ok(())
        })
        .unwrap();
        assert!(worst > -1e-7, "{worst}");
        assert!(stats.max_trace_error < 10.0 * opts.tol);
        assert!(stats.accepted > 0);
    }

    #[test]
    fn grid_refinement_is_stable() {
        let (h, vac) = boson_setup();
        let noise = NoiseParams::from_heating_rate(0.05, 20.0).unwrap();
        let opts = LindbladOptions::default();
        let n = boson_op(h.layout(), Mode::X, BosonOp::Number).unwrap();
        let coarse = evolve_lindblad(&h, Mode::X, &noise, &vac, &linear_grid(0.0, 4.0, 5), &opts).unwrap();
        let fine = evolve_lindblad(&h, Mode::X, &noise, &vac, &linear_grid(0.0, 4.0, 9), &opts).unwrap();
        for (k, s) in coarse.iter().enumerate() {
            let x = expectation(s, &n).unwrap().re;
            let y = expectation(&fine[2 * k], &n).unwrap().re;
            assert!((x - y).abs() < 10.0 * opts.tol * 4.0, "{}", (x - y).abs());
        }
    }

    #[test]
    fn rejects_negative_rates() {
        assert!(NoiseParams::new(-1.0, 2.0).is_err());
        assert!(NoiseParams::new(1.0, -2.0).is_err());
        assert!(NoiseParams::from_heating_rate(0.1, 0.0).is_err());
    }
}
