//! Collective-spin and boson operators embedded in a [`SpaceLayout`].

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::layout::{BasisIndex, Mode, SpaceLayout};
use super::operator::OperatorMatrix;
use crate::error::Result;

type Entries = Vec<(usize, usize, Complex64)>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpinAxis {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BosonOp {
    Annihilate,
    Create,
    Number,
    /// a^dag + a
    PositionSum,
}

fn re(v: f64) -> Complex64 {
    Complex64::new(v, 0.0)
}

fn identity_entries(dim: usize) -> Entries {
    (0..dim).map(|i| (i, i, re(1.0))).collect()
}

/// Kronecker product of one factor per tensor slot; `None` is identity.
fn embed(layout: &SpaceLayout, spin: Option<Entries>, modes: [Option<Entries>; 2], hermitian: bool) -> OperatorMatrix {
    let [dx, dy] = layout.mode_dims();
    let spin = spin.unwrap_or_else(|| identity_entries(layout.spin_dim()));
    let [mx, my] = modes;
    let mx = mx.unwrap_or_else(|| identity_entries(dx));
    let my = my.unwrap_or_else(|| identity_entries(dy));
    let mut triplets = Vec::with_capacity(spin.len() * mx.len() * my.len());
    for &(si, sj, sv) in &spin {
        for &(xi, xj, xv) in &mx {
            let sxv = sv * xv;
            for &(yi, yj, yv) in &my {
                let row = layout.index(BasisIndex { spin: si, fock: [xi, yi] });
                let col = layout.index(BasisIndex { spin: sj, fock: [xj, yj] });
                triplets.push((row, col, sxv * yv));
            }
        }
    }
    OperatorMatrix::from_triplets(layout, triplets, hermitian)
}

/// Entries of J_+ on the spin factor, indexed by s = j - m.
fn raising_entries(spin_count: usize) -> Entries {
    let j = spin_count as f64 / 2.0;
    (1..=spin_count)
        .map(|s| {
            // |j, m> with m = j - s goes to |j, m + 1> at index s - 1.
            let m = j - s as f64;
            (s - 1, s, re((j * (j + 1.0) - m * (m + 1.0)).sqrt()))
        })
        .collect()
}

pub(crate) fn spin_factor_entries(spin_count: usize, axis: SpinAxis) -> Entries {
    let j = spin_count as f64 / 2.0;
    let up = raising_entries(spin_count);
    match axis {
        SpinAxis::Z => (0..=spin_count).map(|s| (s, s, re(j - s as f64))).collect(),
        SpinAxis::X => up
            .iter()
            .flat_map(|&(r, c, v)| [(r, c, v * 0.5), (c, r, v * 0.5)])
            .collect(),
        // (J+ - J-) / 2i
        SpinAxis::Y => up
            .iter()
            .flat_map(|&(r, c, v)| [(r, c, v * Complex64::new(0.0, -0.5)), (c, r, v * Complex64::new(0.0, 0.5))])
            .collect(),
    }
}

fn boson_factor_entries(cutoff: usize, which: BosonOp) -> Entries {
    let lower = (1..=cutoff).map(|n| (n - 1, n, re((n as f64).sqrt())));
    match which {
        BosonOp::Annihilate => lower.collect(),
        BosonOp::Create => lower.map(|(r, c, v)| (c, r, v)).collect(),
        BosonOp::Number => (0..=cutoff).map(|n| (n, n, re(n as f64))).collect(),
        BosonOp::PositionSum => lower.flat_map(|(r, c, v)| [(r, c, v), (c, r, v)]).collect(),
    }
}

/// Collective spin operator J_axis ⊗ identity on the boson factors.
pub fn collective_spin_op(layout: &SpaceLayout, axis: SpinAxis) -> OperatorMatrix {
    embed(layout, Some(spin_factor_entries(layout.spin_count(), axis)), [None, None], true)
}

/// J^2 = J_x^2 + J_y^2 + J_z^2.
pub fn spin_squared(layout: &SpaceLayout) -> OperatorMatrix {
    let ops = [SpinAxis::X, SpinAxis::Y, SpinAxis::Z].map(|a| collective_spin_op(layout, a));
    let mut total = OperatorMatrix::zeros(layout);
    for op in &ops {
        total = &total + &(op * op);
    }
    total
}

/// Truncated boson operator on `mode`.
pub fn boson_op(layout: &SpaceLayout, mode: Mode, which: BosonOp) -> Result<OperatorMatrix> {
    let cutoff = layout.cutoff(mode)?;
    let mut factors = [None, None];
    factors[mode.slot()] = Some(boson_factor_entries(cutoff, which));
    let hermitian = matches!(which, BosonOp::Number | BosonOp::PositionSum);
    Ok(embed(layout, None, factors, hermitian))
}

/// Spin parity ⊗σ_z, which on the Dicke sector is diag((-1)^(j-m)).
pub fn spin_parity_op(layout: &SpaceLayout) -> OperatorMatrix {
    let entries = (0..layout.spin_dim())
        .map(|s| (s, s, re(if s % 2 == 0 { 1.0 } else { -1.0 })))
        .collect();
    embed(layout, Some(entries), [None, None], true)
}

/// Boson parity (-1)^(n_x + n_y).
pub fn boson_parity_op(layout: &SpaceLayout) -> OperatorMatrix {
    OperatorMatrix::diagonal_from(layout, |i| {
        let at = layout.decompose(i);
        if (at.fock[0] + at.fock[1]) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    })
}

/// Total parity Π = Π_s ⊗ Π_b.
pub fn total_parity_op(layout: &SpaceLayout) -> OperatorMatrix {
    OperatorMatrix::diagonal_from(layout, |i| {
        let at = layout.decompose(i);
        if (at.spin + at.fock[0] + at.fock[1]) % 2 == 0 {
            1.0
        } else {
            -1.0
        }
    })
}

/// Projector onto the `levels` highest Fock states of `mode`.
pub fn fock_edge_projector(layout: &SpaceLayout, mode: Mode, levels: usize) -> Result<OperatorMatrix> {
    let cutoff = layout.cutoff(mode)?;
    let first = (cutoff + 1).saturating_sub(levels);
    Ok(OperatorMatrix::diagonal_from(layout, |i| {
        if layout.decompose(i).fock[mode.slot()] >= first {
            1.0
        } else {
            0.0
        }
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn i() -> Complex64 {
        Complex64::new(0.0, 1.0)
    }

    #[test]
    fn single_spin_is_half_pauli() {
        let l = SpaceLayout::spin_only(1);
        let jz = collective_spin_op(&l, SpinAxis::Z).to_dense();
        assert_eq!(jz[(0, 0)], re(0.5));
        assert_eq!(jz[(1, 1)], re(-0.5));
        let jx = collective_spin_op(&l, SpinAxis::X).to_dense();
        assert_eq!(jx[(0, 1)], re(0.5));
        let jy = collective_spin_op(&l, SpinAxis::Y).to_dense();
        assert_eq!(jy[(0, 1)], Complex64::new(0.0, -0.5));
    }

    #[test]
    fn spin_one_ladder_elements() {
        let jx = collective_spin_op(&SpaceLayout::spin_only(2), SpinAxis::X).to_dense();
        let h = 1.0 / 2f64.sqrt();
        assert_relative_eq!(jx[(0, 1)].re, h, max_relative = 1e-15);
        assert_relative_eq!(jx[(1, 2)].re, h, max_relative = 1e-15);
        assert_relative_eq!(jx[(1, 0)].re, h, max_relative = 1e-15);
        assert_eq!(jx[(0, 2)], re(0.0));
    }

    #[test]
    fn annihilation_entries() {
        let l = SpaceLayout::new(0, &[2]).unwrap();
        let a = boson_op(&l, Mode::X, BosonOp::Annihilate).unwrap().to_dense();
        let mut expected = nalgebra::DMatrix::<Complex64>::zeros(3, 3);
        expected[(0, 1)] = re(1.0);
        expected[(1, 2)] = re(2f64.sqrt());
        assert_eq!(a, expected);
    }

    #[test]
    fn number_and_truncated_ccr() {
        let l = SpaceLayout::new(1, &[6, 3]).unwrap();
        for mode in [Mode::X, Mode::Y] {
            let cutoff = l.cutoff(mode).unwrap();
            let a = boson_op(&l, mode, BosonOp::Annihilate).unwrap();
            let ad = boson_op(&l, mode, BosonOp::Create).unwrap();
            let n = boson_op(&l, mode, BosonOp::Number).unwrap();
            assert!(n.max_abs_diff(&(&ad * &a)) < 1e-14);
            let x = boson_op(&l, mode, BosonOp::PositionSum).unwrap();
            assert!(x.max_abs_diff(&(&ad + &a)) < 1e-14);
            let comm = a.commutator(&ad);
            for idx in 0..l.total_dim() {
                let at = l.decompose(idx);
                let occ = at.fock[mode.slot()];
                assert_eq!(n.get(idx, idx), re(occ as f64));
                if occ < cutoff {
                    assert!((comm.get(idx, idx) - re(1.0)).norm() < 1e-14);
                }
            }
        }
        assert!(boson_op(&SpaceLayout::new(1, &[3]).unwrap(), Mode::Y, BosonOp::Number).is_err());
    }

    #[test]
    fn spin_ops_are_identity_on_bosons() {
        let full = SpaceLayout::new(3, &[2, 1]).unwrap();
        let bare = SpaceLayout::spin_only(3);
        for axis in [SpinAxis::X, SpinAxis::Y, SpinAxis::Z] {
            let big = collective_spin_op(&full, axis);
            let small = collective_spin_op(&bare, axis);
            for r in 0..full.total_dim() {
                for c in 0..full.total_dim() {
                    let (ar, ac) = (full.decompose(r), full.decompose(c));
                    let expected = if ar.fock == ac.fock { small.get(ar.spin, ac.spin) } else { re(0.0) };
                    assert_eq!(big.get(r, c), expected);
                }
            }
        }
    }

    #[test]
    fn parity_is_involution_and_flips_transverse_spin() {
        let l = SpaceLayout::new(4, &[3, 2]).unwrap();
        let p = total_parity_op(&l);
        assert!((&p * &p).max_abs_diff(&OperatorMatrix::identity(&l)) < 1e-12);
        let ps = spin_parity_op(&l);
        let pb = boson_parity_op(&l);
        assert!((&ps * &pb).max_abs_diff(&p) < 1e-15);
        for axis in [SpinAxis::X, SpinAxis::Y] {
            let j = collective_spin_op(&l, axis);
            assert!((&(&ps * &j) * &ps).max_abs_diff(&j.scale(-1.0)) < 1e-14);
        }
        let a = boson_op(&l, Mode::X, BosonOp::Annihilate).unwrap();
        assert!((&(&pb * &a) * &pb).max_abs_diff(&a.scale(-1.0)) < 1e-14);
    }

    proptest! {
        #[test]
        fn su2_algebra(n in 0usize..12, cutoff in 1usize..3) {
            let l = SpaceLayout::new(n, &[cutoff]).unwrap();
            let [jx, jy, jz] = [SpinAxis::X, SpinAxis::Y, SpinAxis::Z].map(|a| collective_spin_op(&l, a));
            prop_assert!(jx.commutator(&jy).max_abs_diff(&jz.scale(i())) < 1e-10);
            prop_assert!(jy.commutator(&jz).max_abs_diff(&jx.scale(i())) < 1e-10);
            prop_assert!(jz.commutator(&jx).max_abs_diff(&jy.scale(i())) < 1e-10);
            let j = l.j();
            let casimir = OperatorMatrix::identity(&l).scale(j * (j + 1.0));
            prop_assert!(spin_squared(&l).max_abs_diff(&casimir) < 1e-10);
            for op in [&jx, &jy, &jz] {
                prop_assert!(op.hermiticity_error() < 1e-15);
            }
        }
    }
}
