use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One of the two transverse center-of-mass modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    X,
    Y,
}

impl Mode {
    pub fn slot(self) -> usize {
        match self {
            Mode::X => 0,
            Mode::Y => 1,
        }
    }

    pub fn label(self) -> char {
        match self {
            Mode::X => 'x',
            Mode::Y => 'y',
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label())
    }
}

/// Composition of the Hilbert space: the symmetric Dicke sector of
/// `spin_count` two-level ions (dimension N+1) times up to two truncated
/// Fock spaces.
///
/// Basis ordering is spin ⊗ mode_x ⊗ mode_y, with the spin factor indexed
/// by `s = j - m` so that index 0 is |j, j⟩.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceLayout {
    spin_count: usize,
    fock_cutoffs: Vec<usize>,
}

/// Decomposed basis index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisIndex {
    /// `j - m`, in `0..=N`.
    pub spin: usize,
    /// Occupation numbers; unused modes read 0.
    pub fock: [usize; 2],
}

impl SpaceLayout {
    pub fn new(spin_count: usize, fock_cutoffs: &[usize]) -> Result<Self> {
        if fock_cutoffs.len() > 2 {
            return Err(Error::Layout(format!(
                "at most two boson modes (x, y) are supported, got {}",
                fock_cutoffs.len()
            )));
        }
        if let Some(pos) = fock_cutoffs.iter().position(|&c| c == 0) {
            return Err(Error::Layout(format!("Fock cutoff of mode {pos} must be at least 1")));
        }
        let layout = SpaceLayout {
            spin_count,
            fock_cutoffs: fock_cutoffs.to_vec(),
        };
        layout
            .spin_dim()
            .checked_mul(layout.fock_cutoffs.iter().map(|c| c + 1).product())
            .ok_or_else(|| Error::Layout("total dimension overflows".into()))?;
        Ok(layout)
    }

    /// Spin-only layout.
    pub fn spin_only(spin_count: usize) -> Self {
        SpaceLayout {
            spin_count,
            fock_cutoffs: Vec::new(),
        }
    }

    pub fn spin_count(&self) -> usize {
        self.spin_count
    }

    /// Total angular momentum j = N/2.
    pub fn j(&self) -> f64 {
        self.spin_count as f64 / 2.0
    }

    pub fn spin_dim(&self) -> usize {
        self.spin_count + 1
    }

    pub fn fock_cutoffs(&self) -> &[usize] {
        &self.fock_cutoffs
    }

    pub fn mode_count(&self) -> usize {
        self.fock_cutoffs.len()
    }

    pub fn has_mode(&self, mode: Mode) -> bool {
        mode.slot() < self.fock_cutoffs.len()
    }

    pub fn cutoff(&self, mode: Mode) -> Result<usize> {
        self.fock_cutoffs
            .get(mode.slot())
            .copied()
            .ok_or_else(|| Error::Layout(format!("layout has no mode {mode}")))
    }

    /// Dimension of each mode factor, padded with 1 for missing modes.
    pub fn mode_dims(&self) -> [usize; 2] {
        let mut dims = [1, 1];
        for (d, c) in dims.iter_mut().zip(&self.fock_cutoffs) {
            *d = c + 1;
        }
        dims
    }

    pub fn total_dim(&self) -> usize {
        let [dx, dy] = self.mode_dims();
        self.spin_dim() * dx * dy
    }

    pub fn index(&self, at: BasisIndex) -> usize {
        let [dx, dy] = self.mode_dims();
        debug_assert!(at.spin < self.spin_dim() && at.fock[0] < dx && at.fock[1] < dy);
        (at.spin * dx + at.fock[0]) * dy + at.fock[1]
    }

    pub fn decompose(&self, index: usize) -> BasisIndex {
        let [dx, dy] = self.mode_dims();
        BasisIndex {
            spin: index / (dx * dy),
            fock: [(index / dy) % dx, index % dy],
        }
    }

    /// Same spin sector with one mode's cutoff replaced.
    pub fn with_cutoff(&self, mode: Mode, cutoff: usize) -> Result<Self> {
        let mut cutoffs = self.fock_cutoffs.clone();
        match cutoffs.get_mut(mode.slot()) {
            Some(c) => *c = cutoff,
            None => return Err(Error::Layout(format!("layout has no mode {mode}"))),
        }
        SpaceLayout::new(self.spin_count, &cutoffs)
    }

    pub(crate) fn check_same(&self, other: &SpaceLayout) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::LayoutMismatch {
                expected: self.total_dim(),
                found: other.total_dim(),
            })
        }
    }
}

impl fmt::Display for SpaceLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N={} cutoffs={:?} dim={}", self.spin_count, self.fock_cutoffs, self.total_dim())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn dimensions() {
        assert_eq!(SpaceLayout::new(1, &[15]).unwrap().total_dim(), 32);
        assert_eq!(SpaceLayout::new(8, &[14, 14]).unwrap().total_dim(), 2025);
        assert_eq!(SpaceLayout::new(6, &[]).unwrap().total_dim(), 7);
        assert_eq!(SpaceLayout::new(0, &[3]).unwrap().total_dim(), 4);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(SpaceLayout::new(2, &[3, 3, 3]).is_err());
        assert!(SpaceLayout::new(2, &[0]).is_err());
        assert!(SpaceLayout::new(2, &[4]).unwrap().cutoff(Mode::Y).is_err());
    }

    proptest! {
        #[test]
        fn index_map_round_trips(n in 0usize..10, cx in 1usize..8, cy in 1usize..8, modes in 0usize..3) {
            let cutoffs: Vec<usize> = [cx, cy].into_iter().take(modes).collect();
            let layout = SpaceLayout::new(n, &cutoffs).unwrap();
            let [dx, dy] = layout.mode_dims();
            prop_assert_eq!(layout.total_dim(), (n + 1) * dx * dy);
            for i in 0..layout.total_dim() {
                let at = layout.decompose(i);
                prop_assert!(at.spin <= n && at.fock[0] < dx && at.fock[1] < dy);
                prop_assert_eq!(layout.index(at), i);
            }
        }
    }
}
