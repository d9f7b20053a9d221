use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantum::{Mode, SpaceLayout};

/// Fock cutoff auto-escalation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CutoffPolicy {
    pub enabled: bool,
    /// Largest allowed population of the two highest Fock levels.
    pub threshold: f64,
    pub growth: f64,
    pub max_cutoff: usize,
}

impl Default for CutoffPolicy {
    fn default() -> Self {
        CutoffPolicy {
            enabled: true,
            threshold: 1e-6,
            growth: 1.5,
            max_cutoff: 160,
        }
    }
}

/// Runs `run` on `layout` and reruns it with larger cutoffs while the edge
/// population it reports exceeds the threshold. `run` returns its result
/// together with the largest edge population per mode slot.
pub fn with_cutoff_escalation<T>(
    layout: &SpaceLayout,
    policy: &CutoffPolicy,
    mut run: impl FnMut(&SpaceLayout) -> Result<(T, [f64; 2])>,
) -> Result<(T, SpaceLayout)> {
    let mut current = layout.clone();
    loop {
        let (out, edge) = run(&current)?;
        if !policy.enabled {
            return Ok((out, current));
        }
        let mut grown = current.clone();
        for mode in [Mode::X, Mode::Y] {
            if !current.has_mode(mode) || edge[mode.slot()] <= policy.threshold {
                continue;
            }
            let old = current.cutoff(mode)?;
            let new = (old as f64 * policy.growth).ceil() as usize;
            if new > policy.max_cutoff {
                return Err(Error::CutoffExceeded {
                    mode: mode.label(),
                    limit: policy.max_cutoff,
                });
            }
            log::info!("mode {mode}: edge population {:.2e}, cutoff {old} -> {new}", edge[mode.slot()]);
            grown = grown.with_cutoff(mode, new.max(old + 1))?;
        }
        if grown == current {
            return Ok((out, current));
        }
        current = grown;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{propagate_unitary, linear_grid, Observable, Recorder, TrajectoryMeta, UnitaryOptions};
    use crate::models::{build_strong_effective, ModelParams, StrongVariant};
    use crate::quantum::{boson_op, BasisIndex, BosonOp, QuantumState};
    use crate::units::YOCTONEWTON;

    fn run_fig3(layout: &SpaceLayout) -> Result<(f64, [f64; 2])> {
        let p = ModelParams {
            spin_count: 3,
            g_x: 2.5,
            delta_x: 0.5,
            big_delta: 300.0,
            f_dx: 3.0 * YOCTONEWTON,
            ..Default::default()
        };
        let h = build_strong_effective(&p, layout, StrongVariant::LowestSpinSector)?;
        let vac = QuantumState::basis(layout, BasisIndex { spin: 0, fock: [0, 0] });
        let n = Observable::new("n", boson_op(layout, Mode::X, BosonOp::Number)?);
        let mut rec = Recorder::new(vec![n])?;
        propagate_unitary(&h, &vac, &linear_grid(0.0, 14.0, 60), &UnitaryOptions::default(), |t, s| {
            rec.observe(t, s)
        })?;
        let edge = rec.max_edge_population();
        let traj = rec.finish(TrajectoryMeta::default());
        let peak = traj.get("n").unwrap().iter().cloned().fold(0.0, f64::max);
        Ok((peak, edge))
    }

    #[test]
    fn escalates_until_edge_is_empty() {
        let start = SpaceLayout::new(0, &[6]).unwrap();
        let (peak, layout) = with_cutoff_escalation(&start, &CutoffPolicy::default(), run_fig3).unwrap();
        assert!(layout.cutoff(Mode::X).unwrap() > 6);
        let (_, edge) = run_fig3(&layout).unwrap();
        assert!(edge[0] <= 1e-6);
        let (reference, _) = run_fig3(&SpaceLayout::new(0, &[60]).unwrap()).unwrap();
        assert!((peak - reference).abs() < 1e-4 * reference);
    }

    #[test]
    fn reports_exceeded_limit() {
        let start = SpaceLayout::new(0, &[6]).unwrap();
        let policy = CutoffPolicy { max_cutoff: 10, ..Default::default() };
        let err = with_cutoff_escalation(&start, &policy, run_fig3).unwrap_err();
        assert_eq!(err, Error::CutoffExceeded { mode: 'x', limit: 10 });
        let off = CutoffPolicy { enabled: false, ..policy };
        let (_, layout) = with_cutoff_escalation(&start, &off, run_fig3).unwrap();
        assert_eq!(layout, start);
    }
}
