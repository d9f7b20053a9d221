use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run, search_min_force, ProtocolSpec, SensingReport};
use crate::error::{Error, Result};
use crate::evolve::NoiseParams;

/// Caps the number of sweep worker threads.
pub const THREADS_ENV: &str = "SPINFORGE_THREADS";

/// A scalar knob of [`ProtocolSpec`] that a sweep can vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    GX,
    GY,
    DeltaX,
    DeltaY,
    BigDelta,
    FDx,
    FDy,
    R0X,
    SpinCount,
    /// ⟨ṅ⟩ in 1/ms; keeps the reservoir occupation of the template (or the
    /// default one).
    HeatingRate,
    /// Reservoir occupation at fixed heating rate.
    NbarRes,
    EvolveTime,
    TotalTime,
    Theta,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 14] = [
        SweepAxis::GX,
        SweepAxis::GY,
        SweepAxis::DeltaX,
        SweepAxis::DeltaY,
        SweepAxis::BigDelta,
        SweepAxis::FDx,
        SweepAxis::FDy,
        SweepAxis::R0X,
        SweepAxis::SpinCount,
        SweepAxis::HeatingRate,
        SweepAxis::NbarRes,
        SweepAxis::EvolveTime,
        SweepAxis::TotalTime,
        SweepAxis::Theta,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::GX => "g_x",
            SweepAxis::GY => "g_y",
            SweepAxis::DeltaX => "delta_x",
            SweepAxis::DeltaY => "delta_y",
            SweepAxis::BigDelta => "big_delta",
            SweepAxis::FDx => "f_dx",
            SweepAxis::FDy => "f_dy",
            SweepAxis::R0X => "r0_x",
            SweepAxis::SpinCount => "spin_count",
            SweepAxis::HeatingRate => "heating_rate",
            SweepAxis::NbarRes => "nbar_res",
            SweepAxis::EvolveTime => "evolve_time",
            SweepAxis::TotalTime => "total_time",
            SweepAxis::Theta => "theta",
        }
    }

    /// Copy of `template` with this knob set to `value`.
    pub fn apply(self, template: &ProtocolSpec, value: f64) -> Result<ProtocolSpec> {
        if !value.is_finite() {
            return Err(Error::param(self.name(), format!("sweep value {value} is not finite")));
        }
        let mut s = template.clone();
        let p = &mut s.params;
        match self {
            SweepAxis::GX => p.g_x = value,
            SweepAxis::GY => p.g_y = value,
            SweepAxis::DeltaX => p.delta_x = value,
            SweepAxis::DeltaY => p.delta_y = value,
            SweepAxis::BigDelta => p.big_delta = value,
            SweepAxis::FDx => p.f_dx = value,
            SweepAxis::FDy => p.f_dy = value,
            SweepAxis::R0X => p.r0_x = value,
            SweepAxis::SpinCount => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::param("spin_count", format!("{value} is not a positive integer")));
                }
                p.spin_count = value as usize;
            }
            SweepAxis::HeatingRate => {
                let nbar = template.noise.map_or(NoiseParams::DEFAULT_NBAR, |n| {
                    if n.nbar_res > 0.0 {
                        n.nbar_res
                    } else {
                        NoiseParams::DEFAULT_NBAR
                    }
                });
                s.noise = Some(NoiseParams::from_heating_rate(value, nbar)?);
            }
            SweepAxis::NbarRes => {
                let rate = template.noise.map_or(0.0, |n| n.heating_rate());
                s.noise = Some(NoiseParams::from_heating_rate(rate, value)?);
            }
            SweepAxis::EvolveTime => s.evolve_time = Some(value),
            SweepAxis::TotalTime => s.total_time = Some(value),
            SweepAxis::Theta => s.theta = value,
        }
        Ok(s)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepAxis::ALL.into_iter().find(|a| a.name() == s).ok_or_else(|| {
            let names: Vec<&str> = SweepAxis::ALL.iter().map(|a| a.name()).collect();
            Error::param("axis", format!("unknown sweep axis `{s}` ({})", names.join(", ")))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    /// Also run the minimal-force search at every point.
    pub search_min_force: bool,
    pub snr_target: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            search_min_force: false,
            snr_target: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub outcome: Result<SensingReport>,
}

/// Independent runs over `values`, in input order; a failing point records
/// its error and the sweep continues.
pub fn sweep(axis: SweepAxis, values: &[f64], template: &ProtocolSpec, options: &SweepOptions) -> Result<Vec<SweepPoint>> {
    sweep_with_progress(axis, values, template, options, |_, _| {})
}

/// [`sweep`] calling `progress(done, total)` as points finish.
pub fn sweep_with_progress(
    axis: SweepAxis,
    values: &[f64],
    template: &ProtocolSpec,
    options: &SweepOptions,
    progress: impl Fn(usize, usize) + Sync,
) -> Result<Vec<SweepPoint>> {
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::param(axis.name(), format!("sweep value {v} is not finite")));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_cap() {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Numeric(format!("cannot start sweep threads: {e}")))?;
    let done = AtomicUsize::new(0);
    let total = values.len();
    let points = pool.install(|| {
        values
            .par_iter()
            .map(|&value| {
                let outcome = run_point(axis, value, template, options);
                if let Err(e) = &outcome {
                    log::warn!("{axis} = {value}: {e}");
                }
                progress(done.fetch_add(1, Ordering::SeqCst) + 1, total);
                SweepPoint { value, outcome }
            })
            .collect()
    });
    Ok(points)
}

fn run_point(axis: SweepAxis, value: f64, template: &ProtocolSpec, options: &SweepOptions) -> Result<SensingReport> {
    let spec = axis.apply(template, value)?;
    let mut report = run(&spec)?;
    if options.search_min_force {
        report.min_force = Some(search_min_force(&spec, options.snr_target)?);
    }
    Ok(report)
}

fn thread_cap() -> Option<usize> {
    let raw = std::env::var(THREADS_ENV).ok()?;
    match raw.trim().parse::<usize>() {
        Ok(n) if n > 0 => Some(n),
        _ => {
            log::warn!("ignoring {THREADS_ENV}={raw}: expected a positive integer");
            None
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelParams;
    use crate::sensing::{ModelFidelity, ProtocolKind};

    fn template() -> ProtocolSpec {
        let mut s = ProtocolSpec::new(
            ProtocolKind::StrongPhonon,
            ModelParams {
                spin_count: 1,
                g_x: 2.5,
                delta_x: 0.14,
                big_delta: 270.0,
                f_dx: 1e-25,
                ..Default::default()
            },
        );
        s.model_fidelity = ModelFidelity::Effective;
        s.grid.points = 50;
        s
    }

    #[test]
    fn axis_names_round_trip() {
        for a in SweepAxis::ALL {
            assert_eq!(a.name().parse::<SweepAxis>().unwrap(), a);
        }
        assert!("gx".parse::<SweepAxis>().is_err());
    }

    #[test]
    fn single_value_equals_direct_run() {
        let t = template();
        let points = sweep(SweepAxis::GX, &[2.0], &t, &SweepOptions::default()).unwrap();
        let direct = run(&SweepAxis::GX.apply(&t, 2.0).unwrap()).unwrap();
        assert_eq!(points[0].outcome.as_ref().unwrap(), &direct);
    }

    #[test]
    fn keeps_order_and_isolates_failures() {
        let t = template();
        // g_x = 5 makes λ² exceed one
        let values = [0.5, 5.0, 1.0, 2.0];
        let points = sweep(SweepAxis::GX, &values, &t, &SweepOptions::default()).unwrap();
        let got: Vec<f64> = points.iter().map(|p| p.value).collect();
        assert_eq!(got, values);
        assert!(points[1].outcome.is_err());
        assert!(points.iter().enumerate().all(|(k, p)| k == 1 || p.outcome.is_ok()));
    }

    #[test]
    fn heating_axis_uses_default_split() {
        let s = SweepAxis::HeatingRate.apply(&template(), 0.05).unwrap();
        let noise = s.noise.unwrap();
        assert_eq!(noise.nbar_res, NoiseParams::DEFAULT_NBAR);
        assert!((noise.heating_rate() - 0.05).abs() < 1e-15);
        let s2 = SweepAxis::NbarRes.apply(&s, 40.0).unwrap();
        assert!((s2.noise.unwrap().heating_rate() - 0.05).abs() < 1e-15);
        assert!(SweepAxis::SpinCount.apply(&s, 2.5).is_err());
        assert!(sweep(SweepAxis::GX, &[f64::NAN], &s, &SweepOptions::default()).is_err());
    }
}
