//! Run configuration: a TOML file with one table per concern, overlaid by
//! command-line flags, resolved into a validated [`ProtocolSpec`].

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;
use spinforge::evolve::NoiseParams;
use spinforge::quantum::BosonInit;
use spinforge::sensing::{ModelFidelity, ProtocolKind, ProtocolSpec, SweepAxis, SweepOptions};
use spinforge::units::{parse_quantity, Dimension};
use spinforge::ModelParams;

use crate::error::{CliError, CliResult};

/// A number in internal units or a string with a unit suffix.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum Quantity {
    Number(f64),
    Text(String),
}

impl Quantity {
    fn resolve(&self, key: &str, dim: Option<Dimension>) -> CliResult<f64> {
        match (self, dim) {
            (Quantity::Number(v), _) => Ok(*v),
            (Quantity::Text(t), Some(d)) => parse_quantity(t, d).map_err(|e| CliError::config(key, reason(e))),
            (Quantity::Text(t), None) => t
                .trim()
                .parse()
                .map_err(|_| CliError::config(key, format!("`{t}` is not a number (this key takes no unit)"))),
        }
    }
}

fn reason(e: spinforge::Error) -> String {
    match e {
        spinforge::Error::InvalidParameter { reason, .. } => reason,
        other => other.to_string(),
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawProtocol {
    pub kind: Option<String>,
    pub model: Option<String>,
    pub theta: Option<f64>,
    pub evolve_time: Option<Quantity>,
    pub total_time: Option<Quantity>,
    /// Initial thermal occupation of every phonon mode; 0 is the vacuum.
    pub nbar: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawParams {
    pub spin_count: Option<i64>,
    pub g_x: Option<Quantity>,
    pub g_y: Option<Quantity>,
    pub delta_x: Option<Quantity>,
    pub delta_y: Option<Quantity>,
    pub big_delta: Option<Quantity>,
    pub f_dx: Option<Quantity>,
    pub f_dy: Option<Quantity>,
    pub r0_x: Option<Quantity>,
    pub r0_y: Option<Quantity>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawNoise {
    /// ⟨ṅ⟩ in 1/ms.
    pub heating_rate: Option<f64>,
    pub nbar_res: Option<f64>,
    /// Reservoir coupling in 1/ms; alternative to `heating_rate`.
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGrid {
    pub points: Option<i64>,
    pub window_end: Option<Quantity>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawNumerics {
    pub tol: Option<f64>,
    pub cutoff: Option<i64>,
    pub escalate: Option<bool>,
    pub max_cutoff: Option<i64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSweep {
    pub axis: Option<String>,
    pub values: Option<Vec<Quantity>>,
    pub search_min_force: Option<bool>,
    pub snr_target: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOutput {
    pub dir: Option<PathBuf>,
}

/// The file as written, before defaults and validation.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    #[serde(default)]
    pub protocol: RawProtocol,
    #[serde(default)]
    pub params: RawParams,
    #[serde(default)]
    pub noise: RawNoise,
    #[serde(default)]
    pub grid: RawGrid,
    #[serde(default)]
    pub numerics: RawNumerics,
    #[serde(default)]
    pub sweep: RawSweep,
    #[serde(default)]
    pub output: RawOutput,
}

impl RawConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().to_owned();
            // toml reports unknown fields by name; the section comes from the span
            let key = e
                .span()
                .and_then(|s| text.get(s))
                .map(|k| k.trim().to_owned())
                .filter(|k| !k.is_empty())
                .unwrap_or_else(|| "config".into());
            CliError::config(key, msg)
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("--config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }
}

/// Flags mirroring the config keys; every flag wins over the file.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML run configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// weak_css, ghz_parity or strong_phonon.
    #[arg(long)]
    pub protocol: Option<String>,
    /// full or effective.
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long = "spin-count", visible_alias = "N")]
    pub spin_count: Option<i64>,
    #[arg(long = "g-x", visible_alias = "g")]
    pub g_x: Option<String>,
    #[arg(long = "g-y")]
    pub g_y: Option<String>,
    #[arg(long = "delta-x", visible_alias = "delta")]
    pub delta_x: Option<String>,
    #[arg(long = "delta-y")]
    pub delta_y: Option<String>,
    /// Spin frequency Δ.
    #[arg(long = "big-delta", visible_alias = "Delta")]
    pub big_delta: Option<String>,
    /// Force amplitude along x.
    #[arg(long = "f-dx", visible_alias = "force", allow_hyphen_values = true)]
    pub f_dx: Option<String>,
    #[arg(long = "f-dy", allow_hyphen_values = true)]
    pub f_dy: Option<String>,
    #[arg(long = "r0-x", visible_alias = "r0")]
    pub r0_x: Option<String>,
    #[arg(long = "r0-y")]
    pub r0_y: Option<String>,
    /// Polar angle of the initial coherent spin state, rad.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Readout time.
    #[arg(long = "evolve-time", visible_alias = "t")]
    pub evolve_time: Option<String>,
    #[arg(long = "total-time")]
    pub total_time: Option<String>,
    /// Initial thermal phonon occupation.
    #[arg(long)]
    pub nbar: Option<f64>,
    /// ⟨ṅ⟩ in 1/ms.
    #[arg(long = "heating-rate")]
    pub heating_rate: Option<f64>,
    #[arg(long = "nbar-res")]
    pub nbar_res: Option<f64>,
    #[arg(long)]
    pub points: Option<i64>,
    #[arg(long = "window-end")]
    pub window_end: Option<String>,
    #[arg(long)]
    pub tol: Option<f64>,
    /// Starting Fock cutoff.
    #[arg(long)]
    pub cutoff: Option<i64>,
    #[arg(long = "max-cutoff")]
    pub max_cutoff: Option<i64>,
    /// Keep the starting cutoff even if the edge population grows.
    #[arg(long = "no-escalation")]
    pub no_escalation: bool,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn text(v: &Option<String>) -> Option<Quantity> {
    v.clone().map(Quantity::Text)
}

impl ConfigArgs {
    /// The file named by `--config` (if any) with the flags laid over it.
    pub fn merged(&self) -> CliResult<RawConfig> {
        let mut raw = match &self.config {
            Some(path) => RawConfig::load(path)?,
            None => RawConfig::default(),
        };
        let pr = &mut raw.protocol;
        overlay(&mut pr.kind, self.protocol.clone());
        overlay(&mut pr.model, self.model.clone());
        overlay(&mut pr.theta, self.theta);
        overlay(&mut pr.evolve_time, text(&self.evolve_time));
        overlay(&mut pr.total_time, text(&self.total_time));
        overlay(&mut pr.nbar, self.nbar);
        let p = &mut raw.params;
        overlay(&mut p.spin_count, self.spin_count);
        overlay(&mut p.g_x, text(&self.g_x));
        overlay(&mut p.g_y, text(&self.g_y));
        overlay(&mut p.delta_x, text(&self.delta_x));
        overlay(&mut p.delta_y, text(&self.delta_y));
        overlay(&mut p.big_delta, text(&self.big_delta));
        overlay(&mut p.f_dx, text(&self.f_dx));
        overlay(&mut p.f_dy, text(&self.f_dy));
        overlay(&mut p.r0_x, text(&self.r0_x));
        overlay(&mut p.r0_y, text(&self.r0_y));
        overlay(&mut raw.noise.heating_rate, self.heating_rate);
        overlay(&mut raw.noise.nbar_res, self.nbar_res);
        overlay(&mut raw.grid.points, self.points);
        overlay(&mut raw.grid.window_end, text(&self.window_end));
        overlay(&mut raw.numerics.tol, self.tol);
        overlay(&mut raw.numerics.cutoff, self.cutoff);
        overlay(&mut raw.numerics.max_cutoff, self.max_cutoff);
        if self.no_escalation {
            raw.numerics.escalate = Some(false);
        }
        overlay(&mut raw.output.dir, self.out.clone());
        Ok(raw)
    }
}

fn overlay<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

/// A sweep request resolved from `[sweep]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPlan {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub options: SweepOptions,
}

/// Fully validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub spec: ProtocolSpec,
    pub out_dir: PathBuf,
    pub sweep: Option<SweepPlan>,
}

fn quantity(slot: &Option<Quantity>, key: &str, dim: Option<Dimension>) -> CliResult<Option<f64>> {
    slot.as_ref().map(|q| q.resolve(key, dim)).transpose()
}

fn count(slot: Option<i64>, key: &str, min: i64) -> CliResult<Option<usize>> {
    match slot {
        Some(v) if v < min => Err(CliError::config(key, format!("must be at least {min}, got {v}"))),
        Some(v) => Ok(Some(v as usize)),
        None => Ok(None),
    }
}

/// Physical dimension of the values along a sweep axis.
pub fn axis_dimension(axis: SweepAxis) -> Option<Dimension> {
    use SweepAxis::*;
    match axis {
        GX | GY | DeltaX | DeltaY | BigDelta => Some(Dimension::AngularRate),
        FDx | FDy => Some(Dimension::Force),
        R0X => Some(Dimension::Length),
        EvolveTime | TotalTime => Some(Dimension::Time),
        SpinCount | HeatingRate | NbarRes | Theta => None,
    }
}

impl RunConfig {
    /// Applies defaults and validates everything; nothing is computed
    /// before this succeeds.
    pub fn resolve(raw: &RawConfig) -> CliResult<Self> {
        let pr = &raw.protocol;
        let kind: ProtocolKind = pr
            .kind
            .as_deref()
            .ok_or_else(|| CliError::config("protocol.kind", "missing (weak_css, ghz_parity, strong_phonon)"))?
            .parse()
            .map_err(|e| CliError::config("protocol.kind", reason(e)))?;

        let rp = &raw.params;
        let rate = Some(Dimension::AngularRate);
        let mut params = ModelParams::default();
        if let Some(n) = count(rp.spin_count, "params.spin_count", 1)? {
            params.spin_count = n;
        }
        let fields: [(&Option<Quantity>, &str, Option<Dimension>, &mut f64); 9] = [
            (&rp.g_x, "params.g_x", rate, &mut params.g_x),
            (&rp.g_y, "params.g_y", rate, &mut params.g_y),
            (&rp.delta_x, "params.delta_x", rate, &mut params.delta_x),
            (&rp.delta_y, "params.delta_y", rate, &mut params.delta_y),
            (&rp.big_delta, "params.big_delta", rate, &mut params.big_delta),
            (&rp.f_dx, "params.f_dx", Some(Dimension::Force), &mut params.f_dx),
            (&rp.f_dy, "params.f_dy", Some(Dimension::Force), &mut params.f_dy),
            (&rp.r0_x, "params.r0_x", Some(Dimension::Length), &mut params.r0_x),
            (&rp.r0_y, "params.r0_y", Some(Dimension::Length), &mut params.r0_y),
        ];
        for (slot, key, dim, target) in fields {
            if let Some(v) = quantity(slot, key, dim)? {
                *target = v;
            }
        }

        let mut spec = ProtocolSpec::new(kind, params);
        if let Some(m) = &pr.model {
            spec.model_fidelity = m.parse::<ModelFidelity>().map_err(|e| CliError::config("protocol.model", reason(e)))?;
        }
        if let Some(theta) = pr.theta {
            spec.theta = theta;
        }
        let time = Some(Dimension::Time);
        spec.evolve_time = quantity(&pr.evolve_time, "protocol.evolve_time", time)?;
        spec.total_time = quantity(&pr.total_time, "protocol.total_time", time)?;
        match pr.nbar {
            Some(n) if n < 0.0 || !n.is_finite() => {
                return Err(CliError::config("protocol.nbar", format!("must be >= 0, got {n}")))
            }
            Some(n) if n > 0.0 => spec.initial_boson = BosonInit::Thermal(n),
            _ => {}
        }

        spec.noise = resolve_noise(&raw.noise)?;
        if let Some(points) = count(raw.grid.points, "grid.points", 2)? {
            spec.grid.points = points;
        }
        spec.grid.window_end = quantity(&raw.grid.window_end, "grid.window_end", time)?;
        let num = &raw.numerics;
        if let Some(tol) = num.tol {
            if !(tol > 0.0 && tol.is_finite()) {
                return Err(CliError::config("numerics.tol", format!("must be positive, got {tol}")));
            }
            spec.numerics.tol = tol;
        }
        spec.numerics.cutoff = count(num.cutoff, "numerics.cutoff", 1)?;
        if let Some(limit) = count(num.max_cutoff, "numerics.max_cutoff", 1)? {
            spec.numerics.cutoff_policy.max_cutoff = limit;
        }
        if let Some(on) = num.escalate {
            spec.numerics.cutoff_policy.enabled = on;
        }

        let sweep = resolve_sweep(&raw.sweep)?;
        match &sweep {
            // the first point stands in for the template, which may leave the
            // swept knob unset
            Some(plan) if !plan.values.is_empty() => plan.axis.apply(&spec, plan.values[0])?.validate()?,
            _ => spec.validate()?,
        }
        Ok(RunConfig {
            spec,
            out_dir: raw.output.dir.clone().unwrap_or_else(|| PathBuf::from(".")),
            sweep,
        })
    }
}

fn resolve_noise(raw: &RawNoise) -> CliResult<Option<NoiseParams>> {
    let nbar = raw.nbar_res;
    if let Some(n) = nbar {
        if !(n.is_finite() && n >= 0.0) {
            return Err(CliError::config("noise.nbar_res", format!("must be >= 0, got {n}")));
        }
    }
    let noise = match (raw.heating_rate, raw.gamma) {
        (Some(_), Some(_)) => {
            return Err(CliError::config("noise.gamma", "give either heating_rate or gamma, not both"));
        }
        (Some(rate), None) => {
            if !(rate.is_finite() && rate >= 0.0) {
                return Err(CliError::config("noise.heating_rate", format!("must be >= 0, got {rate}")));
            }
            Some(
                NoiseParams::from_heating_rate(rate, nbar.unwrap_or(NoiseParams::DEFAULT_NBAR))
                    .map_err(|e| CliError::config("noise.nbar_res", reason(e)))?,
            )
        }
        (None, Some(gamma)) => {
            Some(NoiseParams::new(gamma, nbar.unwrap_or(0.0)).map_err(|e| CliError::config("noise.gamma", reason(e)))?)
        }
        (None, None) => nbar.map(|n| NoiseParams { gamma_dec: 0.0, nbar_res: n }),
    };
    Ok(noise)
}

fn resolve_sweep(raw: &RawSweep) -> CliResult<Option<SweepPlan>> {
    let Some(name) = &raw.axis else {
        if raw.values.is_some() {
            return Err(CliError::config("sweep.axis", "missing; values need an axis"));
        }
        return Ok(None);
    };
    let axis: SweepAxis = name.parse().map_err(|e| CliError::config("sweep.axis", reason(e)))?;
    let values = raw
        .values
        .as_ref()
        .ok_or_else(|| CliError::config("sweep.values", "missing"))?
        .iter()
        .map(|q| q.resolve("sweep.values", axis_dimension(axis)))
        .collect::<CliResult<Vec<f64>>>()?;
    if values.is_empty() {
        return Err(CliError::config("sweep.values", "empty"));
    }
    let mut options = SweepOptions::default();
    if let Some(s) = raw.search_min_force {
        options.search_min_force = s;
    }
    if let Some(target) = raw.snr_target {
        if !(target.is_finite() && target > 0.0) {
            return Err(CliError::config("sweep.snr_target", format!("must be positive, got {target}")));
        }
        options.snr_target = target;
    }
    Ok(Some(SweepPlan { axis, values, options }))
}

/// Splits a comma-separated flag value into quantities.
pub fn split_values(list: &str) -> Vec<Quantity> {
    list.split(',').map(|s| Quantity::Text(s.trim().to_owned())).collect()
}
