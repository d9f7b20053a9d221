//! `spinforge analytic <formula>`: closed-form quantities from flags.

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write;

use clap::{Args, ValueEnum};
use spinforge::analytic::{
    ghz_sensitivity, min_force_harmonic, min_force_harmonic_resonant, min_force_strong, oat_signal, oat_variance,
    sql_frequency_uncertainty, strong_signal, SensitivityQuote,
};
use spinforge::models::{derive_strong, derive_weak, ModelParams, WeakDerived, DEFAULT_R0};
use spinforge::units::{parse_quantity, Dimension, XONTONEWTON, YOCTONEWTON};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Formula {
    /// Strong-coupling minimal force at SNR = 1.
    Fmin,
    /// Off-resonant harmonic oscillator, ħπ/(t r0).
    Ho,
    /// Resonantly driven harmonic oscillator, 2ħ/(t r0).
    HoResonant,
    /// GHZ parity sensitivity.
    Ghz,
    /// Standard quantum limit of the frequency uncertainty.
    Sql,
    /// Twisting signal ⟨J_z⟩ and its variance.
    Signal,
    /// Phonon mean, spread and SNR of the strong protocol.
    StrongSignal,
    /// Weak-coupling derived rates.
    Weak,
    /// Strong-coupling derived quantities.
    Strong,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyticArgs {
    #[arg(value_enum)]
    pub formula: Formula,
    #[arg(long = "N", default_value_t = 1)]
    pub spin_count: usize,
    #[arg(long = "g")]
    pub g: Option<String>,
    #[arg(long = "delta")]
    pub delta: Option<String>,
    /// Spin frequency Δ.
    #[arg(long = "Delta")]
    pub big_delta: Option<String>,
    #[arg(long = "r0")]
    pub r0: Option<String>,
    /// Evolution time.
    #[arg(long = "t")]
    pub t: Option<String>,
    /// Total measurement time; defaults to t.
    #[arg(long = "total-time")]
    pub total_time: Option<String>,
    #[arg(long = "force", allow_hyphen_values = true)]
    pub force: Option<String>,
    #[arg(long, default_value_t = FRAC_PI_2)]
    pub theta: f64,
}

/// One output line: name, value, unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub name: String,
    pub value: f64,
    pub unit: &'static str,
}

fn row(name: &str, value: f64, unit: &'static str) -> Row {
    Row {
        name: name.into(),
        value,
        unit,
    }
}

pub fn render(rows: &[Row]) -> String {
    let mut out = String::new();
    for r in rows {
        let _ = writeln!(out, "{:<22} {:>16.6e}  {}", r.name, r.value, r.unit);
    }
    out
}

impl AnalyticArgs {
    fn quantity(&self, flag: &str, slot: &Option<String>, dim: Dimension) -> CliResult<Option<f64>> {
        slot.as_deref()
            .map(|t| parse_quantity(t, dim).map_err(|e| CliError::config(flag, e.to_string())))
            .transpose()
    }

    fn required(&self, flag: &str, slot: &Option<String>, dim: Dimension) -> CliResult<f64> {
        self.quantity(flag, slot, dim)?
            .ok_or_else(|| CliError::config(flag, format!("required by `{}`", self.name())))
    }

    fn name(&self) -> String {
        self.formula.to_possible_value().map_or_else(String::new, |v| v.get_name().to_owned())
    }

    fn r0(&self) -> CliResult<f64> {
        Ok(self.quantity("--r0", &self.r0, Dimension::Length)?.unwrap_or(DEFAULT_R0))
    }

    fn time(&self) -> CliResult<f64> {
        self.required("--t", &self.t, Dimension::Time)
    }

    fn params(&self, need_big_delta: bool) -> CliResult<ModelParams> {
        if self.spin_count == 0 {
            return Err(CliError::config("--N", "need at least one spin"));
        }
        Ok(ModelParams {
            spin_count: self.spin_count,
            g_x: self.required("--g", &self.g, Dimension::AngularRate)?,
            delta_x: self.required("--delta", &self.delta, Dimension::AngularRate)?,
            big_delta: if need_big_delta {
                self.required("--Delta", &self.big_delta, Dimension::AngularRate)?
            } else {
                0.0
            },
            f_dx: self.quantity("--force", &self.force, Dimension::Force)?.unwrap_or(0.0),
            r0_x: self.r0()?,
            ..Default::default()
        })
    }

    pub fn evaluate(&self) -> CliResult<Vec<Row>> {
        let quote = |q: SensitivityQuote, scale: f64, unit: &'static str| {
            vec![
                row("sensitivity", q.value, "N/sqrt(Hz)"),
                row("sensitivity", q.value / scale, unit),
                row("min_force", q.force, "N"),
                row("time", q.achieved_at_time, "ms"),
            ]
        };
        let rows = match self.formula {
            Formula::Fmin => {
                let p = self.params(true)?;
                let t = match self.quantity("--t", &self.t, Dimension::Time)? {
                    Some(t) => t,
                    None => derive_strong(&p)?.x.optimal_time(),
                };
                quote(min_force_strong(&p, t)?, XONTONEWTON, "xN/sqrt(Hz)")
            }
            Formula::Ho => quote(min_force_harmonic(self.r0()?, self.time()?)?, XONTONEWTON, "xN/sqrt(Hz)"),
            Formula::HoResonant => {
                quote(min_force_harmonic_resonant(self.r0()?, self.time()?)?, XONTONEWTON, "xN/sqrt(Hz)")
            }
            Formula::Ghz => quote(ghz_sensitivity(&self.params(false)?, self.time()?)?, YOCTONEWTON, "yN/sqrt(Hz)"),
            Formula::Sql => {
                let t = self.time()?;
                let total = self.quantity("--total-time", &self.total_time, Dimension::Time)?.unwrap_or(t);
                vec![row("frequency_uncertainty", sql_frequency_uncertainty(self.spin_count, t, total), "rad/ms")]
            }
            Formula::Signal => {
                let p = self.params(false)?;
                let t = self.time()?;
                let (c, omega) = (WeakDerived::twist_rate(&p)?, derive_weak(&p)?.omega_f);
                let j = p.spin_count as f64 / 2.0;
                vec![
                    row("Jz", oat_signal(j, self.theta, c * t, omega * t), ""),
                    row("var_Jz", oat_variance(j, self.theta, c * t, omega * t), ""),
                    row("xi", c * t, "rad"),
                    row("phi_f", omega * t, "rad"),
                ]
            }
            Formula::StrongSignal => {
                let mode = derive_strong(&self.params(true)?)?.x;
                let s = strong_signal(&mode, self.time()?);
                vec![row("mean_n", s.mean_n, ""), row("std_n", s.std_n, ""), row("snr", s.snr, "")]
            }
            Formula::Weak => {
                let p = self.params(false)?;
                let w = derive_weak(&p)?;
                let c = WeakDerived::twist_rate(&p)?;
                vec![
                    row("chi_x", w.chi_x, "rad/ms"),
                    row("twist_rate", c, "rad/ms"),
                    row("omega_f", w.omega_f, "rad/ms"),
                    row("mu_x", w.mu_x, "rad/ms"),
                    row("readout_time", 2.0 * PI / c.abs(), "ms"),
                ]
            }
            Formula::Strong => {
                let m = derive_strong(&self.params(true)?)?.x;
                vec![
                    row("lambda_sq", m.lambda_sq, ""),
                    row("upsilon", m.upsilon, "rad/ms"),
                    row("epsilon", m.epsilon, ""),
                    row("squeezing", m.nu, ""),
                    row("optimal_time", m.optimal_time(), "ms"),
                ]
            }
        };
        Ok(rows)
    }
}
