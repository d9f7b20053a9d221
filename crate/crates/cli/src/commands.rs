//! Subcommand definitions and their execution.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};
use spinforge::sensing::{run, sweep_with_progress, SensingReport, SweepAxis};
use spinforge::units::{parse_quantity, Dimension};

use crate::analytic_query::{render, AnalyticArgs};
use crate::config::{axis_dimension, split_values, ConfigArgs, RunConfig};
use crate::error::{CliError, CliResult};
use crate::figures::{figure, report_summary, Check, DeltaMode, FigureOptions};
use crate::output::{remove_outputs, Artifact, Table};
use crate::selftest;

#[derive(Debug, Parser)]
#[command(name = "spinforge", version, about = "Spin-boson force-sensing simulations for trapped-ion crystals")]
pub struct Cli {
    /// More log output on stderr (repeat for debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Reproduce one of the five figures as CSV plus meta JSON.
    Figure(FigureArgs),
    /// Run one sensing protocol from a config file and/or flags.
    Simulate(ConfigArgs),
    /// Run a protocol over a list of values of one knob.
    Sweep(SweepArgs),
    /// Evaluate a closed-form formula.
    Analytic(AnalyticArgs),
    /// Run the invariant suites.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Args)]
pub struct FigureArgs {
    /// Figure number, 1 to 5.
    pub number: u32,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Figure 1: Δ = χ_x χ_y (1x), 2 χ_x χ_y (2x) or both.
    #[arg(long = "delta-mode", default_value = "both")]
    pub delta_mode: DeltaMode,
    /// Figures 4 and 5: comma-separated detunings δ_x.
    #[arg(long)]
    pub deltas: Option<String>,
    /// Figure 5: comma-separated force multipliers of f_min, one per detuning.
    #[arg(long)]
    pub multipliers: Option<String>,
    /// Time or sweep grid size.
    #[arg(long)]
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub config: ConfigArgs,
    /// Knob to vary (g_x, delta_x, heating_rate, ...).
    #[arg(long)]
    pub axis: Option<String>,
    /// Comma-separated values, with units where the axis has one.
    #[arg(long, allow_hyphen_values = true)]
    pub values: Option<String>,
    /// Also search the SNR = 1 force at every point (strong protocol).
    #[arg(long)]
    pub search: bool,
    #[arg(long = "snr-target")]
    pub snr_target: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SelftestArgs {
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

/// Runs `command`; outputs of a failed command are removed.
pub fn execute(command: &Command) -> CliResult<()> {
    match command {
        Command::Figure(args) => guarded(&args.out, &format!("fig{}", args.number), || cmd_figure(args)),
        Command::Simulate(args) => {
            let cfg = RunConfig::resolve(&args.merged()?)?;
            guarded(&cfg.out_dir.clone(), "simulate", || cmd_simulate(&cfg))
        }
        Command::Sweep(args) => {
            let cfg = sweep_config(args)?;
            guarded(&cfg.out_dir.clone(), "sweep", || cmd_sweep(&cfg))
        }
        Command::Analytic(args) => {
            print!("{}", render(&args.evaluate()?));
            Ok(())
        }
        Command::Selftest(args) => guarded(&args.out, "selftest", || cmd_selftest(&args.out)),
    }
}

fn guarded(dir: &Path, stem: &str, body: impl FnOnce() -> CliResult<()>) -> CliResult<()> {
    let result = body();
    if result.is_err() {
        remove_outputs(dir, stem);
    }
    result
}

fn report_checks(checks: &[Check]) -> CliResult<()> {
    for c in checks {
        println!("{c}");
    }
    let failed: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| c.name.clone()).collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Invariant(failed.join("; ")))
    }
}

fn write(artifact: &Artifact, dir: &Path) -> CliResult<()> {
    for path in artifact.write(dir)? {
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn rate_list(flag: &str, text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|v| parse_quantity(v, Dimension::AngularRate).map_err(|e| CliError::config(flag, e.to_string())))
        .collect()
}

fn number_list(flag: &str, text: &str) -> CliResult<Vec<f64>> {
    text.split(',')
        .map(|v| {
            v.trim()
                .parse()
                .map_err(|_| CliError::config(flag, format!("`{v}` is not a number")))
        })
        .collect()
}

fn cmd_figure(args: &FigureArgs) -> CliResult<()> {
    let mut options = FigureOptions {
        delta_mode: args.delta_mode,
        points: args.points,
        ..Default::default()
    };
    if let Some(points) = args.points {
        if points < 2 {
            return Err(CliError::config("--points", "need at least two points"));
        }
    }
    if let Some(list) = &args.deltas {
        let deltas = rate_list("--deltas", list)?;
        match args.number {
            4 => options.coupling_deltas = deltas,
            5 => {
                if args.multipliers.is_none() && deltas.len() != options.multipliers.len() {
                    options.multipliers = vec![options.multipliers[1]; deltas.len()];
                }
                options.heating_deltas = deltas;
            }
            n => return Err(CliError::config("--deltas", format!("figure {n} has no detuning list"))),
        }
    }
    if let Some(list) = &args.multipliers {
        if args.number != 5 {
            return Err(CliError::config("--multipliers", "only figure 5 takes force multipliers"));
        }
        options.multipliers = number_list("--multipliers", list)?;
    }
    let out = figure(args.number, &options)?;
    // stale outputs of an earlier run must not survive a failed check
    report_checks(&out.checks)?;
    write(&out.artifact, &args.out)
}

fn cmd_simulate(cfg: &RunConfig) -> CliResult<()> {
    if cfg.sweep.is_some() {
        log::warn!("ignoring the [sweep] table; use `spinforge sweep`");
    }
    let report = run(&cfg.spec)?;
    print_report(&report);
    let mut columns = vec![("t_ms".to_string(), report.signal.times.clone())];
    for s in &report.signal.series {
        columns.push((s.name.clone(), s.values.clone()));
    }
    let mut meta = Map::new();
    meta.insert("command".into(), json!("simulate"));
    meta.insert("report".into(), report_summary(&report));
    write(&Artifact::new("simulate", Table::from_columns(columns)?, meta), &cfg.out_dir)
}

fn print_report(r: &SensingReport) {
    let f = r.readout.force;
    println!("protocol     {}", r.spec.kind);
    println!("readout      {:.6e} ms (nu = {})", r.readout.time, r.readout.repetitions);
    if let Some(w) = r.readout.omega_f {
        println!("omega_f      {:.6e} +- {:.6e} rad/ms", w.value, w.uncertainty);
    }
    println!("force        {:.6e} +- {:.6e} N", f.value, f.uncertainty);
    if let Some(snr) = r.snr {
        println!("snr          {snr:.6e}");
    }
    println!("sensitivity  {:.6e} N/sqrt(Hz)", r.sensitivity.value);
    if let Some(q) = r.min_force {
        println!("min force    {:.6e} N ({:.6e} N/sqrt(Hz))", q.force, q.value);
    }
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
}

fn sweep_config(args: &SweepArgs) -> CliResult<RunConfig> {
    let mut raw = args.config.merged()?;
    if let Some(axis) = &args.axis {
        raw.sweep.axis = Some(axis.clone());
    }
    if let Some(values) = &args.values {
        raw.sweep.values = Some(split_values(values));
    }
    if args.search {
        raw.sweep.search_min_force = Some(true);
    }
    if let Some(target) = args.snr_target {
        raw.sweep.snr_target = Some(target);
    }
    if raw.sweep.axis.is_none() {
        return Err(CliError::config("sweep.axis", "missing"));
    }
    RunConfig::resolve(&raw)
}

fn cmd_sweep(cfg: &RunConfig) -> CliResult<()> {
    let plan = cfg.sweep.as_ref().ok_or_else(|| CliError::config("sweep.axis", "missing"))?;
    let progress = |done: usize, total: usize| eprintln!("sweep {}: {done}/{total}", plan.axis);
    let points = sweep_with_progress(plan.axis, &plan.values, &cfg.spec, &plan.options, progress)?;
    let nan = f64::NAN;
    let mut table = Table::new(
        [
            "value",
            "ok",
            "readout_ms",
            "force",
            "force_uncertainty",
            "omega_f",
            "omega_f_uncertainty",
            "snr",
            "sensitivity",
            "min_force",
            "min_force_sensitivity",
        ]
        .map(String::from)
        .to_vec(),
    );
    let mut failures = Vec::new();
    let mut warnings = Vec::new();
    for (k, p) in points.iter().enumerate() {
        match &p.outcome {
            Ok(r) => {
                let w = r.readout.omega_f;
                table.push_row(vec![
                    p.value,
                    1.0,
                    r.readout.time,
                    r.readout.force.value,
                    r.readout.force.uncertainty,
                    w.map_or(nan, |w| w.value),
                    w.map_or(nan, |w| w.uncertainty),
                    r.snr.unwrap_or(nan),
                    r.sensitivity.value,
                    r.min_force.map_or(nan, |q| q.force),
                    r.min_force.map_or(nan, |q| q.value),
                ]);
                if !r.warnings.is_empty() {
                    warnings.push(json!({"index": k, "value": p.value, "warnings": r.warnings}));
                }
            }
            Err(e) => {
                let mut row = vec![nan; table.columns.len()];
                row[0] = p.value;
                row[1] = 0.0;
                table.push_row(row);
                failures.push(json!({"index": k, "value": p.value, "error": e.to_string()}));
            }
        }
    }
    eprintln!("sweep {}: {} of {} points failed", plan.axis, failures.len(), points.len());
    let mut meta = Map::new();
    meta.insert("command".into(), json!("sweep"));
    meta.insert("template".into(), json!(cfg.spec));
    meta.insert("axis".into(), json!(plan.axis));
    meta.insert("axis_unit".into(), axis_unit(plan.axis));
    meta.insert("values".into(), json!(plan.values));
    meta.insert("options".into(), json!(plan.options));
    meta.insert("failures".into(), Value::Array(failures));
    meta.insert("warnings".into(), Value::Array(warnings));
    write(&Artifact::new("sweep", table, meta), &cfg.out_dir)
}

fn axis_unit(axis: SweepAxis) -> Value {
    let unit = match axis_dimension(axis) {
        Some(Dimension::AngularRate) => "rad/ms",
        Some(Dimension::Force) => "N",
        Some(Dimension::Length) => "m",
        Some(Dimension::Time) => "ms",
        None => match axis {
            SweepAxis::HeatingRate => "1/ms",
            SweepAxis::Theta => "rad",
            _ => "",
        },
    };
    json!(unit)
}

fn cmd_selftest(out: &Path) -> CliResult<()> {
    let checks = selftest::run_checks()?;
    report_checks(&checks)?;
    write(&selftest::artifact(&checks)?, out)
}
