//! `lifebench` subcommands: `run`, `bench`, `estimate` and `report`.
//!
//! Exit codes: 0 on success, 1 for I/O failures, 2 for usage and validation
//! errors (clap's own argument errors also exit with 2).

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::bench::{self, BenchConfig, BenchError, Clock, Schedule, Size};
use crate::circuit::{self, CalibrationTable, CircuitError};
use crate::energy::{self, Baseline, DeviceTiming, EnergyError, PowerProfile};
use crate::engines::{self, EngineKind};
use crate::grid::{self, DEFAULT_DENSITY};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Io { .. } => 1,
        }
    }

    fn io(context: impl Into<String>, source: io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}

impl From<BenchError> for CliError {
    fn from(e: BenchError) -> Self {
        match e {
            BenchError::Io(source) => CliError::io("i/o", source),
            other => CliError::Usage(other.to_string()),
        }
    }
}

impl From<CircuitError> for CliError {
    fn from(e: CircuitError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<EnergyError> for CliError {
    fn from(e: EnergyError) -> Self {
        CliError::Usage(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "lifebench", version, about = "Game of Life engines, benchmarks and FPGA estimates")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Step a plaintext pattern and print the final world.
    Run(RunArgs),
    /// Time an engine over a ladder of random worlds.
    Bench(BenchArgs),
    /// Modelled FPGA resources, time and energy for one world size.
    Estimate(EstimateArgs),
    /// Comparison tables and plot data from benchmark CSV files.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EngineArg {
    Reference,
    Bitsliced,
    Circuit,
}

impl From<EngineArg> for EngineKind {
    fn from(e: EngineArg) -> Self {
        match e {
            EngineArg::Reference => EngineKind::Reference,
            EngineArg::Bitsliced => EngineKind::BitSliced,
            EngineArg::Circuit => EngineKind::Circuit,
        }
    }
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Pattern file ('.' dead, 'O' alive).
    pub pattern: PathBuf,
    #[arg(long, value_enum, default_value = "reference")]
    pub engine: EngineArg,
    #[arg(long, default_value_t = 1)]
    pub steps: u64,
    /// Write the final world here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Comma-separated sizes, `WxH` or ranges `WxH..WxH:STEP`.
    #[arg(long, default_value = "10x10..100x100:10")]
    pub sizes: String,
    #[arg(long, value_enum, default_value = "reference")]
    pub engine: EngineArg,
    #[arg(long, default_value_t = 1_000_000)]
    pub min_steps: u64,
    /// Minimum timed wall time per size, e.g. `1s` or `200ms`.
    #[arg(long, default_value = "1s", value_parser = humantime::parse_duration)]
    pub min_duration: Duration,
    #[arg(long, default_value_t = 10_000)]
    pub warmup_steps: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_DENSITY)]
    pub density: f64,
    /// `interleaved` runs the sizes round-robin in short slices;
    /// `sequential` finishes each size before starting the next.
    #[arg(long, value_enum, default_value = "interleaved")]
    pub schedule: ScheduleArg,
    /// Write samples here; without it the CSV goes to standard output and the
    /// summary to standard error.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ScheduleArg {
    Sequential,
    Interleaved,
}

impl From<ScheduleArg> for Schedule {
    fn from(s: ScheduleArg) -> Self {
        match s {
            ScheduleArg::Sequential => Schedule::Sequential,
            ScheduleArg::Interleaved => Schedule::Interleaved,
        }
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// World size `WxH`.
    #[arg(long)]
    pub size: Size,
    #[arg(long, default_value_t = 24.0)]
    pub power_fpga: f64,
    #[arg(long, default_value_t = 6.4)]
    pub power_sw: f64,
    /// Measured software time per step to compare against.
    #[arg(long)]
    pub sw_ns_per_step: Option<f64>,
    /// Allow sizes outside the calibration table.
    #[arg(long)]
    pub extrapolate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ReportFormat {
    Md,
    Csv,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Benchmark CSV, optionally `LABEL=PATH` to override the device name
    /// taken from the engine column.
    #[arg(long = "input", required = true)]
    pub inputs: Vec<String>,
    /// Calibration CSV for the modelled FPGA baseline (default: embedded
    /// synthesis table).
    #[arg(long, conflicts_with = "baseline")]
    pub fpga_model: Option<PathBuf>,
    /// Compare against a measured device from the inputs instead of the
    /// FPGA model.
    #[arg(long)]
    pub baseline: Option<String>,
    /// Power profile `DEVICE=WATTS`; replaces the defaults (fpga=24,
    /// raspberry=6.4) when given.
    #[arg(long = "power")]
    pub powers: Vec<String>,
    #[arg(long, value_enum, default_value = "md")]
    pub format: ReportFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for per-device plot data and trend-line fits.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
}

/// Standard streams used by [`execute`].
pub struct Io<'a> {
    pub out: &'a mut dyn Write,
    pub err: &'a mut dyn Write,
}

pub fn execute(cli: Cli, clock: &mut dyn Clock, io: &mut Io<'_>) -> Result<(), CliError> {
    match cli.command {
        Command::Run(args) => cmd_run(&args, io),
        Command::Bench(args) => cmd_bench(&args, clock, io),
        Command::Estimate(args) => cmd_estimate(&args, io),
        Command::Report(args) => cmd_report(&args, io),
    }
}

fn out_err(e: io::Error) -> CliError {
    CliError::io("writing output", e)
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(format!("writing {}", path.display()), e))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))
}

pub fn cmd_run(args: &RunArgs, io: &mut Io<'_>) -> Result<(), CliError> {
    let text = read_file(&args.pattern)?;
    let world = grid::parse_pattern(&text)
        .map_err(|e| CliError::Usage(format!("{}: {e}", args.pattern.display())))?;
    let last = engines::run(args.engine.into(), &world, args.steps);
    let rendered = grid::serialize_pattern(&last);
    match &args.out {
        Some(path) => write_file(path, &rendered),
        None => io.out.write_all(rendered.as_bytes()).map_err(out_err),
    }
}

pub fn cmd_bench(args: &BenchArgs, clock: &mut dyn Clock, io: &mut Io<'_>) -> Result<(), CliError> {
    let cfg = BenchConfig {
        sizes: bench::parse_sizes(&args.sizes)?,
        engine: args.engine.into(),
        min_steps: args.min_steps,
        min_duration: args.min_duration,
        warmup_steps: args.warmup_steps,
        seed: args.seed,
        density: args.density,
        schedule: args.schedule.into(),
    };
    cfg.validate()?;
    let samples = bench::run_bench(&cfg, clock)?;
    let csv = bench::samples_to_csv(&samples);

    let summary: &mut dyn Write = match &args.csv {
        Some(path) => {
            write_file(path, &csv)?;
            &mut *io.out
        }
        None => {
            io.out.write_all(csv.as_bytes()).map_err(out_err)?;
            &mut *io.err
        }
    };
    for s in &samples {
        writeln!(
            summary,
            "{} {:>6} cells  {:>12.3} ns/step  ({} steps)",
            s.size,
            s.cells(),
            s.ns_per_step(),
            s.steps
        )
        .map_err(out_err)?;
    }
    match bench::fit_samples(&samples) {
        Ok(fit) => writeln!(
            summary,
            "fit: slope {:.6} ns/cell, intercept {:.3} ns, r^2 {:.4}",
            fit.slope, fit.intercept, fit.r_squared
        ),
        Err(_) => writeln!(summary, "fit: n/a (needs at least two distinct sizes)"),
    }
    .map_err(out_err)
}

/// Millijoules with trailing zeros trimmed.
fn millijoules(j: f64) -> String {
    let s = format!("{:.10}", j * 1e3);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    format!("{s} mJ")
}

pub fn cmd_estimate(args: &EstimateArgs, io: &mut Io<'_>) -> Result<(), CliError> {
    let cal = CalibrationTable::published();
    let Size { width, height } = args.size;
    let est = circuit::estimate_resources(width, height, &cal, args.extrapolate)?;
    let fpga = PowerProfile::new("fpga", args.power_fpga, "--power-fpga")?;
    let sw = PowerProfile::new("software", args.power_sw, "--power-sw")?;
    let fpga_ns = est.min_clock_ns;
    let fpga_e = energy::EnergyEstimate::new(&fpga, fpga_ns)?;

    let mut lines = vec![
        format!("size: {} ({} cells){}", args.size, args.size.cells(), if est.extrapolated { " [extrapolated]" } else { "" }),
        format!("registers: {}", est.registers),
        format!("logic elements: {}", est.les),
        format!("min clock period: {:.1} ns", est.min_clock_ns),
        format!("fpga time per step: {fpga_ns} ns"),
        format!(
            "fpga energy per step: {} ({}) at {} W",
            energy::format_energy(fpga_e.joules_per_step),
            millijoules(fpga_e.joules_per_step),
            fpga.watts
        ),
    ];
    if let Some(sw_ns) = args.sw_ns_per_step {
        let sw_e = energy::EnergyEstimate::new(&sw, sw_ns)?;
        lines.push(format!("software time per step: {sw_ns} ns"));
        lines.push(format!(
            "software energy per step: {} ({}) at {} W",
            energy::format_energy(sw_e.joules_per_step),
            millijoules(sw_e.joules_per_step),
            sw.watts
        ));
        lines.push(format!("speedup: {:.1}", bench::speedup(sw_ns, fpga_ns)?));
        lines.push(format!("energy ratio: {:.1}", energy::energy_ratio(&sw_e, &fpga_e)?));
    }
    for line in lines {
        writeln!(io.out, "{line}").map_err(out_err)?;
    }
    Ok(())
}

const REQUIRED_COLUMNS: [&str; 7] = ["width", "height", "cells", "engine", "steps", "total_ns", "ns_per_step"];

/// Reads a benchmark CSV. Device names come from the engine column unless
/// `label` is given.
pub fn read_bench_csv(text: &str, label: Option<&str>, source: &str) -> Result<Vec<DeviceTiming>, CliError> {
    let schema = |msg: String| CliError::Usage(format!("{source}: {msg}"));
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| schema(e.to_string()))?.clone();
    let missing: Vec<&str> = REQUIRED_COLUMNS
        .iter()
        .copied()
        .filter(|c| !headers.iter().any(|h| h == *c))
        .collect();
    if !missing.is_empty() {
        return Err(schema(format!("missing column(s): {}", missing.join(", "))));
    }
    let col = |name: &str| headers.iter().position(|h| h == name).expect("checked above");
    let idx: Vec<usize> = REQUIRED_COLUMNS.iter().map(|c| col(c)).collect();

    let mut out = Vec::new();
    for (n, record) in reader.records().enumerate() {
        let line = n + 2;
        let record = record.map_err(|e| schema(format!("line {line}: {e}")))?;
        let get = |i: usize| record.get(idx[i]).unwrap_or("");
        let int = |i: usize| -> Result<u64, CliError> {
            get(i)
                .parse::<u64>()
                .map_err(|_| schema(format!("line {line}: column {} is not an integer: {:?}", REQUIRED_COLUMNS[i], get(i))))
        };
        let (width, height, cells) = (int(0)? as usize, int(1)? as usize, int(2)? as usize);
        if width == 0 || height == 0 || cells != width * height {
            return Err(schema(format!("line {line}: column cells does not equal width*height")));
        }
        int(4)?;
        int(5)?;
        let ns_per_step: f64 = get(6)
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite() && *v >= 0.0)
            .ok_or_else(|| schema(format!("line {line}: column ns_per_step is not a number: {:?}", get(6))))?;
        let device = label.unwrap_or(get(3));
        if device.is_empty() {
            return Err(schema(format!("line {line}: column engine is empty")));
        }
        out.push(DeviceTiming {
            device: device.to_string(),
            size: Size::new(width, height),
            ns_per_step,
        });
    }
    Ok(out)
}

fn parse_power(spec: &str) -> Result<PowerProfile, CliError> {
    let (name, watts) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("--power expects DEVICE=WATTS, got {spec:?}")))?;
    let watts: f64 = watts
        .trim()
        .parse()
        .map_err(|_| CliError::Usage(format!("--power: {watts:?} is not a number")))?;
    Ok(PowerProfile::new(name.trim(), watts, "--power")?)
}

fn file_stem_for(device: &str) -> String {
    device
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

pub fn cmd_report(args: &ReportArgs, io: &mut Io<'_>) -> Result<(), CliError> {
    let mut timings = Vec::new();
    for input in &args.inputs {
        let (label, path) = match input.split_once('=') {
            Some((l, p)) => (Some(l), p),
            None => (None, input.as_str()),
        };
        let text = read_file(Path::new(path))?;
        timings.extend(read_bench_csv(&text, label, path)?);
    }
    if timings.is_empty() {
        return Err(CliError::Usage("inputs contain no samples".into()));
    }

    let profiles = if args.powers.is_empty() {
        PowerProfile::defaults()
    } else {
        args.powers.iter().map(|p| parse_power(p)).collect::<Result<_, _>>()?
    };
    let cal = match &args.fpga_model {
        Some(path) => CalibrationTable::from_csv(&read_file(path)?)?,
        None => CalibrationTable::published(),
    };
    let (baseline, baseline_name) = match &args.baseline {
        Some(name) => (Baseline::Device(name), name.as_str()),
        None => (Baseline::FpgaModel(&cal), energy::FPGA_DEVICE),
    };
    let rows = energy::comparison_table(&timings, baseline, &profiles)?;

    let table = match args.format {
        ReportFormat::Md => energy::comparison_markdown(&rows, baseline_name),
        ReportFormat::Csv => energy::comparison_csv(&rows),
    };
    match &args.out {
        Some(path) => write_file(path, &table)?,
        None => io.out.write_all(table.as_bytes()).map_err(out_err)?,
    }

    if let Some(dir) = &args.plot_data {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
        let mut devices: Vec<&str> = Vec::new();
        for r in &rows {
            if !devices.contains(&r.device.as_str()) {
                devices.push(&r.device);
            }
        }
        let mut fits = String::from("device,points,slope_ns_per_cell,intercept_ns,r_squared\n");
        for device in devices {
            let points: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.device == device)
                .map(|r| (r.size.cells() as f64, r.ns_per_step))
                .collect();
            let fit = bench::linear_fit(&points).ok();
            if fit.is_none() {
                writeln!(io.err, "warning: {device}: fewer than two distinct sizes, no trend line")
                    .map_err(out_err)?;
            }
            let mut data = String::from("cells,ns_per_step,trend_ns_per_step\n");
            for &(x, y) in &points {
                let trend = fit.map(|f| format!("{:.3}", f.predict(x))).unwrap_or_default();
                data.push_str(&format!("{x},{y:.3},{trend}\n"));
            }
            write_file(&dir.join(format!("{}.csv", file_stem_for(device))), &data)?;
            match fit {
                Some(f) => fits.push_str(&format!(
                    "{device},{},{:e},{:e},{}\n",
                    points.len(),
                    f.slope,
                    f.intercept,
                    f.r_squared
                )),
                None => fits.push_str(&format!("{device},{},,,\n", points.len())),
            }
        }
        write_file(&dir.join("fits.csv"), &fits)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bench_csv_schema_errors_name_columns() {
        let err = read_bench_csv("width,height,cells,engine,steps,total_ns\n", None, "x.csv").unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("ns_per_step"), "{err}");
        let err = read_bench_csv(
            "width,height,cells,engine,steps,total_ns,ns_per_step\n10,10,99,a,1,1,1.0\n",
            None,
            "x.csv",
        )
        .unwrap_err();
        assert!(err.to_string().contains("cells"), "{err}");
    }

    #[test]
    fn labels_override_engine_column() {
        let t = read_bench_csv(
            "width,height,cells,engine,steps,total_ns,ns_per_step\n10,10,100,reference,2,10,5.000\n",
            Some("mac"),
            "x.csv",
        )
        .unwrap();
        assert_eq!(t[0].device, "mac");
        assert_eq!(t[0].ns_per_step, 5.0);
    }

    #[test]
    fn power_specs() {
        assert_eq!(parse_power("mac=30").unwrap().watts, 30.0);
        assert!(parse_power("mac").is_err());
        assert!(parse_power("mac=0").is_err());
    }

    #[test]
    fn millijoule_display() {
        assert_eq!(millijoules(6.4 * 109_964e-9), "0.7037696 mJ");
    }
}
