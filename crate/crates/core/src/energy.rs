//! Conservative energy-per-step estimates (power × time per step) and the
//! cross-device comparison table.
//!
//! Powers are never measured here; they come from [`PowerProfile`]s. All
//! arithmetic is in joules and seconds as `f64`; rounding only happens in
//! [`format_energy`].

use std::collections::BTreeMap;
use std::fmt::Write as _;

use thiserror::Error;

use crate::bench::{self, BenchError, BenchSample, Size};
use crate::circuit::CalibrationTable;

#[derive(Debug, Error)]
pub enum EnergyError {
    #[error("power must be positive, got {0} W")]
    NonpositivePower(f64),
    #[error("time per step must be non-negative, got {0} ns")]
    NegativeTime(f64),
    #[error("cannot divide by a zero energy")]
    ZeroDivisor,
    #[error("no timing for baseline {baseline:?} at {size}")]
    MissingBaseline { baseline: String, size: Size },
    #[error("duplicate timing for {device:?} at {size}")]
    DuplicateTiming { device: String, size: Size },
    #[error("comparison needs at least one timing")]
    NoTimings,
    #[error(transparent)]
    Bench(#[from] BenchError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerProfile {
    pub name: String,
    pub watts: f64,
    pub source: String,
}

impl PowerProfile {
    pub fn new(name: impl Into<String>, watts: f64, source: impl Into<String>) -> Result<Self, EnergyError> {
        if !(watts > 0.0) {
            return Err(EnergyError::NonpositivePower(watts));
        }
        Ok(PowerProfile {
            name: name.into(),
            watts,
            source: source.into(),
        })
    }

    /// Rated supply of the DE2-115 board, an upper bound for the whole board.
    ///
    /// The published 96 nJ per 100x100 step matches 24 W at 4 ns; the stated
    /// 200 MHz clock would give 120 nJ and the synthesized 4.8 ns period
    /// 115.2 nJ. Callers pick the period; this profile only fixes the watts.
    pub fn fpga_board() -> Self {
        PowerProfile {
            name: "fpga".into(),
            watts: 24.0,
            source: "DE2-115 board power supply rating (upper bound)".into(),
        }
    }

    /// Reported average draw of a Raspberry Pi 4 with all four cores busy.
    pub fn raspberry_pi4() -> Self {
        PowerProfile {
            name: "raspberry".into(),
            watts: 6.4,
            source: "Raspberry Pi 4 average under full four-core load (pidramble.com)".into(),
        }
    }

    pub fn defaults() -> Vec<Self> {
        vec![Self::fpga_board(), Self::raspberry_pi4()]
    }
}

/// Joules for one step lasting `ns_per_step` nanoseconds at `watts`.
pub fn energy_per_step(watts: f64, ns_per_step: f64) -> Result<f64, EnergyError> {
    if !(watts > 0.0) {
        return Err(EnergyError::NonpositivePower(watts));
    }
    if !(ns_per_step >= 0.0) {
        return Err(EnergyError::NegativeTime(ns_per_step));
    }
    Ok(watts * ns_per_step * 1e-9)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnergyEstimate {
    pub device: String,
    pub ns_per_step: f64,
    pub watts: f64,
    pub joules_per_step: f64,
}

impl EnergyEstimate {
    pub fn new(profile: &PowerProfile, ns_per_step: f64) -> Result<Self, EnergyError> {
        Ok(EnergyEstimate {
            device: profile.name.clone(),
            ns_per_step,
            watts: profile.watts,
            joules_per_step: energy_per_step(profile.watts, ns_per_step)?,
        })
    }
}

/// `a / b` of energy per step.
pub fn energy_ratio(a: &EnergyEstimate, b: &EnergyEstimate) -> Result<f64, EnergyError> {
    if b.joules_per_step == 0.0 {
        return Err(EnergyError::ZeroDivisor);
    }
    Ok(a.joules_per_step / b.joules_per_step)
}

/// Formats joules with an nJ, µJ or mJ (or J) unit and four significant
/// digits.
pub fn format_energy(joules: f64) -> String {
    let (scale, unit) = match joules.abs() {
        j if j == 0.0 => (1.0, "J"),
        j if j < 1e-6 => (1e9, "nJ"),
        j if j < 1e-3 => (1e6, "µJ"),
        j if j < 1.0 => (1e3, "mJ"),
        _ => (1.0, "J"),
    };
    let v = joules * scale;
    let digits = if v == 0.0 {
        3
    } else {
        (3 - v.abs().log10().floor() as i32).max(0) as usize
    };
    format!("{v:.digits$} {unit}")
}

/// Time per step of one device at one size.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceTiming {
    pub device: String,
    pub size: Size,
    pub ns_per_step: f64,
}

impl From<&BenchSample> for DeviceTiming {
    fn from(s: &BenchSample) -> Self {
        DeviceTiming {
            device: s.engine.clone(),
            size: s.size,
            ns_per_step: s.ns_per_step(),
        }
    }
}

/// What speedups are measured against.
#[derive(Debug, Clone, Copy)]
pub enum Baseline<'a> {
    /// The modelled FPGA (one step per minimum clock period). Adds one
    /// `fpga` row per size to the table.
    FpgaModel(&'a CalibrationTable),
    /// A device present in the timings.
    Device(&'a str),
}

/// Name of the modelled FPGA rows.
pub const FPGA_DEVICE: &str = "fpga";

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub device: String,
    pub size: Size,
    pub ns_per_step: f64,
    /// `ns_per_step / baseline ns_per_step` at the same size.
    pub speedup_vs_baseline: f64,
    /// `None` when no power profile matches the device.
    pub joules_per_step: Option<f64>,
}

fn profile_for<'p>(profiles: &'p [PowerProfile], device: &str) -> Option<&'p PowerProfile> {
    profiles.iter().find(|p| p.name.eq_ignore_ascii_case(device))
}

/// One row per timing (plus modelled FPGA rows for [`Baseline::FpgaModel`]),
/// ordered by device in first-seen order then by cell count.
pub fn comparison_table(
    timings: &[DeviceTiming],
    baseline: Baseline<'_>,
    profiles: &[PowerProfile],
) -> Result<Vec<ComparisonRow>, EnergyError> {
    if timings.is_empty() {
        return Err(EnergyError::NoTimings);
    }
    let mut all: Vec<DeviceTiming> = timings.to_vec();
    let baseline_name = match baseline {
        Baseline::Device(name) => name.to_string(),
        Baseline::FpgaModel(cal) => {
            let mut sizes: Vec<Size> = timings.iter().map(|t| t.size).collect();
            sizes.sort();
            sizes.dedup();
            for size in sizes {
                all.push(DeviceTiming {
                    device: FPGA_DEVICE.to_string(),
                    size,
                    ns_per_step: bench::fpga_time_model(size, cal)?,
                });
            }
            FPGA_DEVICE.to_string()
        }
    };

    let mut seen = BTreeMap::new();
    for t in &all {
        if seen.insert((t.device.clone(), t.size), t.ns_per_step).is_some() {
            return Err(EnergyError::DuplicateTiming {
                device: t.device.clone(),
                size: t.size,
            });
        }
    }

    let mut order: Vec<String> = Vec::new();
    for t in &all {
        if !order.contains(&t.device) {
            order.push(t.device.clone());
        }
    }
    let rank = |d: &str| order.iter().position(|o| o == d).unwrap_or(usize::MAX);
    all.sort_by(|a, b| {
        rank(&a.device)
            .cmp(&rank(&b.device))
            .then(a.size.cells().cmp(&b.size.cells()))
            .then(a.size.cmp(&b.size))
    });

    all.iter()
        .map(|t| {
            let base = *seen.get(&(baseline_name.clone(), t.size)).ok_or_else(|| {
                EnergyError::MissingBaseline {
                    baseline: baseline_name.clone(),
                    size: t.size,
                }
            })?;
            let joules_per_step = profile_for(profiles, &t.device)
                .map(|p| energy_per_step(p.watts, t.ns_per_step))
                .transpose()?;
            Ok(ComparisonRow {
                device: t.device.clone(),
                size: t.size,
                ns_per_step: t.ns_per_step,
                speedup_vs_baseline: bench::speedup(t.ns_per_step, base)?,
                joules_per_step,
            })
        })
        .collect()
}

pub const COMPARISON_CSV_HEADER: &str =
    "device,width,height,cells,ns_per_step,speedup_vs_baseline,energy_per_step_j";

/// Long-form CSV, one line per row. Energy is empty when unknown.
pub fn comparison_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{COMPARISON_CSV_HEADER}");
    for r in rows {
        let energy = r.joules_per_step.map(|j| format!("{j:e}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{:.3},{:.3},{}",
            r.device,
            r.size.width,
            r.size.height,
            r.size.cells(),
            r.ns_per_step,
            r.speedup_vs_baseline,
            energy
        );
    }
    out
}

/// Markdown table laid out like the published comparison: one line per
/// size, then time per step (µs) per device, the speedup of the baseline
/// over every other device and the energy per step of every device that has
/// a power profile.
pub fn comparison_markdown(rows: &[ComparisonRow], baseline: &str) -> String {
    let mut devices: Vec<&str> = Vec::new();
    let mut sizes: Vec<Size> = Vec::new();
    for r in rows {
        if !devices.contains(&r.device.as_str()) {
            devices.push(&r.device);
        }
        if !sizes.contains(&r.size) {
            sizes.push(r.size);
        }
    }
    sizes.sort_by_key(|s| (s.cells(), *s));
    let others: Vec<&str> = devices.iter().copied().filter(|d| *d != baseline).collect();
    let with_energy: Vec<&str> = devices
        .iter()
        .copied()
        .filter(|d| rows.iter().any(|r| r.device == *d && r.joules_per_step.is_some()))
        .collect();
    let cell = |d: &str, s: Size| rows.iter().find(|r| r.device == d && r.size == s);

    let mut header = vec!["World".to_string(), "Cells".to_string()];
    header.extend(devices.iter().map(|d| format!("{d} (us)")));
    header.extend(others.iter().map(|d| format!("Speedup {d}")));
    header.extend(with_energy.iter().map(|d| format!("Energy {d}")));

    let mut out = String::new();
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(
        out,
        "|{}",
        header.iter().map(|_| "---:|").collect::<String>()
    );
    for s in sizes {
        let mut line = vec![s.to_string(), s.cells().to_string()];
        for d in &devices {
            line.push(cell(d, s).map(|r| format_us(r.ns_per_step)).unwrap_or_default());
        }
        for d in &others {
            line.push(
                cell(d, s)
                    .map(|r| format!("{:.0}", r.speedup_vs_baseline))
                    .unwrap_or_default(),
            );
        }
        for d in &with_energy {
            line.push(
                cell(d, s)
                    .and_then(|r| r.joules_per_step)
                    .map(format_energy)
                    .unwrap_or_default(),
            );
        }
        let _ = writeln!(out, "| {} |", line.join(" | "));
    }
    out
}

fn format_us(ns: f64) -> String {
    let us = ns / 1000.0;
    if us < 0.1 {
        format!("{us:.4}")
    } else {
        format!("{us:.3}")
    }
}
