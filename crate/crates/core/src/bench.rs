//! Per-step timing over a ladder of world sizes, least-squares trend lines
//! and the FPGA time model.
//!
//! Timings are kept as integer nanoseconds; `ns_per_step` is derived as
//! `total_ns / steps` and only rounded (to three decimals) when written out.

use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::circuit::{CalibrationTable, CircuitError};
use crate::engines::{engine_for, Engine, EngineKind};
use crate::grid::{random_world, GridError, DEFAULT_DENSITY};

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("invalid benchmark configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("clock went backwards: {earlier} ns then {later} ns")]
    ClockRegressed { earlier: u64, later: u64 },
    #[error("linear fit needs at least two distinct x values")]
    DegeneratePoints,
    #[error("cannot divide by a zero time per step")]
    ZeroDivisor,
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error("invalid size {0:?}: expected WxH or WxH..WxH:STEP")]
    BadSize(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Monotonic time source for the harness.
pub trait Clock {
    /// Nanoseconds since an arbitrary fixed origin.
    fn now_ns(&mut self) -> u64;

    /// Called by the harness after every timed batch with the number of
    /// steps it ran. Wall clocks ignore it; test clocks use it to advance.
    fn steps_elapsed(&mut self, _steps: u64) {}
}

/// Wall clock backed by [`Instant`].
#[derive(Debug, Clone)]
pub struct MonotonicClock {
    origin: Instant,
}

impl MonotonicClock {
    pub fn new() -> Self {
        MonotonicClock { origin: Instant::now() }
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for MonotonicClock {
    fn now_ns(&mut self) -> u64 {
        self.origin.elapsed().as_nanos() as u64
    }
}

/// Deterministic clock that advances a fixed amount per executed step.
#[derive(Debug, Clone)]
pub struct FakeClock {
    now: u64,
    ns_per_step: u64,
}

impl FakeClock {
    pub fn new(ns_per_step: u64) -> Self {
        FakeClock { now: 0, ns_per_step }
    }
}

impl Clock for FakeClock {
    fn now_ns(&mut self) -> u64 {
        self.now
    }

    fn steps_elapsed(&mut self, steps: u64) {
        self.now += steps * self.ns_per_step;
    }
}

/// World dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Size {
    pub width: usize,
    pub height: usize,
}

impl Size {
    pub fn new(width: usize, height: usize) -> Self {
        Size { width, height }
    }

    pub fn cells(self) -> usize {
        self.width * self.height
    }
}

impl fmt::Display for Size {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

impl FromStr for Size {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BenchError::BadSize(s.to_string());
        let (w, h) = s.trim().split_once(['x', 'X']).ok_or_else(bad)?;
        let width: usize = w.trim().parse().map_err(|_| bad())?;
        let height: usize = h.trim().parse().map_err(|_| bad())?;
        if width == 0 || height == 0 {
            return Err(bad());
        }
        Ok(Size { width, height })
    }
}

/// The size ladder 10×10, 20×20, …, 100×100.
pub fn default_sizes() -> Vec<Size> {
    (1..=10).map(|k| Size::new(10 * k, 10 * k)).collect()
}

/// Parses a comma-separated list of sizes and ranges. A range
/// `10x10..100x100:10` grows both dimensions by the step until the upper
/// bound is passed.
pub fn parse_sizes(spec: &str) -> Result<Vec<Size>, BenchError> {
    let mut sizes = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || BenchError::BadSize(part.to_string());
        match part.split_once("..") {
            None => sizes.push(part.parse()?),
            Some((from, rest)) => {
                let (to, step) = rest.split_once(':').ok_or_else(bad)?;
                let from: Size = from.parse()?;
                let to: Size = to.parse()?;
                let step: usize = step.trim().parse().map_err(|_| bad())?;
                if step == 0 || to.width < from.width || to.height < from.height {
                    return Err(bad());
                }
                let mut cur = from;
                while cur.width <= to.width && cur.height <= to.height {
                    sizes.push(cur);
                    cur = Size::new(cur.width + step, cur.height + step);
                }
            }
        }
    }
    if sizes.is_empty() {
        return Err(BenchError::BadSize(spec.to_string()));
    }
    Ok(sizes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    pub sizes: Vec<Size>,
    pub engine: EngineKind,
    pub min_steps: u64,
    pub min_duration: Duration,
    pub warmup_steps: u64,
    pub seed: u64,
    pub density: f64,
    pub schedule: Schedule,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            sizes: default_sizes(),
            engine: EngineKind::Reference,
            min_steps: 1_000_000,
            min_duration: Duration::from_secs(1),
            warmup_steps: 10_000,
            seed: 0,
            density: DEFAULT_DENSITY,
            schedule: Schedule::default(),
        }
    }
}

impl BenchConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if self.sizes.is_empty() {
            return Err(BenchError::Config("no sizes".into()));
        }
        if self.min_steps == 0 {
            return Err(BenchError::Config("min_steps must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.density) {
            return Err(BenchError::Config(format!("density {} is outside [0, 1]", self.density)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchSample {
    pub size: Size,
    pub engine: String,
    pub steps: u64,
    pub total_ns: u64,
}

impl BenchSample {
    pub fn cells(&self) -> usize {
        self.size.cells()
    }

    pub fn ns_per_step(&self) -> f64 {
        self.total_ns as f64 / self.steps as f64
    }
}

/// Order in which the sizes' timed batches run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Schedule {
    /// Each size runs to completion before the next starts.
    Sequential,
    /// Round-robin: every unfinished size runs one short slice per round, so
    /// slow phases of the host are shared across all sizes.
    #[default]
    Interleaved,
}

impl Schedule {
    pub fn name(self) -> &'static str {
        match self {
            Schedule::Sequential => "sequential",
            Schedule::Interleaved => "interleaved",
        }
    }
}

/// Slices per size in the interleaved schedule, when time-bound.
const ROUNDS: u64 = 20;

struct Timed {
    engine: Box<dyn Engine>,
    steps: u64,
    total_ns: u64,
    last_batch: u64,
}

impl Timed {
    fn done(&self, min_steps: u64, min_ns: u64) -> bool {
        self.steps >= min_steps && self.total_ns >= min_ns
    }

    /// Steps still needed to meet both floors, capped at roughly one slice.
    fn next_batch(&self, min_steps: u64, min_ns: u64, slice_ns: u64) -> u64 {
        if self.steps == 0 {
            return min_steps.min(1000);
        }
        let per_ns = |ns: u64| (ns as u128 * self.steps as u128 / self.total_ns as u128).min(u64::MAX as u128) as u64;
        let for_steps = min_steps.saturating_sub(self.steps);
        let n = if self.total_ns == 0 {
            for_steps.max(self.last_batch.saturating_mul(2))
        } else {
            let n = for_steps.max(per_ns(min_ns.saturating_sub(self.total_ns)));
            if slice_ns == u64::MAX { n } else { n.min(per_ns(slice_ns).max(1)) }
        };
        // Never grow a batch by more than 4x so a noisy first reading
        // cannot schedule a huge overshoot.
        n.clamp(1, self.steps.saturating_mul(4).max(1))
    }
}

/// Benchmarks every configured size.
///
/// Each size gets a fresh seeded random world (seed `cfg.seed + index`), an
/// untimed warmup, then timed batches until both `min_steps` and
/// `min_duration` are met. Only engine steps run between clock reads, and
/// one engine runs at a time. A sample's time is the sum of its batches.
pub fn run_bench(cfg: &BenchConfig, clock: &mut dyn Clock) -> Result<Vec<BenchSample>, BenchError> {
    cfg.validate()?;
    let min_ns = cfg.min_duration.as_nanos().min(u64::MAX as u128) as u64;
    let mut timed = Vec::with_capacity(cfg.sizes.len());
    for (idx, &size) in cfg.sizes.iter().enumerate() {
        let world = random_world(
            size.width,
            size.height,
            cfg.density,
            cfg.seed.wrapping_add(idx as u64),
        )?;
        let mut engine = engine_for(cfg.engine, &world);
        if cfg.schedule == Schedule::Sequential {
            engine.advance(cfg.warmup_steps);
        }
        timed.push(Timed { engine, steps: 0, total_ns: 0, last_batch: 0 });
    }

    let mut last = clock.now_ns();
    let mut batch = |t: &mut Timed, slice_ns: u64, last: &mut u64| -> Result<(), BenchError> {
        let n = t.next_batch(cfg.min_steps, min_ns, slice_ns);
        let start = clock.now_ns();
        if start < *last {
            return Err(BenchError::ClockRegressed { earlier: *last, later: start });
        }
        t.engine.advance(n);
        clock.steps_elapsed(n);
        let now = clock.now_ns();
        if now < start {
            return Err(BenchError::ClockRegressed { earlier: start, later: now });
        }
        *last = now;
        t.steps += n;
        t.total_ns += now - start;
        t.last_batch = n;
        Ok(())
    };

    match cfg.schedule {
        Schedule::Sequential => {
            for t in &mut timed {
                while !t.done(cfg.min_steps, min_ns) {
                    batch(t, u64::MAX, &mut last)?;
                }
            }
        }
        Schedule::Interleaved => {
            for t in &mut timed {
                t.engine.advance(cfg.warmup_steps);
            }
            let slice_ns = (min_ns / ROUNDS).max(1);
            while timed.iter().any(|t| !t.done(cfg.min_steps, min_ns)) {
                for t in timed.iter_mut().filter(|t| !t.done(cfg.min_steps, min_ns)) {
                    batch(t, slice_ns, &mut last)?;
                }
            }
        }
    }

    Ok(timed
        .into_iter()
        .zip(&cfg.sizes)
        .map(|(t, &size)| BenchSample {
            size,
            engine: cfg.engine.name().to_string(),
            steps: t.steps,
            total_ns: t.total_ns,
        })
        .collect())
}

pub const CSV_HEADER: &str = "width,height,cells,engine,steps,total_ns,ns_per_step";

/// Writes samples as CSV with [`CSV_HEADER`].
pub fn write_csv(out: &mut dyn Write, samples: &[BenchSample]) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for s in samples {
        writeln!(
            out,
            "{},{},{},{},{},{},{:.3}",
            s.size.width,
            s.size.height,
            s.cells(),
            s.engine,
            s.steps,
            s.total_ns,
            s.ns_per_step()
        )?;
    }
    Ok(())
}

pub fn samples_to_csv(samples: &[BenchSample]) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, samples).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("CSV output is ASCII")
}

/// Least-squares line `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegressionFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl RegressionFit {
    pub fn predict(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }
}

/// Ordinary least squares over `(x, y)` pairs.
///
/// When every `y` is equal the total sum of squares is zero; the fitted line
/// is then exact and `r_squared` is reported as 1.
pub fn linear_fit(points: &[(f64, f64)]) -> Result<RegressionFit, BenchError> {
    if points.len() < 2 {
        return Err(BenchError::DegeneratePoints);
    }
    let n = points.len() as f64;
    let x_mean = points.iter().map(|p| p.0).sum::<f64>() / n;
    let y_mean = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (sxy, sxx) = points.iter().fold((0.0, 0.0), |(sxy, sxx), &(x, y)| {
        let dx = x - x_mean;
        (sxy + dx * (y - y_mean), sxx + dx * dx)
    });
    if sxx == 0.0 {
        return Err(BenchError::DegeneratePoints);
    }
    let slope = sxy / sxx;
    let intercept = y_mean - slope * x_mean;
    let (ss_res, ss_tot) = points.iter().fold((0.0, 0.0), |(res, tot), &(x, y)| {
        let r = y - (slope * x + intercept);
        let d = y - y_mean;
        (res + r * r, tot + d * d)
    });
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok(RegressionFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Fit of `ns_per_step` against cell count.
pub fn fit_samples(samples: &[BenchSample]) -> Result<RegressionFit, BenchError> {
    let points: Vec<_> = samples
        .iter()
        .map(|s| (s.cells() as f64, s.ns_per_step()))
        .collect();
    linear_fit(&points)
}

/// `software / hardware`.
pub fn speedup(software: f64, hardware: f64) -> Result<f64, BenchError> {
    if hardware == 0.0 {
        return Err(BenchError::ZeroDivisor);
    }
    Ok(software / hardware)
}

/// Modelled FPGA time per step in ns: one world update per clock cycle at the
/// minimum clock period.
pub fn fpga_time_model(size: Size, cal: &CalibrationTable) -> Result<f64, BenchError> {
    Ok(cal.clock_period_ns(size.cells())?)
}
