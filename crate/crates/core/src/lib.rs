//! Workbench for comparing Game of Life implementations.
//!
//! * [`grid`]: bit-packed worlds, seeded random worlds and the plaintext
//!   pattern format.
//! * [`engines`]: the reference, bit-sliced and circuit step engines.
//! * [`circuit`]: gate-level netlist elaboration, two-phase simulation and the
//!   FPGA resource model.
//! * [`bench`]: timing harness, OLS trend lines and speedups.
//! * [`energy`]: energy-per-step estimates and comparison tables.
//! * [`cli`]: the `lifebench` command line.

pub mod bench;
pub mod circuit;
pub mod cli;
pub mod energy;
pub mod engines;
pub mod grid;

pub use bench::{BenchConfig, BenchSample, Schedule, Clock, FakeClock, MonotonicClock, RegressionFit, Size};
pub use circuit::{CalibrationTable, Netlist, ResourceEstimate};
pub use energy::{EnergyEstimate, PowerProfile};
pub use engines::{Engine, EngineKind, NeighborCount};
pub use grid::{parse_pattern, random_world, serialize_pattern, Rng, World};
