use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use clap::Parser;
use lifebench::bench::FakeClock;
use lifebench::cli::{execute, Cli, Io};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lifebench"))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data").join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Runs the CLI in-process with a fake clock.
fn run_fake(args: &[&str], ns_per_step: u64) -> (Result<(), i32>, String, String) {
    let cli = Cli::try_parse_from(std::iter::once("lifebench").chain(args.iter().copied())).unwrap();
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let mut clock = FakeClock::new(ns_per_step);
    let res = execute(cli, &mut clock, &mut Io { out: &mut out, err: &mut err }).map_err(|e| e.exit_code());
    (res, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

#[test]
fn run_beacon_two_steps_is_identity() {
    let input = fs::read_to_string(fixture("beacon.txt")).unwrap();
    for engine in ["reference", "bitsliced", "circuit"] {
        let o = bin()
            .args(["run", fixture("beacon.txt").to_str().unwrap(), "--engine", engine, "--steps", "2"])
            .output()
            .unwrap();
        assert!(o.status.success(), "{}", stderr(&o));
        assert_eq!(stdout(&o), input);
    }
    let o = bin()
        .args(["run", fixture("beacon.txt").to_str().unwrap(), "--steps", "1"])
        .output()
        .unwrap();
    assert_eq!(stdout(&o), fs::read_to_string(fixture("beacon_1.txt")).unwrap());
}

#[test]
fn run_zero_steps_echoes_and_writes_out_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("final.txt");
    let o = bin()
        .args(["run", fixture("beacon.txt").to_str().unwrap(), "--steps", "0", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(out).unwrap(), fs::read_to_string(fixture("beacon.txt")).unwrap());
}

#[test]
fn run_error_exit_codes() {
    let o = bin().args(["run", fixture("ragged.txt").to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 2"), "{}", stderr(&o));

    let o = bin().args(["run", "/nonexistent/pattern.txt"]).output().unwrap();
    assert_eq!(o.status.code(), Some(1));

    let o = bin().args(["run", fixture("beacon.txt").to_str().unwrap(), "--bogus"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));

    let o = bin().args(["run", fixture("beacon.txt").to_str().unwrap(), "--engine", "gpu"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));

    let o = bin().output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_single_size_real_clock() {
    let o = bin()
        .args(["bench", "--sizes", "10x10", "--min-steps", "1000", "--seed", "1", "--min-duration", "1ms", "--warmup-steps", "10"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = stdout(&o);
    let lines: Vec<_> = csv.lines().collect();
    assert_eq!(lines[0], "width,height,cells,engine,steps,total_ns,ns_per_step");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("10,10,100,reference,"));
    assert!(stderr(&o).contains("fit: n/a"));
}

#[test]
fn bench_default_ladder_and_csv_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.csv");
    let (res, out, _) = run_fake(
        &["bench", "--min-steps", "10", "--min-duration", "0s", "--warmup-steps", "0", "--engine", "bitsliced", "--csv", path.to_str().unwrap()],
        1000,
    );
    assert_eq!(res, Ok(()));
    let csv = fs::read_to_string(&path).unwrap();
    let cells: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    assert_eq!(cells, ["100", "400", "900", "1600", "2500", "3600", "4900", "6400", "8100", "10000"]);
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",1000.000")));
    // Summary goes to stdout when the CSV goes to a file.
    assert!(out.contains("fit: slope 0.000000 ns/cell, intercept 1000.000 ns, r^2 1.0000"), "{out}");
}

#[test]
fn bench_fake_clock_is_byte_identical() {
    let args = ["bench", "--sizes", "10x10..40x40:10", "--min-steps", "500", "--min-duration", "20us", "--seed", "9", "--warmup-steps", "5"];
    let (r1, a, _) = run_fake(&args, 13);
    let (r2, b, _) = run_fake(&args, 13);
    assert_eq!((r1, r2), (Ok(()), Ok(())));
    assert_eq!(a, b);
    assert_eq!(a.lines().count(), 5);
}

#[test]
fn bench_schedules_agree_under_fake_clock() {
    let base = ["bench", "--sizes", "10x10,20x20,5x30", "--min-steps", "300", "--min-duration", "0s", "--warmup-steps", "3"];
    let (r1, seq, _) = run_fake(&[&base[..], &["--schedule", "sequential"]].concat(), 40);
    let (r2, inter, _) = run_fake(&[&base[..], &["--schedule", "interleaved"]].concat(), 40);
    assert_eq!((r1, r2), (Ok(()), Ok(())));
    assert_eq!(seq, inter);
    let o = bin().args(["bench", "--schedule", "parallel"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn bench_bad_flags() {
    let (res, _, _) = run_fake(&["bench", "--sizes", "10x", "--min-steps", "1"], 1);
    assert_eq!(res, Err(2));
    let (res, _, _) = run_fake(&["bench", "--sizes", "4x4", "--density", "2", "--min-steps", "1"], 1);
    assert_eq!(res, Err(2));
    let o = bin().args(["bench", "--min-duration", "soon"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin()
        .args(["bench", "--sizes", "4x4", "--min-steps", "1", "--min-duration", "0s", "--csv", "/nonexistent/dir/x.csv"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn estimate_reports_table_values() {
    let o = bin().args(["estimate", "--size", "100x100"]).output().unwrap();
    assert!(o.status.success());
    let s = stdout(&o);
    assert!(s.contains("registers: 10004"), "{s}");
    assert!(s.contains("logic elements: 97871"));
    assert!(s.contains("min clock period: 4.8 ns"));

    let o = bin()
        .args(["estimate", "--size", "100x100", "--power-sw", "6.4", "--sw-ns-per-step", "109964"])
        .output()
        .unwrap();
    let s = stdout(&o);
    assert!(s.contains("software energy per step: 703.8 µJ (0.7037696 mJ)"), "{s}");
    assert!(s.contains("speedup: 22909.2"), "{s}");

    let o = bin().args(["estimate", "--size", "10x10", "--power-fpga", "24"]).output().unwrap();
    assert!(stdout(&o).contains("fpga energy per step: 96.00 nJ"), "{}", stdout(&o));
}

#[test]
fn estimate_out_of_range() {
    let o = bin().args(["estimate", "--size", "5x5"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("outside the calibrated range"), "{}", stderr(&o));
    let o = bin().args(["estimate", "--size", "5x5", "--extrapolate"]).output().unwrap();
    assert!(o.status.success());
    assert!(stdout(&o).contains("registers: 29"));
}

fn expected_speedups() -> Vec<(String, f64, f64)> {
    let text = fs::read_to_string(data("table1.csv")).unwrap();
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (format!("{}x{}", f[0], f[1]), f[6].parse().unwrap(), f[7].parse().unwrap())
        })
        .collect()
}

#[test]
fn report_on_published_fixture() {
    let o = bin()
        .args(["report", "--input", data("table1_bench.csv").to_str().unwrap(), "--baseline", "fpga", "--format", "csv"])
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let csv = stdout(&o);
    assert!(csv.starts_with("device,width,height,cells,ns_per_step,speedup_vs_baseline,energy_per_step_j\n"));
    // Lossless: one row per input sample.
    assert_eq!(csv.lines().count(), 1 + 30);
    for (world, mac, pi) in expected_speedups() {
        for (device, printed) in [("mac", mac), ("raspberry", pi)] {
            let (w, h) = world.split_once('x').unwrap();
            let row = csv
                .lines()
                .find(|l| l.starts_with(&format!("{device},{w},{h},")))
                .unwrap();
            let got: f64 = row.split(',').nth(5).unwrap().parse().unwrap();
            assert!(((got - printed) / printed).abs() <= 0.01, "{device} {world}: {got} vs {printed}");
        }
    }
    let pi_100 = csv.lines().find(|l| l.starts_with("raspberry,100,100,")).unwrap();
    let joules: f64 = pi_100.rsplit(',').next().unwrap().parse().unwrap();
    assert!((joules - 0.7037696e-3).abs() < 1e-12);

    let o = bin()
        .args(["report", "--input", data("table1_bench.csv").to_str().unwrap(), "--baseline", "fpga"])
        .output()
        .unwrap();
    let md = stdout(&o);
    assert!(md.starts_with("| World | Cells | mac (us) | raspberry (us) | fpga (us) | Speedup mac | Speedup raspberry |"), "{md}");
    assert!(md.contains("| 40x40 | 1600 | 1.210 | 17.212 | 0.0040 | 302 | 4303 |"), "{md}");
}

#[test]
fn report_against_fpga_model_with_plot_data() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    // Affine: 2 ns/cell + 50 ns, and 0.5 ns/cell + 10 ns.
    let mut ta = String::from("width,height,cells,engine,steps,total_ns,ns_per_step\n");
    let mut tb = ta.clone();
    for k in 1..=4 {
        let cells = 100 * k * k;
        let ya = 2 * cells + 50;
        let yb = cells / 2 + 10;
        ta.push_str(&format!("{0},{0},{1},reference,10,{2},{3}.000\n", 10 * k, cells, ya * 10, ya));
        tb.push_str(&format!("{0},{0},{1},bitsliced,10,{2},{3}.000\n", 10 * k, cells, yb * 10, yb));
    }
    fs::write(&a, ta).unwrap();
    fs::write(&b, tb).unwrap();
    let plots = dir.path().join("plots");
    let o = bin()
        .args(["report", "--input"])
        .arg(format!("desk={}", a.display()))
        .arg("--input")
        .arg(&b)
        .arg("--plot-data")
        .arg(&plots)
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    let md = stdout(&o);
    assert!(md.contains("| desk (us) | bitsliced (us) | fpga (us) |"), "{md}");
    let fits = fs::read_to_string(plots.join("fits.csv")).unwrap();
    // The measured inputs are affine; the FPGA model is not.
    for line in fits.lines().filter(|l| !l.starts_with("device,") && !l.starts_with("fpga,")) {
        let f: Vec<&str> = line.split(',').collect();
        let r2: f64 = f[4].parse().unwrap();
        assert!((r2 - 1.0).abs() < 1e-12, "{line}");
    }
    let desk_fit = fits.lines().find(|l| l.starts_with("desk,")).unwrap();
    let slope: f64 = desk_fit.split(',').nth(2).unwrap().parse().unwrap();
    assert!((slope - 2.0).abs() < 1e-9);
    let desk = fs::read_to_string(plots.join("desk.csv")).unwrap();
    assert_eq!(desk.lines().next(), Some("cells,ns_per_step,trend_ns_per_step"));
    assert!(desk.contains("\n100,250.000,250.000\n"), "{desk}");
    assert!(plots.join("fpga.csv").exists());
    assert!(fits.lines().any(|l| l.starts_with("fpga,4,")), "{fits}");
}

#[test]
fn report_single_row_warns() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    fs::write(&a, "width,height,cells,engine,steps,total_ns,ns_per_step\n10,10,100,mac,1,100,100.000\n").unwrap();
    let o = bin()
        .args(["report", "--input", a.to_str().unwrap(), "--baseline", "mac", "--plot-data"])
        .arg(dir.path().join("p"))
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 3);
    assert!(stderr(&o).contains("warning: mac"), "{}", stderr(&o));
    let fits = fs::read_to_string(dir.path().join("p/fits.csv")).unwrap();
    assert!(fits.contains("\nmac,1,,,\n"));
}

#[test]
fn report_schema_mismatch() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    fs::write(&a, "width,height,engine,steps,total_ns\n10,10,mac,1,100\n").unwrap();
    let o = bin().args(["report", "--input", a.to_str().unwrap()]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("cells") && err.contains("ns_per_step"), "{err}");
}

#[test]
fn bench_then_report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("b.csv");
    let (res, _, _) = run_fake(
        &["bench", "--sizes", "10x10..30x30:10", "--min-steps", "50", "--min-duration", "0s", "--warmup-steps", "0", "--csv", path.to_str().unwrap()],
        2500,
    );
    assert_eq!(res, Ok(()));
    let (res, out, _) = run_fake(&["report", "--input", path.to_str().unwrap(), "--format", "csv"], 1);
    assert_eq!(res, Ok(()));
    let rows: Vec<&str> = out.lines().skip(1).filter(|l| l.starts_with("reference,")).collect();
    assert_eq!(rows.len(), 3);
    // 2500 ns against the 4.0/4.0/4.1 ns model.
    assert!(rows[0].contains(",2500.000,625.000,"), "{}", rows[0]);
}
