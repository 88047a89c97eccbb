use std::io;
use std::process::ExitCode;

use clap::Parser;
use lifebench::bench::MonotonicClock;
use lifebench::cli::{self, Cli, Io};

fn main() -> ExitCode {
    let args = match Cli::try_parse() {
        Ok(args) => args,
        // --help and --version exit 0, argument errors exit 2.
        Err(e) => e.exit(),
    };
    let (stdout, stderr) = (io::stdout(), io::stderr());
    let (mut out, mut err) = (stdout.lock(), stderr.lock());
    let mut clock = MonotonicClock::new();
    let mut streams = Io { out: &mut out, err: &mut err };
    match cli::execute(args, &mut clock, &mut streams) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            use io::Write;
            let _ = writeln!(err, "error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
