//! `qlink`: simulate an entanglement-distribution link and analyse its
//! time-tag streams.

mod analyze;
mod error;
mod files;
mod report;
mod simulate;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use error::{CliError, CliResult, EXIT_USAGE};
use files::Emitted;

#[derive(Debug, Parser)]
#[command(name = "qlink", version, about = "Entanglement link simulation and CHSH analysis")]
struct Cli {
    /// Print the JSON result on stdout instead of the text summary.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads for the parallel CHSH tally.
    #[arg(long, global = true, env = "QLINK_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the CHSH plan (or one run) into tag files plus truth sidecars.
    Simulate(simulate::SimulateArgs),
    /// Cross-correlate channel pairs of a tag file and locate the peaks.
    Correlate(analyze::CorrelateArgs),
    /// CHSH parameter from four tag streams or a counts JSON.
    Chsh(analyze::ChshArgs),
    /// Fit visibility against pump phase.
    PhaseFit(analyze::PhaseFitArgs),
    /// Combine earlier results into one summary.
    Report(report::ReportArgs),
}

fn dispatch(cli: &Cli) -> CliResult<Emitted> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("thread count must be at least 1".into()));
        }
        // only fails if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::Simulate(a) => simulate::run(a),
        Command::Correlate(a) => analyze::correlate(a),
        Command::Chsh(a) => analyze::chsh(a),
        Command::PhaseFit(a) => analyze::phase_fit(a),
        Command::Report(a) => report::run(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    match dispatch(&cli) {
        Ok(out) => {
            print!("{}", if cli.json { &out.json } else { &out.text });
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("qlink: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
