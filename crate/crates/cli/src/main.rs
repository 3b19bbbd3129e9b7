use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use penning_cli::checks::{run_suite, Anchors, Suite};
use penning_cli::commands::{run, Command};
use penning_cli::error::CliError;
use penning_cli::output::{output_dir, write_run, OUT_DIR_ENV};
use penning_cli::scenario::Scenario;

/// Design and simulation runs for surface-electrode Penning micro-traps.
///
/// Every physical quantity in a scenario file carries its unit, e.g.
/// "2.5 MHz" or "3 T". Exit codes: 0 ok, 1 validation error, 2 numerical
/// or i/o failure.
#[derive(Parser)]
#[command(name = "penning", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct RunArgs {
    /// Scenario file (TOML).
    scenario: PathBuf,
    /// Output directory; overrides the environment variable and the
    /// scenario's `[output] dir`.
    #[arg(long, short, env = OUT_DIR_ENV)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Eigenmode frequencies and stability limit for the scenario's trap.
    Modes(RunArgs),
    /// Solve electrode voltages for the target null height and ωz.
    Solve(RunArgs),
    /// Locate the null of a voltage set and report its Hessian.
    Null(RunArgs),
    /// Semiclassical Doppler cooling, with axialization if configured.
    CoolDoppler(RunArgs),
    /// Sideband cooling with the shipped or a supplied schedule.
    CoolSideband(RunArgs),
    /// Sideband-ratio thermometry, from data or synthetic.
    Thermometry(RunArgs),
    /// Heating-rate fit and field-noise conversion.
    Heating(RunArgs),
    /// Coherence decay under Ramsey and decoupling sequences.
    Coherence(RunArgs),
    /// Transport waveform synthesis and energy gain.
    Transport(RunArgs),
    /// Raster schedule for the waypoint file.
    Raster(RunArgs),
    /// Isolation of the detachment ladder across the motional band.
    Isolation(RunArgs),
    /// Run the acceptance checks and print target vs computed vs tolerance.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        /// Take species and field from this scenario instead of the defaults.
        #[arg(long)]
        scenario: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.cmd {
        Cmd::Modes(a) => (Command::Modes, a),
        Cmd::Solve(a) => (Command::Solve, a),
        Cmd::Null(a) => (Command::Null, a),
        Cmd::CoolDoppler(a) => (Command::CoolDoppler, a),
        Cmd::CoolSideband(a) => (Command::CoolSideband, a),
        Cmd::Thermometry(a) => (Command::Thermometry, a),
        Cmd::Heating(a) => (Command::Heating, a),
        Cmd::Coherence(a) => (Command::Coherence, a),
        Cmd::Transport(a) => (Command::Transport, a),
        Cmd::Raster(a) => (Command::Raster, a),
        Cmd::Isolation(a) => (Command::Isolation, a),
        Cmd::Verify { suite, scenario } => return verify(suite, scenario),
    };
    match execute(command, &args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e),
    }
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(e.exit_code() as u8)
}

fn execute(command: Command, args: &RunArgs) -> Result<(), CliError> {
    let sc = Scenario::load(&args.scenario)?;
    let result = run(command, &sc)?;
    let dir = output_dir(args.out.as_deref(), &sc);
    let written = write_run(&dir, &sc, &result)?;
    print!("{}", result.summary);
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn verify(suite: Suite, scenario: Option<PathBuf>) -> ExitCode {
    let anchors = match scenario {
        Some(p) => match Scenario::load(&p) {
            Ok(sc) => Anchors::from(&sc),
            Err(e) => return fail(e),
        },
        None => Anchors::default(),
    };
    let mut failed = 0;
    for c in run_suite(suite, &anchors) {
        println!("{}", c.line());
        if !c.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} check(s) failed");
        ExitCode::from(2)
    } else {
        println!("all checks passed");
        ExitCode::SUCCESS
    }
}
