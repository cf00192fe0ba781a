use clap::{Parser, Subcommand};
use helix_cli::commands::{self, Command};
use helix_cli::{exit, manifest, thread_cap, CliError};
use std::path::PathBuf;
use std::process::ExitCode;

/// Numerical experiments on the stability of the helical state.
#[derive(Parser, Debug)]
#[command(name = "helix", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Bloch band scan with symmetry, monotonicity and floor verdicts.
    Bands(Opts),
    /// Decay of the low-frequency kernel norms.
    KernelScan(Opts),
    /// Linear decay of the low-frequency part of a Gaussian.
    LinearDecay(Opts),
    /// Nonlinear evolution (optionally an amplitude sweep).
    Evolve(Opts),
    /// Moving-frame identities, norm equivalences and energy identities.
    FrameCheck(Opts),
    /// Time-step self-convergence and the β → 0 study.
    Convergence(Opts),
}

#[derive(clap::Args, Debug)]
struct Opts {
    /// TOML configuration; omitted keys take their defaults.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Output directory (default: `helix-out/<command>`).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Re-check the hashes recorded in the output directory's manifest instead of running.
    #[arg(long)]
    verify: bool,
}

fn split(cmd: Cmd) -> (Command, Opts) {
    match cmd {
        Cmd::Bands(o) => (Command::Bands, o),
        Cmd::KernelScan(o) => (Command::KernelScan, o),
        Cmd::LinearDecay(o) => (Command::LinearDecay, o),
        Cmd::Evolve(o) => (Command::Evolve, o),
        Cmd::FrameCheck(o) => (Command::FrameCheck, o),
        Cmd::Convergence(o) => (Command::Convergence, o),
    }
}

fn execute(cmd: Command, opts: Opts) -> Result<i32, CliError> {
    if let Some(n) = thread_cap(std::env::var("HELIX_THREADS").ok().as_deref())? {
        helix_core::par::init_threads(n);
    }
    let out = opts.out.unwrap_or_else(|| PathBuf::from("helix-out").join(cmd.name()));
    if opts.verify {
        let r = manifest::verify(&out, cmd.name())?;
        for (path, why) in &r.mismatches {
            eprintln!("{path}: {why}");
        }
        println!("verify {}: {} files checked, {} mismatches", out.display(), r.checked, r.mismatches.len());
        return Ok(if r.ok() { exit::PASS } else { exit::FAIL });
    }
    let text = match &opts.config {
        Some(p) => Some(std::fs::read_to_string(p).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", p.display())))?),
        None => None,
    };
    let m = commands::run(cmd, text.as_deref(), &out)?;
    for v in &m.verdicts {
        println!("{} {}: {:.6e} (tolerance {:.3e})", if v.passed { "PASS" } else { "FAIL" }, v.name, v.value, v.tolerance);
    }
    for f in &m.fits {
        println!(
            "{} fit {}: exponent {:.4} vs {:.4} (rel. error {:.3}) on [{:.1}, {:.1}]",
            if f.passed { "PASS" } else { "FAIL" },
            f.quantity,
            f.exponent,
            f.expected,
            f.rel_error,
            f.window[0],
            f.window[1]
        );
    }
    if let Some(e) = &m.error {
        eprintln!("error: {e}");
    }
    println!("{} → {}", cmd.name(), out.join(manifest::MANIFEST_NAME).display());
    Ok(if m.passed { exit::PASS } else { exit::FAIL })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, opts) = split(cli.command);
    let code = execute(cmd, opts).unwrap_or_else(|e| {
        eprintln!("helix {}: {e}", cmd.name());
        e.exit_code()
    });
    ExitCode::from(code as u8)
}
