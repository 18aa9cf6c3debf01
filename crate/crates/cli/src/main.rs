//! `gigi`: synthesize G-buffers, prefilter environments, render, relight,
//! recover materials and compare images.
//!
//! Exit codes: 0 success, 2 input error, 3 numeric divergence, 4 internal
//! invariant violation.

mod commands;
mod provenance;

use std::panic;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CubemapArgs, DiffArgs, ExportArgs, OptimizeArgs, PrefilterArgs, RelightArgs, RenderArgs, SynthArgs};

#[derive(Parser)]
#[command(name = "gigi", version, about = "Deferred-shading global illumination on G-buffers")]
struct Cli {
    /// Worker threads. Outputs are identical for any value.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render an analytic scene into a G-buffer directory.
    Synth(SynthArgs),
    /// Prefilter an environment map (irradiance, specular mips, BRDF table).
    Prefilter(PrefilterArgs),
    /// Render the six cube faces around a camera for world-space tracing.
    Cubemap(CubemapArgs),
    /// Direct, occlusion, indirect and composite images of a G-buffer.
    Render(RenderArgs),
    /// Render a G-buffer with given materials under a new environment.
    Relight(RelightArgs),
    /// Recover material maps from ground-truth renders.
    Optimize(OptimizeArgs),
    /// Compare two images.
    Diff(DiffArgs),
    /// Write a map as an 8-bit PNG.
    Export(ExportArgs),
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(n) = cli.threads {
        anyhow::ensure!(n >= 1, commands::InputError("--threads must be at least 1".into()));
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Synth(a) => commands::synth(a),
        Command::Prefilter(a) => commands::prefilter(a),
        Command::Cubemap(a) => commands::cubemap(a),
        Command::Render(a) => commands::render(a),
        Command::Relight(a) => commands::relight(a),
        Command::Optimize(a) => commands::optimize(a),
        Command::Diff(a) => commands::diff(a),
        Command::Export(a) => commands::export(a),
    }
}

/// The error chain, skipping causes already spelled out by their parent.
fn message(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let m = cause.to_string();
        if !out.contains(&m) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&m);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {}", message(&e));
            ExitCode::from(commands::exit_code(&e))
        }
        // The panic hook has already printed the message.
        Err(_) => ExitCode::from(4),
    }
}
