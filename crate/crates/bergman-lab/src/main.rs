use std::path::PathBuf;
use std::process::ExitCode;

use bergman_lab::cli::{self, Command, RunConfig};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bergman-lab", version, about = "Bergman kernel geometry near the boundary")]
struct Args {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Kernel, φ, r and f at the configured points.
    Kernel(Common),
    /// Residuals of the identity suite.
    Verify(Common),
    /// Boundary scans of holomorphic sectional curvature.
    Klembeck(Common),
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let (cmd, c) = match args.cmd {
        Cmd::Kernel(c) => (Command::Kernel, c),
        Cmd::Verify(c) => (Command::Verify, c),
        Cmd::Klembeck(c) => (Command::Klembeck, c),
    };
    let cfg = match RunConfig::load(&c.config).and_then(|cfg| cfg.with_overrides(c.out, c.jobs, c.seed)) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("bergman-lab: {e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    ExitCode::from(cli::execute(cmd, &cfg) as u8)
}
