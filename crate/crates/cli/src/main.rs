use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod run;

/// Anchor optimization, Soft-NMS, detection metrics and kernel checks.
#[derive(Debug, Parser)]
#[command(name = "detkit", version)]
struct Cli {
    /// RNG seed for commands that sample.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 picks automatically.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    /// Directory for outputs and the run manifest.
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    OptimizeAnchors(commands::anchors::OptimizeArgs),
    CoverageReport(commands::anchors::CoverageArgs),
    Nms(commands::nms::NmsArgs),
    Evaluate(commands::evaluate::EvaluateArgs),
    Synthesize(commands::synthesize::SynthesizeArgs),
    KernelCheck(commands::kernel_check::KernelCheckArgs),
}

/// Marks a failure as ours rather than the caller's (exit code 2).
#[derive(Debug)]
pub struct Internal(pub String);

impl std::fmt::Display for Internal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Internal {}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .map_err(|e| Internal(format!("thread pool: {e}")))?;
    }
    let run = |name| run::Run::new(name, &cli.out_dir, cli.seed);
    match cli.command {
        Command::OptimizeAnchors(a) => commands::anchors::optimize(a, run("optimize-anchors")),
        Command::CoverageReport(a) => commands::anchors::coverage_report(a, run("coverage-report")),
        Command::Nms(a) => commands::nms::run(a, run("nms")),
        Command::Evaluate(a) => commands::evaluate::run(a, run("evaluate")),
        Command::Synthesize(a) => commands::synthesize::run(a, run("synthesize")),
        Command::KernelCheck(a) => commands::kernel_check::run(a, run("kernel-check")),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match std::panic::catch_unwind(|| dispatch(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Internal>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
        Err(_) => ExitCode::from(2),
    }
}
