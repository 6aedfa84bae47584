use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use detkit::oracle::run_kernel_checks;
use serde_json::json;

use crate::run::Run;
use crate::Internal;

#[derive(Debug, Args)]
pub struct KernelCheckArgs {
    /// Random instances per invariant.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    #[arg(long, default_value = "kernel-check.json")]
    out: PathBuf,
}

pub fn run(args: KernelCheckArgs, mut run: Run) -> Result<()> {
    let seed = run.seed().unwrap_or(0);
    run.set_seed(seed);
    let outcomes = run_kernel_checks(seed, args.trials);
    for o in &outcomes {
        let status = if o.passed { "PASS" } else { "FAIL" };
        if o.detail.is_empty() {
            println!("{status} {}", o.name);
        } else {
            println!("{status} {} ({})", o.name, o.detail);
        }
    }
    let failed = outcomes.iter().filter(|o| !o.passed).count();
    run.write_json(&args.out, &outcomes)?;
    run.finish(json!({ "trials": args.trials, "out": args.out }))?;
    if failed > 0 {
        return Err(Internal(format!("{failed} kernel invariant(s) failed")).into());
    }
    Ok(())
}
