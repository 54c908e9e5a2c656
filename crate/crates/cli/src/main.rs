use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use gfpk_cli::{execute, Mode, RunConfig, EXIT_CONFIG};

/// Thread count used when `--threads` is absent.
const THREADS_ENV: &str = "GFPK_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "gfpk",
    version,
    about = "Hermite-Galerkin stationary FPK solvers"
)]
struct Args {
    mode: Mode,
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "gfpk-out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG as u8 } else { 0 });
        }
    };
    let threads = args.threads.or_else(|| {
        std::env::var(THREADS_ENV)
            .ok()
            .and_then(|s| s.trim().parse().ok())
    });
    if let Some(n) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("warning: could not size the thread pool: {e}");
        }
    }
    let mut cfg = match RunConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    match execute(args.mode, &cfg, &args.out) {
        Ok(outcome) => {
            let r = &outcome.report;
            if let Some(err) = &r.error {
                eprintln!("{}: solver error: {err}", args.mode.name());
            }
            for c in r.checks.iter().filter(|c| !c.pass) {
                eprintln!(
                    "check failed: {} = {:e} (tolerance {:e})",
                    c.name, c.value, c.tolerance
                );
            }
            for b in r.bounds.iter().filter(|b| !b.passed()) {
                eprintln!("bound failed: {} ({:e} vs {:e})", b.name, b.left, b.right);
            }
            if let Some(res) = r.residuals.as_ref().filter(|res| !res.pass) {
                eprintln!(
                    "residual suite failed: hermite {:e} (tol {:e}), bump {:e} (tol {:e})",
                    res.hermite_max, res.hermite_tolerance, res.bump_max, res.bump_tolerance
                );
            }
            println!(
                "{} {} -> {}",
                args.mode.name(),
                if r.pass { "PASS" } else { "FAIL" },
                args.out.join("report.json").display()
            );
            ExitCode::from(outcome.exit_code as u8)
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
