//! Driver for the verification suites: configuration, orchestration and
//! report files.

pub mod config;
pub mod emit;
pub mod suites;

use cube_transport::{Tolerance, VerificationReport};

use config::{Command, RunConfig};
use suites::Outcome;

/// Every check passed.
pub const EXIT_PASS: i32 = 0;
/// At least one check failed.
pub const EXIT_FAIL: i32 = 1;
/// Bad configuration, usage or a library error.
pub const EXIT_ERROR: i32 = 2;

/// Runs the suite for `cfg.command` and returns its outcome, with the
/// configured tolerance applied to every check that uses the default one.
pub fn execute(cfg: &RunConfig) -> cube_transport::Result<Outcome> {
    let mut out = match cfg.command {
        Command::DensityCheck => suites::density_check(cfg)?,
        Command::Verify1d => suites::verify_1d(cfg)?,
        Command::VerifyKnothe => suites::verify_knothe(cfg)?,
        Command::Tire => suites::tire(cfg)?,
        Command::Concentration => suites::concentration(cfg)?,
        Command::Counterexample => suites::counterexample(cfg)?,
        Command::All => {
            let mut all = Outcome::default();
            for f in [
                suites::density_check,
                suites::verify_1d,
                suites::verify_knothe,
                suites::tire,
                suites::concentration,
                suites::counterexample,
            ] {
                all.merge(f(cfg)?);
            }
            all
        }
    };
    let tol = Tolerance::new(cfg.tolerance.rel_tol, cfg.tolerance.abs_tol);
    out.reports = out.reports.into_iter().map(|r| retune(r, tol)).collect();
    Ok(out)
}

fn retune(r: VerificationReport, tol: Tolerance) -> VerificationReport {
    if r.tolerance() == Tolerance::DEFAULT {
        r.with_tolerance(tol)
    } else {
        r
    }
}

/// Validates, runs and writes the report files. Returns the process exit
/// code.
pub fn run(mut cfg: RunConfig) -> i32 {
    if let Err(e) = cfg.resolve_seed().and_then(|_| cfg.validate()) {
        eprintln!("error: {e}");
        return EXIT_ERROR;
    }
    let threads = cfg.threads.unwrap_or_else(rayon::current_num_threads);
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start {threads} worker threads: {e}");
            return EXIT_ERROR;
        }
    };
    let outcome = match pool.install(|| execute(&cfg)) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_ERROR;
        }
    };
    if let Err(e) = emit::write_all(&cfg, &outcome, threads) {
        eprintln!("error: cannot write to {}: {e}", cfg.output_dir.display());
        return EXIT_ERROR;
    }
    let failed = outcome.reports.iter().filter(|r| !r.pass).count();
    println!(
        "{}: {} checks, {} failed, report in {}",
        cfg.command,
        outcome.reports.len(),
        failed,
        cfg.output_dir.join("report.json").display()
    );
    for r in outcome.reports.iter().filter(|r| !r.pass) {
        println!("FAIL {} lhs={:e} rhs={:e} m={}", r.name, r.lhs, r.rhs, r.m);
    }
    if failed == 0 {
        EXIT_PASS
    } else {
        EXIT_FAIL
    }
}
