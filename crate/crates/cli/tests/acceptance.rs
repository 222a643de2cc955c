//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
//! fails if any criterion fails.

use std::f64::consts::{LN_2, PI};
use std::path::Path;
use std::process::Command as Process;
use std::time::{Duration, Instant};

use cube_transport::concentration::{check_concentration, halfspace_profile, MeasureRef};
use cube_transport::density::{build_density, DensitySpec, Grid};
use cube_transport::sampler::sample_product;
use cube_transport::transport1d::{log_inequality_gap, LOG_COEFFICIENT};
use cube_transport::VerificationReport;
use cube_transport_cli::config::{Command, RunConfig};
use cube_transport_cli::execute;
use cube_transport_cli::suites::Outcome;
use serde_json::Value;

const ANCHOR_1D_TOL: f64 = 1e-3;
const KNOTHE_ANCHOR_TOL: f64 = 2e-3;
const REL_TOL: f64 = 0.05;
const ABS_TOL: f64 = 1e-6;
const LOG_GAP_TOL: f64 = 1e-12;
const ORACLE_BAND: f64 = 0.15;
const SLOPE_RANGE: (f64, f64) = (0.40, 0.60);
const ANCHOR_T_STAR: f64 = 0.052;
const VARIANCE_TOL: f64 = 1e-3;
const NEGATIVE_ALPHA: f64 = 0.1;
const N_POINTS: usize = 1_000_000;

const BUDGET_ANCHOR: Duration = Duration::from_secs(1);
const BUDGET_1D: Duration = Duration::from_secs(30);
const BUDGET_KNOTHE: Duration = Duration::from_secs(120);
const BUDGET_SANDWICH: Duration = Duration::from_secs(60);
const BUDGET_CONCENTRATION: Duration = Duration::from_secs(180);
const BUDGET_SCALING: Duration = Duration::from_secs(300);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn config(command: Command) -> RunConfig {
    let mut cfg = RunConfig {
        command,
        ..RunConfig::default()
    };
    cfg.monte_carlo.seed = Some(20_240_611);
    cfg.monte_carlo.n_points = N_POINTS;
    cfg
}

fn timed(cfg: &RunConfig) -> (Outcome, Duration) {
    let start = Instant::now();
    let out = execute(cfg).expect("suite runs");
    (out, start.elapsed())
}

fn named<'a>(out: &'a Outcome, name: &str) -> Vec<&'a VerificationReport> {
    out.reports.iter().filter(|r| r.name == name).collect()
}

fn one(out: &Outcome, name: &str) -> f64 {
    let rows = named(out, name);
    assert_eq!(rows.len(), 1, "{name}");
    rows[0].lhs
}

/// Every row under `name` passes and was judged under the pinned contract.
fn all_pass_pinned(out: &Outcome, name: &str, min_rows: usize) -> (bool, usize) {
    let rows = named(out, name);
    let pinned = rows
        .iter()
        .all(|r| r.rel_tol == REL_TOL && r.abs_tol == ABS_TOL);
    let ok = rows.len() >= min_rows && pinned && rows.iter().all(|r| r.pass);
    (ok, rows.len())
}

fn anchor_1d() -> Verdict {
    let mut cfg = config(Command::Verify1d);
    cfg.suite.line_pairs = 0;
    let (out, elapsed) = timed(&cfg);
    let map = one(&out, "anchor-map-value");
    let cost = one(&out, "anchor-transport-cost");
    let entropy = one(&out, "anchor-relative-entropy");
    let deficit = one(&out, "anchor-deficit-equals-entropy");
    let ok = [map, cost, entropy, deficit]
        .iter()
        .all(|&e| e <= ANCHOR_1D_TOL)
        && named(&out, "anchor-map-value")[0].rhs == ANCHOR_1D_TOL
        && elapsed < BUDGET_ANCHOR;
    verdict(
        ok,
        format!(
            "errors T(1/4) {map:.1e}, cost {cost:.1e}, entropy {entropy:.1e}, deficit {deficit:.1e}; {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn quadratic_and_one_dimensional_suites(out: &Outcome, elapsed: Duration) -> (Verdict, Verdict) {
    let (quad_ok, quad_rows) = all_pass_pinned(out, "quadratic-transport-1d", 2 * 50);
    let (refine_ok, refine_rows) = all_pass_pinned(out, "quadratic-transport-1d-refinement", 50);
    let c2 = verdict(
        quad_ok && refine_ok && elapsed < BUDGET_1D,
        format!(
            "{quad_rows} rows at m = 256, 512; {refine_rows} refinement rows; {:.1}s",
            elapsed.as_secs_f64()
        ),
    );

    let (lambda_ok, lambda_rows) = all_pass_pinned(out, "lambda-deficit-1d", 50);
    let (segment_ok, segment_rows) = all_pass_pinned(out, "segment-bound", 50);
    let (cheeger_ok, cheeger_rows) = all_pass_pinned(out, "lambda-poincare-1d", 50);
    let log_rows = named(out, "log-inequality");
    let log_ok = log_rows.len() == 1 && log_rows[0].pass;
    let gap = log_inequality_gap(2.0);
    let exact = 1.0 - LN_2 - LOG_COEFFICIENT;
    let gap_ok = (gap - exact).abs() <= LOG_GAP_TOL && named(out, "log-inequality-at-two")[0].pass;
    let c3 = verdict(
        lambda_ok && segment_ok && cheeger_ok && log_ok && gap_ok,
        format!(
            "Λ-deficit {lambda_rows}, segment {segment_rows}, Λ-Poincaré {cheeger_rows} rows; gap at 2 = {gap:.5} (error {:.1e})",
            (gap - exact).abs()
        ),
    );
    (c2, c3)
}

fn knothe() -> Verdict {
    let cfg = config(Command::VerifyKnothe);
    let (out, elapsed) = timed(&cfg);
    let anchor = named(&out, "knothe-anchor-cost")[0];
    let anchor_ok = anchor.rhs == KNOTHE_ANCHOR_TOL && anchor.pass;
    let (cost_ok, cost_rows) = all_pass_pinned(&out, "knothe-transport-cost", 20);
    let facets = named(&out, "facet-preservation");
    let facets_ok = !facets.is_empty() && facets.iter().all(|r| r.pass);
    let push = named(&out, "knothe-pushforward");
    let push_ok = !push.is_empty() && push.iter().all(|r| r.pass);
    let worst_push = push.iter().map(|r| r.lhs / r.rhs).fold(0.0, f64::max);
    verdict(
        anchor_ok && cost_ok && facets_ok && push_ok && elapsed < BUDGET_KNOTHE,
        format!(
            "product cost error {:.1e}; {cost_rows} inequality rows; {} facet rows; pushforward worst {:.2} of allowance; {:.1}s",
            anchor.lhs,
            facets.len(),
            worst_push,
            elapsed.as_secs_f64()
        ),
    )
}

fn sandwich() -> Verdict {
    let cfg = config(Command::Tire);
    let (out, elapsed) = timed(&cfg);
    let low: Vec<_> = named(&out, "w2-le-knothe")
        .into_iter()
        .filter(|r| r.m == 8)
        .collect();
    let high: Vec<_> = named(&out, "knothe-le-entropy")
        .into_iter()
        .filter(|r| r.m == 8)
        .collect();
    let pinned = low
        .iter()
        .chain(&high)
        .all(|r| r.rel_tol == REL_TOL && r.abs_tol == ABS_TOL);
    let ok = low.len() >= 10
        && high.len() >= 10
        && pinned
        && low.iter().chain(&high).all(|r| r.pass)
        && elapsed < BUDGET_SANDWICH;
    verdict(
        ok,
        format!(
            "{} pairs at n = 2, m = 8; {:.1}s",
            low.len(),
            elapsed.as_secs_f64()
        ),
    )
}

fn negative_control() -> bool {
    let line = Grid::unit(1, 1024).unwrap();
    let factor = build_density(&DensitySpec::standard_gaussian(1), &line).unwrap();
    let batch = sample_product(&[factor.clone(), factor], 100_000, 3).unwrap();
    let ts: Vec<f64> = (1..=20).map(|k| 0.05 * k as f64).collect();
    let profile = halfspace_profile(
        MeasureRef::Samples(&batch),
        &[1.0, 0.0],
        &ts,
        NEGATIVE_ALPHA,
    )
    .unwrap();
    !check_concentration(&profile).pass
}

fn concentration() -> (Verdict, Verdict) {
    let cfg = config(Command::Concentration);
    let (out, elapsed) = timed(&cfg);
    let profiles_ok = out
        .profiles
        .iter()
        .all(|p| p.profile.ts.len() == 20 && p.profile.n_points == N_POINTS);
    let mut parts = Vec::new();
    let mut ok = profiles_ok;
    for tag in [
        "concentration-ratio-route",
        "concentration-curvature-route",
        "concentration-uniform",
    ] {
        let rows = named(&out, tag);
        ok &= rows.len() >= 3 * 4 && rows.iter().all(|r| r.pass);
        parts.push(format!("{tag} {}", rows.len()));
    }
    let control = negative_control();
    let c6 = verdict(
        ok && control && elapsed < BUDGET_CONCENTRATION,
        format!(
            "{}; α = {NEGATIVE_ALPHA} rejected: {control}; {:.1}s",
            parts.join(", "),
            elapsed.as_secs_f64()
        ),
    );

    let variance = named(&out, "poincare-anchor-variance")[0];
    let energy = named(&out, "poincare-anchor-energy")[0];
    let anchors_ok =
        variance.pass && energy.pass && variance.rhs == VARIANCE_TOL && energy.rhs == VARIANCE_TOL;
    let (poincare_ok, poincare_rows) = all_pass_pinned(&out, "poincare", 20);
    let (lsi_ok, lsi_rows) = all_pass_pinned(&out, "log-sobolev", 20);
    let measures = 4;
    let c7 = verdict(
        anchors_ok && poincare_ok && lsi_ok,
        format!(
            "Poincaré {poincare_rows}, log-Sobolev {lsi_rows} rows on {measures} measures; Var error {:.1e}, energy error {:.1e} (π²/2 = {:.4})",
            variance.lhs,
            energy.lhs,
            PI * PI / 2.0
        ),
    );
    (c6, c7)
}

fn scaling() -> Verdict {
    let cfg = config(Command::Counterexample);
    let (out, elapsed) = timed(&cfg);
    let table = &out.diagnostics["scaling"];
    let slope = table["slope"].as_f64().unwrap();
    let rows = table["rows"].as_array().unwrap();
    let row_1024 = rows.iter().find(|r| r["n"] == 1024).unwrap();
    let t_star = row_1024["t_star"].as_f64().unwrap();
    let oracle = row_1024["gaussian_oracle"].as_f64().unwrap();
    let band = 3.0 / (N_POINTS as f64).sqrt();
    let masses_ok = rows
        .iter()
        .all(|r| (r["mass_a"].as_f64().unwrap() - 0.5).abs() <= band);
    let ok = (t_star / oracle - 1.0).abs() <= ORACLE_BAND
        && (oracle / ANCHOR_T_STAR - 1.0).abs() <= 0.01
        && (SLOPE_RANGE.0..=SLOPE_RANGE.1).contains(&slope)
        && masses_ok
        && out.reports.iter().all(|r| r.pass)
        && elapsed < BUDGET_SCALING;
    verdict(
        ok,
        format!(
            "t*(1024) = {t_star:.5} vs oracle {oracle:.5}; slope {slope:.3}; μ(A) within {band:.4}; {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn strip_timestamp(text: &str) -> String {
    let mut doc: Value = serde_json::from_str(text).unwrap();
    doc.as_object_mut().unwrap().remove("timestamp");
    serde_json::to_string(&doc).unwrap()
}

fn run_binary(dir: &Path) -> String {
    let status = Process::new(env!("CARGO_BIN_EXE_cube-transport"))
        .args([
            "verify-knothe",
            "--seed",
            "99",
            "--n-points",
            "20000",
            "--output-dir",
        ])
        .arg(dir)
        .status()
        .expect("binary runs");
    assert!(status.code().is_some());
    std::fs::read_to_string(dir.join("report.json")).unwrap()
}

fn reproducibility() -> Verdict {
    let tmp = tempfile::tempdir().unwrap();
    let a = run_binary(tmp.path());
    let b = run_binary(tmp.path());
    let raw_lines_differ = a.lines().zip(b.lines()).filter(|(x, y)| x != y).count();
    let ok = strip_timestamp(&a) == strip_timestamp(&b)
        && a.lines()
            .zip(b.lines())
            .all(|(x, y)| x == y || x.trim_start().starts_with("\"timestamp\""));
    verdict(
        ok,
        format!("{} bytes, {raw_lines_differ} differing lines", a.len()),
    )
}

#[test]
fn acceptance_criteria() {
    let mut verdicts: Vec<(u32, &str, Verdict)> = Vec::new();
    verdicts.push((1, "1D closed-form anchor", anchor_1d()));
    let (out_1d, elapsed_1d) = timed(&config(Command::Verify1d));
    let (c2, c3) = quadratic_and_one_dimensional_suites(&out_1d, elapsed_1d);
    verdicts.push((2, "1D quadratic transport suite", c2));
    verdicts.push((3, "Λ-deficit, segment, Λ-Poincaré and logarithm suites", c3));
    verdicts.push((4, "Knothe transport cost in 2 and 3 dimensions", knothe()));
    verdicts.push((5, "W₂ <= Knothe <= entropy sandwich", sandwich()));
    let (c6, c7) = concentration();
    verdicts.push((6, "halfspace concentration", c6));
    verdicts.push((7, "Poincaré and log-Sobolev", c7));
    verdicts.push((8, "correlated Gaussian scaling", scaling()));
    verdicts.push((9, "byte-identical reruns", reproducibility()));

    for (k, title, v) in &verdicts {
        println!(
            "criterion {k} {}: {title}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    let failed: Vec<u32> = verdicts.iter().filter(|v| !v.2.pass).map(|v| v.0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
