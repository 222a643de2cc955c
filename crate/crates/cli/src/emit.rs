//! Output files: `report.json`, `report.csv`, per-profile CSV and SVG.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::SystemTime;

use cube_transport::concentration::ConcentrationProfile;
use cube_transport::report::to_csv;
use cube_transport::VerificationReport;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::RunConfig;
use crate::suites::Outcome;

#[derive(Serialize)]
struct Environment {
    os: &'static str,
    arch: &'static str,
    threads: usize,
}

#[derive(Serialize)]
struct Summary {
    total: usize,
    passed: usize,
    failed: usize,
    failed_names: Vec<String>,
}

#[derive(Serialize)]
struct ReportFile<'a> {
    tool: &'static str,
    version: &'static str,
    timestamp: String,
    environment: Environment,
    config: &'a RunConfig,
    reports: &'a [VerificationReport],
    diagnostics: &'a Map<String, Value>,
    summary: Summary,
}

fn summary(reports: &[VerificationReport]) -> Summary {
    let mut failed_names: Vec<String> = reports
        .iter()
        .filter(|r| !r.pass)
        .map(|r| r.name.clone())
        .collect();
    failed_names.sort();
    failed_names.dedup();
    let failed = reports.iter().filter(|r| !r.pass).count();
    Summary {
        total: reports.len(),
        passed: reports.len() - failed,
        failed,
        failed_names,
    }
}

/// The `report.json` document.
pub fn report_json(cfg: &RunConfig, outcome: &Outcome, threads: usize) -> String {
    let doc = ReportFile {
        tool: "cube-transport",
        version: env!("CARGO_PKG_VERSION"),
        timestamp: humantime::format_rfc3339_seconds(SystemTime::now()).to_string(),
        environment: Environment {
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            threads,
        },
        config: cfg,
        reports: &outcome.reports,
        diagnostics: &outcome.diagnostics,
        summary: summary(&outcome.reports),
    };
    serde_json::to_string_pretty(&doc).expect("report serializes")
}

/// Writes every output file and returns their paths.
pub fn write_all(
    cfg: &RunConfig,
    outcome: &Outcome,
    threads: usize,
) -> std::io::Result<Vec<PathBuf>> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |path: PathBuf, body: &str| -> std::io::Result<()> {
        fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    put(dir.join("report.json"), &report_json(cfg, outcome, threads))?;
    put(dir.join("report.csv"), &to_csv(&outcome.reports))?;
    if !outcome.profiles.is_empty() {
        let profiles = dir.join("profiles");
        fs::create_dir_all(&profiles)?;
        for p in &outcome.profiles {
            put(
                profiles.join(format!("{}.csv", p.label)),
                &p.profile.to_csv(),
            )?;
            if cfg.plot {
                put(
                    profiles.join(format!("{}.svg", p.label)),
                    &profile_svg(&p.label, &p.profile),
                )?;
            }
        }
    }
    Ok(written)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 50.0;

/// Measured profile, bound and shaded 3σ band on `[0, t_max] × [0, 1]`.
pub fn profile_svg(title: &str, p: &ConcentrationProfile) -> String {
    let t_max = p.ts.last().copied().unwrap_or(1.0).max(1e-12);
    let sx = |t: f64| MARGIN + (WIDTH - 2.0 * MARGIN) * t / t_max;
    let sy = |y: f64| HEIGHT - MARGIN - (HEIGHT - 2.0 * MARGIN) * y.clamp(0.0, 1.0);
    let poly = |ys: &[f64]| {
        p.ts.iter()
            .zip(ys)
            .map(|(&t, &y)| format!("{:.2},{:.2}", sx(t), sy(y)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let upper: Vec<f64> = p
        .measured
        .iter()
        .zip(&p.std_error)
        .map(|(m, s)| m + 3.0 * s)
        .collect();
    let lower: Vec<f64> = p
        .measured
        .iter()
        .zip(&p.std_error)
        .map(|(m, s)| m - 3.0 * s)
        .collect();
    let mut band = poly(&upper);
    let back: Vec<String> =
        p.ts.iter()
            .zip(&lower)
            .rev()
            .map(|(&t, &y)| format!("{:.2},{:.2}", sx(t), sy(y)))
            .collect();
    band.push(' ');
    band.push_str(&back.join(" "));

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{MARGIN}" y="24">{}</text>"#, escape(title));
    let (x0, y0, x1, y1) = (sx(0.0), sy(0.0), sx(t_max), sy(1.0));
    let _ = writeln!(
        svg,
        r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#
    );
    let _ = writeln!(
        svg,
        r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#
    );
    for k in 0..=4 {
        let f = k as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{:.2}</text>"#,
            sx(f * t_max),
            y0 + 16.0,
            f * t_max
        );
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{:.2}</text>"#,
            x0 - 6.0,
            sy(f) + 4.0,
            f
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">t</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 10.0
    );
    let _ = writeln!(
        svg,
        r##"<polygon points="{band}" fill="#1f77b4" fill-opacity="0.2" stroke="none"/>"##
    );
    let _ = writeln!(
        svg,
        r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="2"/>"##,
        poly(&p.measured)
    );
    let _ = writeln!(
        svg,
        r##"<polyline points="{}" fill="none" stroke="#d62728" stroke-width="2" stroke-dasharray="6 4"/>"##,
        poly(&p.bound)
    );
    let _ = writeln!(
        svg,
        r##"<text x="{:.2}" y="{:.2}" fill="#1f77b4">measured</text>"##,
        x1 - 120.0,
        y1 + 120.0
    );
    let _ = writeln!(
        svg,
        r##"<text x="{:.2}" y="{:.2}" fill="#d62728">1 - exp(-t²/α²), α = {:.4}</text>"##,
        x1 - 120.0,
        y1 + 140.0,
        p.alpha
    );
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Reads `report.json` back, for tests and tooling.
pub fn read_report(path: &Path) -> std::io::Result<Value> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(std::io::Error::other)
}
