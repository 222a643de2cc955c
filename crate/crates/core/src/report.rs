//! The pass/fail record produced by every inequality check.

use serde::{Deserialize, Serialize};

/// Acceptance rule `lhs <= rhs (1 + rel) + abs`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Tolerance {
    pub const DEFAULT: Tolerance = Tolerance {
        rel: 0.05,
        abs: 1e-6,
    };
    pub const EXACT: Tolerance = Tolerance { rel: 0.0, abs: 0.0 };

    pub fn new(rel: f64, abs: f64) -> Self {
        Tolerance { rel, abs }
    }

    pub fn accepts(&self, lhs: f64, rhs: f64) -> bool {
        lhs <= rhs * (1.0 + self.rel) + self.abs
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::DEFAULT
    }
}

/// One checked inequality `lhs <= rhs`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    /// The explicit constant entering `rhs`.
    pub constant: f64,
    /// `rhs - lhs`.
    pub slack: f64,
    pub pass: bool,
    /// Cells per axis of the grid the check ran on (0 for sample-only checks).
    pub m: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl VerificationReport {
    pub fn new(
        name: impl Into<String>,
        lhs: f64,
        rhs: f64,
        constant: f64,
        m: usize,
        tol: Tolerance,
    ) -> Self {
        VerificationReport {
            name: name.into(),
            lhs,
            rhs,
            constant,
            slack: rhs - lhs,
            pass: tol.accepts(lhs, rhs),
            m,
            rel_tol: tol.rel,
            abs_tol: tol.abs,
        }
    }

    pub fn tolerance(&self) -> Tolerance {
        Tolerance::new(self.rel_tol, self.abs_tol)
    }

    /// The same comparison judged under `tol`.
    pub fn with_tolerance(mut self, tol: Tolerance) -> Self {
        self.pass = tol.accepts(self.lhs, self.rhs);
        self.rel_tol = tol.rel;
        self.abs_tol = tol.abs;
        self
    }

    pub const CSV_HEADER: &'static str = "name,lhs,rhs,constant,slack,pass,m";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:e},{:e},{:e},{:e},{},{}",
            csv_field(&self.name),
            self.lhs,
            self.rhs,
            self.constant,
            self.slack,
            self.pass,
            self.m
        )
    }
}

/// Header plus one row per report.
pub fn to_csv(reports: &[VerificationReport]) -> String {
    let mut out = String::from(VerificationReport::CSV_HEADER);
    out.push('\n');
    for r in reports {
        out.push_str(&r.csv_row());
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_contract() {
        let t = Tolerance::DEFAULT;
        assert!(t.accepts(1.05, 1.0));
        assert!(t.accepts(1.050_000_9, 1.0));
        assert!(!t.accepts(1.0501, 1.0));
        assert!(t.accepts(1e-7, 0.0));
        assert!(!t.accepts(f64::NAN, 1.0));
        assert!(Tolerance::EXACT.accepts(1.0, 1.0));
        assert!(!Tolerance::EXACT.accepts(1.0 + 1e-15, 1.0));
    }

    #[test]
    fn report_records_slack_and_tolerances() {
        let r = VerificationReport::new(
            "quadratic-transport-1d",
            0.5,
            2.0,
            40.0 / 9.0,
            256,
            Tolerance::DEFAULT,
        );
        assert!(r.pass);
        assert_eq!(r.slack, 1.5);
        assert_eq!(r.tolerance(), Tolerance::DEFAULT);
        let json = serde_json::to_string(&r).unwrap();
        let back: VerificationReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn csv_has_header_and_rows() {
        assert_eq!(to_csv(&[]), "name,lhs,rhs,constant,slack,pass,m\n");
        let r = VerificationReport::new("a,b", 1.0, 0.5, 1.0, 8, Tolerance::EXACT);
        let csv = to_csv(&[r]);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[1], "\"a,b\",1e0,5e-1,1e0,-5e-1,false,8");
    }
}
