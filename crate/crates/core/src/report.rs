//! Verdict reports: named assertions with measured gap and tolerance.

use std::fmt;

/// One assertion. `measured` is a gap (or a count) compared against
/// `tolerance`; `passed` is decided by the producer, which knows the sense of
/// the comparison.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub kind: CheckKind,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckKind {
    AtMost,
    AtLeast,
    Flag,
    Info,
}

impl Check {
    /// Passes iff `measured <= tolerance`.
    pub fn at_most(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Check { name: name.into(), measured, tolerance, passed: measured <= tolerance, kind: CheckKind::AtMost }
    }

    /// Passes iff `measured >= tolerance`.
    pub fn at_least(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Check { name: name.into(), measured, tolerance: threshold, passed: measured >= threshold, kind: CheckKind::AtLeast }
    }

    pub fn flag(name: impl Into<String>, passed: bool) -> Self {
        let v = if passed { 1.0 } else { 0.0 };
        Check { name: name.into(), measured: v, tolerance: 1.0, passed, kind: CheckKind::Flag }
    }

    /// A measurement reported for information only; always passes.
    pub fn info(name: impl Into<String>, measured: f64) -> Self {
        Check { name: name.into(), measured, tolerance: f64::NAN, passed: true, kind: CheckKind::Info }
    }

    /// Re-decides an upper-bound check against a new tolerance.
    pub fn with_tolerance(mut self, tolerance: f64) -> Self {
        if self.kind == CheckKind::AtMost && self.tolerance > 0.0 {
            self.tolerance = tolerance;
            self.passed = self.measured <= tolerance;
        }
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Report {
    pub title: String,
    pub checks: Vec<Check>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn new(title: impl Into<String>) -> Self {
        Report { title: title.into(), ..Default::default() }
    }

    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn find(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Replaces the tolerance of every positive upper-bound check.
    pub fn override_tolerance(&mut self, tolerance: f64) {
        self.checks = std::mem::take(&mut self.checks).into_iter().map(|c| c.with_tolerance(tolerance)).collect();
    }

    pub fn extend(&mut self, other: Report) {
        let prefix = other.title;
        self.checks.extend(other.checks.into_iter().map(|mut c| {
            c.name = format!("{prefix}: {}", c.name);
            c
        }));
        self.notes.extend(other.notes.into_iter().map(|n| format!("{prefix}: {n}")));
    }
}

/// 12 significant digits, `-inf`/`inf` for infinities.
pub fn fmt_num(x: f64) -> String {
    if x == f64::NEG_INFINITY {
        "-inf".into()
    } else if x == f64::INFINITY {
        "inf".into()
    } else if x.is_nan() {
        "nan".into()
    } else if x == 0.0 {
        "0".into()
    } else {
        let exp = x.abs().log10().floor() as i32;
        if (-5..12).contains(&exp) {
            let decimals = (11 - exp).max(0) as usize;
            let s = format!("{x:.decimals$}");
            if s.contains('.') {
                s.trim_end_matches('0').trim_end_matches('.').to_string()
            } else {
                s
            }
        } else {
            format!("{x:.11e}")
        }
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "== {} ==", self.title)?;
        for c in &self.checks {
            let verdict = if c.passed { "ok  " } else { "FAIL" };
            if c.tolerance.is_nan() {
                writeln!(f, "{verdict} {:<48} {}", c.name, fmt_num(c.measured))?;
            } else {
                writeln!(
                    f,
                    "{verdict} {:<48} {} (tol {})",
                    c.name,
                    fmt_num(c.measured),
                    fmt_num(c.tolerance)
                )?;
            }
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        let (failed, total) = (self.failures().count(), self.checks.len());
        write!(f, "{}: {}/{} passed", if failed == 0 { "PASS" } else { "FAIL" }, total - failed, total)
    }
}
