//! Error series on an evaluation grid and their CSV form.
//!
//! Layout: a header `t,<name>_rel_err,...` (or `_abs_err`), one row per grid
//! point, then `#`-prefixed footers:
//!
//! ```text
//! # max_rel,<name>,<value>
//! # l2_rel,<name>,<value>
//! # failed,<name>,<message>
//! # log_failures,<name>,<i> <j> ...
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so parsing an
//! emitted report gives back the same numbers bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorKind {
    #[default]
    Relative,
    Absolute,
}

impl ErrorKind {
    fn suffix(self) -> &'static str {
        match self {
            ErrorKind::Relative => "_rel_err",
            ErrorKind::Absolute => "_abs_err",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub errors: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodFailure {
    pub method: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ErrorReport {
    pub kind: ErrorKind,
    pub grid: Vec<f64>,
    pub series: Vec<Series>,
    pub failures: Vec<MethodFailure>,
    /// Per series, the sample or grid indices whose Riemannian log did not converge.
    pub log_failures: Vec<(String, Vec<usize>)>,
}

impl ErrorReport {
    pub fn new(kind: ErrorKind, grid: Vec<f64>) -> Self {
        ErrorReport { kind, grid, ..Default::default() }
    }

    pub fn series(&self, name: &str) -> Option<&Series> {
        self.series.iter().find(|s| s.name == name)
    }

    pub fn failure(&self, name: &str) -> Option<&MethodFailure> {
        self.failures.iter().find(|f| f.method == name)
    }

    pub fn log_failures_of(&self, name: &str) -> Option<&[usize]> {
        self.log_failures.iter().find(|(n, _)| n == name).map(|(_, v)| v.as_slice())
    }

    /// Maximum error of a series.
    pub fn max_rel(&self, name: &str) -> Option<f64> {
        self.series(name).map(|s| s.errors.iter().copied().fold(0.0, f64::max))
    }

    /// Root mean square of the series over the grid interval, with the
    /// integral taken by the trapezoidal rule: `sqrt(int e^2 dt / (b - a))`.
    pub fn l2_rel(&self, name: &str) -> Option<f64> {
        let s = self.series(name)?;
        Some(trapz_rms(&self.grid, &s.errors))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for s in &self.series {
            let _ = write!(out, ",{}{}", s.name, self.kind.suffix());
        }
        out.push('\n');
        for (i, t) in self.grid.iter().enumerate() {
            let _ = write!(out, "{t:?}");
            for s in &self.series {
                let _ = write!(out, ",{:?}", s.errors[i]);
            }
            out.push('\n');
        }
        for s in &self.series {
            let _ = writeln!(out, "# max_rel,{},{:?}", s.name, self.max_rel(&s.name).unwrap_or(0.0));
        }
        for s in &self.series {
            let _ = writeln!(out, "# l2_rel,{},{:?}", s.name, self.l2_rel(&s.name).unwrap_or(0.0));
        }
        for f in &self.failures {
            let msg: String = f.message.chars().map(|c| if c == '\n' { ' ' } else { c }).collect();
            let _ = writeln!(out, "# failed,{},{}", f.method, msg);
        }
        for (name, idx) in &self.log_failures {
            let joined: Vec<String> = idx.iter().map(|i| i.to_string()).collect();
            let _ = writeln!(out, "# log_failures,{},{}", name, joined.join(" "));
        }
        out
    }
}

fn trapz_rms(grid: &[f64], errors: &[f64]) -> f64 {
    if grid.len() < 2 {
        return errors.first().map_or(0.0, |e| e.abs());
    }
    let mut acc = 0.0;
    for i in 0..grid.len() - 1 {
        acc += 0.5 * (grid[i + 1] - grid[i]) * (errors[i].powi(2) + errors[i + 1].powi(2));
    }
    let width = grid[grid.len() - 1] - grid[0];
    if width > 0.0 {
        (acc / width).sqrt()
    } else {
        0.0
    }
}

/// Writes the CSV form of `report` to `path`.
pub fn emit_report(report: &ErrorReport, path: &Path) -> Result<()> {
    fs::write(path, report.to_csv()).map_err(|source| Error::Io { path: path.to_path_buf(), source })
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Parse(format!("line {line}: '{s}' is not a number")))
}

/// Reads back the output of [`ErrorReport::to_csv`]. Footer statistics are
/// derived data and are recomputed rather than stored.
pub fn parse_report(text: &str) -> Result<ErrorReport> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse("empty report".into()))?;
    let mut cols = header.split(',');
    if cols.next() != Some("t") {
        return Err(Error::Parse(format!("unexpected header '{header}'")));
    }
    let mut kind = ErrorKind::Relative;
    let mut names = Vec::new();
    for (i, c) in cols.enumerate() {
        let (name, k) = if let Some(n) = c.strip_suffix("_rel_err") {
            (n, ErrorKind::Relative)
        } else if let Some(n) = c.strip_suffix("_abs_err") {
            (n, ErrorKind::Absolute)
        } else {
            return Err(Error::Parse(format!("column '{c}' lacks an error suffix")));
        };
        if i == 0 {
            kind = k;
        } else if k != kind {
            return Err(Error::Parse("mixed relative and absolute columns".into()));
        }
        names.push(name.to_string());
    }
    let mut report = ErrorReport::new(kind, Vec::new());
    report.series = names.into_iter().map(|name| Series { name, errors: Vec::new() }).collect();

    for (no, line) in lines {
        let no = no + 1;
        if line.is_empty() {
            continue;
        }
        if let Some(footer) = line.strip_prefix("# ") {
            let mut parts = footer.splitn(3, ',');
            let key = parts.next().unwrap_or_default();
            let name = parts.next().unwrap_or_default().to_string();
            let value = parts.next().unwrap_or_default();
            match key {
                "max_rel" | "l2_rel" => {}
                "failed" => report.failures.push(MethodFailure { method: name, message: value.to_string() }),
                "log_failures" => {
                    let idx = value
                        .split_whitespace()
                        .map(|v| v.parse::<usize>().map_err(|_| Error::Parse(format!("line {no}: bad index '{v}'"))))
                        .collect::<Result<Vec<_>>>()?;
                    report.log_failures.push((name, idx));
                }
                other => return Err(Error::Parse(format!("line {no}: unknown footer '{other}'"))),
            }
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != report.series.len() + 1 {
            return Err(Error::Parse(format!(
                "line {no}: expected {} fields, found {}",
                report.series.len() + 1,
                fields.len()
            )));
        }
        report.grid.push(parse_f64(fields[0], no)?);
        for (s, f) in report.series.iter_mut().zip(&fields[1..]) {
            s.errors.push(parse_f64(f, no)?);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ErrorReport {
        let mut r = ErrorReport::new(ErrorKind::Relative, vec![0.0, 0.5, 1.0]);
        r.series.push(Series { name: "hermite".into(), errors: vec![0.0, 1.25e-7, 3.0e-300] });
        r.series.push(Series { name: "geodesic".into(), errors: vec![0.1, 0.2, 0.30000000000000004] });
        r.failures.push(MethodFailure { method: "rbf".into(), message: "log failed, twice".into() });
        r.log_failures.push(("rbf".into(), vec![0, 1]));
        r
    }

    #[test]
    fn roundtrip_is_exact() {
        let r = sample();
        let back = parse_report(&r.to_csv()).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_csv(), r.to_csv());
    }

    #[test]
    fn empty_grid_is_header_only() {
        let mut r = ErrorReport::new(ErrorKind::Relative, vec![]);
        r.series.push(Series { name: "hermite".into(), errors: vec![] });
        let csv = r.to_csv();
        assert!(csv.starts_with("t,hermite_rel_err\n"));
        assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1);
    }

    #[test]
    fn statistics() {
        let r = sample();
        assert_eq!(r.max_rel("geodesic"), Some(0.30000000000000004));
        // constant series has rms equal to the constant
        let mut c = ErrorReport::new(ErrorKind::Absolute, vec![0.0, 0.3, 1.0]);
        c.series.push(Series { name: "x".into(), errors: vec![2.0; 3] });
        assert!((c.l2_rel("x").unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_report("").is_err());
        assert!(parse_report("x,hermite_rel_err\n").is_err());
        assert!(parse_report("t,hermite_rel_err\n0.0,abc\n").is_err());
        assert!(parse_report("t,hermite_rel_err\n0.0,1.0,2.0\n").is_err());
    }
}
