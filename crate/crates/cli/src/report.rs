//! Reports: one TOML document per check, a roll-up `report.toml` carrying
//! a digest that excludes the timestamp, `summary.csv`, and gnuplot-ready
//! CSV tables.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use morrey_lab::io::fmt17;
use morrey_lab::verify::FitResult;

use crate::CliError;

pub const REPORT_SCHEMA: u32 = 1;
pub const REPORT_FILE: &str = "report.toml";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const SUMMARY_HEADER: &str = "name,kind,hard,pass,metric,value,bound,relation";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    #[serde(rename = "<")]
    Below,
}

impl Relation {
    pub fn holds(self, value: f64, bound: f64) -> bool {
        match self {
            Self::AtMost => value <= bound,
            Self::AtLeast => value >= bound,
            Self::Below => value < bound,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Self::AtMost => "<=",
            Self::AtLeast => ">=",
            Self::Below => "<",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metric {
    pub name: String,
    pub value: f64,
    pub bound: f64,
    pub relation: Relation,
    pub pass: bool,
}

/// Flattened [`FitResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitRecord {
    pub label: String,
    pub slope: f64,
    pub std_err: f64,
    pub intercept: f64,
    pub x_min: f64,
    pub x_max: f64,
    pub predicted: f64,
    pub deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl FitRecord {
    pub fn new(label: impl Into<String>, f: &FitResult) -> Self {
        Self {
            label: label.into(),
            slope: f.slope,
            std_err: f.std_err,
            intercept: f.intercept,
            x_min: f.range.0,
            x_max: f.range.1,
            predicted: f.predicted,
            deviation: f.deviation,
            tolerance: f.tolerance,
            pass: f.pass,
        }
    }
}

/// Numeric table written as CSV next to the report.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(file: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            file: file.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: vec![],
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.columns.join(",");
        s.push('\n');
        for r in &self.rows {
            let cells: Vec<String> = r.iter().map(|v| fmt17(*v)).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckRecord {
    pub name: String,
    pub kind: String,
    pub hard: bool,
    pub pass: bool,
    /// Set when the check could not run; such a check fails.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default)]
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub fits: Vec<FitRecord>,
    #[serde(default)]
    pub notes: Vec<String>,
    /// CSV files under `tables/`.
    #[serde(default)]
    pub tables: Vec<String>,
    #[serde(skip)]
    pub table_data: Vec<Table>,
}

impl CheckRecord {
    pub fn new(name: &str, kind: &str, hard: bool) -> Self {
        Self {
            name: name.into(),
            kind: kind.into(),
            hard,
            pass: true,
            error: None,
            metrics: vec![],
            fits: vec![],
            notes: vec![],
            tables: vec![],
            table_data: vec![],
        }
    }

    pub fn failed(name: &str, kind: &str, hard: bool, error: String) -> Self {
        Self {
            pass: false,
            error: Some(error),
            ..Self::new(name, kind, hard)
        }
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64, bound: f64, relation: Relation) -> bool {
        let pass = relation.holds(value, bound);
        self.metrics.push(Metric {
            name: name.into(),
            value,
            bound,
            relation,
            pass,
        });
        self.pass &= pass;
        pass
    }

    pub fn flag(&mut self, name: impl Into<String>, ok: bool) -> bool {
        self.metric(name, if ok { 1.0 } else { 0.0 }, 1.0, Relation::AtLeast)
    }

    /// Records the fit and its slope deviation as a metric.
    pub fn fit(&mut self, label: impl Into<String>, f: &FitResult) {
        let name = match self.fits.len() {
            0 => "slope_deviation".to_string(),
            k => format!("slope_deviation_{k}"),
        };
        self.metric(name, f.deviation, f.tolerance, Relation::AtMost);
        self.pass &= f.pass;
        self.fits.push(FitRecord::new(label, f));
    }

    pub fn note(&mut self, s: impl Into<String>) {
        self.notes.push(s.into());
    }

    pub fn table(&mut self, mut t: Table) {
        t.file = format!("{}-{}.csv", self.name, t.file);
        self.tables.push(t.file.clone());
        self.table_data.push(t);
    }

    /// First failing metric, else the first metric.
    fn headline(&self) -> Option<&Metric> {
        self.metrics.iter().find(|m| !m.pass).or(self.metrics.first())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Fingerprint {
    pub package: String,
    pub version: String,
    pub os: String,
    pub arch: String,
}

impl Fingerprint {
    pub fn current() -> Self {
        Self {
            package: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentReport {
    pub schema_version: u32,
    /// Seconds since the Unix epoch; not covered by `digest`.
    pub timestamp: String,
    /// SHA-256 of this document with `timestamp` and `digest` empty.
    pub digest: String,
    pub fingerprint: Fingerprint,
    pub seed: u64,
    pub pass: bool,
    pub hard_failures: usize,
    pub soft_failures: usize,
    /// The effective configuration, re-serialized.
    pub config: String,
    #[serde(default)]
    pub checks: Vec<CheckRecord>,
}

impl ExperimentReport {
    pub fn new(seed: u64, config: String, checks: Vec<CheckRecord>) -> Self {
        let hard_failures = checks.iter().filter(|c| c.hard && !c.pass).count();
        let soft_failures = checks.iter().filter(|c| !c.hard && !c.pass).count();
        let mut r = Self {
            schema_version: REPORT_SCHEMA,
            timestamp: String::new(),
            digest: String::new(),
            fingerprint: Fingerprint::current(),
            seed,
            pass: hard_failures == 0,
            hard_failures,
            soft_failures,
            config,
            checks,
        };
        r.digest = r.compute_digest();
        r
    }

    pub fn compute_digest(&self) -> String {
        let blank = Self {
            timestamp: String::new(),
            digest: String::new(),
            ..self.clone()
        };
        let text = toml::to_string(&blank).expect("report serializes");
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn stamp(&mut self) {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        self.timestamp = secs.to_string();
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("report serializes")
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Io(format!("report: {e}")))
    }

    pub fn summary_csv(&self) -> String {
        let mut s = String::from(SUMMARY_HEADER);
        s.push('\n');
        for c in &self.checks {
            let (metric, value, bound, rel) = match c.headline() {
                Some(m) => (m.name.as_str(), fmt17(m.value), fmt17(m.bound), m.relation.symbol()),
                None => ("", String::new(), String::new(), ""),
            };
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                c.name, c.kind, c.hard, c.pass, metric, value, bound, rel
            ));
        }
        s
    }

    /// Writes `report.toml`, `summary.csv`, `checks/NN-name.toml` and
    /// `tables/*.csv` under `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
        fs::create_dir_all(dir.join("checks")).map_err(io)?;
        fs::create_dir_all(dir.join("tables")).map_err(io)?;
        fs::write(dir.join(REPORT_FILE), self.to_toml()).map_err(io)?;
        fs::write(dir.join(SUMMARY_FILE), self.summary_csv()).map_err(io)?;
        for (k, c) in self.checks.iter().enumerate() {
            let doc = toml::to_string(c).map_err(|e| CliError::Io(e.to_string()))?;
            fs::write(dir.join("checks").join(format!("{:02}-{}.toml", k + 1, c.name)), doc).map_err(io)?;
            for t in &c.table_data {
                fs::write(dir.join("tables").join(&t.file), t.to_csv()).map_err(io)?;
            }
        }
        Ok(())
    }
}

/// One parsed row of `summary.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub name: String,
    pub kind: String,
    pub hard: bool,
    pub pass: bool,
    pub metric: String,
    pub value: Option<f64>,
    pub bound: Option<f64>,
    pub relation: String,
}

pub fn parse_summary(text: &str) -> Result<Vec<SummaryRow>, CliError> {
    let mut lines = text.lines();
    if lines.next() != Some(SUMMARY_HEADER) {
        return Err(CliError::Io("summary.csv: unexpected header".into()));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            let bad = || CliError::Io(format!("summary.csv line {}: {line:?}", i + 2));
            if f.len() != 8 {
                return Err(bad());
            }
            let num = |s: &str| -> Result<Option<f64>, CliError> {
                if s.is_empty() {
                    Ok(None)
                } else {
                    s.parse().map(Some).map_err(|_| bad())
                }
            };
            Ok(SummaryRow {
                name: f[0].into(),
                kind: f[1].into(),
                hard: f[2].parse().map_err(|_| bad())?,
                pass: f[3].parse().map_err(|_| bad())?,
                metric: f[4].into(),
                value: num(f[5])?,
                bound: num(f[6])?,
                relation: f[7].into(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_report_has_header_only_summary() {
        let r = ExperimentReport::new(0, String::new(), vec![]);
        assert_eq!(r.summary_csv(), format!("{SUMMARY_HEADER}\n"));
        assert!(parse_summary(&r.summary_csv()).unwrap().is_empty());
        assert!(r.pass);
    }

    #[test]
    fn structured_text_round_trips() {
        let mut c = CheckRecord::new("a", "kernel_oracle", true);
        c.metric("err", 1.0 / 3.0, 1e-6, Relation::AtMost);
        c.note("x");
        let mut r = ExperimentReport::new(7, "seed = 7\n".into(), vec![c]);
        r.stamp();
        let back = ExperimentReport::parse(&r.to_toml()).unwrap();
        assert_eq!(back, r);
        assert!(!back.pass);
        assert_eq!(back.compute_digest(), r.digest);
        let rows = parse_summary(&r.summary_csv()).unwrap();
        assert_eq!(rows[0].value, Some(1.0 / 3.0));
        assert!(!rows[0].pass);
    }

    #[test]
    fn digest_ignores_timestamp() {
        let mut a = ExperimentReport::new(1, String::new(), vec![]);
        let b = a.clone();
        a.stamp();
        assert_eq!(a.compute_digest(), b.digest);
    }
}
