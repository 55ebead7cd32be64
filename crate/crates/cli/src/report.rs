//! Check records, tables and the JSON report.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;

/// One verified quantity with its acceptance window.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Inclusive lower bound, if any.
    pub lower: Option<f64>,
    /// Exclusive upper bound, if any.
    pub upper: Option<f64>,
    pub pass: bool,
    pub runtime_s: f64,
}

impl Check {
    /// Passes when `value < tol`.
    pub fn below(name: impl Into<String>, value: f64, tol: f64) -> Self {
        Self::window(name, value, None, Some(tol))
    }

    /// Passes when `value > bound`.
    pub fn above(name: impl Into<String>, value: f64, bound: f64) -> Self {
        let mut c = Self::window(name, value, Some(bound), None);
        c.pass = value > bound;
        c
    }

    /// Passes when `lower ≤ value ≤ upper`.
    pub fn within(name: impl Into<String>, value: f64, lower: f64, upper: f64) -> Self {
        let mut c = Self::window(name, value, Some(lower), Some(upper));
        c.pass = (lower..=upper).contains(&value);
        c
    }

    /// Passes when `flag` holds; the value is recorded as 1 or 0.
    pub fn holds(name: impl Into<String>, flag: bool) -> Self {
        let mut c = Self::window(name, if flag { 1.0 } else { 0.0 }, Some(1.0), None);
        c.pass = flag;
        c
    }

    fn window(name: impl Into<String>, value: f64, lower: Option<f64>, upper: Option<f64>) -> Self {
        let pass = value.is_finite()
            && lower.is_none_or(|l| value >= l)
            && upper.is_none_or(|u| value < u);
        Self {
            name: name.into(),
            value,
            lower,
            upper,
            pass,
            runtime_s: 0.0,
        }
    }

    pub fn timed(mut self, runtime_s: f64) -> Self {
        self.runtime_s = runtime_s;
        self
    }
}

/// Runs `f` and returns its result with the elapsed wall time in seconds.
pub fn stopwatch<T>(f: impl FnOnce() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

/// A named table written as `<name>.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Largest value of column `col`.
    pub fn column_max(&self, col: &str) -> Option<f64> {
        let i = self.header.iter().position(|h| h == col)?;
        self.rows.iter().map(|r| r[i]).reduce(f64::max)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(format!("{}.csv", self.name));
        let mut w = csv::Writer::from_path(&path)
            .with_context(|| format!("creating {}", path.display()))?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Outcome of one scenario.
#[derive(Clone, Debug, Serialize)]
pub struct VerificationReport {
    pub scenario: String,
    pub seed: u64,
    pub tol_scale: f64,
    pub pass: bool,
    pub checks: Vec<Check>,
    /// Tables written next to the report.
    pub tables: Vec<String>,
    #[serde(skip)]
    pub data: Vec<Table>,
}

impl VerificationReport {
    pub fn new(scenario: &str, seed: u64, tol_scale: f64) -> Self {
        Self {
            scenario: scenario.to_string(),
            seed,
            tol_scale,
            pass: true,
            checks: Vec::new(),
            tables: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn check(&mut self, c: Check) {
        if c.pass {
            log::info!("{}: {} = {:e} ok", self.scenario, c.name, c.value);
        } else {
            log::warn!(
                "{}: {} = {:e} outside [{:?}, {:?})",
                self.scenario,
                c.name,
                c.value,
                c.lower,
                c.upper
            );
        }
        self.pass &= c.pass;
        self.checks.push(c);
    }

    pub fn table(&mut self, t: Table) {
        self.tables.push(format!("{}.csv", t.name));
        self.data.push(t);
    }

    pub fn find(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }

    /// Writes every table plus `report.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        for t in &self.data {
            t.write(dir)?;
        }
        write_json(&dir.join("report.json"), self)
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    use std::io::Write;
    writeln!(w)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn windows() {
        assert!(Check::below("a", 0.5, 1.0).pass);
        assert!(!Check::below("a", 1.0, 1.0).pass);
        assert!(!Check::below("a", f64::NAN, 1.0).pass);
        assert!(Check::above("a", 2.0, 1.0).pass);
        assert!(!Check::above("a", 1.0, 1.0).pass);
        assert!(Check::within("a", 4.0, 3.5, 4.5).pass);
        assert!(!Check::within("a", 4.6, 3.5, 4.5).pass);
        assert!(!Check::holds("a", false).pass);
    }

    #[test]
    fn summary_is_conjunction() {
        let mut r = VerificationReport::new("x", 0, 1.0);
        r.check(Check::below("a", 0.0, 1.0));
        assert!(r.pass);
        r.check(Check::below("b", 2.0, 1.0));
        assert!(!r.pass);
        r.check(Check::below("c", 0.0, 1.0));
        assert!(!r.pass);
        assert_eq!(r.failures().count(), 1);
    }

    #[test]
    fn table_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new("t", &["k", "v"]);
        t.push(vec![0.0, 1e-20]);
        t.push(vec![1.0, 0.5]);
        t.write(dir.path()).unwrap();
        let text = fs::read_to_string(dir.path().join("t.csv")).unwrap();
        assert_eq!(text, "k,v\n0.0,1e-20\n1.0,0.5\n");
        assert_eq!(t.column_max("v"), Some(0.5));
    }
}
