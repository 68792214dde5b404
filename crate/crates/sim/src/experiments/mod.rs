//! Scripted reproductions of the protocol-layer evaluation. Every experiment
//! returns an [`ExperimentReport`] holding a table, the checks it ran and
//! whether each passed.

mod bench;
mod delivery;
mod timing;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

pub use bench::{bandwidth, crypto_bench, scalability, BenchStats};
pub use delivery::{fprr, gossip, FPRR_SEEDS, GOSSIP_SEEDS};
pub use timing::{clock_skew, edge_cases, revocation_latency, sequence_mode, zombie_bound};

pub const NAMES: [&str; 10] = [
    "zombie_bound",
    "revocation_latency",
    "fprr",
    "clock_skew",
    "gossip",
    "scalability",
    "edge_cases",
    "sequence_mode",
    "bandwidth",
    "crypto_bench",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub expected: String,
    pub measured: String,
    pub tolerance: String,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub name: String,
    pub seed: u64,
    pub parameters: Vec<(String, String)>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Columns whose values depend on the machine (wall-clock latencies).
    pub hardware_columns: Vec<String>,
    pub checks: Vec<Check>,
    pub runtime_ms: u64,
}

impl ExperimentReport {
    pub fn new(name: &str, seed: u64, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            seed,
            parameters: Vec::new(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
            hardware_columns: Vec::new(),
            checks: Vec::new(),
            runtime_ms: 0,
        }
    }

    pub fn param(&mut self, key: &str, value: impl ToString) {
        self.parameters.push((key.into(), value.to_string()));
    }

    pub fn hardware(&mut self, columns: &[&str]) {
        self.hardware_columns = columns.iter().map(|c| c.to_string()).collect();
    }

    pub fn row(&mut self, values: Vec<String>) {
        debug_assert_eq!(values.len(), self.columns.len());
        self.rows.push(values);
    }

    pub fn check(
        &mut self,
        name: &str,
        expected: impl ToString,
        measured: impl ToString,
        tolerance: &str,
        pass: bool,
    ) {
        self.checks.push(Check {
            name: name.into(),
            expected: expected.to_string(),
            measured: measured.to_string(),
            tolerance: tolerance.into(),
            pass,
        });
    }

    pub fn check_named(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    fn csv_of(&self, keep: impl Fn(&str) -> bool) -> String {
        let idx: Vec<usize> = (0..self.columns.len())
            .filter(|i| keep(&self.columns[*i]))
            .collect();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(idx.iter().map(|i| &self.columns[*i]))
            .expect("in-memory write");
        for row in &self.rows {
            w.write_record(idx.iter().map(|i| &row[*i]))
                .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
    }

    /// The table without machine-dependent columns; reproducible from
    /// (name, seed).
    pub fn to_csv(&self) -> String {
        self.csv_of(|c| !self.hardware_columns.iter().any(|h| h == c))
    }

    /// Key columns plus the machine-dependent ones.
    pub fn hardware_csv(&self) -> Option<String> {
        if self.hardware_columns.is_empty() {
            return None;
        }
        let first = self.columns[0].clone();
        Some(self.csv_of(|c| c == first || self.hardware_columns.iter().any(|h| h == c)))
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let _ = writeln!(
            s,
            "[{verdict}] {} (seed {}, {} ms)",
            self.name, self.seed, self.runtime_ms
        );
        for c in &self.checks {
            let mark = if c.pass { "pass" } else { "FAIL" };
            let _ = writeln!(
                s,
                "  {mark} {}: measured {} | expected {} | tolerance {}",
                c.name, c.measured, c.expected, c.tolerance
            );
        }
        s
    }

    /// Writes `<name>.csv`, `<name>.latency.csv` when applicable, and
    /// `<name>.txt` with the verdicts.
    pub fn write_to(&self, dir: &Path) -> std::io::Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let csv_path = dir.join(format!("{}.csv", self.name));
        std::fs::write(&csv_path, self.to_csv())?;
        written.push(csv_path);
        if let Some(hw) = self.hardware_csv() {
            let p = dir.join(format!("{}.latency.csv", self.name));
            std::fs::write(&p, hw)?;
            written.push(p);
        }
        let p = dir.join(format!("{}.txt", self.name));
        std::fs::write(&p, self.summary())?;
        written.push(p);
        Ok(written)
    }
}

pub fn run_experiment(name: &str, seed: u64) -> Option<ExperimentReport> {
    let start = Instant::now();
    let mut report = match name {
        "zombie_bound" => zombie_bound(seed),
        "revocation_latency" => revocation_latency(seed),
        "fprr" => fprr(seed),
        "clock_skew" => clock_skew(seed),
        "gossip" => gossip(seed),
        "scalability" => scalability(seed),
        "edge_cases" => edge_cases(seed),
        "sequence_mode" => sequence_mode(seed),
        "bandwidth" => bandwidth(seed),
        "crypto_bench" => crypto_bench(seed),
        _ => return None,
    };
    report.runtime_ms = start.elapsed().as_millis() as u64;
    Some(report)
}

pub fn run_all(seed: u64) -> Vec<ExperimentReport> {
    NAMES
        .iter()
        .filter_map(|n| run_experiment(n, seed))
        .collect()
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub(crate) fn pct(x: f64) -> String {
    format!("{:.4}", x * 100.0)
}

pub(crate) fn secs(ms: u64) -> String {
    format!("{:.1}", ms as f64 / 1000.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats() {
        assert_eq!(mean_std(&[]), (0.0, 0.0));
        assert_eq!(mean_std(&[2.0]), (2.0, 0.0));
        let (m, s) = mean_std(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(m, 5.0);
        assert!((s - 2.138).abs() < 1e-3);
    }

    #[test]
    fn report_csv_splits_hardware_columns() {
        let mut r = ExperimentReport::new("x", 1, &["n", "count", "mean_ms"]);
        r.hardware(&["mean_ms"]);
        r.row(vec!["10".into(), "3".into(), "0.2".into()]);
        assert_eq!(r.to_csv(), "n,count\n10,3\n");
        assert_eq!(r.hardware_csv().unwrap(), "n,mean_ms\n10,0.2\n");
        r.check("ok", 1, 1, "exact", true);
        assert!(r.passed());
        r.check("bad", 1, 2, "exact", false);
        assert!(!r.passed());
        assert!(r.summary().contains("FAIL bad"));
    }

    #[test]
    fn unknown_experiment() {
        assert!(run_experiment("nope", 0).is_none());
    }
}
