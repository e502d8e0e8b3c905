use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use cgm_core::experiments::Gate;
use serde::Serialize;
use serde_json::Value;

use crate::config::Resolved;

pub const SCHEMA_VERSION: u32 = 1;

/// Gate as written to disk. Wall-clock gates keep only their verdict here;
/// the measured time goes to [`Timing`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GateRecord {
    pub group: String,
    pub name: String,
    pub passed: bool,
    pub observed: Option<f64>,
    pub bound: f64,
    pub detail: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Timing {
    pub start_unix_ms: u128,
    pub end_unix_ms: u128,
    /// `(label, seconds)` for every timed section and wall-clock gate.
    pub durations: Vec<(String, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: Resolved,
    pub seed: u64,
    pub passed: bool,
    pub gates_passed: usize,
    pub gates_total: usize,
}

/// Everything except `timing` is a pure function of the command and config.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub manifest: Manifest,
    pub gates: Vec<GateRecord>,
    pub data: Value,
    pub timing: Timing,
}

pub fn now_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis())
}

fn is_wall_clock(g: &Gate) -> bool {
    g.name.contains("seconds")
}

/// Collects gates and timings for one run.
pub struct Recorder {
    start: u128,
    gates: Vec<GateRecord>,
    durations: Vec<(String, f64)>,
}

impl Default for Recorder {
    fn default() -> Self {
        Self::new()
    }
}

impl Recorder {
    pub fn new() -> Self {
        Recorder { start: now_ms(), gates: Vec::new(), durations: Vec::new() }
    }

    pub fn gates(&mut self, group: &str, gates: impl IntoIterator<Item = Gate>) {
        for g in gates {
            let clock = is_wall_clock(&g);
            if clock {
                self.durations.push((format!("{group}: {}", g.name), g.observed));
            }
            self.gates.push(GateRecord {
                group: group.to_string(),
                name: g.name,
                passed: g.passed,
                observed: (!clock).then_some(g.observed),
                bound: g.bound,
                detail: (!clock).then_some(g.detail),
            });
        }
    }

    pub fn duration(&mut self, label: impl Into<String>, seconds: f64) {
        self.durations.push((label.into(), seconds));
    }

    pub fn finish(self, command: &str, config: &Resolved, data: Value) -> Report {
        let passed = self.gates.iter().filter(|g| g.passed).count();
        Report {
            schema_version: SCHEMA_VERSION,
            manifest: Manifest {
                tool: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                command: command.to_string(),
                config: config.clone(),
                seed: config.experiment.seed,
                passed: passed == self.gates.len(),
                gates_passed: passed,
                gates_total: self.gates.len(),
            },
            gates: self.gates,
            data,
            timing: Timing { start_unix_ms: self.start, end_unix_ms: now_ms(), durations: self.durations },
        }
    }
}

/// A CSV table of raw values.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn from_gates(gates: &[GateRecord]) -> Self {
        let mut t = Table::new(&["group", "gate", "passed", "observed", "bound"]);
        for g in gates {
            t.push(vec![
                g.group.clone(),
                g.name.clone(),
                g.passed.to_string(),
                g.observed.map_or(String::new(), |o| o.to_string()),
                g.bound.to_string(),
            ]);
        }
        t
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn write_json(report: &Report, path: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n").with_context(|| format!("cannot write {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}")?;
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{resolve, Layer};

    #[test]
    fn wall_clock_gates_move_to_timing() {
        let mut r = Recorder::new();
        r.gates("perf", [Gate::at_most("dp seconds", 0.2, 1.0), Gate::at_least("fraction", 0.97, 0.95)]);
        let cfg = resolve(&Layer::new(), &Layer::new(), &Layer::new()).unwrap();
        let rep = r.finish("test", &cfg, Value::Null);
        assert_eq!(rep.gates[0].observed, None);
        assert_eq!(rep.gates[1].observed, Some(0.97));
        assert_eq!(rep.timing.durations, vec![("perf: dp seconds".to_string(), 0.2)]);
        assert!(rep.manifest.passed);
        assert_eq!(rep.schema_version, SCHEMA_VERSION);
    }

    #[test]
    fn csv_quotes_fields() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("t.csv");
        let mut t = Table::new(&["a", "b"]);
        t.push(vec!["x, y".into(), "say \"hi\"".into()]);
        t.write(&p).unwrap();
        assert_eq!(std::fs::read_to_string(&p).unwrap(), "a,b\n\"x, y\",\"say \"\"hi\"\"\"\n");
    }
}
