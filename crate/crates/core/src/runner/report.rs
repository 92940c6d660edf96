//! Report assembly and output files.
//!
//! `report.json` holds only values that are functions of the config and the
//! seed; wall-clock data goes to the `run_meta.json` sidecar.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{Map, Value};

use super::config::ExperimentHeader;
use crate::error::{Error, Result};

#[derive(Clone, Debug, Serialize)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Value>,
}

impl Table {
    pub fn from_values(name: &str, columns: &[&str], rows: Vec<Value>) -> Self {
        Table {
            name: name.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows,
        }
    }

    /// A table whose columns are the fields of `T`, in declaration order.
    pub fn from_rows<T: Serialize>(name: &str, rows: &[T]) -> Self {
        let rows: Vec<Value> = rows.iter().map(|r| serde_json::to_value(r).expect("row serializes")).collect();
        let columns = rows
            .first()
            .and_then(Value::as_object)
            .map(|o| o.keys().cloned().collect())
            .unwrap_or_default();
        Table {
            name: name.to_string(),
            columns,
            rows,
        }
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(std::io::Error::other(e));
        w.write_record(&self.columns).map_err(io)?;
        for row in &self.rows {
            let cells = self.columns.iter().map(|c| match row.get(c) {
                Some(Value::String(s)) => s.clone(),
                Some(Value::Null) | None => String::new(),
                Some(v) => v.to_string(),
            });
            w.write_record(cells).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub kind: String,
    pub passed: bool,
    pub summary: String,
    pub details: Value,
    pub tables: Vec<Table>,
}

impl CheckOutcome {
    pub fn new(kind: &str, passed: bool, summary: String, details: Value) -> Self {
        CheckOutcome {
            name: String::new(),
            kind: kind.to_string(),
            passed,
            summary,
            details,
            tables: Vec::new(),
        }
    }

    pub fn failed(name: &str, kind: &str, summary: String) -> Self {
        CheckOutcome {
            name: name.to_string(),
            kind: kind.to_string(),
            passed: false,
            summary,
            details: Value::Object(Map::new()),
            tables: Vec::new(),
        }
    }

    pub fn with_table(mut self, t: Table) -> Self {
        self.tables.push(t);
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Failure {
    pub check: String,
    pub kind: String,
    pub reason: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub experiment: ExperimentHeader,
    pub passed: bool,
    pub failures: Vec<Failure>,
    pub checks: Vec<CheckOutcome>,
}

impl Report {
    pub fn new(experiment: ExperimentHeader, checks: Vec<CheckOutcome>) -> Self {
        let failures: Vec<Failure> = checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| Failure {
                check: c.name.clone(),
                kind: c.kind.clone(),
                reason: c.summary.clone(),
            })
            .collect();
        Report {
            experiment,
            passed: failures.is_empty(),
            failures,
            checks,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Clone, Debug, Serialize)]
struct RunMeta<'a> {
    tool_version: &'a str,
    started_unix: u64,
    finished_unix: u64,
    workers: Option<usize>,
    force: bool,
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn file_stem(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

/// Writes `report.json`, `run_meta.json`, `config.toml` and one CSV per table.
/// Returns the paths written.
pub fn write_outputs(
    report: &Report,
    config_text: &str,
    out: &Path,
    started_unix: u64,
    workers: Option<usize>,
    force: bool,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    let mut put = |name: String, body: &str| -> Result<()> {
        let path = out.join(name);
        fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    put("report.json".into(), &report.to_json())?;
    let meta = RunMeta {
        tool_version: env!("CARGO_PKG_VERSION"),
        started_unix,
        finished_unix: unix_now(),
        workers,
        force,
    };
    put("run_meta.json".into(), &(serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n"))?;
    put("config.toml".into(), config_text)?;
    for check in &report.checks {
        for t in &check.tables {
            put(format!("{}__{}.csv", file_stem(&check.name), file_stem(&t.name)), &t.to_csv()?)?;
        }
    }
    Ok(written)
}

/// Seconds since the epoch, for the sidecar.
pub fn now() -> u64 {
    unix_now()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn csv_quotes_labels() {
        let t = Table::from_values("f", &["chi", "re"], vec![json!({"chi": "(0,0):1", "re": 0.5})]);
        assert_eq!(t.to_csv().unwrap(), "chi,re\n\"(0,0):1\",0.5\n");
    }
}
