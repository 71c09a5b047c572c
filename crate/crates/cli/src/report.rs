//! Summary records and artifact files of one run.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::ExperimentConfig;

/// One violated property, in machine-readable form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Failure {
    pub property: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bound: Option<f64>,
}

impl Failure {
    pub fn new(property: &str, message: impl Into<String>) -> Self {
        Failure { property: property.into(), message: message.into(), node: None, value: None, bound: None }
    }

    pub fn node(mut self, node: usize) -> Self {
        self.node = Some(node);
        self
    }

    pub fn value(mut self, value: f64, bound: f64) -> Self {
        self.value = Some(value);
        self.bound = Some(bound);
        self
    }
}

/// Results, failures and CSV series collected by a subcommand.
#[derive(Debug, Default)]
pub struct Outcome {
    pub results: Map<String, Value>,
    pub failures: Vec<Failure>,
    pub notes: Vec<String>,
    pub files: Vec<(String, String)>,
}

impl Outcome {
    pub fn set(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("result serializes");
        self.results.insert(key.to_string(), v);
    }

    pub fn fail(&mut self, f: Failure) {
        self.failures.push(f);
    }

    /// Records a failure named `property` unless `ok`.
    pub fn require(&mut self, ok: bool, property: &str, message: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(Failure::new(property, message()));
        }
    }

    pub fn note(&mut self, msg: impl Into<String>) {
        self.notes.push(msg.into());
    }

    pub fn file(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }

    pub fn pass(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    subcommand: &'a str,
    config_hash: String,
    pass: bool,
    failures: &'a [Failure],
    notes: &'a [String],
    results: &'a Map<String, Value>,
    files: Vec<&'a str>,
    config: &'a ExperimentConfig,
}

pub const SUMMARY_FILE: &str = "summary.json";

/// Serializes the summary of a run.
pub fn summary_json(cfg: &ExperimentConfig, outcome: &Outcome) -> String {
    let summary = Summary {
        subcommand: cfg.subcommand.map_or("", |s| s.name()),
        config_hash: cfg.hash(),
        pass: outcome.pass(),
        failures: &outcome.failures,
        notes: &outcome.notes,
        results: &outcome.results,
        files: outcome.files.iter().map(|(n, _)| n.as_str()).collect(),
        config: cfg,
    };
    let mut s = serde_json::to_string_pretty(&summary).expect("summary serializes");
    s.push('\n');
    s
}

/// Writes the summary and every CSV into `dir`; returns the written paths.
pub fn emit_report(dir: &Path, cfg: &ExperimentConfig, outcome: &Outcome) -> Result<Vec<PathBuf>, String> {
    fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    let mut written = Vec::new();
    let mut put = |name: &str, contents: &str| {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(|e| format!("{}: {e}", path.display()))?;
        written.push(path);
        Ok::<_, String>(())
    };
    for (name, contents) in &outcome.files {
        put(name, contents)?;
    }
    put(SUMMARY_FILE, &summary_json(cfg, outcome))?;
    Ok(written)
}

/// CSV text from a header and rows of already formatted fields.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}
