use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};
use std::fmt::Write as _;
use std::path::Path;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    NotConverged,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::Fail => 2,
            Status::NotConverged => 3,
        }
    }

    fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::NotConverged => "NOT_CONVERGED",
        }
    }
}

pub struct Table {
    /// File stem; written as `<stem>.csv`.
    pub stem: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(stem: impl Into<String>, header: Vec<String>) -> Self {
        Table { stem: stem.into(), header, rows: Vec::new() }
    }
}

/// Result of one command before it is written out.
pub struct Report {
    pub failures: Vec<String>,
    pub not_converged: bool,
    pub results: Map<String, Value>,
    pub tables: Vec<Table>,
    /// Extra JSON documents, written as `<stem>.json`.
    pub documents: Vec<(String, Value)>,
}

impl Report {
    pub fn new() -> Self {
        Report { failures: Vec::new(), not_converged: false, results: Map::new(), tables: Vec::new(), documents: Vec::new() }
    }

    pub fn set(&mut self, key: &str, v: impl Serialize) {
        self.results.insert(key.to_string(), serde_json::to_value(v).expect("serializable result"));
    }

    pub fn fail(&mut self, msg: impl Into<String>) {
        self.failures.push(msg.into());
    }

    pub fn status(&self) -> Status {
        if self.not_converged {
            Status::NotConverged
        } else if self.failures.is_empty() {
            Status::Pass
        } else {
            Status::Fail
        }
    }
}

/// Lower-case hex SHA-256 of the compact JSON of the resolved config.
pub fn config_hash(config: &Value) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    Sha256::digest(&bytes).iter().fold(String::new(), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

pub fn num(x: f64) -> String {
    format!("{x}")
}

/// Writes `<command>.json` and every table and document into `dir`.
pub fn write(dir: &Path, command: &str, config: &Value, report: &Report) -> std::io::Result<Status> {
    std::fs::create_dir_all(dir)?;
    let hash = config_hash(config);
    let status = report.status();
    let summary = json!({
        "tool": "kakeya",
        "version": VERSION,
        "command": command,
        "config_sha256": hash,
        "status": status.label(),
        "failures": report.failures,
        "parameters": config,
        "results": report.results,
    });
    let mut text = serde_json::to_string_pretty(&summary)?;
    text.push('\n');
    std::fs::write(dir.join(format!("{command}.json")), text)?;
    for t in &report.tables {
        let mut s = format!("# kakeya {VERSION} {command} config_sha256={hash}\n");
        s.push_str(&t.header.join(","));
        s.push('\n');
        for r in &t.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        std::fs::write(dir.join(format!("{}.csv", t.stem)), s)?;
    }
    for (stem, doc) in &report.documents {
        let wrapped = json!({ "version": VERSION, "config_sha256": hash, "data": doc });
        let mut text = serde_json::to_string_pretty(&wrapped)?;
        text.push('\n');
        std::fs::write(dir.join(format!("{stem}.json")), text)?;
    }
    Ok(status)
}
