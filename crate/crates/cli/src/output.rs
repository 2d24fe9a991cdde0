use chrono::{SecondsFormat, Utc};
use serde::Serialize;
use serde_json::Value;

/// Provenance embedded in every output.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: Value,
    pub seed: Option<u64>,
    pub tool_version: &'static str,
    pub started: Option<String>,
    pub finished: Option<String>,
}

fn now(skip: bool) -> Option<String> {
    (!skip).then(|| Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true))
}

impl RunManifest {
    pub fn start(command: String, parameters: Value, seed: Option<u64>, no_timestamps: bool) -> Self {
        RunManifest {
            command,
            parameters,
            seed,
            tool_version: env!("CARGO_PKG_VERSION"),
            started: now(no_timestamps),
            finished: None,
        }
    }

    pub fn finish(&mut self, no_timestamps: bool) {
        self.finished = now(no_timestamps);
    }
}

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub struct Outcome {
    pub result: Value,
    pub csv: Option<Table>,
    /// A check in the result did not pass.
    pub failed: bool,
}

impl Outcome {
    pub fn json(result: Value) -> Self {
        Outcome {
            result,
            csv: None,
            failed: false,
        }
    }
}

#[derive(Serialize)]
struct Envelope<'a> {
    manifest: &'a RunManifest,
    result: &'a Value,
}

pub fn render_json(manifest: &RunManifest, result: &Value) -> String {
    let mut s = serde_json::to_string_pretty(&Envelope { manifest, result }).expect("json values serialize");
    s.push('\n');
    s
}

/// The manifest goes on a leading `#` comment line.
pub fn render_csv(manifest: &RunManifest, table: &Table) -> String {
    let mut s = format!("# manifest: {}\n", serde_json::to_string(manifest).expect("manifest serializes"));
    s.push_str(&table.header.join(","));
    s.push('\n');
    for row in &table.rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}
