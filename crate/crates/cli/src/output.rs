use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde_json::{json, Value};

use crate::error::{CliError, CliResult};

/// Collects machine records (one JSON object per line) and summary lines.
#[derive(Debug, Default)]
pub struct Report {
    records: Vec<Value>,
    summary: Vec<String>,
}

impl Report {
    pub fn record(&mut self, kind: &str, mut body: Value) {
        if let Value::Object(map) = &mut body {
            map.insert("record".into(), json!(kind));
        }
        self.records.push(body);
    }

    pub fn extend(&mut self, other: Report) {
        self.records.extend(other.records);
        self.summary.extend(other.summary);
    }

    pub fn say(&mut self, line: impl Into<String>) {
        self.summary.push(line.into());
    }

    pub fn machine_text(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&r.to_string());
            s.push('\n');
        }
        s
    }

    /// Machine records go to `out` (or stdout) and the summary to stdout (or
    /// stderr when stdout carries the records).
    pub fn emit(&self, out: Option<&Path>) -> CliResult<()> {
        let text = self.machine_text();
        let summary: String = self.summary.iter().map(|l| format!("{l}\n")).collect();
        match out {
            Some(path) => {
                write_file(path, &text)?;
                print!("{summary}");
            }
            None => {
                print!("{text}");
                eprint!("{summary}");
            }
        }
        std::io::stdout().flush().ok();
        Ok(())
    }
}

pub fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn complex(z: Complex64) -> Value {
    json!({ "re": z.re, "im": z.im })
}

/// FNV-1a over the canonical serialization of an input, echoed so reruns can
/// be matched to their inputs.
pub fn fingerprint(text: &str) -> String {
    let hash = text
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3));
    format!("{hash:016x}")
}
