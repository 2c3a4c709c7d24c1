//! Artifact files: the run manifest plus CSV and JSON results that each
//! carry the manifest hash.
//!
//! Floats are written with 17 significant digits. Only the manifest holds a
//! timestamp. The hash covers the fields that determine results, so it
//! ignores the timestamp, the output directory and the worker count.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Number, Value};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";

pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "NaN".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// One CSV field.
pub enum Cell {
    F(f64),
    U(u64),
    S(String),
    B(bool),
    Na,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}
impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::U(x)
    }
}
impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::S(x.to_owned())
    }
}
impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::S(x)
    }
}
impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::B(x)
    }
}
impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(x: Option<T>) -> Self {
        x.map_or(Cell::Na, Into::into)
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::F(x) => fmt_f64(*x),
            Cell::U(x) => x.to_string(),
            Cell::B(x) => x.to_string(),
            Cell::Na => "NA".into(),
            Cell::S(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::S(s) => s.clone(),
        }
    }
}

/// Rewrites every non-integer number with 17 significant digits.
fn normalize(v: &mut Value) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let x = n.as_f64().expect("f64 number");
            *n = Number::from_str(&fmt_f64(x)).expect("finite float");
        }
        Value::Array(a) => a.iter_mut().for_each(normalize),
        Value::Object(o) => o.values_mut().for_each(normalize),
        _ => {}
    }
}

fn to_json<T: Serialize>(value: &T) -> Value {
    let mut v = serde_json::to_value(value).expect("serializable");
    normalize(&mut v);
    v
}

fn write(path: PathBuf, text: &str) -> CliResult<PathBuf> {
    std::fs::write(&path, text).map_err(|source| CliError::Io { path: path.clone(), source })?;
    Ok(path)
}

pub struct Artifacts {
    dir: PathBuf,
    hash: String,
}

impl Artifacts {
    /// Creates the output directory and writes `manifest.json`.
    pub fn create(dir: &Path, subcommand: &str, config: &ExperimentConfig) -> CliResult<Self> {
        std::fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_owned(), source })?;
        let body = json!({
            "tool": env!("CARGO_PKG_NAME"),
            "version": env!("CARGO_PKG_VERSION"),
            "subcommand": subcommand,
            "config": to_json(config),
        });
        let mut hashed = body.clone();
        let cfg = hashed["config"].as_object_mut().expect("object");
        cfg.remove("output_dir");
        cfg.remove("workers");
        let hash = Self::hash_of(&hashed);
        let created = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let mut manifest = json!({ "manifest_sha256": hash, "created_unix": created });
        manifest.as_object_mut().expect("object").extend(body.as_object().expect("object").clone());
        let text = serde_json::to_string_pretty(&manifest).expect("serializable") + "\n";
        write(dir.join(MANIFEST), &text)?;
        Ok(Artifacts { dir: dir.to_owned(), hash })
    }

    /// SHA-256 of compact JSON.
    pub fn hash_of(body: &Value) -> String {
        let digest = Sha256::digest(serde_json::to_string(body).expect("serializable").as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    /// Writes a CSV with a hash comment line and a column header; returns its text.
    pub fn csv(&self, name: &str, columns: &[&str], rows: Vec<Vec<Cell>>) -> CliResult<String> {
        let mut text = format!("# manifest_sha256={}\n{}\n", self.hash, columns.join(","));
        for row in rows {
            debug_assert_eq!(row.len(), columns.len());
            text.push_str(&row.iter().map(Cell::render).collect::<Vec<_>>().join(","));
            text.push('\n');
        }
        write(self.dir.join(name), &text)?;
        Ok(text)
    }

    /// Writes `{"manifest_sha256": ..., "result": value}`; returns its text.
    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> CliResult<String> {
        let doc = json!({ "manifest_sha256": self.hash, "result": to_json(value) });
        let text = serde_json::to_string_pretty(&doc).expect("serializable") + "\n";
        write(self.dir.join(name), &text)?;
        Ok(text)
    }
}
