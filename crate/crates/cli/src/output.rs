use std::io::Write;
use std::path::Path;

use cmv_weyl::{CmvError, Result};
use serde_json::{json, Value};

use crate::config::{Format, RunConfig};

/// A CSV cell. Floats are written with 17 significant digits.
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Float(x) => fmt_f64(*x),
            Cell::Text(s) => s.clone(),
        }
    }
}

pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

/// Result of a command in both shapes; the config picks one.
pub struct Artifact {
    pub table: Option<Table>,
    pub json: Value,
    pub default_format: Format,
}

pub fn header(cfg: &RunConfig) -> Value {
    let mut h = json!({
        "library": "cmv-weyl",
        "version": cmv_weyl::VERSION,
        "command": cfg.command,
        "seed": cfg.seed,
        "config": cfg,
    });
    if !cfg.deterministic {
        let t = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        h["timestamp_unix"] = json!(t);
    }
    h
}

pub fn render(cfg: &RunConfig, art: &Artifact) -> Result<String> {
    let head = header(cfg);
    match cfg.format.unwrap_or(art.default_format) {
        Format::Json => {
            let v = json!({ "header": head, "data": art.json });
            Ok(serde_json::to_string_pretty(&v)? + "\n")
        }
        Format::Csv => {
            let t = art.table.as_ref().ok_or_else(|| {
                CmvError::Parse(format!(
                    "{:?} has no CSV form; use --format json",
                    cfg.command()
                ))
            })?;
            let mut out = String::new();
            out.push_str(&format!("# library: cmv-weyl {}\n", cmv_weyl::VERSION));
            out.push_str(&format!("# seed: {}\n", cfg.seed));
            out.push_str(&format!("# config: {}\n", serde_json::to_string(cfg)?));
            if let Some(ts) = head.get("timestamp_unix") {
                out.push_str(&format!("# timestamp_unix: {ts}\n"));
            }
            out.push_str(&t.columns.join(","));
            out.push('\n');
            for r in &t.rows {
                let line: Vec<String> = r.iter().map(Cell::render).collect();
                out.push_str(&line.join(","));
                out.push('\n');
            }
            Ok(out)
        }
    }
}

/// Writes to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(text.as_bytes())?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| CmvError::Io(e.to_string()))?;
    Ok(())
}
