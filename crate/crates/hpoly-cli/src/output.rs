use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::args::{Cli, Format};
use crate::CliError;

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            // 17 significant digits round-trip every f64
            Cell::Float(v) => format!("{v:.16e}"),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(headers: &[&'static str]) -> Self {
        Table {
            headers: headers.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Io(e.to_string());
        w.write_record(&self.headers).map_err(io)?;
        for r in &self.rows {
            w.write_record(r.iter().map(Cell::render)).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
    }
}

/// What a command produced: the resolved parameters, the result record,
/// its tabular form and any side files such as SVG drawings.
pub struct Output {
    pub resolved: Value,
    pub result: Value,
    pub table: Table,
    pub extras: Vec<(String, String)>,
}

pub fn to_value<T: Serialize>(v: &T) -> Result<Value, CliError> {
    serde_json::to_value(v).map_err(|e| CliError::Io(format!("serialization: {e}")))
}

fn write(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    fs::write(dir.join(name), text).map_err(|e| CliError::Io(format!("{}: {e}", dir.join(name).display())))
}

fn pretty(v: &Value) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Writes the result in the requested format, the side files and the
/// manifest; returns the text echoed on stdout.
pub fn write_outputs(cli: &Cli, threads: usize, out: &Output) -> Result<String, CliError> {
    let dir = &cli.global.output_dir;
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let name = cli.command.name();
    let (file, body) = match cli.global.format {
        Format::Json => (format!("{name}.json"), pretty(&out.result)?),
        Format::Csv => (format!("{name}.csv"), out.table.to_csv()?),
    };
    write(dir, &file, &body)?;
    let mut outputs = vec![json!({"path": file, "format": cli.global.format})];
    for (extra, text) in &out.extras {
        write(dir, extra, text)?;
        let format = Path::new(extra).extension().and_then(|e| e.to_str()).unwrap_or("txt");
        outputs.push(json!({"path": extra, "format": format}));
    }
    let manifest = manifest(cli, threads, &out.resolved, "ok", None, outputs)?;
    write(dir, "manifest.json", &pretty(&manifest)?)?;
    Ok(body)
}

/// Records a failed run; best effort, since the directory may be unusable.
pub fn write_failure(cli: &Cli, threads: usize, err: &CliError) {
    let dir = &cli.global.output_dir;
    if fs::create_dir_all(dir).is_err() {
        return;
    }
    if let Ok(m) = manifest(cli, threads, &Value::Null, "error", Some(err.to_string()), Vec::new()) {
        if let Ok(text) = pretty(&m) {
            let _ = fs::write(dir.join("manifest.json"), text);
        }
    }
}

fn manifest(
    cli: &Cli,
    threads: usize,
    resolved: &Value,
    status: &str,
    error: Option<String>,
    outputs: Vec<Value>,
) -> Result<Value, CliError> {
    let mut global = to_value(&cli.global)?;
    global["threads"] = json!(threads);
    global["samples"] = resolved.get("samples").cloned().unwrap_or(Value::Null);
    let mut m = json!({
        "tool": "hpoly",
        "version": env!("CARGO_PKG_VERSION"),
        "command": cli.command.name(),
        "status": status,
        "config": {
            "global": global,
            "arguments": to_value(&cli.command)?,
            "resolved": resolved,
        },
        "outputs": outputs,
    });
    if let Some(e) = error {
        m["error"] = json!(e);
    }
    Ok(m)
}
