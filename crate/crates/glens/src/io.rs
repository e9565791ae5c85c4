//! JSON, JSONL and PNG helpers.
//!
//! Every float written by the toolkit goes through [`normalize_floats`], which
//! rounds to 9 significant digits so output bytes stay stable across
//! platforms.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use glens_core::{PixelDims, Raster};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Number, Value};

use crate::error::{GlensError, Result};

/// Round to 9 significant digits.
pub fn round_sig9(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    format!("{v:.8e}").parse().expect("formatted float parses")
}

pub fn normalize_floats(v: Value) -> Value {
    match v {
        Value::Number(n) if n.is_f64() => {
            let r = round_sig9(n.as_f64().expect("f64 number"));
            Number::from_f64(r).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(normalize_floats).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, normalize_floats(v))).collect()),
        other => other,
    }
}

fn to_value<T: Serialize>(item: &T) -> Value {
    normalize_floats(serde_json::to_value(item).expect("record serializes"))
}

/// Compact single-line JSON with normalized floats.
pub fn to_json_line<T: Serialize>(item: &T) -> String {
    serde_json::to_string(&to_value(item)).expect("value serializes")
}

pub fn to_json_pretty<T: Serialize>(item: &T) -> String {
    let mut s = serde_json::to_string_pretty(&to_value(item)).expect("value serializes");
    s.push('\n');
    s
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| GlensError::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    fs::write(path, text).map_err(|e| GlensError::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| GlensError::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|source| GlensError::Json { path: path.to_path_buf(), source })
}

pub fn write_json_pretty<T: Serialize>(path: &Path, item: &T) -> Result<()> {
    write_text(path, &to_json_pretty(item))
}

pub fn write_jsonl<'a, T: Serialize + 'a>(path: &Path, items: impl IntoIterator<Item = &'a T>) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    let file = fs::File::create(path).map_err(|e| GlensError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for item in items {
        writeln!(out, "{}", to_json_line(item)).map_err(|e| GlensError::io(path, e))?;
    }
    out.flush().map_err(|e| GlensError::io(path, e))
}

/// A JSONL line that failed to parse or validate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LineError {
    pub line: usize,
    pub message: String,
}

impl std::fmt::Display for LineError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

/// Records tagged with their 1-based line number, and the lines that failed.
pub type Lines<T> = (Vec<(usize, T)>, Vec<LineError>);

/// Raw JSON values of a JSONL file, one per non-blank line, tagged with
/// 1-based line numbers. Lines that are not JSON become [`LineError`]s.
pub fn read_jsonl_values(path: &Path) -> Result<Lines<Value>> {
    let file = fs::File::open(path).map_err(|e| GlensError::io(path, e))?;
    let mut values = Vec::new();
    let mut errors = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| GlensError::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Value>(&line) {
            Ok(v) => values.push((i + 1, v)),
            Err(e) => errors.push(LineError { line: i + 1, message: format!("invalid JSON: {e}") }),
        }
    }
    Ok((values, errors))
}

/// Typed records of a JSONL file; unparsable lines are collected, not fatal.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Lines<T>> {
    let (values, mut errors) = read_jsonl_values(path)?;
    let mut out = Vec::with_capacity(values.len());
    for (line, v) in values {
        match serde_json::from_value::<T>(v) {
            Ok(r) => out.push((line, r)),
            Err(e) => errors.push(LineError { line, message: e.to_string() }),
        }
    }
    errors.sort_by_key(|e| e.line);
    Ok((out, errors))
}

pub fn read_png(path: &Path) -> Result<Raster> {
    let img = image::open(path)
        .map_err(|source| GlensError::Image { path: path.to_path_buf(), source })?
        .to_rgba8();
    let dims = PixelDims::new(img.width(), img.height())
        .map_err(|e| GlensError::Data(format!("{}: {e}", path.display())))?;
    Raster::from_rgba(dims, img.into_raw()).map_err(|e| GlensError::Data(format!("{}: {e}", path.display())))
}

pub fn write_png(path: &Path, raster: &Raster) -> Result<()> {
    if let Some(parent) = path.parent() {
        ensure_dir(parent)?;
    }
    let img = image::RgbaImage::from_raw(raster.width(), raster.height(), raster.as_bytes().to_vec())
        .expect("buffer matches dimensions");
    img.save_with_format(path, image::ImageFormat::Png)
        .map_err(|source| GlensError::Image { path: path.to_path_buf(), source })
}
