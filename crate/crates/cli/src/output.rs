use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Value};
use singwave::Mat2C;

/// `[[[re, im], [re, im]], [[re, im], [re, im]]]`.
pub fn matrix_json(m: &Mat2C) -> Value {
    let p = |z: num_complex::Complex<f64>| json!([z.re, z.im]);
    json!([[p(m.a11), p(m.a12)], [p(m.a21), p(m.a22)]])
}

pub fn fmt(x: f64) -> String {
    format!("{x:.12e}")
}

/// `prefix_suffix`, creating the parent directory.
pub fn artifact(prefix: &Path, suffix: &str) -> Result<PathBuf> {
    let name = format!(
        "{}_{suffix}",
        prefix.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
    );
    let path = prefix.with_file_name(name);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(path)
}

pub fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Writes to `path` when given, stdout otherwise.
pub fn emit(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => write(p, text),
        None => stdout(text),
    }
}

/// Writes to stdout; a closed pipe is not an error.
pub fn stdout(text: &str) -> Result<()> {
    match io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() == io::ErrorKind::BrokenPipe => Ok(()),
        r => r.context("writing stdout"),
    }
}
