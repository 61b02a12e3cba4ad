//! Output formatting and placement.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{CliError, Result};

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}

/// Writes `text` to `dir/name` (creating `dir`) or to stdout when no
/// directory is given. Returns the path written, if any.
pub fn emit(dir: Option<&Path>, name: &str, text: &str) -> Result<Option<PathBuf>> {
    match dir {
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|source| CliError::Io { path: "<stdout>".into(), source })?;
            Ok(None)
        }
        Some(dir) => {
            let io = |source| CliError::Io { path: dir.display().to_string(), source };
            std::fs::create_dir_all(dir).map_err(io)?;
            let path = dir.join(name);
            std::fs::write(&path, text)
                .map_err(|source| CliError::Io { path: path.display().to_string(), source })?;
            Ok(Some(path))
        }
    }
}
