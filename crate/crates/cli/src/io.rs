//! Line-delimited record I/O and atomic file writes.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::CliError;

/// Reads one record per line, skipping blank lines; parse failures carry the
/// path and 1-based line number.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let contents = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut out = Vec::new();
    for (index, line) in contents.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(line)
            .map_err(|e| CliError::schema(path, index + 1, e.to_string()))?;
        out.push(record);
    }
    Ok(out)
}

/// Writes via a temporary file in the same directory followed by a rename.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), CliError> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = parent {
        fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut temp = path.as_os_str().to_owned();
    temp.push(format!(".tmp-{}", std::process::id()));
    let temp_path = Path::new(&temp);
    fs::write(temp_path, contents).map_err(|e| CliError::io(temp_path, e))?;
    fs::rename(temp_path, path).map_err(|e| CliError::io(path, e))
}

/// Seconds since the Unix epoch; confined to file header lines.
pub fn unix_timestamp() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}
