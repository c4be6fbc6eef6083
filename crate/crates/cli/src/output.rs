use std::io::Write;
use std::path::Path;

use crate::CliError;

/// Writes through a temporary file in the target directory and renames it
/// into place, so readers never see a partial report.
pub(crate) fn write_atomic(path: &Path, text: &str) -> Result<(), CliError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(path, e))?;
    tmp.write_all(text.as_bytes()).map_err(|e| CliError::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

pub(crate) fn csv(rows: &[Vec<String>]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(row)
            .map_err(|e| CliError::Usage(format!("csv output: {e}")))?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Usage(format!("csv output: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv of utf-8 fields is utf-8"))
}

/// Shortest round-trip decimal, `inf`/`-inf`/`NaN` for non-finite values.
pub(crate) fn num(x: f64) -> String {
    if x.is_finite() {
        serde_json::to_string(&x).expect("finite floats serialize")
    } else {
        x.to_string()
    }
}
