use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::CliError;

fn write_error(path: Option<&Path>, e: impl std::fmt::Display) -> CliError {
    match path {
        Some(p) => CliError::Usage(format!("cannot write {}: {e}", p.display())),
        None => CliError::Usage(format!("cannot write to standard output: {e}")),
    }
}

/// A buffered writer on `path`, or on standard output.
pub fn sink(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| write_error(path, e))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn write_text(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    let mut w = sink(path)?;
    w.write_all(text.as_bytes())
        .and_then(|_| if text.ends_with('\n') { Ok(()) } else { w.write_all(b"\n") })
        .and_then(|_| w.flush())
        .map_err(|e| write_error(path, e))
}

pub fn write_json<T: Serialize>(path: Option<&Path>, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| write_error(path, e))?;
    write_text(path, &text)
}

/// CSV with a header row taken from the field names of `R`.
pub fn write_csv<R: Serialize>(path: Option<&Path>, rows: &[R]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(sink(path)?);
    for row in rows {
        w.serialize(row).map_err(|e| write_error(path, e))?;
    }
    w.flush().map_err(|e| write_error(path, e))
}
