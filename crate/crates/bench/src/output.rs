//! Atomic CSV/JSON writers.

use std::io::Write;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("writing {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("writing {path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("serializing {path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

/// Write through a temporary file in the target directory, then rename.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<(), OutputError>
where
    F: FnOnce(&mut dyn Write) -> Result<(), OutputError>,
{
    let io = |source| OutputError::Io { path: path.to_path_buf(), source };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    {
        let mut buf = std::io::BufWriter::new(tmp.as_file_mut());
        fill(&mut buf)?;
        buf.flush().map_err(io)?;
    }
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

/// Numeric cell: shortest representation that round-trips.
pub fn num(v: f64) -> String {
    format!("{v}")
}

/// Write a CSV table atomically.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), OutputError> {
    write_atomic(path, |w| {
        let csv_err = |source| OutputError::Csv { path: path.to_path_buf(), source };
        let mut wtr = csv::Writer::from_writer(w);
        wtr.write_record(header).map_err(csv_err)?;
        for row in rows {
            wtr.write_record(&row).map_err(csv_err)?;
        }
        wtr.flush().map_err(|source| OutputError::Io { path: path.to_path_buf(), source })
    })
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<(), OutputError> {
    write_atomic(path, |w| {
        serde_json::to_writer_pretty(&mut *w, value)
            .map_err(|source| OutputError::Json { path: path.to_path_buf(), source })?;
        w.write_all(b"\n").map_err(|source| OutputError::Io { path: path.to_path_buf(), source })
    })
}
