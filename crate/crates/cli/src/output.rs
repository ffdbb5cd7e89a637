use std::fs;
use std::path::{Path, PathBuf};

use punn::cluster::RunRecord;
use punn::{Error, Result};
use serde::Serialize;

/// Creates `<root>/<command>-<dataset>-<timestamp>`, adding a numeric
/// suffix if that directory already exists.
pub fn run_dir(root: &Path, command: &str, dataset: &str) -> Result<PathBuf> {
    let stamp = chrono::Local::now().format("%Y%m%d-%H%M%S");
    let slug: String = dataset
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '_'
            }
        })
        .collect();
    let stem = format!("{command}-{slug}-{stamp}");
    fs::create_dir_all(root)?;
    for n in 1.. {
        let name = if n == 1 { stem.clone() } else { format!("{stem}-{n}") };
        let path = root.join(name);
        match fs::create_dir(&path) {
            Ok(()) => return Ok(path),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e.into()),
        }
    }
    unreachable!()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::precondition(format!("csv output: {other:?}")),
    }
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| Error::ingestion(None, format!("cannot read {}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, row) in reader.deserialize().enumerate() {
        // line 1 is the header
        let row: RunRecord = row.map_err(|e| Error::ingestion(Some(i + 2), format!("{}: {e}", path.display())))?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    Ok(())
}
