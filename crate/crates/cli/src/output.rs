//! CSV rendering and atomic file writes.

use std::io::Write;
use std::path::Path;

use ordembed::Embedding;

use crate::error::CliError;

/// Shortest representation that parses back to the same value.
pub fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// `#`-prefixed comment lines, a header row, then records.
pub fn csv_bytes<I, R>(comments: &[String], header: &[&str], rows: I) -> Result<Vec<u8>, CliError>
where
    I: Iterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut buf = Vec::new();
    for line in comments {
        writeln!(buf, "# {line}").expect("writing to memory");
    }
    let mut w = csv::Writer::from_writer(buf);
    let to_err = |e: csv::Error| CliError::Input(format!("CSV encoding failed: {e}"));
    w.write_record(header).map_err(to_err)?;
    for row in rows {
        w.write_record(row).map_err(to_err)?;
    }
    w.into_inner().map_err(|e| CliError::Input(format!("CSV encoding failed: {e}")))
}

/// One row per object: 1-based index followed by its coordinates.
pub fn embedding_csv(x: &Embedding, comments: &[String]) -> Result<Vec<u8>, CliError> {
    let header: Vec<String> = std::iter::once("object".to_string())
        .chain((1..=x.dim()).map(|d| format!("x{d}")))
        .collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = (0..x.len()).map(|i| {
        std::iter::once((i + 1).to_string())
            .chain(x.column(i).iter().map(|&v| fmt_f64(v)))
            .collect::<Vec<_>>()
    });
    csv_bytes(comments, &header, rows)
}

/// Reads an embedding written by [`embedding_csv`].
pub fn read_embedding_csv(path: &Path) -> Result<Embedding, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    let p = reader
        .headers()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?
        .len()
        .saturating_sub(1);
    let mut values = Vec::new();
    let mut n = 0;
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
        for field in record.iter().skip(1) {
            let v: f64 = field
                .parse()
                .map_err(|_| CliError::Input(format!("{}: bad coordinate {field:?}", path.display())))?;
            values.push(v);
        }
        n += 1;
    }
    Ok(Embedding::from_column_slice(p, n, &values)?)
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    std::fs::write(&tmp, bytes).map_err(|e| CliError::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| CliError::io(path, e))
}
