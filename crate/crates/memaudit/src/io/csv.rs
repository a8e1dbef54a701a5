//! CSV ingestion: rows become observations, an optional header row becomes
//! column names.

use std::path::Path;

use memaudit_core::{Dataset, ShapeTag};

use super::{IoError, Result};

pub fn load_csv(path: &Path, has_header: bool) -> Result<Dataset> {
    let mut reader = ::csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .from_path(path)?;
    let columns: Option<Vec<String>> = if has_header {
        Some(reader.headers().map_err(csv_err)?.iter().map(String::from).collect())
    } else {
        None
    };
    let mut data = Vec::new();
    let mut dim = None;
    // 1-based data row numbers, counting the header if present.
    let first_row = if has_header { 2 } else { 1 };
    for (idx, record) in reader.records().enumerate() {
        let row_no = first_row + idx;
        let record = record.map_err(csv_err)?;
        let width = record.len();
        match dim {
            None => dim = Some(width),
            Some(d) if d != width => {
                return Err(IoError::Format(format!(
                    "ragged row {row_no}: expected {d} fields, found {width}"
                )))
            }
            Some(_) => {}
        }
        for (col, field) in record.iter().enumerate() {
            let value: f64 = field.trim().parse().map_err(|_| {
                IoError::Format(format!(
                    "non-numeric cell at row {row_no}, column {}: {field:?}",
                    col + 1
                ))
            })?;
            data.push(value);
        }
    }
    let dim = dim.ok_or_else(|| IoError::Format("CSV file has no data rows".into()))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    let dataset = Dataset::from_rows(&name, data, dim, ShapeTag::Flat)?;
    Ok(match columns {
        Some(columns) => dataset.with_columns(columns)?,
        None => dataset,
    })
}

/// Write a dataset back out as CSV (full-precision decimal floats).
pub fn write_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut writer = ::csv::Writer::from_path(path)?;
    if let Some(columns) = data.columns() {
        writer.write_record(columns).map_err(csv_err)?;
    }
    for row in data.rows() {
        let fields: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writer.write_record(&fields).map_err(csv_err)?;
    }
    writer.flush()?;
    Ok(())
}

fn csv_err(e: ::csv::Error) -> IoError {
    IoError::Format(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn plain_two_by_two() {
        let f = write_temp("1,2\n3,4\n");
        let d = load_csv(f.path(), false).unwrap();
        assert_eq!((d.n(), d.dim()), (2, 2));
        assert_eq!(d.values(), &[1.0, 2.0, 3.0, 4.0]);
        assert!(d.columns().is_none());
    }

    #[test]
    fn header_excluded_from_rows() {
        let f = write_temp("a,b\n1,2\n3,4\n");
        let d = load_csv(f.path(), true).unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(d.columns().unwrap(), &["a".to_string(), "b".to_string()]);
    }

    #[test]
    fn ragged_row_reported_with_number() {
        let f = write_temp("1,2\n3\n");
        let err = load_csv(f.path(), false).unwrap_err().to_string();
        assert!(err.contains("row 2"), "{err}");
    }

    #[test]
    fn non_numeric_cell_reported_with_coordinates() {
        let f = write_temp("1,2\n3,oops\n");
        let err = load_csv(f.path(), false).unwrap_err().to_string();
        assert!(err.contains("row 2") && err.contains("column 2"), "{err}");
    }

    #[test]
    fn round_trip() {
        let d = Dataset::from_rows(
            "t",
            vec![0.1, -2.5e-8, 3.0, 1.0 / 3.0],
            2,
            ShapeTag::Flat,
        )
        .unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        write_csv(&d, f.path()).unwrap();
        let back = load_csv(f.path(), false).unwrap();
        assert_eq!(d.values(), back.values());
    }
}
