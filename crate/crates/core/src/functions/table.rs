//! CSV ingestion and plot-data tables.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::Dataset;

/// Which column of a CSV holds the target.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TargetColumn {
    Index(usize),
    Name(String),
}

impl From<&str> for TargetColumn {
    fn from(s: &str) -> Self {
        TargetColumn::Name(s.to_owned())
    }
}

impl From<usize> for TargetColumn {
    fn from(i: usize) -> Self {
        TargetColumn::Index(i)
    }
}

/// A header plus numeric rows.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Table { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::dims("table row", self.columns.len(), row.len()));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

/// Writes a table. Values use Rust's shortest round-trip formatting, so
/// reading the file back yields bit-identical numbers.
pub fn write_table(table: &Table, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_owned(),
        row: 0,
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(&table.columns).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads an all-numeric CSV. Data rows are numbered from 1 in errors; the
/// header is not counted.
pub fn read_table(path: impl AsRef<Path>) -> Result<Table> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(Error::io(path, std::io::Error::new(std::io::ErrorKind::NotFound, "file not found")));
    }
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Csv {
            path: path.to_owned(),
            row: 0,
            message: e.to_string(),
        })?;
    let columns: Vec<String> = r
        .headers()
        .map_err(|e| Error::Csv {
            path: path.to_owned(),
            row: 0,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_owned)
        .collect();
    if columns.is_empty() || columns.iter().all(String::is_empty) {
        return Err(Error::Csv {
            path: path.to_owned(),
            row: 0,
            message: "missing header row".into(),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in r.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Csv {
            path: path.to_owned(),
            row,
            message: e.to_string(),
        })?;
        if record.len() != columns.len() {
            return Err(Error::Csv {
                path: path.to_owned(),
                row,
                message: format!("expected {} fields, found {}", columns.len(), record.len()),
            });
        }
        let values = record
            .iter()
            .zip(&columns)
            .map(|(cell, col)| {
                cell.parse::<f64>().map_err(|_| Error::Csv {
                    path: path.to_owned(),
                    row,
                    message: format!("column `{col}`: cannot parse {cell:?} as a number"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(values);
    }
    Ok(Table { columns, rows })
}

/// Loads a regression dataset; every column but the target becomes a feature.
pub fn load_csv(path: impl AsRef<Path>, target: impl Into<TargetColumn>) -> Result<Dataset> {
    let path = path.as_ref();
    let table = read_table(path)?;
    let t = match target.into() {
        TargetColumn::Name(name) => table.columns.iter().position(|c| *c == name).ok_or(Error::MissingColumn {
            path: path.to_owned(),
            column: name,
        })?,
        TargetColumn::Index(i) if i < table.columns.len() => i,
        TargetColumn::Index(i) => {
            return Err(Error::MissingColumn {
                path: path.to_owned(),
                column: format!("#{i}"),
            })
        }
    };
    if table.rows.is_empty() {
        return Err(Error::Empty(format!("{}: no data rows", path.display())));
    }
    let d = table.columns.len() - 1;
    let n = table.rows.len();
    let mut x = Array2::zeros((n, d));
    let mut y = Vec::with_capacity(n);
    for (i, row) in table.rows.iter().enumerate() {
        let mut j = 0;
        for (c, v) in row.iter().enumerate() {
            if c == t {
                y.push(*v);
            } else {
                x[[i, j]] = *v;
                j += 1;
            }
        }
    }
    let names = table
        .columns
        .iter()
        .enumerate()
        .filter(|(c, _)| *c != t)
        .map(|(_, n)| n.clone())
        .collect();
    Dataset::regression_1d(x, y)?.with_feature_names(names)
}

/// Writes a single-target regression dataset with the target as the last column.
pub fn save_csv(ds: &Dataset, path: impl AsRef<Path>, target_name: &str) -> Result<()> {
    let y = ds.regression_targets()?;
    if y.ncols() != 1 {
        return Err(Error::dims("target columns", 1, y.ncols()));
    }
    let mut columns: Vec<String> = match ds.feature_names() {
        Some(names) => names.to_vec(),
        None => (0..ds.dim()).map(|j| format!("x{j}")).collect(),
    };
    columns.push(target_name.to_owned());
    let mut table = Table::new(columns);
    for (x, t) in ds.inputs().rows().into_iter().zip(y.column(0)) {
        let mut row = x.to_vec();
        row.push(*t);
        table.push(row)?;
    }
    write_table(&table, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn file(text: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("data.csv");
        fs::write(&p, text).unwrap();
        (dir, p)
    }

    #[test]
    fn loads_named_target() {
        let (_d, p) = file("a,b,y\n1,2,3\n4,5,6\n7,8,9\n");
        let ds = load_csv(&p, "y").unwrap();
        assert_eq!(ds.inputs().dim(), (3, 2));
        assert_eq!(ds.regression_targets().unwrap().column(0).to_vec(), vec![3.0, 6.0, 9.0]);
        assert_eq!(ds.feature_names().unwrap(), ["a", "b"]);
        let by_index = load_csv(&p, 0).unwrap();
        assert_eq!(by_index.regression_targets().unwrap().column(0).to_vec(), vec![1.0, 4.0, 7.0]);
    }

    #[test]
    fn missing_target_is_named() {
        let (_d, p) = file("a,b,y\n1,2,3\n");
        let err = load_csv(&p, "price").unwrap_err();
        assert!(matches!(&err, Error::MissingColumn { column, .. } if column == "price"));
        assert!(err.to_string().contains("price"));
    }

    #[test]
    fn bad_cell_reports_row() {
        let (_d, p) = file("a,b,y\n1,2,3\n4,abc,6\n");
        match load_csv(&p, "y").unwrap_err() {
            Error::Csv { row, message, .. } => {
                assert_eq!(row, 2);
                assert!(message.contains("abc") && message.contains("`b`"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn ragged_rows_are_rejected() {
        let (_d, p) = file("a,b,y\n1,2,3\n4,5\n");
        assert!(matches!(load_csv(&p, "y").unwrap_err(), Error::Csv { row: 2, .. }));
    }

    #[test]
    fn missing_file_names_path() {
        let err = load_csv("/nonexistent/data.csv", "y").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/data.csv"));
    }

    #[test]
    fn round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rt.csv");
        let x = Array2::from_shape_fn((5, 2), |(i, j)| (i as f64 + 0.1) / (j as f64 + 3.0) * 1e-3);
        let y: Vec<f64> = (0..5).map(|i| std::f64::consts::PI * i as f64 - 1e10).collect();
        let ds = Dataset::regression_1d(x, y).unwrap();
        save_csv(&ds, &p, "target").unwrap();
        let back = load_csv(&p, "target").unwrap();
        assert_eq!(back.inputs(), ds.inputs());
        assert_eq!(back.regression_targets().unwrap(), ds.regression_targets().unwrap());
    }
}
