//! Long-format CSV and JSON sidecar output. Numbers are written with 17
//! significant digits so a field read back is bit-identical; files are
//! written to a temporary sibling and renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::cwt::FieldMeta;
use crate::error::{Error, Result};
use crate::matrix::Matrix;
use crate::timeseries::TimeSeries;

/// One output column over the (scale × time) cells of a field.
pub enum Column {
    Real(Matrix<f64>),
    Flag(Matrix<bool>),
    /// One value per scale row.
    PerRow(Vec<f64>),
    Text(Matrix<String>),
}

/// A field in long format: `time, period` followed by named columns, one
/// line per cell, scale rows outermost.
pub struct LongTable<'a> {
    pub meta: &'a FieldMeta,
    pub columns: Vec<(String, Column)>,
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_owned()
    } else {
        format!("{v:.16e}")
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    result.map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::io(path, e)
    })
}

fn csv_bytes(header: &[String], rows: impl Iterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    w.into_inner().map_err(|e| Error::Data(format!("csv buffer: {e}")))
}

impl LongTable<'_> {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let meta = self.meta;
        let labels = meta.axis.labels();
        let periods: Vec<String> = meta.periods().into_iter().map(fmt_f64).collect();
        let (rows, n) = (meta.grid.len(), meta.axis.n);
        let mut header = vec!["time".to_owned(), "period".to_owned()];
        header.extend(self.columns.iter().map(|(name, _)| name.clone()));
        let lines = (0..rows).flat_map(|k| (0..n).map(move |t| (k, t))).map(|(k, t)| {
            let mut line = vec![labels[t].clone(), periods[k].clone()];
            for (_, c) in &self.columns {
                line.push(match c {
                    Column::Real(m) => fmt_f64(*m.get(k, t)),
                    Column::Flag(m) => (*m.get(k, t) as u8).to_string(),
                    Column::PerRow(v) => fmt_f64(v[k]),
                    Column::Text(m) => m.get(k, t).clone(),
                });
            }
            line
        });
        csv_bytes(&header, lines)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }
}

/// Matrix layout: a header of time labels, then one line per scale row
/// starting with its period.
pub fn grid_bytes(meta: &FieldMeta, values: &Matrix<f64>) -> Result<Vec<u8>> {
    let mut header = vec!["period".to_owned()];
    header.extend(meta.axis.labels());
    let periods = meta.periods();
    let lines = (0..values.rows()).map(|k| {
        let mut line = vec![fmt_f64(periods[k])];
        line.extend(values.row(k).iter().map(|&v| fmt_f64(v)));
        line
    });
    csv_bytes(&header, lines)
}

/// Series sharing one grid as a `t, name1, name2, ...` table.
pub fn series_bytes(series: &[TimeSeries]) -> Result<Vec<u8>> {
    let first = series.first().ok_or_else(|| Error::Data("no series to write".into()))?;
    let mut header = vec!["t".to_owned()];
    header.extend(series.iter().map(|s| s.name().to_owned()));
    let labels = first.labels();
    let lines = (0..first.len()).map(|i| {
        let mut line = vec![labels[i].clone()];
        line.extend(series.iter().map(|s| fmt_f64(s.values()[i])));
        line
    });
    csv_bytes(&header, lines)
}

/// Pretty JSON with a trailing newline.
pub fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(value)?;
    v.push(b'\n');
    Ok(v)
}

/// A long-format table read back from disk.
pub struct ReadTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ReadTable {
    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data(format!("no column named `{name}`")))
    }

    /// Column `name` reshaped to `rows × cols` in file order.
    pub fn matrix(&self, name: &str, rows: usize, cols: usize) -> Result<Matrix<f64>> {
        let c = self.column(name)?;
        if self.rows.len() != rows * cols {
            return Err(Error::Data(format!("{} lines, expected {}", self.rows.len(), rows * cols)));
        }
        let data = self
            .rows
            .iter()
            .map(|r| {
                r[c].parse::<f64>()
                    .map_err(|_| Error::Data(format!("`{}` in column `{name}` is not a number", r[c])))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Matrix::from_vec(rows, cols, data))
    }
}

pub fn read_table(path: &Path) -> Result<ReadTable> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_reader(file);
    let header = r.headers()?.iter().map(str::to_owned).collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|r| r.iter().map(str::to_owned).collect()))
        .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
    Ok(ReadTable { header, rows })
}

/// `<dir>/<stem>.<ext>`.
pub fn output_path(dir: &Path, stem: &str, ext: &str) -> PathBuf {
    dir.join(format!("{stem}.{ext}"))
}
