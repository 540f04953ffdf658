//! Numeric CSV tables with a header row.

use std::fs::File;
use std::path::Path;

use treehfd_core::Matrix;

use crate::error::{Error, Result};

/// Features (all non-target columns, in file order) and an optional target.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: Matrix,
    pub feature_names: Vec<String>,
    pub target: Option<Vec<f64>>,
}

/// Parses CSV text. With `target = Some(name)` that column is split off and
/// must exist. Empty or non-numeric cells are errors.
pub fn read_csv_str(text: &str, target: Option<&str>) -> Result<Dataset> {
    read_from(csv::Reader::from_reader(text.as_bytes()), target, "<input>")
}

pub fn read_csv(path: &Path, target: Option<&str>) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_from(csv::Reader::from_reader(file), target, &path.display().to_string())
}

fn read_from<R: std::io::Read>(mut rdr: csv::Reader<R>, target: Option<&str>, name: &str) -> Result<Dataset> {
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let target_col = match target {
        Some(t) => Some(
            header
                .iter()
                .position(|h| h == t)
                .ok_or_else(|| Error::parse(name, format!("no column named \"{t}\"")))?,
        ),
        None => None,
    };
    let feature_names: Vec<String> = header
        .iter()
        .enumerate()
        .filter(|&(i, _)| Some(i) != target_col)
        .map(|(_, h)| h.clone())
        .collect();
    let mut values = Vec::new();
    let mut y = Vec::new();
    let mut rows = 0;
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::parse(
                    format!("{name}: row {}, column \"{}\"", r + 1, header[c]),
                    format!("\"{cell}\" is not a number"),
                )
            })?;
            if !v.is_finite() {
                return Err(Error::parse(
                    format!("{name}: row {}, column \"{}\"", r + 1, header[c]),
                    "missing or non-finite values are not supported",
                ));
            }
            if Some(c) == target_col {
                y.push(v);
            } else {
                values.push(v);
            }
        }
        rows += 1;
    }
    let features = Matrix::new(values, rows, feature_names.len())?;
    Ok(Dataset {
        features,
        feature_names,
        target: target_col.map(|_| y),
    })
}

/// Writes features and an optional target column as CSV text.
pub fn write_csv_string(names: &[String], x: &Matrix, y: Option<(&str, &[f64])>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = names.to_vec();
    if let Some((name, _)) = y {
        header.push(name.to_string());
    }
    w.write_record(&header)?;
    for (i, row) in x.iter_rows().enumerate() {
        let mut rec: Vec<String> = row.iter().map(f64::to_string).collect();
        if let Some((_, ys)) = y {
            rec.push(ys[i].to_string());
        }
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::parse("csv", e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("CSV of numbers is UTF-8"))
}
