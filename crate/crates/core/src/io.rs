//! Small CSV helpers shared by the modules that write numeric output.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.16e}")
    }
}

/// Writes a real matrix as CSV with header `c0,c1,...`, one matrix row per line.
pub fn write_matrix_csv<W: Write>(m: &DMatrix<f64>, mut out: W) -> std::io::Result<()> {
    let header: Vec<String> = (0..m.ncols()).map(|j| format!("c{j}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|v| fmt_f64(*v)).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Writes a vector as a one-row CSV with header `x0,x1,...`.
pub fn write_vector_csv<W: Write>(v: &DVector<f64>, mut out: W) -> std::io::Result<()> {
    let header: Vec<String> = (0..v.len()).map(|j| format!("x{j}")).collect();
    writeln!(out, "{}", header.join(","))?;
    let row: Vec<String> = v.iter().map(|x| fmt_f64(*x)).collect();
    writeln!(out, "{}", row.join(","))
}

/// Reads a vector written by [`write_vector_csv`]: header `x0..x{n-1}` and
/// exactly one data row.
pub fn read_vector_csv(path: impl AsRef<Path>) -> Result<DVector<f64>> {
    let path = path.as_ref();
    let format = |message: String| Error::Format {
        path: path.to_path_buf(),
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(source) => Error::Io {
                path: path.to_path_buf(),
                source,
            },
            other => format(format!("{other:?}")),
        })?;
    let header = reader.headers().map_err(|e| format(e.to_string()))?.clone();
    for (j, h) in header.iter().enumerate() {
        if h != format!("x{j}") {
            return Err(format(format!("header column {j} is '{h}', expected 'x{j}'")));
        }
    }
    let mut rows = reader.records();
    let row = rows
        .next()
        .ok_or_else(|| format("no data row".into()))?
        .map_err(|e| format(e.to_string()))?;
    if rows.next().is_some() {
        return Err(format("expected exactly one data row".into()));
    }
    let values = row
        .iter()
        .enumerate()
        .map(|(j, s)| match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(format(format!("x{j} = '{s}' is not a finite number"))),
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(DVector::from_vec(values))
}
