//! Dataset CSV files: header `x1,...,xd,y`, one sample per LF-terminated
//! line, every value with 17 significant digits.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use bifid_core::{Dataset, Matrix};

use crate::error::{HarnessError, Result};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> HarnessError + '_ {
    move |source| HarnessError::Csv {
        path: path.to_path_buf(),
        source,
    }
}

/// `v` with 17 significant digits, enough to round-trip any `f64`.
pub fn format_value(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_dataset_to<W: Write>(mut w: W, d: &Dataset) -> std::io::Result<()> {
    let header: Vec<String> = (1..=d.dim()).map(|j| format!("x{j}")).chain(["y".to_string()]).collect();
    w.write_all(header.join(",").as_bytes())?;
    w.write_all(b"\n")?;
    for (x, &y) in d.inputs().rows().zip(d.outputs()) {
        let line: Vec<String> = x.iter().chain([&y]).map(|&v| format_value(v)).collect();
        w.write_all(line.join(",").as_bytes())?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn write_dataset(path: &Path, d: &Dataset) -> Result<()> {
    let f = File::create(path).map_err(io_err(path))?;
    write_dataset_to(BufWriter::new(f), d).map_err(io_err(path))
}

pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(csv_err(path))?;
    let headers = rdr.headers().map_err(csv_err(path))?.clone();
    let bad = |msg: String| HarnessError::Config {
        path: path.display().to_string(),
        msg,
    };
    let d = headers.len().checked_sub(1).filter(|d| *d > 0).ok_or_else(|| bad("need at least one input column and y".into()))?;
    for (j, h) in headers.iter().enumerate() {
        let want = if j == d { "y".to_string() } else { format!("x{}", j + 1) };
        if h.trim() != want {
            return Err(bad(format!("column {} is `{h}`, expected `{want}`", j + 1)));
        }
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err(path))?;
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|e| bad(format!("row {}, column {}: {e}", i + 1, j + 1)))?;
            if j == d {
                ys.push(v);
            } else {
                xs.push(v);
            }
        }
    }
    let inputs = Matrix::from_vec(ys.len(), d, xs).map_err(|e| bad(e.to_string()))?;
    Dataset::new(inputs, ys).map_err(|e| bad(e.to_string()))
}
