use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::grid::TimeGrid;
use super::path::DiscretePath;
use crate::error::{Error, Result};

/// Formats with 17 significant digits, enough for an exact `f64` round trip.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `t,x1,…,xd` rows.
pub fn write_path_csv<W: Write>(path: &DiscretePath, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string()];
    header.extend((1..=path.dim()).map(|k| format!("x{k}")));
    w.write_record(&header)?;
    for (i, &t) in path.times().iter().enumerate() {
        let mut row = vec![format_f64(t)];
        row.extend(path.node(i).iter().map(|v| format_f64(*v)));
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_path_csv<R: Read>(reader: R) -> Result<DiscretePath> {
    let mut r = csv::Reader::from_reader(reader);
    let header = r.headers()?.clone();
    let dim = header.len().saturating_sub(1);
    let expected: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=dim).map(|k| format!("x{k}")))
        .collect();
    if dim == 0 || header.iter().map(str::trim).ne(expected.iter().map(String::as_str)) {
        return Err(Error::Precondition(format!(
            "path CSV header must be t,x1,…,xd; got {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut times = Vec::new();
    let mut values = Vec::new();
    for record in r.records() {
        let record = record?;
        let mut fields = record.iter().map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|_| Error::Precondition(format!("not a number in path CSV: {f:?}")))
        });
        times.push(fields.next().unwrap()?);
        for f in fields {
            values.push(f?);
        }
    }
    DiscretePath::new(TimeGrid::new(times)?, dim, values)
}

pub fn save_path(path: &DiscretePath, file: &Path) -> Result<()> {
    let f = File::create(file).map_err(|e| Error::io(file, e))?;
    write_path_csv(path, f)
}

pub fn load_path(file: &Path) -> Result<DiscretePath> {
    let f = File::open(file).map_err(|e| Error::io(file, e))?;
    read_path_csv(f)
}
