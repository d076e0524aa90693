use std::fs::File;
use std::path::Path;

use crate::error::{Error, Result};

/// Timestamped rows read from one CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub columns: Vec<String>,
    pub timestamps: Vec<i64>,
    /// `rows[k]` has one value per entry of `columns`.
    pub rows: Vec<Vec<f64>>,
}

impl Stream {
    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}

fn open_reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    Error::csv(path, line, err.to_string())
}

/// Reads `timestamp,<col>...` with integer epoch-second timestamps that must
/// strictly increase. `expected_width` pins the number of value columns.
pub fn read_stream(path: &Path, expected_width: Option<usize>) -> Result<Stream> {
    let mut rdr = open_reader(path)?;
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.len() < 2 {
        return Err(Error::csv(path, 1, "header needs a timestamp column and at least one value column"));
    }
    if let Some(w) = expected_width {
        if headers.len() != w + 1 {
            return Err(Error::csv(
                path,
                1,
                format!("expected {} columns, header has {}", w + 1, headers.len()),
            ));
        }
    }
    let columns: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut timestamps = Vec::new();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let ts: i64 = record[0]
            .parse()
            .map_err(|_| Error::csv(path, line, format!("timestamp `{}` is not an integer", &record[0])))?;
        if let Some(&prev) = timestamps.last() {
            if ts <= prev {
                return Err(Error::csv(path, line, format!("timestamp {ts} does not increase")));
            }
        }
        let mut row = Vec::with_capacity(columns.len());
        for (k, cell) in record.iter().enumerate().skip(1) {
            let v: f64 = cell.parse().map_err(|_| {
                Error::csv(path, line, format!("column `{}`: `{cell}` is not a number", &headers[k]))
            })?;
            if !v.is_finite() {
                return Err(Error::csv(path, line, format!("column `{}` is not finite", &headers[k])));
            }
            row.push(v);
        }
        timestamps.push(ts);
        rows.push(row);
    }
    Ok(Stream {
        columns,
        timestamps,
        rows,
    })
}

/// Writes a stream with a `timestamp` first column. Floats use the shortest
/// representation that parses back to the same value.
pub fn write_stream(path: &Path, stream: &Stream) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    let io = |e: csv::Error| Error::io(path, std::io::Error::other(e.to_string()));
    let mut header = vec!["timestamp".to_string()];
    header.extend(stream.columns.iter().cloned());
    w.write_record(&header).map_err(io)?;
    for (ts, row) in stream.timestamps.iter().zip(&stream.rows) {
        let mut rec = Vec::with_capacity(row.len() + 1);
        rec.push(ts.to_string());
        rec.extend(row.iter().map(|v| v.to_string()));
        w.write_record(&rec).map_err(io)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
