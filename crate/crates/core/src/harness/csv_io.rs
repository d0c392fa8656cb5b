use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{PlanePoint, SweepRecord, SweepResult};
use crate::error::{Error, Result};
use crate::metrics::ErrorSource;

pub const CSV_HEADER: [&str; 10] = [
    "trajectory_alpha",
    "trajectory_nsup",
    "trial",
    "p",
    "k",
    "e_in",
    "e_in_S",
    "e_out",
    "e_out_source",
    "iterations",
];

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io("<csv stream>", io),
        other => Error::Schema(format!("{other:?}")),
    }
}

// `Display` for f64 is the shortest string that parses back to the same bits.
fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write records (not the averages, which are derived) to `out`.
pub fn write_csv_to<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER).map_err(csv_err)?;
    for r in &result.records {
        w.write_record([
            r.point.alpha.to_string(),
            r.point.n_sup.to_string(),
            r.trial.to_string(),
            r.p.to_string(),
            r.k.to_string(),
            opt(r.e_in),
            opt(r.e_in_s),
            opt(r.e_out),
            opt(r.e_out_source),
            opt(r.iterations),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io("<csv stream>", e))
}

pub fn write_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(result, file).map_err(|e| relabel(e, path))
}

fn relabel(e: Error, path: &Path) -> Error {
    match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    }
}

fn field<T: std::str::FromStr>(row: usize, col: usize, raw: &str) -> Result<Option<T>> {
    if raw.is_empty() {
        return Ok(None);
    }
    raw.parse().map(Some).map_err(|_| {
        Error::Schema(format!("row {row}, column {}: cannot parse {raw:?}", CSV_HEADER[col]))
    })
}

fn required<T: std::str::FromStr>(row: usize, col: usize, raw: &str) -> Result<T> {
    field(row, col, raw)?
        .ok_or_else(|| Error::Schema(format!("row {row}, column {}: value required", CSV_HEADER[col])))
}

pub fn read_csv_from<R: Read>(input: R) -> Result<SweepResult> {
    let mut rd = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut rows = rd.records();
    let header = match rows.next() {
        Some(h) => h.map_err(csv_err)?,
        None => return Err(Error::Schema("missing header row".into())),
    };
    for (i, expected) in CSV_HEADER.iter().enumerate() {
        match header.get(i) {
            Some(found) if found == *expected => {}
            Some(found) => {
                return Err(Error::Schema(format!(
                    "column {}: expected {expected}, found {found:?}",
                    i + 1
                )))
            }
            None => return Err(Error::Schema(format!("missing column {expected}"))),
        }
    }
    if let Some(extra) = header.get(CSV_HEADER.len()) {
        return Err(Error::Schema(format!("unexpected column {extra:?}")));
    }

    let mut records = Vec::new();
    for (idx, row) in rows.enumerate() {
        let row = row.map_err(csv_err)?;
        let line = idx + 2;
        if row.len() != CSV_HEADER.len() {
            return Err(Error::Schema(format!(
                "row {line}: expected {} fields, found {}",
                CSV_HEADER.len(),
                row.len()
            )));
        }
        records.push(SweepRecord {
            point: PlanePoint::new(required(line, 0, &row[0])?, required(line, 1, &row[1])?),
            trial: required(line, 2, &row[2])?,
            p: required(line, 3, &row[3])?,
            k: required(line, 4, &row[4])?,
            e_in: field(line, 5, &row[5])?,
            e_in_s: field(line, 6, &row[6])?,
            e_out: field(line, 7, &row[7])?,
            e_out_source: field::<ErrorSource>(line, 8, &row[8])?,
            iterations: field(line, 9, &row[9])?,
        });
    }
    Ok(SweepResult::from_records(records))
}

pub fn read_csv(path: &Path) -> Result<SweepResult> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv_from(file).map_err(|e| relabel(e, path))
}
