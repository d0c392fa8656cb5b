//! Plain-text matrix persistence.
//!
//! First line `rows cols`, then one whitespace-separated row per line with
//! 17 significant digits, which round-trips every finite `f64`.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub fn format_matrix(m: &DMatrix<f64>) -> String {
    let mut out = format!("{} {}\n", m.nrows(), m.ncols());
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_matrix(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::Schema("empty matrix file".into()))?;
    let dims: Vec<usize> = header
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::Schema(format!("bad matrix header {header:?}: {e}")))?;
    let [rows, cols] = dims[..] else {
        return Err(Error::Schema(format!("matrix header needs `rows cols`, got {header:?}")));
    };
    let mut data = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (r, line) in lines.enumerate() {
        let row: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| Error::Schema(format!("row {r}: {e}")))?;
        if row.len() != cols {
            return Err(Error::Schema(format!(
                "row {r} has {} entries, expected {cols}",
                row.len()
            )));
        }
        data.extend(row);
        seen += 1;
    }
    if seen != rows {
        return Err(Error::Schema(format!("expected {rows} rows, found {seen}")));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

pub fn save_matrix(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_matrix(m)).map_err(|e| Error::io(path, e))
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_matrix(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_and_layout() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 0.1]);
        let text = format_matrix(&m);
        assert!(text.starts_with("2 3\n"));
        assert_eq!(text.lines().count(), 3);
        assert_eq!(parse_matrix(&text).unwrap(), m);
    }

    #[test]
    fn rejects_ragged_rows() {
        assert!(parse_matrix("2 2\n1 2\n3\n").is_err());
        assert!(parse_matrix("2 2\n1 2\n").is_err());
        assert!(parse_matrix("x\n").is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(vals in prop::collection::vec(-1e300f64..1e300, 12)) {
            let m = DMatrix::from_row_slice(3, 4, &vals);
            prop_assert_eq!(parse_matrix(&format_matrix(&m)).unwrap(), m);
        }
    }
}
