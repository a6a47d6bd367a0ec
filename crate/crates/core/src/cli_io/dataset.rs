//! CSV input for designs and responses.

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use std::path::Path;

fn parse_cell(cell: &str, row: usize, col: usize) -> Result<f64> {
    let t = cell.trim();
    let v: f64 = t.parse().map_err(|_| Error::Data(format!("row {row}, column {col}: not a number: {t:?}")))?;
    if !v.is_finite() {
        return Err(Error::Data(format!("row {row}, column {col}: non-finite value {t:?}")));
    }
    Ok(v)
}

/// Numeric rows of a CSV text. With `header` the first line is skipped.
pub fn parse_rows(text: &str, header: bool) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(header).flexible(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows = vec![];
    let first = if header { 2 } else { 1 };
    for (r, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                Error::Data(format!("row {}: expected {expected_len} fields, found {len}", r + first))
            }
            _ => Error::Data(format!("csv: {e}")),
        })?;
        rows.push(rec.iter().enumerate().map(|(c, cell)| parse_cell(cell, r + first, c + 1)).collect::<Result<Vec<f64>>>()?);
    }
    if rows.is_empty() {
        return Err(Error::Data("no data rows".into()));
    }
    Ok(rows)
}

pub fn parse_dataset(x_text: &str, y_text: &str, header: bool) -> Result<(Matrix, Vec<f64>)> {
    let rows = parse_rows(x_text, header)?;
    let yrows = parse_rows(y_text, header)?;
    if let Some(r) = yrows.iter().position(|r| r.len() != 1) {
        return Err(Error::Data(format!("response row {} must have one field", r + 1)));
    }
    let y: Vec<f64> = yrows.into_iter().map(|r| r[0]).collect();
    if y.len() != rows.len() {
        return Err(Error::Data(format!("design has {} rows but response has {}", rows.len(), y.len())));
    }
    Ok((Matrix::try_from_rows(&rows)?, y))
}

/// Reads the design X and the response y from two CSV files.
pub fn read_dataset(x_path: &Path, y_path: &Path, header: bool) -> Result<(Matrix, Vec<f64>)> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::Data(format!("{}: {e}", p.display())));
    parse_dataset(&read(x_path)?, &read(y_path)?, header)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scientific_notation() {
        let (x, y) = parse_dataset("1e-3,2\n3,4\n", "1\n-2.5E1\n", false).unwrap();
        assert_eq!(x[(0, 0)], 1e-3);
        assert_eq!(y, vec![1.0, -25.0]);
    }

    #[test]
    fn header_row_skipped() {
        let (x, _) = parse_dataset("a,b\n1,2\n", "y\n1\n", true).unwrap();
        assert_eq!((x.rows(), x.cols()), (1, 2));
    }

    #[test]
    fn rejects_bad_input() {
        for (xs, ys) in [
            ("1,2\n3\n", "1\n2\n"),
            ("1,NaN\n", "1\n"),
            ("1,inf\n", "1\n"),
            ("1,x\n", "1\n"),
            ("1,2\n", "1\n2\n"),
            ("", ""),
        ] {
            assert!(matches!(parse_dataset(xs, ys, false), Err(Error::Data(_))), "{xs:?}");
        }
    }
}
