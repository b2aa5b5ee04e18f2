//! Headerless CSV for matrices (one line per row) and vectors (one value per line).

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::matrix::DesignMatrix;

fn parse_rows<R: Read>(reader: R) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        let row = record
            .iter()
            .enumerate()
            .map(|(j, field)| {
                field.parse::<f64>().map_err(|_| {
                    Error::InvalidMatrix(format!("row {i}, column {j}: cannot parse {field:?}"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_matrix<R: Read>(reader: R) -> Result<DesignMatrix> {
    let rows = parse_rows(reader)?;
    if rows.is_empty() || rows[0].is_empty() {
        return Err(Error::InvalidMatrix("matrix file is empty".into()));
    }
    DesignMatrix::from_rows(&rows)
}

pub fn read_vector<R: Read>(reader: R) -> Result<Vec<f64>> {
    let rows = parse_rows(reader)?;
    if let Some(i) = rows.iter().position(|r| r.len() != 1) {
        return Err(Error::InvalidMatrix(format!(
            "vector file line {i} has {} fields, expected 1",
            rows[i].len()
        )));
    }
    let v: Vec<f64> = rows.into_iter().map(|r| r[0]).collect();
    if v.is_empty() {
        return Err(Error::InvalidMatrix("vector file is empty".into()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidMatrix("non-finite vector entry".into()));
    }
    Ok(v)
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<DesignMatrix> {
    read_matrix(std::fs::File::open(path)?)
}

pub fn load_vector(path: impl AsRef<Path>) -> Result<Vec<f64>> {
    read_vector(std::fs::File::open(path)?)
}

/// Writes with Rust's shortest round-trip float formatting, so a write/read
/// cycle is lossless.
pub fn write_matrix<W: Write>(m: &DesignMatrix, mut w: W) -> Result<()> {
    for i in 0..m.rows() {
        let line: Vec<String> = (0..m.cols()).map(|j| m.get(i, j).to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn write_vector<W: Write>(v: &[f64], mut w: W) -> Result<()> {
    for x in v {
        writeln!(w, "{x}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_rectangular_matrix() {
        let m = read_matrix("1, 0\n0, 1\n".as_bytes()).unwrap();
        assert_eq!(m, DesignMatrix::identity(2));
        assert!(m.is_normalized());
    }

    #[test]
    fn rejects_ragged_and_garbage() {
        assert!(read_matrix("1,0\n0\n".as_bytes()).is_err());
        assert!(read_matrix("1,x\n".as_bytes()).is_err());
        assert!(read_matrix("1,inf\n".as_bytes()).is_err());
        assert!(read_matrix("".as_bytes()).is_err());
        assert!(read_vector("1,2\n".as_bytes()).is_err());
    }

    #[test]
    fn matrix_write_read_is_lossless() {
        let m = DesignMatrix::from_rows(&[vec![0.1, 1.0 / 3.0], vec![-2.5e-17, 7.0]]).unwrap();
        let mut buf = Vec::new();
        write_matrix(&m, &mut buf).unwrap();
        assert_eq!(read_matrix(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn reads_vector() {
        assert_eq!(read_vector("3\n0.5\n".as_bytes()).unwrap(), vec![3.0, 0.5]);
    }
}
