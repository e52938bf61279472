use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::ode::ForcingCurve;
use crate::smoothing::ObservationSet;

fn io_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

fn parse_cell(cell: &str, line: usize, column: &str) -> Result<f64> {
    let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
        line,
        message: format!("column `{column}`: `{cell}` is not a number"),
    })?;
    if !v.is_finite() {
        return Err(Error::Parse {
            line,
            message: format!("column `{column}`: non-finite value `{cell}`"),
        });
    }
    Ok(v)
}

/// Rows of a numeric CSV with header; line numbers are one-based and count the header.
fn read_table<R: Read>(reader: R) -> Result<(Vec<String>, Vec<(usize, Vec<f64>)>)> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Parse { line: 1, message: e.to_string() })?
        .iter()
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
            match e.kind() {
                csv::ErrorKind::UnequalLengths { .. } => {
                    Error::Schema(format!("line {line}: row length differs from the header ({} columns)", header.len()))
                }
                _ => Error::Parse { line, message: e.to_string() },
            }
        })?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        let vals = rec
            .iter()
            .zip(&header)
            .map(|(c, h)| parse_cell(c, line, h))
            .collect::<Result<Vec<f64>>>()?;
        rows.push((line, vals));
    }
    Ok((header, rows))
}

/// Parse `t,y1,...,yp` data; rows are sorted by time and repeated times are kept.
pub fn read_observations<R: Read>(reader: R) -> Result<ObservationSet> {
    let (header, rows) = read_table(reader)?;
    if header.len() < 2 {
        return Err(Error::Schema(format!("expected `t,y1,...,yp`, got {} column(s)", header.len())));
    }
    if !header[0].eq_ignore_ascii_case("t") {
        return Err(Error::Schema(format!("first column must be `t`, got `{}`", header[0])));
    }
    if rows.is_empty() {
        return Err(Error::InsufficientData("no data rows".into()));
    }
    let mut rows: Vec<Vec<f64>> = rows.into_iter().map(|(_, r)| r).collect();
    rows.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let times = rows.iter().map(|r| r[0]).collect();
    let values = rows.into_iter().map(|r| r[1..].to_vec()).collect();
    ObservationSet::new(times, values, None)
}

pub fn ingest_csv(path: impl AsRef<Path>) -> Result<ObservationSet> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    read_observations(file)
}

/// Header `t,y1,...,yp`; values use the shortest representation that parses back exactly.
pub fn write_observations<W: Write>(data: &ObservationSet, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["t".to_string()];
    header.extend((1..=data.dim()).map(|k| format!("y{k}")));
    w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
    for (i, &t) in data.times().iter().enumerate() {
        let mut rec = vec![t.to_string()];
        rec.extend(data.row(i).iter().map(f64::to_string));
        w.write_record(&rec).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Io(e.to_string()))
}

pub fn write_csv(data: &ObservationSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    write_observations(data, file)
}

/// Two-column `t,value` forcing input.
pub fn read_forcing<R: Read>(reader: R) -> Result<ForcingCurve> {
    let (header, rows) = read_table(reader)?;
    if header.len() != 2 {
        return Err(Error::Schema(format!("forcing file needs 2 columns, got {}", header.len())));
    }
    ForcingCurve::new(rows.into_iter().map(|(_, r)| (r[0], r[1])).collect())
}

pub fn ingest_forcing_csv(path: impl AsRef<Path>) -> Result<ForcingCurve> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    read_forcing(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn three_rows_are_sorted() {
        let d = read_observations("t,y1\n0.5,2\n0.1,1\n0.9,3\n".as_bytes()).unwrap();
        assert_eq!(d.times(), &[0.1, 0.5, 0.9]);
        assert_eq!(d.component(0), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn nan_cell_names_its_line() {
        let err = read_observations("t,y1,y2\n0.1,1,2\n0.2,NaN,3\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err = read_observations("t,y1\n0.1,abc\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(read_observations("t,y1\n0.1,1,2\n".as_bytes()), Err(Error::Schema(_))));
        assert!(matches!(read_observations("x,y1\n0.1,1\n".as_bytes()), Err(Error::Schema(_))));
        assert!(matches!(read_observations("t\n0.1\n".as_bytes()), Err(Error::Schema(_))));
    }

    #[test]
    fn round_trip_is_exact() {
        let t = vec![0.1, 0.1, 1.0 / 3.0];
        let rows = vec![vec![1e-17, -2.5, 7.0 / 9.0], vec![3.0, 4.0, 5.0], vec![0.3, 0.2, f64::MAX]];
        let d = ObservationSet::new(t, rows, None).unwrap();
        let mut buf = Vec::new();
        write_observations(&d, &mut buf).unwrap();
        let back = read_observations(buf.as_slice()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn forcing_is_sorted() {
        let f = read_forcing("t,d\n1,2\n0,0\n".as_bytes()).unwrap();
        assert_eq!(f.at(0.5), 1.0);
        assert!(read_forcing("t,d,e\n1,2,3\n".as_bytes()).is_err());
    }
}
