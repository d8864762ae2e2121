//! CSV and JSON artifacts. Every writer goes through [`write_atomic`], so a
//! crashed or concurrent run never leaves a half-written file behind.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;

use crate::{Error, Point, Result};

/// Writes `bytes` to a temporary sibling of `path`, then renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.as_file().sync_all().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

/// Shortest text that reads back to the same `f64` is not fixed width; this
/// uses 17 significant digits, which always round-trips.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

/// CSV with a header row and one row of floats per record.
pub fn write_csv<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: AsRef<[f64]>,
{
    write_records(
        path,
        header,
        rows.into_iter()
            .map(|row| row.as_ref().iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>()),
    )
}

/// CSV with a header row and preformatted fields.
pub fn write_records<I, R>(path: &Path, header: &[&str], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io(path, e.into_error()))?;
    write_atomic(path, &bytes)
}

/// Reads a float CSV, checking the header.
pub fn read_csv(path: &Path, header: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut r = csv::Reader::from_path(path)?;
    let found: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if found != header {
        return Err(Error::Config(format!(
            "{}: expected header {header:?}, found {found:?}",
            path.display()
        )));
    }
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        rows.push(row);
    }
    Ok(rows)
}

pub fn write_points_csv(path: &Path, points: &[Point]) -> Result<()> {
    write_csv(path, &["x", "y", "z"], points.iter().map(|p| [p.x, p.y, p.z]))
}

pub fn read_points_csv(path: &Path) -> Result<Vec<Point>> {
    Ok(read_csv(path, &["x", "y", "z"])?
        .into_iter()
        .map(|r| Point::new(r[0], r[1], r[2]))
        .collect())
}

pub fn write_eigenvalues_csv(path: &Path, eigenvalues: &[Complex64]) -> Result<()> {
    write_csv(path, &["re", "im"], eigenvalues.iter().map(|z| [z.re, z.im]))
}

pub fn read_eigenvalues_csv(path: &Path) -> Result<Vec<Complex64>> {
    Ok(read_csv(path, &["re", "im"])?
        .into_iter()
        .map(|r| Complex64::new(r[0], r[1]))
        .collect())
}

/// Point values `x,y,z,u`.
pub fn write_snapshot_csv(path: &Path, points: &[Point], values: &[f64]) -> Result<()> {
    write_csv(
        path,
        &["x", "y", "z", "u"],
        points.iter().zip(values).map(|(p, &u)| [p.x, p.y, p.z, u]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_round_trip_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/cloud.csv");
        let pts = vec![
            Point::new(0.1, -1.0 / 3.0, 1e-300),
            Point::new(2.0f64.sqrt(), 0.0, -7.5),
        ];
        write_points_csv(&path, &pts).unwrap();
        assert_eq!(read_points_csv(&path).unwrap(), pts);
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("x,y,z\n"));
    }

    #[test]
    fn header_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_eigenvalues_csv(&path, &[Complex64::new(1.0, -2.0)]).unwrap();
        assert!(read_points_csv(&path).is_err());
        assert_eq!(read_eigenvalues_csv(&path).unwrap(), vec![Complex64::new(1.0, -2.0)]);
    }

    #[test]
    fn non_finite_values_are_written_verbatim() {
        assert_eq!(fmt_f64(f64::NAN), "NaN");
        assert_eq!(fmt_f64(f64::INFINITY), "inf");
        assert_eq!("inf".parse::<f64>().unwrap(), f64::INFINITY);
    }
}
