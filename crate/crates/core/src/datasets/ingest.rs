use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use chrono::NaiveDate;
use nalgebra::DMatrix;

use super::geo::GeoRecord;
use crate::error::{Error, Result};
use crate::geometry::PointCloud;

fn line_of(record: &csv::StringRecord) -> usize {
    record.position().map_or(0, |p| p.line() as usize)
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    Error::Data { line, message: e.to_string() }
}

/// Parses a numeric CSV (header row of feature names, one sample per row) into a
/// uniform cloud.
pub fn read_numeric_points<R: Read>(reader: R) -> Result<PointCloud> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    if header.is_empty() || header.iter().any(str::is_empty) {
        return Err(Error::Data { line: 1, message: "header must name every feature".into() });
    }
    let d = header.len();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = line_of(&rec);
        if rec.len() != d {
            return Err(Error::Data { line, message: format!("expected {d} fields, found {}", rec.len()) });
        }
        for (field, name) in rec.iter().zip(header.iter()) {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Data { line, message: format!("column '{name}': cannot parse '{field}'") })?;
            if !v.is_finite() {
                return Err(Error::Data { line, message: format!("column '{name}': non-finite value '{field}'") });
            }
            values.push(v);
        }
    }
    if values.is_empty() {
        return Err(Error::DataFormat("CSV has no data rows".into()));
    }
    PointCloud::uniform(DMatrix::from_row_slice(values.len() / d, d, &values))
}

pub fn read_numeric_csv(path: &Path) -> Result<PointCloud> {
    read_numeric_points(File::open(path)?)
}

fn parse_date(field: &str) -> Option<NaiveDate> {
    let day = field.get(..10)?;
    NaiveDate::parse_from_str(day, "%Y-%m-%d").ok()
}

/// Parses a geo CSV with columns `id,timestamp,lat,lon` (any order, extras ignored).
pub fn read_geo_records<R: Read>(reader: R) -> Result<Vec<GeoRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers().map_err(csv_error)?.clone();
    let column = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Data { line: 1, message: format!("missing required column '{name}'") })
    };
    let (id_col, ts_col, lat_col, lon_col) = (column("id")?, column("timestamp")?, column("lat")?, column("lon")?);
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_error)?;
        let line = line_of(&rec);
        let field = |i: usize| rec.get(i).unwrap_or("");
        let id = field(id_col);
        if id.is_empty() {
            return Err(Error::Data { line, message: "empty id".into() });
        }
        let date = parse_date(field(ts_col))
            .ok_or_else(|| Error::Data { line, message: format!("bad timestamp '{}'", field(ts_col)) })?;
        let number = |col: usize, name: &str| -> Result<f64> {
            let s = field(col);
            let v: f64 = s.parse().map_err(|_| Error::Data { line, message: format!("{name}: cannot parse '{s}'") })?;
            if !v.is_finite() {
                return Err(Error::Data { line, message: format!("{name}: non-finite value '{s}'") });
            }
            Ok(v)
        };
        let record = GeoRecord::new(id, date, number(lat_col, "lat")?, number(lon_col, "lon")?)
            .map_err(|e| Error::Data { line, message: e.to_string() })?;
        out.push(record);
    }
    if out.is_empty() {
        return Err(Error::DataFormat("geo CSV has no data rows".into()));
    }
    Ok(out)
}

pub fn read_geo_csv(path: &Path) -> Result<Vec<GeoRecord>> {
    read_geo_records(File::open(path)?)
}

/// Newline-separated identifiers; blank lines are skipped.
pub fn read_id_list(path: &Path) -> Result<Vec<String>> {
    let reader = BufReader::new(File::open(path)?);
    let mut ids = Vec::new();
    for line in reader.lines() {
        let line = line?;
        let id = line.trim();
        if !id.is_empty() {
            ids.push(id.to_string());
        }
    }
    Ok(ids)
}
