//! CSV formats for site maps, correction tables and measurements.
//!
//! Numbers are written in fixed-point notation with twelve significant
//! digits, so identical inputs give byte-identical files.

use std::fs;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::geometry::WaferSite;
use crate::stats::MeasurementRecord;
use crate::wafer::{CorrectionRow, SiteResult};

pub const SITE_HEADER: [&str; 10] = [
    "x_mm",
    "y_mm",
    "theta_bottom_deg",
    "theta_top_deg",
    "t_prime_nm",
    "w_bottom_nm",
    "w_top_nm",
    "area_um2",
    "bias_bottom_nm",
    "bias_top_nm",
];

pub const CORRECTION_HEADER: [&str; 6] =
    ["x_mm", "y_mm", "drawn_w_bottom_nm", "drawn_w_top_nm", "predicted_area_um2", "residual_area_error"];

pub const MEASUREMENT_HEADER: [&str; 7] = ["wafer_id", "chip_id", "x_mm", "y_mm", "area_class_um2", "run_id", "rn_ohm"];

const SIGNIFICANT: i32 = 12;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error("nothing to export")]
    EmptyResults,
    #[error("{path}: expected header `{expected}`, found `{found}`")]
    Header { path: String, expected: String, found: String },
    #[error("{path}:{line}: {reason}")]
    Row { path: String, line: u64, reason: String },
    #[error("{path}: no valid rows ({} rejected)", diagnostics.len())]
    ZeroValidRows { path: String, diagnostics: Vec<Diagnostic> },
}

/// A rejected input row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub line: u64,
    pub reason: String,
}

/// Fixed-point rendering with twelve significant digits.
pub fn format_value(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let magnitude = v.abs().log10().floor() as i32;
    if magnitude < -15 {
        return format!("{:.*e}", (SIGNIFICANT - 1) as usize, v);
    }
    let decimals = (SIGNIFICANT - 1 - magnitude).max(0) as usize;
    format!("{v:.decimals$}")
}

fn write_table(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<(), IoError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |source| IoError::Csv { path: path.display().to_string(), source };
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| IoError::Io { path: path.display().to_string(), source: e.into_error() })?;
    fs::write(path, bytes).map_err(|source| IoError::Io { path: path.display().to_string(), source })
}

pub fn export_sites(results: &[SiteResult], path: impl AsRef<Path>) -> Result<(), IoError> {
    if results.is_empty() {
        return Err(IoError::EmptyResults);
    }
    let rows = results.iter().map(|r| {
        [
            r.site.x_mm,
            r.site.y_mm,
            r.theta_bottom.to_degrees(),
            r.theta_top.to_degrees(),
            r.t_prime,
            r.w_bottom,
            r.w_top,
            r.area,
            r.bias_bottom,
            r.bias_top,
        ]
        .into_iter()
        .map(format_value)
        .collect()
    });
    write_table(path.as_ref(), &SITE_HEADER, rows)
}

pub fn export_corrections(rows: &[CorrectionRow], path: impl AsRef<Path>) -> Result<(), IoError> {
    if rows.is_empty() {
        return Err(IoError::EmptyResults);
    }
    let rows = rows.iter().map(|r| {
        [r.site.x_mm, r.site.y_mm, r.drawn_w_bottom, r.drawn_w_top, r.predicted_area, r.residual_area_error]
            .into_iter()
            .map(format_value)
            .collect()
    });
    write_table(path.as_ref(), &CORRECTION_HEADER, rows)
}

pub fn export_measurements(records: &[MeasurementRecord], path: impl AsRef<Path>) -> Result<(), IoError> {
    if records.is_empty() {
        return Err(IoError::EmptyResults);
    }
    let rows = records.iter().map(|r| {
        vec![
            r.wafer_id.clone(),
            r.chip_id.clone(),
            format_value(r.x_mm),
            format_value(r.y_mm),
            format_value(r.area_class_um2),
            r.run_id.clone(),
            format_value(r.rn_ohm),
        ]
    });
    write_table(path.as_ref(), &MEASUREMENT_HEADER, rows)
}

struct Reader {
    path: String,
    records: Vec<(u64, csv::StringRecord)>,
}

fn open(path: &Path, header: &[&str]) -> Result<Reader, IoError> {
    let name = path.display().to_string();
    let text = fs::read(path).map_err(|source| IoError::Io { path: name.clone(), source })?;
    let mut rdr =
        csv::ReaderBuilder::new().has_headers(true).flexible(true).trim(csv::Trim::All).from_reader(text.as_slice());
    let found = rdr.headers().map_err(|source| IoError::Csv { path: name.clone(), source })?.clone();
    if found.iter().ne(header.iter().copied()) {
        return Err(IoError::Header {
            path: name,
            expected: header.join(","),
            found: found.iter().collect::<Vec<_>>().join(","),
        });
    }
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|source| IoError::Csv { path: name.clone(), source })?;
        let line = rec.position().map_or(0, |p| p.line());
        records.push((line, rec));
    }
    Ok(Reader { path: name, records })
}

fn numeric_row(rec: &csv::StringRecord, width: usize) -> Result<Vec<f64>, String> {
    if rec.len() != width {
        return Err(format!("expected {width} fields, found {}", rec.len()));
    }
    rec.iter()
        .enumerate()
        .map(|(i, f)| f.parse::<f64>().map_err(|_| format!("field {} (`{f}`) is not a number", i + 1)))
        .collect()
}

pub fn import_sites(path: impl AsRef<Path>) -> Result<Vec<SiteResult>, IoError> {
    let r = open(path.as_ref(), &SITE_HEADER)?;
    r.records
        .iter()
        .map(|(line, rec)| {
            let v = numeric_row(rec, SITE_HEADER.len()).map_err(|reason| IoError::Row {
                path: r.path.clone(),
                line: *line,
                reason,
            })?;
            Ok(SiteResult {
                site: WaferSite::new(v[0], v[1]),
                theta_bottom: v[2].to_radians(),
                theta_top: v[3].to_radians(),
                t_prime: v[4],
                w_bottom: v[5],
                w_top: v[6],
                area: v[7],
                bias_bottom: v[8],
                bias_top: v[9],
            })
        })
        .collect()
}

pub fn import_corrections(path: impl AsRef<Path>) -> Result<Vec<CorrectionRow>, IoError> {
    let r = open(path.as_ref(), &CORRECTION_HEADER)?;
    let rows: Vec<CorrectionRow> = r
        .records
        .iter()
        .map(|(line, rec)| {
            let v = numeric_row(rec, CORRECTION_HEADER.len())
                .and_then(
                    |v| if v[2] > 0.0 && v[3] > 0.0 { Ok(v) } else { Err("drawn widths must be positive".into()) },
                )
                .map_err(|reason| IoError::Row { path: r.path.clone(), line: *line, reason })?;
            Ok(CorrectionRow {
                site: WaferSite::new(v[0], v[1]),
                drawn_w_bottom: v[2],
                drawn_w_top: v[3],
                predicted_area: v[4],
                residual_area_error: v[5],
            })
        })
        .collect::<Result<_, IoError>>()?;
    if rows.is_empty() {
        return Err(IoError::ZeroValidRows { path: r.path, diagnostics: Vec::new() });
    }
    Ok(rows)
}

/// Parsed measurements plus one diagnostic per rejected row.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementImport {
    pub records: Vec<MeasurementRecord>,
    pub diagnostics: Vec<Diagnostic>,
}

fn parse_measurement(rec: &csv::StringRecord) -> Result<MeasurementRecord, String> {
    if rec.len() != MEASUREMENT_HEADER.len() {
        return Err(format!("expected {} fields, found {}", MEASUREMENT_HEADER.len(), rec.len()));
    }
    let num = |i: usize| -> Result<f64, String> {
        let v: f64 =
            rec[i].parse().map_err(|_| format!("{} (`{}`) is not a number", MEASUREMENT_HEADER[i], &rec[i]))?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(format!("{} is not finite", MEASUREMENT_HEADER[i]))
        }
    };
    let text = |i: usize| -> Result<String, String> {
        if rec[i].is_empty() {
            Err(format!("{} is empty", MEASUREMENT_HEADER[i]))
        } else {
            Ok(rec[i].to_string())
        }
    };
    let out = MeasurementRecord {
        wafer_id: text(0)?,
        chip_id: text(1)?,
        x_mm: num(2)?,
        y_mm: num(3)?,
        area_class_um2: num(4)?,
        run_id: text(5)?,
        rn_ohm: num(6)?,
    };
    if !(out.rn_ohm > 0.0) {
        return Err(format!("rn_ohm must be > 0, got {}", out.rn_ohm));
    }
    if !(out.area_class_um2 > 0.0) {
        return Err(format!("area_class_um2 must be > 0, got {}", out.area_class_um2));
    }
    Ok(out)
}

/// Read a measurement CSV, keeping every valid row and reporting the rest.
pub fn import_measurements(path: impl AsRef<Path>) -> Result<MeasurementImport, IoError> {
    let r = open(path.as_ref(), &MEASUREMENT_HEADER)?;
    let mut records = Vec::new();
    let mut diagnostics = Vec::new();
    for (line, rec) in &r.records {
        match parse_measurement(rec) {
            Ok(m) => records.push(m),
            Err(reason) => diagnostics.push(Diagnostic { line: *line, reason }),
        }
    }
    if records.is_empty() {
        return Err(IoError::ZeroValidRows { path: r.path, diagnostics });
    }
    Ok(MeasurementImport { records, diagnostics })
}
