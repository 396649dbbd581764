//! SVG wafer heatmaps from any CSV with `x_mm` and `y_mm` columns.
//!
//! Columns whose every value parses as a number become plottable fields.
//! Rows sharing a coordinate are averaged, so a measurement file with several
//! runs per junction renders one cell per site.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HeatmapError {
    #[error("unknown field `{field}`; available: {}", available.join(", "))]
    UnknownField { field: String, available: Vec<String> },
    #[error("input has no x_mm/y_mm columns")]
    MissingCoordinates,
    #[error("input has no rows")]
    Empty,
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
}

/// Numeric view of a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub x_mm: Vec<f64>,
    pub y_mm: Vec<f64>,
    pub fields: BTreeMap<String, Vec<f64>>,
}

impl Table {
    pub fn read(path: impl AsRef<Path>) -> Result<Table, HeatmapError> {
        let path = path.as_ref();
        let name = path.display().to_string();
        let bytes = fs::read(path).map_err(|source| HeatmapError::Io { path: name.clone(), source })?;
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes.as_slice());
        let header: Vec<String> = rdr
            .headers()
            .map_err(|source| HeatmapError::Csv { path: name.clone(), source })?
            .iter()
            .map(str::to_string)
            .collect();
        let mut columns: Vec<Option<Vec<f64>>> = vec![Some(Vec::new()); header.len()];
        for rec in rdr.records() {
            let rec = rec.map_err(|source| HeatmapError::Csv { path: name.clone(), source })?;
            for (col, field) in columns.iter_mut().zip(rec.iter()) {
                if let Some(values) = col {
                    match field.parse::<f64>() {
                        Ok(v) if v.is_finite() => values.push(v),
                        _ => *col = None,
                    }
                }
            }
        }
        let mut fields = BTreeMap::new();
        for (name, col) in header.into_iter().zip(columns) {
            if let Some(values) = col {
                fields.insert(name, values);
            }
        }
        let x_mm = fields.remove("x_mm").ok_or(HeatmapError::MissingCoordinates)?;
        let y_mm = fields.remove("y_mm").ok_or(HeatmapError::MissingCoordinates)?;
        if x_mm.is_empty() {
            return Err(HeatmapError::Empty);
        }
        Ok(Table { x_mm, y_mm, fields })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub x_mm: f64,
    pub y_mm: f64,
    pub value: f64,
    /// Position on the colour scale, 0 at the minimum and 1 at the maximum.
    pub t: f64,
    pub color: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Heatmap {
    pub field: String,
    pub cells: Vec<Cell>,
    pub min: f64,
    pub max: f64,
    pub cell_mm: f64,
    pub radius_mm: f64,
}

const STOPS: [(f64, f64, f64); 3] = [(49.0, 54.0, 149.0), (255.0, 255.0, 191.0), (165.0, 0.0, 38.0)];

/// Colour for a scale position in `[0, 1]`.
pub fn color_for(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let (a, b, u) = if t <= 0.5 { (STOPS[0], STOPS[1], t * 2.0) } else { (STOPS[1], STOPS[2], (t - 0.5) * 2.0) };
    let mix = |p: f64, q: f64| (p + (q - p) * u).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(a.0, b.0), mix(a.1, b.1), mix(a.2, b.2))
}

fn smallest_gap(values: &[f64]) -> Option<f64> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v.windows(2).map(|w| w[1] - w[0]).filter(|d| *d > 1e-9).min_by(f64::total_cmp)
}

impl Heatmap {
    pub fn build(table: &Table, field: &str, wafer_diameter_mm: f64) -> Result<Heatmap, HeatmapError> {
        let values = table.fields.get(field).ok_or_else(|| HeatmapError::UnknownField {
            field: field.to_string(),
            available: table.fields.keys().cloned().collect(),
        })?;

        let mut sums: BTreeMap<(u64, u64), (f64, f64, f64, usize)> = BTreeMap::new();
        for ((&x, &y), &v) in table.x_mm.iter().zip(&table.y_mm).zip(values) {
            // order by row then column
            let key = (ordered_bits(y), ordered_bits(x));
            let e = sums.entry(key).or_insert((x, y, 0.0, 0));
            e.2 += v;
            e.3 += 1;
        }
        let points: Vec<(f64, f64, f64)> = sums.values().map(|&(x, y, s, n)| (x, y, s / n as f64)).collect();

        let min = points.iter().map(|p| p.2).fold(f64::INFINITY, f64::min);
        let max = points.iter().map(|p| p.2).fold(f64::NEG_INFINITY, f64::max);
        let span = max - min;
        let cells = points
            .iter()
            .map(|&(x_mm, y_mm, value)| {
                let t = if span > 0.0 { (value - min) / span } else { 0.0 };
                Cell { x_mm, y_mm, value, t, color: color_for(t) }
            })
            .collect();

        let cell_mm =
            smallest_gap(&table.x_mm).into_iter().chain(smallest_gap(&table.y_mm)).fold(f64::INFINITY, f64::min);
        let cell_mm = if cell_mm.is_finite() { cell_mm } else { 5.0 };
        let reach = points.iter().map(|p| p.0.hypot(p.1) + cell_mm).fold(0.0, f64::max);
        Ok(Heatmap {
            field: field.to_string(),
            cells,
            min,
            max,
            cell_mm,
            radius_mm: (wafer_diameter_mm / 2.0).max(reach),
        })
    }

    pub fn to_svg(&self) -> String {
        const SIZE: f64 = 520.0;
        const MARGIN: f64 = 20.0;
        let scale = (SIZE - 2.0 * MARGIN) / (2.0 * self.radius_mm);
        let cx = SIZE / 2.0;
        let px = |mm: f64| cx + mm * scale;
        let py = |mm: f64| cx - mm * scale;
        let side = self.cell_mm * scale;

        let mut s = String::new();
        let height = SIZE + 70.0;
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE:.0}" height="{height:.0}" viewBox="0 0 {SIZE:.0} {height:.0}">"#
        );
        let _ = writeln!(s, r#"<title>{}</title>"#, self.field);
        let _ = writeln!(
            s,
            r##"<circle cx="{cx:.3}" cy="{cx:.3}" r="{:.3}" fill="#f4f4f4" stroke="#333333" stroke-width="1.5"/>"##,
            self.radius_mm * scale
        );
        for c in &self.cells {
            let _ = writeln!(
                s,
                r#"<rect x="{:.3}" y="{:.3}" width="{side:.3}" height="{side:.3}" fill="{}"><title>({}, {}) {}</title></rect>"#,
                px(c.x_mm) - side / 2.0,
                py(c.y_mm) - side / 2.0,
                c.color,
                c.x_mm,
                c.y_mm,
                c.value
            );
        }

        let bar_y = SIZE + 10.0;
        let _ = writeln!(s, r#"<defs><linearGradient id="scale">"#);
        for (i, stop) in ["0", "50", "100"].iter().enumerate() {
            let _ = writeln!(s, r#"<stop offset="{stop}%" stop-color="{}"/>"#, color_for(i as f64 / 2.0));
        }
        let _ = writeln!(s, "</linearGradient></defs>");
        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN:.0}" y="{bar_y:.0}" width="{:.0}" height="16" fill="url(#scale)"/>"#,
            SIZE - 2.0 * MARGIN
        );
        let _ = writeln!(
            s,
            r#"<text x="{MARGIN:.0}" y="{:.0}" font-size="12" font-family="sans-serif">min {}</text>"#,
            bar_y + 34.0,
            legend(self.min)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.0}" y="{:.0}" font-size="12" font-family="sans-serif" text-anchor="end">max {}</text>"#,
            SIZE - MARGIN,
            bar_y + 34.0,
            legend(self.max)
        );
        let _ = writeln!(
            s,
            r#"<text x="{cx:.0}" y="{:.0}" font-size="12" font-family="sans-serif" text-anchor="middle">{}</text>"#,
            bar_y + 34.0,
            self.field
        );
        s.push_str("</svg>\n");
        s
    }
}

fn legend(v: f64) -> String {
    format!("{v:.6}")
}

/// Bit pattern whose unsigned order matches the numeric order of `v`.
fn ordered_bits(v: f64) -> u64 {
    let b = v.to_bits();
    if b >> 63 == 1 {
        !b
    } else {
        b | (1 << 63)
    }
}

pub fn render_heatmap(
    input: impl AsRef<Path>,
    field: &str,
    output: impl AsRef<Path>,
    wafer_diameter_mm: f64,
) -> Result<Heatmap, HeatmapError> {
    let table = Table::read(input)?;
    let map = Heatmap::build(&table, field, wafer_diameter_mm)?;
    let out = output.as_ref();
    fs::write(out, map.to_svg()).map_err(|source| HeatmapError::Io { path: out.display().to_string(), source })?;
    Ok(map)
}
