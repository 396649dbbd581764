//! Published per-wafer measurements used as calibration anchors.

use serde::{Deserialize, Serialize};

use crate::electrical::GapRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaferRow {
    pub wafer: u32,
    pub area_um2: f64,
    pub cv_area_percent: f64,
    pub rn_ohm: f64,
    pub cv_rn_percent: f64,
    /// µA/µm².
    pub jc: f64,
}

impl WaferRow {
    pub fn gap_record(&self) -> GapRecord {
        GapRecord { rn_ohm: self.rn_ohm, area_um2: self.area_um2, jc: self.jc }
    }
}

const fn row(wafer: u32, area_um2: f64, cv_area_percent: f64, rn_kohm: f64, cv_rn_percent: f64, jc: f64) -> WaferRow {
    WaferRow { wafer, area_um2, cv_area_percent, rn_ohm: rn_kohm * 1000.0, cv_rn_percent, jc }
}

/// Five wafers, two junction areas each. Wafer 1 used a constant bias,
/// wafers 2–5 the per-site bias; wafers 3–5 used dynamic oxidation.
pub const WAFER_TABLE: [WaferRow; 10] = [
    row(1, 0.025, 8.0, 20.0, 16.0, 0.50),
    row(2, 0.025, 1.0, 18.0, 7.65, 0.46),
    row(3, 0.025, 2.1, 2.6, 6.68, 5.61),
    row(4, 0.025, 1.8, 3.2, 7.22, 4.71),
    row(5, 0.025, 0.8, 13.0, 6.01, 1.12),
    row(1, 0.090, 6.0, 8.0, 14.0, 0.51),
    row(2, 0.090, 1.8, 5.3, 5.79, 0.47),
    row(3, 0.090, 2.3, 0.7, 4.21, 5.80),
    row(4, 0.090, 1.0, 0.9, 4.64, 4.56),
    row(5, 0.090, 1.1, 3.3, 4.02, 1.15),
];

/// Rows for the given wafers, in table order.
pub fn rows_for(wafers: &[u32]) -> Vec<WaferRow> {
    WAFER_TABLE.iter().filter(|r| wafers.contains(&r.wafer)).copied().collect()
}
