//! Coefficient of variation and grouped measurement statistics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("need at least two samples, got {0}")]
    EmptyOrSingleton(usize),
    #[error("mean {0} is not positive")]
    NonPositiveMean(f64),
    #[error("sample {0} is not finite")]
    NonFinite(f64),
}

/// Mean, sample standard deviation (n − 1) and their ratio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    /// Dimensionless ratio `sd / mean`.
    pub cv: f64,
}

impl StatsSummary {
    pub fn cv_percent(&self) -> f64 {
        self.cv * 100.0
    }
}

pub fn coefficient_of_variation(samples: &[f64]) -> Result<StatsSummary, StatsError> {
    let n = samples.len();
    if n < 2 {
        return Err(StatsError::EmptyOrSingleton(n));
    }
    if let Some(&bad) = samples.iter().find(|v| !v.is_finite()) {
        return Err(StatsError::NonFinite(bad));
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    if !(mean > 0.0) {
        return Err(StatsError::NonPositiveMean(mean));
    }
    // two-pass variance
    let ss: f64 = samples.iter().map(|v| (v - mean) * (v - mean)).sum();
    let sd = (ss / (n - 1) as f64).sqrt();
    Ok(StatsSummary { n, mean, sd, cv: sd / mean })
}

/// One room-temperature resistance observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub wafer_id: String,
    pub chip_id: String,
    pub x_mm: f64,
    pub y_mm: f64,
    pub area_class_um2: f64,
    pub run_id: String,
    pub rn_ohm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKey {
    Wafer,
    Chip,
    Area,
    Run,
}

impl std::str::FromStr for GroupKey {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "wafer" => Ok(GroupKey::Wafer),
            "chip" => Ok(GroupKey::Chip),
            "area" | "area_class" => Ok(GroupKey::Area),
            "run" => Ok(GroupKey::Run),
            other => Err(format!("unknown group key `{other}` (expected wafer, chip, area, run)")),
        }
    }
}

fn group_label(rec: &MeasurementRecord, keys: &[GroupKey]) -> String {
    if keys.is_empty() {
        return "all".to_string();
    }
    keys.iter()
        .map(|k| match k {
            GroupKey::Wafer => format!("wafer={}", rec.wafer_id),
            GroupKey::Chip => format!("chip={}", rec.chip_id),
            GroupKey::Area => format!("area={}", rec.area_class_um2),
            GroupKey::Run => format!("run={}", rec.run_id),
        })
        .collect::<Vec<_>>()
        .join(",")
}

/// Spread between parallel measurement runs of the same physical junction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JunctionRepeat {
    pub wafer_id: String,
    pub chip_id: String,
    pub x_mm: f64,
    pub y_mm: f64,
    pub area_class_um2: f64,
    pub runs: usize,
    pub cv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepeatabilityReport {
    pub junctions: Vec<JunctionRepeat>,
    pub mean_cv: f64,
    pub median_cv: f64,
    pub max_cv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub groups: BTreeMap<String, StatsSummary>,
    pub warnings: Vec<String>,
    pub repeatability: Option<RepeatabilityReport>,
}

/// Group `records` by `keys` and summarise each group's resistance.
///
/// Groups that cannot produce a CV are skipped and named in `warnings`. When
/// a junction (wafer, chip, site, area class) is covered by more than one
/// `run_id`, its across-run CV is collected into the repeatability report.
pub fn aggregate(records: &[MeasurementRecord], keys: &[GroupKey]) -> AggregateReport {
    let mut keys = keys.to_vec();
    keys.sort();
    keys.dedup();

    let mut buckets: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for rec in records {
        buckets.entry(group_label(rec, &keys)).or_default().push(rec.rn_ohm);
    }

    let mut groups = BTreeMap::new();
    let mut warnings = Vec::new();
    for (label, values) in buckets {
        match coefficient_of_variation(&values) {
            Ok(s) => {
                groups.insert(label, s);
            }
            Err(e) => warnings.push(format!("group {label} skipped: {e}")),
        }
    }

    AggregateReport { groups, warnings, repeatability: repeatability(records) }
}

fn repeatability(records: &[MeasurementRecord]) -> Option<RepeatabilityReport> {
    type JunctionKey = (String, String, u64, u64, u64);
    let mut by_junction: BTreeMap<JunctionKey, Vec<&MeasurementRecord>> = BTreeMap::new();
    for rec in records {
        let key = (
            rec.wafer_id.clone(),
            rec.chip_id.clone(),
            rec.x_mm.to_bits(),
            rec.y_mm.to_bits(),
            rec.area_class_um2.to_bits(),
        );
        by_junction.entry(key).or_default().push(rec);
    }

    let mut junctions = Vec::new();
    for recs in by_junction.values() {
        let mut runs: Vec<&str> = recs.iter().map(|r| r.run_id.as_str()).collect();
        runs.sort_unstable();
        runs.dedup();
        if runs.len() < 2 {
            continue;
        }
        let values: Vec<f64> = recs.iter().map(|r| r.rn_ohm).collect();
        if let Ok(s) = coefficient_of_variation(&values) {
            let r = recs[0];
            junctions.push(JunctionRepeat {
                wafer_id: r.wafer_id.clone(),
                chip_id: r.chip_id.clone(),
                x_mm: r.x_mm,
                y_mm: r.y_mm,
                area_class_um2: r.area_class_um2,
                runs: runs.len(),
                cv: s.cv,
            });
        }
    }
    if junctions.is_empty() {
        return None;
    }

    let mut cvs: Vec<f64> = junctions.iter().map(|j| j.cv).collect();
    cvs.sort_by(f64::total_cmp);
    let mid = cvs.len() / 2;
    let median_cv = if cvs.len().is_multiple_of(2) { 0.5 * (cvs[mid - 1] + cvs[mid]) } else { cvs[mid] };
    Some(RepeatabilityReport {
        mean_cv: cvs.iter().sum::<f64>() / cvs.len() as f64,
        median_cv,
        max_cv: *cvs.last().unwrap(),
        junctions,
    })
}
