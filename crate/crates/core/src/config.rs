//! TOML process configuration.
//!
//! Every section and key is optional; omitted values fall back to the
//! defaults of [`ProcessConfig::default`] and each fallback is recorded in the
//! provenance log. Unknown keys are rejected.

use std::path::Path;

use serde::Deserialize;
use thiserror::Error;

use crate::geometry::{
    EvaporationStep, JunctionSpec, MaskStack, ShadowAxis, SourceKind, SourceModel, TiltSign, NM_PER_MM,
};
use crate::wafer::{NamedSite, ProcessConfig, WaferError, WaferLayout};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("validation error: {0}")]
    Validation(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    wafer: Option<RawWafer>,
    source: Option<RawSource>,
    mask: Option<RawMask>,
    junction: Option<RawJunction>,
    bottom_step: Option<RawStep>,
    top_step: Option<RawStep>,
    epsilon_center_mm: Option<f64>,
    max_drawn_nm: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawWafer {
    diameter_mm: Option<f64>,
    working_span_mm: Option<f64>,
    grid_pitch_mm: Option<f64>,
    sites: Option<Vec<NamedSite>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSource {
    distance_mm: Option<f64>,
    radius_mm: Option<f64>,
    kind: Option<SourceKind>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMask {
    #[serde(rename = "top_H_nm")]
    top_h_nm: Option<f64>,
    bottom_h_nm: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJunction {
    drawn_w_bottom_nm: Option<f64>,
    drawn_w_top_nm: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStep {
    tilt_deg: Option<f64>,
    shadow_axis: Option<ShadowAxis>,
    tilt_sign: Option<TiltSign>,
    #[serde(rename = "film_T0_nm")]
    film_t0_nm: Option<f64>,
}

/// A validated configuration plus the defaults that were filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: ProcessConfig,
    pub provenance: Vec<String>,
}

struct Defaults<'a> {
    log: &'a mut Vec<String>,
}

impl Defaults<'_> {
    fn take<T: std::fmt::Debug>(&mut self, key: &str, value: Option<T>, default: T) -> T {
        value.unwrap_or_else(|| {
            self.log.push(format!("default {key} = {default:?}"));
            default
        })
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

pub fn parse_config(text: &str) -> Result<LoadedConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_column(text, s.start));
        ConfigError::Parse { line, column, message: e.message().trim().to_string() }
    })?;

    let base = ProcessConfig::default();
    let mut provenance = Vec::new();
    let mut d = Defaults { log: &mut provenance };

    let w = raw.wafer.unwrap_or_default();
    let layout = WaferLayout {
        diameter_mm: d.take("wafer.diameter_mm", w.diameter_mm, base.layout.diameter_mm),
        working_span_mm: d.take("wafer.working_span_mm", w.working_span_mm, base.layout.working_span_mm),
        grid_pitch_mm: d.take("wafer.grid_pitch_mm", w.grid_pitch_mm, base.layout.grid_pitch_mm),
        sites: w.sites,
    };

    let s = raw.source.unwrap_or_default();
    let distance_mm = d.take("source.distance_mm", s.distance_mm, base.source.distance / NM_PER_MM);
    let radius_mm = d.take("source.radius_mm", s.radius_mm, base.source.radius / NM_PER_MM);
    let kind = d.take("source.kind", s.kind, base.source.kind);
    let source = SourceModel { distance: distance_mm * NM_PER_MM, radius: radius_mm * NM_PER_MM, kind };

    let m = raw.mask.unwrap_or_default();
    let mask = MaskStack {
        top: d.take("mask.top_H_nm", m.top_h_nm, base.mask.top),
        bottom: d.take("mask.bottom_h_nm", m.bottom_h_nm, base.mask.bottom),
    };

    let j = raw.junction.unwrap_or_default();
    let junction = JunctionSpec {
        w_bottom: d.take("junction.drawn_w_bottom_nm", j.drawn_w_bottom_nm, base.junction.w_bottom),
        w_top: d.take("junction.drawn_w_top_nm", j.drawn_w_top_nm, base.junction.w_top),
    };

    let mut step = |name: &str, raw: Option<RawStep>, base: EvaporationStep| {
        let r = raw.unwrap_or_default();
        let tilt = match r.tilt_deg {
            Some(deg) => deg.to_radians(),
            None => {
                d.log.push(format!("default {name}.tilt_deg = {:?}", base.tilt.to_degrees()));
                base.tilt
            }
        };
        EvaporationStep {
            tilt,
            shadow_axis: d.take(&format!("{name}.shadow_axis"), r.shadow_axis, base.shadow_axis),
            tilt_sign: d.take(&format!("{name}.tilt_sign"), r.tilt_sign, base.tilt_sign),
            film_t0: d.take(&format!("{name}.film_T0_nm"), r.film_t0_nm, base.film_t0),
        }
    };
    let bottom_step = step("bottom_step", raw.bottom_step, base.bottom_step);
    let top_step = step("top_step", raw.top_step, base.top_step);

    let config = ProcessConfig {
        layout,
        source,
        mask,
        junction,
        bottom_step,
        top_step,
        epsilon_center_mm: d.take("epsilon_center_mm", raw.epsilon_center_mm, base.epsilon_center_mm),
        max_drawn_nm: d.take("max_drawn_nm", raw.max_drawn_nm, base.max_drawn_nm),
    };

    for (name, st) in [("bottom_step", &config.bottom_step), ("top_step", &config.top_step)] {
        // checked in degrees so 90° itself is not lost to rounding
        if !(st.tilt.to_degrees() < 90.0 && st.tilt >= 0.0) {
            return Err(ConfigError::Validation(format!("{name}: tilt_a0 < 90 (0 <= tilt_deg < 90)")));
        }
    }
    config.validate().map_err(|e| match e {
        WaferError::Invalid(m) => ConfigError::Validation(m),
        other => ConfigError::Validation(other.to_string()),
    })?;
    Ok(LoadedConfig { config, provenance })
}

pub fn load_config(path: impl AsRef<Path>) -> Result<LoadedConfig, ConfigError> {
    let path = path.as_ref();
    let text =
        std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
    parse_config(&text)
}
