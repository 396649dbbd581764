//! Wafer sweeps, bias profiles and drawn-dimension compensation.
//!
//! Every site is evaluated independently, so sweeps run on the rayon pool and
//! are merged back in site order.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{
    bottom_width, bottom_width_affine, local_incidence_angle, overlap_area, sidewall_thickness, top_width,
    top_width_affine, EvaporationStep, GeometryError, JunctionSpec, MaskStack, ShadowAxis, SourceKind, SourceModel,
    TiltSign, WaferSite, NM_PER_MM,
};
use crate::stats::{coefficient_of_variation, StatsError, StatsSummary};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum WaferError {
    #[error("site ({x_mm} mm, {y_mm} mm): {source}")]
    Site { x_mm: f64, y_mm: f64, source: GeometryError },
    #[error("axis {axis:?} does not carry the {electrode:?} electrode width (bottom varies along X, top along Y)")]
    AxisMismatch { axis: Axis, electrode: Electrode },
    #[error("site ({x_mm} mm, {y_mm} mm) unreachable: {reason}")]
    Unreachable { x_mm: f64, y_mm: f64, reason: String },
    #[error("the wafer layout produced no sites")]
    EmptyGrid,
    #[error("no results to summarise")]
    EmptyInput,
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

pub type Result<T> = std::result::Result<T, WaferError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedSite {
    pub id: String,
    pub x_mm: f64,
    pub y_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaferLayout {
    pub diameter_mm: f64,
    /// Side of the centred square that carries junctions.
    pub working_span_mm: f64,
    pub grid_pitch_mm: f64,
    /// Explicit sites; when present they replace the generated grid.
    pub sites: Option<Vec<NamedSite>>,
}

impl Default for WaferLayout {
    fn default() -> Self {
        WaferLayout { diameter_mm: 100.0, working_span_mm: 70.0, grid_pitch_mm: 5.0, sites: None }
    }
}

impl WaferLayout {
    /// Offsets of the generated grid along one axis, centred on zero.
    pub fn axis_offsets(&self) -> Vec<f64> {
        let n = (self.working_span_mm / self.grid_pitch_mm + 1e-9).floor() as usize + 1;
        let half = (n - 1) as f64 / 2.0;
        (0..n).map(|i| (i as f64 - half) * self.grid_pitch_mm).collect()
    }

    /// Sites ordered by row (Y) then column (X), restricted to the wafer disc.
    pub fn sites(&self) -> Vec<WaferSite> {
        let mut sites: Vec<WaferSite> = match &self.sites {
            Some(list) => list.iter().map(|s| WaferSite::new(s.x_mm, s.y_mm)).collect(),
            None => {
                let offs = self.axis_offsets();
                offs.iter().flat_map(|&y| offs.iter().map(move |&x| WaferSite::new(x, y))).collect()
            }
        };
        sites.retain(|s| s.within(self.diameter_mm));
        sites.sort_by(|a, b| a.y_mm.total_cmp(&b.y_mm).then(a.x_mm.total_cmp(&b.x_mm)));
        sites
    }
}

/// Full process description. Lengths other than wafer coordinates are nm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessConfig {
    pub layout: WaferLayout,
    pub source: SourceModel,
    pub mask: MaskStack,
    pub junction: JunctionSpec,
    /// Bottom-electrode pass; its `film_t0` sets the sidewall film.
    pub bottom_step: EvaporationStep,
    pub top_step: EvaporationStep,
    /// Half-width of the region treated with the centre-branch formulas.
    pub epsilon_center_mm: f64,
    /// Largest drawn width compensation may request.
    pub max_drawn_nm: f64,
}

impl Default for ProcessConfig {
    fn default() -> Self {
        ProcessConfig {
            layout: WaferLayout::default(),
            source: SourceModel::disk(650.0 * NM_PER_MM, 1.0 * NM_PER_MM),
            mask: MaskStack { top: 100.0, bottom: 500.0 },
            junction: JunctionSpec { w_bottom: 200.0, w_top: 200.0 },
            bottom_step: EvaporationStep::from_degrees(40.0, ShadowAxis::X, TiltSign::Plus, 25.0),
            top_step: EvaporationStep::from_degrees(0.0, ShadowAxis::Y, TiltSign::Plus, 45.0),
            epsilon_center_mm: 0.5,
            max_drawn_nm: 5000.0,
        }
    }
}

impl ProcessConfig {
    pub fn validate(&self) -> Result<()> {
        let inv = |m: &str| Err(WaferError::Invalid(m.to_string()));
        let l = &self.layout;
        if !(l.diameter_mm > 0.0) {
            return inv("wafer_diameter > 0");
        }
        if !(l.working_span_mm > 0.0) {
            return inv("working_span > 0");
        }
        if !(l.grid_pitch_mm > 0.0) {
            return inv("grid_pitch > 0");
        }
        if let Some(sites) = &l.sites {
            for s in sites {
                if !WaferSite::new(s.x_mm, s.y_mm).within(l.diameter_mm) {
                    return Err(WaferError::Invalid(format!("site {} lies outside the wafer", s.id)));
                }
            }
        }
        let geom = |r: std::result::Result<(), GeometryError>| {
            r.map_err(|e| match e {
                GeometryError::Invalid(m) => WaferError::Invalid(m),
                other => WaferError::Invalid(other.to_string()),
            })
        };
        geom(self.source.validate())?;
        geom(self.bottom_step.validate())?;
        geom(self.top_step.validate())?;
        if !(self.mask.top > 0.0) {
            return inv("top_H > 0");
        }
        if !(self.mask.bottom > 0.0) {
            return inv("bottom_h > 0");
        }
        if !(self.junction.w_bottom > 0.0) {
            return inv("drawn_W_bottom > 0");
        }
        if !(self.junction.w_top > 0.0) {
            return inv("drawn_W_top > 0");
        }
        if !(self.epsilon_center_mm >= 0.0) {
            return inv("epsilon_center >= 0");
        }
        if !(self.max_drawn_nm > 0.0) {
            return inv("max_drawn > 0");
        }
        Ok(())
    }

    fn source_for(&self, model: BiasModelKind) -> SourceModel {
        match model {
            BiasModelKind::PointSource => SourceModel { radius: 0.0, ..self.source },
            _ => self.source,
        }
    }
}

/// Which bias model a sweep uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BiasModelKind {
    /// Model I: one constant bias, the centre value, everywhere.
    ConstantBias,
    /// Model II: the geometric model with a zero-radius source.
    PointSource,
    /// Model III: the geometric model with the configured source radius.
    NonPointSource,
}

impl std::str::FromStr for BiasModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "I" | "i" | "1" | "constant" => Ok(BiasModelKind::ConstantBias),
            "II" | "ii" | "2" | "point" => Ok(BiasModelKind::PointSource),
            "III" | "iii" | "3" | "non-point" | "disk" => Ok(BiasModelKind::NonPointSource),
            other => Err(format!("unknown model `{other}` (expected I, II or III)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteResult {
    pub site: WaferSite,
    pub theta_bottom: f64,
    pub theta_top: f64,
    pub t_prime: f64,
    pub w_bottom: f64,
    pub w_top: f64,
    /// µm².
    pub area: f64,
    pub bias_bottom: f64,
    pub bias_top: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Printed {
    theta_bottom: f64,
    theta_top: f64,
    t_prime: f64,
    w_bottom: f64,
    w_top: f64,
}

fn annotate(site: WaferSite) -> impl Fn(GeometryError) -> WaferError {
    move |source| WaferError::Site { x_mm: site.x_mm, y_mm: site.y_mm, source }
}

/// Angles and sidewall film that enter the width formulas at `site`.
///
/// The bottom width depends on X alone and the top width on Y alone, so each
/// electrode is traced at the site's projection onto its own axis: the bottom
/// step at `(X, 0)`, the top step and the sidewall film at `(0, Y)`.
fn site_angles(cfg: &ProcessConfig, source: &SourceModel, site: WaferSite) -> Result<(f64, f64, f64)> {
    let at = annotate(site);
    let on_x = WaferSite::new(site.x_mm, 0.0);
    let on_y = WaferSite::new(0.0, site.y_mm);
    let theta_bottom = local_incidence_angle(on_x, &cfg.bottom_step, source).map_err(&at)?;
    let theta_top = local_incidence_angle(on_y, &cfg.top_step, source).map_err(&at)?;
    let theta_film = local_incidence_angle(on_y, &cfg.bottom_step, source).map_err(&at)?;
    Ok((theta_bottom, theta_top, sidewall_thickness(theta_film, cfg.bottom_step.film_t0)))
}

fn print_site(cfg: &ProcessConfig, source: &SourceModel, junction: &JunctionSpec, site: WaferSite) -> Result<Printed> {
    let tol = cfg.epsilon_center_mm * NM_PER_MM;
    let at = annotate(site);
    let (theta_bottom, theta_top, t_prime) = site_angles(cfg, source, site)?;
    let w_bottom = bottom_width(junction, &cfg.mask, theta_bottom, site.x_mm * NM_PER_MM, source, tol).map_err(&at)?;
    let w_top = top_width(junction, &cfg.mask, theta_top, t_prime, site.y_mm * NM_PER_MM, source, tol).map_err(&at)?;
    Ok(Printed { theta_bottom, theta_top, t_prime, w_bottom, w_top })
}

/// Jump between the centre and general branches, evaluated with the centre angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchJump {
    pub bottom_nm: f64,
    pub top_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaferMap {
    pub model: BiasModelKind,
    pub sites: Vec<SiteResult>,
    pub center_w_bottom: f64,
    pub center_w_top: f64,
    pub branch_jump: BranchJump,
}

fn branch_jump(cfg: &ProcessConfig, source: &SourceModel, center: &Printed) -> Result<BranchJump> {
    let eps = cfg.epsilon_center_mm * NM_PER_MM;
    let at = annotate(WaferSite::new(cfg.epsilon_center_mm, cfg.epsilon_center_mm));
    let general_b = bottom_width(&cfg.junction, &cfg.mask, center.theta_bottom, eps, source, 0.0).map_err(&at)?;
    let general_t =
        top_width(&cfg.junction, &cfg.mask, center.theta_top, center.t_prime, eps, source, 0.0).map_err(&at)?;
    Ok(BranchJump { bottom_nm: general_b - center.w_bottom, top_nm: general_t - center.w_top })
}

fn sweep(
    cfg: &ProcessConfig,
    model: BiasModelKind,
    sites: &[(WaferSite, JunctionSpec)],
    reference: &Printed,
) -> Result<Vec<SiteResult>> {
    let source = cfg.source_for(model);
    sites
        .par_iter()
        .map(|&(site, junction)| {
            let p = print_site(cfg, &source, &junction, site)?;
            let p = match model {
                BiasModelKind::ConstantBias => {
                    Printed { theta_bottom: p.theta_bottom, theta_top: p.theta_top, ..*reference }
                }
                _ => p,
            };
            Ok(SiteResult {
                site,
                theta_bottom: p.theta_bottom,
                theta_top: p.theta_top,
                t_prime: p.t_prime,
                w_bottom: p.w_bottom,
                w_top: p.w_top,
                area: overlap_area(p.w_bottom, p.w_top),
                bias_bottom: p.w_bottom - reference.w_bottom,
                bias_top: p.w_top - reference.w_top,
            })
        })
        .collect()
}

/// Forward-simulate every layout site under `model`.
pub fn simulate_wafer(cfg: &ProcessConfig, model: BiasModelKind) -> Result<WaferMap> {
    let sites = cfg.layout.sites();
    if sites.is_empty() {
        return Err(WaferError::EmptyGrid);
    }
    let source = cfg.source_for(model);
    let center = print_site(cfg, &source, &cfg.junction, WaferSite::CENTER)?;
    let jump = branch_jump(cfg, &source, &center)?;
    let jobs: Vec<_> = sites.into_iter().map(|s| (s, cfg.junction)).collect();
    Ok(WaferMap {
        model,
        sites: sweep(cfg, model, &jobs, &center)?,
        center_w_bottom: center.w_bottom,
        center_w_top: center.w_top,
        branch_jump: jump,
    })
}

/// Re-simulate sites with per-site drawn widths (model III).
///
/// Biases are relative to the centre printed widths of the uncorrected config.
pub fn simulate_corrected(cfg: &ProcessConfig, rows: &[CorrectionRow]) -> Result<Vec<SiteResult>> {
    if rows.is_empty() {
        return Err(WaferError::EmptyInput);
    }
    let center = print_site(cfg, &cfg.source, &cfg.junction, WaferSite::CENTER)?;
    let jobs: Vec<_> =
        rows.iter().map(|r| (r.site, JunctionSpec { w_bottom: r.drawn_w_bottom, w_top: r.drawn_w_top })).collect();
    sweep(cfg, BiasModelKind::NonPointSource, &jobs, &center)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Electrode {
    Bottom,
    Top,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfilePoint {
    pub offset_mm: f64,
    pub bias_nm: f64,
}

/// Bias of one electrode along its own axis, through the wafer centre.
pub fn bias_profile(
    cfg: &ProcessConfig,
    axis: Axis,
    electrode: Electrode,
    model: BiasModelKind,
) -> Result<Vec<ProfilePoint>> {
    match (axis, electrode) {
        (Axis::X, Electrode::Bottom) | (Axis::Y, Electrode::Top) => {}
        _ => return Err(WaferError::AxisMismatch { axis, electrode }),
    }
    let mut offsets = cfg.layout.axis_offsets();
    offsets.retain(|o| o.abs() <= cfg.layout.diameter_mm / 2.0);
    let line = WaferLayout {
        sites: Some(
            offsets
                .iter()
                .map(|&o| {
                    let (x_mm, y_mm) = if axis == Axis::X { (o, 0.0) } else { (0.0, o) };
                    NamedSite { id: String::new(), x_mm, y_mm }
                })
                .collect(),
        ),
        ..cfg.layout.clone()
    };
    let map = simulate_wafer(&ProcessConfig { layout: line, ..cfg.clone() }, model)?;
    Ok(map
        .sites
        .iter()
        .map(|r| ProfilePoint {
            offset_mm: r.site.along(if axis == Axis::X { ShadowAxis::X } else { ShadowAxis::Y }),
            bias_nm: if electrode == Electrode::Bottom { r.bias_bottom } else { r.bias_top },
        })
        .collect())
}

/// Drawn widths that print as `target_w_bottom × target_w_top` at `site`.
///
/// Both printed widths are affine in their drawn width, so this is a direct
/// solve, not a search.
pub fn compensate_site(
    cfg: &ProcessConfig,
    site: WaferSite,
    target_w_bottom: f64,
    target_w_top: f64,
) -> Result<(f64, f64)> {
    let unreachable = |reason: String| WaferError::Unreachable { x_mm: site.x_mm, y_mm: site.y_mm, reason };
    if !(target_w_bottom > 0.0 && target_w_top > 0.0) {
        return Err(unreachable(format!("targets must be positive ({target_w_bottom}, {target_w_top})")));
    }
    let at = annotate(site);
    let tol = cfg.epsilon_center_mm * NM_PER_MM;
    let source = &cfg.source;
    let (theta_b, theta_t, t_prime) = site_angles(cfg, source, site)?;

    let drawn_b = bottom_width_affine(&cfg.mask, theta_b, site.x_mm * NM_PER_MM, source, tol)
        .map_err(&at)?
        .invert(target_w_bottom);
    let drawn_t = top_width_affine(&cfg.mask, theta_t, t_prime, site.y_mm * NM_PER_MM, source, tol)
        .map_err(&at)?
        .invert(target_w_top);

    for (name, v) in [("bottom", drawn_b), ("top", drawn_t)] {
        if !(v > 0.0) {
            return Err(unreachable(format!("drawn {name} width would be {v:.4} nm")));
        }
        if v > cfg.max_drawn_nm {
            return Err(unreachable(format!("drawn {name} width {v:.4} nm exceeds {} nm", cfg.max_drawn_nm)));
        }
    }
    Ok((drawn_b, drawn_t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CompensationTarget {
    /// Print the uncorrected centre widths everywhere.
    CenterWidths,
    /// Print a fixed area (µm²) with `aspect = w_bottom / w_top`.
    ExplicitArea { area_um2: f64, aspect: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionRow {
    pub site: WaferSite,
    pub drawn_w_bottom: f64,
    pub drawn_w_top: f64,
    pub predicted_area: f64,
    /// `|predicted − target| / target`.
    pub residual_area_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rejection {
    pub site: WaferSite,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionTable {
    pub target_w_bottom: f64,
    pub target_w_top: f64,
    pub rows: Vec<CorrectionRow>,
    pub rejections: Vec<Rejection>,
}

/// Residual bound every accepted correction row satisfies.
pub const COMPENSATION_TOLERANCE: f64 = 1e-9;

pub fn compensate_wafer(cfg: &ProcessConfig, target: CompensationTarget) -> Result<CorrectionTable> {
    let (tb, tt) = match target {
        CompensationTarget::CenterWidths => {
            let c = print_site(cfg, &cfg.source, &cfg.junction, WaferSite::CENTER)?;
            (c.w_bottom, c.w_top)
        }
        CompensationTarget::ExplicitArea { area_um2, aspect } => {
            if !(area_um2 > 0.0 && aspect > 0.0) {
                return Err(WaferError::Invalid("target area and aspect must be positive".into()));
            }
            ((area_um2 * 1e6 * aspect).sqrt(), (area_um2 * 1e6 / aspect).sqrt())
        }
    };
    let sites = cfg.layout.sites();
    if sites.is_empty() {
        return Err(WaferError::EmptyGrid);
    }
    let target_area = overlap_area(tb, tt);

    let outcomes: Vec<std::result::Result<CorrectionRow, Rejection>> = sites
        .par_iter()
        .map(|&site| {
            let solved = compensate_site(cfg, site, tb, tt).and_then(|(db, dt)| {
                let j = JunctionSpec { w_bottom: db, w_top: dt };
                let p = print_site(cfg, &cfg.source, &j, site)?;
                let area = overlap_area(p.w_bottom, p.w_top);
                let residual = (area - target_area).abs() / target_area;
                if residual > COMPENSATION_TOLERANCE {
                    return Err(WaferError::Unreachable {
                        x_mm: site.x_mm,
                        y_mm: site.y_mm,
                        reason: format!("residual {residual:.3e} above tolerance"),
                    });
                }
                Ok(CorrectionRow {
                    site,
                    drawn_w_bottom: db,
                    drawn_w_top: dt,
                    predicted_area: area,
                    residual_area_error: residual,
                })
            });
            solved.map_err(|e| Rejection { site, reason: e.to_string() })
        })
        .collect();

    let mut rows = Vec::new();
    let mut rejections = Vec::new();
    for o in outcomes {
        match o {
            Ok(r) => rows.push(r),
            Err(r) => rejections.push(r),
        }
    }
    Ok(CorrectionTable { target_w_bottom: tb, target_w_top: tt, rows, rejections })
}

/// Mean, spread and CV of the area field.
pub fn residual_report(results: &[SiteResult]) -> Result<StatsSummary> {
    if results.is_empty() {
        return Err(WaferError::EmptyInput);
    }
    let areas: Vec<f64> = results.iter().map(|r| r.area).collect();
    Ok(coefficient_of_variation(&areas)?)
}

/// A copy of `cfg` whose source is a point source, for comparing models.
pub fn with_point_source(cfg: &ProcessConfig) -> ProcessConfig {
    ProcessConfig { source: SourceModel { kind: SourceKind::Point, ..cfg.source }, ..cfg.clone() }
}
