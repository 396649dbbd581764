//! Single-site shadow-evaporation geometry.
//!
//! Everything in this module is a pure function. Lengths are plain `f64`
//! values that only need to share one unit per call; the rest of the crate
//! uses nanometres. Angles are radians.
//!
//! The incidence angle `θ` is measured from the substrate normal. It is found
//! by tracing the ray from the source centre to the site, which makes
//! `θ(0, 0) = a₀`. The closed form [`closed_form_angle`] returns the
//! complement of that angle and is kept as an independent cross-check.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Nanometres per millimetre.
pub const NM_PER_MM: f64 = 1.0e6;

/// Guard applied to the arc-cosine argument before it is declared out of domain.
const ACOS_GUARD: f64 = 1.0e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("grazing incidence: local angle {theta_deg:.6}° is not below 90°")]
    GrazingIncidence { theta_deg: f64 },
    #[error("arc-cosine argument {0} is outside [-1, 1]")]
    DomainError(f64),
    #[error("non-physical printed width {0} (must be > 0)")]
    NonPhysicalWidth(f64),
    #[error("denominator collapse: D·cosθ = {projected} does not exceed {limit}")]
    DenominatorCollapse { projected: f64, limit: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, GeometryError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Point,
    Disk,
}

/// Evaporation source seen from the substrate holder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceModel {
    /// Crucible-to-holder throw distance `D`.
    pub distance: f64,
    /// Effective source radius `c`. Ignored for [`SourceKind::Point`].
    pub radius: f64,
    pub kind: SourceKind,
}

impl SourceModel {
    pub fn disk(distance: f64, radius: f64) -> Self {
        SourceModel { distance, radius, kind: SourceKind::Disk }
    }

    pub fn point(distance: f64) -> Self {
        SourceModel { distance, radius: 0.0, kind: SourceKind::Point }
    }

    /// The radius that enters every formula: zero for a point source.
    pub fn effective_radius(&self) -> f64 {
        match self.kind {
            SourceKind::Point => 0.0,
            SourceKind::Disk => self.radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.distance > 0.0 && self.distance.is_finite()) {
            return Err(GeometryError::Invalid("distance_D > 0".into()));
        }
        if !(self.radius >= 0.0) {
            return Err(GeometryError::Invalid("radius_c >= 0".into()));
        }
        if self.radius >= self.distance {
            return Err(GeometryError::Invalid("radius_c < distance_D".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShadowAxis {
    #[serde(alias = "AlongX", alias = "along_x")]
    X,
    #[serde(alias = "AlongY", alias = "along_y")]
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TiltSign {
    Plus,
    Minus,
}

impl TiltSign {
    pub fn factor(self) -> f64 {
        match self {
            TiltSign::Plus => 1.0,
            TiltSign::Minus => -1.0,
        }
    }
}

/// One deposition pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaporationStep {
    /// Holder tilt `a₀` in radians, `0 ≤ a₀ < π/2`.
    pub tilt: f64,
    pub shadow_axis: ShadowAxis,
    pub tilt_sign: TiltSign,
    /// Calibrated film thickness at normal incidence.
    pub film_t0: f64,
}

impl EvaporationStep {
    pub fn from_degrees(tilt_deg: f64, shadow_axis: ShadowAxis, tilt_sign: TiltSign, film_t0: f64) -> Self {
        EvaporationStep { tilt: tilt_deg.to_radians(), shadow_axis, tilt_sign, film_t0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tilt >= 0.0 && self.tilt < std::f64::consts::FRAC_PI_2) {
            return Err(GeometryError::Invalid("tilt_a0 < 90".into()));
        }
        if !(self.film_t0 > 0.0) {
            return Err(GeometryError::Invalid("film_T0 > 0".into()));
        }
        Ok(())
    }
}

/// Two-layer resist stack: top resist `H` over bottom copolymer `h`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaskStack {
    pub top: f64,
    pub bottom: f64,
}

/// Drawn aperture widths of the two electrodes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JunctionSpec {
    /// Bottom-electrode aperture, printed width varies along X.
    pub w_bottom: f64,
    /// Top-electrode aperture, printed width varies along Y.
    pub w_top: f64,
}

/// A position on the wafer, millimetres from the wafer centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaferSite {
    pub x_mm: f64,
    pub y_mm: f64,
}

impl WaferSite {
    pub const CENTER: WaferSite = WaferSite { x_mm: 0.0, y_mm: 0.0 };

    pub fn new(x_mm: f64, y_mm: f64) -> Self {
        WaferSite { x_mm, y_mm }
    }

    pub fn within(&self, wafer_diameter_mm: f64) -> bool {
        let r = wafer_diameter_mm / 2.0;
        self.x_mm * self.x_mm + self.y_mm * self.y_mm <= r * r
    }

    /// Offset along `axis`, millimetres.
    pub fn along(&self, axis: ShadowAxis) -> f64 {
        match axis {
            ShadowAxis::X => self.x_mm,
            ShadowAxis::Y => self.y_mm,
        }
    }
}

/// Local incidence angle of `step` at `site`, radians from the substrate normal.
///
/// The source centre sits at distance `D` from the wafer centre, tilted by
/// `a₀` about the shadow axis. With [`TiltSign::Plus`] the source lies on the
/// negative side of the axis, so sites at positive offsets see a steeper
/// angle. `site` is in millimetres, `source` in nanometres.
pub fn local_incidence_angle(site: WaferSite, step: &EvaporationStep, source: &SourceModel) -> Result<f64> {
    let d = source.distance;
    let lateral = -step.tilt_sign.factor() * d * step.tilt.sin();
    let (sx, sy) = match step.shadow_axis {
        ShadowAxis::X => (lateral, 0.0),
        ShadowAxis::Y => (0.0, lateral),
    };
    let height = d * step.tilt.cos();
    let dx = site.x_mm * NM_PER_MM - sx;
    let dy = site.y_mm * NM_PER_MM - sy;
    let theta = dx.hypot(dy).atan2(height);
    if !(theta < std::f64::consts::FRAC_PI_2) || height <= 0.0 {
        return Err(GeometryError::GrazingIncidence { theta_deg: theta.to_degrees() });
    }
    Ok(theta)
}

/// The published closed form for the angle along the shadow axis.
///
/// `α′ = acos((y + D·sin a₀) / √(y² + D² ± 2yD·sin a₀))`, evaluated as
/// written. For [`TiltSign::Plus`] this equals `π/2 − θ` of
/// [`local_incidence_angle`] on the axis. `y` shares the unit of `D`.
pub fn closed_form_angle(y: f64, step: &EvaporationStep, source: &SourceModel, sign: TiltSign) -> Result<f64> {
    let d = source.distance;
    let s = step.tilt.sin();
    let radicand = y * y + d * d + sign.factor() * 2.0 * y * d * s;
    if !(radicand > 0.0) {
        return Err(GeometryError::DomainError(f64::NAN));
    }
    let arg = (y + d * s) / radicand.sqrt();
    if !arg.is_finite() || arg.abs() > 1.0 + ACOS_GUARD {
        return Err(GeometryError::DomainError(arg));
    }
    Ok(arg.clamp(-1.0, 1.0).acos())
}

/// Film grown on the aperture sidewall by the first evaporation: `T₀·cos²θ`.
pub fn sidewall_thickness(theta_first: f64, t0: f64) -> f64 {
    let c = theta_first.cos();
    t0 * c * c
}

fn check_projection(projected: f64, limit: f64) -> Result<()> {
    if projected <= limit {
        Err(GeometryError::DenominatorCollapse { projected, limit })
    } else {
        Ok(())
    }
}

fn positive_width(w: f64) -> Result<f64> {
    if w > 0.0 && w.is_finite() {
        Ok(w)
    } else {
        Err(GeometryError::NonPhysicalWidth(w))
    }
}

/// Printed bottom-electrode width.
///
/// `offset` is the site coordinate along X, in the same unit as the other
/// lengths. Within `center_tol` of the wafer centre the centre branch is used,
/// otherwise the general branch with `|offset|`.
pub fn bottom_width(
    junction: &JunctionSpec,
    mask: &MaskStack,
    theta: f64,
    offset: f64,
    source: &SourceModel,
    center_tol: f64,
) -> Result<f64> {
    let w = junction.w_bottom;
    let c = source.effective_radius();
    let (big_h, small_h) = (mask.top, mask.bottom);
    let projected = source.distance * theta.cos();
    check_projection(projected, big_h.max(small_h))?;

    let printed = if offset.abs() <= center_tol {
        w + (c + w) / (projected - small_h) * small_h
    } else {
        w + (offset.abs() + c + 0.5 * w) / (projected - big_h) * (big_h + small_h)
    };
    positive_width(printed)
}

/// Printed top-electrode width.
///
/// `t_prime` is the sidewall film left by the bottom evaporation at the same
/// site; `offset` is the site coordinate along Y.
pub fn top_width(
    junction: &JunctionSpec,
    mask: &MaskStack,
    theta: f64,
    t_prime: f64,
    offset: f64,
    source: &SourceModel,
    center_tol: f64,
) -> Result<f64> {
    let w = junction.w_top;
    let c = source.effective_radius();
    let d = source.distance;
    let (big_h, small_h) = (mask.top, mask.bottom);
    let projected = d * theta.cos();
    check_projection(projected, t_prime + big_h + small_h)?;

    let printed = if offset.abs() <= center_tol {
        w - t_prime - (2.0 * d * theta.sin() + 2.0 * c + w) / (d - small_h) * small_h
    } else {
        w - t_prime - big_h * (d * theta.sin() - c - 0.5 * w) / (projected - t_prime - big_h - small_h)
    };
    positive_width(printed)
}

/// Junction overlap area in µm² from two widths in nm.
pub fn overlap_area(w_bottom_nm: f64, w_top_nm: f64) -> f64 {
    w_bottom_nm * w_top_nm / 1.0e6
}

/// `printed = slope · drawn + intercept`.
///
/// Both width formulas are affine in the drawn width; these coefficients are
/// collected by hand from the two branches so the inverse does not reuse the
/// forward evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub slope: f64,
    pub intercept: f64,
}

impl Affine {
    pub fn invert(&self, printed: f64) -> f64 {
        (printed - self.intercept) / self.slope
    }
}

pub fn bottom_width_affine(
    mask: &MaskStack,
    theta: f64,
    offset: f64,
    source: &SourceModel,
    center_tol: f64,
) -> Result<Affine> {
    let c = source.effective_radius();
    let (big_h, small_h) = (mask.top, mask.bottom);
    let projected = source.distance * theta.cos();
    check_projection(projected, big_h.max(small_h))?;
    Ok(if offset.abs() <= center_tol {
        let k = small_h / (projected - small_h);
        Affine { slope: 1.0 + k, intercept: c * k }
    } else {
        let k = (big_h + small_h) / (projected - big_h);
        Affine { slope: 1.0 + 0.5 * k, intercept: (offset.abs() + c) * k }
    })
}

pub fn top_width_affine(
    mask: &MaskStack,
    theta: f64,
    t_prime: f64,
    offset: f64,
    source: &SourceModel,
    center_tol: f64,
) -> Result<Affine> {
    let c = source.effective_radius();
    let d = source.distance;
    let (big_h, small_h) = (mask.top, mask.bottom);
    let projected = d * theta.cos();
    check_projection(projected, t_prime + big_h + small_h)?;
    Ok(if offset.abs() <= center_tol {
        let k = small_h / (d - small_h);
        Affine { slope: 1.0 - k, intercept: -t_prime - (2.0 * d * theta.sin() + 2.0 * c) * k }
    } else {
        let k = big_h / (projected - t_prime - big_h - small_h);
        Affine { slope: 1.0 + 0.5 * k, intercept: -t_prime - (d * theta.sin() - c) * k }
    })
}
