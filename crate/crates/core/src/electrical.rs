//! Electrical conversions from room-temperature junction resistance.
//!
//! Energies are handled in joules internally. The transmon relation used here
//! is `h·f = √(2ΔΦ₀E_C / (e·R_N)) − E_C`, which is `√(8E_J·E_C) − E_C` with
//! the Ambegaokar–Baratoff critical current folded in:
//! `I_c = πΔ / (2eR_N)`, `E_J = Φ₀I_c / 2π`, so `8E_J = 2ΔΦ₀ / (eR_N)`.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::stats::{coefficient_of_variation, StatsError};

/// Elementary charge, C (exact SI).
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Planck constant, J·s (exact SI).
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Magnetic flux quantum `h / 2e`, Wb.
pub const FLUX_QUANTUM: f64 = PLANCK / (2.0 * ELEMENTARY_CHARGE);

/// Samples per Monte-Carlo shard. Each shard draws from its own ChaCha stream.
const SHARD: usize = 4096;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ElectricalError {
    #[error("non-positive frequency: √(8E_J·E_C) = {radical_hz:.6e} Hz does not exceed E_C/h = {ec_hz:.6e} Hz")]
    NonPositiveFrequency { radical_hz: f64, ec_hz: f64 },
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("{invalid} of {total} Monte-Carlo samples gave a non-positive frequency")]
    TooManyInvalid { invalid: usize, total: usize },
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

pub type Result<T> = std::result::Result<T, ElectricalError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitParams {
    /// Superconducting gap Δ, µeV.
    pub gap_uev: f64,
    /// Charging energy as a frequency, `E_C / h` in MHz.
    pub charging_mhz: f64,
}

impl QubitParams {
    pub fn new(gap_uev: f64, charging_mhz: f64) -> Result<Self> {
        if !(gap_uev > 0.0) {
            return Err(ElectricalError::Invalid("gap_Delta > 0".into()));
        }
        if !(charging_mhz > 0.0) {
            return Err(ElectricalError::Invalid("charging_E_C > 0".into()));
        }
        Ok(QubitParams { gap_uev, charging_mhz })
    }

    pub fn gap_joule(&self) -> f64 {
        self.gap_uev * 1e-6 * ELEMENTARY_CHARGE
    }

    pub fn charging_joule(&self) -> f64 {
        self.charging_mhz * 1e6 * PLANCK
    }
}

fn check_resistance(rn_ohm: f64) -> Result<()> {
    if rn_ohm > 0.0 && rn_ohm.is_finite() {
        Ok(())
    } else {
        Err(ElectricalError::Invalid(format!("R_N must be > 0, got {rn_ohm}")))
    }
}

/// Transmon transition frequency in Hz for a junction of normal resistance `rn_ohm`.
pub fn transmon_frequency(rn_ohm: f64, params: &QubitParams) -> Result<f64> {
    check_resistance(rn_ohm)?;
    let ec = params.charging_joule();
    let radical = (2.0 * params.gap_joule() * FLUX_QUANTUM * ec / (ELEMENTARY_CHARGE * rn_ohm)).sqrt();
    if radical <= ec {
        return Err(ElectricalError::NonPositiveFrequency { radical_hz: radical / PLANCK, ec_hz: ec / PLANCK });
    }
    Ok((radical - ec) / PLANCK)
}

/// Logarithmic sensitivity `d ln f / d ln R_N = −½·(1 + E_C / hf)`.
pub fn resistance_sensitivity(rn_ohm: f64, params: &QubitParams) -> Result<f64> {
    let f = transmon_frequency(rn_ohm, params)?;
    Ok(-0.5 * (1.0 + params.charging_mhz * 1e6 / f))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpreadFamily {
    LogNormal,
    Normal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloResult {
    pub cv_f: f64,
    /// CV of the resistance samples actually drawn.
    pub cv_r_sampled: f64,
    pub mean_f_hz: f64,
    pub n_valid: usize,
    pub n_invalid: usize,
}

impl MonteCarloResult {
    pub fn ratio(&self, cv_r: f64) -> f64 {
        self.cv_f / cv_r
    }
}

/// Propagate a resistance spread to a frequency spread by sampling.
///
/// Resistances are drawn with the requested mean and CV from `family`,
/// mapped through [`transmon_frequency`] and summarised. The sample stream is
/// split into fixed shards, each seeded from `(seed, shard index)`, so the
/// result does not depend on how many threads run.
pub fn propagate_cv_monte_carlo(
    mean_r: f64,
    cv_r: f64,
    params: &QubitParams,
    n_samples: usize,
    seed: u64,
    family: SpreadFamily,
) -> Result<MonteCarloResult> {
    check_resistance(mean_r)?;
    if !(0.0..0.3).contains(&cv_r) {
        return Err(ElectricalError::Invalid(format!("cv_R must be in [0, 0.3), got {cv_r}")));
    }
    if n_samples < 10_000 {
        return Err(ElectricalError::Invalid(format!("n_samples must be >= 10000, got {n_samples}")));
    }

    let shards = n_samples.div_ceil(SHARD);
    let draws: Vec<(Vec<f64>, Vec<f64>, usize)> = (0..shards)
        .into_par_iter()
        .map(|shard| {
            let len = SHARD.min(n_samples - shard * SHARD);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(shard as u64);
            let rs = sample_resistances(&mut rng, mean_r, cv_r, len, family);
            let mut fs = Vec::with_capacity(len);
            let mut invalid = 0;
            for &r in &rs {
                match transmon_frequency(r, params) {
                    Ok(f) => fs.push(f),
                    Err(_) => invalid += 1,
                }
            }
            (rs, fs, invalid)
        })
        .collect();

    let mut rs = Vec::with_capacity(n_samples);
    let mut fs = Vec::with_capacity(n_samples);
    let mut n_invalid = 0;
    for (r, f, bad) in draws {
        rs.extend(r);
        fs.extend(f);
        n_invalid += bad;
    }
    if n_invalid * 1000 > n_samples {
        return Err(ElectricalError::TooManyInvalid { invalid: n_invalid, total: n_samples });
    }

    let sf = coefficient_of_variation(&fs)?;
    let sr = coefficient_of_variation(&rs)?;
    Ok(MonteCarloResult { cv_f: sf.cv, cv_r_sampled: sr.cv, mean_f_hz: sf.mean, n_valid: fs.len(), n_invalid })
}

fn sample_resistances(rng: &mut ChaCha8Rng, mean: f64, cv: f64, len: usize, family: SpreadFamily) -> Vec<f64> {
    if cv == 0.0 {
        return vec![mean; len];
    }
    match family {
        SpreadFamily::LogNormal => {
            let sigma2 = (1.0 + cv * cv).ln();
            let dist = LogNormal::new(mean.ln() - 0.5 * sigma2, sigma2.sqrt()).expect("finite lognormal parameters");
            dist.sample_iter(rng).take(len).collect()
        }
        SpreadFamily::Normal => {
            let dist = Normal::new(mean, cv * mean).expect("finite normal parameters");
            dist.sample_iter(rng).take(len).collect()
        }
    }
}

/// Critical-current density in µA/µm², `J_c = πΔ / (2e·R_N·A)`.
pub fn critical_current_density(rn_ohm: f64, area_um2: f64, gap_uev: f64) -> f64 {
    // Δ/e in µeV is a voltage in µV, so I_c comes out in µA.
    PI * gap_uev / (2.0 * rn_ohm * area_um2)
}

/// Gap in µeV that reproduces `jc` for one junction: `Δ = 2e·R_N·J_c·A / π`.
pub fn implied_gap(rn_ohm: f64, area_um2: f64, jc: f64) -> f64 {
    2.0 * rn_ohm * jc * area_um2 / PI
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRecord {
    pub rn_ohm: f64,
    pub area_um2: f64,
    /// Reported critical-current density, µA/µm².
    pub jc: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapFit {
    pub gap_uev: f64,
    pub implied_gap_uev: Vec<f64>,
    /// `J_c(fit) − J_c(reported)` per record.
    pub residuals: Vec<f64>,
    /// `residual / J_c(reported)`.
    pub relative_residuals: Vec<f64>,
    /// `(max − min) / mean` of the implied gaps.
    pub implied_spread: f64,
    /// Records whose implied gap is further than the outlier threshold from the fit.
    pub outliers: Vec<usize>,
}

/// Relative departure of an implied gap from the fitted one that marks a record as an outlier.
pub const GAP_OUTLIER_FRACTION: f64 = 0.15;

/// Least-squares single gap for a set of `(R_N, A, J_c)` records.
///
/// `J_c` is linear in Δ with coefficient `π / (2R_N·A)`, so the minimiser of
/// `Σ (J_c(Δ) − J_c,reported)²` is closed-form.
pub fn fit_gap(records: &[GapRecord]) -> Result<GapFit> {
    if records.len() < 2 {
        return Err(ElectricalError::DegenerateFit(format!("need at least 2 records, got {}", records.len())));
    }
    for r in records {
        if !(r.rn_ohm > 0.0 && r.area_um2 > 0.0 && r.jc > 0.0) {
            return Err(ElectricalError::Invalid(format!("record {r:?} has a non-positive field")));
        }
    }
    let slopes: Vec<f64> = records.iter().map(|r| critical_current_density(r.rn_ohm, r.area_um2, 1.0)).collect();
    let sxx: f64 = slopes.iter().map(|k| k * k).sum();
    if !(sxx > 0.0) || !sxx.is_finite() {
        return Err(ElectricalError::DegenerateFit("J_c is insensitive to the gap for every record".into()));
    }
    let sxy: f64 = slopes.iter().zip(records).map(|(k, r)| k * r.jc).sum();
    let gap = sxy / sxx;

    let implied: Vec<f64> = records.iter().map(|r| implied_gap(r.rn_ohm, r.area_um2, r.jc)).collect();
    let residuals: Vec<f64> = slopes.iter().zip(records).map(|(k, r)| k * gap - r.jc).collect();
    let relative_residuals = residuals.iter().zip(records).map(|(d, r)| d / r.jc).collect();
    let lo = implied.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = implied.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mean = implied.iter().sum::<f64>() / implied.len() as f64;
    let outliers = implied
        .iter()
        .enumerate()
        .filter(|(_, d)| (*d / gap - 1.0).abs() > GAP_OUTLIER_FRACTION)
        .map(|(i, _)| i)
        .collect();

    Ok(GapFit {
        gap_uev: gap,
        implied_gap_uev: implied,
        residuals,
        relative_residuals,
        implied_spread: (hi - lo) / mean,
        outliers,
    })
}
