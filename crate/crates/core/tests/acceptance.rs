//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal};

use jjshadow::electrical::{
    fit_gap, implied_gap, propagate_cv_monte_carlo, resistance_sensitivity, transmon_frequency, QubitParams,
    SpreadFamily, PLANCK,
};
use jjshadow::geometry::{bottom_width, closed_form_angle, local_incidence_angle, sidewall_thickness, NM_PER_MM};
use jjshadow::io::{export_measurements, export_sites, import_measurements, import_sites};
use jjshadow::reference::rows_for;
use jjshadow::stats::{aggregate, coefficient_of_variation, GroupKey, MeasurementRecord};
use jjshadow::wafer::{compensate_wafer, residual_report, simulate_corrected, simulate_wafer, CompensationTarget};
use jjshadow::{
    BiasModelKind, EvaporationStep, JunctionSpec, MaskStack, ProcessConfig, ShadowAxis, SourceModel, TiltSign,
    WaferSite,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || format!("took {:.3} s, limit {limit_s} s", elapsed.as_secs_f64()))
}

fn grid() -> Vec<f64> {
    (0..15).map(|i| -35.0 + 5.0 * i as f64).collect()
}

fn angle_consistency() -> Outcome {
    let start = Instant::now();
    let source = SourceModel::disk(650.0 * NM_PER_MM, 0.0);
    let mut worst_axis = 0.0f64;
    let mut worst_center = 0.0f64;
    for a0 in [0.0, 40.0] {
        let step = EvaporationStep::from_degrees(a0, ShadowAxis::X, TiltSign::Plus, 25.0);
        for &y in &grid() {
            for &x in &grid() {
                let theta = local_incidence_angle(WaferSite::new(x, y), &step, &source).map_err(|e| e.to_string())?;
                ensure(theta.is_finite() && theta < std::f64::consts::FRAC_PI_2, || format!("bad θ at ({x}, {y})"))?;
            }
            let theta = local_incidence_angle(WaferSite::new(y, 0.0), &step, &source).map_err(|e| e.to_string())?;
            let alpha = closed_form_angle(y * NM_PER_MM, &step, &source, TiltSign::Plus).map_err(|e| e.to_string())?;
            worst_axis = worst_axis.max((alpha.cos().powi(2) + theta.cos().powi(2) - 1.0).abs());
        }
        let center = local_incidence_angle(WaferSite::CENTER, &step, &source).map_err(|e| e.to_string())?;
        worst_center = worst_center.max((center - step.tilt).abs());
    }
    let elapsed = start.elapsed();
    ensure(worst_axis <= 1e-9, || format!("cos² sum off by {worst_axis:e}"))?;
    ensure(worst_center <= 1e-12, || format!("θ(0,0) off by {worst_center:e} rad"))?;
    within(elapsed, 1.0)?;
    Ok(format!("max |cos²α′ + cos²θ − 1| = {worst_axis:.1e}, max |θ(0,0) − a₀| = {worst_center:.1e} rad"))
}

fn point_source_nesting() -> Outcome {
    let start = Instant::now();
    let cfg = ProcessConfig::default();
    let zero = ProcessConfig { source: SourceModel { radius: 0.0, ..cfg.source }, ..cfg.clone() };
    let two = simulate_wafer(&cfg, BiasModelKind::PointSource).map_err(|e| e.to_string())?;
    let three = simulate_wafer(&zero, BiasModelKind::NonPointSource).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(two.sites.len() == 225 && two.sites.len() == three.sites.len(), || "grid size mismatch".into())?;
    let bits = |r: &jjshadow::SiteResult| {
        [r.theta_bottom, r.theta_top, r.t_prime, r.w_bottom, r.w_top, r.area, r.bias_bottom, r.bias_top]
            .map(f64::to_bits)
    };
    let differing = two.sites.iter().zip(&three.sites).filter(|(a, b)| a.site != b.site || bits(a) != bits(b)).count();
    ensure(differing == 0, || format!("{differing} sites differ"))?;
    within(elapsed, 1.0)?;
    Ok("225 sites identical bit-for-bit".into())
}

fn compensation_round_trip() -> Outcome {
    let start = Instant::now();
    let cfg = ProcessConfig::default();
    let table = compensate_wafer(&cfg, CompensationTarget::CenterWidths).map_err(|e| e.to_string())?;
    ensure(table.rejections.is_empty(), || format!("{} sites rejected", table.rejections.len()))?;
    let results = simulate_corrected(&cfg, &table.rows).map_err(|e| e.to_string())?;
    let before =
        residual_report(&simulate_wafer(&cfg, BiasModelKind::NonPointSource).map_err(|e| e.to_string())?.sites)
            .map_err(|e| e.to_string())?;
    let after = residual_report(&results).map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(results.len() == 225, || format!("{} sites", results.len()))?;
    ensure(after.cv_percent() < 0.05, || format!("residual CV_A {}%", after.cv_percent()))?;
    within(elapsed, 5.0)?;
    Ok(format!("CV_A {:.3}% -> {:.2e}%", before.cv_percent(), after.cv_percent()))
}

fn uncompensated_spread() -> Outcome {
    let side = (0.025e6f64).sqrt();
    let cfg = ProcessConfig { junction: JunctionSpec { w_bottom: side, w_top: side }, ..ProcessConfig::default() };
    let small = residual_report(&simulate_wafer(&cfg, BiasModelKind::NonPointSource).map_err(|e| e.to_string())?.sites)
        .map_err(|e| e.to_string())?;
    let default = residual_report(
        &simulate_wafer(&ProcessConfig::default(), BiasModelKind::NonPointSource).map_err(|e| e.to_string())?.sites,
    )
    .map_err(|e| e.to_string())?;
    let cv = small.cv_percent();
    ensure((5.0..=10.0).contains(&cv), || format!("CV_A {cv}% outside [5, 10]"))?;
    Ok(format!("drawn {side:.2} nm square: CV_A {cv:.3}% (200 nm default: {:.3}%)", default.cv_percent()))
}

fn table_gap_consistency() -> Outcome {
    let start = Instant::now();
    let rows = rows_for(&[3, 4, 5]);
    ensure(rows.len() == 6, || format!("{} rows", rows.len()))?;
    let gaps: Vec<f64> = rows.iter().map(|r| implied_gap(r.rn_ohm, r.area_um2, r.jc)).collect();
    for (r, g) in rows.iter().zip(&gaps) {
        ensure((215.0..=245.0).contains(g), || format!("wafer {} implied Δ {g:.2} µeV", r.wafer))?;
    }
    let mut worst_spread = 0.0f64;
    for w in [3, 4, 5] {
        let g: Vec<f64> = rows.iter().zip(&gaps).filter(|(r, _)| r.wafer == w).map(|(_, g)| *g).collect();
        let (lo, hi) = g.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &v| (l.min(v), h.max(v)));
        let spread = (hi - lo) / (g.iter().sum::<f64>() / g.len() as f64);
        ensure(spread < 0.12, || format!("wafer {w} spread {:.1}%", 100.0 * spread))?;
        worst_spread = worst_spread.max(spread);
    }
    let fit = fit_gap(&rows.iter().map(|r| r.gap_record()).collect::<Vec<_>>()).map_err(|e| e.to_string())?;
    let worst = fit.relative_residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()));
    ensure(worst < 0.10, || format!("fitted J_c off by {:.2}%", 100.0 * worst))?;
    within(start.elapsed(), 1.0)?;
    Ok(format!(
        "implied Δ in [{:.1}, {:.1}] µeV, per-wafer spread ≤ {:.1}%, fit Δ = {:.2} µeV, max J_c residual {:.2}%",
        gaps.iter().cloned().fold(f64::INFINITY, f64::min),
        gaps.iter().cloned().fold(0.0, f64::max),
        100.0 * worst_spread,
        fit.gap_uev,
        100.0 * worst
    ))
}

fn frequency_law() -> Outcome {
    // 30-digit evaluation of the same expression with exact SI constants.
    const ORACLE_HZ: f64 = 5_887_691_745.073_728;
    let p = QubitParams::new(180.0, 270.0).map_err(|e| e.to_string())?;
    let f = transmon_frequency(8000.0, &p).map_err(|e| e.to_string())?;
    let rel = (f - ORACLE_HZ).abs() / ORACLE_HZ;
    ensure(rel <= 1e-9, || format!("f = {f} Hz, relative error {rel:e}"))?;
    let ec = p.charging_joule();
    let mut worst = 0.0f64;
    for r in [2000.0, 8000.0, 20000.0] {
        let lo = PLANCK * transmon_frequency(r, &p).map_err(|e| e.to_string())? + ec;
        let hi = PLANCK * transmon_frequency(4.0 * r, &p).map_err(|e| e.to_string())? + ec;
        worst = worst.max((hi / lo - 0.5).abs());
    }
    ensure(worst <= 1e-12, || format!("halving law off by {worst:e}"))?;
    Ok(format!("f = {:.6} GHz (rel. err {rel:.1e}), halving law to {worst:.1e}", f / 1e9))
}

fn cv_propagation() -> Outcome {
    let start = Instant::now();
    let p = QubitParams::new(180.0, 270.0).map_err(|e| e.to_string())?;
    let mc = propagate_cv_monte_carlo(8000.0, 0.06, &p, 100_000, 20_240_531, SpreadFamily::LogNormal)
        .map_err(|e| e.to_string())?;
    let ratio = mc.ratio(0.06);
    ensure((0.50..=0.55).contains(&ratio), || format!("ratio {ratio}"))?;
    let step = 1e-4;
    let mut worst = 0.0f64;
    for r in [3000.0, 8000.0, 15000.0] {
        let up = transmon_frequency(r * f64::exp(step), &p).map_err(|e| e.to_string())?.ln();
        let dn = transmon_frequency(r * f64::exp(-step), &p).map_err(|e| e.to_string())?.ln();
        let fd = (up - dn) / (2.0 * step);
        worst = worst.max((fd - resistance_sensitivity(r, &p).map_err(|e| e.to_string())?).abs());
    }
    ensure(worst <= 1e-6, || format!("finite difference off by {worst:e}"))?;
    within(start.elapsed(), 5.0)?;
    Ok(format!("cv_f/cv_RN = {ratio:.4}, |FD − analytic| ≤ {worst:.1e}"))
}

fn statistics_kernel() -> Outcome {
    let s = coefficient_of_variation(&[9.0, 10.0, 11.0]).map_err(|e| e.to_string())?;
    ensure((s.cv_percent() - 10.0).abs() <= 1e-12, || format!("CV {}%", s.cv_percent()))?;
    let base = [0.031, 0.0369, 0.0412, 0.0388, 0.0402];
    let cv = coefficient_of_variation(&base).map_err(|e| e.to_string())?.cv;
    let mut worst = 0.0f64;
    for k in [1e-6, 0.5, 3.0, 1e6] {
        let scaled: Vec<f64> = base.iter().map(|v| v * k).collect();
        let c = coefficient_of_variation(&scaled).map_err(|e| e.to_string())?.cv;
        worst = worst.max((c - cv).abs() / cv);
    }
    ensure(worst <= 1e-12, || format!("scaling changed CV by {worst:e}"))?;
    Ok(format!("CV[9,10,11] = {}%, scale drift {worst:.1e}", s.cv_percent()))
}

fn limit_suite() -> Outcome {
    let junction = JunctionSpec { w_bottom: 200.0, w_top: 200.0 };
    let source = SourceModel::disk(650.0 * NM_PER_MM, 0.0);
    let mut worst = 0.0f64;
    for theta in [0.0f64, 0.3, 40f64.to_radians()] {
        let mask = MaskStack { top: 100.0, bottom: 0.0 };
        let w = bottom_width(&junction, &mask, theta, 0.0, &source, 0.5 * NM_PER_MM).map_err(|e| e.to_string())?;
        worst = worst.max((w - 200.0).abs() / 200.0);
    }
    ensure(worst <= 1e-12, || format!("W′_bottom limit off by {worst:e}"))?;
    let t0 = 25.0;
    let normal = (sidewall_thickness(0.0, t0) - t0).abs() / t0;
    let sixty = (sidewall_thickness(60f64.to_radians(), t0) - t0 / 4.0).abs() / (t0 / 4.0);
    ensure(normal <= 1e-12, || format!("T′(0) off by {normal:e}"))?;
    ensure(sixty <= 1e-12, || format!("T′(60°) off by {sixty:e}"))?;
    Ok(format!("W′ limit {worst:.1e}, T′(0) {normal:.1e}, T′(60°) {sixty:.1e}"))
}

/// simulate → export → import → synthesise measurements → analyse, all in `dir`.
fn pipeline(dir: &Path, seed: u64) -> Result<Vec<(String, Vec<u8>)>, String> {
    let cfg = ProcessConfig::default();
    let map = simulate_wafer(&cfg, BiasModelKind::NonPointSource).map_err(|e| e.to_string())?;
    let sites_path = dir.join("sites.csv");
    export_sites(&map.sites, &sites_path).map_err(|e| e.to_string())?;
    let sites = import_sites(&sites_path).map_err(|e| e.to_string())?;
    for (a, b) in map.sites.iter().zip(&sites) {
        ensure((a.area - b.area).abs() <= 1e-9 * a.area, || "site round-trip lost precision".into())?;
    }

    // R_N·A of 400 Ω·µm² with 2% lognormal process noise and two probe runs.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = LogNormal::new(-0.5 * 0.02f64.powi(2), 0.02).map_err(|e| e.to_string())?;
    let mut records = Vec::new();
    for (i, s) in sites.iter().enumerate() {
        let rn = 400.0 / s.area * noise.sample(&mut rng);
        for run in ["r1", "r2"] {
            records.push(MeasurementRecord {
                wafer_id: "W1".into(),
                chip_id: format!("c{:03}", i),
                x_mm: s.site.x_mm,
                y_mm: s.site.y_mm,
                area_class_um2: 0.04,
                run_id: run.into(),
                rn_ohm: rn * (1.0 + 0.001 * noise.sample(&mut rng).ln()),
            });
        }
    }
    let meas_path = dir.join("measurements.csv");
    export_measurements(&records, &meas_path).map_err(|e| e.to_string())?;
    let import = import_measurements(&meas_path).map_err(|e| e.to_string())?;
    ensure(import.diagnostics.is_empty() && import.records.len() == records.len(), || {
        "measurement import lost rows".into()
    })?;
    let report = aggregate(&import.records, &[GroupKey::Wafer, GroupKey::Area]);
    let report_path = dir.join("report.json");
    fs::write(&report_path, serde_json::to_string_pretty(&report).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;

    [sites_path, meas_path, report_path]
        .iter()
        .map(|p| Ok((p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(p).map_err(|e| e.to_string())?)))
        .collect()
}

fn pipeline_determinism() -> Outcome {
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    let first = pipeline(a.path(), 42)?;
    let second = pipeline(b.path(), 42)?;
    for ((name, x), (_, y)) in first.iter().zip(&second) {
        ensure(x == y, || format!("{name} differs between runs"))?;
    }
    Ok(format!("{} files byte-identical ({} bytes)", first.len(), first.iter().map(|(_, b)| b.len()).sum::<usize>()))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("angle consistency", angle_consistency),
        ("point-source nesting", point_source_nesting),
        ("compensation round-trip", compensation_round_trip),
        ("uncompensated spread", uncompensated_spread),
        ("table gap consistency", table_gap_consistency),
        ("frequency law", frequency_law),
        ("CV propagation", cv_propagation),
        ("statistics kernel", statistics_kernel),
        ("limit suite", limit_suite),
        ("pipeline determinism", pipeline_determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        match check() {
            Ok(detail) => println!("PASS {:>2} {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
