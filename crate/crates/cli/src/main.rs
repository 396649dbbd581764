use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use jjshadow::config::{load_config, ConfigError, LoadedConfig};
use jjshadow::electrical::{
    fit_gap, propagate_cv_monte_carlo, resistance_sensitivity, transmon_frequency, ElectricalError, GapRecord,
    QubitParams, SpreadFamily,
};
use jjshadow::heatmap::{render_heatmap, HeatmapError};
use jjshadow::io::{export_corrections, export_sites, format_value, import_corrections, import_measurements, IoError};
use jjshadow::stats::{aggregate, GroupKey, StatsError};
use jjshadow::wafer::{
    bias_profile, compensate_wafer, residual_report, simulate_corrected, simulate_wafer, Axis, CompensationTarget,
    Electrode, WaferError,
};
use jjshadow::{BiasModelKind, ProcessConfig};

const EXIT_VALIDATION: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_COMPUTATION: u8 = 4;

/// Shadow-evaporation junction simulator, compensation and statistics tool.
#[derive(Debug, Parser)]
#[command(name = "jjshadow", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate printed widths and areas over the wafer grid.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "III", value_parser = parse_model)]
        model: BiasModelKind,
        #[arg(long)]
        grid_pitch_mm: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bias profiles of models I, II and III along one axis.
    CompareModels {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        electrode: ElectrodeArg,
        #[arg(long, value_enum)]
        axis: AxisArg,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve per-site drawn widths that print the target everywhere.
    Compensate {
        #[arg(long)]
        config: PathBuf,
        /// `center` or `area:<um2>[:aspect]`.
        #[arg(long, default_value = "center", value_parser = parse_target)]
        target: CompensationTarget,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-simulate a correction table and report the residual area spread.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        corrections: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Group resistance measurements and summarise their spread.
    Analyze {
        #[arg(long)]
        measurements: PathBuf,
        #[arg(long, value_delimiter = ',')]
        group_by: Vec<GroupKey>,
        /// Fit a single superconducting gap to reported critical-current densities.
        #[arg(long, requires = "jc_reported")]
        fit_gap: bool,
        /// CSV with `wafer_id,area_class_um2,jc_ua_per_um2`.
        #[arg(long)]
        jc_reported: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Qubit frequency and its resistance sensitivity.
    Frequency {
        #[arg(long)]
        rn_ohm: f64,
        #[arg(long)]
        delta_uev: f64,
        #[arg(long)]
        ec_mhz: f64,
    },
    /// Monte-Carlo propagation of a resistance spread to frequency.
    Propagate {
        #[arg(long)]
        mean_rn_ohm: f64,
        #[arg(long)]
        cv_rn: f64,
        #[arg(long)]
        delta_uev: f64,
        #[arg(long)]
        ec_mhz: f64,
        #[arg(long, default_value_t = 100_000)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value = "lognormal")]
        family: FamilyArg,
    },
    /// Render one numeric column of a site CSV as an SVG wafer map.
    Heatmap {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        field: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100.0)]
        wafer_diameter_mm: f64,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ElectrodeArg {
    Bottom,
    Top,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AxisArg {
    X,
    Y,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FamilyArg {
    Lognormal,
    Normal,
}

fn parse_model(s: &str) -> Result<BiasModelKind, String> {
    s.parse()
}

fn parse_target(s: &str) -> Result<CompensationTarget, String> {
    if s == "center" {
        return Ok(CompensationTarget::CenterWidths);
    }
    let rest =
        s.strip_prefix("area:").ok_or_else(|| format!("expected `center` or `area:<um2>[:aspect]`, got `{s}`"))?;
    let mut parts = rest.split(':');
    let num = |p: Option<&str>, what: &str| -> Result<Option<f64>, String> {
        p.map(|v| v.parse::<f64>().map_err(|_| format!("{what} `{v}` is not a number"))).transpose()
    };
    let area_um2 = num(parts.next(), "area")?.ok_or("missing area")?;
    let aspect = num(parts.next(), "aspect")?.unwrap_or(1.0);
    if parts.next().is_some() {
        return Err(format!("too many fields in `{s}`"));
    }
    if !(area_um2 > 0.0 && aspect > 0.0) {
        return Err("area and aspect must be positive".into());
    }
    Ok(CompensationTarget::ExplicitArea { area_um2, aspect })
}

/// An error with the process exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn validation(message: impl Into<String>) -> Self {
        Failure { code: EXIT_VALIDATION, message: message.into() }
    }

    fn io(path: &Path, err: std::io::Error) -> Self {
        Failure { code: EXIT_IO, message: format!("{}: {err}", path.display()) }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        let code = match e {
            ConfigError::Io { .. } => EXIT_IO,
            ConfigError::Parse { .. } | ConfigError::Validation(_) => EXIT_VALIDATION,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        let code = match e {
            IoError::Io { .. } | IoError::Csv { .. } => EXIT_IO,
            IoError::EmptyResults => EXIT_COMPUTATION,
            IoError::Header { .. } | IoError::Row { .. } | IoError::ZeroValidRows { .. } => EXIT_VALIDATION,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<WaferError> for Failure {
    fn from(e: WaferError) -> Self {
        let code = match e {
            WaferError::Invalid(_) | WaferError::AxisMismatch { .. } => EXIT_VALIDATION,
            _ => EXIT_COMPUTATION,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<ElectricalError> for Failure {
    fn from(e: ElectricalError) -> Self {
        let code = match e {
            ElectricalError::Invalid(_) => EXIT_VALIDATION,
            _ => EXIT_COMPUTATION,
        };
        Failure { code, message: e.to_string() }
    }
}

impl From<StatsError> for Failure {
    fn from(e: StatsError) -> Self {
        Failure { code: EXIT_COMPUTATION, message: e.to_string() }
    }
}

impl From<HeatmapError> for Failure {
    fn from(e: HeatmapError) -> Self {
        let code = match e {
            HeatmapError::Io { .. } | HeatmapError::Csv { .. } => EXIT_IO,
            _ => EXIT_VALIDATION,
        };
        Failure { code, message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(command: Command) -> Result<(), Failure> {
    match command {
        Command::Simulate { config, model, grid_pitch_mm, out } => simulate(&config, model, grid_pitch_mm, &out),
        Command::CompareModels { config, electrode, axis, out } => compare_models(&config, electrode, axis, &out),
        Command::Compensate { config, target, out } => compensate(&config, target, &out),
        Command::Verify { config, corrections, out } => verify(&config, &corrections, &out),
        Command::Analyze { measurements, group_by, fit_gap, jc_reported, out } => {
            analyze(&measurements, &group_by, fit_gap.then_some(jc_reported).flatten().as_deref(), &out)
        }
        Command::Frequency { rn_ohm, delta_uev, ec_mhz } => frequency(rn_ohm, delta_uev, ec_mhz),
        Command::Propagate { mean_rn_ohm, cv_rn, delta_uev, ec_mhz, n, seed, family } => {
            let family = match family {
                FamilyArg::Lognormal => SpreadFamily::LogNormal,
                FamilyArg::Normal => SpreadFamily::Normal,
            };
            propagate(mean_rn_ohm, cv_rn, delta_uev, ec_mhz, n, seed, family)
        }
        Command::Heatmap { input, field, out, wafer_diameter_mm } => {
            let map = render_heatmap(&input, &field, &out, wafer_diameter_mm)?;
            eprintln!("{} cells, {field} in [{}, {}]", map.cells.len(), map.min, map.max);
            Ok(())
        }
    }
}

fn config(path: &Path) -> Result<ProcessConfig, Failure> {
    let LoadedConfig { config, provenance } = load_config(path)?;
    for line in &provenance {
        eprintln!("{line}");
    }
    Ok(config)
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::io(path, e))
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Failure::validation(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

fn simulate(path: &Path, model: BiasModelKind, pitch: Option<f64>, out: &Path) -> Result<(), Failure> {
    let mut cfg = config(path)?;
    if let Some(p) = pitch {
        cfg.layout.grid_pitch_mm = p;
        cfg.validate()?;
    }
    let map = simulate_wafer(&cfg, model)?;
    export_sites(&map.sites, out)?;
    let summary = residual_report(&map.sites)?;
    eprintln!(
        "branch jump at epsilon: bottom {} nm, top {} nm",
        format_value(map.branch_jump.bottom_nm),
        format_value(map.branch_jump.top_nm)
    );
    eprintln!(
        "{} sites, mean area {} um2, CV_A {}%",
        summary.n,
        format_value(summary.mean),
        format_value(summary.cv_percent())
    );
    Ok(())
}

fn compare_models(path: &Path, electrode: ElectrodeArg, axis: AxisArg, out: &Path) -> Result<(), Failure> {
    let cfg = config(path)?;
    let electrode = match electrode {
        ElectrodeArg::Bottom => Electrode::Bottom,
        ElectrodeArg::Top => Electrode::Top,
    };
    let axis = match axis {
        AxisArg::X => Axis::X,
        AxisArg::Y => Axis::Y,
    };
    let models = [BiasModelKind::ConstantBias, BiasModelKind::PointSource, BiasModelKind::NonPointSource];
    let profiles = models.iter().map(|&m| bias_profile(&cfg, axis, electrode, m)).collect::<Result<Vec<_>, _>>()?;
    let mut text = String::from("offset_mm,bias_I_nm,bias_II_nm,bias_III_nm\n");
    for (i, p) in profiles[0].iter().enumerate() {
        let _ = writeln!(
            text,
            "{},{},{},{}",
            format_value(p.offset_mm),
            format_value(p.bias_nm),
            format_value(profiles[1][i].bias_nm),
            format_value(profiles[2][i].bias_nm)
        );
    }
    write_text(out, &text)
}

fn compensate(path: &Path, target: CompensationTarget, out: &Path) -> Result<(), Failure> {
    let cfg = config(path)?;
    let table = compensate_wafer(&cfg, target)?;
    for r in &table.rejections {
        eprintln!("rejected ({} mm, {} mm): {}", r.site.x_mm, r.site.y_mm, r.reason);
    }
    export_corrections(&table.rows, out)?;
    eprintln!(
        "target widths {} nm x {} nm; {} rows, {} rejected",
        format_value(table.target_w_bottom),
        format_value(table.target_w_top),
        table.rows.len(),
        table.rejections.len()
    );
    Ok(())
}

fn verify(path: &Path, corrections: &Path, out: &Path) -> Result<(), Failure> {
    let cfg = config(path)?;
    let rows = import_corrections(corrections)?;
    let results = simulate_corrected(&cfg, &rows)?;
    let summary = residual_report(&results)?;
    let max_dev = results.iter().map(|r| (r.area - summary.mean).abs() / summary.mean).fold(0.0, f64::max);
    write_json(
        out,
        &json!({
            "sites": summary.n,
            "mean_area_um2": summary.mean,
            "sd_area_um2": summary.sd,
            "cv_area": summary.cv,
            "cv_area_percent": summary.cv_percent(),
            "max_relative_deviation": max_dev,
        }),
    )
}

/// Reported `J_c` keyed by `(wafer_id, area_class_um2)`.
fn read_reported_jc(path: &Path) -> Result<Vec<(String, f64, f64)>, Failure> {
    let text = fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "wafer_id,area_class_um2,jc_ua_per_um2" => {}
        _ => {
            return Err(Failure::validation(format!(
                "{}: expected header `wafer_id,area_class_um2,jc_ua_per_um2`",
                path.display()
            )))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.filter(|(_, l)| !l.trim().is_empty()) {
        let bad = || Failure::validation(format!("{}:{}: malformed row `{line}`", path.display(), i + 1));
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 3 {
            return Err(bad());
        }
        let area: f64 = f[1].parse().map_err(|_| bad())?;
        let jc: f64 = f[2].parse().map_err(|_| bad())?;
        rows.push((f[0].to_string(), area, jc));
    }
    Ok(rows)
}

fn analyze(path: &Path, keys: &[GroupKey], jc_reported: Option<&Path>, out: &Path) -> Result<(), Failure> {
    let import = import_measurements(path)?;
    for d in &import.diagnostics {
        eprintln!("{}:{}: {}", path.display(), d.line, d.reason);
    }
    let report = aggregate(&import.records, keys);
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let mut doc = json!({
        "records": import.records.len(),
        "diagnostics": import.diagnostics,
        "groups": report.groups,
        "warnings": report.warnings,
        "repeatability": report.repeatability,
    });
    if let Some(jc_path) = jc_reported {
        let mut sums: BTreeMap<(String, u64), (f64, usize)> = BTreeMap::new();
        for r in &import.records {
            let e = sums.entry((r.wafer_id.clone(), r.area_class_um2.to_bits())).or_default();
            e.0 += r.rn_ohm;
            e.1 += 1;
        }
        let mut entries = Vec::new();
        let mut records = Vec::new();
        for (wafer, area, jc) in read_reported_jc(jc_path)? {
            let (sum, n) = sums.get(&(wafer.clone(), area.to_bits())).copied().ok_or_else(|| {
                Failure::validation(format!("no measurements for wafer {wafer}, area class {area} um2"))
            })?;
            let rn_ohm = sum / n as f64;
            records.push(GapRecord { rn_ohm, area_um2: area, jc });
            entries
                .push(json!({ "wafer_id": wafer, "area_class_um2": area, "mean_rn_ohm": rn_ohm, "jc_reported": jc }));
        }
        let fit = fit_gap(&records)?;
        doc["gap_fit"] = json!({ "entries": entries, "fit": fit });
    }
    write_json(out, &doc)
}

fn frequency(rn_ohm: f64, delta_uev: f64, ec_mhz: f64) -> Result<(), Failure> {
    let params = QubitParams::new(delta_uev, ec_mhz)?;
    let f = transmon_frequency(rn_ohm, &params)?;
    let s = resistance_sensitivity(rn_ohm, &params)?;
    println!("frequency_hz = {}", format_value(f));
    println!("frequency_ghz = {}", format_value(f / 1e9));
    println!("sensitivity_dlnf_dlnrn = {}", format_value(s));
    Ok(())
}

fn propagate(
    mean_rn_ohm: f64,
    cv_rn: f64,
    delta_uev: f64,
    ec_mhz: f64,
    n: usize,
    seed: u64,
    family: SpreadFamily,
) -> Result<(), Failure> {
    let params = QubitParams::new(delta_uev, ec_mhz)?;
    let r = propagate_cv_monte_carlo(mean_rn_ohm, cv_rn, &params, n, seed, family)?;
    let s = resistance_sensitivity(mean_rn_ohm, &params)?;
    println!("samples = {}", r.n_valid);
    println!("invalid = {}", r.n_invalid);
    println!("mean_frequency_hz = {}", format_value(r.mean_f_hz));
    println!("cv_rn_sampled = {}", format_value(r.cv_r_sampled));
    println!("cv_f = {}", format_value(r.cv_f));
    println!("ratio_cv_f_over_cv_rn = {}", format_value(r.ratio(cv_rn)));
    println!("first_order_ratio = {}", format_value(s.abs()));
    Ok(())
}
