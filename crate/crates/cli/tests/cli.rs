use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_jjshadow"))
}

fn default_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.toml")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn jjshadow")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn simulate_writes_full_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sites.csv");
    let o = run(&["simulate", "--config", p(&default_config()), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 226);
    assert!(text.starts_with("x_mm,y_mm,theta_bottom_deg,theta_top_deg,t_prime_nm,"));
    assert!(String::from_utf8_lossy(&o.stderr).contains("branch jump"));
}

#[test]
fn grid_pitch_override_and_repeatability() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let o = run(&[
            "simulate",
            "--config",
            p(&default_config()),
            "--model",
            "II",
            "--grid-pitch-mm",
            "10",
            "--out",
            p(out),
        ]);
        assert_eq!(code(&o), 0);
    }
    let first = fs::read(&a).unwrap();
    assert_eq!(first, fs::read(&b).unwrap());
    assert_eq!(String::from_utf8(first).unwrap().lines().count(), 1 + 8 * 8);
}

#[test]
fn compare_models_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp.csv");
    let o = run(&[
        "compare-models",
        "--config",
        p(&default_config()),
        "--electrode",
        "top",
        "--axis",
        "y",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&o), 0);
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("offset_mm,bias_I_nm,bias_II_nm,bias_III_nm"));
    assert!(lines.all(|l| l.split(',').nth(1) == Some("0")));
}

#[test]
fn axis_mismatch_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cmp.csv");
    let o = run(&[
        "compare-models",
        "--config",
        p(&default_config()),
        "--electrode",
        "top",
        "--axis",
        "x",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn compensate_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("corr.csv");
    let report = dir.path().join("verify.json");
    let o = run(&["compensate", "--config", p(&default_config()), "--target", "area:0.025", "--out", p(&table)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let o = run(&["verify", "--config", p(&default_config()), "--corrections", p(&table), "--out", p(&report)]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["sites"], 225);
    assert!(v["cv_area_percent"].as_f64().unwrap() < 0.05);
    assert!((v["mean_area_um2"].as_f64().unwrap() - 0.025).abs() < 1e-9);
}

#[test]
fn bad_target_is_rejected() {
    let o = run(&["compensate", "--config", p(&default_config()), "--target", "area:-1", "--out", "x.csv"]);
    assert_eq!(code(&o), 2);
}

#[test]
fn frequency_prints_oracle() {
    let o = run(&["frequency", "--rn-ohm", "8000", "--delta-uev", "180", "--ec-mhz", "270"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("frequency_hz = 5887691745.07"), "{text}");
    assert!(text.contains("sensitivity_dlnf_dlnrn = -0.522929189544"));
}

#[test]
fn frequency_rejects_collapse() {
    let o = run(&["frequency", "--rn-ohm", "1e12", "--delta-uev", "180", "--ec-mhz", "270"]);
    assert_eq!(code(&o), 4);
}

#[test]
fn propagate_is_seeded() {
    let args = [
        "propagate",
        "--mean-rn-ohm",
        "8000",
        "--cv-rn",
        "0.06",
        "--delta-uev",
        "180",
        "--ec-mhz",
        "270",
        "--n",
        "20000",
        "--seed",
        "3",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn analyze_with_gap_fit() {
    let dir = tempfile::tempdir().unwrap();
    let meas = dir.path().join("m.csv");
    let jc = dir.path().join("jc.csv");
    let out = dir.path().join("a.json");
    fs::write(
        &meas,
        "wafer_id,chip_id,x_mm,y_mm,area_class_um2,run_id,rn_ohm\n\
         W3,c1,0,0,0.025,r1,15700\n\
         W3,c1,5,0,0.025,r1,16300\n\
         W3,c2,0,5,0.09,r1,4250\n\
         W3,c2,5,5,0.09,r1,4450\n\
         W3,c2,5,5,0.09,r2,4460\n\
         W3,c3,0,0,0.09,r1,-5\n",
    )
    .unwrap();
    fs::write(&jc, "wafer_id,area_class_um2,jc_ua_per_um2\nW3,0.025,0.92\nW3,0.09,0.96\n").unwrap();
    let o = run(&[
        "analyze",
        "--measurements",
        p(&meas),
        "--group-by",
        "wafer,area",
        "--fit-gap",
        "--jc-reported",
        p(&jc),
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains(":7:"));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["records"], 5);
    assert!(v["groups"]["wafer=W3,area=0.025"]["cv"].as_f64().unwrap() > 0.0);
    assert_eq!(v["repeatability"]["junctions"].as_array().unwrap().len(), 1);
    let gap = v["gap_fit"]["fit"]["gap_uev"].as_f64().unwrap();
    assert!((150.0..300.0).contains(&gap), "{gap}");
}

#[test]
fn analyze_header_only_fails() {
    let dir = tempfile::tempdir().unwrap();
    let meas = dir.path().join("m.csv");
    fs::write(&meas, "wafer_id,chip_id,x_mm,y_mm,area_class_um2,run_id,rn_ohm\n").unwrap();
    let o = run(&["analyze", "--measurements", p(&meas), "--out", p(&dir.path().join("a.json"))]);
    assert_eq!(code(&o), 2);
}

#[test]
fn heatmap_unknown_field_and_success() {
    let dir = tempfile::tempdir().unwrap();
    let sites = dir.path().join("s.csv");
    let svg = dir.path().join("h.svg");
    assert_eq!(
        code(&run(&["simulate", "--config", p(&default_config()), "--grid-pitch-mm", "10", "--out", p(&sites)])),
        0
    );
    let o = run(&["heatmap", "--in", p(&sites), "--field", "bogus", "--out", p(&svg)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("area_um2"));
    assert_eq!(code(&run(&["heatmap", "--in", p(&sites), "--field", "w_bottom_nm", "--out", p(&svg)])), 0);
    assert!(fs::read_to_string(&svg).unwrap().starts_with("<svg"));
}

#[test]
fn exit_codes_for_config_problems() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.csv");
    assert_eq!(code(&run(&["simulate", "--config", p(&dir.path().join("missing.toml")), "--out", p(&out)])), 3);

    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[source]\ndistance_mm = 650\nradius_mm = 700\n").unwrap();
    assert_eq!(code(&run(&["simulate", "--config", p(&bad), "--out", p(&out)])), 2);

    fs::write(&bad, "[source]\nthrow = 3\n").unwrap();
    let o = run(&["simulate", "--config", p(&bad), "--out", p(&out)]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let o = run(&["simulate", "--config", p(&default_config()), "--out", p(&dir.path().join("no/such/dir.csv"))]);
    assert_eq!(code(&o), 3);
}

#[test]
fn provenance_lists_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("min.toml");
    fs::write(&cfg, "[source]\ndistance_mm = 700\n").unwrap();
    let o = run(&["simulate", "--config", p(&cfg), "--grid-pitch-mm", "35", "--out", p(&dir.path().join("s.csv"))]);
    assert_eq!(code(&o), 0);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("default source.radius_mm"), "{err}");
    assert!(!err.contains("default source.distance_mm"));
}
