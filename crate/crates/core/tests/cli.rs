use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_ringcav");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str], dir: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .env_remove("RINGCAV_OUT_DIR")
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

fn stdout_value(out: &Output, key: &str) -> f64 {
    let text = String::from_utf8_lossy(&out.stdout);
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key} = ")))
        .unwrap_or_else(|| panic!("`{key}` missing from:\n{text}"))
        .trim()
        .parse()
        .unwrap()
}

fn footer_value(csv: &str, key: &str) -> f64 {
    csv.lines()
        .find_map(|l| l.strip_prefix(&format!("# {key} = ")))
        .unwrap_or_else(|| panic!("footer `{key}` missing"))
        .parse()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn zero_samples_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "[spectrum]\nsamples = 0\n");
    let out = run(&["spectrum", "--config", &cfg, "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn unknown_key_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.toml", "[cavity]\nlenght_cm = 100.0\n");
    let out = run(&["spectrum", "--config", &cfg, "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("lenght_cm"), "{}", stderr(&out));
}

#[test]
fn missing_config_file_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["spectrum", "--config", "nope.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreachable_calibration_reports_best_residual() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "[medium]\nkind = \"eit-lambda\"\neit_linewidth_mhz = 1.0\ntarget_ng = 1e9\n",
    );
    let out = run(&["calibrate", "--config", &cfg, "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(4), "{}", stderr(&out));
    assert!(stderr(&out).contains("best residual"), "{}", stderr(&out));
}

#[test]
fn gain_above_threshold_is_a_physics_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "[medium]\nkind = \"raman-gain-single\"\nchi0 = 1e-6\ngamma_opt_mhz = 1.0\n",
    );
    let out = run(&["spectrum", "--config", &cfg, "--out", "o"], tmp.path());
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn identical_runs_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = configs().join("eit.toml").display().to_string();
    for (sub, stem) in [("spectrum", "spectrum"), ("shift-scan", "shift_scan")] {
        let a = run(&[sub, "--config", &cfg, "--out", "a"], tmp.path());
        let b = run(&[sub, "--config", &cfg, "--out", "b"], tmp.path());
        assert!(a.status.success() && b.status.success(), "{}", stderr(&a));
        let name = format!("eit_{stem}.csv");
        let ca = fs::read(tmp.path().join("a").join(&name)).unwrap();
        let cb = fs::read(tmp.path().join("b").join(&name)).unwrap();
        assert_eq!(ca, cb, "{name} differs between runs");
        assert!(!ca.contains(&b'\r'));
    }
}

#[test]
fn transparent_ring_spectrum_has_the_empty_linewidth() {
    let tmp = TempDir::new().unwrap();
    let cfg = configs().join("vacuum.toml").display().to_string();
    let out = run(&["spectrum", "--config", &cfg, "--out", "o"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let fwhm = stdout_value(&out, "fwhm_MHz");
    assert!((fwhm - 3.0).abs() < 0.01, "{fwhm}");
    assert!(stdout_value(&out, "peak_center_MHz").abs() < 1e-6);
    let csv = fs::read_to_string(tmp.path().join("o/vacuum_spectrum.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("detuning_MHz,transmission"));
}

#[test]
fn transparent_ring_shift_is_unreduced() {
    let tmp = TempDir::new().unwrap();
    let cfg = configs().join("vacuum.toml").display().to_string();
    let out = run(&["shift-scan", "--config", &cfg, "--out", "o"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(tmp.path().join("o/vacuum_shift_scan.csv")).unwrap();
    assert!((footer_value(&csv, "implied_S") - 1.0).abs() < 1e-6);
    let zero_row = csv
        .lines()
        .skip(1)
        .find(|l| l.starts_with("0.00000000e0,"))
        .expect("grid contains zero");
    let cells: Vec<&str> = zero_row.split(',').collect();
    assert_eq!(cells[1], "0.00000000e0");
    assert_eq!(cells[2], "0.00000000e0");
}

#[test]
fn detuning_column_round_trips_megahertz() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "[medium]\nkind = \"vacuum\"\n[spectrum]\ndetuning_min_mhz = -5.0\ndetuning_max_mhz = 5.0\nsamples = 41\n",
    );
    let out = run(&["spectrum", "--config", &cfg, "--out", "o"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(tmp.path().join("o/spectrum.csv")).unwrap();
    for (k, line) in csv.lines().skip(1).enumerate() {
        let expected = -5.0 + 0.25 * k as f64;
        let cell = line.split(',').next().unwrap();
        assert_eq!(cell, format!("{expected:.8e}"));
    }
}

#[test]
fn calibration_to_unit_group_index_has_no_medium() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "[medium]\nkind = \"eit-lambda\"\neit_linewidth_mhz = 1.0\ntarget_ng = 1.0\n",
    );
    let out = run(&["calibrate", "--config", &cfg, "--out", "o"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let doc: toml::Table = fs::read_to_string(tmp.path().join("o/calibration.toml"))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(doc["medium"]["chi0"].as_float(), Some(0.0));
    assert_eq!(doc["achieved"]["group_index"].as_float(), Some(1.0));
}

#[test]
fn output_directory_precedence() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "[medium]\nkind = \"vacuum\"\n[output]\ndir = \"from_config\"\n",
    );
    let env_run = |extra: &[&str]| {
        let mut args = vec!["spectrum", "--config", cfg.as_str()];
        args.extend_from_slice(extra);
        Command::new(BIN)
            .args(&args)
            .env("RINGCAV_OUT_DIR", tmp.path().join("from_env"))
            .current_dir(tmp.path())
            .output()
            .unwrap()
    };
    assert!(env_run(&[]).status.success());
    assert!(tmp.path().join("from_env/spectrum.csv").exists());
    assert!(!tmp.path().join("from_config").exists());
    assert!(env_run(&["--out", "from_flag"]).status.success());
    assert!(tmp.path().join("from_flag/spectrum.csv").exists());

    assert!(run(&["spectrum", "--config", &cfg], tmp.path()).status.success());
    assert!(tmp.path().join("from_config/spectrum.csv").exists());
}

#[test]
fn plot_flag_writes_svg() {
    let tmp = TempDir::new().unwrap();
    let cfg = configs().join("vacuum.toml").display().to_string();
    for (sub, stem) in [("spectrum", "spectrum"), ("shift-scan", "shift_scan")] {
        let out = run(&[sub, "--config", &cfg, "--out", "o", "--plot"], tmp.path());
        assert!(out.status.success(), "{}", stderr(&out));
        let svg = fs::read_to_string(tmp.path().join(format!("o/vacuum_{stem}.svg"))).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    }
    let out = run(&["spectrum", "--config", &cfg, "--out", "p"], tmp.path());
    assert!(out.status.success());
    assert!(!tmp.path().join("p/vacuum_spectrum.svg").exists());
}

#[test]
fn cad_scan_at_unit_group_index_tracks_the_empty_cavity() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.toml",
        "[medium]\nkind = \"raman-gain-dual\"\n[cad]\ntarget_ng = 1.0\n\
         grid_mhz = [-1e-4, -5e-5, -2e-5, -1e-5, 1e-5, 2e-5, 5e-5, 1e-4]\n",
    );
    let out = run(&["cad-scan", "--config", &cfg, "--out", "o"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let s = stdout_value(&out, "implied_S");
    assert!((s - 1.0).abs() < 1e-3, "{s}");
}

#[test]
fn cad_scan_reports_finite_enhancement() {
    let tmp = TempDir::new().unwrap();
    let cfg = configs().join("cad.toml").display().to_string();
    let out = run(&["cad-scan", "--config", &cfg, "--out", "o"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("linear_model_diverges = true"));
    let e = stdout_value(&out, "enhancement_ratio");
    assert!(e.is_finite() && e > 1.0);
    let csv = fs::read_to_string(tmp.path().join("o/cad_cad_scan.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("# enhancement_ratio = ")));
}

#[test]
fn metadata_sidecar_records_the_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = configs().join("eit.toml").display().to_string();
    let out = run(&["spectrum", "--config", &cfg, "--out", "o", "--seed", "7"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let meta: toml::Table = fs::read_to_string(tmp.path().join("o/eit_spectrum.meta.toml"))
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(meta["run"]["command"].as_str(), Some("spectrum"));
    assert_eq!(meta["run"]["version"].as_str(), Some(env!("CARGO_PKG_VERSION")));
    assert_eq!(meta["run"]["seed"].as_integer(), Some(7));
    for key in ["length_cm", "medium_length_cm", "reflectivity", "excess_loss", "mode_n"] {
        assert!(meta["cavity"].get(key).is_some(), "cavity.{key} missing");
    }
    assert_eq!(meta["medium"]["kind"].as_str(), Some("eit-lambda"));
    let fwhm = meta["results"]["fwhm_mhz"].as_float().unwrap();
    assert!(fwhm > 0.5 && fwhm < 8.0);
    assert!(meta["results"].get("peak_center_mhz").is_some());
}

#[test]
fn defaults_are_logged_in_metadata() {
    let tmp = TempDir::new().unwrap();
    let out = run(&["spectrum", "--out", "o"], tmp.path());
    assert!(out.status.success(), "{}", stderr(&out));
    let meta: toml::Table = fs::read_to_string(tmp.path().join("o/spectrum.meta.toml"))
        .unwrap()
        .parse()
        .unwrap();
    let defaults = meta["run"]["defaults"].as_array().unwrap();
    assert!(!defaults.is_empty());
}
