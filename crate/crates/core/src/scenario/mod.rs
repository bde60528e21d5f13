//! Scenario runner behind the command-line tool: resolves a configuration,
//! runs one computation and writes CSV, a metadata sidecar and optional SVG.

pub mod config;
pub mod svg;

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::cavity::{self, CavityConfig};
use crate::error::{Error, Result};
use crate::media::{MediumKind, MediumSpec};
use crate::sensitivity::{self, ShiftScanResult};
use crate::rad_to_mhz;
use config::{CavityReport, MediumReport, Purpose, Resolved, ScenarioConfig};
use svg::Series;

/// Environment variable overriding the output directory.
pub const OUT_DIR_ENV: &str = "RINGCAV_OUT_DIR";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Spectrum,
    ShiftScan,
    CadScan,
    Calibrate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::ShiftScan => "shift-scan",
            Command::CadScan => "cad-scan",
            Command::Calibrate => "calibrate",
        }
    }

    fn default_stem(self) -> &'static str {
        match self {
            Command::Spectrum => "spectrum",
            Command::ShiftScan => "shift_scan",
            Command::CadScan => "cad_scan",
            Command::Calibrate => "calibration",
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub plot: bool,
    /// Reserved; recorded in metadata, no computation is stochastic.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    /// Human-readable `key = value` lines, or the calibrated spec.
    pub text: String,
}

pub fn run(command: Command, opts: &RunOptions) -> Result<RunReport> {
    let cfg = match &opts.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    let out = Output::new(command, &cfg, opts)?;
    match command {
        Command::Spectrum => cmd_spectrum(&cfg, &out),
        Command::ShiftScan => cmd_shift_scan(&cfg, &out),
        Command::CadScan => cmd_cad_scan(&cfg, &out),
        Command::Calibrate => cmd_calibrate(&cfg, &out),
    }
}

struct Output {
    dir: PathBuf,
    stem: String,
    plot: bool,
    run: RunInfo,
}

#[derive(Debug, Clone, Serialize)]
struct RunInfo {
    command: &'static str,
    version: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    config: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    defaults: Vec<String>,
}

#[derive(Serialize)]
struct Metadata<R: Serialize> {
    run: RunInfo,
    cavity: CavityReport,
    medium: MediumReport,
    results: R,
}

impl Output {
    fn new(command: Command, cfg: &ScenarioConfig, opts: &RunOptions) -> Result<Self> {
        let dir = opts
            .out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .or_else(|| cfg.output.dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));
        let stem = match &cfg.output.stem {
            Some(prefix) => format!("{prefix}_{}", command.default_stem()),
            None => command.default_stem().to_string(),
        };
        if stem.is_empty() || stem.contains(['/', '\\']) {
            return Err(Error::Config(format!("output.stem `{stem}` is not a plain file name")));
        }
        Ok(Output {
            dir,
            stem,
            plot: opts.plot,
            run: RunInfo {
                command: command.name(),
                version: VERSION,
                config: opts.config.as_ref().map(|p| p.display().to_string()),
                seed: opts.seed,
                defaults: Vec::new(),
            },
        })
    }

    fn path(&self, suffix: &str) -> PathBuf {
        self.dir.join(format!("{}{suffix}", self.stem))
    }

    fn write(&self, suffix: &str, contents: &str, files: &mut Vec<PathBuf>) -> Result<()> {
        std::fs::create_dir_all(&self.dir).map_err(|e| io_error(&self.dir, e))?;
        let path = self.path(suffix);
        std::fs::write(&path, contents).map_err(|e| io_error(&path, e))?;
        log::info!("wrote {}", path.display());
        files.push(path);
        Ok(())
    }

    fn metadata<R: Serialize>(&self, resolved: &Resolved, results: R, files: &mut Vec<PathBuf>) -> Result<()> {
        let meta = Metadata {
            run: RunInfo {
                defaults: resolved.defaults.clone(),
                ..self.run.clone()
            },
            cavity: CavityReport::new(&resolved.cavity),
            medium: MediumReport::new(&resolved.medium),
            results,
        };
        let text = toml::to_string(&meta).map_err(|e| Error::Io(format!("metadata serialization: {e}")))?;
        self.write(".meta.toml", &text, files)
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Fixed nine-significant-digit formatting for data files.
pub fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "nan".to_string()
    } else {
        format!("{v:.8e}")
    }
}

fn csv_row(values: &[f64]) -> String {
    let cells: Vec<String> = values.iter().map(|&v| fmt_value(v)).collect();
    cells.join(",")
}

#[derive(Serialize)]
struct SpectrumSummary {
    fwhm_mhz: f64,
    peak_center_mhz: f64,
    peak_height: f64,
    analytic_fwhm_mhz: f64,
    transparent_fwhm_mhz: f64,
    empty_shift_mhz: f64,
    samples: usize,
}

fn cmd_spectrum(cfg: &ScenarioConfig, out: &Output) -> Result<RunReport> {
    let resolved = config::resolve(cfg, Purpose::Spectrum)?;
    let plan = config::spectrum_plan(&cfg.spectrum)?;
    let cavity = resolved.cavity.with_empty_shift(plan.empty_shift)?;
    let medium = &resolved.medium;
    let result = match plan.window {
        Some((lo, hi)) => cavity::spectrum(&cavity, medium, lo, hi, plan.samples)?,
        None => {
            let guess = if plan.empty_shift == 0.0 {
                0.0
            } else {
                sensitivity::solve_shift(&cavity, medium, plan.empty_shift)
                    .map(|r| r.dw0_prime)
                    .unwrap_or(0.0)
            };
            cavity::auto_spectrum(&cavity, medium, guess)?
        }
    };
    let analytic = cavity::linewidth_analytic(&cavity, medium).unwrap_or(f64::NAN);

    let mut csv = String::from("detuning_MHz,transmission\n");
    for (&dw, &t) in result.detunings.iter().zip(&result.transmission) {
        csv.push_str(&csv_row(&[rad_to_mhz(dw), t]));
        csv.push('\n');
    }
    let summary = SpectrumSummary {
        fwhm_mhz: rad_to_mhz(result.fwhm),
        peak_center_mhz: rad_to_mhz(result.peak_center),
        peak_height: result.peak_height,
        analytic_fwhm_mhz: rad_to_mhz(analytic),
        transparent_fwhm_mhz: rad_to_mhz(cavity.vacuum_linewidth()),
        empty_shift_mhz: rad_to_mhz(plan.empty_shift),
        samples: result.detunings.len(),
    };

    let mut files = Vec::new();
    out.write(".csv", &csv, &mut files)?;
    if out.plot {
        let vacuum = MediumSpec::vacuum(cavity.omega_lock());
        let reference = result
            .detunings
            .iter()
            .map(|&dw| cavity::transmission(&cavity, &vacuum, dw))
            .collect::<Result<Vec<f64>>>()?;
        let xs: Vec<f64> = result.detunings.iter().map(|&d| rad_to_mhz(d)).collect();
        let label = format!("{} medium", medium.kind.name());
        let doc = svg::line_plot(
            "Cavity transmission",
            "detuning (MHz)",
            "transmission",
            &[
                Series {
                    label: &label,
                    xs: &xs,
                    ys: &result.transmission,
                    color: "#c0392b",
                    markers: false,
                },
                Series {
                    label: "transparent medium",
                    xs: &xs,
                    ys: &reference,
                    color: "#2c3e50",
                    markers: false,
                },
            ],
        );
        out.write(".svg", &doc, &mut files)?;
    }
    let mut text = String::new();
    let _ = writeln!(text, "fwhm_MHz = {}", fmt_value(summary.fwhm_mhz));
    let _ = writeln!(text, "peak_center_MHz = {}", fmt_value(summary.peak_center_mhz));
    let _ = writeln!(text, "analytic_fwhm_MHz = {}", fmt_value(summary.analytic_fwhm_mhz));
    out.metadata(&resolved, summary, &mut files)?;
    Ok(RunReport { files, text })
}

fn scan_csv(scan: &ShiftScanResult, footer: &[(&str, f64)]) -> String {
    let mut csv = String::from("dw0_MHz,dw0_prime_linear_MHz,dw0_prime_MHz,ng_eff,residual_Hz\n");
    for p in &scan.points {
        let linear = p.dw0_prime_linear.map(rad_to_mhz).unwrap_or(f64::NAN);
        csv.push_str(&csv_row(&[
            rad_to_mhz(p.dw0),
            linear,
            rad_to_mhz(p.dw0_prime),
            p.n_g_eff,
            p.residual / TAU,
        ]));
        csv.push('\n');
    }
    for (key, value) in footer {
        let _ = writeln!(csv, "# {key} = {}", fmt_value(*value));
    }
    csv
}

fn scan_plot(title: &str, scan: &ShiftScanResult, s_linear: f64) -> String {
    let xs: Vec<f64> = scan.points.iter().map(|p| rad_to_mhz(p.dw0)).collect();
    let ys: Vec<f64> = scan.points.iter().map(|p| rad_to_mhz(p.dw0_prime)).collect();
    let linear: Vec<f64> = xs
        .iter()
        .map(|&x| if s_linear.abs() < sensitivity::CAD_TOLERANCE { f64::NAN } else { x / s_linear })
        .collect();
    let fit: Vec<f64> = xs.iter().map(|&x| x * scan.fitted_slope).collect();
    svg::line_plot(
        title,
        "empty-cavity shift (MHz)",
        "loaded-cavity shift (MHz)",
        &[
            Series {
                label: "self-consistent",
                xs: &xs,
                ys: &ys,
                color: "#c0392b",
                markers: true,
            },
            Series {
                label: "fit through origin",
                xs: &xs,
                ys: &fit,
                color: "#c0392b",
                markers: false,
            },
            Series {
                label: "linear model",
                xs: &xs,
                ys: &linear,
                color: "#2c3e50",
                markers: false,
            },
            Series {
                label: "empty cavity",
                xs: &xs,
                ys: &xs,
                color: "#95a5a6",
                markers: false,
            },
        ],
    )
}

#[derive(Serialize)]
struct ScanSummary {
    fitted_slope: f64,
    implied_s: f64,
    s_linear: f64,
    points: usize,
    truncated: usize,
    folds: usize,
}

fn scan_summary(scan: &ShiftScanResult, s_linear: f64) -> ScanSummary {
    ScanSummary {
        fitted_slope: scan.fitted_slope,
        implied_s: scan.implied_s,
        s_linear,
        points: scan.points.len(),
        truncated: scan.truncated,
        folds: scan.points.iter().filter(|p| p.fold).count(),
    }
}

fn cmd_shift_scan(cfg: &ScenarioConfig, out: &Output) -> Result<RunReport> {
    let resolved = config::resolve(cfg, Purpose::ShiftScan)?;
    let grid = config::shift_grid(&cfg.shift)?;
    let scan = sensitivity::scan_shift(&resolved.cavity, &resolved.medium, &grid)?;
    let s_linear = center_sensitivity(&resolved.cavity, &resolved.medium)?;
    let csv = scan_csv(
        &scan,
        &[("fitted_slope", scan.fitted_slope), ("implied_S", scan.implied_s)],
    );
    let mut files = Vec::new();
    out.write(".csv", &csv, &mut files)?;
    if out.plot {
        out.write(".svg", &scan_plot("Resonance shift", &scan, s_linear), &mut files)?;
    }
    let summary = scan_summary(&scan, s_linear);
    let mut text = String::new();
    let _ = writeln!(text, "fitted_slope = {}", fmt_value(summary.fitted_slope));
    let _ = writeln!(text, "implied_S = {}", fmt_value(summary.implied_s));
    let _ = writeln!(text, "S_linear = {}", fmt_value(s_linear));
    if summary.truncated > 0 {
        let _ = writeln!(text, "truncated_points = {}", summary.truncated);
    }
    out.metadata(&resolved, summary, &mut files)?;
    Ok(RunReport { files, text })
}

fn center_sensitivity(cavity: &CavityConfig, medium: &MediumSpec) -> Result<f64> {
    Ok(sensitivity::sensitivity_factor(medium.group_index()?, cavity.ell_over_l()))
}

#[derive(Serialize)]
struct CadSummary {
    #[serde(flatten)]
    scan: ScanSummary,
    center_group_index: f64,
    linear_model_diverges: bool,
    smallest_dw0_mhz: f64,
    enhancement_ratio: f64,
    linewidth_ratio: f64,
}

/// Ratio `dw0'/dw0` at the grid point of smallest nonzero magnitude,
/// preferring the positive side.
pub fn enhancement_at_smallest(scan: &ShiftScanResult) -> Option<(f64, f64)> {
    scan.points
        .iter()
        .filter(|p| p.dw0 != 0.0)
        .min_by(|a, b| a.dw0.abs().total_cmp(&b.dw0.abs()).then(b.dw0.total_cmp(&a.dw0)))
        .map(|p| (p.dw0, p.dw0_prime / p.dw0))
}

fn cmd_cad_scan(cfg: &ScenarioConfig, out: &Output) -> Result<RunReport> {
    let resolved = config::resolve(cfg, Purpose::CadScan)?;
    debug_assert_eq!(resolved.medium.kind, MediumKind::RamanGainDual);
    let grid = config::cad_grid(&cfg.cad)?;
    let (cavity, medium) = (&resolved.cavity, &resolved.medium);
    let scan = sensitivity::cad_enhancement_scan(cavity, medium, &grid)?;
    let n_g = medium.group_index()?;
    let s_linear = sensitivity::sensitivity_factor(n_g, cavity.ell_over_l());
    let diverges = sensitivity::shift_linear(n_g, cavity.ell_over_l(), 1.0).is_err();
    let (smallest, ratio) = enhancement_at_smallest(&scan).unwrap_or((f64::NAN, f64::NAN));
    let linewidth_ratio = match cavity::linewidth_numeric(cavity, medium) {
        Ok(w) => w / cavity.vacuum_linewidth(),
        Err(e) => {
            log::warn!("loaded linewidth unavailable: {e}");
            f64::NAN
        }
    };

    let csv = scan_csv(
        &scan,
        &[
            ("fitted_slope", scan.fitted_slope),
            ("implied_S", scan.implied_s),
            ("enhancement_ratio", ratio),
            ("linewidth_ratio", linewidth_ratio),
        ],
    );
    let mut files = Vec::new();
    out.write(".csv", &csv, &mut files)?;
    if out.plot {
        out.write(".svg", &scan_plot("Shift near critically anomalous dispersion", &scan, s_linear), &mut files)?;
    }
    let summary = CadSummary {
        scan: scan_summary(&scan, s_linear),
        center_group_index: n_g,
        linear_model_diverges: diverges,
        smallest_dw0_mhz: rad_to_mhz(smallest),
        enhancement_ratio: ratio,
        linewidth_ratio,
    };
    let mut text = String::new();
    let _ = writeln!(text, "center_group_index = {}", fmt_value(n_g));
    let _ = writeln!(text, "peak_offset_MHz = {}", fmt_value(rad_to_mhz(medium.peak_offset)));
    let _ = writeln!(text, "linear_model_diverges = {diverges}");
    let _ = writeln!(text, "enhancement_ratio = {}", fmt_value(ratio));
    let _ = writeln!(text, "linewidth_ratio = {}", fmt_value(linewidth_ratio));
    let _ = writeln!(text, "implied_S = {}", fmt_value(scan.implied_s));
    out.metadata(&resolved, summary, &mut files)?;
    Ok(RunReport { files, text })
}

#[derive(Serialize)]
struct Achieved {
    eit_linewidth_mhz: f64,
    group_index: f64,
}

#[derive(Serialize)]
struct CalibrationOutput {
    run: RunInfo,
    medium: MediumReport,
    achieved: Achieved,
}

fn cmd_calibrate(cfg: &ScenarioConfig, out: &Output) -> Result<RunReport> {
    let resolved = config::resolve(cfg, Purpose::Calibrate)?;
    let medium = &resolved.medium;
    let doc = CalibrationOutput {
        run: RunInfo {
            defaults: resolved.defaults.clone(),
            ..out.run.clone()
        },
        medium: MediumReport::new(medium),
        achieved: Achieved {
            eit_linewidth_mhz: rad_to_mhz(medium.transparency_width()?),
            group_index: medium.group_index()?,
        },
    };
    let text = toml::to_string(&doc).map_err(|e| Error::Io(format!("calibration serialization: {e}")))?;
    let mut files = Vec::new();
    out.write(".toml", &text, &mut files)?;
    Ok(RunReport { files, text })
}
