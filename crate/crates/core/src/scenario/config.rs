//! Scenario configuration files.
//!
//! User-facing frequencies and rates are ordinary frequencies in MHz (rates
//! are given as rate / 2 pi) and lengths are in cm. Both are converted to
//! rad/s and m here and nowhere else.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cavity::{self, CavityConfig};
use crate::error::{Error, Result};
use crate::media::{self, EitCalibration, MediumKind, MediumSpec};
use crate::{mhz_to_rad, rad_to_mhz};

pub const DEFAULT_LENGTH_CM: f64 = 100.0;
pub const DEFAULT_MEDIUM_LENGTH_CM: f64 = 10.0;
pub const DEFAULT_FINESSE: f64 = 100.0;
pub const DEFAULT_LOCK_MHZ: f64 = 384_230_000.0;
pub const DEFAULT_EIT_LINEWIDTH_MHZ: f64 = 1.0;
pub const DEFAULT_TARGET_NG: f64 = 50.0;
pub const DEFAULT_GAMMA_OPT_MHZ: f64 = 20.0;
pub const DEFAULT_GAMMA_GROUND_MHZ: f64 = 0.001;
pub const DEFAULT_RAMAN_CHI0: f64 = 3e-9;
pub const DEFAULT_RAMAN_WIDTH_MHZ: f64 = 0.2;
pub const DEFAULT_CAD_TARGET_NG: f64 = 0.0;
pub const DEFAULT_SPECTRUM_SAMPLES: i64 = 2001;
pub const DEFAULT_SHIFT_MAX_MHZ: f64 = 4.0;
pub const DEFAULT_SHIFT_STEP_MHZ: f64 = 0.5;
pub const DEFAULT_CAD_GRID_KHZ: [f64; 7] = [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0];

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub cavity: CavitySection,
    #[serde(default)]
    pub medium: MediumSection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub shift: ShiftSection,
    #[serde(default)]
    pub cad: CadSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    pub length_cm: Option<f64>,
    pub medium_length_cm: Option<f64>,
    pub finesse: Option<f64>,
    pub reflectivity: Option<f64>,
    pub excess_loss: Option<f64>,
    /// Linewidth of the cavity with a transparent medium; sets `excess_loss`.
    pub loaded_linewidth_mhz: Option<f64>,
    pub lock_frequency_mhz: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumSection {
    pub kind: Option<MediumKind>,
    pub chi0: Option<f64>,
    pub gamma_opt_mhz: Option<f64>,
    pub gamma_ground_mhz: Option<f64>,
    pub rabi_pump_mhz: Option<f64>,
    pub peak_offset_mhz: Option<f64>,
    pub slope_s: Option<f64>,
    pub group_index: Option<f64>,
    pub eit_linewidth_mhz: Option<f64>,
    pub target_ng: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSection {
    pub detuning_min_mhz: Option<f64>,
    pub detuning_max_mhz: Option<f64>,
    pub samples: Option<i64>,
    pub empty_shift_mhz: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShiftSection {
    pub grid_mhz: Option<Vec<f64>>,
    pub max_mhz: Option<f64>,
    pub step_mhz: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CadSection {
    pub target_ng: Option<f64>,
    pub grid_mhz: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<String>,
    /// File-name prefix; outputs are named `<stem>_<command>.*`.
    pub stem: Option<String>,
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }
}

/// Which scenario a configuration is being resolved for; selects
/// command-specific defaults.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Purpose {
    Spectrum,
    ShiftScan,
    CadScan,
    Calibrate,
}

/// Records every field that was filled from a default.
#[derive(Debug, Default)]
struct Defaults(Vec<String>);

impl Defaults {
    fn take<T: std::fmt::Debug + Copy>(&mut self, key: &str, value: Option<T>, default: T) -> T {
        match value {
            Some(v) => v,
            None => {
                self.0.push(format!("{key} = {default:?}"));
                default
            }
        }
    }
}

/// Physical parameters after defaults, calibration and tuning.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub cavity: CavityConfig,
    pub medium: MediumSpec,
    pub defaults: Vec<String>,
}

pub fn resolve(cfg: &ScenarioConfig, purpose: Purpose) -> Result<Resolved> {
    // Out-of-range parameters in a file are configuration errors, not
    // physics failures.
    let as_config = |e: Error| match e {
        Error::ParameterDomain { field, reason } => Error::Config(format!("{field}: {reason}")),
        other => other,
    };
    let mut defaults = Defaults::default();
    let cavity = resolve_cavity(&cfg.cavity, purpose, &mut defaults).map_err(as_config)?;
    let medium = resolve_medium(cfg, purpose, cavity.omega_lock(), &mut defaults).map_err(as_config)?;
    Ok(Resolved {
        cavity,
        medium,
        defaults: defaults.0,
    })
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Config(format!("{key} must be > 0, got {v}")))
    }
}

fn resolve_cavity(sec: &CavitySection, purpose: Purpose, d: &mut Defaults) -> Result<CavityConfig> {
    let length_cm = positive("cavity.length_cm", d.take("cavity.length_cm", sec.length_cm, DEFAULT_LENGTH_CM))?;
    // The critically anomalous point needs the medium to fill the ring.
    let default_medium = if purpose == Purpose::CadScan {
        length_cm
    } else {
        DEFAULT_MEDIUM_LENGTH_CM
    };
    let medium_cm = d.take("cavity.medium_length_cm", sec.medium_length_cm, default_medium);
    let length = length_cm / 100.0;
    let medium_length = medium_cm / 100.0;

    let reflectivity = match (sec.finesse, sec.reflectivity) {
        (Some(_), Some(_)) => {
            return Err(Error::Config("give either cavity.finesse or cavity.reflectivity, not both".into()))
        }
        (None, Some(r)) => r,
        (f, None) => cavity::reflectivity_from_finesse(d.take("cavity.finesse", f, DEFAULT_FINESSE))
            .map_err(|e| Error::Config(e.to_string()))?,
    };
    let excess_loss = match (sec.excess_loss, sec.loaded_linewidth_mhz) {
        (Some(_), Some(_)) => {
            return Err(Error::Config(
                "give either cavity.excess_loss or cavity.loaded_linewidth_mhz, not both".into(),
            ))
        }
        (Some(loss), None) => loss,
        (None, Some(w)) => cavity::excess_loss_for_linewidth(
            reflectivity,
            mhz_to_rad(positive("cavity.loaded_linewidth_mhz", w)?),
            length,
        )
        .map_err(|e| Error::Config(e.to_string()))?,
        (None, None) => d.take("cavity.excess_loss", None, 0.0),
    };
    let lock = positive(
        "cavity.lock_frequency_mhz",
        d.take("cavity.lock_frequency_mhz", sec.lock_frequency_mhz, DEFAULT_LOCK_MHZ),
    )?;
    CavityConfig::new(length, medium_length, reflectivity, excess_loss, mhz_to_rad(lock))
}

fn resolve_medium(cfg: &ScenarioConfig, purpose: Purpose, center: f64, d: &mut Defaults) -> Result<MediumSpec> {
    let sec = &cfg.medium;
    let default_kind = match purpose {
        Purpose::Spectrum | Purpose::ShiftScan => MediumKind::Vacuum,
        Purpose::CadScan => MediumKind::RamanGainDual,
        Purpose::Calibrate => MediumKind::EitLambda,
    };
    let kind = d.take("medium.kind", sec.kind, default_kind);
    if purpose == Purpose::CadScan && kind != MediumKind::RamanGainDual {
        return Err(Error::Config("cad-scan needs medium.kind = \"raman-gain-dual\"".into()));
    }
    if purpose == Purpose::Calibrate && kind != MediumKind::EitLambda {
        return Err(Error::Config("calibrate needs medium.kind = \"eit-lambda\"".into()));
    }
    let spec = match kind {
        MediumKind::Vacuum => MediumSpec::vacuum(center),
        MediumKind::LinearToy => match (sec.slope_s, sec.group_index) {
            (Some(k), None) => MediumSpec::linear_toy(center, k),
            (None, Some(ng)) => MediumSpec::linear_with_group_index(center, ng),
            _ => {
                return Err(Error::Config(
                    "linear-toy needs exactly one of medium.slope_s or medium.group_index".into(),
                ))
            }
        },
        MediumKind::EitLambda => {
            let gamma_opt = mhz_to_rad(d.take("medium.gamma_opt_mhz", sec.gamma_opt_mhz, DEFAULT_GAMMA_OPT_MHZ));
            let gamma_ground =
                mhz_to_rad(d.take("medium.gamma_ground_mhz", sec.gamma_ground_mhz, DEFAULT_GAMMA_GROUND_MHZ));
            match (sec.chi0, sec.rabi_pump_mhz, purpose) {
                (Some(chi0), Some(rabi), p) if p != Purpose::Calibrate => {
                    MediumSpec::eit(center, chi0, gamma_opt, gamma_ground, mhz_to_rad(rabi))
                }
                (None, None, _) | (_, _, Purpose::Calibrate) => {
                    let width = d.take("medium.eit_linewidth_mhz", sec.eit_linewidth_mhz, DEFAULT_EIT_LINEWIDTH_MHZ);
                    let target = d.take("medium.target_ng", sec.target_ng, DEFAULT_TARGET_NG);
                    EitCalibration {
                        gamma_opt,
                        gamma_ground,
                    }
                    .calibrate(mhz_to_rad(positive("medium.eit_linewidth_mhz", width)?), target, center)?
                }
                _ => {
                    return Err(Error::Config(
                        "eit-lambda needs both medium.chi0 and medium.rabi_pump_mhz, or neither (calibrated)".into(),
                    ))
                }
            }
        }
        MediumKind::RamanGainSingle => MediumSpec::raman_single(
            center,
            d.take("medium.chi0", sec.chi0, DEFAULT_RAMAN_CHI0),
            mhz_to_rad(d.take("medium.gamma_opt_mhz", sec.gamma_opt_mhz, DEFAULT_RAMAN_WIDTH_MHZ)),
        ),
        MediumKind::RamanGainDual => {
            let chi0 = d.take("medium.chi0", sec.chi0, DEFAULT_RAMAN_CHI0);
            let width = mhz_to_rad(d.take("medium.gamma_opt_mhz", sec.gamma_opt_mhz, DEFAULT_RAMAN_WIDTH_MHZ));
            match sec.peak_offset_mhz {
                Some(offset) => MediumSpec::raman_dual(center, chi0, width, mhz_to_rad(offset)),
                None => {
                    let target = d.take("cad.target_ng", cfg.cad.target_ng, DEFAULT_CAD_TARGET_NG);
                    media::tune_dual_peak_offset(center, chi0, width, target)?
                }
            }
        }
    };
    spec.validate()?;
    Ok(spec)
}

/// Resolved spectrum window: `None` bounds mean an automatic window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumPlan {
    pub window: Option<(f64, f64)>,
    pub samples: usize,
    pub empty_shift: f64,
}

pub fn spectrum_plan(sec: &SpectrumSection) -> Result<SpectrumPlan> {
    let samples = sec.samples.unwrap_or(DEFAULT_SPECTRUM_SAMPLES);
    if samples < 16 {
        return Err(Error::Config(format!("spectrum.samples must be >= 16, got {samples}")));
    }
    let window = match (sec.detuning_min_mhz, sec.detuning_max_mhz) {
        (Some(lo), Some(hi)) if lo < hi => Some((mhz_to_rad(lo), mhz_to_rad(hi))),
        (Some(lo), Some(hi)) => {
            return Err(Error::Config(format!(
                "spectrum.detuning_min_mhz ({lo}) must be below detuning_max_mhz ({hi})"
            )))
        }
        (None, None) => None,
        _ => {
            return Err(Error::Config(
                "give both spectrum.detuning_min_mhz and detuning_max_mhz, or neither".into(),
            ))
        }
    };
    Ok(SpectrumPlan {
        window,
        samples: samples as usize,
        empty_shift: mhz_to_rad(sec.empty_shift_mhz.unwrap_or(0.0)),
    })
}

/// Shift grid in rad/s: explicit values, or `±step, ±2 step, ... ±max` plus 0.
pub fn shift_grid(sec: &ShiftSection) -> Result<Vec<f64>> {
    if let Some(grid) = &sec.grid_mhz {
        return checked_grid("shift.grid_mhz", grid);
    }
    let max = positive("shift.max_mhz", sec.max_mhz.unwrap_or(DEFAULT_SHIFT_MAX_MHZ))?;
    let step = positive("shift.step_mhz", sec.step_mhz.unwrap_or(DEFAULT_SHIFT_STEP_MHZ))?;
    let count = (max / step + 1e-9).floor() as i64;
    let grid: Vec<f64> = (-count..=count).map(|k| k as f64 * step).collect();
    checked_grid("shift grid", &grid)
}

pub fn cad_grid(sec: &CadSection) -> Result<Vec<f64>> {
    match &sec.grid_mhz {
        Some(grid) => checked_grid("cad.grid_mhz", grid),
        None => {
            let grid: Vec<f64> = DEFAULT_CAD_GRID_KHZ
                .iter()
                .flat_map(|k| [-k * 1e-3, k * 1e-3])
                .collect();
            checked_grid("cad grid", &grid)
        }
    }
}

fn checked_grid(key: &str, grid: &[f64]) -> Result<Vec<f64>> {
    if grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config(format!("{key} must contain finite values")));
    }
    if !grid.iter().any(|&v| v != 0.0) {
        return Err(Error::Config(format!("{key} needs at least one nonzero value")));
    }
    let mut out: Vec<f64> = grid.iter().map(|&v| mhz_to_rad(v)).collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    Ok(out)
}

/// Resolved parameters in configuration units, for metadata sidecars.
#[derive(Debug, Clone, Serialize)]
pub struct CavityReport {
    pub length_cm: f64,
    pub medium_length_cm: f64,
    pub reflectivity: f64,
    pub excess_loss: f64,
    pub lock_frequency_mhz: f64,
    pub mode_n: u64,
    pub transparent_linewidth_mhz: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MediumReport {
    pub kind: MediumKind,
    pub chi0: f64,
    pub gamma_opt_mhz: f64,
    pub gamma_ground_mhz: f64,
    pub rabi_pump_mhz: f64,
    pub peak_offset_mhz: f64,
    pub slope_s: f64,
}

impl CavityReport {
    pub fn new(cfg: &CavityConfig) -> Self {
        CavityReport {
            length_cm: cfg.length() * 100.0,
            medium_length_cm: cfg.medium_length() * 100.0,
            reflectivity: cfg.reflectivity(),
            excess_loss: cfg.excess_loss(),
            lock_frequency_mhz: rad_to_mhz(cfg.omega_lock()),
            mode_n: cfg.mode_n(),
            transparent_linewidth_mhz: rad_to_mhz(cfg.vacuum_linewidth()),
        }
    }
}

impl MediumReport {
    pub fn new(m: &MediumSpec) -> Self {
        MediumReport {
            kind: m.kind,
            chi0: m.chi0,
            gamma_opt_mhz: rad_to_mhz(m.gamma_opt),
            gamma_ground_mhz: rad_to_mhz(m.gamma_ground),
            rabi_pump_mhz: rad_to_mhz(m.rabi_pump),
            peak_offset_mhz: rad_to_mhz(m.peak_offset),
            slope_s: m.slope,
        }
    }
}
