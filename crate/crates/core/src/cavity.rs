//! Ring cavity loaded with a dispersive medium: round-trip phase,
//! transmission, resonance location and linewidth.
//!
//! Phases are always relative to the lock point: `2 pi N` with `N ~ 1e6`
//! would eat the mantissa, so it is never formed.

use std::f64::consts::{PI, TAU};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::media::MediumSpec;
use crate::numerics;
use crate::sensitivity;
use crate::SPEED_OF_LIGHT;

/// Samples used by automatic linewidth extraction.
pub const AUTO_SAMPLES: usize = 4001;
/// Window doublings before automatic extraction gives up.
pub const MAX_WINDOW_DOUBLINGS: usize = 10;

/// Geometry and mirror parameters of the ring.
///
/// `omega_lock` is always `2 pi c N / L` for the stored mode number, so the
/// empty cavity is exactly resonant there. `empty_shift` moves the empty
/// resonance away from the lock point (a length change, see
/// [`sensitivity::length_to_dw0`]); it is zero for a cavity sitting on the
/// lock point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CavityConfig {
    length: f64,
    medium_length: f64,
    reflectivity: f64,
    excess_loss: f64,
    omega_lock: f64,
    mode_n: u64,
    empty_shift: f64,
}

impl CavityConfig {
    /// Builds a cavity locked to the longitudinal mode nearest `omega_target`.
    pub fn new(
        length: f64,
        medium_length: f64,
        reflectivity: f64,
        excess_loss: f64,
        omega_target: f64,
    ) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::domain("length_L", format!("must be > 0, got {length}")));
        }
        if !(omega_target > 0.0 && omega_target.is_finite()) {
            return Err(Error::domain("omega_lock", format!("must be > 0, got {omega_target}")));
        }
        let n = (omega_target * length / (TAU * SPEED_OF_LIGHT)).round();
        if n < 1.0 {
            return Err(Error::domain("mode_N", "lock frequency below the fundamental mode"));
        }
        Self::from_mode(length, medium_length, reflectivity, excess_loss, n as u64)
    }

    /// Builds a cavity locked to mode number `mode_n`.
    pub fn from_mode(
        length: f64,
        medium_length: f64,
        reflectivity: f64,
        excess_loss: f64,
        mode_n: u64,
    ) -> Result<Self> {
        let cfg = CavityConfig {
            length,
            medium_length,
            reflectivity,
            excess_loss,
            omega_lock: TAU * SPEED_OF_LIGHT * mode_n as f64 / length,
            mode_n,
            empty_shift: 0.0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(Error::domain("length_L", format!("must be > 0, got {}", self.length)));
        }
        if !(self.medium_length >= 0.0 && self.medium_length <= self.length) {
            return Err(Error::domain(
                "length_medium",
                format!("must lie in [0, L], got {}", self.medium_length),
            ));
        }
        if !(self.reflectivity > 0.0 && self.reflectivity < 1.0) {
            return Err(Error::domain(
                "reflectivity_R",
                format!("must lie in (0, 1), got {}", self.reflectivity),
            ));
        }
        if !(self.excess_loss >= 0.0 && self.excess_loss < 1.0) {
            return Err(Error::domain(
                "excess_loss",
                format!("must lie in [0, 1), got {}", self.excess_loss),
            ));
        }
        if self.mode_n == 0 {
            return Err(Error::domain("mode_N", "must be > 0"));
        }
        if !self.empty_shift.is_finite() {
            return Err(Error::domain("empty_shift", "must be finite"));
        }
        Ok(())
    }

    /// Same cavity with its empty resonance moved to `omega_lock + dw0`.
    pub fn with_empty_shift(self, dw0: f64) -> Result<Self> {
        let cfg = CavityConfig {
            empty_shift: dw0,
            ..self
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_excess_loss(self, excess_loss: f64) -> Result<Self> {
        let cfg = CavityConfig { excess_loss, ..self };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn medium_length(&self) -> f64 {
        self.medium_length
    }

    pub fn ell_over_l(&self) -> f64 {
        self.medium_length / self.length
    }

    pub fn reflectivity(&self) -> f64 {
        self.reflectivity
    }

    pub fn excess_loss(&self) -> f64 {
        self.excess_loss
    }

    pub fn omega_lock(&self) -> f64 {
        self.omega_lock
    }

    pub fn mode_n(&self) -> u64 {
        self.mode_n
    }

    pub fn empty_shift(&self) -> f64 {
        self.empty_shift
    }

    /// Free spectral range of the empty ring, rad/s.
    pub fn fsr(&self) -> f64 {
        TAU * SPEED_OF_LIGHT / self.length
    }

    /// Round-trip field amplitude with a transparent medium.
    pub fn vacuum_amplitude(&self) -> f64 {
        self.reflectivity * (1.0 - self.excess_loss).sqrt()
    }

    /// Analytic FWHM (rad/s) of the cavity with a transparent medium.
    pub fn vacuum_linewidth(&self) -> f64 {
        airy_linewidth(self.vacuum_amplitude(), self.length)
    }
}

/// Mirror reflectivity giving `finesse` for a lossless empty ring,
/// inverting `finesse = pi sqrt(R) / (1 - R)`.
pub fn reflectivity_from_finesse(finesse: f64) -> Result<f64> {
    if !(finesse > 0.0 && finesse.is_finite()) {
        return Err(Error::domain("finesse", format!("must be > 0, got {finesse}")));
    }
    let root = (-PI + (PI * PI + 4.0 * finesse * finesse).sqrt()) / (2.0 * finesse);
    Ok(root * root)
}

/// Round-trip amplitude whose Airy peak has full width `fwhm` (rad/s) in a
/// ring of length `length`.
pub fn amplitude_for_linewidth(fwhm: f64, length: f64) -> Result<f64> {
    let s = (fwhm * length / (4.0 * SPEED_OF_LIGHT)).sin();
    if !(fwhm > 0.0) || fwhm * length / (4.0 * SPEED_OF_LIGHT) >= PI / 2.0 {
        return Err(Error::domain("linewidth", format!("no amplitude gives FWHM {fwhm:e} rad/s")));
    }
    let y = -s + (s * s + 1.0).sqrt();
    Ok(y * y)
}

/// Excess round-trip loss that broadens the empty cavity to `fwhm`.
pub fn excess_loss_for_linewidth(reflectivity: f64, fwhm: f64, length: f64) -> Result<f64> {
    let a = amplitude_for_linewidth(fwhm, length)?;
    if a > reflectivity {
        return Err(Error::domain(
            "loaded_linewidth",
            "narrower than the mirror-limited linewidth",
        ));
    }
    let ratio = a / reflectivity;
    Ok(1.0 - ratio * ratio)
}

/// FWHM (rad/s) of `1 / (1 + F sin^2(omega L / 2c))` with `F = 4A/(1-A)^2`.
pub fn airy_linewidth(amplitude: f64, length: f64) -> f64 {
    let arg = (1.0 - amplitude) / (2.0 * amplitude.sqrt());
    4.0 * SPEED_OF_LIGHT / length * arg.asin()
}

fn medium_delta(cfg: &CavityConfig, medium: &MediumSpec, dw: f64) -> f64 {
    dw + (cfg.omega_lock - medium.center)
}

/// Round-trip phase at `omega_lock + dw` minus `2 pi N`:
/// `dw (L - l)/c + [(w0 + dw) n(w0 + dw) - w0 n(w0)] l/c - dw0 L/c`, the last
/// term being the empty-resonance offset.
pub fn round_trip_phase_delta(cfg: &CavityConfig, medium: &MediumSpec, dw: f64) -> Result<f64> {
    medium.validate()?;
    let c = SPEED_OF_LIGHT;
    let here = medium.index_minus_one(medium_delta(cfg, medium, dw))?;
    let lock = medium.index_minus_one(medium_delta(cfg, medium, 0.0))?;
    // dw (L - l) + dw l folded into dw L so the transparent case is exact.
    let excess = cfg.omega_lock * (here - lock) + dw * here;
    Ok((dw * cfg.length + excess * cfg.medium_length - cfg.empty_shift * cfg.length) / c)
}

/// Round-trip field amplitude `R rho sqrt(1 - loss)` at `omega_lock + dw`.
pub fn round_trip_amplitude(cfg: &CavityConfig, medium: &MediumSpec, dw: f64) -> Result<f64> {
    let alpha = medium.alpha(medium_delta(cfg, medium, dw))?;
    let rho = (-alpha * cfg.medium_length / 2.0).exp();
    Ok(cfg.vacuum_amplitude() * rho)
}

/// Intensity transmission at `omega_lock + dw`, normalized to 1 at the
/// resonance of the transparent-medium cavity.
///
/// `T = (A/A_v) ((1 - A_v)/(1 - A))^2 / (1 + F sin^2(dphi/2))` with the
/// round-trip amplitude `A`, its transparent-medium value `A_v` and
/// `F = 4A/(1-A)^2`. The prefactor is the resonant transmission of a ring
/// whose internal amplitude changes from `A_v` to `A`: absorption lowers the
/// peak and gain raises it above 1.
pub fn transmission(cfg: &CavityConfig, medium: &MediumSpec, dw: f64) -> Result<f64> {
    let a = round_trip_amplitude(cfg, medium, dw)?;
    if a >= 1.0 {
        return Err(Error::AboveThreshold { amplitude: a });
    }
    let phase = round_trip_phase_delta(cfg, medium, dw)?;
    Ok(airy(a, cfg.vacuum_amplitude(), phase))
}

fn airy(a: f64, a_vac: f64, phase: f64) -> f64 {
    let coefficient = 4.0 * a / ((1.0 - a) * (1.0 - a));
    let peak = a / a_vac * ((1.0 - a_vac) / (1.0 - a)).powi(2);
    let s = (0.5 * phase).sin();
    peak / (1.0 + coefficient * s * s)
}

/// Sampled transmission with the extracted resonance.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub detunings: Vec<f64>,
    pub transmission: Vec<f64>,
    pub peak_center: f64,
    pub peak_height: f64,
    pub fwhm: f64,
}

/// Uniformly samples the transmission on `[dw_min, dw_max]` and extracts the
/// single resonance inside the window.
pub fn spectrum(
    cfg: &CavityConfig,
    medium: &MediumSpec,
    dw_min: f64,
    dw_max: f64,
    samples: usize,
) -> Result<SpectrumResult> {
    if samples < 16 {
        return Err(Error::domain("samples", format!("need at least 16, got {samples}")));
    }
    if !(dw_min < dw_max) || !dw_min.is_finite() || !dw_max.is_finite() {
        return Err(Error::domain("window", format!("need dw_min < dw_max, got [{dw_min}, {dw_max}]")));
    }
    let step = (dw_max - dw_min) / (samples - 1) as f64;
    let detunings: Vec<f64> = (0..samples)
        .map(|k| if k + 1 == samples { dw_max } else { dw_min + step * k as f64 })
        .collect();
    let transmission = detunings
        .iter()
        .map(|&dw| self::transmission(cfg, medium, dw))
        .collect::<Result<Vec<f64>>>()?;
    let peak = numerics::extract_peak(&detunings, &transmission).map_err(|e| match e {
        Error::Extraction { side, reason } => Error::WindowTooNarrow(format!("{side} side: {reason}")),
        other => other,
    })?;
    Ok(SpectrumResult {
        detunings,
        transmission,
        peak_center: peak.center,
        peak_height: peak.height,
        fwhm: peak.fwhm,
    })
}

/// Loaded-to-transparent linewidth ratio from the closed form
/// `asin[(1 - A)/(2 sqrt A)] / asin[(1 - A_v)/(2 sqrt A_v)] / S`, with
/// `A = R rho(w0) sqrt(1 - loss)`, `A_v` the same without the medium and
/// `S = 1 + (n_g - 1) l/L`.
pub fn linewidth_ratio_analytic(cfg: &CavityConfig, medium: &MediumSpec) -> Result<f64> {
    let a = round_trip_amplitude(cfg, medium, 0.0)?;
    if a >= 1.0 {
        return Err(Error::AboveThreshold { amplitude: a });
    }
    let a_vac = cfg.vacuum_amplitude();
    let arg = |amp: f64| (1.0 - amp) / (2.0 * amp.sqrt());
    for (label, amp) in [("loaded", a), ("empty", a_vac)] {
        let x = arg(amp);
        if !(-1.0..=1.0).contains(&x) {
            return Err(Error::FormulaDomain(format!(
                "{label} arcsine argument {x:.6} outside [-1, 1]"
            )));
        }
    }
    let n_g = medium.local_group_index(medium_delta(cfg, medium, 0.0))?;
    let s = sensitivity::sensitivity_factor(n_g, cfg.ell_over_l());
    if s.abs() < sensitivity::CAD_TOLERANCE {
        return Err(Error::CadDivergence { factor: s });
    }
    Ok(arg(a).asin() / arg(a_vac).asin() / s)
}

/// Closed-form loaded linewidth (rad/s); the magnitude of the ratio times the
/// transparent-medium linewidth.
pub fn linewidth_analytic(cfg: &CavityConfig, medium: &MediumSpec) -> Result<f64> {
    Ok(linewidth_ratio_analytic(cfg, medium)?.abs() * cfg.vacuum_linewidth())
}

/// Samples a window around `center` that is automatically sized to contain
/// the whole resonance: starting from three estimated linewidths either side,
/// it doubles up to [`MAX_WINDOW_DOUBLINGS`] times, capped at half a free
/// spectral range. A resonance much narrower than the window is resampled
/// once on a tighter window.
pub fn auto_spectrum(cfg: &CavityConfig, medium: &MediumSpec, center: f64) -> Result<SpectrumResult> {
    let limit = 0.5 * cfg.fsr();
    let estimate = match linewidth_analytic(cfg, medium) {
        Ok(w) if w.is_finite() && w > 0.0 => w,
        _ => cfg.vacuum_linewidth(),
    };
    let mut half = (3.0 * estimate).min(limit);
    let mut last_err = None;
    for _ in 0..=MAX_WINDOW_DOUBLINGS {
        match spectrum(cfg, medium, center - half, center + half, AUTO_SAMPLES) {
            Ok(result) => {
                let spacing = 2.0 * half / (AUTO_SAMPLES - 1) as f64;
                if result.fwhm < 40.0 * spacing {
                    let tight = (3.0 * result.fwhm).min(limit);
                    let c = result.peak_center;
                    if let Ok(refined) = spectrum(cfg, medium, c - tight, c + tight, AUTO_SAMPLES) {
                        return Ok(refined);
                    }
                }
                return Ok(result);
            }
            Err(e @ Error::WindowTooNarrow(_)) => last_err = Some(e),
            Err(e) => return Err(e),
        }
        if half >= limit {
            break;
        }
        half = (2.0 * half).min(limit);
    }
    Err(last_err.unwrap_or_else(|| Error::WindowTooNarrow("no resonance found".into())))
}

/// Numerically extracted FWHM (rad/s) of the resonance nearest the lock point.
pub fn linewidth_numeric(cfg: &CavityConfig, medium: &MediumSpec) -> Result<f64> {
    let guess = if cfg.empty_shift == 0.0 {
        0.0
    } else {
        let n_g = medium.local_group_index(medium_delta(cfg, medium, 0.0))?;
        sensitivity::shift_linear(n_g, cfg.ell_over_l(), cfg.empty_shift).unwrap_or(0.0)
    };
    Ok(auto_spectrum(cfg, medium, guess)?.fwhm)
}

#[cfg(test)]
mod tests {
    use super::*;

    const W0: f64 = TAU * 384.23e12;

    fn empty() -> CavityConfig {
        let r = reflectivity_from_finesse(100.0).unwrap();
        CavityConfig::new(1.0, 0.1, r, 0.0, W0).unwrap()
    }

    #[test]
    fn finesse_100_gives_three_megahertz() {
        let cfg = empty();
        assert!((cfg.reflectivity() - 0.969_073_68).abs() < 1e-8);
        let width_mhz = cfg.vacuum_linewidth() / TAU / 1e6;
        assert!((width_mhz - 2.998).abs() < 0.01, "{width_mhz}");
    }

    #[test]
    fn lock_point_is_an_exact_mode() {
        let cfg = empty();
        assert_eq!(cfg.mode_n(), (W0 / cfg.fsr()).round() as u64);
        let back = CavityConfig::from_mode(1.0, 0.1, cfg.reflectivity(), 0.0, cfg.mode_n()).unwrap();
        assert_eq!(back.omega_lock(), cfg.omega_lock());
    }

    #[test]
    fn vacuum_phase_and_peak() {
        let cfg = empty();
        let vac = MediumSpec::vacuum(cfg.omega_lock());
        assert_eq!(round_trip_phase_delta(&cfg, &vac, 0.0).unwrap(), 0.0);
        let dw = 1.234e7;
        assert_eq!(round_trip_phase_delta(&cfg, &vac, dw).unwrap(), dw * 1.0 / SPEED_OF_LIGHT);
        assert_eq!(transmission(&cfg, &vac, 0.0).unwrap(), 1.0);
        let a = cfg.reflectivity();
        let f = 4.0 * a / (1.0 - a).powi(2);
        let t_min = transmission(&cfg, &vac, 0.5 * cfg.fsr()).unwrap();
        assert!((t_min - 1.0 / (1.0 + f)).abs() < 1e-15);
    }

    #[test]
    fn loss_knob_reproduces_loaded_width() {
        let cfg = empty();
        let loss = excess_loss_for_linewidth(cfg.reflectivity(), TAU * 8e6, 1.0).unwrap();
        let loaded = cfg.with_excess_loss(loss).unwrap();
        assert!((loaded.vacuum_linewidth() / (TAU * 8e6) - 1.0).abs() < 1e-12);
        assert!(excess_loss_for_linewidth(cfg.reflectivity(), TAU * 1e6, 1.0).is_err());
    }

    #[test]
    fn invalid_geometry() {
        assert!(matches!(
            CavityConfig::new(1.0, 1.5, 0.9, 0.0, W0),
            Err(Error::ParameterDomain { field: "length_medium", .. })
        ));
        assert!(CavityConfig::new(1.0, 0.1, 1.0, 0.0, W0).is_err());
        assert!(CavityConfig::new(-1.0, 0.1, 0.9, 0.0, W0).is_err());
    }

    #[test]
    fn analytic_ratio_examples() {
        let cfg = empty();
        let vac = MediumSpec::vacuum(cfg.omega_lock());
        assert_eq!(linewidth_ratio_analytic(&cfg, &vac).unwrap(), 1.0);
        let toy = MediumSpec::linear_with_group_index(cfg.omega_lock(), 50.0);
        let r = linewidth_ratio_analytic(&cfg, &toy).unwrap();
        assert!((r - 1.0 / 5.9).abs() < 1e-12);
    }

    #[test]
    fn arcsine_domain_violation() {
        let cfg = CavityConfig::new(1.0, 0.1, 0.1, 0.0, W0).unwrap();
        let vac = MediumSpec::vacuum(cfg.omega_lock());
        assert!(matches!(linewidth_ratio_analytic(&cfg, &vac), Err(Error::FormulaDomain(_))));
    }

    #[test]
    fn above_threshold_rejected() {
        let cfg = empty();
        let gain = MediumSpec::raman_single(cfg.omega_lock(), 1e-6, TAU * 1e6);
        assert!(matches!(transmission(&cfg, &gain, 0.0), Err(Error::AboveThreshold { .. })));
    }

    #[test]
    fn numeric_vacuum_linewidth() {
        let cfg = empty();
        let vac = MediumSpec::vacuum(cfg.omega_lock());
        let w = linewidth_numeric(&cfg, &vac).unwrap();
        assert!((w / cfg.vacuum_linewidth() - 1.0).abs() < 1e-4);
    }

    #[test]
    fn too_few_samples() {
        let cfg = empty();
        let vac = MediumSpec::vacuum(cfg.omega_lock());
        assert!(spectrum(&cfg, &vac, -1e7, 1e7, 15).is_err());
        assert!(matches!(
            spectrum(&cfg, &vac, 1e8, 2e8, 100),
            Err(Error::WindowTooNarrow(_))
        ));
    }
}
