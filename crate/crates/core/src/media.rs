//! Complex susceptibility models for the intra-cavity medium and the optical
//! quantities derived from them.
//!
//! All spectral arguments are detunings `delta = omega - center` in rad/s. The
//! absolute optical frequency only ever appears as the multiplicative factor
//! `omega = center + delta` in group-index formulas, so no quantity is formed
//! by subtracting two ~1e15 numbers.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{self, Bracket};
use crate::SPEED_OF_LIGHT;

/// Largest susceptibility amplitude accepted by the calibration search. Beyond
/// this the medium is no longer dilute.
pub const MAX_CHI0: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MediumKind {
    Vacuum,
    LinearToy,
    EitLambda,
    RamanGainSingle,
    RamanGainDual,
}

impl MediumKind {
    pub fn name(self) -> &'static str {
        match self {
            MediumKind::Vacuum => "vacuum",
            MediumKind::LinearToy => "linear-toy",
            MediumKind::EitLambda => "eit-lambda",
            MediumKind::RamanGainSingle => "raman-gain-single",
            MediumKind::RamanGainDual => "raman-gain-dual",
        }
    }
}

/// Parametric description of the medium. Fields not used by `kind` are
/// ignored.
///
/// * `EitLambda`: `chi0`, `gamma_opt` (optical coherence decay), `gamma_ground`
///   (ground-state decoherence), `rabi_pump`.
/// * `RamanGainSingle` / `RamanGainDual`: `chi0`, `gamma_opt` as the gain-line
///   width, and `peak_offset` (half separation of the two lines, dual only).
/// * `LinearToy`: `slope` = dn/domega in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MediumSpec {
    pub kind: MediumKind,
    pub chi0: f64,
    pub gamma_opt: f64,
    pub gamma_ground: f64,
    pub rabi_pump: f64,
    pub peak_offset: f64,
    pub slope: f64,
    pub center: f64,
}

/// Susceptibility and derived quantities at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalResponse {
    pub chi: Complex64,
    /// Refractive index `Re sqrt(1 + chi)`.
    pub n: f64,
    /// Intensity loss coefficient in 1/m; negative means gain.
    pub alpha: f64,
    /// Group index `1 + omega dn/domega`.
    pub n_g: f64,
}

/// Finite-difference group index together with a flag raised when the step
/// is not small against the narrowest spectral feature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdGroupIndex {
    pub value: f64,
    pub step_too_large: bool,
}

impl MediumSpec {
    fn blank(kind: MediumKind, center: f64) -> Self {
        MediumSpec {
            kind,
            chi0: 0.0,
            gamma_opt: 0.0,
            gamma_ground: 0.0,
            rabi_pump: 0.0,
            peak_offset: 0.0,
            slope: 0.0,
            center,
        }
    }

    pub fn vacuum(center: f64) -> Self {
        Self::blank(MediumKind::Vacuum, center)
    }

    pub fn linear_toy(center: f64, slope: f64) -> Self {
        MediumSpec {
            slope,
            ..Self::blank(MediumKind::LinearToy, center)
        }
    }

    /// Linear profile whose group index at `center` is `n_g`.
    pub fn linear_with_group_index(center: f64, n_g: f64) -> Self {
        Self::linear_toy(center, (n_g - 1.0) / center)
    }

    pub fn eit(center: f64, chi0: f64, gamma_opt: f64, gamma_ground: f64, rabi_pump: f64) -> Self {
        MediumSpec {
            chi0,
            gamma_opt,
            gamma_ground,
            rabi_pump,
            ..Self::blank(MediumKind::EitLambda, center)
        }
    }

    pub fn raman_single(center: f64, chi0: f64, gain_width: f64) -> Self {
        MediumSpec {
            chi0,
            gamma_opt: gain_width,
            ..Self::blank(MediumKind::RamanGainSingle, center)
        }
    }

    pub fn raman_dual(center: f64, chi0: f64, gain_width: f64, peak_offset: f64) -> Self {
        MediumSpec {
            chi0,
            gamma_opt: gain_width,
            peak_offset,
            ..Self::blank(MediumKind::RamanGainDual, center)
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn finite(field: &'static str, v: f64) -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::domain(field, format!("must be finite, got {v}")))
            }
        }
        fn positive(field: &'static str, v: f64) -> Result<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::domain(field, format!("must be > 0, got {v}")))
            }
        }
        fn non_negative(field: &'static str, v: f64) -> Result<()> {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::domain(field, format!("must be >= 0, got {v}")))
            }
        }

        positive("center", self.center)?;
        match self.kind {
            MediumKind::Vacuum => Ok(()),
            MediumKind::LinearToy => finite("slope", self.slope),
            MediumKind::EitLambda => {
                non_negative("chi0", self.chi0)?;
                positive("gamma_opt", self.gamma_opt)?;
                non_negative("gamma_ground", self.gamma_ground)?;
                non_negative("rabi_pump", self.rabi_pump)
            }
            MediumKind::RamanGainSingle => {
                non_negative("chi0", self.chi0)?;
                positive("gamma_opt", self.gamma_opt)
            }
            MediumKind::RamanGainDual => {
                non_negative("chi0", self.chi0)?;
                positive("gamma_opt", self.gamma_opt)?;
                non_negative("peak_offset", self.peak_offset)
            }
        }
    }

    /// Absolute angular frequency at a detuning from the medium center.
    pub fn omega(&self, delta: f64) -> f64 {
        self.center + delta
    }

    /// Susceptibility at detuning `delta` from the medium center.
    pub fn susceptibility(&self, delta: f64) -> Result<Complex64> {
        self.validate()?;
        Ok(self.chi(delta))
    }

    pub(crate) fn chi(&self, delta: f64) -> Complex64 {
        let i = Complex64::i();
        match self.kind {
            MediumKind::Vacuum => Complex64::new(0.0, 0.0),
            MediumKind::LinearToy => {
                let u = self.slope * delta;
                Complex64::new(u * (2.0 + u), 0.0)
            }
            MediumKind::EitLambda => {
                let half = 0.5 * self.gamma_opt;
                let optical = Complex64::new(half, -delta);
                if self.rabi_pump == 0.0 {
                    return self.chi0 * i * half / optical;
                }
                let ground = Complex64::new(self.gamma_ground, -delta);
                let coupling = 0.25 * self.rabi_pump * self.rabi_pump;
                self.chi0 * i * half * ground / (optical * ground + coupling)
            }
            MediumKind::RamanGainSingle => raman_line(self.chi0, 0.5 * self.gamma_opt, delta),
            MediumKind::RamanGainDual => {
                let g = 0.5 * self.gamma_opt;
                raman_line(self.chi0, g, delta - self.peak_offset)
                    + raman_line(self.chi0, g, delta + self.peak_offset)
            }
        }
    }

    /// Analytic d(chi)/d(omega).
    pub(crate) fn chi_derivative(&self, delta: f64) -> Complex64 {
        let i = Complex64::i();
        match self.kind {
            MediumKind::Vacuum => Complex64::new(0.0, 0.0),
            MediumKind::LinearToy => Complex64::new(2.0 * self.slope * (1.0 + self.slope * delta), 0.0),
            MediumKind::EitLambda => {
                let half = 0.5 * self.gamma_opt;
                let optical = Complex64::new(half, -delta);
                if self.rabi_pump == 0.0 {
                    return -self.chi0 * half / (optical * optical);
                }
                let ground = Complex64::new(self.gamma_ground, -delta);
                let coupling = 0.25 * self.rabi_pump * self.rabi_pump;
                let num = i * half * ground;
                let num_d = Complex64::new(half, 0.0);
                let den = optical * ground + coupling;
                let den_d = -i * (ground + optical);
                self.chi0 * (num_d * den - num * den_d) / (den * den)
            }
            MediumKind::RamanGainSingle => raman_line_derivative(self.chi0, 0.5 * self.gamma_opt, delta),
            MediumKind::RamanGainDual => {
                let g = 0.5 * self.gamma_opt;
                raman_line_derivative(self.chi0, g, delta - self.peak_offset)
                    + raman_line_derivative(self.chi0, g, delta + self.peak_offset)
            }
        }
    }

    /// `n - 1`, computed without forming `1 + small` so that index
    /// differences keep full relative precision.
    pub fn index_minus_one(&self, delta: f64) -> Result<f64> {
        match self.kind {
            MediumKind::Vacuum => Ok(0.0),
            MediumKind::LinearToy => {
                let u = self.slope * delta;
                if 1.0 + u <= 0.0 {
                    return Err(Error::ModelBreakdown { value: (1.0 + u) * (1.0 + u) });
                }
                Ok(u)
            }
            _ => {
                let chi = self.chi(delta);
                check_dilute(chi)?;
                Ok((chi / (1.0 + (1.0 + chi).sqrt())).re)
            }
        }
    }

    /// dn/domega at `delta`, from the analytic derivative of chi.
    pub fn index_derivative(&self, delta: f64) -> Result<f64> {
        match self.kind {
            MediumKind::Vacuum => Ok(0.0),
            MediumKind::LinearToy => Ok(self.slope),
            _ => {
                let chi = self.chi(delta);
                check_dilute(chi)?;
                Ok((self.chi_derivative(delta) / (2.0 * (1.0 + chi).sqrt())).re)
            }
        }
    }

    pub fn optical_response(&self, delta: f64) -> Result<OpticalResponse> {
        self.validate()?;
        let chi = self.chi(delta);
        let dn = self.index_minus_one(delta)?;
        let n = 1.0 + dn;
        let omega = self.omega(delta);
        let alpha = omega / SPEED_OF_LIGHT * chi.im / n;
        let n_g = 1.0 + omega * self.index_derivative(delta)?;
        Ok(OpticalResponse { chi, n, alpha, n_g })
    }

    /// Intensity loss coefficient (1/m) at `delta`.
    pub fn alpha(&self, delta: f64) -> Result<f64> {
        Ok(self.optical_response(delta)?.alpha)
    }

    /// Group index `1 + omega dn/domega` at an arbitrary detuning.
    pub fn local_group_index(&self, delta: f64) -> Result<f64> {
        self.validate()?;
        Ok(1.0 + self.omega(delta) * self.index_derivative(delta)?)
    }

    /// Group index at the medium center.
    pub fn group_index(&self) -> Result<f64> {
        self.local_group_index(0.0)
    }

    /// Central finite-difference group index
    /// `1 + omega (n(omega + h) - n(omega - h)) / 2h`.
    pub fn group_index_fd(&self, delta: f64, h: f64) -> Result<FdGroupIndex> {
        self.validate()?;
        if !(h > 0.0) {
            return Err(Error::domain("h", format!("step must be > 0, got {h}")));
        }
        let up = self.index_minus_one(delta + h)?;
        let down = self.index_minus_one(delta - h)?;
        let value = 1.0 + self.omega(delta) * (up - down) / (2.0 * h);
        Ok(FdGroupIndex {
            value,
            step_too_large: h >= self.narrowest_feature() / 10.0,
        })
    }

    /// Chord group index between the medium center and `center + dw`:
    /// `1 + (omega0 + dw) (n(omega0 + dw) - n(omega0)) / dw`. At `dw = 0`
    /// this is the local group index at the center.
    pub fn effective_group_index(&self, dw: f64) -> Result<f64> {
        self.validate()?;
        if dw == 0.0 {
            return self.local_group_index(0.0);
        }
        let shifted = self.index_minus_one(dw)?;
        let base = self.index_minus_one(0.0)?;
        Ok(1.0 + self.omega(dw) * (shifted - base) / dw)
    }

    /// Rough scale of the narrowest spectral structure, in rad/s.
    pub fn narrowest_feature(&self) -> f64 {
        match self.kind {
            MediumKind::Vacuum | MediumKind::LinearToy => f64::INFINITY,
            MediumKind::EitLambda => {
                let half = 0.5 * self.gamma_opt;
                if self.rabi_pump == 0.0 {
                    half
                } else {
                    let window = self.gamma_ground + self.rabi_pump * self.rabi_pump / (2.0 * self.gamma_opt);
                    half.min(window)
                }
            }
            MediumKind::RamanGainSingle => 0.5 * self.gamma_opt,
            MediumKind::RamanGainDual => {
                let half = 0.5 * self.gamma_opt;
                if self.peak_offset > 0.0 {
                    half.min(self.peak_offset)
                } else {
                    half
                }
            }
        }
    }

    /// Half width of the dispersion feature around the center: the distance
    /// to the nearest detuning where dn/domega changes sign. Infinite for
    /// media with no such point.
    pub fn dispersion_bandwidth(&self) -> Result<f64> {
        self.validate()?;
        if matches!(self.kind, MediumKind::Vacuum | MediumKind::LinearToy) || self.chi0 == 0.0 {
            return Ok(f64::INFINITY);
        }
        let slope0 = self.index_derivative(0.0)?;
        if slope0 == 0.0 {
            return Ok(f64::INFINITY);
        }
        let scale = self.narrowest_feature();
        let reach = 1e4 * (self.gamma_opt + self.rabi_pump + self.peak_offset);
        let signed = |d: f64| self.index_derivative(d).map(|s| s * slope0.signum()).unwrap_or(f64::NAN);
        let (lo, hi) = (scale * 1e-4, reach);
        let steps = 4000;
        let ratio = (hi / lo).powf(1.0 / steps as f64);
        let mut prev = lo;
        let mut f_prev = signed(prev);
        for _ in 0..steps {
            let next = prev * ratio;
            let f_next = signed(next);
            if f_prev > 0.0 && f_next <= 0.0 {
                let b = Bracket::from_values(prev, next, f_prev, f_next)?;
                return numerics::find_root(signed, b, next * 1e-12);
            }
            prev = next;
            f_prev = f_next;
        }
        Ok(f64::INFINITY)
    }

    /// Full width of the EIT transparency window in Im[chi]: the width at the
    /// level halfway between the center value and the absorption maximum.
    pub fn transparency_width(&self) -> Result<f64> {
        self.validate()?;
        if self.kind != MediumKind::EitLambda || self.rabi_pump == 0.0 {
            return Err(Error::domain("kind", "transparency window needs EitLambda with rabi_pump > 0"));
        }
        // Shape of Im[chi] does not depend on chi0, so evaluate at unit amplitude.
        let unit = MediumSpec { chi0: 1.0, ..*self };
        let absorb = |d: f64| unit.chi(d).im;
        let lo = 1e-6 * self.narrowest_feature();
        let hi = 50.0 * (self.gamma_opt + self.rabi_pump);
        let steps = 3000;
        let ratio = (hi / lo).powf(1.0 / steps as f64);
        let (mut best_i, mut best) = (0usize, f64::NEG_INFINITY);
        for k in 0..=steps {
            let v = absorb(lo * ratio.powi(k as i32));
            if v > best {
                best = v;
                best_i = k;
            }
        }
        let a = lo * ratio.powi(best_i as i32 - 1);
        let b = lo * ratio.powi(best_i as i32 + 1);
        let peak_at = numerics::golden_max(absorb, a, b, b * 1e-12);
        let peak = absorb(peak_at);
        let floor = absorb(0.0);
        if !(peak > floor) {
            return Err(Error::domain("rabi_pump", "no transparency dip in Im[chi]"));
        }
        let level = 0.5 * (peak + floor);
        let f = |d: f64| absorb(d) - level;
        let bracket = Bracket::new(0.0, peak_at, f)?;
        Ok(2.0 * numerics::find_root(f, bracket, peak_at * 1e-13)?)
    }
}

fn check_dilute(chi: Complex64) -> Result<()> {
    let v = 1.0 + chi.re;
    if v <= 0.0 || !v.is_finite() {
        Err(Error::ModelBreakdown { value: v })
    } else {
        Ok(())
    }
}

/// One Raman gain line `-i chi0 g / (g - i u)`.
fn raman_line(chi0: f64, g: f64, u: f64) -> Complex64 {
    -Complex64::i() * chi0 * g / Complex64::new(g, -u)
}

fn raman_line_derivative(chi0: f64, g: f64, u: f64) -> Complex64 {
    let d = Complex64::new(g, -u);
    chi0 * g / (d * d)
}

/// Fixed rates used when inverting the EIT observables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EitCalibration {
    pub gamma_opt: f64,
    pub gamma_ground: f64,
}

impl Default for EitCalibration {
    fn default() -> Self {
        let tau = std::f64::consts::TAU;
        EitCalibration {
            gamma_opt: tau * 20e6,
            gamma_ground: tau * 1e3,
        }
    }
}

impl EitCalibration {
    /// Finds `(rabi_pump, chi0)` such that the transparency window has full
    /// width `target_width` and the group index at the center is `target_ng`.
    ///
    /// The window shape does not depend on `chi0`, so the two-dimensional
    /// system is triangular: solve the width for the pump Rabi frequency,
    /// then the group index for the amplitude.
    pub fn calibrate(&self, target_width: f64, target_ng: f64, omega0: f64) -> Result<MediumSpec> {
        if !(target_width > 0.0) {
            return Err(Error::domain("target_eit_linewidth", "must be > 0"));
        }
        if !(target_ng >= 1.0) {
            return Err(Error::domain("target_ng", "must be >= 1 for an EIT medium"));
        }
        let base = MediumSpec::eit(omega0, 1.0, self.gamma_opt, self.gamma_ground, 0.0);
        base.validate()?;

        let rabi = self.solve_rabi(&base, target_width)?;
        let shaped = MediumSpec { rabi_pump: rabi, ..base };
        if target_ng == 1.0 {
            return Ok(MediumSpec { chi0: 0.0, ..shaped });
        }

        let excess = |chi0: f64| -> f64 {
            MediumSpec { chi0, ..shaped }
                .group_index()
                .map(|ng| ng - target_ng)
                .unwrap_or(f64::NAN)
        };
        // n_g - 1 is linear in chi0 for a dilute medium; use that for the bracket.
        let probe = 1e-9;
        let per_unit = (excess(probe) + target_ng - 1.0) / probe;
        if !(per_unit > 0.0) {
            return Err(Error::CalibrationFailed {
                reason: "window has no positive dispersion at its center".into(),
                best_residual: (1.0 - target_ng) / target_ng,
            });
        }
        let hi = (2.0 * (target_ng - 1.0) / per_unit).min(MAX_CHI0);
        let f_hi = excess(hi);
        if !(f_hi >= 0.0) {
            let best = if f_hi.is_finite() { f_hi / target_ng } else { -1.0 };
            return Err(Error::CalibrationFailed {
                reason: format!("group index {target_ng} needs chi0 above {MAX_CHI0:e}"),
                best_residual: best,
            });
        }
        let bracket = Bracket::from_values(0.0, hi, 1.0 - target_ng, f_hi)?;
        let chi0 = numerics::find_root(excess, bracket, hi * 1e-14)?;
        let spec = MediumSpec { chi0, ..shaped };

        let ng = spec.group_index()?;
        let width = spec.transparency_width()?;
        let res_ng = (ng - target_ng) / target_ng;
        let res_w = (width - target_width) / target_width;
        if res_ng.abs() > 0.01 || res_w.abs() > 0.01 {
            return Err(Error::CalibrationFailed {
                reason: "targets not met to 1%".into(),
                best_residual: res_ng.abs().max(res_w.abs()),
            });
        }
        Ok(spec)
    }

    fn solve_rabi(&self, base: &MediumSpec, target_width: f64) -> Result<f64> {
        let width_at = |rabi: f64| -> f64 {
            MediumSpec { rabi_pump: rabi, ..*base }
                .transparency_width()
                .unwrap_or(f64::NAN)
        };
        let lo_limit = self.gamma_opt * 1e-6;
        let hi_limit = self.gamma_opt * 1e3;
        let guess = (target_width * self.gamma_opt).sqrt().clamp(lo_limit, hi_limit);
        let f = |rabi: f64| width_at(rabi) - target_width;

        let mut best = f64::INFINITY;
        let mut track = |v: f64| {
            if v.is_finite() {
                best = best.min((v / target_width).abs());
            }
        };
        let (mut lo, mut hi) = (guess, guess);
        let (mut f_lo, mut f_hi) = (f(lo), f(hi));
        track(f_lo);
        // Window width grows with pump power.
        while !(f_lo < 0.0) && lo > lo_limit {
            lo = (lo / 4.0).max(lo_limit);
            f_lo = f(lo);
            track(f_lo);
        }
        while !(f_hi > 0.0) && hi < hi_limit {
            hi = (hi * 4.0).min(hi_limit);
            f_hi = f(hi);
            track(f_hi);
        }
        if !(f_lo < 0.0 && f_hi > 0.0) {
            return Err(Error::CalibrationFailed {
                reason: format!("transparency width {target_width:e} rad/s unreachable with the fixed rates"),
                best_residual: best,
            });
        }
        let bracket = Bracket::from_values(lo, hi, f_lo, f_hi)?;
        numerics::find_root(f, bracket, hi * 1e-13)
    }
}

/// EIT calibration with the default fixed rates.
pub fn calibrate_eit(target_eit_linewidth: f64, target_ng: f64, omega0: f64) -> Result<MediumSpec> {
    EitCalibration::default().calibrate(target_eit_linewidth, target_ng, omega0)
}

/// Tunes the peak offset of a dual Raman gain medium so that the group index
/// at its center equals `target_ng`.
///
/// On `0 <= offset <= sqrt(3) * gain_width / 2` the center group index falls
/// monotonically from its single-line value to its most anomalous value; the
/// root is taken on that inner branch, where the anomalous slope flattens
/// away from the center.
pub fn tune_dual_peak_offset(
    center: f64,
    chi0: f64,
    gain_width: f64,
    target_ng: f64,
) -> Result<MediumSpec> {
    let template = MediumSpec::raman_dual(center, chi0, gain_width, 0.0);
    template.validate()?;
    let f = |offset: f64| -> f64 {
        MediumSpec {
            peak_offset: offset,
            ..template
        }
        .group_index()
        .map(|ng| ng - target_ng)
        .unwrap_or(f64::NAN)
    };
    let hi = 3f64.sqrt() * 0.5 * gain_width;
    let (f_lo, f_hi) = (f(0.0), f(hi));
    if !(f_lo >= 0.0 && f_hi <= 0.0) {
        let best = if f_hi > 0.0 { f_hi } else { f_lo };
        return Err(Error::CalibrationFailed {
            reason: format!("group index {target_ng} outside the reachable range of the dual-peak medium"),
            best_residual: best,
        });
    }
    let bracket = Bracket::from_values(0.0, hi, f_lo, f_hi)?;
    let offset = numerics::find_root(f, bracket, hi * 1e-15)?;
    Ok(MediumSpec {
        peak_offset: offset,
        ..template
    })
}
