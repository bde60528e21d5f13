//! Resonance shift of the loaded cavity for a given shift of the empty
//! cavity, by the linear formula and by the self-consistent resonance
//! condition `x [1 + (n_g,eff(x) - 1) l/L] = dw0`.

use std::f64::consts::TAU;

use serde::Serialize;

use crate::cavity::{self, CavityConfig};
use crate::error::{Error, Result};
use crate::media::{MediumKind, MediumSpec};
use crate::numerics::{self, Bracket};

/// Sensitivity factors smaller than this in magnitude are treated as the
/// critically anomalous point where the linear model diverges.
pub const CAD_TOLERANCE: f64 = 1e-6;
/// Bound on the returned resonance-condition residual, rad/s.
pub const RESIDUAL_TOLERANCE: f64 = TAU * 10.0;
/// Root localization tolerance, rad/s.
const ROOT_TOL: f64 = 1e-3;
/// Continuation substeps between zero and a single requested shift.
const SUBSTEPS: usize = 32;
/// Continuation substeps between neighbouring points of a scan grid.
const SCAN_SUBSTEPS: usize = 8;

/// `S = 1 + (n_g - 1) l/L`.
pub fn sensitivity_factor(n_g: f64, ell_over_l: f64) -> f64 {
    1.0 + (n_g - 1.0) * ell_over_l
}

/// Linear prediction of the loaded shift, `dw0 / S`.
pub fn shift_linear(n_g: f64, ell_over_l: f64, dw0: f64) -> Result<f64> {
    let s = sensitivity_factor(n_g, ell_over_l);
    if s.abs() < CAD_TOLERANCE {
        return Err(Error::CadDivergence { factor: s });
    }
    Ok(dw0 / s)
}

/// Empty-cavity resonance shift produced by a length change `dl` (m), to
/// first order: `-w0 dl / L`.
pub fn length_to_dw0(cfg: &CavityConfig, dl: f64) -> f64 {
    -cfg.omega_lock() * dl / cfg.length()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftResult {
    pub dw0: f64,
    /// `None` where the linear model diverges.
    pub dw0_prime_linear: Option<f64>,
    pub dw0_prime: f64,
    pub n_g_eff: f64,
    pub n_g_local: f64,
    pub s_linear: f64,
    pub residual: f64,
    /// The continuation crossed onto a branch where the resonance condition
    /// has the opposite slope to the one it started on.
    pub fold: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShiftScanResult {
    pub points: Vec<ShiftResult>,
    pub fitted_slope: f64,
    pub implied_s: f64,
    /// Grid points dropped because the loaded shift left the dispersion
    /// bandwidth of the medium.
    pub truncated: usize,
}

struct Problem<'a> {
    cfg: &'a CavityConfig,
    medium: &'a MediumSpec,
    ell_over_l: f64,
    base: f64,
}

impl<'a> Problem<'a> {
    fn new(cfg: &'a CavityConfig, medium: &'a MediumSpec) -> Result<Self> {
        medium.validate()?;
        let lock = cfg.omega_lock();
        if (medium.center - lock).abs() > 4.0 * f64::EPSILON * lock {
            return Err(Error::domain("center", "medium center must equal the cavity lock frequency"));
        }
        Ok(Problem {
            cfg,
            medium,
            ell_over_l: cfg.ell_over_l(),
            base: medium.index_minus_one(0.0)?,
        })
    }

    /// `x S_eff(x)`; the quotient in n_g,eff is multiplied out so that the
    /// expression is regular at `x = 0`.
    fn lhs(&self, x: f64) -> f64 {
        match self.medium.index_minus_one(x) {
            Ok(dn) => x + self.medium.omega(x) * (dn - self.base) * self.ell_over_l,
            Err(_) => f64::NAN,
        }
    }

    fn local_slope(&self, x: f64) -> f64 {
        self.medium
            .local_group_index(x)
            .map(|ng| sensitivity_factor(ng, self.ell_over_l))
            .unwrap_or(f64::NAN)
    }

    fn limit(&self) -> f64 {
        0.5 * self.cfg.fsr()
    }

    /// Root of `lhs(x) = target` nearest `seed`, found by geometric outward
    /// scanning on both sides.
    fn nearest_root(&self, target: f64, seed: f64, step: f64) -> Result<f64> {
        let limit = self.limit();
        let f = |x: f64| self.lhs(x) - target;
        let f_seed = f(seed);
        if f_seed == 0.0 {
            return Ok(seed);
        }
        let mut h = step.max(ROOT_TOL);
        let (mut up_prev, mut down_prev) = ((seed, f_seed), (seed, f_seed));
        let (mut up_open, mut down_open) = (true, true);
        while up_open || down_open {
            for (prev, open, sign) in [(&mut up_prev, &mut up_open, 1.0), (&mut down_prev, &mut down_open, -1.0)] {
                if !*open {
                    continue;
                }
                let x = (seed + sign * h).clamp(-limit, limit);
                let fx = f(x);
                if fx.is_finite() && prev.1.is_finite() && (fx == 0.0 || fx.signum() != prev.1.signum()) {
                    let (lo, hi, f_lo, f_hi) = if sign > 0.0 {
                        (prev.0, x, prev.1, fx)
                    } else {
                        (x, prev.0, fx, prev.1)
                    };
                    let bracket = Bracket::from_values(lo, hi, f_lo, f_hi)?;
                    return numerics::find_root(f, bracket, ROOT_TOL);
                }
                *prev = (x, fx);
                if x.abs() >= limit {
                    *open = false;
                }
            }
            h *= 2.0;
        }
        Err(Error::SolverRange { limit })
    }

    /// Follows the root continuously from `(t0, x0)` to `t1`.
    fn track(&self, t0: f64, x0: f64, t1: f64, substeps: usize) -> Result<(f64, bool)> {
        let start_slope = self.local_slope(x0).signum();
        let mut x = x0;
        let mut fold = false;
        for k in 1..=substeps {
            let t = t0 + (t1 - t0) * k as f64 / substeps as f64;
            let dt = ((t1 - t0) / substeps as f64).abs();
            x = self.nearest_root(t, x, dt * 1e-3)?;
            if self.local_slope(x).signum() != start_slope {
                fold = true;
            }
        }
        Ok((x, fold))
    }

    fn result(&self, dw0: f64, x: f64, fold: bool) -> Result<ShiftResult> {
        let n_g = self.medium.local_group_index(0.0)?;
        let residual = if x == 0.0 && dw0 == 0.0 {
            0.0
        } else {
            (self.lhs(x) - dw0).abs()
        };
        Ok(ShiftResult {
            dw0,
            dw0_prime_linear: shift_linear(n_g, self.ell_over_l, dw0).ok(),
            dw0_prime: x,
            n_g_eff: self.medium.effective_group_index(x)?,
            n_g_local: self.medium.local_group_index(x)?,
            s_linear: sensitivity_factor(n_g, self.ell_over_l),
            residual,
            fold,
        })
    }
}

/// Self-consistent loaded shift for empty-cavity shift `dw0`, following the
/// branch that starts at zero shift.
pub fn solve_shift(cfg: &CavityConfig, medium: &MediumSpec, dw0: f64) -> Result<ShiftResult> {
    let problem = Problem::new(cfg, medium)?;
    if dw0 == 0.0 {
        return problem.result(0.0, 0.0, false);
    }
    let (x, fold) = problem.track(0.0, 0.0, dw0, SUBSTEPS)?;
    let out = problem.result(dw0, x, fold)?;
    if !(out.residual <= RESIDUAL_TOLERANCE) {
        return Err(Error::SolverRange { limit: problem.limit() });
    }
    Ok(out)
}

/// Solves every grid point by continuation outward from zero on each side,
/// stopping a side once the loaded shift leaves the dispersion bandwidth,
/// then fits the loaded-vs-empty slope through the origin.
pub fn scan_shift(cfg: &CavityConfig, medium: &MediumSpec, dw0_grid: &[f64]) -> Result<ShiftScanResult> {
    let problem = Problem::new(cfg, medium)?;
    if dw0_grid.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("dw0_grid", "values must be finite"));
    }
    let bandwidth = medium.dispersion_bandwidth()?;
    let mut positive: Vec<f64> = dw0_grid.iter().copied().filter(|&v| v >= 0.0).collect();
    let mut negative: Vec<f64> = dw0_grid.iter().copied().filter(|&v| v < 0.0).collect();
    positive.sort_by(f64::total_cmp);
    negative.sort_by(|a, b| b.total_cmp(a));

    let mut points = Vec::with_capacity(dw0_grid.len());
    let mut truncated = 0;
    for side in [positive, negative] {
        let (mut t, mut x, mut fold) = (0.0, 0.0, false);
        for (k, &dw0) in side.iter().enumerate() {
            if dw0 != 0.0 {
                let (nx, nfold) = problem.track(t, x, dw0, SCAN_SUBSTEPS)?;
                x = nx;
                fold |= nfold;
                t = dw0;
            }
            if x.abs() > bandwidth {
                truncated += side.len() - k;
                break;
            }
            let point = problem.result(dw0, if dw0 == 0.0 { 0.0 } else { x }, fold)?;
            if !(point.residual <= RESIDUAL_TOLERANCE) {
                return Err(Error::SolverRange { limit: problem.limit() });
            }
            points.push(point);
        }
    }
    points.sort_by(|a, b| a.dw0.total_cmp(&b.dw0));
    if truncated > 0 {
        log::info!("scan truncated {truncated} points beyond the dispersion bandwidth {bandwidth:.6e} rad/s");
    }

    let xs: Vec<f64> = points.iter().map(|p| p.dw0).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.dw0_prime).collect();
    let fitted_slope = numerics::fit_slope_through_origin(&xs, &ys)?;
    Ok(ShiftScanResult {
        points,
        fitted_slope,
        implied_s: 1.0 / fitted_slope,
        truncated,
    })
}

/// Shift scan for a dual-peak Raman gain medium tuned near the critically
/// anomalous point, after checking that the cavity stays below threshold at
/// the gain peaks.
pub fn cad_enhancement_scan(
    cfg: &CavityConfig,
    medium: &MediumSpec,
    dw0_grid: &[f64],
) -> Result<ShiftScanResult> {
    if medium.kind != MediumKind::RamanGainDual {
        return Err(Error::domain("kind", "enhancement scan needs a RamanGainDual medium"));
    }
    let n_g = medium.group_index()?;
    if !(-1.0..=1.0).contains(&n_g) {
        return Err(Error::domain(
            "peak_offset",
            format!("center group index {n_g:.6} outside [-1, 1]"),
        ));
    }
    for dw in [0.0, medium.peak_offset, -medium.peak_offset] {
        let a = cavity::round_trip_amplitude(cfg, medium, dw)?;
        if a >= 1.0 {
            return Err(Error::AboveThreshold { amplitude: a });
        }
    }
    scan_shift(cfg, medium, dw0_grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    const W0: f64 = TAU * 384.23e12;

    fn cavity(ell: f64) -> CavityConfig {
        let r = cavity::reflectivity_from_finesse(100.0).unwrap();
        CavityConfig::new(1.0, ell, r, 0.0, W0).unwrap()
    }

    #[test]
    fn linear_examples() {
        assert_eq!(shift_linear(1.0, 0.1, 123.0).unwrap(), 123.0);
        let x = shift_linear(50.0, 0.1, TAU * 5.9e6).unwrap();
        assert!((x - TAU * 1e6).abs() < 1e-6);
        assert!(matches!(shift_linear(0.0, 1.0, 1.0), Err(Error::CadDivergence { .. })));
    }

    #[test]
    fn length_conversion() {
        let cfg = cavity(0.1);
        assert_eq!(length_to_dw0(&cfg, 0.0), 0.0);
        let dl = -cfg.length() * TAU * 4e6 / cfg.omega_lock();
        assert!((length_to_dw0(&cfg, dl) - TAU * 4e6).abs() < 1e-6);
        assert_eq!(length_to_dw0(&cfg, 2.0 * dl), 2.0 * length_to_dw0(&cfg, dl));
    }

    #[test]
    fn zero_shift_is_exact() {
        let cfg = cavity(0.1);
        let m = MediumSpec::linear_with_group_index(cfg.omega_lock(), 50.0);
        let r = solve_shift(&cfg, &m, 0.0).unwrap();
        assert_eq!((r.dw0_prime, r.residual), (0.0, 0.0));
    }

    #[test]
    fn linear_toy_matches_linear_formula() {
        let cfg = cavity(0.1);
        let m = MediumSpec::linear_with_group_index(cfg.omega_lock(), 50.0);
        let r = solve_shift(&cfg, &m, TAU * 5.9e6).unwrap();
        assert!((r.dw0_prime - TAU * 1e6).abs() < RESIDUAL_TOLERANCE, "{}", r.dw0_prime / TAU);
        assert!(r.residual <= RESIDUAL_TOLERANCE);
        assert!(!r.fold);
    }

    #[test]
    fn scan_linear_toy() {
        let cfg = cavity(0.5);
        let m = MediumSpec::linear_with_group_index(cfg.omega_lock(), 11.0);
        let grid: Vec<f64> = (-4..=4).map(|k| TAU * 1e6 * k as f64).collect();
        let scan = scan_shift(&cfg, &m, &grid).unwrap();
        assert_eq!(scan.points.len(), 9);
        assert!((scan.implied_s - 6.0).abs() < 1e-6);
        let vac = MediumSpec::vacuum(cfg.omega_lock());
        let scan = scan_shift(&cfg, &vac, &grid).unwrap();
        assert!((scan.fitted_slope - 1.0).abs() < 1e-9);
    }

    #[test]
    fn center_mismatch_rejected() {
        let cfg = cavity(0.1);
        let m = MediumSpec::vacuum(cfg.omega_lock() * 1.001);
        assert!(solve_shift(&cfg, &m, 1e6).is_err());
    }

    #[test]
    fn cad_requires_dual_medium() {
        let cfg = cavity(1.0);
        let m = MediumSpec::vacuum(cfg.omega_lock());
        assert!(matches!(
            cad_enhancement_scan(&cfg, &m, &[1e3]),
            Err(Error::ParameterDomain { field: "kind", .. })
        ));
    }
}
