//! Independent reference computations for the integration tests. Nothing
//! here calls into the library's numerics; formulas are written out directly.

#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use ringcav::cavity::{self, CavityConfig};
use ringcav::media::{self, MediumSpec};

pub const C: f64 = 299_792_458.0;

pub fn mhz(v: f64) -> f64 {
    TAU * v * 1e6
}

pub fn to_mhz(w: f64) -> f64 {
    w / TAU / 1e6
}

/// Lock frequency for a 1 m ring near 384.23 THz, from the mode number.
pub fn lock_1m() -> f64 {
    let n = (384.23e12 / C).round();
    TAU * C * n
}

pub fn finesse_100() -> f64 {
    cavity::reflectivity_from_finesse(100.0).unwrap()
}

/// 1 m ring with a 10 cm cell, finesse 100, no excess loss.
pub fn ring(ell: f64) -> CavityConfig {
    CavityConfig::new(1.0, ell, finesse_100(), 0.0, lock_1m()).unwrap()
}

/// Cavity and medium for the EIT benchmark: 8 MHz transparent-medium line,
/// 1 MHz window, group index 50, cell length L/10.
pub fn eit_benchmark() -> (CavityConfig, MediumSpec) {
    let r = finesse_100();
    let loss = cavity::excess_loss_for_linewidth(r, mhz(8.0), 1.0).unwrap();
    let cfg = CavityConfig::new(1.0, 0.1, r, loss, lock_1m()).unwrap();
    let m = media::calibrate_eit(mhz(1.0), 50.0, cfg.omega_lock()).unwrap();
    (cfg, m)
}

/// Shift grid of the EIT benchmark: ±0.5 ... ±4 MHz and zero.
pub fn shift_grid() -> Vec<f64> {
    (-8..=8).map(|k| mhz(0.5 * k as f64)).collect()
}

/// Dual Raman gain medium filling a 1 m ring, tuned to zero group index.
pub fn cad() -> (CavityConfig, MediumSpec) {
    let cfg = ring(1.0);
    let m = media::tune_dual_peak_offset(cfg.omega_lock(), 3e-9, mhz(0.2), 0.0).unwrap();
    (cfg, m)
}

pub fn cad_grid() -> Vec<f64> {
    [1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0]
        .iter()
        .flat_map(|k| [TAU * 1e3 * k, -TAU * 1e3 * k])
        .collect()
}

/// Susceptibility written in the continued-fraction form
/// `chi0 (i G/2) / [(G/2 - i d) + (W^2/4)/(g - i d)]`, and the Raman sums,
/// independent of the library's rational form.
pub fn chi_reference(m: &MediumSpec, d: f64) -> Complex64 {
    use ringcav::media::MediumKind::*;
    let i = Complex64::i();
    match m.kind {
        Vacuum => Complex64::new(0.0, 0.0),
        LinearToy => {
            // (n - 1)(n + 1) without cancellation
            let excess = m.slope * d;
            Complex64::new(excess * (excess + 2.0), 0.0)
        }
        EitLambda => {
            let half = m.gamma_opt / 2.0;
            let mut den = Complex64::new(half, -d);
            if m.rabi_pump > 0.0 {
                if m.gamma_ground == 0.0 && d == 0.0 {
                    return Complex64::new(0.0, 0.0);
                }
                den += m.rabi_pump * m.rabi_pump / 4.0 / Complex64::new(m.gamma_ground, -d);
            }
            m.chi0 * i * half / den
        }
        RamanGainSingle => {
            let g = m.gamma_opt / 2.0;
            -i * m.chi0 * g / Complex64::new(g, -d)
        }
        RamanGainDual => {
            let g = m.gamma_opt / 2.0;
            [m.peak_offset, -m.peak_offset]
                .iter()
                .map(|s| -i * m.chi0 * g / Complex64::new(g, -(d - s)))
                .sum()
        }
    }
}

/// `n - 1 = Re[chi / (1 + sqrt(1 + chi))]`.
pub fn index_excess(m: &MediumSpec, d: f64) -> f64 {
    let chi = chi_reference(m, d);
    (chi / (1.0 + (1.0 + chi).sqrt())).re
}

/// Analytic FWHM of an Airy resonance: half maximum where
/// `F sin^2(phi/2) = 1`, converted to frequency with `dphi/domega = L S / c`.
pub fn airy_fwhm(amplitude: f64, length: f64, s: f64) -> f64 {
    let f = 4.0 * amplitude / (1.0 - amplitude).powi(2);
    let half_phase = 2.0 * (1.0 / f.sqrt()).asin();
    2.0 * half_phase * C / (length * s.abs())
}

pub fn lorentzian(x: f64, w: f64) -> f64 {
    1.0 / (1.0 + (x / w).powi(2))
}

/// Every root of `f` on `[lo, hi]` located by a sign-change scan over
/// `cells` cells followed by plain bisection. Sign changes across poles are
/// discarded.
pub fn grid_roots(f: impl Fn(f64) -> f64, lo: f64, hi: f64, cells: usize) -> Vec<f64> {
    let step = (hi - lo) / cells as f64;
    let mut roots = Vec::new();
    let mut a = lo;
    let mut fa = f(a);
    for k in 1..=cells {
        let b = lo + step * k as f64;
        let fb = f(b);
        if fa.is_finite() && fb.is_finite() && (fa == 0.0 || fa.signum() != fb.signum()) {
            let (mut l, mut r, mut fl) = (a, b, fa);
            for _ in 0..200 {
                let m = 0.5 * (l + r);
                let fm = f(m);
                if fm == 0.0 {
                    l = m;
                    r = m;
                    break;
                }
                if fm.signum() == fl.signum() {
                    l = m;
                    fl = fm;
                } else {
                    r = m;
                }
                if r - l <= 1e-9 * step {
                    break;
                }
            }
            let x = 0.5 * (l + r);
            // A pole changes sign too; keep only genuine zeros.
            if fa == 0.0 || f(x).abs() <= 1e-3 * fa.abs().max(fb.abs()) {
                roots.push(x);
            }
        }
        a = b;
        fa = fb;
    }
    roots
}

/// Intersection residual `x - y(x)` with
/// `y(x) = dw0 / [1 + (w0 + x)(n(w0 + x) - 1)/x * l/L]`.
pub fn intersection_residual(m: &MediumSpec, ell_over_l: f64, dw0: f64) -> impl Fn(f64) -> f64 + '_ {
    let base = index_excess(m, 0.0);
    move |x: f64| {
        if x == 0.0 {
            // chord index tends to the local one
            let ng = group_index_by_difference(m, 0.0, 10.0);
            return -dw0 / (1.0 + (ng - 1.0) * ell_over_l);
        }
        let den = 1.0 + (m.center + x) * ((index_excess(m, x) - base) / x) * ell_over_l;
        x - dw0 / den
    }
}

/// Central difference of `n` at detuning `d`, giving `1 + omega dn/domega`.
pub fn group_index_by_difference(m: &MediumSpec, d: f64, h: f64) -> f64 {
    1.0 + (m.center + d) * (index_excess(m, d + h) - index_excess(m, d - h)) / (2.0 * h)
}

/// `Re chi(d)` from `Im chi` by a principal-value Hilbert transform,
/// `Re chi(d) = (1/pi) P int Im chi(x) / (x - d) dx`, on a sinh-stretched
/// grid with the singularity subtracted.
pub fn hilbert_real_part(im: impl Fn(f64) -> f64, d: f64, scale: f64, reach: f64, nodes: usize) -> f64 {
    let u_max = (reach / scale).asinh();
    let du = 2.0 * u_max / nodes as f64;
    let f_d = im(d);
    let mut sum = 0.0;
    for k in 0..=nodes {
        let u = -u_max + du * k as f64;
        let x = scale * u.sinh();
        let jac = scale * u.cosh();
        let diff = x - d;
        let integrand = if diff.abs() < 1e-12 * scale {
            // removable point: derivative of Im chi
            let h = 1e-4 * scale;
            (im(d + h) - im(d - h)) / (2.0 * h)
        } else {
            (im(x) - f_d) / diff
        };
        let w = if k == 0 || k == nodes { 0.5 } else { 1.0 };
        sum += w * integrand * jac * du;
    }
    let lo = -reach;
    let hi = reach;
    (sum + f_d * ((hi - d) / (d - lo)).ln()) / PI
}
