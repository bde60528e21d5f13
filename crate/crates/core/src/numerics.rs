//! Scalar numerical kernels shared by the physics modules.
//!
//! Everything here is derivative-free and policy-free: root finding needs a
//! sign-changing bracket, peak extraction needs a window holding exactly one
//! peak. Choosing brackets and windows is the caller's job.

use crate::error::{Error, Result};

/// Hard cap on root-finder iterations.
pub const MAX_ROOT_ITERATIONS: usize = 200;

/// An interval known to contain a sign change of some function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bracket {
    pub lo: f64,
    pub hi: f64,
    pub f_lo: f64,
    pub f_hi: f64,
}

impl Bracket {
    /// Evaluates `f` at both ends and checks the sign condition.
    pub fn new<F: FnMut(f64) -> f64>(lo: f64, hi: f64, mut f: F) -> Result<Self> {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        Self::from_values(lo, hi, f(lo), f(hi))
    }

    pub fn from_values(lo: f64, hi: f64, f_lo: f64, f_hi: f64) -> Result<Self> {
        let ok = lo < hi
            && f_lo.is_finite()
            && f_hi.is_finite()
            && (f_lo * f_hi <= 0.0);
        if ok {
            Ok(Bracket { lo, hi, f_lo, f_hi })
        } else {
            Err(Error::InvalidBracket { lo, hi, f_lo, f_hi })
        }
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Bracketed root finding: secant (regula falsi with Illinois damping) steps,
/// falling back to bisection whenever a step fails to shrink the bracket by
/// half. Returns a point within `tol_x` of a sign change.
pub fn find_root<F: FnMut(f64) -> f64>(mut f: F, bracket: Bracket, tol_x: f64) -> Result<f64> {
    let Bracket {
        mut lo,
        mut hi,
        mut f_lo,
        mut f_hi,
    } = bracket;
    if !(lo < hi) || f_lo * f_hi > 0.0 || !(tol_x > 0.0) {
        return Err(Error::InvalidBracket { lo, hi, f_lo, f_hi });
    }
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }

    // Which end was retained on the previous step (for Illinois damping).
    let mut stale: i8 = 0;
    for _ in 0..MAX_ROOT_ITERATIONS {
        let width = hi - lo;
        if width <= tol_x {
            break;
        }
        let mut x = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
        let mid = 0.5 * (lo + hi);
        // Keep the secant point strictly inside and away from the ends; if it
        // would not at least halve the bracket, bisect.
        let margin = 0.5 * tol_x.min(0.25 * width);
        if !x.is_finite() || x <= lo + margin || x >= hi - margin {
            x = mid;
        }
        let fx = f(x);
        if fx == 0.0 {
            return Ok(x);
        }
        let prev_width = width;
        if fx.signum() == f_lo.signum() {
            lo = x;
            f_lo = fx;
            if stale == 1 {
                f_hi *= 0.5;
            }
            stale = 1;
        } else {
            hi = x;
            f_hi = fx;
            if stale == -1 {
                f_lo *= 0.5;
            }
            stale = -1;
        }
        if hi - lo > 0.5 * prev_width {
            // Secant step was too timid: force a bisection on the next pass.
            let m = 0.5 * (lo + hi);
            let fm = f(m);
            if fm == 0.0 {
                return Ok(m);
            }
            if fm.signum() == f_lo.signum() {
                lo = m;
                f_lo = fm;
            } else {
                hi = m;
                f_hi = fm;
            }
            stale = 0;
        }
    }
    Ok(if f_lo.abs() <= f_hi.abs() { lo } else { hi })
}

/// Scans `[lo, hi]` on `steps` equal cells and returns the first cell where
/// `f` changes sign, as a ready-to-use bracket.
pub fn scan_for_bracket<F: FnMut(f64) -> f64>(
    mut f: F,
    lo: f64,
    hi: f64,
    steps: usize,
) -> Option<Bracket> {
    let steps = steps.max(1);
    let dx = (hi - lo) / steps as f64;
    let mut x0 = lo;
    let mut f0 = f(x0);
    for i in 1..=steps {
        let x1 = if i == steps { hi } else { lo + dx * i as f64 };
        let f1 = f(x1);
        if f0.is_finite() && f1.is_finite() && f0 * f1 <= 0.0 {
            return Bracket::from_values(x0, x1, f0, f1).ok();
        }
        x0 = x1;
        f0 = f1;
    }
    None
}

/// Central difference `(f(x + h) - f(x - h)) / 2h`.
pub fn central_difference<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// Golden-section search for the maximum of a unimodal function on `[lo, hi]`.
pub fn golden_max<F: FnMut(f64) -> f64>(mut f: F, mut lo: f64, mut hi: f64, tol_x: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..MAX_ROOT_ITERATIONS {
        if hi - lo <= tol_x {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    0.5 * (lo + hi)
}

/// Location, height and full width at half maximum of a sampled peak.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeakEstimate {
    pub center: f64,
    pub height: f64,
    pub fwhm: f64,
    pub left_cross: f64,
    pub right_cross: f64,
}

/// Extracts the single peak of a sampled curve.
///
/// The center and height come from the parabola through the discrete maximum
/// and its two neighbours; the half-maximum crossings are linear
/// interpolations on each flank, walking outward from the maximum. Any sample
/// outside the half-maximum lobe that rises above half maximum is treated as a
/// second peak and rejected.
pub fn extract_peak(xs: &[f64], ys: &[f64]) -> Result<PeakEstimate> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(Error::Extraction {
            side: "both",
            reason: format!("need >= 3 paired samples, got {} / {}", xs.len(), ys.len()),
        });
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Extraction {
            side: "both",
            reason: "abscissae not strictly increasing".into(),
        });
    }
    let (imax, &ymax) = ys
        .iter()
        .enumerate()
        .fold((0, &f64::NEG_INFINITY), |acc, (i, y)| if *y > *acc.1 { (i, y) } else { acc });
    if !ymax.is_finite() || ymax <= 0.0 {
        return Err(Error::Extraction {
            side: "both",
            reason: "no positive finite maximum".into(),
        });
    }
    let last = xs.len() - 1;
    if imax == 0 {
        return Err(Error::Extraction {
            side: "left",
            reason: "maximum on the window boundary".into(),
        });
    }
    if imax == last {
        return Err(Error::Extraction {
            side: "right",
            reason: "maximum on the window boundary".into(),
        });
    }

    let (center, height) = parabolic_vertex(
        (xs[imax - 1], ys[imax - 1]),
        (xs[imax], ys[imax]),
        (xs[imax + 1], ys[imax + 1]),
    );
    let half = 0.5 * height;

    let mut il = imax;
    while il > 0 && ys[il] > half {
        il -= 1;
    }
    if ys[il] > half {
        return Err(Error::Extraction {
            side: "left",
            reason: "half maximum not crossed inside the window".into(),
        });
    }
    let mut ir = imax;
    while ir < last && ys[ir] > half {
        ir += 1;
    }
    if ys[ir] > half {
        return Err(Error::Extraction {
            side: "right",
            reason: "half maximum not crossed inside the window".into(),
        });
    }
    let left_cross = lerp_cross(xs[il], ys[il], xs[il + 1], ys[il + 1], half);
    let right_cross = lerp_cross(xs[ir - 1], ys[ir - 1], xs[ir], ys[ir], half);

    if ys[..il].iter().any(|&y| y > half) {
        return Err(Error::Extraction {
            side: "left",
            reason: "second peak above half maximum".into(),
        });
    }
    if ys[ir + 1..].iter().any(|&y| y > half) {
        return Err(Error::Extraction {
            side: "right",
            reason: "second peak above half maximum".into(),
        });
    }

    Ok(PeakEstimate {
        center,
        height,
        fwhm: right_cross - left_cross,
        left_cross,
        right_cross,
    })
}

fn lerp_cross(x0: f64, y0: f64, x1: f64, y1: f64, level: f64) -> f64 {
    if y1 == y0 {
        return 0.5 * (x0 + x1);
    }
    x0 + (level - y0) * (x1 - x0) / (y1 - y0)
}

/// Vertex of the parabola through three points; falls back to the middle
/// point when the three are collinear.
fn parabolic_vertex(p0: (f64, f64), p1: (f64, f64), p2: (f64, f64)) -> (f64, f64) {
    let (x0, y0) = p0;
    let (x1, y1) = p1;
    let (x2, y2) = p2;
    let d01 = (y1 - y0) / (x1 - x0);
    let d12 = (y2 - y1) / (x2 - x1);
    let a = (d12 - d01) / (x2 - x0);
    if a >= 0.0 || !a.is_finite() {
        return (x1, y1);
    }
    let b = d01 - a * (x0 + x1);
    let xv = (-b / (2.0 * a)).clamp(x0, x2);
    let yv = y1 + (xv - x1) * (d01 + a * (xv - x0));
    (xv, yv)
}

/// Least-squares slope of `ys` against `xs` for a line through the origin,
/// `sum(x y) / sum(x^2)`.
pub fn fit_slope_through_origin(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::DegenerateFit(format!(
            "length mismatch {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    if sxx == 0.0 {
        return Err(Error::DegenerateFit("all abscissae are zero".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    Ok(sxy / sxx)
}
