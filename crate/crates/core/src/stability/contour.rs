//! Zero counting by the argument principle and a rightmost-root search built
//! on it.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::quasi::QuasiPolynomial;
use crate::error::{MovmError, Result};

const MAX_DEPTH: u32 = 48;
const MAX_PHASE_STEP: f64 = PI / 4.0;

/// Axis-aligned rectangle `[re_lo, re_hi] × [im_lo, im_hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub re_lo: f64,
    pub re_hi: f64,
    pub im_lo: f64,
    pub im_hi: f64,
}

fn phase(w: Complex64) -> f64 {
    w.im.atan2(w.re)
}

fn edge_phase(
    q: &QuasiPolynomial,
    za: Complex64,
    zb: Complex64,
    fa: Complex64,
    fb: Complex64,
    depth: u32,
) -> Option<f64> {
    let zm = (za + zb) * 0.5;
    let fm = q.eval(zm);
    if fm.norm() == 0.0 || !fm.is_finite() {
        return None;
    }
    let d1 = phase(fm / fa);
    let d2 = phase(fb / fm);
    let d = phase(fb / fa);
    if d1.abs() < MAX_PHASE_STEP && d2.abs() < MAX_PHASE_STEP && (d1 + d2 - d).abs() < 1e-9 {
        return Some(d1 + d2);
    }
    if depth >= MAX_DEPTH {
        return None;
    }
    Some(edge_phase(q, za, zm, fa, fm, depth + 1)? + edge_phase(q, zm, zb, fm, fb, depth + 1)?)
}

/// Total change of `arg f` along the segment `za → zb`, or `None` when the
/// segment passes (numerically) through a zero.
fn segment_phase(q: &QuasiPolynomial, za: Complex64, zb: Complex64) -> Option<f64> {
    let len = (zb - za).norm();
    let pieces = 16 + (4.0 * len * q.tau).ceil() as usize;
    let mut total = 0.0;
    let mut z0 = za;
    let mut f0 = q.eval(za);
    if f0.norm() == 0.0 {
        return None;
    }
    for k in 1..=pieces {
        let z1 = za + (zb - za) * (k as f64 / pieces as f64);
        let f1 = q.eval(z1);
        if f1.norm() == 0.0 || !f1.is_finite() {
            return None;
        }
        total += edge_phase(q, z0, z1, f0, f1, 0)?;
        z0 = z1;
        f0 = f1;
    }
    Some(total)
}

/// Number of zeros of `q` inside `rect`, counted with multiplicity.
///
/// Fails when a zero lies on (or numerically on) the boundary.
pub fn count_zeros(q: &QuasiPolynomial, rect: Rect) -> Result<usize> {
    let c = [
        Complex64::new(rect.re_lo, rect.im_lo),
        Complex64::new(rect.re_hi, rect.im_lo),
        Complex64::new(rect.re_hi, rect.im_hi),
        Complex64::new(rect.re_lo, rect.im_hi),
    ];
    let mut total = 0.0;
    for k in 0..4 {
        total += segment_phase(q, c[k], c[(k + 1) % 4])
            .ok_or_else(|| MovmError::NonConvergence(format!("zero on contour {rect:?}")))?;
    }
    let w = total / (2.0 * PI);
    let n = w.round();
    if (w - n).abs() > 0.05 || n < 0.0 {
        return Err(MovmError::NonConvergence(format!(
            "winding number {w} is not an integer on {rect:?}"
        )));
    }
    Ok(n as usize)
}

/// Search controls for [`rightmost_root`].
#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    /// Absolute width of the bracket on `Re λ` before Newton polishing.
    pub bracket_width: f64,
    /// Certification offset: no zero may lie to the right of `Re λ* + certify`.
    pub certify: f64,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            bracket_width: 1e-4,
            certify: 1e-9,
        }
    }
}

struct Counter<'a> {
    q: &'a QuasiPolynomial,
    scale: f64,
}

impl Counter<'_> {
    /// Half-height of the contour that encloses every zero with `Re λ ≥ s`.
    fn height(&self, s: f64) -> f64 {
        let rigorous = self.q.modulus_bound(s);
        let heuristic = if self.q.tau > 0.0 {
            4.0 * self.scale + 10.0 / self.q.tau
        } else {
            4.0 * self.scale
        };
        1.05 * rigorous.max(heuristic.min(2.0 * rigorous + self.scale))
    }

    fn right_of(&self, s: f64) -> Result<usize> {
        let mut s = s;
        let mut last = None;
        for attempt in 0..6 {
            let h = self.height(s);
            let rect = Rect {
                re_lo: s,
                re_hi: s.max(0.0) + h,
                im_lo: -h,
                im_hi: h,
            };
            match count_zeros(self.q, rect) {
                Ok(n) => return Ok(n),
                Err(e) => last = Some(e),
            }
            // nudge off a zero that sits on the left edge
            s += 1e-12 * self.scale * (1u64 << (2 * attempt)) as f64;
        }
        Err(last.expect("at least one attempt"))
    }

    fn in_box(&self, re_lo: f64, im_lo: f64, im_hi: f64) -> Result<usize> {
        let h = self.height(re_lo);
        count_zeros(
            self.q,
            Rect {
                re_lo,
                re_hi: re_lo.max(0.0) + h,
                im_lo,
                im_hi,
            },
        )
    }
}

/// Rightmost zero of `q` (with `Im ≥ 0`), located by argument-principle
/// bisection on `Re λ` and polished by Newton's method.
pub fn rightmost_root(q: &QuasiPolynomial, opts: SearchOptions) -> Result<Complex64> {
    if q.tau == 0.0 {
        let [r1, r2] = q.delay_free_roots();
        let r = if r1.re >= r2.re { r1 } else { r2 };
        return Ok(Complex64::new(r.re, r.im.abs()));
    }
    let counter = Counter {
        q,
        scale: q.scale(),
    };
    let scale = counter.scale;

    let mut hi = q.modulus_bound(0.0) + scale;
    let mut lo = 0.0;
    let mut step = 0.25 * scale;
    let mut tries = 0;
    while counter.right_of(lo)? == 0 {
        hi = lo;
        lo -= step;
        step *= 2.0;
        tries += 1;
        if tries > 40 {
            return Err(MovmError::NonConvergence(
                "no zero found in any right half-plane".into(),
            ));
        }
    }

    for _ in 0..8 {
        while hi - lo > opts.bracket_width * scale.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if counter.right_of(mid)? > 0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let guess = locate_in_strip(&counter, lo, hi)?;
        if let Some(r) = q.newton(guess, 60) {
            let r = Complex64::new(r.re, r.im.abs());
            let slack = 10.0 * (hi - lo);
            if r.re > lo - slack && r.re < hi + slack {
                let edge = r.re + opts.certify * scale.max(1.0);
                if counter.right_of(edge)? == 0 {
                    return Ok(r);
                }
                lo = edge;
                continue;
            }
        }
        // Newton escaped the strip: tighten the bracket and try again.
        let w = hi - lo;
        let mid = 0.5 * (lo + hi);
        if counter.right_of(mid)? > 0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if w < 1e-14 * scale {
            break;
        }
    }
    Err(MovmError::NonConvergence(
        "rightmost-root polishing failed".into(),
    ))
}

fn locate_in_strip(counter: &Counter<'_>, lo: f64, hi: f64) -> Result<Complex64> {
    let w = (hi - lo).max(1e-12);
    let mut y_lo = -0.31 * w;
    let mut y_hi = counter.height(lo);
    while y_hi - y_lo > 4.0 * w {
        let ym = 0.5 * (y_lo + y_hi) + 0.0137 * (y_hi - y_lo);
        match counter.in_box(lo, ym, y_hi) {
            Ok(n) if n > 0 => y_lo = ym,
            Ok(_) => y_hi = ym,
            Err(_) => {
                // a zero on the cut: that is as good a location as any
                return Ok(Complex64::new(0.5 * (lo + hi), ym));
            }
        }
    }
    Ok(Complex64::new(
        0.5 * (lo + hi),
        0.5 * (y_lo + y_hi).max(0.0),
    ))
}
