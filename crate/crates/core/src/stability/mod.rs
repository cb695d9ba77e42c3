//! Local stability, non-oscillatory convergence and rate of convergence of a
//! single vehicle pair, plus platoon-level reports and parameter charts.
//!
//! Every pair `i` of the linearised platoon has the characteristic function
//! `λ² + κaλe^{-λτ_i} + κ²d e^{-λτ_i}`, so all questions reduce to one
//! quasi-polynomial per pair.

pub mod contour;
pub mod quasi;
pub mod spectral;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MovmError, Result};
use crate::model::{Equilibrium, PlatoonConfig};
use crate::simulator::Trajectory;
pub use contour::{count_zeros, Rect, SearchOptions};
pub use quasi::QuasiPolynomial;

/// `m₋ = -2 - √2`, the branch used for the non-oscillatory boundary.
pub const M_MINUS: f64 = -2.0 - std::f64::consts::SQRT_2;
/// `m₊ = -2 + √2`.
pub const M_PLUS: f64 = -2.0 + std::f64::consts::SQRT_2;

/// Node counts of the two pseudospectral resolutions used as cross-check.
pub const SPECTRAL_NODES: (usize, usize) = (40, 60);
/// Allowed disagreement between root-finding methods.
pub const METHOD_TOL: f64 = 1e-4;

fn check_positive(a: f64, d_tilde: f64) -> Result<()> {
    if !(a.is_finite() && a > 0.0) {
        return Err(MovmError::param(format!(
            "sensitivity a must be positive, got {a}"
        )));
    }
    if !(d_tilde.is_finite() && d_tilde > 0.0) {
        return Err(MovmError::param(format!(
            "d_tilde must be positive, got {d_tilde}"
        )));
    }
    Ok(())
}

fn check_delay(tau: f64) -> Result<()> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(MovmError::param(format!(
            "delay must be non-negative, got {tau}"
        )));
    }
    Ok(())
}

/// Stability of the delay-free pair `λ² + aλ + a d̃`.
pub fn no_delay_stable(a: f64, d_tilde: f64) -> bool {
    a > 0.0 && d_tilde > 0.0
}

/// Sufficient condition `max(a, d̃) τ < 1`.
pub fn small_delay_sufficient(a: f64, d_tilde: f64, tau: f64) -> bool {
    a.max(d_tilde) * tau < 1.0
}

/// `χ = sqrt(a (a + sqrt(a² + 4d̃²)) / 2)`, the crossing frequency at `κ = 1`
/// scaled so that `ω = κχ`.
pub fn chi(a: f64, d_tilde: f64) -> Result<f64> {
    check_positive(a, d_tilde)?;
    Ok((a * (a + (a * a + 4.0 * d_tilde * d_tilde).sqrt()) / 2.0).sqrt())
}

/// Critical delay `τ_cr = atan(χ/d̃)/χ`; the pair is locally stable iff
/// `τ < τ_cr`.
pub fn critical_delay(a: f64, d_tilde: f64) -> Result<f64> {
    let x = chi(a, d_tilde)?;
    Ok((x / d_tilde).atan() / x)
}

/// Hopf crossing of one pair, parametrised by `κ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopfPoint {
    pub chi: f64,
    pub omega0: f64,
    pub kappa_cr: f64,
    pub tau_cr: f64,
}

pub fn hopf_point(a: f64, d_tilde: f64, tau: f64) -> Result<HopfPoint> {
    check_delay(tau)?;
    let x = chi(a, d_tilde)?;
    if tau == 0.0 {
        return Err(MovmError::Degenerate("no finite κ_cr without delay".into()));
    }
    let phi = (x / d_tilde).atan();
    Ok(HopfPoint {
        chi: x,
        omega0: phi / tau,
        kappa_cr: phi / (tau * x),
        tau_cr: phi / x,
    })
}

/// `dλ/dκ` at the Hopf crossing, from implicit differentiation of the
/// characteristic function.
pub fn crossing_velocity(a: f64, d_tilde: f64, tau: f64) -> Result<Complex64> {
    let hp = hopf_point(a, d_tilde, tau)?;
    let k = hp.kappa_cr;
    let d = a * d_tilde;
    let lam = Complex64::new(0.0, hp.omega0);
    let e = (-lam * tau).exp();
    let f_lam = lam * 2.0 + e * (k * a) - (lam * (k * a) + k * k * d) * e * tau;
    let f_kappa = (lam * a + 2.0 * k * d) * e;
    Ok(-f_kappa / f_lam)
}

/// `Re((dλ/dκ)⁻¹)` at the crossing. Its sign is that of `Re(dλ/dκ)`, and it
/// is positive everywhere: roots always cross from left to right.
pub fn transversality(a: f64, d_tilde: f64, tau: f64) -> Result<f64> {
    Ok(crossing_velocity(a, d_tilde, tau)?.inv().re)
}

/// The closed-form expression
/// `κω²τ(κ²d̃cos ωτ + ω²) / ((κ²d̃cos ωτ + ω)² + (κ²d̃ sin ωτ)²)`
/// as it is commonly quoted. It is positive but does not equal the exact
/// derivative; kept for comparison.
pub fn transversality_printed(a: f64, d_tilde: f64, tau: f64) -> Result<f64> {
    let hp = hopf_point(a, d_tilde, tau)?;
    let (k, w) = (hp.kappa_cr, hp.omega0);
    let c = k * k * d_tilde * (w * tau).cos();
    let s = k * k * d_tilde * (w * tau).sin();
    Ok(k * w * w * tau * (c + w * w) / ((c + w).powi(2) + s * s))
}

/// Delay below which the pair is claimed to converge without oscillation,
/// `τ_noc = ln(-a(m+1)/(m²d̃)) / (m d̃)` with `m = m₋`.
///
/// Absent when the logarithm's argument is not positive or the value falls
/// outside `(0, τ_cr)`.
pub fn noc_boundary(a: f64, d_tilde: f64) -> Option<f64> {
    let tau_cr = critical_delay(a, d_tilde).ok()?;
    let m = M_MINUS;
    let arg = -a * (m + 1.0) / (m * m * d_tilde);
    if arg <= 0.0 {
        return None;
    }
    let t = arg.ln() / (m * d_tilde);
    (t > 0.0 && t < tau_cr).then_some(t)
}

/// Residuals `((aσ+d)² - σ⁴e^{2στ}, a² - 2σ²e^{2στ})` of the two conditions
/// for a real root at `σ`, each divided by the magnitude of its terms.
pub fn noc_residuals(a: f64, d_tilde: f64, sigma: f64, tau: f64) -> (f64, f64) {
    let d = a * d_tilde;
    let e = (2.0 * sigma * tau).exp();
    let l1 = (a * sigma + d).powi(2);
    let r1 = sigma.powi(4) * e;
    let l2 = a * a;
    let r2 = 2.0 * sigma * sigma * e;
    (
        (l1 - r1) / l1.abs().max(r1.abs()).max(1.0),
        (l2 - r2) / l2.max(r2.abs()).max(1.0),
    )
}

/// Rightmost zero of a quasi-polynomial by the argument principle, checked
/// against the pseudospectral generator at two resolutions.
pub fn rightmost_root_of(q: &QuasiPolynomial) -> Result<Complex64> {
    let ap = contour::rightmost_root(q, SearchOptions::default())?;
    let ps = spectral::rightmost_checked(q, SPECTRAL_NODES, METHOD_TOL)?;
    if (ap.re - ps.re).abs() > METHOD_TOL {
        return Err(MovmError::NonConvergence(format!(
            "argument principle ({}) and pseudospectral ({}) rightmost roots disagree",
            ap.re, ps.re
        )));
    }
    Ok(ap)
}

/// Rightmost root of `λ² + κaλe^{-λτ} + κ²a d̃ e^{-λτ}`.
pub fn rightmost_root(a: f64, d_tilde: f64, tau: f64, kappa: f64) -> Result<Complex64> {
    check_positive(a, d_tilde)?;
    check_delay(tau)?;
    if !(kappa > 0.0) {
        return Err(MovmError::param(format!(
            "kappa must be positive, got {kappa}"
        )));
    }
    rightmost_root_of(&QuasiPolynomial::movm(a, d_tilde, tau, kappa))
}

pub fn rightmost_root_real_part(a: f64, d_tilde: f64, tau: f64, kappa: f64) -> Result<f64> {
    Ok(rightmost_root(a, d_tilde, tau, kappa)?.re)
}

/// The exponentially shifted characteristic function
/// `λ² - (2σ/τ)λ + a e^σ λe^{-λτ} + (d - aσ/τ)e^σ e^{-λτ} + σ²/τ²`
/// for a dimensionless shift `σ`.
pub fn shifted_characteristic(a: f64, d_tilde: f64, tau: f64, sigma: f64) -> QuasiPolynomial {
    let d = a * d_tilde;
    QuasiPolynomial {
        c1: -2.0 * sigma / tau,
        c0: sigma * sigma / (tau * tau),
        b1: a * sigma.exp(),
        b0: (d - a * sigma / tau) * sigma.exp(),
        tau,
    }
}

fn all_left(q: &QuasiPolynomial) -> Result<bool> {
    let h = 1.05 * q.modulus_bound(0.0) + 1.0;
    Ok(count_zeros(
        q,
        Rect {
            re_lo: 0.0,
            re_hi: h,
            im_lo: -h,
            im_hi: h,
        },
    )? == 0)
}

/// Largest dimensionless shift `σ ≥ 0` keeping every root of the shifted
/// characteristic function in the open left half-plane (bisection).
pub fn rate_of_convergence_dimensionless(a: f64, d_tilde: f64, tau: f64) -> Result<f64> {
    check_positive(a, d_tilde)?;
    check_delay(tau)?;
    if tau == 0.0 {
        return Ok(0.0);
    }
    if tau >= critical_delay(a, d_tilde)? {
        return Ok(0.0);
    }
    let stable_at = |s: f64| -> Result<bool> {
        let mut s = s;
        for _ in 0..4 {
            match all_left(&shifted_characteristic(a, d_tilde, tau, s)) {
                Ok(b) => return Ok(b),
                Err(_) => s *= 1.0 + 1e-11,
            }
        }
        all_left(&shifted_characteristic(a, d_tilde, tau, s))
    };
    let (mut lo, mut hi) = (0.0, 0.5);
    while stable_at(hi)? {
        lo = hi;
        hi *= 2.0;
        if hi > 1e3 {
            return Err(MovmError::NonConvergence(
                "rate of convergence is unbounded".into(),
            ));
        }
    }
    while hi - lo > 1e-11 * hi.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if stable_at(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Exponential rate of convergence in 1/s: the dimensionless shift divided
/// by `τ`. Zero at and beyond the critical delay.
pub fn rate_of_convergence(a: f64, d_tilde: f64, tau: f64) -> Result<f64> {
    check_positive(a, d_tilde)?;
    check_delay(tau)?;
    if tau == 0.0 {
        let q = QuasiPolynomial::movm(a, d_tilde, 0.0, 1.0);
        let [r1, r2] = q.delay_free_roots();
        return Ok(-r1.re.max(r2.re));
    }
    Ok(rate_of_convergence_dimensionless(a, d_tilde, tau)? / tau)
}

/// [`rate_of_convergence`] with the bisection result compared against the
/// rightmost root of the unshifted function.
pub fn rate_of_convergence_checked(a: f64, d_tilde: f64, tau: f64) -> Result<f64> {
    let rate = rate_of_convergence(a, d_tilde, tau)?;
    if tau < critical_delay(a, d_tilde)? {
        let direct = -rightmost_root_real_part(a, d_tilde, tau, 1.0)?;
        if (rate - direct).abs() > 1e-5 {
            return Err(MovmError::NonConvergence(format!(
                "rate {rate} disagrees with rightmost root {direct}"
            )));
        }
    }
    Ok(rate)
}

/// Per-pair and total settling times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SettlingTimes {
    pub per_pair: Vec<f64>,
    pub total: f64,
}

/// Default band half-width `0.02 max(|y*|, ẋ₀)`.
pub fn default_settling_band(eq: &Equilibrium, x0_dot: f64) -> f64 {
    0.02 * eq.y_star.abs().max(x0_dot)
}

/// Time after which every later sample of pair `i` satisfies
/// `|v_i| ≤ ε` and `|y_i - y*| ≤ ε`; the total is their sum.
pub fn settling_time(traj: &Trajectory, epsilon: f64, eq: &Equilibrium) -> Result<SettlingTimes> {
    if !(epsilon > 0.0) {
        return Err(MovmError::param("settling band must be positive"));
    }
    let len = traj.len();
    let mut per_pair = Vec::with_capacity(traj.n());
    for i in 0..traj.n() {
        let (v, y) = (&traj.v[i], &traj.y[i]);
        let outside = (0..len)
            .rev()
            .find(|&k| v[k].abs() > epsilon || (y[k] - eq.y_star).abs() > epsilon);
        let t = match outside {
            None => 0.0,
            Some(k) if k + 1 == len => return Err(MovmError::NotSettled { vehicle: i + 1 }),
            Some(k) => traj.time(k + 1),
        };
        per_pair.push(t);
    }
    let total = per_pair.iter().sum();
    Ok(SettlingTimes { per_pair, total })
}

/// Stability record of one vehicle pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairStability {
    pub tau: f64,
    pub tau_cr: f64,
    pub tau_noc: Option<f64>,
    /// Rate of convergence in 1/s.
    pub sigma: f64,
    pub small_delay_sufficient: bool,
    pub locally_stable: bool,
    /// `τ < τ_noc`.
    pub non_oscillatory: bool,
    /// Whether the rightmost root is real (only computed for stable pairs).
    pub real_dominant: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub a: f64,
    pub d_tilde: f64,
    pub kappa: f64,
    pub pairs: Vec<PairStability>,
    /// Slowest pair's rate, in 1/s.
    pub platoon_sigma: f64,
    pub m_minus: f64,
    pub m_plus: f64,
}

pub fn pair_stability(a: f64, d_tilde: f64, tau: f64) -> Result<PairStability> {
    let tau_cr = critical_delay(a, d_tilde)?;
    let tau_noc = noc_boundary(a, d_tilde);
    let locally_stable = tau < tau_cr;
    let sigma = if locally_stable {
        rate_of_convergence(a, d_tilde, tau)?
    } else {
        0.0
    };
    let real_dominant = if locally_stable {
        let r = rightmost_root(a, d_tilde, tau, 1.0)?;
        Some(r.im.abs() < 1e-6)
    } else {
        None
    };
    Ok(PairStability {
        tau,
        tau_cr,
        tau_noc,
        sigma,
        small_delay_sufficient: small_delay_sufficient(a, d_tilde, tau),
        locally_stable,
        non_oscillatory: tau_noc.is_some_and(|t| tau < t),
        real_dominant,
    })
}

/// Per-pair analysis of a platoon at `κ = 1`. The delays are scaled by the
/// configured `κ` (a uniform `κ` is equivalent to stretching every delay).
pub fn stability_report(config: &PlatoonConfig) -> Result<StabilityReport> {
    let eq = config.equilibrium()?;
    let pairs = config
        .tau
        .par_iter()
        .map(|&t| pair_stability(config.a, eq.d_tilde, config.kappa * t))
        .collect::<Result<Vec<_>>>()?;
    let platoon_sigma = pairs.iter().map(|p| p.sigma).fold(f64::INFINITY, f64::min);
    Ok(StabilityReport {
        a: config.a,
        d_tilde: eq.d_tilde,
        kappa: config.kappa,
        pairs,
        platoon_sigma,
        m_minus: M_MINUS,
        m_plus: M_PLUS,
    })
}

/// One row of a stability chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartRow {
    pub a: f64,
    pub d_tilde: f64,
    pub tau_cr: f64,
    pub tau_noc: Option<f64>,
    /// Rate of convergence (1/s) at the probe delay.
    pub sigma: f64,
    /// Small-delay bound `1 / max(a, d̃)`.
    pub sc_bound: f64,
}

/// A numerical failure at a grid point.
#[derive(Debug)]
pub struct GridFailure {
    pub index: usize,
    pub a: f64,
    pub tau: f64,
    pub error: MovmError,
}

/// Chart rows over `a_values` at fixed `d̃`; `sigma` is evaluated at
/// `probe_tau`. Row order follows `a_values` irrespective of scheduling.
pub fn stability_chart(
    d_tilde: f64,
    a_values: &[f64],
    probe_tau: f64,
) -> std::result::Result<Vec<ChartRow>, GridFailure> {
    a_values
        .par_iter()
        .enumerate()
        .map(|(index, &a)| {
            let fail = |error| GridFailure {
                index,
                a,
                tau: probe_tau,
                error,
            };
            let tau_cr = critical_delay(a, d_tilde).map_err(fail)?;
            let sigma = rate_of_convergence(a, d_tilde, probe_tau).map_err(fail)?;
            Ok(ChartRow {
                a,
                d_tilde,
                tau_cr,
                tau_noc: noc_boundary(a, d_tilde),
                sigma,
                sc_bound: 1.0 / a.max(d_tilde),
            })
        })
        .collect()
}

/// One `(a, τ, σ)` sample of the rate-of-convergence surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocSample {
    pub a: f64,
    pub tau: f64,
    pub tau_cr: f64,
    pub sigma: f64,
}

/// Rate of convergence over `a_values × {τ_cr(a)·k/(n_tau-1)}`, k = 0..n_tau-1.
pub fn roc_grid(
    d_tilde: f64,
    a_values: &[f64],
    n_tau: usize,
) -> std::result::Result<Vec<RocSample>, GridFailure> {
    let n_tau = n_tau.max(1);
    let points: Vec<(usize, f64, usize)> = a_values
        .iter()
        .enumerate()
        .flat_map(|(i, &a)| (0..n_tau).map(move |k| (i, a, k)))
        .collect();
    points
        .par_iter()
        .enumerate()
        .map(|(index, &(_, a, k))| {
            let tau_cr = critical_delay(a, d_tilde).map_err(|error| GridFailure {
                index,
                a,
                tau: 0.0,
                error,
            })?;
            let tau = if n_tau == 1 {
                0.0
            } else {
                tau_cr * k as f64 / (n_tau - 1) as f64
            };
            let sigma = rate_of_convergence(a, d_tilde, tau).map_err(|error| GridFailure {
                index,
                a,
                tau,
                error,
            })?;
            Ok(RocSample {
                a,
                tau,
                tau_cr,
                sigma,
            })
        })
        .collect()
}
