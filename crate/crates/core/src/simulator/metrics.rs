use super::Trajectory;
use crate::error::{MovmError, Result};

pub const DEFAULT_SETTLE_FRACTION: f64 = 0.5;
/// Peak-to-peak swings below this count as no oscillation.
const FLAT: f64 = 1e-6;
/// Largest relative change of amplitude between the two halves of the
/// retained window.
const STATIONARITY: f64 = 0.05;
/// Deviations smaller than this never register as a sign change.
const DEADBAND: f64 = 1e-9;

fn half_amplitude(x: &[f64]) -> f64 {
    let (lo, hi) = x
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    0.5 * (hi - lo)
}

fn retained(traj: &Trajectory, settle_fraction: f64) -> Result<usize> {
    if !(0.0..1.0).contains(&settle_fraction) {
        return Err(MovmError::param(format!(
            "settle fraction must lie in [0, 1), got {settle_fraction}"
        )));
    }
    let start = (settle_fraction * traj.len() as f64).floor() as usize;
    if traj.len() - start < 4 {
        return Err(MovmError::param("too few samples after the settling cut"));
    }
    Ok(start)
}

/// `(max - min)/2` of `v_vehicle` after discarding the first
/// `settle_fraction` of the samples. `vehicle` is 1-based.
///
/// Fails with [`MovmError::NonStationary`] when the two halves of the
/// retained window differ by more than 5%.
pub fn limit_cycle_amplitude(
    traj: &Trajectory,
    vehicle: usize,
    settle_fraction: f64,
) -> Result<f64> {
    let i = traj.pair(vehicle)?;
    let start = retained(traj, settle_fraction)?;
    let w = &traj.v[i][start..];
    if 2.0 * half_amplitude(w) < FLAT {
        return Ok(0.0);
    }
    let mid = w.len() / 2;
    let (first, second) = (half_amplitude(&w[..mid]), half_amplitude(&w[mid..]));
    if (first - second).abs() > STATIONARITY * first.max(second) {
        return Err(MovmError::NonStationary { first, second });
    }
    Ok(half_amplitude(w))
}

/// Sign changes of `y_vehicle - y*` after `transient_cut` seconds.
pub fn oscillation_count(traj: &Trajectory, vehicle: usize, transient_cut: f64) -> Result<usize> {
    let i = traj.pair(vehicle)?;
    let start = ((transient_cut / traj.dt).ceil().max(0.0) as usize).min(traj.len());
    let mut last = 0i8;
    let mut count = 0;
    for &h in &traj.y[i][start..] {
        let e = h - traj.y_star;
        let s = if e > DEADBAND {
            1
        } else if e < -DEADBAND {
            -1
        } else {
            0
        };
        if s != 0 {
            if last != 0 && s != last {
                count += 1;
            }
            last = s;
        }
    }
    Ok(count)
}

/// Angular frequency (rad/s) of `v_vehicle` estimated from the mean spacing
/// of upward crossings of its mean over the retained window.
pub fn cycle_frequency(traj: &Trajectory, vehicle: usize, settle_fraction: f64) -> Result<f64> {
    let i = traj.pair(vehicle)?;
    let start = retained(traj, settle_fraction)?;
    let w = &traj.v[i][start..];
    let mean = w.iter().sum::<f64>() / w.len() as f64;
    let mut crossings = Vec::new();
    for k in 1..w.len() {
        let (a, b) = (w[k - 1] - mean, w[k] - mean);
        if a < 0.0 && b >= 0.0 {
            let frac = a / (a - b);
            crossings.push((start + k - 1) as f64 * traj.dt + frac * traj.dt);
        }
    }
    if crossings.len() < 3 {
        return Err(MovmError::Degenerate(
            "fewer than three cycles in the window".into(),
        ));
    }
    let period = (crossings[crossings.len() - 1] - crossings[0]) / (crossings.len() - 1) as f64;
    Ok(2.0 * std::f64::consts::PI / period)
}

/// Maximum of `|v_vehicle|` in consecutive windows of `window` seconds
/// starting at `t_start`, as `(window centre, peak)` pairs.
pub fn window_peaks(
    traj: &Trajectory,
    vehicle: usize,
    t_start: f64,
    window: f64,
) -> Result<Vec<(f64, f64)>> {
    let i = traj.pair(vehicle)?;
    if !(window > 0.0) {
        return Err(MovmError::param("window must be positive"));
    }
    let per = ((window / traj.dt).round() as usize).max(1);
    let start = (t_start / traj.dt).round().max(0.0) as usize;
    let v = &traj.v[i];
    let mut out = Vec::new();
    let mut k = start;
    while k + per <= v.len() {
        let peak = v[k..k + per].iter().fold(0.0f64, |m, x| m.max(x.abs()));
        out.push(((k as f64 + 0.5 * per as f64) * traj.dt, peak));
        k += per;
    }
    Ok(out)
}

/// Exponential decay rate (1/s) of the envelope of `v_vehicle` over
/// `[t_start, t_end]`: least-squares slope of the logarithm of window peaks.
pub fn envelope_decay_rate(
    traj: &Trajectory,
    vehicle: usize,
    t_start: f64,
    t_end: f64,
    window: f64,
) -> Result<f64> {
    let peaks: Vec<(f64, f64)> = window_peaks(traj, vehicle, t_start, window)?
        .into_iter()
        .filter(|(t, p)| *t <= t_end && *p > 0.0)
        .collect();
    if peaks.len() < 3 {
        return Err(MovmError::Degenerate("not enough envelope samples".into()));
    }
    let n = peaks.len() as f64;
    let mt = peaks.iter().map(|p| p.0).sum::<f64>() / n;
    let ml = peaks.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxy: f64 = peaks.iter().map(|p| (p.0 - mt) * (p.1.ln() - ml)).sum();
    let sxx: f64 = peaks.iter().map(|p| (p.0 - mt).powi(2)).sum();
    Ok(-sxy / sxx)
}
