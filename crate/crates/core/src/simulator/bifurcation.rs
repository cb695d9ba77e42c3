use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cycle_frequency, limit_cycle_amplitude, simulate_with, InitialState, SimOptions};
use crate::error::{MovmError, Result};
use crate::model::PlatoonConfig;
use crate::stability;

/// Controls for [`bifurcation_diagram`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationOptions {
    /// 1-based pair whose amplitude is recorded; defaults to the pair with
    /// the largest delay (the first to lose stability).
    pub vehicle: Option<usize>,
    pub ts: f64,
    /// Fixed horizon; by default it is chosen per `κ` from the linear
    /// growth rate, at least `400/ω₀` and at most `max_horizon`.
    pub horizon: Option<f64>,
    pub max_horizon: f64,
    pub settle_fraction: f64,
    /// Initial headway offset (m) of the recorded pair. Zero relies on the
    /// leader profile alone for excitation.
    pub perturbation: f64,
    /// Decimation of the stored trajectory.
    pub stride: usize,
}

impl Default for BifurcationOptions {
    fn default() -> Self {
        BifurcationOptions {
            vehicle: None,
            ts: super::DEFAULT_TS,
            horizon: None,
            max_horizon: 3000.0,
            settle_fraction: super::DEFAULT_SETTLE_FRACTION,
            perturbation: 1e-4,
            stride: 10,
        }
    }
}

/// Outcome at one `κ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BifurcationPoint {
    pub kappa: f64,
    /// Half peak-to-peak of the recorded relative velocity over the retained
    /// window (present unless the run itself failed).
    pub amplitude: Option<f64>,
    /// Angular frequency of the cycle, when one is present.
    pub frequency: Option<f64>,
    pub horizon: f64,
    /// `ok`, `non_stationary`, `blow_up` or another failure tag.
    pub status: String,
    pub message: Option<String>,
}

impl BifurcationPoint {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Pair with the largest delay, 1-based.
pub fn designated_pair(config: &PlatoonConfig) -> usize {
    config
        .tau
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, &t)| {
            if t > best.1 {
                (i, t)
            } else {
                best
            }
        })
        .0
        + 1
}

fn horizon_for(
    config: &PlatoonConfig,
    vehicle: usize,
    kappa: f64,
    opts: &BifurcationOptions,
) -> Result<f64> {
    if let Some(h) = opts.horizon {
        return Ok(h);
    }
    let eq = config.equilibrium()?;
    let tau = config.tau[vehicle - 1];
    let hp = stability::hopf_point(config.a, eq.d_tilde, tau)?;
    let speed = stability::crossing_velocity(config.a, eq.d_tilde, tau)?.re;
    let growth = (speed * (kappa - hp.kappa_cr)).abs();
    let base = 400.0 / hp.omega0;
    let needed = if growth > 0.0 {
        24.0 / growth
    } else {
        f64::INFINITY
    };
    Ok(base.max(needed).min(opts.max_horizon).max(base))
}

fn run_point(
    config: &PlatoonConfig,
    vehicle: usize,
    kappa: f64,
    opts: &BifurcationOptions,
) -> BifurcationPoint {
    let failed = |status: &str, e: MovmError, horizon| BifurcationPoint {
        kappa,
        amplitude: None,
        frequency: None,
        horizon,
        status: status.into(),
        message: Some(e.to_string()),
    };
    let horizon = match horizon_for(config, vehicle, kappa, opts) {
        Ok(h) => h,
        Err(e) => return failed("invalid", e, 0.0),
    };
    let cfg = config.with_kappa(kappa);
    let eq = match cfg.equilibrium() {
        Ok(eq) => eq,
        Err(e) => return failed("invalid", e, horizon),
    };
    let mut y = vec![eq.y_star; cfg.n];
    y[vehicle - 1] += opts.perturbation;
    let sim = SimOptions {
        horizon,
        ts: opts.ts,
        stride: opts.stride,
        initial: Some(InitialState {
            v: vec![0.0; cfg.n],
            y,
        }),
    };
    let traj = match simulate_with(&cfg, &sim) {
        Ok(t) => t,
        Err(e @ MovmError::BlowUp { .. }) => return failed("blow_up", e, horizon),
        Err(e) => return failed("simulation_failed", e, horizon),
    };
    let frequency = cycle_frequency(&traj, vehicle, opts.settle_fraction).ok();
    match limit_cycle_amplitude(&traj, vehicle, opts.settle_fraction) {
        Ok(a) => BifurcationPoint {
            kappa,
            amplitude: Some(a),
            frequency: frequency.filter(|_| a > 0.0),
            horizon,
            status: "ok".into(),
            message: None,
        },
        Err(e @ MovmError::NonStationary { .. }) => {
            let start = (opts.settle_fraction * traj.len() as f64) as usize;
            let w = &traj.v[vehicle - 1][start..];
            let (lo, hi) = w
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| {
                    (l.min(x), h.max(x))
                });
            BifurcationPoint {
                kappa,
                amplitude: Some(0.5 * (hi - lo)),
                frequency,
                horizon,
                status: "non_stationary".into(),
                message: Some(e.to_string()),
            }
        }
        Err(e) => failed("metric_failed", e, horizon),
    }
}

/// Amplitude of the designated pair's limit cycle for each `κ`, computed
/// in parallel. Output order follows `kappa_values`.
pub fn bifurcation_diagram(
    config: &PlatoonConfig,
    kappa_values: &[f64],
    opts: &BifurcationOptions,
) -> Result<Vec<BifurcationPoint>> {
    config.validate()?;
    let vehicle = opts.vehicle.unwrap_or_else(|| designated_pair(config));
    if vehicle == 0 || vehicle > config.n {
        return Err(MovmError::param(format!(
            "vehicle {vehicle} is outside 1..={}",
            config.n
        )));
    }
    if config.tau[vehicle - 1] == 0.0 {
        return Err(MovmError::Degenerate("designated pair has no delay".into()));
    }
    if let Some(k) = kappa_values.iter().find(|k| !(k.is_finite() && **k > 0.0)) {
        return Err(MovmError::param(format!(
            "kappa values must be positive, got {k}"
        )));
    }
    Ok(kappa_values
        .par_iter()
        .map(|&k| run_point(config, vehicle, k, opts))
        .collect())
}
