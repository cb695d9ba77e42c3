use serde::{Deserialize, Serialize};

use crate::error::{MovmError, Result};

/// Velocity profile of the lead vehicle.
///
/// Before `t = 0` the profile is held at its `t = 0` value with zero
/// acceleration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LeaderProfile {
    /// `v_inf (1 - e^{-rate t})`.
    SmoothExponential {
        v_inf: f64,
        rate: f64,
    },
    Constant {
        v: f64,
    },
    /// Linear interpolation between `(t, v)` knots, constant outside them.
    PiecewiseLinear {
        knots: Vec<(f64, f64)>,
    },
}

impl LeaderProfile {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            LeaderProfile::SmoothExponential { v_inf, rate } => *v_inf > 0.0 && *rate > 0.0,
            LeaderProfile::Constant { v } => *v > 0.0,
            LeaderProfile::PiecewiseLinear { knots } => {
                !knots.is_empty()
                    && knots.windows(2).all(|w| w[1].0 > w[0].0)
                    && knots.iter().all(|(t, v)| t.is_finite() && v.is_finite())
                    && knots.last().is_some_and(|k| k.1 > 0.0)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(MovmError::config(format!(
                "invalid leader profile {self:?}"
            )))
        }
    }

    pub fn velocity(&self, t: f64) -> f64 {
        let t = t.max(0.0);
        match self {
            LeaderProfile::SmoothExponential { v_inf, rate } => v_inf * (-(-rate * t).exp_m1()),
            LeaderProfile::Constant { v } => *v,
            LeaderProfile::PiecewiseLinear { knots } => {
                let first = knots[0];
                let last = knots[knots.len() - 1];
                if t <= first.0 {
                    return first.1;
                }
                if t >= last.0 {
                    return last.1;
                }
                let k = knots.partition_point(|p| p.0 <= t);
                let (t0, v0) = knots[k - 1];
                let (t1, v1) = knots[k];
                v0 + (v1 - v0) * (t - t0) / (t1 - t0)
            }
        }
    }

    pub fn acceleration(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        match self {
            LeaderProfile::SmoothExponential { v_inf, rate } => v_inf * rate * (-rate * t).exp(),
            LeaderProfile::Constant { .. } => 0.0,
            LeaderProfile::PiecewiseLinear { knots } => {
                if t < knots[0].0 || t >= knots[knots.len() - 1].0 {
                    return 0.0;
                }
                let k = knots.partition_point(|p| p.0 <= t);
                let (t0, v0) = knots[k - 1];
                let (t1, v1) = knots[k];
                (v1 - v0) / (t1 - t0)
            }
        }
    }

    /// Velocity the profile settles to.
    pub fn final_velocity(&self) -> f64 {
        match self {
            LeaderProfile::SmoothExponential { v_inf, .. } => *v_inf,
            LeaderProfile::Constant { v } => *v,
            LeaderProfile::PiecewiseLinear { knots } => knots[knots.len() - 1].1,
        }
    }
}
