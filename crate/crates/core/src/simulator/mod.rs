//! Fixed-step explicit Euler integration of the nonlinear platoon with one
//! delay buffer per pair, and the linearised counterpart.

mod bifurcation;
mod leader;
mod metrics;

use serde::{Deserialize, Serialize};

use crate::error::{MovmError, Result};
use crate::model::PlatoonConfig;
pub use bifurcation::{bifurcation_diagram, designated_pair, BifurcationOptions, BifurcationPoint};
pub use leader::LeaderProfile;
pub use metrics::{
    cycle_frequency, envelope_decay_rate, limit_cycle_amplitude, oscillation_count, window_peaks,
    DEFAULT_SETTLE_FRACTION,
};

/// Default integration step (s).
pub const DEFAULT_TS: f64 = 1e-4;
/// Any `|v|` or `|y|` beyond this aborts the run.
pub const BLOW_UP: f64 = 1e6;

/// Constant pre-history and initial value of the platoon state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub v: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOptions {
    pub horizon: f64,
    pub ts: f64,
    /// Keep every `stride`-th sample.
    pub stride: usize,
    pub initial: Option<InitialState>,
}

impl SimOptions {
    pub fn new(horizon: f64, ts: f64) -> Self {
        SimOptions {
            horizon,
            ts,
            stride: 1,
            initial: None,
        }
    }

    pub fn stride(mut self, stride: usize) -> Self {
        self.stride = stride;
        self
    }

    pub fn initial(mut self, initial: InitialState) -> Self {
        self.initial = Some(initial);
        self
    }
}

/// Sampled solution. `v[i][k]` and `y[i][k]` belong to pair `i + 1` at time
/// `k · dt`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    /// Integration step (s).
    pub ts: f64,
    /// Spacing of the stored samples (s).
    pub dt: f64,
    pub y_star: f64,
    pub v: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub leader_v: Vec<f64>,
    /// Delays in integration steps, `round(τ_i / ts)`.
    pub delay_steps: Vec<usize>,
    /// Some headway reached zero or below.
    pub collision: bool,
}

impl Trajectory {
    pub fn n(&self) -> usize {
        self.v.len()
    }

    pub fn len(&self) -> usize {
        self.leader_v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leader_v.is_empty()
    }

    pub fn time(&self, k: usize) -> f64 {
        k as f64 * self.dt
    }

    pub fn duration(&self) -> f64 {
        self.time(self.len().saturating_sub(1))
    }

    pub(crate) fn pair(&self, vehicle: usize) -> Result<usize> {
        if vehicle == 0 || vehicle > self.n() {
            return Err(MovmError::param(format!(
                "vehicle index {vehicle} is outside 1..={}",
                self.n()
            )));
        }
        Ok(vehicle - 1)
    }

    /// Largest deviation from equilibrium over all pairs and samples.
    pub fn max_deviation(&self) -> f64 {
        let dv = self.v.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        let dy = self
            .y
            .iter()
            .flatten()
            .fold(0.0f64, |m, x| m.max((x - self.y_star).abs()));
        dv.max(dy)
    }
}

fn check_options(config: &PlatoonConfig, opts: &SimOptions) -> Result<()> {
    config.validate()?;
    if !(opts.ts.is_finite() && opts.ts > 0.0) {
        return Err(MovmError::param(format!(
            "ts must be positive, got {}",
            opts.ts
        )));
    }
    if !(opts.horizon.is_finite() && opts.horizon > config.max_delay()) {
        return Err(MovmError::param(format!(
            "horizon {} must exceed the largest delay {}",
            opts.horizon,
            config.max_delay()
        )));
    }
    if opts.stride == 0 {
        return Err(MovmError::param("stride must be at least 1"));
    }
    if let Some(init) = &opts.initial {
        if init.v.len() != config.n || init.y.len() != config.n {
            return Err(MovmError::param(
                "initial state has the wrong number of pairs",
            ));
        }
    }
    Ok(())
}

/// Per-pair delay lines of `(v, y)` holding the last `depth` states.
struct History {
    depth: usize,
    v: Vec<Vec<f64>>,
    y: Vec<Vec<f64>>,
    init_v: Vec<f64>,
    init_y: Vec<f64>,
}

impl History {
    fn new(depth: usize, v0: &[f64], y0: &[f64]) -> Self {
        History {
            depth,
            v: v0.iter().map(|&x| vec![x; depth]).collect(),
            y: y0.iter().map(|&x| vec![x; depth]).collect(),
            init_v: v0.to_vec(),
            init_y: y0.to_vec(),
        }
    }

    fn push(&mut self, k: usize, v: &[f64], y: &[f64]) {
        let slot = k % self.depth;
        for i in 0..v.len() {
            self.v[i][slot] = v[i];
            self.y[i][slot] = y[i];
        }
    }

    /// State of pair `i` at step `k - lag` (`lag < depth`).
    fn get(&self, i: usize, k: usize, lag: usize) -> (f64, f64) {
        if lag > k {
            (self.init_v[i], self.init_y[i])
        } else {
            let slot = (k - lag) % self.depth;
            (self.v[i][slot], self.y[i][slot])
        }
    }
}

fn steps(opts: &SimOptions) -> usize {
    (opts.horizon / opts.ts).round() as usize
}

struct Recorder {
    stride: usize,
    traj: Trajectory,
}

impl Recorder {
    fn new(
        config: &PlatoonConfig,
        opts: &SimOptions,
        y_star: f64,
        delay_steps: Vec<usize>,
    ) -> Self {
        let cap = steps(opts) / opts.stride + 1;
        Recorder {
            stride: opts.stride,
            traj: Trajectory {
                ts: opts.ts,
                dt: opts.ts * opts.stride as f64,
                y_star,
                v: vec![Vec::with_capacity(cap); config.n],
                y: vec![Vec::with_capacity(cap); config.n],
                leader_v: Vec::with_capacity(cap),
                delay_steps,
                collision: false,
            },
        }
    }

    fn record(&mut self, k: usize, v: &[f64], y: &[f64], leader: f64) {
        if y.iter().any(|&h| h <= 0.0) {
            self.traj.collision = true;
        }
        if k.is_multiple_of(self.stride) {
            for i in 0..v.len() {
                self.traj.v[i].push(v[i]);
                self.traj.y[i].push(y[i]);
            }
            self.traj.leader_v.push(leader);
        }
    }
}

fn blown_up(k: usize, ts: f64, v: &[f64], y: &[f64]) -> Result<()> {
    for i in 0..v.len() {
        if !(v[i].abs() <= BLOW_UP && y[i].abs() <= BLOW_UP) {
            return Err(MovmError::BlowUp {
                t: k as f64 * ts,
                vehicle: i + 1,
            });
        }
    }
    Ok(())
}

/// Integrates the κ-scaled nonlinear platoon:
///
/// `v̇_1 = ẍ_0(t) + κa(ẋ_0(t-τ_1) - V(y_1(t-τ_1)) - v_1(t-τ_1))`,
/// `v̇_k = κa(V(y_{k-1}(t-τ_{k-1})) - V(y_k(t-τ_k)) - v_k(t-τ_k))`,
/// `ẏ_k = κ v_k`.
///
/// Delays are rounded to whole steps; the state before `t = 0` equals the
/// initial state, which defaults to the equilibrium.
pub fn simulate_with(config: &PlatoonConfig, opts: &SimOptions) -> Result<Trajectory> {
    check_options(config, opts)?;
    let eq = config.equilibrium()?;
    let n = config.n;
    let ts = opts.ts;
    let lags: Vec<usize> = config
        .tau
        .iter()
        .map(|t| (t / ts).round() as usize)
        .collect();
    let depth = lags.iter().copied().max().unwrap_or(0) + 1;
    let (mut v, mut y) = match &opts.initial {
        Some(s) => (s.v.clone(), s.y.clone()),
        None => (vec![0.0; n], vec![eq.y_star; n]),
    };
    let mut hist = History::new(depth, &v, &y);
    let mut rec = Recorder::new(config, opts, eq.y_star, lags.clone());
    let (mut v_del, mut y_del, mut rate) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let total = steps(opts);
    let (kappa, a) = (config.kappa, config.a);
    let lead_lag = lags[0] as f64 * ts;

    rec.record(0, &v, &y, config.leader.velocity(0.0));
    for k in 0..total {
        let t = k as f64 * ts;
        for i in 0..n {
            (v_del[i], y_del[i]) = hist.get(i, k, lags[i]);
        }
        crate::model::velocity_rates(
            &config.ovf,
            a,
            kappa,
            config.leader.acceleration(t),
            config.leader.velocity(t - lead_lag),
            &v_del,
            &y_del,
            &mut rate,
        );
        for i in 0..n {
            y[i] += ts * kappa * v[i];
            v[i] += ts * rate[i];
        }
        blown_up(k + 1, ts, &v, &y)?;
        hist.push(k + 1, &v, &y);
        rec.record(k + 1, &v, &y, config.leader.velocity(t + ts));
    }
    Ok(rec.traj)
}

/// [`simulate_with`] with every sample kept.
pub fn simulate(
    config: &PlatoonConfig,
    horizon: f64,
    ts: f64,
    initial: Option<InitialState>,
) -> Result<Trajectory> {
    simulate_with(
        config,
        &SimOptions {
            horizon,
            ts,
            stride: 1,
            initial,
        },
    )
}

/// Euler integration of the linearisation about the equilibrium, with the
/// same discretisation as [`simulate_with`]. Headways are reported as
/// `y* + u`.
pub fn simulate_linear(config: &PlatoonConfig, opts: &SimOptions) -> Result<Trajectory> {
    check_options(config, opts)?;
    let eq = config.equilibrium()?;
    let n = config.n;
    let ts = opts.ts;
    let lags: Vec<usize> = config
        .tau
        .iter()
        .map(|t| (t / ts).round() as usize)
        .collect();
    let depth = lags.iter().copied().max().unwrap_or(0) + 1;
    let (mut v, mut u) = match &opts.initial {
        Some(s) => (s.v.clone(), s.y.iter().map(|h| h - eq.y_star).collect()),
        None => (vec![0.0; n], vec![0.0; n]),
    };
    let mut hist = History::new(depth, &v, &u);
    let mut rec = Recorder::new(config, opts, eq.y_star, lags.clone());
    let mut rate = vec![0.0; n];
    let (kappa, a, d) = (config.kappa, config.a, eq.d);
    let lead_lag = lags[0] as f64 * ts;
    let shift = |u: &[f64]| u.iter().map(|x| x + eq.y_star).collect::<Vec<_>>();

    rec.record(0, &v, &shift(&u), config.leader.velocity(0.0));
    for k in 0..steps(opts) {
        let t = k as f64 * ts;
        let mut prev_u = 0.0;
        for i in 0..n {
            let (vd, ud) = hist.get(i, k, lags[i]);
            rate[i] = kappa * (-a * vd - d * ud + d * prev_u);
            prev_u = ud;
        }
        rate[0] += config.leader.acceleration(t)
            + kappa * a * (config.leader.velocity(t - lead_lag) - config.x0_dot_eq);
        for i in 0..n {
            u[i] += ts * kappa * v[i];
            v[i] += ts * rate[i];
        }
        blown_up(k + 1, ts, &v, &u)?;
        hist.push(k + 1, &v, &u);
        rec.record(k + 1, &v, &shift(&u), config.leader.velocity(t + ts));
    }
    Ok(rec.traj)
}
