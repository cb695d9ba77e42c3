//! Platoon definition, equilibrium, linearisation and the per-pair
//! characteristic function.
//!
//! State ordering is `(v_1, …, v_N, y_1, …, y_N)`: relative velocities
//! followed by headways. Pair `k` reacts with delay `τ_k`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{MovmError, Result};
use crate::ovf::{OvfParams, OvfSpec};
use crate::simulator::LeaderProfile;
use crate::stability;

/// Upper limit on the number of vehicle pairs.
pub const MAX_PAIRS: usize = 32;

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatoonConfig {
    /// Number of vehicle pairs.
    pub n: usize,
    /// Sensitivity (1/s).
    pub a: f64,
    /// Reaction delay of each pair (s).
    pub tau: Vec<f64>,
    pub ovf: OvfSpec,
    pub leader: LeaderProfile,
    #[serde(default = "one")]
    pub kappa: f64,
    /// Leader's equilibrium velocity (m/s).
    pub x0_dot_eq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub y_star: f64,
    pub v_star: f64,
    pub d_tilde: f64,
    pub d: f64,
}

impl PlatoonConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.n > MAX_PAIRS {
            return Err(MovmError::config(format!(
                "n must be in 1..={MAX_PAIRS}, got {}",
                self.n
            )));
        }
        if self.tau.len() != self.n {
            return Err(MovmError::config(format!(
                "expected {} delays, got {}",
                self.n,
                self.tau.len()
            )));
        }
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(MovmError::config(format!(
                "a must be positive, got {}",
                self.a
            )));
        }
        if let Some(t) = self.tau.iter().find(|t| !(t.is_finite() && **t >= 0.0)) {
            return Err(MovmError::config(format!(
                "delays must be non-negative, got {t}"
            )));
        }
        if !(self.kappa.is_finite() && self.kappa > 0.0) {
            return Err(MovmError::config(format!(
                "kappa must be positive, got {}",
                self.kappa
            )));
        }
        self.ovf.validate()?;
        let v_max = self.ovf.v_max();
        if !(self.x0_dot_eq > 0.0 && self.x0_dot_eq < v_max) {
            return Err(MovmError::config(format!(
                "x0_dot_eq = {} must lie in (0, {v_max})",
                self.x0_dot_eq
            )));
        }
        self.leader.validate()?;
        Ok(())
    }

    pub fn equilibrium(&self) -> Result<Equilibrium> {
        equilibrium(&self.ovf, self.a, self.x0_dot_eq)
    }

    pub fn max_delay(&self) -> f64 {
        self.tau.iter().copied().fold(0.0, f64::max)
    }

    /// Copy with one delay replaced.
    pub fn with_delay(&self, pair: usize, tau: f64) -> Self {
        let mut c = self.clone();
        c.tau[pair] = tau;
        c
    }

    pub fn with_kappa(&self, kappa: f64) -> Self {
        PlatoonConfig {
            kappa,
            ..self.clone()
        }
    }

    /// `A_0, …, A_N` of the linearisation `ẋ = A_0 x + Σ_k A_k x(t - τ_k)`.
    pub fn linearized_matrices(&self) -> Result<Vec<DMatrix<f64>>> {
        let eq = self.equilibrium()?;
        Ok(linearized_matrices(self.n, self.a, eq.d))
    }

    /// `det(λI - κA_0 - Σ_k κ e^{-λτ_k} A_k)`, evaluated directly.
    pub fn characteristic_determinant(&self, lambda: Complex64) -> Result<Complex64> {
        let eq = self.equilibrium()?;
        let mats = linearized_matrices(self.n, self.a, eq.d);
        let m = 2 * self.n;
        let mut delta = DMatrix::<Complex64>::identity(m, m) * lambda;
        for (k, a_k) in mats.iter().enumerate() {
            let w = if k == 0 {
                Complex64::from(self.kappa)
            } else {
                (-lambda * self.tau[k - 1]).exp() * self.kappa
            };
            delta -= a_k.map(|x| Complex64::from(x) * w);
        }
        Ok(delta.determinant())
    }

    /// Product of the per-pair characteristic values.
    pub fn characteristic_product(&self, lambda: Complex64) -> Result<Complex64> {
        let eq = self.equilibrium()?;
        Ok(self
            .tau
            .iter()
            .map(|&t| characteristic_value(lambda, self.a, eq.d_tilde, t, self.kappa))
            .product())
    }
}

/// Equilibrium of a platoon whose leader cruises at `x0_dot`.
pub fn equilibrium(ovf: &OvfSpec, a: f64, x0_dot: f64) -> Result<Equilibrium> {
    let y_star = ovf.inverse(x0_dot)?;
    let d_tilde = ovf.derivative(y_star, 1)?;
    Ok(Equilibrium {
        y_star,
        v_star: 0.0,
        d_tilde,
        d: a * d_tilde,
    })
}

/// Dense matrices `A_0..A_N` (each `2N × 2N`).
///
/// `A_0` holds the identity in its lower-left block (`ẏ_k = v_k`). `A_k`
/// holds `-a` at `(k, k)` and `-d` at `(k, N+k)`, and, for `k < N`, `+d` at
/// `(k+1, N+k)`: pair `k+1` reacts to its predecessor's headway `y_k`
/// through the same delay `τ_k`. Indices above are 1-based.
pub fn linearized_matrices(n: usize, a: f64, d: f64) -> Vec<DMatrix<f64>> {
    let m = 2 * n;
    let mut out = Vec::with_capacity(n + 1);
    let mut a0 = DMatrix::zeros(m, m);
    for k in 0..n {
        a0[(n + k, k)] = 1.0;
    }
    out.push(a0);
    for k in 0..n {
        let mut ak = DMatrix::zeros(m, m);
        ak[(k, k)] = -a;
        ak[(k, n + k)] = -d;
        if k + 1 < n {
            ak[(k + 1, n + k)] = d;
        }
        out.push(ak);
    }
    out
}

/// `λ² + κaλe^{-λτ} + κ²(a d̃) e^{-λτ}`.
pub fn characteristic_value(
    lambda: Complex64,
    a: f64,
    d_tilde: f64,
    tau: f64,
    kappa: f64,
) -> Complex64 {
    let e = (-lambda * tau).exp();
    lambda * lambda + (lambda * (kappa * a) + kappa * kappa * a * d_tilde) * e
}

/// Right-hand side of the velocity equations.
///
/// `v_del[i]` and `y_del[i]` are pair `i`'s state at `t - τ_i`;
/// `leader_v_del` is the leader's velocity at `t - τ_1` and `leader_acc` its
/// acceleration at `t`. The headway equations are `ẏ_i = κ v_i`.
#[allow(clippy::too_many_arguments)]
pub fn velocity_rates(
    ovf: &OvfSpec,
    a: f64,
    kappa: f64,
    leader_acc: f64,
    leader_v_del: f64,
    v_del: &[f64],
    y_del: &[f64],
    out: &mut [f64],
) {
    let n = v_del.len();
    let mut prev = leader_v_del;
    for i in 0..n {
        let own = ovf.value_extended(y_del[i]);
        out[i] = kappa * a * (prev - own - v_del[i]);
        prev = own;
    }
    out[0] += leader_acc;
}

/// Delays given either directly or as multiples of a pair's critical or
/// non-oscillatory delay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DelaySpec {
    Absolute(Vec<f64>),
    Relative {
        relative_to: DelayAnchor,
        factors: Vec<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DelayAnchor {
    TauCr,
    TauNoc,
}

/// Configuration file form of [`PlatoonConfig`].
///
/// `ovf.v0` may be null when `y_star` is given; it is then calibrated so
/// that `V(y_star) = x0_dot_eq`. The leader defaults to a constant velocity
/// `x0_dot_eq`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlatoonFile {
    #[serde(default)]
    pub n: Option<usize>,
    pub a: f64,
    pub tau: DelaySpec,
    pub ovf: OvfParams,
    #[serde(default)]
    pub y_star: Option<f64>,
    #[serde(default)]
    pub leader: Option<LeaderProfile>,
    #[serde(default)]
    pub kappa: Option<f64>,
    pub x0_dot_eq: f64,
}

impl PlatoonFile {
    pub fn resolve(&self) -> Result<PlatoonConfig> {
        let ovf = self.ovf.resolve(self.y_star, self.x0_dot_eq)?;
        if let (Some(y), Some(_)) = (self.y_star, self.ovf.v0) {
            let v = ovf.value(y)?;
            if (v - self.x0_dot_eq).abs() > 1e-9 * self.x0_dot_eq {
                return Err(MovmError::config(format!(
                    "y_star = {y} gives V = {v}, inconsistent with x0_dot_eq = {}",
                    self.x0_dot_eq
                )));
            }
        }
        if !(self.a.is_finite() && self.a > 0.0) {
            return Err(MovmError::config(format!(
                "a must be positive, got {}",
                self.a
            )));
        }
        let tau = match &self.tau {
            DelaySpec::Absolute(t) => t.clone(),
            DelaySpec::Relative {
                relative_to,
                factors,
            } => {
                if !(self.x0_dot_eq > 0.0 && self.x0_dot_eq < ovf.v_max()) {
                    return Err(MovmError::config("x0_dot_eq outside the OVF range"));
                }
                let eq = equilibrium(&ovf, self.a, self.x0_dot_eq)?;
                let base = match relative_to {
                    DelayAnchor::TauCr => stability::critical_delay(self.a, eq.d_tilde)?,
                    DelayAnchor::TauNoc => {
                        stability::noc_boundary(self.a, eq.d_tilde).ok_or_else(|| {
                            MovmError::config("tau_noc does not exist for these parameters")
                        })?
                    }
                };
                factors.iter().map(|f| f * base).collect()
            }
        };
        let cfg = PlatoonConfig {
            n: self.n.unwrap_or(tau.len()),
            a: self.a,
            tau,
            ovf,
            leader: self
                .leader
                .clone()
                .unwrap_or(LeaderProfile::Constant { v: self.x0_dot_eq }),
            kappa: self.kappa.unwrap_or(1.0),
            x0_dot_eq: self.x0_dot_eq,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Reference configurations used throughout the tests and examples.
pub mod presets {
    use super::*;

    fn bando_calibrated(ym: f64, y_tilde: f64, y_star: f64, v: f64) -> OvfSpec {
        OvfSpec::Bando {
            v0: 1.0,
            ym,
            y_tilde,
        }
        .calibrated(y_star, v)
        .expect("preset parameters are valid")
    }

    /// Bando OVF with `ym = 1`, `ỹ = 5`, calibrated to `y* = 2` at 5 m/s.
    pub fn reference_bando() -> OvfSpec {
        bando_calibrated(1.0, 5.0, 2.0, 5.0)
    }

    /// `d̃` of [`reference_bando`].
    pub fn reference_d_tilde() -> f64 {
        equilibrium(&reference_bando(), 1.0, 5.0)
            .expect("valid")
            .d_tilde
    }

    /// Four pairs, `a = 1.2`, Bando (`ym = 1`, `ỹ = 5`, `y* = 3`), leader
    /// `5(1 - e^{-10t})`, delays `τ_cr·{1/10, 1/3, tau3_factor, 1/2}`.
    pub fn hopf_onset(tau3_factor: f64) -> PlatoonConfig {
        let ovf = bando_calibrated(1.0, 5.0, 3.0, 5.0);
        let eq = equilibrium(&ovf, 1.2, 5.0).expect("valid");
        let tc = stability::critical_delay(1.2, eq.d_tilde).expect("valid");
        PlatoonConfig {
            n: 4,
            a: 1.2,
            tau: vec![tc / 10.0, tc / 3.0, tc * tau3_factor, tc / 2.0],
            ovf,
            leader: LeaderProfile::SmoothExponential {
                v_inf: 5.0,
                rate: 10.0,
            },
            kappa: 1.0,
            x0_dot_eq: 5.0,
        }
    }

    /// Four pairs, `a = 2`, Bando (`ym = 15`, `ỹ = 25`, `y* = 15`), leader
    /// `25(1 - e^{-10t})`, delays `τ_noc·{1/10, 1/3, 1/2, 1/5}`.
    pub fn non_oscillatory() -> PlatoonConfig {
        let ovf = bando_calibrated(15.0, 25.0, 15.0, 25.0);
        let eq = equilibrium(&ovf, 2.0, 25.0).expect("valid");
        let tn = stability::noc_boundary(2.0, eq.d_tilde).expect("τ_noc exists here");
        PlatoonConfig {
            n: 4,
            a: 2.0,
            tau: vec![tn / 10.0, tn / 3.0, tn / 2.0, tn / 5.0],
            ovf,
            leader: LeaderProfile::SmoothExponential {
                v_inf: 25.0,
                rate: 10.0,
            },
            kappa: 1.0,
            x0_dot_eq: 25.0,
        }
    }

    /// Four pairs, `a = 1.2`, Bando (`ym = 2`, `ỹ = 5`) calibrated to
    /// `y*` at 5 m/s. Pair 3 sits at its critical delay; the others keep the
    /// ratio 0.2 : 0.3911 to it. Constant leader.
    pub fn bando_bifurcation(y_star: f64) -> PlatoonConfig {
        let ovf = bando_calibrated(2.0, 5.0, y_star, 5.0);
        let eq = equilibrium(&ovf, 1.2, 5.0).expect("valid");
        let tc = stability::critical_delay(1.2, eq.d_tilde).expect("valid");
        let other = tc * 0.2 / 0.3911;
        PlatoonConfig {
            n: 4,
            a: 1.2,
            tau: vec![other, other, tc, other],
            ovf,
            leader: LeaderProfile::Constant { v: 5.0 },
            kappa: 1.0,
            x0_dot_eq: 5.0,
        }
    }

    /// Three pairs, `a = 1.2`, Underwood (`ym = 2`) calibrated to `y*` at
    /// 5 m/s. Pair 2 sits at its critical delay; the others keep the ratio
    /// 0.1 : 0.11885 to it. Constant leader.
    pub fn underwood_bifurcation(y_star: f64) -> PlatoonConfig {
        let ovf = OvfSpec::Underwood { v0: 1.0, ym: 2.0 }
            .calibrated(y_star, 5.0)
            .expect("valid");
        let eq = equilibrium(&ovf, 1.2, 5.0).expect("valid");
        let tc = stability::critical_delay(1.2, eq.d_tilde).expect("valid");
        let other = tc * 0.1 / 0.11885;
        PlatoonConfig {
            n: 3,
            a: 1.2,
            tau: vec![other, tc, other],
            ovf,
            leader: LeaderProfile::Constant { v: 5.0 },
            kappa: 1.0,
            x0_dot_eq: 5.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn reference_equilibrium() {
        let cfg = PlatoonConfig {
            n: 1,
            a: 1.0,
            tau: vec![0.1],
            ovf: presets::reference_bando(),
            leader: LeaderProfile::Constant { v: 5.0 },
            kappa: 1.0,
            x0_dot_eq: 5.0,
        };
        let eq = cfg.equilibrium().unwrap();
        assert_eq!(eq.v_star, 0.0);
        assert!((eq.y_star - 2.0).abs() < 1e-8);
        assert!((eq.d - cfg.a * eq.d_tilde).abs() < 1e-15);
    }

    #[test]
    fn d_tilde_matches_slope() {
        let cfg = presets::hopf_onset(1.0);
        let eq = cfg.equilibrium().unwrap();
        let h = 1e-5;
        let fd = (cfg.ovf.value(3.0 + h).unwrap() - cfg.ovf.value(3.0 - h).unwrap()) / (2.0 * h);
        assert!((eq.y_star - 3.0).abs() < 1e-9);
        assert!((eq.d_tilde - fd).abs() < 1e-6);
    }

    #[test]
    fn single_pair_matrices() {
        let m = linearized_matrices(1, 1.5, 0.7);
        assert_eq!(m.len(), 2);
        assert_eq!(m[0], DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]));
        assert_eq!(m[1], DMatrix::from_row_slice(2, 2, &[-1.5, -0.7, 0.0, 0.0]));
    }

    #[test]
    fn coupling_entry_for_two_pairs() {
        let d = 0.9;
        let m = linearized_matrices(2, 1.2, d);
        // 1-based (2, N+1) = (2, 3)
        assert_eq!(m[1][(1, 2)], d);
        assert_eq!(m[1][(1, 0)], 0.0);
    }

    #[test]
    fn velocity_row_sums() {
        // Σ_k A_k over the headway columns vanishes for pairs 2..N: each
        // follower sees +d from its predecessor and -d from itself.
        let (n, a, d) = (5, 1.3, 0.8);
        let m = linearized_matrices(n, a, d);
        let mut sum = DMatrix::<f64>::zeros(2 * n, 2 * n);
        for ak in &m[1..] {
            sum += ak;
        }
        for r in 1..n {
            let vel: f64 = (0..n).map(|c| sum[(r, c)]).sum();
            let head: f64 = (n..2 * n).map(|c| sum[(r, c)]).sum();
            assert_eq!(vel, -a);
            assert!(head.abs() < 1e-15);
        }
    }

    #[test]
    fn delay_free_limit() {
        let (a, dt) = (1.3, 0.6);
        let z = Complex64::new(0.3, -0.8);
        let got = characteristic_value(z, a, dt, 0.0, 1.0);
        let want = z * z + z * a + a * dt;
        assert!((got - want).norm() < 1e-15);
    }

    #[test]
    fn matches_expanded_form() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..20 {
            let (a, dt, tau, k) = (
                rng.gen_range(0.5..4.0),
                rng.gen_range(0.2..3.0),
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.5..1.5),
            );
            let z = Complex64::new(rng.gen_range(-3.0..3.0), rng.gen_range(-5.0..5.0));
            // cos/sin expansion of e^{-λτ}
            let mag = (-z.re * tau).exp();
            let e = Complex64::new(mag * (z.im * tau).cos(), -mag * (z.im * tau).sin());
            let want = z * z + k * a * z * e + k * k * a * dt * e;
            let got = characteristic_value(z, a, dt, tau, k);
            assert!((got - want).norm() <= 1e-12 * want.norm().max(1.0));
        }
    }

    #[test]
    fn determinant_factorises() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        for n in 1..=3 {
            for _ in 0..10 {
                let mut cfg = presets::hopf_onset(1.0);
                cfg.n = n;
                cfg.tau = (0..n).map(|_| rng.gen_range(0.0..0.8)).collect();
                cfg.kappa = rng.gen_range(0.5..1.5);
                let z = Complex64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-4.0..4.0));
                let det = cfg.characteristic_determinant(z).unwrap();
                let prod = cfg.characteristic_product(z).unwrap();
                assert!((det - prod).norm() <= 1e-8 * prod.norm().max(1e-3), "n={n}");
            }
        }
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let cfg = presets::hopf_onset(1.0);
        let eq = cfg.equilibrium().unwrap();
        let v = vec![0.0; cfg.n];
        let y = vec![eq.y_star; cfg.n];
        let mut out = vec![1.0; cfg.n];
        velocity_rates(&cfg.ovf, cfg.a, 1.0, 0.0, cfg.x0_dot_eq, &v, &y, &mut out);
        assert!(out.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn validation() {
        let mut cfg = presets::hopf_onset(1.0);
        cfg.tau.pop();
        assert!(cfg.validate().is_err());
        let mut cfg = presets::hopf_onset(1.0);
        cfg.x0_dot_eq = 1e3;
        assert!(cfg.validate().is_err());
        let mut cfg = presets::hopf_onset(1.0);
        cfg.n = 40;
        cfg.tau = vec![0.1; 40];
        assert!(cfg.validate().is_err());
        assert!(presets::non_oscillatory().validate().is_ok());
    }

    #[test]
    fn file_with_relative_delays() {
        let text = r#"{
            "a": 1.2,
            "tau": {"relative_to": "tau_cr", "factors": [0.1, 1.0]},
            "ovf": {"family": "bando", "v0": null, "ym": 1, "y_tilde": 5},
            "y_star": 3,
            "x0_dot_eq": 5
        }"#;
        let f: PlatoonFile = serde_json::from_str(text).unwrap();
        let cfg = f.resolve().unwrap();
        let eq = cfg.equilibrium().unwrap();
        let tc = stability::critical_delay(1.2, eq.d_tilde).unwrap();
        assert_eq!(cfg.n, 2);
        assert!((cfg.tau[1] - tc).abs() < 1e-15);
        assert!((eq.y_star - 3.0).abs() < 1e-9);
        assert_eq!(cfg.leader, LeaderProfile::Constant { v: 5.0 });

        let json = serde_json::to_string(&cfg).unwrap();
        let back: PlatoonConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn file_rejects_inconsistent_calibration() {
        let text = r#"{"a": 1, "tau": [0.1], "ovf": {"family": "underwood", "v0": 10, "ym": 1},
                       "y_star": 3, "x0_dot_eq": 5}"#;
        let f: PlatoonFile = serde_json::from_str(text).unwrap();
        assert!(f.resolve().is_err());
        let unknown = r#"{"a": 1, "tau": [0.1], "ovf": {"family": "underwood", "v0": 10, "ym": 1},
                         "x0_dot_eq": 5, "speed": 3}"#;
        assert!(serde_json::from_str::<PlatoonFile>(unknown).is_err());
    }
}
