//! Hopf normal form of the platoon at the point where one pair loses
//! stability: first Lyapunov coefficient `c₁(0)`, `μ₂` (direction of the
//! bifurcation) and `β₂` (orbital stability of the cycle).
//!
//! The computation follows the centre-manifold reduction for retarded
//! equations `ẋ = Σ_k Ã_k x(t - τ_k) + F(x_t)` with `Ã_k = κA_k`. The
//! characteristic matrix is `Δ(λ) = λI - Σ_k e^{-λτ_k} Ã_k`; since it is
//! block lower triangular in the pairs, every linear solve reduces to a
//! recursion over pairs.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::complex_json;
use crate::error::{MovmError, Result};
use crate::model::{linearized_matrices, Equilibrium, PlatoonConfig};
use crate::quadrature;
use crate::simulator::designated_pair;
use crate::stability;

type C = Complex64;

const I: C = C::new(0.0, 1.0);
/// Tolerance of every non-degeneracy check.
pub const ASSUMPTION_TOL: f64 = 1e-10;
/// Gauss–Legendre nodes per delay interval for the bilinear form.
pub const QUADRATURE_NODES: usize = 64;

/// How the second and third Taylor coefficients enter the nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaylorConvention {
    /// `V(y*+u) = V + V'u + V''u²/2 + V'''u³/6`.
    #[default]
    Factorial,
    /// `V''` and `V'''` without the `1/2!` and `1/3!` factors.
    AsPrinted,
}

/// `Ω_i^(k) = -κaV^(k)(y*)` (own headway) and `ζ_i^(k)` (predecessor's
/// headway, zero for the first pair) for `k = 1, 2, 3`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaylorCoefficients {
    pub omega: Vec<[f64; 3]>,
    pub zeta: Vec<[f64; 3]>,
}

/// Taylor coefficients of the velocity equations about the equilibrium.
/// The predecessor enters with the opposite sign, `ζ_i = +κaV^(k)` for
/// `i > 1`.
pub fn taylor_coefficients(
    config: &PlatoonConfig,
    eq: &Equilibrium,
    kappa: f64,
) -> Result<TaylorCoefficients> {
    let dv = config.ovf.derivatives(eq.y_star)?;
    let om = [
        -kappa * config.a * dv[0],
        -kappa * config.a * dv[1],
        -kappa * config.a * dv[2],
    ];
    let omega = vec![om; config.n];
    let zeta = (0..config.n)
        .map(|i| {
            if i == 0 {
                [0.0; 3]
            } else {
                [-om[0], -om[1], -om[2]]
            }
        })
        .collect();
    Ok(TaylorCoefficients { omega, zeta })
}

impl TaylorCoefficients {
    /// Coefficients of `u²` and `u³` in pair `i`'s own-headway nonlinearity.
    fn quadratic_cubic(&self, i: usize, conv: TaylorConvention) -> (f64, f64) {
        let [_, o2, o3] = self.omega[i];
        match conv {
            TaylorConvention::Factorial => (o2 / 2.0, o3 / 6.0),
            TaylorConvention::AsPrinted => (o2, o3),
        }
    }
}

/// Linear data of the bifurcating platoon.
#[derive(Debug, Clone)]
pub struct HopfSetup {
    pub n: usize,
    pub a: f64,
    pub d: f64,
    pub d_tilde: f64,
    /// 0-based index of the bifurcating pair.
    pub pair: usize,
    pub kappa_cr: f64,
    pub omega0: f64,
    pub taus: Vec<f64>,
    /// `Ã_0 … Ã_N` at `κ_cr`.
    pub mats: Vec<DMatrix<f64>>,
    pub equilibrium: Equilibrium,
}

impl HopfSetup {
    /// `vehicle` is 1-based and defaults to the pair with the largest delay.
    pub fn new(config: &PlatoonConfig, vehicle: Option<usize>) -> Result<Self> {
        config.validate()?;
        let vehicle = vehicle.unwrap_or_else(|| designated_pair(config));
        if vehicle == 0 || vehicle > config.n {
            return Err(MovmError::param(format!(
                "vehicle {vehicle} is outside 1..={}",
                config.n
            )));
        }
        let eq = config.equilibrium()?;
        let pair = vehicle - 1;
        let hp = stability::hopf_point(config.a, eq.d_tilde, config.tau[pair])?;
        let mats = linearized_matrices(config.n, config.a, eq.d)
            .into_iter()
            .map(|m| m * hp.kappa_cr)
            .collect();
        Ok(HopfSetup {
            n: config.n,
            a: config.a,
            d: eq.d,
            d_tilde: eq.d_tilde,
            pair,
            kappa_cr: hp.kappa_cr,
            omega0: hp.omega0,
            taus: config.tau.clone(),
            mats,
            equilibrium: eq,
        })
    }

    /// Delay attached to `Ã_k` (`τ_0 = 0`).
    fn lag(&self, k: usize) -> f64 {
        if k == 0 {
            0.0
        } else {
            self.taus[k - 1]
        }
    }

    pub fn delta(&self, lambda: C) -> DMatrix<C> {
        let m = 2 * self.n;
        let mut out = DMatrix::<C>::identity(m, m) * lambda;
        for (k, a) in self.mats.iter().enumerate() {
            let w = (-lambda * self.lag(k)).exp();
            out -= a.map(|x| C::from(x) * w);
        }
        out
    }

    pub fn delta_prime(&self, lambda: C) -> DMatrix<C> {
        let m = 2 * self.n;
        let mut out = DMatrix::<C>::identity(m, m);
        for (k, a) in self.mats.iter().enumerate().skip(1) {
            let w = (-lambda * self.lag(k)).exp() * self.lag(k);
            out += a.map(|x| C::from(x) * w);
        }
        out
    }

    /// Per-pair characteristic value at `λ` (at `κ_cr`).
    pub fn pair_char(&self, j: usize, lambda: C) -> C {
        let k = self.kappa_cr;
        let e = (-lambda * self.taus[j]).exp();
        lambda * lambda + (lambda * (k * self.a) + k * k * self.d) * e
    }

    /// `⟨p, φ⟩ = p̄(0)φ(0) + Σ_k ∫_{-τ_k}^0 p̄(ξ+τ_k) Ã_k φ(ξ) dξ` for
    /// `p(s) = p0 e^{iω₀s}`, the integrals by Gauss–Legendre quadrature.
    pub fn bilinear(&self, p0: &[C], phi: impl Fn(f64) -> Vec<C>) -> C {
        let w = self.omega0;
        let pbar: Vec<C> = p0.iter().map(|z| z.conj()).collect();
        let dot = |u: &[C], v: &[C]| u.iter().zip(v).map(|(a, b)| a * b).sum::<C>();
        let mut total = dot(&pbar, &phi(0.0));
        for (k, a) in self.mats.iter().enumerate().skip(1) {
            let tk = self.lag(k);
            if tk == 0.0 {
                continue;
            }
            let ac = a.map(C::from);
            total += quadrature::integrate(-tk, 0.0, QUADRATURE_NODES, |xi| {
                let f = DVector::from_vec(phi(xi));
                let af = &ac * f;
                let s = (-I * w * (xi + tk)).exp();
                dot(&pbar, af.as_slice()) * s
            });
        }
        total
    }
}

/// Right eigenvector `q(θ) = q0 e^{iω₀θ}` of the generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigvecData {
    /// `q0` in state order `(v_1..v_N, y_1..y_N)`, scaled so that the
    /// bifurcating pair's velocity component is 1.
    #[serde(with = "complex_json::many")]
    pub q0: Vec<C>,
    /// `ΔM_j`: characteristic value of pair `j` at `iω₀`, zero for the
    /// bifurcating pair.
    #[serde(with = "complex_json::many")]
    pub delta_m: Vec<C>,
    /// `|Δ(iω₀) q0| / |q0|`.
    pub residual: f64,
}

impl EigvecData {
    pub fn at(&self, theta: f64, omega: f64) -> Vec<C> {
        let e = (I * omega * theta).exp();
        self.q0.iter().map(|z| z * e).collect()
    }

    pub fn conj_at(&self, theta: f64, omega: f64) -> Vec<C> {
        let e = (-I * omega * theta).exp();
        self.q0.iter().map(|z| z.conj() * e).collect()
    }
}

fn residual_norm(m: &DMatrix<C>, v: &[C], left: bool) -> f64 {
    let v = DVector::from_column_slice(v);
    let r = if left {
        (v.transpose() * m).transpose()
    } else {
        m * &v
    };
    r.norm() / v.norm().max(f64::MIN_POSITIVE)
}

/// `Δ(iω₀) q0 = 0`, solved pair by pair:
/// `u_j = κ v_j/(iω₀)` and `v_j = iω₀κd e^{-iω₀τ_{j-1}} u_{j-1} / ΔM_j`
/// for the pairs downstream of the bifurcating one.
pub fn eigenvector_q(setup: &HopfSetup) -> EigvecData {
    let (n, h, k, w) = (setup.n, setup.pair, setup.kappa_cr, setup.omega0);
    let lam = I * w;
    let delta_m: Vec<C> = (0..n).map(|j| setup.pair_char(j, lam)).collect();
    let mut q0 = vec![C::new(0.0, 0.0); 2 * n];
    q0[h] = C::new(1.0, 0.0);
    q0[n + h] = q0[h] * k / lam;
    for j in h + 1..n {
        let e_prev = (-lam * setup.taus[j - 1]).exp();
        q0[j] = lam * k * setup.d * e_prev * q0[n + j - 1] / delta_m[j];
        q0[n + j] = q0[j] * k / lam;
    }
    let residual = residual_norm(&setup.delta(lam), &q0, false);
    EigvecData {
        q0,
        delta_m,
        residual,
    }
}

/// Adjoint eigenvector `p(s) = p0 e^{iω₀s}`, normalised so that
/// `⟨p, q⟩ = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdjointData {
    /// Normalised `p0`. The row vector `p̄0` is a left null vector of
    /// `Δ(iω₀)`.
    #[serde(with = "complex_json::many")]
    pub p0: Vec<C>,
    /// Unnormalised vector whose bifurcating-pair velocity component is 1.
    #[serde(with = "complex_json::many")]
    pub p0_unnormalized: Vec<C>,
    /// `ΔM̃_j`, the per-pair characteristic values used by the recursion.
    #[serde(with = "complex_json::many")]
    pub delta_m_tilde: Vec<C>,
    #[serde(with = "complex_json::one")]
    pub b: C,
    /// `|p̄0 Δ(iω₀)| / |p0|`.
    pub residual: f64,
    /// `⟨p, q⟩` evaluated by quadrature (should be 1).
    #[serde(with = "complex_json::one")]
    pub pairing: C,
    /// `⟨p, q̄⟩` evaluated by quadrature (should be 0).
    #[serde(with = "complex_json::one")]
    pub conjugate_pairing: C,
}

/// Left null vector `r` of `Δ(iω₀)` via `r_{u,j} = r_{v,j}(iω₀ + κa e_j)/κ`
/// and `r_{v,j} = κ²d e_j r_{v,j+1} / ΔM̃_j` upstream of the bifurcating
/// pair, then `B = 1/conj(⟨p_un, q⟩)`.
pub fn adjoint_eigenvector_p(setup: &HopfSetup, eig: &EigvecData) -> Result<AdjointData> {
    let (n, h, k, w) = (setup.n, setup.pair, setup.kappa_cr, setup.omega0);
    let lam = I * w;
    let delta_m_tilde: Vec<C> = (0..n).map(|j| setup.pair_char(j, lam)).collect();
    let mut r = vec![C::new(0.0, 0.0); 2 * n];
    let e = |j: usize| (-lam * setup.taus[j]).exp();
    r[h] = C::new(1.0, 0.0);
    for j in (0..h).rev() {
        r[j] = k * k * setup.d * e(j) * r[j + 1] / delta_m_tilde[j];
    }
    for j in 0..=h {
        r[n + j] = r[j] * (lam + k * setup.a * e(j)) / k;
    }
    let residual = residual_norm(&setup.delta(lam), &r, true);
    let p_un: Vec<C> = r.iter().map(|z| z.conj()).collect();
    let direct: C = {
        let dp = setup.delta_prime(lam);
        let rv = DVector::from_column_slice(&r).transpose();
        (rv * dp * DVector::from_column_slice(&eig.q0))[(0, 0)]
    };
    if direct.norm() < ASSUMPTION_TOL {
        return Err(MovmError::Degenerate(
            "⟨p, q⟩ vanishes; cannot normalise".into(),
        ));
    }
    // ⟨p_un, q⟩ = r Δ'(iω₀) q0
    let b = 1.0 / direct.conj();
    let p0: Vec<C> = p_un.iter().map(|z| z * b).collect();
    let pairing = setup.bilinear(&p0, |t| eig.at(t, w));
    let conjugate_pairing = setup.bilinear(&p0, |t| eig.conj_at(t, w));
    Ok(AdjointData {
        p0,
        p0_unnormalized: p_un,
        delta_m_tilde,
        b,
        residual,
        pairing,
        conjugate_pairing,
    })
}

/// `c_q q(θ) + c_q̄ q̄(θ) + E e^{2iω₀θ} + K`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThetaFunction {
    #[serde(with = "complex_json::one")]
    pub coef_q: C,
    #[serde(with = "complex_json::one")]
    pub coef_qbar: C,
    #[serde(with = "complex_json::many")]
    pub exp2: Vec<C>,
    #[serde(with = "complex_json::many")]
    pub constant: Vec<C>,
}

impl ThetaFunction {
    pub fn eval(&self, q0: &[C], omega: f64, theta: f64) -> Vec<C> {
        let e1 = (I * omega * theta).exp();
        let e2 = (I * 2.0 * omega * theta).exp();
        (0..q0.len())
            .map(|i| {
                self.coef_q * q0[i] * e1
                    + self.coef_qbar * q0[i].conj() * e1.conj()
                    + self.exp2[i] * e2
                    + self.constant[i]
            })
            .collect()
    }

    pub fn derivative(&self, q0: &[C], omega: f64, theta: f64) -> Vec<C> {
        let e1 = (I * omega * theta).exp();
        let e2 = (I * 2.0 * omega * theta).exp();
        (0..q0.len())
            .map(|i| {
                self.coef_q * q0[i] * e1 * I * omega
                    - self.coef_qbar * q0[i].conj() * e1.conj() * I * omega
                    + self.exp2[i] * e2 * I * 2.0 * omega
            })
            .collect()
    }
}

/// Coefficients of `z²/2`, `zz̄`, `z̄²/2` and `z²z̄/2` in the reduced
/// equation `ż = iω₀z + g(z, z̄)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GCoefficients {
    #[serde(with = "complex_json::one")]
    pub g20: C,
    #[serde(with = "complex_json::one")]
    pub g02: C,
    #[serde(with = "complex_json::one")]
    pub g11: C,
    /// Requires the centre-manifold vectors; `None` until they are known.
    #[serde(default, with = "opt_complex")]
    pub g21: Option<C>,
}

mod opt_complex {
    use super::*;
    use serde::{Deserializer, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Pair {
        re: f64,
        im: f64,
    }

    pub fn serialize<S: Serializer>(z: &Option<C>, s: S) -> std::result::Result<S::Ok, S::Error> {
        z.map(|z| Pair { re: z.re, im: z.im }).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        d: D,
    ) -> std::result::Result<Option<C>, D::Error> {
        Ok(Option::<Pair>::deserialize(d)?.map(|p| C::new(p.re, p.im)))
    }
}

/// Nonlinear forcing vectors `F_20, F_11, F_02` (and `F_21` once `w20`,
/// `w11` are known). Only velocity rows are nonzero: pair `j`'s headway
/// enters its own row with `Ω` and the follower's row with `ζ = -Ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forcing {
    #[serde(with = "complex_json::many")]
    pub f20: Vec<C>,
    #[serde(with = "complex_json::many")]
    pub f11: Vec<C>,
    #[serde(with = "complex_json::many")]
    pub f02: Vec<C>,
    #[serde(with = "complex_json::many")]
    pub f21: Vec<C>,
}

fn spread(setup: &HopfSetup, per_pair: &[C]) -> Vec<C> {
    let n = setup.n;
    let mut out = vec![C::new(0.0, 0.0); 2 * n];
    for (j, s) in per_pair.iter().enumerate() {
        out[j] += s;
        if j + 1 < n {
            out[j + 1] -= s;
        }
    }
    out
}

fn delayed_headway(setup: &HopfSetup, x: &[C], j: usize, theta_shift: impl Fn(usize) -> C) -> C {
    x[setup.n + j] * theta_shift(j)
}

/// Assembles the forcing terms. `w` supplies `(w20, w11)`; without it `F_21`
/// is left zero.
pub fn forcing(
    setup: &HopfSetup,
    taylor: &TaylorCoefficients,
    eig: &EigvecData,
    w: Option<(&ThetaFunction, &ThetaFunction)>,
    conv: TaylorConvention,
) -> Forcing {
    let n = setup.n;
    let om = setup.omega0;
    let e = |j: usize| (-I * om * setup.taus[j]).exp();
    let mut s20 = vec![C::new(0.0, 0.0); n];
    let mut s11 = s20.clone();
    let mut s02 = s20.clone();
    let mut s21 = s20.clone();
    // per pair: W20 and W11 evaluated at -τ_j
    type Delayed = (Vec<Vec<C>>, Vec<Vec<C>>);
    let w_at: Option<Delayed> = w.map(|(w20, w11)| {
        (
            (0..n)
                .map(|j| w20.eval(&eig.q0, om, -setup.taus[j]))
                .collect(),
            (0..n)
                .map(|j| w11.eval(&eig.q0, om, -setup.taus[j]))
                .collect(),
        )
    });
    for j in 0..n {
        let (c2, c3) = taylor.quadratic_cubic(j, conv);
        let q = delayed_headway(setup, &eig.q0, j, e);
        s20[j] = 2.0 * c2 * q * q;
        s11[j] = 2.0 * c2 * q * q.conj();
        s02[j] = 2.0 * c2 * q.conj() * q.conj();
        if let Some((w20, w11)) = &w_at {
            let (a20, a11) = (w20[j][n + j], w11[j][n + j]);
            s21[j] = 2.0 * c2 * (2.0 * q * a11 + q.conj() * a20) + 6.0 * c3 * q * q * q.conj();
        }
    }
    Forcing {
        f20: spread(setup, &s20),
        f11: spread(setup, &s11),
        f02: spread(setup, &s02),
        f21: spread(setup, &s21),
    }
}

fn project(adj: &AdjointData, f: &[C]) -> C {
    adj.p0.iter().zip(f).map(|(p, x)| p.conj() * x).sum()
}

/// `g_x = p̄(0) · F_x`.
pub fn g_coefficients(adj: &AdjointData, forcing: &Forcing, with_g21: bool) -> GCoefficients {
    GCoefficients {
        g20: project(adj, &forcing.f20),
        g02: project(adj, &forcing.f02),
        g11: project(adj, &forcing.f11),
        g21: with_g21.then(|| project(adj, &forcing.f21)),
    }
}

/// Centre-manifold coefficients and the vectors `e = Δ(2iω₀)⁻¹F_20`,
/// `f = Δ(0)⁻¹F_11`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WVectors {
    pub w20: ThetaFunction,
    pub w11: ThetaFunction,
    #[serde(with = "complex_json::many")]
    pub e: Vec<C>,
    #[serde(with = "complex_json::many")]
    pub f: Vec<C>,
    /// `ΔM*_j`: per-pair characteristic values at `2iω₀`.
    #[serde(with = "complex_json::many")]
    pub delta_m_star: Vec<C>,
}

fn solve(m: DMatrix<C>, rhs: &[C], what: &str) -> Result<Vec<C>> {
    let x = m
        .lu()
        .solve(&DVector::from_column_slice(rhs))
        .ok_or_else(|| MovmError::Degenerate(format!("{what} is singular")))?;
    Ok(x.as_slice().to_vec())
}

pub fn w_vectors(setup: &HopfSetup, forcing: &Forcing, g: &GCoefficients) -> Result<WVectors> {
    let om = setup.omega0;
    let lam2 = I * 2.0 * om;
    let delta_m_star = (0..setup.n).map(|j| setup.pair_char(j, lam2)).collect();
    let e = solve(setup.delta(lam2), &forcing.f20, "Δ(2iω₀)")?;
    let f = solve(setup.delta(C::new(0.0, 0.0)), &forcing.f11, "Δ(0)")?;
    let zeros = vec![C::new(0.0, 0.0); 2 * setup.n];
    let w20 = ThetaFunction {
        coef_q: I * g.g20 / om,
        coef_qbar: I * g.g02.conj() / (3.0 * om),
        exp2: e.clone(),
        constant: zeros.clone(),
    };
    let w11 = ThetaFunction {
        coef_q: -I * g.g11 / om,
        coef_qbar: I * g.g11.conj() / om,
        exp2: zeros,
        constant: f.clone(),
    };
    Ok(WVectors {
        w20,
        w11,
        e,
        f,
        delta_m_star,
    })
}

/// Residual of `(2iω₀ - 𝒜) w20 = H20` at `θ`, where `H20(θ) = -g20 q(θ) -
/// ḡ02 q̄(θ)` plus `F_20` at `θ = 0`.
pub fn w20_residual(
    setup: &HopfSetup,
    eig: &EigvecData,
    g: &GCoefficients,
    w: &WVectors,
    forcing: &Forcing,
    theta: f64,
) -> f64 {
    let om = setup.omega0;
    let q = eig.at(theta, om);
    let qb = eig.conj_at(theta, om);
    let lhs_a: Vec<C> = if theta == 0.0 {
        let mut acc = vec![C::new(0.0, 0.0); 2 * setup.n];
        for (k, a) in setup.mats.iter().enumerate() {
            let x = DVector::from_vec(w.w20.eval(&eig.q0, om, -setup.lag(k)));
            let ax = a.map(C::from) * x;
            for i in 0..acc.len() {
                acc[i] += ax[i];
            }
        }
        acc
    } else {
        w.w20.derivative(&eig.q0, om, theta)
    };
    let w_t = w.w20.eval(&eig.q0, om, theta);
    let mut worst: f64 = 0.0;
    for i in 0..w_t.len() {
        let mut h = -g.g20 * q[i] - g.g02.conj() * qb[i];
        if theta == 0.0 {
            h += forcing.f20[i];
        }
        let r = I * 2.0 * om * w_t[i] - lhs_a[i] - h;
        worst = worst.max(r.norm());
    }
    worst
}

/// Outcome of the non-degeneracy and accuracy checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub eigen_residual: f64,
    pub adjoint_residual: f64,
    /// Smallest `|ΔM_j|` over the non-bifurcating pairs (non-resonance at
    /// `iω₀`).
    pub min_delta_m: f64,
    /// Smallest `|ΔM*_j|` (invertibility of `Δ(2iω₀)`).
    pub min_delta_m_star: f64,
    /// `|det Δ(0)|^{1/N}`, i.e. `κ²d`.
    pub delta0: f64,
    /// `|⟨p, q⟩ - 1|` by quadrature.
    pub pairing_error: f64,
    /// `|⟨p, q̄⟩|` by quadrature.
    pub conjugate_pairing: f64,
    pub violations: Vec<String>,
}

impl AssumptionReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for AssumptionReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            write!(f, "none")
        } else {
            write!(f, "{}", self.violations.join("; "))
        }
    }
}

fn check(
    setup: &HopfSetup,
    eig: &EigvecData,
    adj: &AdjointData,
    delta_m_star: &[C],
) -> AssumptionReport {
    let min_delta_m = eig
        .delta_m
        .iter()
        .enumerate()
        .filter(|(j, _)| *j != setup.pair)
        .map(|(_, z)| z.norm())
        .fold(f64::INFINITY, f64::min);
    let min_delta_m_star = delta_m_star
        .iter()
        .map(|z| z.norm())
        .fold(f64::INFINITY, f64::min);
    let delta0 = setup.kappa_cr * setup.kappa_cr * setup.d;
    let pairing_error = (adj.pairing - 1.0).norm();
    let conjugate_pairing = adj.conjugate_pairing.norm();
    let scale = (setup.omega0 * setup.omega0).max(1.0);
    let mut violations = Vec::new();
    if eig.residual > 1e-8 * scale {
        violations.push(format!("eigenvector residual {:.3e}", eig.residual));
    }
    if adj.residual > 1e-8 * scale {
        violations.push(format!("adjoint residual {:.3e}", adj.residual));
    }
    if min_delta_m < ASSUMPTION_TOL {
        violations.push(format!(
            "another pair is critical at iω₀ (|ΔM| = {min_delta_m:.3e})"
        ));
    }
    if min_delta_m_star < ASSUMPTION_TOL {
        violations.push(format!(
            "Δ(2iω₀) is singular (|ΔM*| = {min_delta_m_star:.3e})"
        ));
    }
    if delta0 < ASSUMPTION_TOL {
        violations.push("Δ(0) is singular".into());
    }
    if pairing_error > 1e-8 {
        violations.push(format!("⟨p, q⟩ differs from 1 by {pairing_error:.3e}"));
    }
    AssumptionReport {
        eigen_residual: eig.residual,
        adjoint_residual: adj.residual,
        min_delta_m,
        min_delta_m_star,
        delta0,
        pairing_error,
        conjugate_pairing,
        violations,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalFormResult {
    /// 1-based bifurcating pair.
    pub vehicle: usize,
    pub tau: f64,
    pub kappa_cr: f64,
    pub omega0: f64,
    pub convention: TaylorConvention,
    pub taylor: TaylorCoefficients,
    pub eigvec: EigvecData,
    pub adjoint: AdjointData,
    pub forcing: Forcing,
    pub g: GCoefficients,
    #[serde(with = "complex_json::one")]
    pub g20: C,
    #[serde(with = "complex_json::one")]
    pub g02: C,
    #[serde(with = "complex_json::one")]
    pub g11: C,
    #[serde(with = "complex_json::one")]
    pub g21: C,
    pub w: WVectors,
    #[serde(with = "complex_json::one")]
    pub c1_0: C,
    pub alpha_prime_0: f64,
    pub mu2: f64,
    pub beta2: f64,
    /// `μ₂ > 0`; `None` when `Re c₁(0)` is too small to classify.
    pub supercritical: Option<bool>,
    /// `β₂ < 0`; `None` when degenerate.
    pub orbitally_stable: Option<bool>,
    pub assumptions: AssumptionReport,
}

impl NormalFormResult {
    /// Predicted half peak-to-peak of the bifurcating pair's relative
    /// velocity at `κ = κ_cr + μ`: `2 sqrt(μ/μ₂)` (the velocity component
    /// of `q0` is 1).
    pub fn predicted_amplitude(&self, mu: f64) -> Option<f64> {
        let r2 = mu / self.mu2;
        (r2 >= 0.0).then(|| 2.0 * r2.sqrt())
    }
}

/// Full normal-form computation at `κ_cr` of `vehicle` (1-based; defaults to
/// the pair with the largest delay).
pub fn normal_form(
    config: &PlatoonConfig,
    vehicle: Option<usize>,
    conv: TaylorConvention,
) -> Result<NormalFormResult> {
    let setup = HopfSetup::new(config, vehicle)?;
    let taylor = taylor_coefficients(config, &setup.equilibrium, setup.kappa_cr)?;
    let eig = eigenvector_q(&setup);
    let adj = adjoint_eigenvector_p(&setup, &eig)?;
    let first = forcing(&setup, &taylor, &eig, None, conv);
    let g0 = g_coefficients(&adj, &first, false);
    let w = w_vectors(&setup, &first, &g0)?;
    let report = check(&setup, &eig, &adj, &w.delta_m_star);
    if !report.ok() {
        return Err(MovmError::AssumptionViolation(Box::new(report)));
    }
    let full = forcing(&setup, &taylor, &eig, Some((&w.w20, &w.w11)), conv);
    let g = g_coefficients(&adj, &full, true);
    let g21 = g.g21.expect("requested");
    let om = setup.omega0;
    let c1_0 = I / (2.0 * om) * (g.g20 * g.g11 - 2.0 * g.g11.norm_sqr() - g.g02.norm_sqr() / 3.0)
        + g21 / 2.0;
    let tau = setup.taus[setup.pair];
    let alpha_prime_0 = stability::crossing_velocity(setup.a, setup.d_tilde, tau)?.re;
    let mu2 = -c1_0.re / alpha_prime_0;
    let beta2 = 2.0 * c1_0.re;
    let degenerate = c1_0.re.abs() < ASSUMPTION_TOL;
    Ok(NormalFormResult {
        vehicle: setup.pair + 1,
        tau,
        kappa_cr: setup.kappa_cr,
        omega0: om,
        convention: conv,
        taylor,
        eigvec: eig,
        adjoint: adj,
        forcing: full,
        g20: g.g20,
        g02: g.g02,
        g11: g.g11,
        g21,
        g,
        w,
        c1_0,
        alpha_prime_0,
        mu2,
        beta2,
        supercritical: (!degenerate).then_some(mu2 > 0.0),
        orbitally_stable: (!degenerate).then_some(beta2 < 0.0),
        assumptions: report,
    })
}

#[cfg(test)]
mod tests;
