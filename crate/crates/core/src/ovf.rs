//! Optimal velocity functions (OVFs).
//!
//! Each family maps a headway `y` (m) to the velocity (m/s) a driver wants to
//! reach. All four families are monotone increasing and bounded above, so
//! they are invertible on `(0, V^max)`. Derivatives up to third order are
//! closed form; the Hopf normal form needs `V'`, `V''` and `V'''` at the
//! equilibrium headway.

use serde::{Deserialize, Serialize};

use crate::error::{MovmError, Result};

/// Tolerance on `y` used by the bisection fallback of [`OvfSpec::inverse`].
const INVERSE_Y_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OvfFamily {
    Underwood,
    Bando,
    Trigonometric,
    Hyperbolic,
}

impl OvfFamily {
    pub fn name(self) -> &'static str {
        match self {
            OvfFamily::Underwood => "underwood",
            OvfFamily::Bando => "bando",
            OvfFamily::Trigonometric => "trigonometric",
            OvfFamily::Hyperbolic => "hyperbolic",
        }
    }
}

/// A fully parameterised OVF.
///
/// * Underwood: `V0 exp(-2 ym / y)`
/// * Bando: `V0 (tanh((y - ym)/ỹ) + tanh(ym/ỹ))`
/// * Trigonometric: `V0 (atan((y - ym)/ỹ) + atan(ym/ỹ))`
/// * Hyperbolic: `V0 (y - y0)^n / (ỹ^n + (y - y0)^n)` for `y ≥ y0`, zero below
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "OvfParams", into = "OvfParams")]
pub enum OvfSpec {
    Underwood {
        v0: f64,
        ym: f64,
    },
    Bando {
        v0: f64,
        ym: f64,
        y_tilde: f64,
    },
    Trigonometric {
        v0: f64,
        ym: f64,
        y_tilde: f64,
    },
    Hyperbolic {
        v0: f64,
        y0: f64,
        y_tilde: f64,
        n: u32,
    },
}

/// Flat, nullable parameter record used for (de)serialisation.
///
/// `v0` may be left null in configuration files; it is then calibrated from
/// the equilibrium headway with [`OvfParams::resolve`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OvfParams {
    pub family: OvfFamily,
    #[serde(default)]
    pub v0: Option<f64>,
    #[serde(default)]
    pub ym: Option<f64>,
    #[serde(default)]
    pub y_tilde: Option<f64>,
    #[serde(default)]
    pub y0: Option<f64>,
    #[serde(default)]
    pub n: Option<u32>,
}

fn need(field: Option<f64>, name: &str, family: OvfFamily) -> Result<f64> {
    field.ok_or_else(|| MovmError::param(format!("{} OVF requires `{name}`", family.name())))
}

fn positive(x: f64, name: &str) -> Result<f64> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(MovmError::param(format!(
            "`{name}` must be positive and finite, got {x}"
        )))
    }
}

impl OvfParams {
    /// Builds the spec, using `v0` from the record. Fails if `v0` is null.
    pub fn build(&self) -> Result<OvfSpec> {
        let v0 = need(self.v0, "v0", self.family)?;
        self.with_v0(v0)
    }

    /// Builds the spec; when `v0` is null it is chosen so that
    /// `V(y_star) = v_star`.
    pub fn resolve(&self, y_star: Option<f64>, v_star: f64) -> Result<OvfSpec> {
        match (self.v0, y_star) {
            (Some(v0), _) => self.with_v0(v0),
            (None, Some(y)) => {
                let unit = self.with_v0(1.0)?;
                unit.calibrated(y, v_star)
            }
            (None, None) => Err(MovmError::config(
                "ovf.v0 is null and no y_star was given to calibrate it",
            )),
        }
    }

    fn with_v0(&self, v0: f64) -> Result<OvfSpec> {
        let f = self.family;
        let spec = match f {
            OvfFamily::Underwood => OvfSpec::Underwood {
                v0,
                ym: need(self.ym, "ym", f)?,
            },
            OvfFamily::Bando => OvfSpec::Bando {
                v0,
                ym: need(self.ym, "ym", f)?,
                y_tilde: need(self.y_tilde, "y_tilde", f)?,
            },
            OvfFamily::Trigonometric => OvfSpec::Trigonometric {
                v0,
                ym: need(self.ym, "ym", f)?,
                y_tilde: need(self.y_tilde, "y_tilde", f)?,
            },
            OvfFamily::Hyperbolic => OvfSpec::Hyperbolic {
                v0,
                y0: self.y0.unwrap_or(0.0),
                y_tilde: need(self.y_tilde, "y_tilde", f)?,
                n: self
                    .n
                    .ok_or_else(|| MovmError::param("hyperbolic OVF requires `n`"))?,
            },
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl TryFrom<OvfParams> for OvfSpec {
    type Error = MovmError;

    fn try_from(p: OvfParams) -> Result<Self> {
        p.build()
    }
}

impl From<OvfSpec> for OvfParams {
    fn from(s: OvfSpec) -> Self {
        let mut p = OvfParams {
            family: s.family(),
            v0: Some(s.v0()),
            ym: None,
            y_tilde: None,
            y0: None,
            n: None,
        };
        match s {
            OvfSpec::Underwood { ym, .. } => p.ym = Some(ym),
            OvfSpec::Bando { ym, y_tilde, .. } | OvfSpec::Trigonometric { ym, y_tilde, .. } => {
                p.ym = Some(ym);
                p.y_tilde = Some(y_tilde);
            }
            OvfSpec::Hyperbolic { y0, y_tilde, n, .. } => {
                p.y0 = Some(y0);
                p.y_tilde = Some(y_tilde);
                p.n = Some(n);
            }
        }
        p
    }
}

impl OvfSpec {
    pub fn underwood(v0: f64, ym: f64) -> Result<Self> {
        let s = OvfSpec::Underwood { v0, ym };
        s.validate()?;
        Ok(s)
    }

    pub fn bando(v0: f64, ym: f64, y_tilde: f64) -> Result<Self> {
        let s = OvfSpec::Bando { v0, ym, y_tilde };
        s.validate()?;
        Ok(s)
    }

    pub fn trigonometric(v0: f64, ym: f64, y_tilde: f64) -> Result<Self> {
        let s = OvfSpec::Trigonometric { v0, ym, y_tilde };
        s.validate()?;
        Ok(s)
    }

    pub fn hyperbolic(v0: f64, y0: f64, y_tilde: f64, n: u32) -> Result<Self> {
        let s = OvfSpec::Hyperbolic { v0, y0, y_tilde, n };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        positive(self.v0(), "v0")?;
        match *self {
            OvfSpec::Underwood { ym, .. } => {
                positive(ym, "ym")?;
            }
            OvfSpec::Bando { ym, y_tilde, .. } | OvfSpec::Trigonometric { ym, y_tilde, .. } => {
                positive(ym, "ym")?;
                positive(y_tilde, "y_tilde")?;
            }
            OvfSpec::Hyperbolic { y0, y_tilde, n, .. } => {
                positive(y_tilde, "y_tilde")?;
                if !(y0.is_finite() && y0 >= 0.0) {
                    return Err(MovmError::param(format!(
                        "`y0` must be non-negative, got {y0}"
                    )));
                }
                if n == 0 {
                    return Err(MovmError::param("hyperbolic OVF requires n >= 1"));
                }
            }
        }
        Ok(())
    }

    pub fn family(&self) -> OvfFamily {
        match self {
            OvfSpec::Underwood { .. } => OvfFamily::Underwood,
            OvfSpec::Bando { .. } => OvfFamily::Bando,
            OvfSpec::Trigonometric { .. } => OvfFamily::Trigonometric,
            OvfSpec::Hyperbolic { .. } => OvfFamily::Hyperbolic,
        }
    }

    pub fn v0(&self) -> f64 {
        match *self {
            OvfSpec::Underwood { v0, .. }
            | OvfSpec::Bando { v0, .. }
            | OvfSpec::Trigonometric { v0, .. }
            | OvfSpec::Hyperbolic { v0, .. } => v0,
        }
    }

    /// Same family and shape with `V0` rescaled so that `V(y_star) = v_star`.
    pub fn calibrated(&self, y_star: f64, v_star: f64) -> Result<Self> {
        positive(v_star, "equilibrium velocity")?;
        let unit = self.with_v0(1.0);
        let at = unit.value(y_star)?;
        if at <= 0.0 {
            return Err(MovmError::param(format!(
                "cannot calibrate V0: V({y_star}) vanishes for this family"
            )));
        }
        let s = self.with_v0(v_star / at);
        s.validate()?;
        Ok(s)
    }

    fn with_v0(&self, v0: f64) -> Self {
        let mut s = *self;
        match &mut s {
            OvfSpec::Underwood { v0: x, .. }
            | OvfSpec::Bando { v0: x, .. }
            | OvfSpec::Trigonometric { v0: x, .. }
            | OvfSpec::Hyperbolic { v0: x, .. } => *x = v0,
        }
        s
    }

    /// `V^max = lim_{y→∞} V(y)`.
    pub fn v_max(&self) -> f64 {
        match *self {
            OvfSpec::Underwood { v0, .. } | OvfSpec::Hyperbolic { v0, .. } => v0,
            OvfSpec::Bando { v0, ym, y_tilde } => v0 * (1.0 + (ym / y_tilde).tanh()),
            OvfSpec::Trigonometric { v0, ym, y_tilde } => {
                v0 * (std::f64::consts::FRAC_PI_2 + (ym / y_tilde).atan())
            }
        }
    }

    fn check_domain(&self, y: f64) -> Result<()> {
        let bad = match self {
            OvfSpec::Underwood { .. } => !(y > 0.0),
            _ => !(y >= 0.0),
        };
        if bad || !y.is_finite() {
            return Err(MovmError::OvfDomain {
                family: self.family().name(),
                y,
            });
        }
        Ok(())
    }

    pub fn value(&self, y: f64) -> Result<f64> {
        self.check_domain(y)?;
        Ok(self.value_unchecked(y))
    }

    /// Total extension used by the simulator, where collisions (`y ≤ 0`) may
    /// occur transiently. Underwood is extended by its limit `V(0⁺) = 0`;
    /// the other families use their closed form as is.
    pub fn value_extended(&self, y: f64) -> f64 {
        match self {
            OvfSpec::Underwood { .. } if y <= 0.0 => 0.0,
            _ => self.value_unchecked(y),
        }
    }

    fn value_unchecked(&self, y: f64) -> f64 {
        match *self {
            OvfSpec::Underwood { v0, ym } => v0 * (-2.0 * ym / y).exp(),
            OvfSpec::Bando { v0, ym, y_tilde } => {
                v0 * (((y - ym) / y_tilde).tanh() + (ym / y_tilde).tanh())
            }
            OvfSpec::Trigonometric { v0, ym, y_tilde } => {
                v0 * (((y - ym) / y_tilde).atan() + (ym / y_tilde).atan())
            }
            OvfSpec::Hyperbolic { v0, y0, y_tilde, n } => {
                if y <= y0 {
                    0.0
                } else {
                    let w = (y - y0).powi(n as i32);
                    v0 * w / (y_tilde.powi(n as i32) + w)
                }
            }
        }
    }

    /// `V'`, `V''` and `V'''` at `y`, in that order.
    pub fn derivatives(&self, y: f64) -> Result<[f64; 3]> {
        self.check_domain(y)?;
        Ok(match *self {
            OvfSpec::Underwood { v0, ym } => {
                let c = 2.0 * ym;
                let v = v0 * (-c / y).exp();
                let (y2, y3, y4) = (y * y, y * y * y, y * y * y * y);
                [
                    v * c / y2,
                    v * (c * c / y4 - 2.0 * c / y3),
                    v * (c * c * c / (y4 * y2) - 6.0 * c * c / (y4 * y) + 6.0 * c / y4),
                ]
            }
            OvfSpec::Bando { v0, ym, y_tilde } => {
                let t = ((y - ym) / y_tilde).tanh();
                let sech2 = 1.0 - t * t;
                [
                    v0 * sech2 / y_tilde,
                    -2.0 * v0 * t * sech2 / (y_tilde * y_tilde),
                    v0 * sech2 * (6.0 * t * t - 2.0) / y_tilde.powi(3),
                ]
            }
            OvfSpec::Trigonometric { v0, ym, y_tilde } => {
                let s = (y - ym) / y_tilde;
                let q = 1.0 + s * s;
                [
                    v0 / (y_tilde * q),
                    -2.0 * v0 * s / (y_tilde * y_tilde * q * q),
                    v0 * (6.0 * s * s - 2.0) / (y_tilde.powi(3) * q * q * q),
                ]
            }
            OvfSpec::Hyperbolic { v0, y0, y_tilde, n } => {
                if y <= y0 {
                    [0.0; 3]
                } else {
                    // V = V0 (1 - c/D) with D = c + x^n, c = ỹ^n
                    let x = y - y0;
                    let nf = n as f64;
                    let c = y_tilde.powi(n as i32);
                    let d0 = c + x.powi(n as i32);
                    let d1 = nf * x.powi(n as i32 - 1);
                    let d2 = if n >= 2 {
                        nf * (nf - 1.0) * x.powi(n as i32 - 2)
                    } else {
                        0.0
                    };
                    let d3 = if n >= 3 {
                        nf * (nf - 1.0) * (nf - 2.0) * x.powi(n as i32 - 3)
                    } else {
                        0.0
                    };
                    [
                        v0 * c * d1 / (d0 * d0),
                        v0 * c * (d0 * d2 - 2.0 * d1 * d1) / d0.powi(3),
                        v0 * c * (6.0 * d1.powi(3) - 6.0 * d0 * d1 * d2 + d0 * d0 * d3)
                            / d0.powi(4),
                    ]
                }
            }
        })
    }

    /// Derivative of order 1, 2 or 3.
    pub fn derivative(&self, y: f64, order: u8) -> Result<f64> {
        match order {
            1..=3 => Ok(self.derivatives(y)?[order as usize - 1]),
            _ => Err(MovmError::param(format!(
                "derivative order must be 1, 2 or 3, got {order}"
            ))),
        }
    }

    /// Headway `y` with `V(y) = v`.
    pub fn inverse(&self, v: f64) -> Result<f64> {
        let v_max = self.v_max();
        if !(v > 0.0 && v < v_max) {
            return Err(MovmError::OvfRange { v, v_max });
        }
        match *self {
            OvfSpec::Underwood { v0, ym } => Ok(2.0 * ym / (v0 / v).ln()),
            OvfSpec::Bando { v0, ym, y_tilde } => {
                Ok(ym + y_tilde * (v / v0 - (ym / y_tilde).tanh()).atanh())
            }
            _ => self.inverse_bisect(v),
        }
    }

    fn inverse_bisect(&self, v: f64) -> Result<f64> {
        let mut lo = match *self {
            OvfSpec::Hyperbolic { y0, .. } => y0,
            _ => 0.0,
        };
        let mut hi = lo + 1.0;
        let mut grow = 0;
        while self.value_unchecked(hi) <= v {
            lo = hi;
            hi = 2.0 * hi + 1.0;
            grow += 1;
            if grow > 200 {
                return Err(MovmError::NonConvergence(format!(
                    "no bracket for V(y) = {v}"
                )));
            }
        }
        while hi - lo > INVERSE_Y_TOL * hi.max(1.0) {
            let mid = 0.5 * (lo + hi);
            if self.value_unchecked(mid) < v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn central(f: impl Fn(f64) -> f64, y: f64, h: f64) -> f64 {
        (f(y + h) - f(y - h)) / (2.0 * h)
    }

    fn families() -> Vec<OvfSpec> {
        vec![
            OvfSpec::underwood(2.0, 1.0).unwrap(),
            OvfSpec::bando(3.0, 2.0, 5.0).unwrap(),
            OvfSpec::trigonometric(2.0, 2.0, 4.0).unwrap(),
            OvfSpec::hyperbolic(10.0, 1.0, 3.0, 3).unwrap(),
        ]
    }

    #[test]
    fn bando_vanishes_at_zero() {
        let s = OvfSpec::bando(1.0, 1.0, 5.0).unwrap();
        assert!(s.value(0.0).unwrap().abs() < 1e-15);
    }

    #[test]
    fn underwood_at_twice_ym() {
        let s = OvfSpec::underwood(2.0, 1.0).unwrap();
        assert!((s.value(2.0).unwrap() - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        assert!((s.inverse(2.0 * (-1.0f64).exp()).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn hyperbolic_boundary_is_zero() {
        let s = OvfSpec::hyperbolic(1.0, 1.0, 1.0, 2).unwrap();
        assert_eq!(s.value(1.0).unwrap(), 0.0);
    }

    #[test]
    fn domain_errors() {
        let u = OvfSpec::underwood(2.0, 1.0).unwrap();
        assert!(matches!(u.value(0.0), Err(MovmError::OvfDomain { .. })));
        assert!(matches!(
            u.derivative(-1.0, 1),
            Err(MovmError::OvfDomain { .. })
        ));
        let b = OvfSpec::bando(1.0, 1.0, 5.0).unwrap();
        assert!(b.value(-0.1).is_err());
        assert!(b.derivative(1.0, 4).is_err());
        assert!(matches!(b.inverse(0.0), Err(MovmError::OvfRange { .. })));
        assert!(matches!(
            b.inverse(b.v_max()),
            Err(MovmError::OvfRange { .. })
        ));
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(OvfSpec::bando(-1.0, 1.0, 5.0).is_err());
        assert!(OvfSpec::bando(1.0, 1.0, 0.0).is_err());
        assert!(OvfSpec::hyperbolic(1.0, 1.0, 1.0, 0).is_err());
        assert!(OvfSpec::hyperbolic(1.0, -1.0, 1.0, 2).is_err());
    }

    #[test]
    fn bando_inflection_at_ym() {
        let s = OvfSpec::bando(4.0, 2.0, 5.0).unwrap();
        assert!(s.derivative(2.0, 2).unwrap().abs() < 1e-15);
        for y in [0.0, 1.0, 3.0, 10.0] {
            assert!(s.derivative(y, 1).unwrap() > 0.0);
        }
    }

    #[test]
    fn underwood_first_derivative_matches_finite_difference() {
        let s = OvfSpec::underwood(2.0, 1.0).unwrap();
        let exact = s.derivative(2.0, 1).unwrap();
        let fd = central(|y| s.value(y).unwrap(), 2.0, 1e-5);
        assert!((exact - fd).abs() < 1e-6 * exact.abs());
    }

    #[test]
    fn bando_calibration_round_trip() {
        // ẋ0 = 5 m/s at y* = 2 m with ỹ = 5 m and ym = 1 m
        let s = OvfSpec::bando(1.0, 1.0, 5.0)
            .unwrap()
            .calibrated(2.0, 5.0)
            .unwrap();
        let expected_v0 = 5.0 / ((1.0f64 / 5.0).tanh() + (1.0f64 / 5.0).tanh());
        assert!((s.v0() - expected_v0).abs() < 1e-12);
        assert!((s.value(2.0).unwrap() - 5.0).abs() < 1e-12);
        assert!((s.inverse(5.0).unwrap() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn v_max_matches_far_field() {
        for s in families() {
            let far = s.value(1e7).unwrap();
            assert!((far - s.v_max()).abs() < 1e-5 * s.v_max(), "{s:?}");
        }
    }

    #[test]
    fn derivatives_match_finite_differences_on_grid() {
        for s in families() {
            let lo = match s {
                OvfSpec::Hyperbolic { y0, .. } => y0 + 0.2,
                _ => 0.3,
            };
            for k in 0..100 {
                let y = lo + 0.15 * k as f64;
                // Underwood varies on the scale y²/ym near the origin
                let h = match s {
                    OvfSpec::Underwood { ym, .. } => 1e-3 * (y * y / ym).min(1.0),
                    _ => 1e-3,
                };
                let d = s.derivatives(y).unwrap();
                let v = |x: f64| s.value(x).unwrap();
                let fd1 = central(v, y, h);
                let fd2 = (v(y + h) - 2.0 * v(y) + v(y - h)) / (h * h);
                let fd3 = (v(y + 2.0 * h) - 2.0 * v(y + h) + 2.0 * v(y - h) - v(y - 2.0 * h))
                    / (2.0 * h * h * h);
                let scale = s.v0() * 1e-5;
                assert!(
                    (d[0] - fd1).abs() <= 1e-5 * d[0].abs() + scale * 1e-3,
                    "{s:?} y={y}"
                );
                assert!(
                    (d[1] - fd2).abs() <= 1e-5 * d[1].abs() + scale,
                    "{s:?} y={y}"
                );
                assert!(
                    (d[2] - fd3).abs() <= 1e-4 * d[2].abs() + scale,
                    "{s:?} y={y}"
                );
            }
        }
    }

    #[test]
    fn json_shape() {
        let s = OvfSpec::bando(2.0, 1.0, 5.0).unwrap();
        let j = serde_json::to_value(s).unwrap();
        assert_eq!(j["family"], "bando");
        assert!(j["y0"].is_null());
        let back: OvfSpec = serde_json::from_value(j).unwrap();
        assert_eq!(back, s);
        let bad = r#"{"family":"bando","v0":1,"ym":1,"y_tilde":5,"colour":3}"#;
        assert!(serde_json::from_str::<OvfSpec>(bad).is_err());
        let missing = r#"{"family":"bando","v0":1,"ym":1}"#;
        assert!(serde_json::from_str::<OvfSpec>(missing).is_err());
        let partial = r#"{"family":"underwood","v0":2,"ym":1}"#;
        assert!(serde_json::from_str::<OvfSpec>(partial).is_ok());
    }

    proptest! {
        #[test]
        fn monotone_and_bounded(idx in 0usize..4, y1 in 0.01f64..50.0, dy in 1e-3f64..20.0) {
            let s = families()[idx];
            let (lo, hi) = (s.value(y1).unwrap(), s.value(y1 + dy).unwrap());
            // hyperbolic is flat (zero) below y0
            if !matches!(s, OvfSpec::Hyperbolic { y0, .. } if y1 + dy <= y0) {
                prop_assert!(lo < hi);
            }
            prop_assert!(hi <= s.v_max());
            prop_assert!(lo >= 0.0);
        }

        #[test]
        fn inverse_round_trip(idx in 0usize..4, y in 0.2f64..30.0) {
            let s = families()[idx];
            let y = match s { OvfSpec::Hyperbolic { y0, .. } => y0 + y, _ => y };
            let v = s.value(y).unwrap();
            prop_assume!(v > 1e-9 && v < s.v_max() * (1.0 - 1e-9));
            let back = s.inverse(v).unwrap();
            prop_assert!((s.value(back).unwrap() - v).abs() <= 1e-10 * s.v0());
            prop_assert!((back - y).abs() <= 1e-8 * y.max(1.0));
        }
    }
}
