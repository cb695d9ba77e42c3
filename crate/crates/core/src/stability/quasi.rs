use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Quasi-polynomial `λ² + c1 λ + c0 + (b1 λ + b0) e^{-λτ}`.
///
/// Every per-pair characteristic function of the platoon, and every
/// exponentially shifted copy of it, has this form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiPolynomial {
    pub c1: f64,
    pub c0: f64,
    pub b1: f64,
    pub b0: f64,
    pub tau: f64,
}

impl QuasiPolynomial {
    /// `λ² + κaλe^{-λτ} + κ²(a d̃) e^{-λτ}`.
    pub fn movm(a: f64, d_tilde: f64, tau: f64, kappa: f64) -> Self {
        QuasiPolynomial {
            c1: 0.0,
            c0: 0.0,
            b1: kappa * a,
            b0: kappa * kappa * a * d_tilde,
            tau,
        }
    }

    pub fn eval(&self, z: Complex64) -> Complex64 {
        let e = (-z * self.tau).exp();
        z * z + z * self.c1 + self.c0 + (z * self.b1 + self.b0) * e
    }

    /// `f(z)` and `f'(z)`.
    pub fn eval_with_derivative(&self, z: Complex64) -> (Complex64, Complex64) {
        let e = (-z * self.tau).exp();
        let lin = z * self.b1 + self.b0;
        let f = z * z + z * self.c1 + self.c0 + lin * e;
        let df = z * 2.0 + self.c1 + (Complex64::from(self.b1) - lin * self.tau) * e;
        (f, df)
    }

    /// `g(μ) = f(μ + s)`, written again as a quasi-polynomial in `μ`.
    pub fn shifted(&self, s: f64) -> Self {
        let e = (-s * self.tau).exp();
        QuasiPolynomial {
            c1: self.c1 + 2.0 * s,
            c0: self.c0 + self.c1 * s + s * s,
            b1: self.b1 * e,
            b0: (self.b1 * s + self.b0) * e,
            tau: self.tau,
        }
    }

    /// The two roots of the delay-free polynomial `λ² + (c1+b1)λ + (c0+b0)`.
    pub fn delay_free_roots(&self) -> [Complex64; 2] {
        let p = self.c1 + self.b1;
        let q = self.c0 + self.b0;
        let disc = Complex64::from(p * p - 4.0 * q).sqrt();
        [(-p + disc) * 0.5, (-p - disc) * 0.5]
    }

    /// Radius `R` such that every root with `Re λ ≥ s` satisfies `|λ| ≤ R`.
    pub fn modulus_bound(&self, s: f64) -> f64 {
        let e = (-s * self.tau).exp();
        let p = self.c1.abs() + self.b1.abs() * e;
        let q = self.c0.abs() + self.b0.abs() * e;
        0.5 * (p + (p * p + 4.0 * q).sqrt())
    }

    /// Typical magnitude of the problem, used to scale tolerances.
    pub fn scale(&self) -> f64 {
        let mut s = (self.c1.abs() + self.b1.abs()).max((self.c0.abs() + self.b0.abs()).sqrt());
        if self.tau > 0.0 {
            s = s.max(1.0 / self.tau);
        }
        s.max(1e-3)
    }

    /// Newton iteration on `f`, returning `None` if it fails to converge.
    pub fn newton(&self, mut z: Complex64, max_iter: usize) -> Option<Complex64> {
        let tol = 1e-15 * self.scale();
        for _ in 0..max_iter {
            let (f, df) = self.eval_with_derivative(z);
            if df.norm() == 0.0 || !f.is_finite() {
                return None;
            }
            let step = f / df;
            z -= step;
            if step.norm() <= tol.max(4.0 * f64::EPSILON * z.norm()) {
                return Some(z);
            }
        }
        let (f, df) = self.eval_with_derivative(z);
        (f.norm() <= 1e-10 * df.norm().max(1.0)).then_some(z)
    }
}
