//! Pseudospectral (Chebyshev collocation) discretisation of the
//! infinitesimal generator of the delay system behind a quasi-polynomial.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::quasi::QuasiPolynomial;
use crate::error::{MovmError, Result};

/// Chebyshev points `x_j = cos(jπ/m)` and the differentiation matrix on them.
pub fn chebyshev(m: usize) -> (Vec<f64>, DMatrix<f64>) {
    let x: Vec<f64> = (0..=m)
        .map(|j| (std::f64::consts::PI * j as f64 / m as f64).cos())
        .collect();
    let c = |j: usize| {
        let base = if j == 0 || j == m { 2.0 } else { 1.0 };
        if j.is_multiple_of(2) {
            base
        } else {
            -base
        }
    };
    let mut d = DMatrix::zeros(m + 1, m + 1);
    for i in 0..=m {
        for j in 0..=m {
            if i != j {
                d[(i, j)] = c(i) / c(j) / (x[i] - x[j]);
            }
        }
    }
    for i in 0..=m {
        let s: f64 = (0..=m).filter(|&j| j != i).map(|j| d[(i, j)]).sum();
        d[(i, i)] = -s;
    }
    (x, d)
}

/// Eigenvalues of the collocated generator with `m + 1` nodes on `[-τ, 0]`.
///
/// The delay system is the companion realisation
/// `z'' + c1 z' + c0 z + b1 z'(t-τ) + b0 z(t-τ) = 0`.
pub fn generator_eigenvalues(q: &QuasiPolynomial, m: usize) -> Result<Vec<Complex64>> {
    if q.tau <= 0.0 {
        return Ok(q.delay_free_roots().to_vec());
    }
    let (_, d) = chebyshev(m);
    let n = 2 * (m + 1);
    let mut a = DMatrix::<f64>::zeros(n, n);
    // node 0 is θ = 0, node m is θ = -τ
    a[(0, 1)] = 1.0;
    a[(1, 0)] = -q.c0;
    a[(1, 1)] = -q.c1;
    a[(1, 2 * m)] = -q.b0;
    a[(1, 2 * m + 1)] = -q.b1;
    let scale = 2.0 / q.tau;
    for i in 1..=m {
        for j in 0..=m {
            let v = scale * d[(i, j)];
            a[(2 * i, 2 * j)] = v;
            a[(2 * i + 1, 2 * j + 1)] = v;
        }
    }
    let schur = nalgebra::linalg::Schur::try_new(a, 1e-14, 10_000)
        .ok_or_else(|| MovmError::NonConvergence("Schur iteration did not converge".into()))?;
    Ok(schur.complex_eigenvalues().iter().copied().collect())
}

/// Rightmost eigenvalue of the discretised generator, `Im ≥ 0`.
pub fn rightmost_eigenvalue(q: &QuasiPolynomial, m: usize) -> Result<Complex64> {
    let ev = generator_eigenvalues(q, m)?;
    let r = ev
        .into_iter()
        .filter(|z| z.is_finite())
        .max_by(|a, b| a.re.total_cmp(&b.re))
        .ok_or_else(|| MovmError::NonConvergence("empty spectrum".into()))?;
    Ok(Complex64::new(r.re, r.im.abs()))
}

/// Rightmost eigenvalue at two resolutions; fails if they disagree by more
/// than `tol` in real part.
pub fn rightmost_checked(q: &QuasiPolynomial, m: (usize, usize), tol: f64) -> Result<Complex64> {
    let coarse = rightmost_eigenvalue(q, m.0)?;
    let fine = rightmost_eigenvalue(q, m.1)?;
    if (coarse.re - fine.re).abs() > tol {
        return Err(MovmError::NonConvergence(format!(
            "pseudospectral resolutions disagree: {} vs {}",
            coarse.re, fine.re
        )));
    }
    Ok(fine)
}
