//! Fixtures shared by the benchmarks.

use movm::model::presets;
use movm::stability::QuasiPolynomial;
use movm::PlatoonConfig;

/// Characteristic function of the reference pair at `a = 1.2` and half its
/// critical delay.
pub fn reference_quasi_polynomial() -> QuasiPolynomial {
    let dt = presets::reference_d_tilde();
    let tau = 0.5 * movm::stability::critical_delay(1.2, dt).expect("valid");
    QuasiPolynomial::movm(1.2, dt, tau, 1.0)
}

/// Four-pair platoon with pair 3 on its stability boundary.
pub fn onset_platoon() -> PlatoonConfig {
    presets::hopf_onset(1.0)
}

pub fn bando_platoon() -> PlatoonConfig {
    presets::bando_bifurcation(2.0)
}
