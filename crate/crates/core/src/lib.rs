//! Analysis toolkit for the modified optimal velocity model (MOVM): a
//! platoon of `N` vehicle pairs, each reacting to its own headway and to the
//! velocity of its predecessor after a pair-specific delay `τ_i`.
//!
//! * [`ovf`]: optimal velocity functions with closed-form derivatives.
//! * [`model`]: configuration, equilibrium, linearisation.
//! * [`stability`]: critical delay, Hopf crossing, non-oscillatory boundary,
//!   rate of convergence, rightmost characteristic roots.
//! * [`simulator`]: fixed-step nonlinear and linear simulation, cycle
//!   metrics, simulated bifurcation diagrams.
//! * [`hopf`]: normal form at the stability boundary.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod complex_json;
pub mod error;
pub mod hopf;
pub mod model;
pub mod ovf;
pub mod quadrature;
pub mod simulator;
pub mod stability;

pub use error::{MovmError, Result};
pub use hopf::{normal_form, NormalFormResult, TaylorConvention};
pub use model::{Equilibrium, PlatoonConfig, PlatoonFile};
pub use num_complex::Complex64;
pub use ovf::{OvfFamily, OvfParams, OvfSpec};
pub use simulator::{LeaderProfile, Trajectory};
pub use stability::{HopfPoint, StabilityReport};

/// Crate version, recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
