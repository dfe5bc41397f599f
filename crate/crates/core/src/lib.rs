//! Bayesian minimum mean-square-error phase estimation with two-mode
//! fixed-photon-number probe states.
//!
//! The crate is organised bottom-up:
//!
//! * [`prior`]: phase priors on `[0, 2π]` and their oscillatory moments.
//! * [`states`]: probe states `Σ a_l |l, n-l⟩` and the phase-shift channel.
//! * [`personick`]: the `Γ_k` operators, the optimal-measurement operator
//!   `B` and the MMSE, together with closed-form special cases.
//! * [`optimize`]: probe-state optimization for an arbitrary prior.
//! * [`adaptive`]: the single-photon adaptive protocol and its outcome tree.

// `!(x > 0.0)` style checks are kept on purpose: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod adaptive;
pub mod error;
pub mod linalg;
pub mod optimize;
pub mod personick;
pub mod prior;
pub mod quad;
pub mod states;

pub use error::{Error, Result};
pub use linalg::HermitianOperator;
pub use num_complex::Complex64;
pub use personick::{MeasurementSpec, PersonickSolution};
pub use prior::Prior;
pub use states::FockSuperposition;

/// `2π`, the length of the phase domain.
pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
