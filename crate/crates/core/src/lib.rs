//! Simulation and theory for the anchored Toom interface.
//!
//! * [`coefficients`]: closed-form scaling constants as functions of λ.
//! * [`lattice`]: 64-lane multispin engine for the Toom spin exchange
//!   dynamics on a half-line window or a ring.
//! * [`estimators`]: cumulants, histograms and structure functions of
//!   magnetization samples.
//! * [`rmt`]: GOE Tracy–Widom and Airy₁ numerics.
//! * [`protocol`]: warmup and sampling schedules that tie the engine to
//!   the estimators.

pub mod coefficients;
pub mod error;
pub mod estimators;
pub mod lattice;
pub mod protocol;
pub mod rmt;

pub use coefficients::{
    kpz_coefficients, spin_current, stationary_magnetization, Coefficients, ModelParams,
};
pub use error::{Error, Result};
