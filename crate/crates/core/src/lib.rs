//! Dynamic panel estimation of commodity-channel spillovers from global
//! financial conditions to sovereign spreads.
//!
//! The crate covers the whole chain: quarterly panel storage, regression
//! designs for the price and spread equations, System GMM with collapsed
//! instruments, impulse responses with the price-channel decomposition,
//! parametric-bootstrap bands, commodity-trade classification, and synthetic
//! data generators used as test oracles.
//!
//! Numerical code is generic over [`Scalar`]; the `*64` aliases below fix it
//! to `f64`, which is what the pipeline uses.

pub mod bootstrap;
pub mod classify;
pub mod dgp;
pub mod error;
pub mod gmm;
pub mod irf;
pub mod linalg;
pub mod model;
pub mod panel;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type PanelDataset64 = panel::PanelDataset<f64>;
pub type Series64 = panel::Series<f64>;
pub type EquationDesign64 = model::EquationDesign<f64>;
pub type EstimationResult64 = gmm::EstimationResult<f64>;
pub type IrfPath64 = irf::IrfPath<f64>;
pub type IrfRequest64 = irf::IrfRequest<f64>;
pub type IrfResult64 = bootstrap::IrfResult<f64>;
pub type EquationCoefficients64 = irf::EquationCoefficients<f64>;
