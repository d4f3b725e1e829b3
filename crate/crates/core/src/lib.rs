//! Simulation and verification toolkit for stochastic Volterra equations
//!
//! X_t = x_0 + ∫_0^t k_b(t-s) b(s, X_s) ds + ∫_0^t k_σ(t-s) σ(s, X_s) dW_s
//!
//! with completely monotone kernels k_b, k_σ. Every such kernel is the Laplace
//! transform of a nonnegative measure ν, and discretizing ν into atoms turns the
//! equation into a finite system of Ornstein-Uhlenbeck type factors whose sum is
//! the Volterra process. The crate covers the kernel catalog, the atom
//! quadrature, the lifted factor simulator, a direct convolution solver used as
//! an independent reference, weighted Sobolev diagnostics, an Itô formula
//! checker, and long-horizon stationarity tools.

pub mod error;
pub mod integrate;
pub mod invariant;
pub mod ito_verifier;
pub mod kernels;
pub mod lifted_sde;
pub mod quadrature;
pub mod rng;
pub mod volterra_reference;
pub mod weighted_sobolev;

pub use error::{Error, Result};
pub use kernels::{Kernel, KernelVariant, LiftMeasureSpec, MeasureForm, PowerDensity};
pub use lifted_sde::{
    BrownianPath, Coefficients, LiftedState, PathSample, SimGrid, SimOptions, StepScheme,
};
pub use quadrature::{DiscreteLiftMeasure, PartitionSpec};
