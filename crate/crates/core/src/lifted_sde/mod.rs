//! The lifted equation as a finite factor system.
//!
//! With ν_b ≈ Σ c_i δ_{x_i} and ν_σ ≈ Σ d_j δ_{z_j}, the lifted measure-valued
//! process becomes the factor vector (y_b, y_σ) plus the initial-condition atom
//! at x = 0, and the Volterra process is the pairing with the constant function:
//! X_t = y0 + Σ y_b,i(t) + Σ y_σ,j(t).

mod coefficients;
mod envelope;
mod picard;
mod simulate;
mod state;

pub use coefficients::{Coefficients, ScalarFn};
pub use envelope::{lipschitz_envelope, LipschitzEnvelope};
pub use picard::{picard_solve_deterministic, PicardRule, PicardSolution};
pub use simulate::{
    run_ensemble, simulate_path, simulate_segment, BrownianPath, ExplosionReport, PathSample, SimGrid,
    SimOptions, Snapshot, SnapshotPolicy,
};
pub use state::{exp_euler_step, phi1, DriftWeighting, LiftedState, NoiseWeighting, StepScheme, StepWeights, EXPLOSION_THRESHOLD};
