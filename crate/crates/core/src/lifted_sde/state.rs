use std::sync::Arc;

use crate::error::{Error, Result};
use crate::quadrature::DiscreteLiftMeasure;

use super::coefficients::Coefficients;
use super::simulate::{ExplosionReport, PathSample};

/// Factor magnitude at which a path is declared exploded.
pub const EXPLOSION_THRESHOLD: f64 = 1e12;

/// Discretized lifted measure μ_t = y0 δ_0 + Σ y_b,i δ_{x_i} + Σ y_σ,j δ_{z_j}.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftedState {
    pub atoms_b: Arc<DiscreteLiftMeasure>,
    pub atoms_sigma: Arc<DiscreteLiftMeasure>,
    pub y_b: Vec<f64>,
    pub y_sigma: Vec<f64>,
    /// Initial-condition channel, an atom at x = 0 that never decays.
    pub y0: f64,
}

impl LiftedState {
    /// μ_0 = x0 δ_0: all factors zero.
    pub fn initial(x0: f64, atoms_b: Arc<DiscreteLiftMeasure>, atoms_sigma: Arc<DiscreteLiftMeasure>) -> Self {
        LiftedState {
            y_b: vec![0.0; atoms_b.len()],
            y_sigma: vec![0.0; atoms_sigma.len()],
            atoms_b,
            atoms_sigma,
            y0: x0,
        }
    }

    pub fn with_factors(
        atoms_b: Arc<DiscreteLiftMeasure>,
        atoms_sigma: Arc<DiscreteLiftMeasure>,
        y_b: Vec<f64>,
        y_sigma: Vec<f64>,
        y0: f64,
    ) -> Result<Self> {
        if y_b.len() != atoms_b.len() || y_sigma.len() != atoms_sigma.len() {
            return Err(Error::InvalidParameter(format!(
                "factor lengths ({}, {}) do not match atom counts ({}, {})",
                y_b.len(),
                y_sigma.len(),
                atoms_b.len(),
                atoms_sigma.len()
            )));
        }
        Ok(LiftedState {
            atoms_b,
            atoms_sigma,
            y_b,
            y_sigma,
            y0,
        })
    }

    /// X = ⟨μ, 1⟩, summed as y0, then drift factors, then noise factors.
    #[inline]
    pub fn observable_unchecked(&self) -> f64 {
        let mut x = self.y0;
        for v in &self.y_b {
            x += v;
        }
        for v in &self.y_sigma {
            x += v;
        }
        x
    }

    pub fn observable(&self) -> Result<f64> {
        let x = self.observable_unchecked();
        if x.is_finite() {
            Ok(x)
        } else {
            Err(Error::Domain("observable of lifted state is not finite".into()))
        }
    }

    pub(crate) fn max_factor(&self) -> f64 {
        self.y_b
            .iter()
            .chain(self.y_sigma.iter())
            .fold(self.y0.abs(), |m, v| if v.is_nan() { f64::INFINITY } else { m.max(v.abs()) })
    }
}

/// φ₁(z) = (1 - e^{-z}) / z, with φ₁(0) = 1.
#[inline]
pub fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-300 {
        1.0
    } else {
        -(-z).exp_m1() / z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DriftWeighting {
    /// ∫_t^{t+h} e^{-x(t+h-s)} ds = h φ₁(xh): exact for frozen coefficients.
    #[default]
    ExponentialPhi1,
    /// Left-point rule h e^{-xh}.
    LeftPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseWeighting {
    /// Increment enters with weight e^{-xh}, i.e. at the interval start.
    #[default]
    FullStepDecay,
    /// Increment enters with weight e^{-xh/2}.
    Midpoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepScheme {
    pub drift: DriftWeighting,
    pub noise: NoiseWeighting,
}

/// Per-atom step factors for a fixed step size.
#[derive(Debug, Clone)]
pub struct StepWeights {
    pub h: f64,
    decay_b: Vec<f64>,
    drift_w: Vec<f64>,
    decay_s: Vec<f64>,
    noise_w: Vec<f64>,
}

impl StepWeights {
    pub fn new(atoms_b: &DiscreteLiftMeasure, atoms_sigma: &DiscreteLiftMeasure, h: f64, scheme: StepScheme) -> Self {
        let decay_b: Vec<f64> = atoms_b.nodes().iter().map(|&x| (-x * h).exp()).collect();
        let drift_w = atoms_b
            .atoms()
            .zip(decay_b.iter())
            .map(|((x, c), &decay)| match scheme.drift {
                DriftWeighting::ExponentialPhi1 => c * phi1(x * h) * h,
                DriftWeighting::LeftPoint => c * decay * h,
            })
            .collect();
        let decay_s: Vec<f64> = atoms_sigma.nodes().iter().map(|&x| (-x * h).exp()).collect();
        let noise_w = atoms_sigma
            .atoms()
            .zip(decay_s.iter())
            .map(|((x, c), &decay)| match scheme.noise {
                NoiseWeighting::FullStepDecay => c * decay,
                NoiseWeighting::Midpoint => c * (-0.5 * x * h).exp(),
            })
            .collect();
        StepWeights {
            h,
            decay_b,
            drift_w,
            decay_s,
            noise_w,
        }
    }

    /// One exponential Euler step in place; returns the observable before the step.
    #[inline]
    pub fn apply(&self, s: &mut LiftedState, t: f64, dw: f64, c: &Coefficients) -> f64 {
        let x = s.observable_unchecked();
        let b = c.b(t, x);
        let sig = c.sigma(t, x);
        for ((y, &decay), &w) in s.y_b.iter_mut().zip(&self.decay_b).zip(&self.drift_w) {
            *y = decay * *y + w * b;
        }
        let noise = sig * dw;
        for ((y, &decay), &w) in s.y_sigma.iter_mut().zip(&self.decay_s).zip(&self.noise_w) {
            *y = decay * *y + w * noise;
        }
        x
    }
}

/// Exponential (mild) Euler step of the lifted system over [t, t + h].
pub fn exp_euler_step(
    s: &LiftedState,
    t: f64,
    h: f64,
    dw: f64,
    c: &Coefficients,
    scheme: StepScheme,
) -> Result<LiftedState> {
    if !(h > 0.0) {
        return Err(Error::Domain(format!("step size must be positive, got {h}")));
    }
    let weights = StepWeights::new(&s.atoms_b, &s.atoms_sigma, h, scheme);
    let mut next = s.clone();
    weights.apply(&mut next, t, dw, c);
    if !(next.max_factor() <= EXPLOSION_THRESHOLD) {
        let partial = PathSample::single(t, s.observable_unchecked(), s.clone());
        return Err(Error::Explosion(Box::new(ExplosionReport {
            time: t + h,
            step: 1,
            partial,
        })));
    }
    Ok(next)
}
