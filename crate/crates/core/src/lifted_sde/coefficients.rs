use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type ScalarFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Drift b(t, x) and diffusion σ(t, x) with their declared regularity.
#[derive(Clone)]
pub struct Coefficients {
    drift: ScalarFn,
    diffusion: ScalarFn,
    /// C_LG with |b|, |σ| ≤ C_LG (1 + |x|).
    pub growth: f64,
    /// Joint Lipschitz constant in x, if the pair is Lipschitz.
    pub lipschitz: Option<f64>,
    /// σ ≡ 0 by construction.
    pub zero_diffusion: bool,
    pub label: String,
}

impl fmt::Debug for Coefficients {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Coefficients")
            .field("label", &self.label)
            .field("growth", &self.growth)
            .field("lipschitz", &self.lipschitz)
            .field("zero_diffusion", &self.zero_diffusion)
            .finish()
    }
}

impl Coefficients {
    pub fn new<B, S>(drift: B, diffusion: S, growth: f64, lipschitz: Option<f64>, label: impl Into<String>) -> Self
    where
        B: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        S: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Coefficients {
            drift: Arc::new(drift),
            diffusion: Arc::new(diffusion),
            growth,
            lipschitz,
            zero_diffusion: false,
            label: label.into(),
        }
    }

    /// σ ≡ 0.
    pub fn drift_only<B>(drift: B, growth: f64, lipschitz: Option<f64>, label: impl Into<String>) -> Self
    where
        B: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        Coefficients {
            zero_diffusion: true,
            ..Coefficients::new(drift, |_, _| 0.0, growth, lipschitz, label)
        }
    }

    pub fn zero() -> Self {
        Coefficients::drift_only(|_, _| 0.0, 0.0, Some(0.0), "zero")
    }

    pub fn from_parts(drift: ScalarFn, diffusion: ScalarFn, growth: f64, lipschitz: Option<f64>, label: String) -> Self {
        Coefficients {
            drift,
            diffusion,
            growth,
            lipschitz,
            zero_diffusion: false,
            label,
        }
    }

    #[inline]
    pub fn b(&self, t: f64, x: f64) -> f64 {
        (self.drift)(t, x)
    }

    #[inline]
    pub fn sigma(&self, t: f64, x: f64) -> f64 {
        (self.diffusion)(t, x)
    }

    pub fn drift_fn(&self) -> ScalarFn {
        self.drift.clone()
    }

    pub fn diffusion_fn(&self) -> ScalarFn {
        self.diffusion.clone()
    }

    /// Largest of |b|/(1+|x|) and |σ|/(1+|x|) over the diagnostic grid.
    pub fn growth_ratio(&self, t_grid: &[f64], x_grid: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for &t in t_grid {
            for &x in x_grid {
                let scale = 1.0 + x.abs();
                worst = worst.max(self.b(t, x).abs() / scale).max(self.sigma(t, x).abs() / scale);
            }
        }
        worst
    }

    /// Sampled check of the declared linear-growth constant.
    pub fn check_linear_growth(&self, t_grid: &[f64], x_grid: &[f64]) -> Result<f64> {
        let ratio = self.growth_ratio(t_grid, x_grid);
        if ratio <= self.growth * (1.0 + 1e-12) {
            Ok(ratio)
        } else {
            Err(Error::InvalidParameter(format!(
                "coefficients '{}' exceed declared growth constant {}: sampled ratio {ratio}",
                self.label, self.growth
            )))
        }
    }

    /// Same coefficients with the drift replaced by its k-Lipschitz envelope in x.
    pub fn with_lipschitz_drift(&self, k: f64) -> Self {
        let drift = self.drift.clone();
        let growth = self.growth;
        let envelope = move |t: f64, x: f64| {
            let d = drift.clone();
            super::envelope::envelope_value(&move |y| d(t, y), k, growth, x).unwrap_or(f64::NAN)
        };
        Coefficients {
            drift: Arc::new(envelope),
            diffusion: self.diffusion.clone(),
            growth: self.growth,
            lipschitz: Some(k),
            zero_diffusion: self.zero_diffusion,
            label: format!("{}|envelope(k={k})", self.label),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn growth_check() {
        let grid: Vec<f64> = (-50..=50).map(|i| i as f64 * 0.5).collect();
        let c = Coefficients::new(|_, x| -x, |_, x: f64| 2.0 * x.sin(), 2.0, Some(2.0), "mr");
        assert!(c.check_linear_growth(&[0.0], &grid).is_ok());
        let bad = Coefficients::new(|_, x: f64| x * x, |_, _| 0.0, 1.0, None, "sq");
        assert!(bad.check_linear_growth(&[0.0], &grid).is_err());
    }
}
