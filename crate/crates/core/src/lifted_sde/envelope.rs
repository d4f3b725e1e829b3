use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

const SCAN_POINTS: usize = 2001;
const WIDENINGS: usize = 4;

/// k-Lipschitz lower envelope F_k(x) = inf_y { F(y) + k |x - y| }.
#[derive(Clone)]
pub struct LipschitzEnvelope {
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub k: f64,
    pub growth: f64,
}

impl fmt::Debug for LipschitzEnvelope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LipschitzEnvelope")
            .field("k", &self.k)
            .field("growth", &self.growth)
            .finish()
    }
}

impl LipschitzEnvelope {
    pub fn eval(&self, x: f64) -> Result<f64> {
        envelope_value(&*self.f, self.k, self.growth, x)
    }
}

/// `growth` is the linear-growth constant of F, used to size the search window.
pub fn lipschitz_envelope<F>(f: F, k: f64, growth: f64) -> Result<LipschitzEnvelope>
where
    F: Fn(f64) -> f64 + Send + Sync + 'static,
{
    if !(k > 0.0 && k.is_finite()) {
        return Err(Error::InvalidParameter(format!("envelope parameter must be positive, got {k}")));
    }
    if !(growth >= 0.0 && growth.is_finite()) {
        return Err(Error::InvalidParameter(format!("growth constant must be nonnegative, got {growth}")));
    }
    Ok(LipschitzEnvelope { f: Arc::new(f), k, growth })
}

pub(super) fn envelope_value(f: &dyn Fn(f64) -> f64, k: f64, growth: f64, x: f64) -> Result<f64> {
    let fx = f(x);
    if !fx.is_finite() {
        return Err(Error::Domain(format!("function is not finite at x = {x}")));
    }
    let objective = |y: f64| f(y) + k * (x - y).abs();
    let mut radius = 2.0 * (fx.abs() + growth * (1.0 + x.abs())) / k;
    if radius == 0.0 {
        radius = 1.0;
    }
    for _ in 0..WIDENINGS {
        let step = 2.0 * radius / (SCAN_POINTS - 1) as f64;
        let node = |i: usize| if i == SCAN_POINTS / 2 { x } else { x - radius + step * i as f64 };
        let vals: Vec<f64> = (0..SCAN_POINTS).map(|i| objective(node(i))).collect();
        let (best_i, _) = vals
            .iter()
            .enumerate()
            .fold((SCAN_POINTS / 2, fx), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });
        if best_i == 0 || best_i == SCAN_POINTS - 1 {
            radius *= 4.0;
            continue;
        }
        // a cusp of F between scan nodes can beat the best node, so every
        // discrete local minimum is refined
        let mut best = vals[best_i];
        for i in 1..SCAN_POINTS - 1 {
            if vals[i] <= vals[i - 1] && vals[i] <= vals[i + 1] {
                best = best.min(golden_min(&objective, node(i - 1), node(i + 1)));
            }
        }
        return Ok(best);
    }
    Err(Error::EnvelopeWindow { x })
}

fn golden_min(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    // relative stop, so brackets around a √|y| cusp at 0 keep shrinking;
    // there the value error is only the square root of the bracket width
    for _ in 0..240 {
        if (b - a).abs() <= f64::EPSILON * (a.abs() + b.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    fc.min(fd)
}
