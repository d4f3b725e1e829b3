use crate::error::{Error, Result};

use super::coefficients::Coefficients;
use super::simulate::SimGrid;
use super::state::{phi1, LiftedState};

const MAX_ITERATIONS: usize = 200;
const CHANGE_TOLERANCE: f64 = 1e-10;
const GROWTH_STREAK: usize = 5;

/// How b(s, X(s)) is interpolated inside each cell of the mild integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PicardRule {
    /// Frozen at the left end: the fixed point is the exponential Euler path.
    #[default]
    LeftPoint,
    /// Linear between the cell ends, integrated exactly against e^{-x(t-s)}.
    Trapezoid,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PicardSolution {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub iterations: usize,
    pub last_change: f64,
    pub converged: bool,
}

// ∫_0^1 e^{-z w} w dw, the weight of the left cell value under linear interpolation
fn left_linear_weight(z: f64) -> f64 {
    if z < 1e-3 {
        0.5 - z / 3.0 + z * z / 8.0 - z * z * z / 30.0
    } else {
        (1.0 - (-z).exp() * (1.0 + z)) / (z * z)
    }
}

/// Fixed-point iteration of the mild equation for σ ≡ 0 on the grid.
pub fn picard_solve_deterministic(
    c: &Coefficients,
    s0: &LiftedState,
    g: &SimGrid,
    rule: PicardRule,
) -> Result<PicardSolution> {
    if !c.zero_diffusion {
        return Err(Error::InvalidParameter(format!(
            "Picard solver needs σ ≡ 0, coefficients '{}' have diffusion",
            c.label
        )));
    }
    if c.lipschitz.is_none_or(|l| !l.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "Picard solver needs a finite Lipschitz constant for '{}'",
            c.label
        )));
    }
    s0.observable()?;
    let n = g.n_steps;
    let h = g.h();
    let times = g.times();
    let decay: Vec<f64> = s0.atoms_b.nodes().iter().map(|&x| (-x * h).exp()).collect();
    let (w_left, w_right): (Vec<f64>, Vec<f64>) = s0
        .atoms_b
        .atoms()
        .map(|(x, mass)| {
            let z = x * h;
            match rule {
                PicardRule::LeftPoint => (mass * phi1(z) * h, 0.0),
                PicardRule::Trapezoid => {
                    let a = left_linear_weight(z);
                    (mass * a * h, mass * (phi1(z) - a) * h)
                }
            }
        })
        .unzip();
    let decay_s: Vec<f64> = s0.atoms_sigma.nodes().iter().map(|&x| (-x * h).exp()).collect();

    // contribution of the initial noise factors, which only decay
    let mut frozen = vec![0.0; n + 1];
    let mut ys = s0.y_sigma.clone();
    for slot in frozen.iter_mut() {
        *slot = ys.iter().sum::<f64>();
        for (y, &d) in ys.iter_mut().zip(&decay_s) {
            *y *= d;
        }
    }

    let x_start = s0.observable_unchecked();
    let mut current = vec![x_start; n + 1];
    let mut next = vec![0.0; n + 1];
    let mut drift = vec![0.0; n + 1];
    let mut previous_change = f64::INFINITY;
    let mut streak = 0;
    let mut last_change = f64::INFINITY;
    for iteration in 1..=MAX_ITERATIONS {
        for (m, d) in drift.iter_mut().enumerate() {
            *d = c.b(times[m], current[m]);
        }
        let mut y = s0.y_b.clone();
        for m in 0..=n {
            if m > 0 {
                for (i, yi) in y.iter_mut().enumerate() {
                    *yi = decay[i] * *yi + w_left[i] * drift[m - 1] + w_right[i] * drift[m];
                }
            }
            let mut x = s0.y0;
            for v in &y {
                x += v;
            }
            next[m] = x + frozen[m];
        }
        let change = next
            .iter()
            .zip(&current)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        if !change.is_finite() {
            return Err(Error::NonContraction { iterations: iteration });
        }
        std::mem::swap(&mut current, &mut next);
        last_change = change;
        if change < CHANGE_TOLERANCE {
            return Ok(PicardSolution {
                times,
                values: current,
                iterations: iteration,
                last_change,
                converged: true,
            });
        }
        if change > previous_change {
            streak += 1;
            if streak >= GROWTH_STREAK {
                return Err(Error::NonContraction { iterations: iteration });
            }
        } else {
            streak = 0;
        }
        previous_change = change;
    }
    Ok(PicardSolution {
        times,
        values: current,
        iterations: MAX_ITERATIONS,
        last_change,
        converged: false,
    })
}
