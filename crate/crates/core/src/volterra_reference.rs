//! Direct Euler discretization of the Volterra convolution, without any lift.
//!
//! X_m = x0 + Σ_{j<m} ω^b_{m-j} b(t_j, X_j) + Σ_{j<m} ω^σ_{m-j} σ(t_j, X_j) ΔW_j
//!
//! The grid is uniform, so the weights depend only on the lag. Drift weights are
//! exact cell integrals of k_b. Diffusion weights are cell averages of k_σ, which
//! keeps the first cell finite for singular kernels. Cost is O(N²) per path.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::lifted_sde::{BrownianPath, Coefficients, SimGrid};
use crate::rng::path_seed;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvolutionWeights {
    pub h: f64,
    // index ℓ - 1 holds the weight for lag ℓ h
    drift: Vec<f64>,
    diffusion: Vec<f64>,
}

fn cell_integrals(k: &Kernel, g: &SimGrid) -> Result<Vec<f64>> {
    let h = g.h();
    let mut out = Vec::with_capacity(g.n_steps);
    let mut prev = 0.0;
    for l in 1..=g.n_steps {
        let hi = l as f64 * h;
        let w = match k.antiderivative(hi) {
            Some(cum) => {
                let cell = cum - prev;
                prev = cum;
                cell
            }
            None => k.integral((l - 1) as f64 * h, hi)?,
        };
        if !w.is_finite() {
            return Err(Error::Domain(format!("kernel cell integral over lag {l} is not finite")));
        }
        out.push(w);
    }
    Ok(out)
}

impl ConvolutionWeights {
    pub fn new(k_b: &Kernel, k_sigma: &Kernel, g: &SimGrid) -> Result<Self> {
        let h = g.h();
        let drift = cell_integrals(k_b, g)?;
        let diffusion = cell_integrals(k_sigma, g)?.into_iter().map(|w| w / h).collect();
        Ok(ConvolutionWeights { h, drift, diffusion })
    }

    pub fn drift(&self, lag: usize) -> f64 {
        self.drift[lag - 1]
    }

    pub fn diffusion(&self, lag: usize) -> f64 {
        self.diffusion[lag - 1]
    }

    pub fn len(&self) -> usize {
        self.drift.len()
    }

    pub fn is_empty(&self) -> bool {
        self.drift.is_empty()
    }
}

pub fn direct_euler(
    k_b: &Kernel,
    k_sigma: &Kernel,
    c: &Coefficients,
    x0: f64,
    g: &SimGrid,
    w: &BrownianPath,
) -> Result<Vec<f64>> {
    let weights = ConvolutionWeights::new(k_b, k_sigma, g)?;
    direct_euler_with(&weights, c, x0, g, w)
}

/// Same as [`direct_euler`] with a precomputed weight table.
pub fn direct_euler_with(
    weights: &ConvolutionWeights,
    c: &Coefficients,
    x0: f64,
    g: &SimGrid,
    w: &BrownianPath,
) -> Result<Vec<f64>> {
    let n = g.n_steps;
    if weights.len() != n || w.increments().len() != n || (weights.h - g.h()).abs() > 1e-15 * g.h() {
        return Err(Error::GridMismatch(format!(
            "weights for {} steps, Brownian path with {}, grid with {n}",
            weights.len(),
            w.increments().len()
        )));
    }
    let dw = w.increments();
    let mut x = vec![0.0; n + 1];
    let mut b = vec![0.0; n];
    let mut s = vec![0.0; n];
    x[0] = x0;
    for m in 1..=n {
        let j = m - 1;
        let t = g.time(j);
        b[j] = c.b(t, x[j]);
        s[j] = c.sigma(t, x[j]) * dw[j];
        // lag m - j runs from m down to 1 as j runs up
        let mut acc = 0.0;
        for ((bj, sj), (wb, ws)) in b[..m]
            .iter()
            .zip(&s[..m])
            .zip(weights.drift[..m].iter().rev().zip(weights.diffusion[..m].iter().rev()))
        {
            acc += wb * bj + ws * sj;
        }
        x[m] = x0 + acc;
        if !x[m].is_finite() || x[m].abs() > crate::lifted_sde::EXPLOSION_THRESHOLD {
            return Err(Error::Domain(format!("direct solution left the finite range at t = {}", g.time(m))));
        }
    }
    Ok(x)
}

/// Direct paths for seeds `path_seed(master_seed, i)`, in index order.
pub fn run_direct_ensemble(
    weights: &ConvolutionWeights,
    c: &Coefficients,
    x0: f64,
    g: &SimGrid,
    master_seed: u64,
    paths: usize,
) -> Vec<Result<Vec<f64>>> {
    (0..paths)
        .into_par_iter()
        .map(|i| {
            let w = BrownianPath::new(path_seed(master_seed, i as u64), *g);
            direct_euler_with(weights, c, x0, g, &w)
        })
        .collect()
}

/// (sup |p1 - p2|, root-mean-square of |p1 - p2|) over grid points.
pub fn compare_paths(p1: &[f64], p2: &[f64]) -> Result<(f64, f64)> {
    if p1.len() != p2.len() || p1.is_empty() {
        return Err(Error::GridMismatch(format!("paths of length {} and {}", p1.len(), p2.len())));
    }
    let mut sup = 0.0f64;
    let mut sq = 0.0;
    for (a, b) in p1.iter().zip(p2) {
        let d = (a - b).abs();
        sup = sup.max(d);
        sq += d * d;
    }
    Ok((sup, (sq / p1.len() as f64).sqrt()))
}
