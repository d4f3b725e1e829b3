//! Pathwise check of the Itô formula for Volterra processes and the Lyapunov
//! criterion for global existence.
//!
//! The conditional expectation E[Γ_st | F_s] is read off the lifted state at
//! time s: Γ_st = y0 + Σ e^{-x_i (t-s)} y_i(s). For a path simulated on a grid
//! with snapshots at every step, the residual is
//!
//! f(t, X_t) - f(t0, Γ_{t0 t}) - Σ_j [ ∂_s f h + ∂_x f (k_b b h + k_σ σ ΔW_j) + ½ ∂²_x f k_σ² σ² h ]
//!
//! with every term evaluated at (s_j, Γ_{s_j t}) and kernels at lag t - s_j.

use std::fmt;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::lifted_sde::{simulate_path, BrownianPath, Coefficients, LiftedState, PathSample, SimGrid, SimOptions, SnapshotPolicy};
use crate::rng::{path_seed, rng_from_seed};

type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// f(t, x) with closed-form ∂_t f, ∂_x f, ∂²_x f.
#[derive(Clone)]
pub struct SmoothObservable {
    pub id: String,
    f: Fn2,
    ft: Fn2,
    fx: Fn2,
    fxx: Fn2,
}

impl fmt::Debug for SmoothObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SmoothObservable").field("id", &self.id).finish()
    }
}

pub const OBSERVABLE_NAMES: [&str; 6] = ["x", "x2", "x3", "t", "cos", "tx2"];

impl SmoothObservable {
    pub fn new<F, Ft, Fx, Fxx>(id: impl Into<String>, f: F, ft: Ft, fx: Fx, fxx: Fxx) -> Self
    where
        F: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        Ft: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        Fx: Fn(f64, f64) -> f64 + Send + Sync + 'static,
        Fxx: Fn(f64, f64) -> f64 + Send + Sync + 'static,
    {
        SmoothObservable {
            id: id.into(),
            f: Arc::new(f),
            ft: Arc::new(ft),
            fx: Arc::new(fx),
            fxx: Arc::new(fxx),
        }
    }

    /// Registry: "x", "x2", "x3", "t", "cos" (cos x), "tx2" (t x²).
    pub fn from_name(name: &str) -> Result<Self> {
        let o = match name {
            "x" => SmoothObservable::new("x", |_, x| x, |_, _| 0.0, |_, _| 1.0, |_, _| 0.0),
            "x2" => SmoothObservable::new("x2", |_, x| x * x, |_, _| 0.0, |_, x| 2.0 * x, |_, _| 2.0),
            "x3" => SmoothObservable::new("x3", |_, x| x * x * x, |_, _| 0.0, |_, x| 3.0 * x * x, |_, x| 6.0 * x),
            "t" => SmoothObservable::new("t", |t, _| t, |_, _| 1.0, |_, _| 0.0, |_, _| 0.0),
            "cos" => SmoothObservable::new("cos", |_, x: f64| x.cos(), |_, _| 0.0, |_, x: f64| -x.sin(), |_, x: f64| -x.cos()),
            "tx2" => SmoothObservable::new("tx2", |t, x| t * x * x, |_, x| x * x, |t, x| 2.0 * t * x, |t, _| 2.0 * t),
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown observable '{other}', expected one of {OBSERVABLE_NAMES:?}"
                )))
            }
        };
        Ok(o)
    }

    pub fn f(&self, t: f64, x: f64) -> f64 {
        (self.f)(t, x)
    }
    pub fn ft(&self, t: f64, x: f64) -> f64 {
        (self.ft)(t, x)
    }
    pub fn fx(&self, t: f64, x: f64) -> f64 {
        (self.fx)(t, x)
    }
    pub fn fxx(&self, t: f64, x: f64) -> f64 {
        (self.fxx)(t, x)
    }

    pub fn negated(&self) -> Self {
        let (f, ft, fx, fxx) = (self.f.clone(), self.ft.clone(), self.fx.clone(), self.fxx.clone());
        SmoothObservable::new(
            format!("-{}", self.id),
            move |t, x| -f(t, x),
            move |t, x| -ft(t, x),
            move |t, x| -fx(t, x),
            move |t, x| -fxx(t, x),
        )
    }

    /// Largest relative error of the closed-form partials against central
    /// differences at `points` random (t, x) in [0, 1] × [-2, 2].
    pub fn check_derivatives(&self, seed: u64, points: usize) -> f64 {
        let mut rng = rng_from_seed(seed);
        let mut worst = 0.0f64;
        let rel = |fd: f64, exact: f64| (fd - exact).abs() / exact.abs().max(1.0);
        for _ in 0..points {
            let t: f64 = rng.random_range(0.0..1.0);
            let x: f64 = rng.random_range(-2.0..2.0);
            let h1 = 1e-6;
            let h2 = 1e-4;
            let dt = (self.f(t + h1, x) - self.f(t - h1, x)) / (2.0 * h1);
            let dx = (self.f(t, x + h1) - self.f(t, x - h1)) / (2.0 * h1);
            let dxx = (self.f(t, x + h2) - 2.0 * self.f(t, x) + self.f(t, x - h2)) / (h2 * h2);
            worst = worst
                .max(rel(dt, self.ft(t, x)))
                .max(rel(dx, self.fx(t, x)))
                .max(rel(dxx, self.fxx(t, x)));
        }
        worst
    }
}

/// E[Γ_st | F_s] through the lift: the state at s decayed over `lag` = t - s, paired with 1.
pub fn gamma_st(s: &LiftedState, lag: f64) -> Result<f64> {
    if !(lag >= 0.0) {
        return Err(Error::Domain(format!("lag must be nonnegative, got {lag}")));
    }
    let mut g = s.y0;
    for (x, y) in s.atoms_b.nodes().iter().zip(&s.y_b) {
        g += (-x * lag).exp() * y;
    }
    for (x, y) in s.atoms_sigma.nodes().iter().zip(&s.y_sigma) {
        g += (-x * lag).exp() * y;
    }
    Ok(g)
}

/// Kernels inside the formula.
#[derive(Debug, Clone, Default)]
pub enum KernelMode {
    /// The simulated atom sums, so the check is exact for the simulated model.
    #[default]
    Atomized,
    /// The analytic kernels, exposing the quadrature bias of the atoms.
    Analytic { k_b: Kernel, k_sigma: Kernel },
}

fn kernel_at(mode: &KernelMode, s: &LiftedState, lag: f64) -> Result<(f64, f64)> {
    match mode {
        KernelMode::Atomized => Ok((s.atoms_b.kernel_value(lag), s.atoms_sigma.kernel_value(lag))),
        KernelMode::Analytic { k_b, k_sigma } => Ok((k_b.eval(lag)?, k_sigma.eval(lag)?)),
    }
}

/// Residual of the Itô formula between grid steps `t0_step` < `t_step`.
#[allow(clippy::too_many_arguments)]
pub fn ito_residual(
    f: &SmoothObservable,
    run: &PathSample,
    w: &BrownianPath,
    g: &SimGrid,
    c: &Coefficients,
    t0_step: usize,
    t_step: usize,
    mode: &KernelMode,
) -> Result<f64> {
    if t0_step >= t_step || t_step > g.n_steps {
        return Err(Error::InvalidParameter(format!(
            "need t0 < t on the grid, got steps {t0_step} and {t_step}"
        )));
    }
    if w.increments().len() != g.n_steps {
        return Err(Error::GridMismatch("Brownian path does not match the grid".into()));
    }
    if t_step < run.first_step || t_step - run.first_step >= run.values.len() {
        return Err(Error::Missing(format!("path has no value at step {t_step}")));
    }
    let t = g.time(t_step);
    let h = g.h();
    let dw = w.increments();
    let x_t = run.values[t_step - run.first_step];
    let mut integral = 0.0;
    let mut start = None;
    for j in t0_step..t_step {
        let snap = run
            .snapshot_at(j)
            .ok_or_else(|| Error::Missing(format!("no lifted-state snapshot at step {j}")))?;
        let s = g.time(j);
        let lag = t - s;
        let gam = gamma_st(&snap.state, lag)?;
        if j == t0_step {
            start = Some(f.f(g.time(t0_step), gam));
        }
        let x_s = snap.state.observable()?;
        let (kb, ks) = kernel_at(mode, &snap.state, lag)?;
        let b = c.b(s, x_s);
        let sig = c.sigma(s, x_s);
        integral += f.ft(s, gam) * h
            + f.fx(s, gam) * (kb * b * h + ks * sig * dw[j])
            + 0.5 * f.fxx(s, gam) * ks * ks * sig * sig * h;
    }
    Ok(f.f(t, x_t) - (start.expect("t0 < t") + integral))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualSummary {
    pub n: usize,
    pub mean: f64,
    pub stderr: f64,
    pub z_score: f64,
}

pub fn summarize(residuals: &[f64]) -> Result<ResidualSummary> {
    if residuals.len() < 2 {
        return Err(Error::Missing("need at least two residuals".into()));
    }
    let n = residuals.len() as f64;
    let mean = residuals.iter().sum::<f64>() / n;
    let var = residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let stderr = (var / n).sqrt();
    let z_score = if stderr > 0.0 { mean / stderr } else if mean == 0.0 { 0.0 } else { f64::INFINITY };
    Ok(ResidualSummary {
        n: residuals.len(),
        mean,
        stderr,
        z_score,
    })
}

/// Per-path residuals over [0, T] for seeds `path_seed(master_seed, i)`, in index order.
/// Also returns the terminal values X_T.
pub fn ito_ensemble(
    f: &SmoothObservable,
    s0: &LiftedState,
    c: &Coefficients,
    g: &SimGrid,
    master_seed: u64,
    paths: usize,
    mode: &KernelMode,
) -> Result<Vec<(f64, f64)>> {
    let opts = SimOptions {
        snapshots: SnapshotPolicy::Every,
        ..SimOptions::default()
    };
    (0..paths)
        .into_par_iter()
        .map(|i| {
            let w = BrownianPath::new(path_seed(master_seed, i as u64), *g);
            let run = simulate_path(s0, c, g, &w, &opts)?;
            let r = ito_residual(f, &run, &w, g, c, 0, g.n_steps, mode)?;
            Ok((r, run.terminal()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovReport {
    pub h_est: f64,
    pub d_est: f64,
    pub passed: bool,
    /// (x, lag, LV) where LV/(1+V) is largest in the outer shell, on failure.
    pub witness: Option<(f64, f64, f64)>,
    pub inner_ratio: f64,
    pub outer_ratio: f64,
    /// Bounds c₁ ≤ V/|x|^p ≤ c₂ found on the domain grid.
    pub c1: f64,
    pub c2: f64,
}

const SHELL_GROWTH: f64 = 1.5;
const FIT_SLACK: f64 = 1e-9;

/// LV(x, lag) = V'(x) k_b(lag) b(x) + V''(x) k_σ(lag)² σ(x)² with Γ = X_s = x,
/// fitted by LV ≤ h V + d over the domain × lag grid.
///
/// Unboundedness is detected by comparing sup LV⁺/(1+V) on the outer half of
/// the domain (|x| > R/2) against the inner half; growth by more than 1.5×
/// fails with the outer maximizer as witness.
#[allow(clippy::too_many_arguments)]
pub fn lyapunov_check(
    v: &SmoothObservable,
    p: f64,
    k_b: &Kernel,
    k_sigma: &Kernel,
    c: &Coefficients,
    domain: &[f64],
    lags: &[f64],
) -> Result<LyapunovReport> {
    if domain.is_empty() || lags.is_empty() {
        return Err(Error::InvalidParameter("domain and lag grids must be nonempty".into()));
    }
    let mut c1 = f64::INFINITY;
    let mut c2 = 0.0f64;
    for &x in domain.iter().filter(|x| **x != 0.0) {
        let r = v.f(0.0, x) / x.abs().powf(p);
        c1 = c1.min(r);
        c2 = c2.max(r);
    }
    if !(c1 > 0.0 && c2.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "V is not comparable to |x|^{p} on the domain grid (ratio range [{c1}, {c2}])"
        )));
    }
    let radius = domain.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut samples = Vec::with_capacity(domain.len() * lags.len());
    for &lag in lags {
        let kb = k_b.eval(lag)?;
        let ks = k_sigma.eval(lag)?;
        for &x in domain {
            let vx = v.f(0.0, x);
            let sig = c.sigma(0.0, x);
            let lv = v.fx(0.0, x) * kb * c.b(0.0, x) + v.fxx(0.0, x) * ks * ks * sig * sig;
            if !lv.is_finite() {
                return Err(Error::Domain(format!("LV not finite at x = {x}, lag = {lag}")));
            }
            samples.push((x, lag, vx, lv));
        }
    }
    let ratio = |s: &(f64, f64, f64, f64)| s.3.max(0.0) / (1.0 + s.2);
    let mut inner = 0.0f64;
    let mut outer = 0.0f64;
    let mut witness = None;
    for s in &samples {
        let r = ratio(s);
        if s.0.abs() > 0.5 * radius {
            if r > outer || witness.is_none() {
                outer = r;
                witness = Some((s.0, s.1, s.3));
            }
        } else {
            inner = inner.max(r);
        }
    }
    if outer > SHELL_GROWTH * inner + FIT_SLACK {
        return Ok(LyapunovReport {
            h_est: f64::INFINITY,
            d_est: f64::INFINITY,
            passed: false,
            witness,
            inner_ratio: inner,
            outer_ratio: outer,
            c1,
            c2,
        });
    }
    let h_est = samples
        .iter()
        .filter(|s| s.0.abs() > 0.5 * radius && s.2 > 0.0)
        .fold(0.0f64, |m, s| m.max(s.3 / s.2));
    let d_est = samples.iter().fold(0.0f64, |m, s| m.max(s.3 - h_est * s.2)) + FIT_SLACK;
    Ok(LyapunovReport {
        h_est,
        d_est,
        passed: true,
        witness: None,
        inner_ratio: inner,
        outer_ratio: outer,
        c1,
        c2,
    })
}
