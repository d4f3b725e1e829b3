//! Long-horizon behaviour: Mittag-Leffler functions, resolvents of the gamma
//! kernel, integrability checks on kernels, and empirical stationarity runs.

use std::f64::consts::PI;

use rayon::prelude::*;
use statrs::function::gamma::{gamma, ln_gamma};

use crate::error::{Error, Result};
use crate::integrate::{integrate_endpoint_singular, integrate_pieces, integrate_power_weight, Tolerance};
use crate::kernels::Kernel;
use crate::lifted_sde::{BrownianPath, Coefficients, LiftedState, SimGrid, StepScheme, StepWeights, EXPLOSION_THRESHOLD};
use crate::quadrature::{discretize_kernel, DiscreteLiftMeasure, PartitionSpec};
use crate::rng::path_seed;

const SERIES_TOLERANCE: f64 = 1e-12;
const ROUNDING_BUDGET: f64 = 1e-11;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MittagLefflerParams {
    pub alpha: f64,
    pub beta: f64,
    pub terms: usize,
    pub switch_radius: f64,
}

impl MittagLefflerParams {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        let p = MittagLefflerParams {
            alpha,
            beta,
            terms: 200,
            switch_radius: 5.0,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha.is_finite() && self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "Mittag-Leffler needs α, β > 0, got α = {}, β = {}",
                self.alpha, self.beta
            )));
        }
        if self.terms < 50 {
            return Err(Error::InvalidParameter(format!("series truncation {} is below 50", self.terms)));
        }
        if !(self.switch_radius > 0.0) {
            return Err(Error::InvalidParameter("switch radius must be positive".into()));
        }
        Ok(())
    }
}

/// E_{α,β} with the series coefficients 1/Γ(αn+β) cached.
#[derive(Debug, Clone)]
pub struct MittagLeffler {
    pub params: MittagLefflerParams,
    coeffs: Vec<f64>,
    ln_gammas: Vec<f64>,
}

fn rgamma(x: f64) -> f64 {
    // x > 0 here, so Γ(x) > 0
    if x < 170.0 {
        1.0 / gamma(x)
    } else {
        (-ln_gamma(x)).exp()
    }
}

impl MittagLeffler {
    pub fn new(params: MittagLefflerParams) -> Result<Self> {
        params.validate()?;
        // a few spare coefficients so the series can run past M on large arguments
        let n = params.terms * 8 + 2;
        let ln_gammas: Vec<f64> = (0..n).map(|k| ln_gamma(params.alpha * k as f64 + params.beta)).collect();
        let coeffs = (0..n).map(|k| rgamma(params.alpha * k as f64 + params.beta)).collect();
        Ok(MittagLeffler {
            params,
            coeffs,
            ln_gammas,
        })
    }

    /// Series value if it is accurate to the series tolerance within `terms` terms.
    fn series(&self, z: f64, terms: usize, rounding_budget: f64) -> Option<f64> {
        let lz = z.abs().ln();
        let mut sum = 0.0;
        let mut abs_sum = 0.0;
        let mut power = 1.0;
        let mut tail = f64::INFINITY;
        for n in 0..terms {
            let term = power * self.coeffs[n];
            sum += term;
            abs_sum += term.abs();
            // |z| Γ(αn+β)/Γ(αn+α+β) decreases in n, so from here on the tail is geometric
            let ratio = (lz + self.ln_gammas[n + 1] - self.ln_gammas[n + 2]).exp();
            let next = ((n + 1) as f64 * lz - self.ln_gammas[n + 1]).exp();
            if ratio < 1.0 {
                tail = next / (1.0 - ratio);
                if tail < f64::EPSILON * 1e-3 * abs_sum.max(f64::MIN_POSITIVE) {
                    break;
                }
            }
            power *= z;
            if !power.is_finite() {
                return None;
            }
        }
        // rounding in an alternating sum grows with the sum of magnitudes
        let rounding = abs_sum * 16.0 * f64::EPSILON;
        let scale = sum.abs().max(1.0);
        if !sum.is_finite() || tail > SERIES_TOLERANCE * scale || rounding > rounding_budget * scale {
            return None;
        }
        Some(sum)
    }

    pub fn eval(&self, z: f64) -> Result<f64> {
        if !z.is_finite() {
            return Err(Error::Domain(format!("Mittag-Leffler argument {z} is not finite")));
        }
        let p = self.params;
        let has_integral = z < 0.0 && p.alpha < 1.0;
        if z.abs() <= p.switch_radius {
            // where the integral branch exists, only accept a series with little cancellation
            let budget = if has_integral { 1e-14 } else { ROUNDING_BUDGET };
            if let Some(v) = self.series(z, p.terms, budget) {
                return Ok(v);
            }
        }
        if has_integral {
            return ml_negative_integral(p.alpha, p.beta, z);
        }
        // large argument without an integral branch: try a longer series
        if let Some(v) = self.series(z, self.coeffs.len() - 2, ROUNDING_BUDGET) {
            return Ok(v);
        }
        Err(Error::Range(format!(
            "E_{{{}, {}}}({z}) is outside the series and integral branches",
            p.alpha, p.beta
        )))
    }
}

pub fn mittag_leffler(p: &MittagLefflerParams, z: f64) -> Result<f64> {
    MittagLeffler::new(*p)?.eval(z)
}

/// E_{α,β}(z) for z < 0 and 0 < α < 1 from the real integral representation
///
/// E_{α,β}(z) = ∫_0^∞ χ^{(1-β)/α} e^{-χ^{1/α}} [χ sin(π(1-β)) - z sin(π(1-β+α))]
///              / (απ (χ² - 2χz cos πα + z²)) dχ,
///
/// valid for β < 1 + α. Larger β is brought into range with
/// E_{α,β}(z) = (E_{α,β-α}(z) - 1/Γ(β-α)) / z.
fn ml_negative_integral(alpha: f64, beta: f64, z: f64) -> Result<f64> {
    if beta >= 1.0 + alpha {
        let lower = ml_negative_integral(alpha, beta - alpha, z)?;
        return Ok((lower - rgamma(beta - alpha)) / z);
    }
    let s1 = (PI * (1.0 - beta)).sin();
    let s2 = (PI * (1.0 - beta + alpha)).sin();
    let cos = (PI * alpha).cos();
    let power = (1.0 - beta) / alpha;
    let inv = 1.0 / alpha;
    let kernel = |chi: f64| {
        if chi <= 0.0 {
            return 0.0;
        }
        let num = chi * s1 - z * s2;
        let den = chi * chi - 2.0 * chi * z * cos + z * z;
        chi.powf(power) * (-chi.powf(inv)).exp() * num / den
    };
    // e^{-χ^{1/α}} < 1e-30 beyond this point
    let chi_max = 70f64.powf(alpha);
    let tol = Tolerance::new(1e-16, 1e-13);
    let mut breaks: Vec<f64> = [0.25 * z.abs(), z.abs(), 4.0 * z.abs()]
        .into_iter()
        .filter(|&b| b > 0.0 && b < chi_max)
        .collect();
    breaks.insert(0, 0.0);
    breaks.push(chi_max);
    let first = integrate_endpoint_singular(|s, _, _| kernel(s), breaks[0], breaks[1], tol)?;
    let rest = integrate_pieces(kernel, &breaks[1..], tol)?;
    Ok((first.value + rest.value) / (alpha * PI))
}

/// R(t) = e^{-δt} t^{β-1} E_{β,β}(-t^β), the resolvent of the normalized gamma kernel.
#[derive(Debug, Clone)]
pub struct GammaResolvent {
    pub delta: f64,
    pub beta: f64,
    ml: MittagLeffler,
}

impl GammaResolvent {
    pub fn new(delta: f64, beta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta.is_finite()) || !(beta > 0.0 && beta < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "gamma resolvent needs δ > 0 and β ∈ (0, 1/2), got δ = {delta}, β = {beta}"
            )));
        }
        Ok(GammaResolvent {
            delta,
            beta,
            ml: MittagLeffler::new(MittagLefflerParams::new(beta, beta)?)?,
        })
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) {
            return Err(Error::Domain(format!("resolvent needs t > 0, got {t}")));
        }
        Ok((-self.delta * t).exp() * t.powf(self.beta - 1.0) * self.ml.eval(-t.powf(self.beta))?)
    }

    /// ∫_0^T R(s) ds.
    pub fn integral(&self, t_end: f64) -> Result<f64> {
        if !(t_end > 0.0) {
            return Err(Error::Domain(format!("integral needs T > 0, got {t_end}")));
        }
        let g = |u: f64| (-self.delta * u).exp() * self.ml.eval(-u.powf(self.beta)).unwrap_or(f64::NAN);
        let est = integrate_power_weight(g, 1.0 - self.beta, 0.0, t_end, Tolerance::new(1e-13, 1e-11))?;
        if !est.value.is_finite() {
            return Err(Error::Range(format!("resolvent integral up to {t_end} is not finite")));
        }
        Ok(est.value)
    }
}

pub fn gamma_resolvent(delta: f64, beta: f64, t: f64) -> Result<f64> {
    GammaResolvent::new(delta, beta)?.eval(t)
}

/// Sign in the resolvent equation R = F ± F∗R.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResolventConvention {
    /// R = F + F∗R, the Gronwall resolvent: f ≤ a + F∗f gives f ≤ a + R∗a.
    #[default]
    Plus,
    /// R = F - F∗R, the resolvent of the linear equation x = a - F∗x.
    Minus,
}

/// (F∗R)(t) = ∫_0^t F(t-s) R(s) ds, with both factors allowed to be
/// integrably singular at their own origin.
pub fn convolve_at<F: Fn(f64) -> f64, R: Fn(f64) -> f64>(f: &F, r: &R, t: f64) -> Result<f64> {
    if t <= 0.0 {
        return Ok(0.0);
    }
    let est = integrate_endpoint_singular(|_, da, db| f(db) * r(da), 0.0, t, Tolerance::new(1e-14, 1e-12))?;
    Ok(est.value)
}

/// sup over the grid of |R(t) - F(t) ∓ (F∗R)(t)|. Grid points t ≤ 0 are skipped.
pub fn resolvent_identity_residual<F: Fn(f64) -> f64 + Sync, R: Fn(f64) -> f64 + Sync>(
    f: F,
    r: R,
    t_grid: &[f64],
    convention: ResolventConvention,
) -> Result<f64> {
    let sign = match convention {
        ResolventConvention::Plus => 1.0,
        ResolventConvention::Minus => -1.0,
    };
    let residuals: Vec<f64> = t_grid
        .par_iter()
        .filter(|&&t| t > 0.0)
        .map(|&t| Ok((r(t) - f(t) - sign * convolve_at(&f, &r, t)?).abs()))
        .collect::<Result<_>>()?;
    Ok(residuals.into_iter().fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LtStatus {
    Pass,
    Fail,
    Inconclusive,
}

/// Which integrability the kernel has to supply: L¹ for drift, L² for diffusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LtRole {
    Drift,
    Diffusion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LtReport {
    /// ∫_0^∞ F, infinite when the exponents say so
    pub l1: f64,
    /// ∫_0^∞ F²
    pub l2: f64,
    pub l1_status: LtStatus,
    pub l2_status: LtStatus,
    /// -d log F / d log t fitted on the upper half of the window
    pub tail_exponent: f64,
    /// the same near the origin
    pub origin_exponent: f64,
    pub monotone_tail: bool,
}

impl LtReport {
    pub fn status(&self, role: LtRole) -> LtStatus {
        match role {
            LtRole::Drift => self.l1_status,
            LtRole::Diffusion => self.l2_status,
        }
    }
}

const LT_MARGIN: f64 = 0.05;
const LT_ORIGIN: f64 = 1e-9;

fn log_slope(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> Option<f64> {
    let mut pts = Vec::with_capacity(n);
    for i in 0..n {
        let t = lo * (hi / lo).powf(i as f64 / (n - 1) as f64);
        let v = f(t);
        if !(v > 0.0) {
            return None;
        }
        pts.push((t.ln(), v.ln()));
    }
    let m = n as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

fn classify(exponent_ok: f64) -> LtStatus {
    // exponent_ok > 0 means integrable by that margin
    if exponent_ok > LT_MARGIN {
        LtStatus::Pass
    } else if exponent_ok < -LT_MARGIN {
        LtStatus::Fail
    } else {
        LtStatus::Inconclusive
    }
}

fn combine(a: LtStatus, b: LtStatus) -> LtStatus {
    use LtStatus::*;
    match (a, b) {
        (Fail, _) | (_, Fail) => Fail,
        (Pass, Pass) => Pass,
        _ => Inconclusive,
    }
}

/// Integrability of a positive kernel over (0, ∞) in L¹ and L².
///
/// The integral is computed on [1e-9, window.1]; the two ends are closed with
/// power laws whose exponents are fitted near the origin and on the upper half
/// (logarithmically) of the window. A tail that is not decreasing over the
/// window makes both statuses inconclusive.
pub fn check_lt_assumption(f: &dyn Fn(f64) -> f64, window: (f64, f64)) -> Result<LtReport> {
    let (w_lo, w_hi) = window;
    if !(w_lo > 0.0 && w_hi > w_lo && w_hi.is_finite()) {
        return Err(Error::InvalidParameter(format!("decay fit window ({w_lo}, {w_hi}) is not valid")));
    }
    let samples: Vec<f64> = (0..64)
        .map(|i| f(w_lo * (w_hi / w_lo).powf(i as f64 / 63.0)))
        .collect();
    if samples.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::Domain("kernel is negative or not finite on the window".into()));
    }
    let monotone_tail = samples.windows(2).all(|w| w[1] < w[0] || (w[1] == 0.0 && w[0] == 0.0));
    let origin_exponent = -log_slope(f, LT_ORIGIN, 10.0 * LT_ORIGIN, 9)
        .ok_or_else(|| Error::Domain("kernel is not positive near the origin".into()))?;
    let tail_lo = (w_lo * w_hi).sqrt();
    // a kernel that underflows inside the window decays faster than any power
    let tail_exponent = log_slope(f, tail_lo, w_hi, 17).map_or(f64::INFINITY, |s| -s);

    let mut breaks = vec![LT_ORIGIN];
    let mut edge = 10.0 * LT_ORIGIN;
    while edge < w_hi {
        breaks.push(edge);
        edge *= 10.0;
    }
    breaks.push(w_hi);
    let tol = Tolerance::new(1e-15, 1e-11);
    let f0 = f(LT_ORIGIN);
    let f_end = f(w_hi);
    let mut out = [0.0; 2];
    let mut status = [LtStatus::Inconclusive; 2];
    for (idx, p) in [1.0f64, 2.0].into_iter().enumerate() {
        let origin_ok = 1.0 - p * origin_exponent;
        let tail_ok = p * tail_exponent - 1.0;
        let st = combine(classify(origin_ok), classify(tail_ok));
        let middle = integrate_pieces(|t| f(t).powf(p), &breaks, tol)?.value;
        let head = if origin_ok > 0.0 {
            f0.powf(p) * LT_ORIGIN / origin_ok
        } else {
            f64::INFINITY
        };
        let tail = if tail_ok > 0.0 {
            if f_end == 0.0 {
                0.0
            } else {
                f_end.powf(p) * w_hi / tail_ok
            }
        } else {
            f64::INFINITY
        };
        out[idx] = head + middle + tail;
        status[idx] = if monotone_tail { st } else { LtStatus::Inconclusive };
    }
    Ok(LtReport {
        l1: out[0],
        l2: out[1],
        l1_status: status[0],
        l2_status: status[1],
        tail_exponent,
        origin_exponent,
        monotone_tail,
    })
}

/// [`check_lt_assumption`] for a catalog kernel.
pub fn check_lt_kernel(k: &Kernel, window: (f64, f64)) -> Result<LtReport> {
    check_lt_assumption(&|t| k.eval(t).unwrap_or(f64::NAN), window)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsEntry {
    pub t1: f64,
    pub t2: f64,
    pub statistic: f64,
    pub critical: f64,
}

impl KsEntry {
    pub fn below_critical(&self) -> bool {
        self.statistic < self.critical
    }
}

/// Two-sample 5% critical value 1.358 √((n+m)/(nm)).
pub fn ks_critical_value(n: usize, m: usize) -> f64 {
    let (n, m) = (n as f64, m as f64);
    1.358 * ((n + m) / (n * m)).sqrt()
}

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Missing("KS test needs two nonempty samples".into()));
    }
    if a.iter().chain(b).any(|v| v.is_nan()) {
        return Err(Error::Domain("KS sample contains NaN".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        // step over ties on both sides before comparing
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

#[derive(Debug, Clone)]
pub struct LongRunConfig {
    pub x0: f64,
    pub grid: SimGrid,
    /// checkpoints every this many steps, ending at the horizon
    pub checkpoint_every: usize,
    /// paths per group; two independent groups are simulated
    pub paths: usize,
    pub seed: u64,
    pub burn_in: f64,
    pub scheme: StepScheme,
}

impl LongRunConfig {
    pub fn new(x0: f64, grid: SimGrid, checkpoint_every: usize, paths: usize, seed: u64) -> Self {
        LongRunConfig {
            x0,
            grid,
            checkpoint_every,
            paths,
            seed,
            burn_in: 0.2,
            scheme: StepScheme::default(),
        }
    }

    fn checkpoint_steps(&self) -> Vec<usize> {
        (1..=self.grid.n_steps / self.checkpoint_every)
            .map(|k| k * self.checkpoint_every)
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct LongRunReport {
    pub t_long: f64,
    pub checkpoint_times: Vec<f64>,
    /// group A values of X per checkpoint, over paths that never exploded
    pub samples: Vec<Vec<f64>>,
    /// group B, independent of group A
    pub samples_independent: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub second_moment: Vec<f64>,
    /// group A at t1 against group B at t2, for post-burn-in checkpoint pairs
    pub ks: Vec<KsEntry>,
    pub burn_in_time: f64,
    pub exploded: usize,
    pub total_paths: usize,
    pub failed: bool,
    /// group A lifted states at the horizon, for restart probes
    pub final_states: Vec<LiftedState>,
}

impl LongRunReport {
    fn first_post_burn_in(&self) -> Option<usize> {
        self.checkpoint_times.iter().position(|&t| t >= self.burn_in_time)
    }

    /// max_t E|X_t|² over post-burn-in checkpoints divided by its value at the first one.
    pub fn moment_ratio(&self) -> f64 {
        match self.first_post_burn_in() {
            Some(i) => {
                let base = self.second_moment[i];
                let max = self.second_moment[i..].iter().copied().fold(0.0, f64::max);
                if base > 0.0 {
                    max / base
                } else if max == 0.0 {
                    1.0
                } else {
                    f64::INFINITY
                }
            }
            None => f64::NAN,
        }
    }

    pub fn moment_bounded(&self) -> bool {
        self.moment_ratio() <= 2.0
    }

    pub fn ks_between(&self, t1: f64, t2: f64) -> Option<&KsEntry> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(1.0);
        self.ks.iter().find(|e| close(e.t1, t1) && close(e.t2, t2))
    }
}

struct PathRecord {
    values: Vec<f64>,
    final_state: LiftedState,
}

// Runs one path from `start` for the grid's steps, recording X at the given
// steps. None if the factors leave the finite range.
fn run_recorded(
    start: &LiftedState,
    weights: &StepWeights,
    c: &Coefficients,
    g: &SimGrid,
    t0: f64,
    seed: u64,
    record: &[usize],
) -> Option<PathRecord> {
    let w = BrownianPath::new(seed, *g);
    let mut s = start.clone();
    let mut values = Vec::with_capacity(record.len());
    let mut next = 0;
    for (m, &dw) in w.increments().iter().enumerate() {
        weights.apply(&mut s, t0 + g.time(m), dw, c);
        let x = s.observable_unchecked();
        if !(x.abs() <= EXPLOSION_THRESHOLD) {
            return None;
        }
        if next < record.len() && record[next] == m + 1 {
            if !(s.max_factor() <= EXPLOSION_THRESHOLD) {
                return None;
            }
            values.push(x);
            next += 1;
        }
    }
    Some(PathRecord { values, final_state: s })
}

fn moments(samples: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    samples
        .iter()
        .map(|v| {
            let n = v.len().max(1) as f64;
            (v.iter().sum::<f64>() / n, v.iter().map(|x| x * x).sum::<f64>() / n)
        })
        .unzip()
}

/// Long-horizon ensemble of the lifted system with checkpoint statistics.
///
/// Paths i < `paths` form group A and the next `paths` form group B; the KS
/// entries compare group A at t1 with group B at t2 so the two samples are
/// independent. A run with more than 1% exploding paths is marked failed.
pub fn long_run(
    c: &Coefficients,
    atoms_b: &DiscreteLiftMeasure,
    atoms_sigma: &DiscreteLiftMeasure,
    cfg: &LongRunConfig,
) -> Result<LongRunReport> {
    if cfg.paths == 0 || cfg.checkpoint_every == 0 || cfg.checkpoint_every > cfg.grid.n_steps {
        return Err(Error::InvalidParameter(
            "long run needs paths > 0 and a checkpoint spacing within the grid".into(),
        ));
    }
    if !(0.0..1.0).contains(&cfg.burn_in) {
        return Err(Error::InvalidParameter(format!("burn-in fraction {} outside [0, 1)", cfg.burn_in)));
    }
    let g = cfg.grid;
    let steps = cfg.checkpoint_steps();
    let checkpoint_times: Vec<f64> = steps.iter().map(|&m| g.time(m)).collect();
    let weights = StepWeights::new(atoms_b, atoms_sigma, g.h(), cfg.scheme);
    let start = LiftedState::initial(
        cfg.x0,
        std::sync::Arc::new(atoms_b.clone()),
        std::sync::Arc::new(atoms_sigma.clone()),
    );
    let total = 2 * cfg.paths;
    let records: Vec<Option<PathRecord>> = (0..total)
        .into_par_iter()
        .map(|i| run_recorded(&start, &weights, c, &g, 0.0, path_seed(cfg.seed, i as u64), &steps))
        .collect();
    let exploded = records.iter().filter(|r| r.is_none()).count();

    let mut samples = vec![Vec::with_capacity(cfg.paths); steps.len()];
    let mut samples_independent = vec![Vec::with_capacity(cfg.paths); steps.len()];
    let mut final_states = Vec::with_capacity(cfg.paths);
    for (i, rec) in records.into_iter().enumerate() {
        let Some(rec) = rec else { continue };
        let target = if i < cfg.paths { &mut samples } else { &mut samples_independent };
        for (k, v) in rec.values.into_iter().enumerate() {
            target[k].push(v);
        }
        if i < cfg.paths {
            final_states.push(rec.final_state);
        }
    }
    let (mean, second_moment) = moments(&samples);
    let burn_in_time = cfg.burn_in * g.t_end;
    let mut ks = Vec::new();
    if !samples[0].is_empty() && !samples_independent[0].is_empty() {
        let late: Vec<usize> = (0..steps.len()).filter(|&k| checkpoint_times[k] >= burn_in_time).collect();
        for (p, &i) in late.iter().enumerate() {
            for &j in &late[p + 1..] {
                let a = &samples[i];
                let b = &samples_independent[j];
                ks.push(KsEntry {
                    t1: checkpoint_times[i],
                    t2: checkpoint_times[j],
                    statistic: ks_two_sample(a, b)?,
                    critical: ks_critical_value(a.len(), b.len()),
                });
            }
        }
    }
    Ok(LongRunReport {
        t_long: g.t_end,
        checkpoint_times,
        samples,
        samples_independent,
        mean,
        second_moment,
        ks,
        burn_in_time,
        exploded,
        total_paths: total,
        failed: exploded as f64 > 0.01 * total as f64,
        final_states,
    })
}

/// Checks (LT) for both kernels, discretizes them and runs [`long_run`].
pub fn long_run_kernels(
    c: &Coefficients,
    k_b: &Kernel,
    k_sigma: &Kernel,
    partition: &PartitionSpec,
    lt_window: (f64, f64),
    cfg: &LongRunConfig,
) -> Result<LongRunReport> {
    let rb = check_lt_kernel(k_b, lt_window)?;
    if rb.status(LtRole::Drift) != LtStatus::Pass {
        return Err(Error::InvalidParameter(format!(
            "drift kernel {k_b:?} does not pass the L¹ check ({:?})",
            rb.l1_status
        )));
    }
    if !c.zero_diffusion {
        let rs = check_lt_kernel(k_sigma, lt_window)?;
        if rs.status(LtRole::Diffusion) != LtStatus::Pass {
            return Err(Error::InvalidParameter(format!(
                "diffusion kernel {k_sigma:?} does not pass the L² check ({:?})",
                rs.l2_status
            )));
        }
    }
    let ab = discretize_kernel(k_b, partition)?;
    let as_ = discretize_kernel(k_sigma, partition)?;
    long_run(c, &ab, &as_, cfg)
}

/// Restarts every group-A horizon state for `grid.n_steps` more steps with
/// fresh noise and compares the resulting X with the group-B horizon sample.
pub fn restart_probe(
    c: &Coefficients,
    report: &LongRunReport,
    grid: &SimGrid,
    seed: u64,
    scheme: StepScheme,
) -> Result<KsEntry> {
    let first = report
        .final_states
        .first()
        .ok_or_else(|| Error::Missing("long run kept no horizon states".into()))?;
    let reference = report
        .samples_independent
        .last()
        .ok_or_else(|| Error::Missing("long run has no checkpoints".into()))?;
    let weights = StepWeights::new(&first.atoms_b, &first.atoms_sigma, grid.h(), scheme);
    let record = [grid.n_steps];
    let restarted: Vec<f64> = report
        .final_states
        .par_iter()
        .enumerate()
        .filter_map(|(i, s)| {
            run_recorded(s, &weights, c, grid, report.t_long, path_seed(seed, i as u64), &record)
                .map(|r| r.values[0])
        })
        .collect();
    Ok(KsEntry {
        t1: report.t_long + grid.t_end,
        t2: report.t_long,
        statistic: ks_two_sample(&restarted, reference)?,
        critical: ks_critical_value(restarted.len(), reference.len()),
    })
}
