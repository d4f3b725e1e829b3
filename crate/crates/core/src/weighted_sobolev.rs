//! Weighted Sobolev norms W^{m,2}_w on a truncated half line, lower bounds for
//! the dual norms of atom measures, and the empirical semigroup decay exponent.
//!
//! Weights are w_i(x) = (1+x)^{2η-1+2i}. Norms use three-point finite
//! differences on a nonuniform grid and the trapezoid rule.

use crate::error::{Error, Result};
use crate::quadrature::DiscreteLiftMeasure;

pub const DEFAULT_GRID_NODES: usize = 4096;
pub const DEFAULT_GRID_MAX: f64 = 1e4;
/// Decay fits probe x up to a few multiples of 1/t, so they need a longer grid.
pub const DECAY_GRID_NODES: usize = 8192;
pub const DECAY_GRID_MAX: f64 = 1e6;
const FIRST_POSITIVE_NODE: f64 = 1e-6;
const NUMERICAL_ZERO: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightFamily {
    pub eta: f64,
    pub order: usize,
}

impl WeightFamily {
    pub fn new(eta: f64, order: usize) -> Result<Self> {
        if !eta.is_finite() {
            return Err(Error::InvalidParameter(format!("weight exponent must be finite, got {eta}")));
        }
        Ok(WeightFamily { eta, order })
    }

    pub fn exponent(&self, i: usize) -> f64 {
        2.0 * self.eta - 1.0 + 2.0 * i as f64
    }

    pub fn eval(&self, i: usize, x: f64) -> f64 {
        (1.0 + x).powf(self.exponent(i))
    }
}

/// Inputs of the admissibility rules for (w_+, w_~, w_-).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightTriple {
    pub eta_plus: f64,
    pub eta_sim: f64,
    pub eta_minus: f64,
    pub theta_b: f64,
    pub theta_sigma: f64,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TripleCheck {
    pub violations: Vec<String>,
}

impl TripleCheck {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_weight_triple(t: &WeightTriple) -> TripleCheck {
    let mut v = Vec::new();
    for (name, th) in [("theta_b", t.theta_b), ("theta_sigma", t.theta_sigma)] {
        if !(0.0..1.0).contains(&th) {
            v.push(format!("{name} = {th} outside [0, 1)"));
        }
    }
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()));
    if t.theta_sigma == 0.5 {
        v.push("theta_sigma = 1/2 is a boundary case the weight rules do not cover; unsupported".into());
    } else if t.theta_sigma < 0.5 {
        match t.eps {
            None => v.push("theta_sigma < 1/2 requires eps".into()),
            Some(eps) => {
                if !(eps > 0.0 && eps < 0.5 - t.theta_sigma) {
                    v.push(format!("need 0 < eps < 1/2 - theta_sigma = {}, got eps = {eps}", 0.5 - t.theta_sigma));
                }
                if !close(t.eta_plus, -eps) {
                    v.push(format!("need eta_plus = -eps = {}, got {}", -eps, t.eta_plus));
                }
            }
        }
    } else {
        match t.delta {
            None => v.push("theta_sigma > 1/2 requires delta".into()),
            Some(delta) => {
                if !(delta > 0.0 && delta < 0.5) {
                    v.push(format!("need 0 < delta < 1/2, got delta = {delta}"));
                }
                let want = t.theta_sigma - 0.5 + delta;
                if !close(t.eta_plus, want) {
                    v.push(format!("need eta_plus = theta_sigma - 1/2 + delta = {want}, got {}", t.eta_plus));
                }
            }
        }
    }
    let theta_max = t.theta_b.max(t.theta_sigma);
    if !(t.eta_minus > theta_max) {
        v.push(format!("need eta_minus > max(theta_b, theta_sigma) = {theta_max}, got {}", t.eta_minus));
    }
    if !(t.eta_plus < t.eta_sim) {
        v.push(format!("need eta_plus < eta_sim, got {} and {}", t.eta_plus, t.eta_sim));
    }
    if !(t.eta_sim < t.eta_minus) {
        v.push(format!("need eta_sim < eta_minus, got {} and {}", t.eta_sim, t.eta_minus));
    }
    TripleCheck { violations: v }
}

/// Nodes 0, then `n - 1` geometrically spaced nodes from 1e-6 to `x_max`.
pub fn log_grid(n: usize, x_max: f64) -> Result<Vec<f64>> {
    if n < 3 || !(x_max > FIRST_POSITIVE_NODE) {
        return Err(Error::InvalidParameter(format!("log grid needs n ≥ 3 and x_max > 1e-6, got {n}, {x_max}")));
    }
    let ratio = (x_max / FIRST_POSITIVE_NODE).ln() / (n - 2) as f64;
    let mut g = Vec::with_capacity(n);
    g.push(0.0);
    for j in 0..n - 1 {
        g.push(FIRST_POSITIVE_NODE * (ratio * j as f64).exp());
    }
    *g.last_mut().expect("nonempty") = x_max;
    Ok(g)
}

pub fn default_grid() -> Vec<f64> {
    log_grid(DEFAULT_GRID_NODES, DEFAULT_GRID_MAX).expect("valid default grid")
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if nodes.len() != values.len() || nodes.len() < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid function needs matching lengths ≥ 2, got {} nodes and {} values",
                nodes.len(),
                values.len()
            )));
        }
        if nodes.windows(2).any(|w| !(w[1] > w[0])) || nodes[0] < 0.0 {
            return Err(Error::InvalidParameter("grid nodes must be nonnegative and strictly increasing".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("grid function values must be finite".into()));
        }
        Ok(GridFunction { nodes, values })
    }

    pub fn sample<F: Fn(f64) -> f64>(f: F, nodes: &[f64]) -> Result<Self> {
        GridFunction::new(nodes.to_vec(), nodes.iter().map(|&x| f(x)).collect())
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Second-order first derivative on the nonuniform grid.
    pub fn derivative(&self) -> Result<GridFunction> {
        let x = &self.nodes;
        let f = &self.values;
        let n = x.len();
        if n < 3 {
            return Err(Error::InvalidParameter("finite differences need at least 3 nodes".into()));
        }
        let mut d = vec![0.0; n];
        for j in 1..n - 1 {
            let h1 = x[j] - x[j - 1];
            let h2 = x[j + 1] - x[j];
            d[j] = -h2 / (h1 * (h1 + h2)) * f[j - 1] + (h2 - h1) / (h1 * h2) * f[j] + h1 / (h2 * (h1 + h2)) * f[j + 1];
        }
        let (h1, h2) = (x[1] - x[0], x[2] - x[1]);
        d[0] = -(2.0 * h1 + h2) / (h1 * (h1 + h2)) * f[0] + (h1 + h2) / (h1 * h2) * f[1] - h1 / (h2 * (h1 + h2)) * f[2];
        let (h1, h2) = (x[n - 2] - x[n - 3], x[n - 1] - x[n - 2]);
        d[n - 1] = h2 / (h1 * (h1 + h2)) * f[n - 3] - (h1 + h2) / (h1 * h2) * f[n - 2] + (h1 + 2.0 * h2) / (h2 * (h1 + h2)) * f[n - 1];
        Ok(GridFunction {
            nodes: self.nodes.clone(),
            values: d,
        })
    }

    /// Trapezoid rule for ∫ g(x) f(x)² dx.
    fn weighted_square_integral<W: Fn(f64) -> f64>(&self, w: W) -> f64 {
        let q: Vec<f64> = self.nodes.iter().zip(&self.values).map(|(&x, &v)| v * v * w(x)).collect();
        self.nodes
            .windows(2)
            .zip(q.windows(2))
            .map(|(x, q)| 0.5 * (x[1] - x[0]) * (q[0] + q[1]))
            .sum()
    }

    pub fn sup_abs_weighted<W: Fn(f64) -> f64>(&self, w: W) -> f64 {
        self.nodes
            .iter()
            .zip(&self.values)
            .fold(0.0f64, |m, (&x, &v)| m.max((w(x) * v).abs()))
    }
}

/// Σ_{j≤m} ∫ |D^j f|² w_j dx with arbitrary weight functions, one per order.
pub fn sobolev_norm_sq_with<W: Fn(f64) -> f64>(f: &GridFunction, weights: &[W]) -> Result<f64> {
    let m = weights.len().saturating_sub(1);
    if weights.is_empty() {
        return Err(Error::InvalidParameter("at least one weight is required".into()));
    }
    if f.nodes.len() < m + 2 || (m >= 1 && f.nodes.len() < 3) {
        return Err(Error::InvalidParameter(format!(
            "order {m} needs at least {} grid nodes, got {}",
            (m + 2).max(3),
            f.nodes.len()
        )));
    }
    let mut total = 0.0;
    let mut current = f.clone();
    for (j, w) in weights.iter().enumerate() {
        if j > 0 {
            current = current.derivative()?;
        }
        total += current.weighted_square_integral(w);
    }
    Ok(total)
}

pub fn sobolev_norm_sq(f: &GridFunction, w: &WeightFamily, m: usize) -> Result<f64> {
    let weights: Vec<_> = (0..=m).map(|i| move |x: f64| w.eval(i, x)).collect();
    sobolev_norm_sq_with(f, &weights)
}

pub fn sobolev_norm(f: &GridFunction, w: &WeightFamily, m: usize) -> Result<f64> {
    Ok(sobolev_norm_sq(f, w, m)?.sqrt())
}

/// Closed-form test functions; the dual-norm pairing evaluates them at atoms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TestFunction {
    Gaussian { center: f64, scale: f64 },
    Constant,
    /// (1+x)^{-q}
    Power { q: f64 },
    /// (1+x)^p e^{-x/length}
    DampedPower { p: f64, length: f64 },
}

impl TestFunction {
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            TestFunction::Gaussian { center, scale } => {
                let z = (x - center) / scale;
                (-0.5 * z * z).exp()
            }
            TestFunction::Constant => 1.0,
            TestFunction::Power { q } => (1.0 + x).powf(-q),
            TestFunction::DampedPower { p, length } => (1.0 + x).powf(p) * (-x / length).exp(),
        }
    }
}

/// Gaussians with log-spaced centers and relative scales, the constant, a few
/// decaying powers, and growing powers cut off at the same log-spaced lengths.
///
/// The cut-off powers matter for decay fits: for ν(dx) ~ x^{-α} dx the sup in
/// the dual norm of e^{-xt}ν is approached by (1+x)^p e^{-xt} with p > -η, and
/// localized bumps alone reach it only with a much smaller constant.
pub fn standard_dictionary(center_min: f64, center_max: f64, per_decade: usize) -> Vec<TestFunction> {
    let decades = (center_max / center_min).log10();
    let count = (decades * per_decade as f64).ceil() as usize + 1;
    let mut out = Vec::new();
    for i in 0..count {
        let center = center_min * 10f64.powf(decades * i as f64 / (count - 1).max(1) as f64);
        for rel in [0.1, 0.25, 0.5] {
            out.push(TestFunction::Gaussian {
                center,
                scale: rel * center,
            });
        }
        for p in [0.25, 0.5, 1.0] {
            out.push(TestFunction::DampedPower { p, length: center });
        }
    }
    out.push(TestFunction::Constant);
    for q in [0.5, 1.0, 2.0] {
        out.push(TestFunction::Power { q });
    }
    out
}

/// Test functions with their W^{1,2}_w norms on a fixed grid.
#[derive(Debug, Clone)]
pub struct Dictionary {
    pub functions: Vec<TestFunction>,
    pub norms: Vec<f64>,
    pub weight: WeightFamily,
}

impl Dictionary {
    pub fn new(functions: Vec<TestFunction>, grid: &[f64], weight: WeightFamily) -> Result<Self> {
        if functions.is_empty() {
            return Err(Error::Missing("dictionary is empty".into()));
        }
        let norms = functions
            .iter()
            .map(|u| sobolev_norm(&GridFunction::sample(|x| u.eval(x), grid)?, &weight, 1))
            .collect::<Result<Vec<_>>>()?;
        if let Some(i) = norms.iter().position(|n| !(n.is_finite() && *n > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "dictionary entry {:?} has norm {}",
                functions[i], norms[i]
            )));
        }
        Ok(Dictionary {
            functions,
            norms,
            weight,
        })
    }

    pub fn standard(weight: WeightFamily) -> Result<Self> {
        Dictionary::new(standard_dictionary(1e-2, 2e3, 8), &default_grid(), weight)
    }

    /// Dictionary on the long grid used by [`semigroup_decay_fit`].
    pub fn for_decay_fit(weight: WeightFamily) -> Result<Self> {
        let grid = log_grid(DECAY_GRID_NODES, DECAY_GRID_MAX)?;
        Dictionary::new(standard_dictionary(1e-2, DECAY_GRID_MAX / 5.0, 8), &grid, weight)
    }
}

/// max_u |Σ c_i u(x_i)| / ‖u‖_{W^{1,2}_w}, a lower bound on the dual norm.
pub fn dual_norm_estimate(atoms: &DiscreteLiftMeasure, dict: &Dictionary) -> Result<f64> {
    dual_norm_decayed(atoms, 0.0, dict)
}

fn dual_norm_decayed(atoms: &DiscreteLiftMeasure, t: f64, dict: &Dictionary) -> Result<f64> {
    if dict.functions.is_empty() {
        return Err(Error::Missing("dictionary is empty".into()));
    }
    let weights: Vec<f64> = atoms.atoms().map(|(x, c)| c * (-x * t).exp()).collect();
    let mut best = 0.0f64;
    for (u, norm) in dict.functions.iter().zip(&dict.norms) {
        let pairing: f64 = atoms.nodes().iter().zip(&weights).map(|(&x, &w)| w * u.eval(x)).sum();
        best = best.max(pairing.abs() / norm);
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub gamma_hat: f64,
    pub intercept: f64,
    pub t: Vec<f64>,
    pub dual_norm: Vec<f64>,
    /// Grid points dropped because D(t) was numerically zero.
    pub excluded: Vec<f64>,
    pub fit_points: usize,
}

impl DecayFit {
    pub fn fit_line(&self, t: f64) -> f64 {
        (self.intercept - self.gamma_hat * t.ln()).exp()
    }
}

/// Default time grid for decay fits: 40 log-spaced points in [3e-5, 1].
pub fn default_decay_times() -> Vec<f64> {
    log_times(3e-5, 1.0, 40)
}

/// Log-spaced times in [t_min, t_max].
pub fn log_times(t_min: f64, t_max: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| t_min * (t_max / t_min).powf(i as f64 / (n - 1).max(1) as f64))
        .collect()
}

/// Slope fit of log D(t) against log t on the small-t half of `t_grid`,
/// with D(t) the dual-norm bound of the measure decayed by e^{-xt}.
pub fn semigroup_decay_fit(atoms: &DiscreteLiftMeasure, t_grid: &[f64], dict: &Dictionary) -> Result<DecayFit> {
    if t_grid.len() < 4 || t_grid.windows(2).any(|w| !(w[1] > w[0])) || !(t_grid[0] > 0.0) {
        return Err(Error::InvalidParameter("decay fit needs at least 4 increasing positive times".into()));
    }
    let d = t_grid
        .iter()
        .map(|&t| dual_norm_decayed(atoms, t, dict))
        .collect::<Result<Vec<_>>>()?;
    let half = t_grid.len().div_ceil(2);
    let mut excluded = Vec::new();
    let mut pts = Vec::new();
    for (&t, &v) in t_grid.iter().zip(&d).take(half) {
        if v < NUMERICAL_ZERO {
            excluded.push(t);
        } else {
            pts.push((t.ln(), v.ln()));
        }
    }
    for (&t, &v) in t_grid.iter().zip(&d).skip(half) {
        if v < NUMERICAL_ZERO {
            excluded.push(t);
        }
    }
    if pts.len() < 2 {
        return Err(Error::Missing("fewer than two usable points for the decay fit".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let slope = sxy / sxx;
    Ok(DecayFit {
        gamma_hat: -slope,
        intercept: my - slope * mx,
        t: t_grid.to_vec(),
        dual_norm: d,
        excluded,
        fit_points: pts.len(),
    })
}

/// max_u sup_x |w_c(x) u(x)| / ‖u‖_{W^{1,2}_w} over the dictionary.
pub fn embedding_ratio<W: Fn(f64) -> f64>(dict: &Dictionary, grid: &[f64], w_c: W) -> Result<f64> {
    let mut best = 0.0f64;
    for (u, norm) in dict.functions.iter().zip(&dict.norms) {
        let g = GridFunction::sample(|x| u.eval(x), grid)?;
        best = best.max(g.sup_abs_weighted(&w_c) / norm);
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Kernel;
    use crate::quadrature::{discretize_kernel, PartitionSpec};

    #[test]
    fn exponents_follow_rule() {
        let w = WeightFamily::new(-0.25, 2).unwrap();
        assert_eq!(w.exponent(0), -1.5);
        assert_eq!(w.exponent(2), 2.5);
        assert!(w.eval(1, 0.0) == 1.0 && w.eval(0, 1e6) > 0.0);
    }

    #[test]
    fn weight_triple_examples() {
        let ok = WeightTriple {
            eta_plus: -0.1,
            eta_sim: 0.1,
            eta_minus: 0.4,
            theta_b: 0.3,
            theta_sigma: 0.3,
            eps: Some(0.1),
            delta: None,
        };
        assert!(validate_weight_triple(&ok).passed());
        let flat = WeightTriple { eta_sim: -0.1, ..ok };
        assert!(!validate_weight_triple(&flat).passed());
        let big = WeightTriple {
            theta_sigma: 0.7,
            delta: Some(0.6),
            eps: None,
            eta_plus: 0.8,
            eta_sim: 0.85,
            eta_minus: 0.9,
            ..ok
        };
        let check = validate_weight_triple(&big);
        assert_eq!(check.violations.len(), 1, "{:?}", check.violations);
        let boundary = WeightTriple { theta_sigma: 0.5, ..ok };
        assert!(validate_weight_triple(&boundary).violations[0].contains("unsupported"));
    }

    #[test]
    fn norm_of_constant() {
        let grid = default_grid();
        let w = WeightFamily::new(-0.25, 1).unwrap();
        let one = GridFunction::sample(|_| 1.0, &grid).unwrap();
        let n0 = sobolev_norm_sq(&one, &w, 0).unwrap();
        // ∫_0^{1e4} (1+x)^{-1.5} dx = 2 (1 - (1 + 1e4)^{-1/2})
        assert!((n0 - 2.0).abs() < 0.02 * 2.0);
        assert!((n0 - 2.0 * (1.0 - 10001f64.powf(-0.5))).abs() < 1e-4);
        let n1 = sobolev_norm_sq(&one, &w, 1).unwrap();
        assert!((n1 - n0).abs() < 1e-12);
    }

    #[test]
    fn norm_of_exponential_matches_quadrature() {
        let grid = default_grid();
        let w = WeightFamily::new(-0.25, 1).unwrap();
        let f = GridFunction::sample(|x: f64| (-x).exp(), &grid).unwrap();
        // sqrt(∫ e^{-2x}[(1+x)^{-1.5} + (1+x)^{0.5}] dx), 25-digit reference
        let exact = 0.959_096_131_870_938_0;
        let got = sobolev_norm(&f, &w, 1).unwrap();
        assert!((got / exact - 1.0).abs() < 1e-4, "{got}");
    }

    #[test]
    fn order_exceeding_grid_is_rejected() {
        let f = GridFunction::new(vec![0.0, 1.0], vec![1.0, 2.0]).unwrap();
        let w = WeightFamily::new(0.0, 1).unwrap();
        assert!(sobolev_norm(&f, &w, 1).is_err());
        assert!(sobolev_norm(&f, &w, 0).is_ok());
        assert!(GridFunction::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn dual_norm_basics() {
        let w = WeightFamily::new(-0.05, 1).unwrap();
        let dict = Dictionary::standard(w).unwrap();
        let delta = DiscreteLiftMeasure::from_atoms(&[(3.0, 1.0)], "delta").unwrap();
        let d = dual_norm_estimate(&delta, &dict).unwrap();
        assert!(d > 0.0);
        let double = delta.scaled(2.0);
        assert_eq!(dual_norm_estimate(&double, &dict).unwrap(), 2.0 * d);
        assert_eq!(dual_norm_estimate(&DiscreteLiftMeasure::empty(), &dict).unwrap(), 0.0);
        assert!(Dictionary::new(vec![], &default_grid(), w).is_err());
    }

    #[test]
    fn decay_exponents() {
        let w = WeightFamily::new(-0.05, 1).unwrap();
        let dict = Dictionary::for_decay_fit(w).unwrap();
        let ts = default_decay_times();
        let frac = discretize_kernel(&Kernel::fractional(0.7).unwrap(), &PartitionSpec::default()).unwrap();
        let fit = semigroup_decay_fit(&frac, &ts, &dict).unwrap();
        let theory = 1.0 - 0.7 + 0.1 - 0.05;
        assert!((fit.gamma_hat - theory).abs() < 0.1, "{}", fit.gamma_hat);
        let scaled = semigroup_decay_fit(&frac.scaled(2.0), &ts, &dict).unwrap();
        assert!((scaled.gamma_hat - fit.gamma_hat).abs() < 1e-12);
        let exps = DiscreteLiftMeasure::from_atoms(&[(0.5, 1.0), (2.0, 0.3)], "exp").unwrap();
        let fit = semigroup_decay_fit(&exps, &ts, &dict).unwrap();
        assert!(fit.gamma_hat.abs() < 0.1, "{}", fit.gamma_hat);
    }

    #[test]
    fn embedding_of_constant() {
        let grid = default_grid();
        let w = WeightFamily::new(-0.25, 1).unwrap();
        let dict = Dictionary::new(vec![TestFunction::Constant], &grid, w).unwrap();
        let r = embedding_ratio(&dict, &grid, |_| 1.0).unwrap();
        assert!((r - 1.0 / dict.norms[0]).abs() < 1e-15);
    }
}
