//! Catalog of completely monotone kernels and their lift measures.
//!
//! Every kernel k here has the form k(t) = ∫ e^{-xt} ν(dx) for a nonnegative
//! measure ν. The catalog is closed under exponential damping and time shifts,
//! and the measures it produces are either finite atom systems or densities of
//! the form `scale · (x - start)^{-α} · e^{-tilt·x}` on (start, ∞).

use std::fmt;

use statrs::function::gamma::{gamma, gamma_lr, gamma_ur};

use crate::error::{Error, Result};
use crate::integrate::{self, integrate_power_weight, Tolerance};

/// Margin added to 1 - α when storing the decay exponent of a power-law measure.
pub const THETA_MARGIN: f64 = 0.05;

/// Default upper support truncation for density measures, relative to the
/// start of their support.
pub const DEFAULT_TRUNCATION: f64 = 1e6;

#[derive(Debug, Clone, PartialEq)]
pub enum KernelVariant {
    /// Σ c_i e^{-y_i t}, stored as (c_i, y_i).
    ExpSum(Vec<(f64, f64)>),
    /// t^{α-1} / Γ(α).
    Fractional { alpha: f64 },
    /// e^{-βt} t^{α-1} / Γ(α).
    Gamma { alpha: f64, beta: f64 },
    /// e^{-βt} k(t).
    Damped { base: Box<Kernel>, beta: f64 },
    /// k(t + δ).
    Shifted { base: Box<Kernel>, delta: f64 },
}

/// A validated catalog kernel. Construct through the named constructors.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    variant: KernelVariant,
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_unit_interval(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in (0, 1), got {v}")))
    }
}

impl Kernel {
    pub fn exp_sum(terms: Vec<(f64, f64)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidParameter("exponential sum needs at least one term".into()));
        }
        for &(c, y) in &terms {
            check_positive("weight c", c)?;
            if !(y.is_finite() && y >= 0.0) {
                return Err(Error::InvalidParameter(format!("rate y must be finite and >= 0, got {y}")));
            }
        }
        Ok(Kernel {
            variant: KernelVariant::ExpSum(terms),
        })
    }

    pub fn fractional(alpha: f64) -> Result<Self> {
        check_unit_interval("alpha", alpha)?;
        Ok(Kernel {
            variant: KernelVariant::Fractional { alpha },
        })
    }

    pub fn gamma(alpha: f64, beta: f64) -> Result<Self> {
        check_unit_interval("alpha", alpha)?;
        check_positive("beta", beta)?;
        Ok(Kernel {
            variant: KernelVariant::Gamma { alpha, beta },
        })
    }

    pub fn damped(base: Kernel, beta: f64) -> Result<Self> {
        check_positive("beta", beta)?;
        Self::check_wrap(&base)?;
        Ok(Kernel {
            variant: KernelVariant::Damped {
                base: Box::new(base),
                beta,
            },
        })
    }

    pub fn shifted(base: Kernel, delta: f64) -> Result<Self> {
        check_positive("delta", delta)?;
        Self::check_wrap(&base)?;
        Ok(Kernel {
            variant: KernelVariant::Shifted {
                base: Box::new(base),
                delta,
            },
        })
    }

    // a wrapper sits directly on a catalog kernel, so depth never exceeds 2
    fn check_wrap(base: &Kernel) -> Result<()> {
        if base.depth() >= 2 {
            return Err(Error::InvalidParameter(
                "damped/shifted kernels must wrap a non-wrapper catalog kernel".into(),
            ));
        }
        Ok(())
    }

    pub fn variant(&self) -> &KernelVariant {
        &self.variant
    }

    pub fn depth(&self) -> usize {
        match &self.variant {
            KernelVariant::Damped { base, .. } | KernelVariant::Shifted { base, .. } => 1 + base.depth(),
            _ => 1,
        }
    }

    /// Whether k(t) blows up as t → 0.
    pub fn is_singular(&self) -> bool {
        match &self.variant {
            KernelVariant::ExpSum(_) => false,
            KernelVariant::Fractional { .. } | KernelVariant::Gamma { .. } => true,
            KernelVariant::Damped { base, .. } => base.is_singular(),
            KernelVariant::Shifted { .. } => false,
        }
    }

    /// k(t) for t > 0.
    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t > 0.0) || !t.is_finite() {
            return Err(Error::Domain(format!("kernel evaluated at t = {t}; need t > 0")));
        }
        Ok(self.eval_unchecked(t))
    }

    pub(crate) fn eval_unchecked(&self, t: f64) -> f64 {
        match &self.variant {
            KernelVariant::ExpSum(terms) => terms.iter().map(|&(c, y)| c * (-y * t).exp()).sum(),
            KernelVariant::Fractional { alpha } => t.powf(alpha - 1.0) / gamma(*alpha),
            KernelVariant::Gamma { alpha, beta } => (-beta * t).exp() * t.powf(alpha - 1.0) / gamma(*alpha),
            KernelVariant::Damped { base, beta } => (-beta * t).exp() * base.eval_unchecked(t),
            KernelVariant::Shifted { base, delta } => base.eval_unchecked(t + delta),
        }
    }

    /// Closed-form ∫_0^u k(s) ds where one is available.
    pub fn antiderivative(&self, u: f64) -> Option<f64> {
        if u <= 0.0 {
            return Some(0.0);
        }
        match &self.variant {
            KernelVariant::ExpSum(terms) => Some(
                terms
                    .iter()
                    .map(|&(c, y)| if y == 0.0 { c * u } else { c * (-(-y * u).exp_m1()) / y })
                    .sum(),
            ),
            KernelVariant::Fractional { alpha } => Some(u.powf(*alpha) / gamma(alpha + 1.0)),
            KernelVariant::Gamma { alpha, beta } => Some(beta.powf(-alpha) * gamma_lr(*alpha, beta * u)),
            KernelVariant::Damped { base, beta } => match base.variant() {
                KernelVariant::ExpSum(terms) => {
                    let moved: Vec<_> = terms.iter().map(|&(c, y)| (c, y + beta)).collect();
                    Kernel { variant: KernelVariant::ExpSum(moved) }.antiderivative(u)
                }
                KernelVariant::Fractional { alpha } => Kernel {
                    variant: KernelVariant::Gamma { alpha: *alpha, beta: *beta },
                }
                .antiderivative(u),
                KernelVariant::Gamma { alpha, beta: b0 } => Kernel {
                    variant: KernelVariant::Gamma { alpha: *alpha, beta: b0 + beta },
                }
                .antiderivative(u),
                _ => None,
            },
            KernelVariant::Shifted { base, delta } => {
                Some(base.antiderivative(u + delta)? - base.antiderivative(*delta)?)
            }
        }
    }

    /// ∫_a^b k(s) ds for 0 ≤ a ≤ b, closed form when possible and adaptive
    /// quadrature otherwise.
    pub fn integral(&self, a: f64, b: f64) -> Result<f64> {
        if a < 0.0 || b < a {
            return Err(Error::Domain(format!("kernel integral over [{a}, {b}]")));
        }
        if let (Some(hi), Some(lo)) = (self.antiderivative(b), self.antiderivative(a)) {
            return Ok(hi - lo);
        }
        let tol = Tolerance::new(1e-15, 1e-12);
        let est = if self.is_singular() && a == 0.0 {
            integrate::integrate_endpoint_singular(|_, da, _| self.eval_unchecked(da), a, b, tol)?
        } else {
            integrate::integrate(|s| self.eval_unchecked(s), a, b, tol)?
        };
        Ok(est.value)
    }

    /// The exact lift measure ν with k = Laplace(ν).
    pub fn lift_measure(&self) -> LiftMeasureSpec {
        let form = self.measure_form();
        let theta = match &form {
            MeasureForm::Atoms(_) => 0.0,
            MeasureForm::Density(d) => d.theta(),
        };
        LiftMeasureSpec {
            form,
            theta,
            truncation: DEFAULT_TRUNCATION,
        }
    }

    fn measure_form(&self) -> MeasureForm {
        match &self.variant {
            KernelVariant::ExpSum(terms) => MeasureForm::Atoms(terms.iter().map(|&(c, y)| (y, c)).collect()),
            KernelVariant::Fractional { alpha } => MeasureForm::Density(PowerDensity {
                scale: power_law_scale(*alpha),
                alpha: *alpha,
                start: 0.0,
                tilt: 0.0,
            }),
            KernelVariant::Gamma { alpha, beta } => MeasureForm::Density(PowerDensity {
                scale: power_law_scale(*alpha),
                alpha: *alpha,
                start: *beta,
                tilt: 0.0,
            }),
            KernelVariant::Damped { base, beta } => match base.measure_form() {
                MeasureForm::Atoms(atoms) => MeasureForm::Atoms(atoms.into_iter().map(|(x, m)| (x + beta, m)).collect()),
                MeasureForm::Density(d) => MeasureForm::Density(PowerDensity {
                    scale: d.scale * (d.tilt * beta).exp(),
                    start: d.start + beta,
                    ..d
                }),
            },
            KernelVariant::Shifted { base, delta } => match base.measure_form() {
                MeasureForm::Atoms(atoms) => {
                    MeasureForm::Atoms(atoms.into_iter().map(|(x, m)| (x, m * (-delta * x).exp())).collect())
                }
                MeasureForm::Density(d) => MeasureForm::Density(PowerDensity {
                    tilt: d.tilt + delta,
                    ..d
                }),
            },
        }
    }

    /// Sign check of divided differences up to `max_order` on an increasing
    /// positive grid. The j-th divided difference of a completely monotone
    /// function has sign (-1)^j.
    pub fn check_complete_monotonicity(&self, max_order: usize, grid: &[f64]) -> Result<MonotonicityReport> {
        if max_order > 6 {
            return Err(Error::InvalidParameter(format!("max_order {max_order} exceeds 6")));
        }
        if grid.len() < 2 || grid[0] <= 0.0 || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Domain("grid must be positive and strictly increasing".into()));
        }
        let values: Vec<f64> = grid.iter().map(|&t| self.eval_unchecked(t)).collect();
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let tol = 1e-9 * scale;
        let mut report = MonotonicityReport::default();
        let max_step = grid.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        if max_step > grid[0] * (1.0 + 1e-9) {
            report.warnings.push(format!(
                "grid step {max_step:.3e} exceeds the smallest grid point {:.3e}; differences may miss curvature",
                grid[0]
            ));
        }
        // divided[i] holds f[x_i, ..., x_{i+j}] for the current order j
        let mut divided = values.clone();
        let mut factorial = 1.0;
        for order in 1..=max_order {
            if divided.len() < 2 {
                break;
            }
            factorial *= order as f64;
            let next: Vec<f64> = (0..divided.len() - 1)
                .map(|i| (divided[i + 1] - divided[i]) / (grid[i + order] - grid[i]))
                .collect();
            let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
            for (i, d) in next.iter().enumerate() {
                // rescale to the size of a forward difference with the mean stencil step
                let mean_step = (grid[i + order] - grid[i]) / order as f64;
                let forward = d * factorial * mean_step.powi(order as i32);
                if sign * forward < -tol {
                    report.violations.push(MonotonicityViolation {
                        order,
                        index: i,
                        t: grid[i],
                        value: sign * forward,
                    });
                }
            }
            divided = next;
        }
        Ok(report)
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.variant {
            KernelVariant::ExpSum(terms) => {
                write!(f, "exp_sum[")?;
                for (i, (c, y)) in terms.iter().enumerate() {
                    if i > 0 {
                        write!(f, ";")?;
                    }
                    write!(f, "{c}@{y}")?;
                }
                write!(f, "]")
            }
            KernelVariant::Fractional { alpha } => write!(f, "fractional(alpha={alpha})"),
            KernelVariant::Gamma { alpha, beta } => write!(f, "gamma(alpha={alpha},beta={beta})"),
            KernelVariant::Damped { base, beta } => write!(f, "damped({base},beta={beta})"),
            KernelVariant::Shifted { base, delta } => write!(f, "shifted({base},delta={delta})"),
        }
    }
}

fn power_law_scale(alpha: f64) -> f64 {
    1.0 / (gamma(alpha) * gamma(1.0 - alpha))
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MonotonicityReport {
    pub violations: Vec<MonotonicityViolation>,
    pub warnings: Vec<String>,
}

impl MonotonicityReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityViolation {
    pub order: usize,
    pub index: usize,
    pub t: f64,
    /// (-1)^j times the rescaled j-th difference; negative means violation.
    pub value: f64,
}

/// `scale · (x - start)^{-α} · e^{-tilt·x}` on (start, ∞).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerDensity {
    pub scale: f64,
    pub alpha: f64,
    pub start: f64,
    pub tilt: f64,
}

impl PowerDensity {
    pub fn density(&self, x: f64) -> f64 {
        if x <= self.start {
            return 0.0;
        }
        self.scale * (x - self.start).powf(-self.alpha) * (-self.tilt * x).exp()
    }

    /// Smooth factor g with density(start + u) = u^{-α} g(u).
    pub(crate) fn smooth_factor(&self, u: f64) -> f64 {
        self.scale * (-self.tilt * (self.start + u)).exp()
    }

    /// Minimal decay exponent stored with the measure.
    pub fn theta(&self) -> f64 {
        if self.tilt > 0.0 {
            0.0
        } else {
            1.0 - self.alpha + THETA_MARGIN
        }
    }

    /// ∫ over start + [lo, hi] of φ(x) ν(dx), φ smooth.
    pub fn integrate_against<F: Fn(f64) -> f64>(&self, phi: F, lo: f64, hi: f64, tol: Tolerance) -> Result<f64> {
        self.integrate_offset(|u| phi(self.start + u), lo, hi, tol)
    }

    /// Same as [`integrate_against`](Self::integrate_against) with φ taking the
    /// offset u = x - start, which avoids cancellation near the support edge.
    pub fn integrate_offset<F: Fn(f64) -> f64>(&self, phi: F, lo: f64, hi: f64, tol: Tolerance) -> Result<f64> {
        let g = |u: f64| self.smooth_factor(u) * phi(u);
        Ok(integrate_power_weight(g, self.alpha, lo, hi, tol)?.value)
    }

    /// Upper bound on ∫_{start+X}^∞ e^{-λx} ν(dx), using u^{-α} ≤ X^{-α}.
    pub fn laplace_tail_bound(&self, lambda: f64, x_trunc: f64) -> f64 {
        let kappa = lambda + self.tilt;
        if kappa <= 0.0 {
            return f64::INFINITY;
        }
        self.scale * x_trunc.powf(-self.alpha) * (-kappa * (self.start + x_trunc)).exp() / kappa
    }

    /// Exact ∫_{start+X}^∞ e^{-λx} ν(dx) through the upper incomplete gamma function.
    pub fn laplace_tail_exact(&self, lambda: f64, x_trunc: f64) -> f64 {
        let kappa = lambda + self.tilt;
        if kappa <= 0.0 {
            return f64::INFINITY;
        }
        let a = 1.0 - self.alpha;
        self.scale * (-kappa * self.start).exp() * kappa.powf(-a) * gamma(a) * gamma_ur(a, kappa * x_trunc)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeasureForm {
    /// (node x_i, mass c_i)
    Atoms(Vec<(f64, f64)>),
    Density(PowerDensity),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiftMeasureSpec {
    pub form: MeasureForm,
    /// θ_ν with ∫ (1+x)^{-θ} ν(dx) < ∞.
    pub theta: f64,
    /// Upper support truncation for densities, measured from the support start.
    pub truncation: f64,
}

impl LiftMeasureSpec {
    pub fn atoms(atoms: Vec<(f64, f64)>) -> Result<Self> {
        for &(x, m) in &atoms {
            if !(x >= 0.0 && m >= 0.0 && x.is_finite() && m.is_finite()) {
                return Err(Error::InvalidParameter(format!("atom ({x}, {m}) must be nonnegative and finite")));
            }
        }
        Ok(LiftMeasureSpec {
            form: MeasureForm::Atoms(atoms),
            theta: 0.0,
            truncation: DEFAULT_TRUNCATION,
        })
    }

    /// ∫ φ dν over the truncated support.
    pub fn integrate_against<F: Fn(f64) -> f64>(&self, phi: F, truncation: f64) -> Result<f64> {
        match &self.form {
            MeasureForm::Atoms(atoms) => Ok(atoms.iter().map(|&(x, m)| m * phi(x)).sum()),
            MeasureForm::Density(d) => d.integrate_against(phi, 0.0, truncation, Tolerance::default()),
        }
    }

    /// ∫_0^X (1+x)^{-θ} ν(dx) at the default truncation X and at 2X.
    pub fn theta_stability(&self) -> Result<ThetaCheck> {
        let theta = self.theta;
        let phi = |x: f64| (1.0 + x).powf(-theta);
        let base = self.integrate_against(phi, self.truncation)?;
        let extended = self.integrate_against(phi, 2.0 * self.truncation)?;
        Ok(ThetaCheck {
            base,
            extended,
            rel_change: if base == 0.0 { 0.0 } else { (extended - base).abs() / base.abs() },
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThetaCheck {
    pub base: f64,
    pub extended: f64,
    pub rel_change: f64,
}

impl ThetaCheck {
    pub fn stable(&self) -> bool {
        self.base.is_finite() && self.rel_change < 0.01
    }
}

/// ∫ e^{-λx} ν(dx). Exact for atoms; for densities the truncated integral is
/// evaluated by quadrature and the neglected tail must be negligible.
pub fn laplace_of_measure(m: &LiftMeasureSpec, lambda: f64, truncation: Option<f64>) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::Domain(format!("Laplace argument must be >= 0, got {lambda}")));
    }
    match &m.form {
        MeasureForm::Atoms(atoms) => Ok(atoms.iter().map(|&(x, c)| c * (-lambda * x).exp()).sum()),
        MeasureForm::Density(d) => {
            let x_trunc = truncation.unwrap_or(m.truncation);
            let tail = d.laplace_tail_bound(lambda, x_trunc);
            let value = d.integrate_against(|x| (-lambda * x).exp(), 0.0, x_trunc, Tolerance::new(1e-300, 1e-12))?;
            let tolerance = 1e-10 * value.abs().max(1e-300);
            if !(tail <= tolerance) {
                return Err(Error::Tail { tail, tolerance });
            }
            Ok(value)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
            .collect()
    }

    fn catalog() -> Vec<Kernel> {
        vec![
            Kernel::exp_sum(vec![(1.0, 0.5), (2.0, 3.0)]).unwrap(),
            Kernel::fractional(0.7).unwrap(),
            Kernel::fractional(0.3).unwrap(),
            Kernel::gamma(0.7, 2.0).unwrap(),
            Kernel::damped(Kernel::fractional(0.6).unwrap(), 1.0).unwrap(),
            Kernel::shifted(Kernel::fractional(0.7).unwrap(), 1.0).unwrap(),
            Kernel::shifted(Kernel::gamma(0.6, 0.5).unwrap(), 0.2).unwrap(),
            Kernel::damped(Kernel::exp_sum(vec![(1.0, 0.0)]).unwrap(), 2.0).unwrap(),
        ]
    }

    #[test]
    fn fractional_half_at_one() {
        let k = Kernel::fractional(0.5).unwrap();
        assert_relative_eq!(k.eval(1.0).unwrap(), 0.564_189_583_547_756_3, max_relative = 1e-14);
    }

    #[test]
    fn constant_kernel() {
        let k = Kernel::exp_sum(vec![(1.0, 0.0)]).unwrap();
        for t in [1e-3, 1.0, 1e3] {
            assert_eq!(k.eval(t).unwrap(), 1.0);
        }
    }

    #[test]
    fn gamma_kernel_value() {
        // mpmath, 40 digits: e^{-1} 0.5^{-0.3} / Γ(0.7)
        let k = Kernel::gamma(0.7, 2.0).unwrap();
        assert_relative_eq!(k.eval(0.5).unwrap(), 0.348_916_342_309_456_7, max_relative = 1e-13);
    }

    #[test]
    fn nonpositive_time_is_rejected() {
        let k = Kernel::fractional(0.5).unwrap();
        assert!(matches!(k.eval(0.0), Err(Error::Domain(_))));
        assert!(matches!(k.eval(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn construction_rejects_bad_parameters() {
        assert!(Kernel::fractional(1.0).is_err());
        assert!(Kernel::fractional(0.0).is_err());
        assert!(Kernel::gamma(0.5, -1.0).is_err());
        assert!(Kernel::exp_sum(vec![(-1.0, 1.0)]).is_err());
        assert!(Kernel::exp_sum(vec![]).is_err());
        let inner = Kernel::damped(Kernel::fractional(0.5).unwrap(), 1.0).unwrap();
        assert_eq!(inner.depth(), 2);
        assert!(Kernel::shifted(inner, 1.0).is_err());
    }

    #[test]
    fn lift_measure_examples() {
        let m = Kernel::exp_sum(vec![(2.0, 3.0)]).unwrap().lift_measure();
        assert_eq!(m.form, MeasureForm::Atoms(vec![(3.0, 2.0)]));
        assert_eq!(m.theta, 0.0);

        let m = Kernel::fractional(0.7).unwrap().lift_measure();
        let norm = gamma(0.7) * gamma(0.3);
        match m.form {
            MeasureForm::Density(d) => {
                assert_relative_eq!(d.density(2.0), 2f64.powf(-0.7) / norm, max_relative = 1e-14);
            }
            _ => panic!("expected density"),
        }
        assert!(m.theta > 0.3);
        assert_relative_eq!(m.theta, 0.35, max_relative = 1e-14);

        let m = Kernel::shifted(Kernel::fractional(0.7).unwrap(), 1.0).unwrap().lift_measure();
        match m.form {
            MeasureForm::Density(d) => {
                assert_relative_eq!(d.density(2.0), (-2f64).exp() * 2f64.powf(-0.7) / norm, max_relative = 1e-14);
            }
            _ => panic!("expected density"),
        }
        assert_eq!(m.theta, 0.0);
    }

    #[test]
    fn laplace_examples() {
        let m = LiftMeasureSpec::atoms(vec![(3.0, 2.0)]).unwrap();
        assert_eq!(laplace_of_measure(&m, 1.0, None).unwrap(), 2.0 * (-3f64).exp());
        let empty = LiftMeasureSpec::atoms(vec![]).unwrap();
        assert_eq!(laplace_of_measure(&empty, 0.7, None).unwrap(), 0.0);

        let m = Kernel::fractional(0.5).unwrap().lift_measure();
        let v = laplace_of_measure(&m, 1.0, None).unwrap();
        assert_relative_eq!(v, 0.564_189_583_547_756_3, max_relative = 1e-8);
    }

    #[test]
    fn laplace_tail_failure_is_reported() {
        let m = Kernel::fractional(0.5).unwrap().lift_measure();
        assert!(matches!(laplace_of_measure(&m, 0.0, None), Err(Error::Tail { .. })));
        assert!(matches!(laplace_of_measure(&m, 1e-6, Some(10.0)), Err(Error::Tail { .. })));
    }

    #[test]
    fn laplace_round_trip_over_catalog() {
        for k in catalog() {
            let m = k.lift_measure();
            for t in log_grid(1e-2, 10.0, 25) {
                let exact = k.eval(t).unwrap();
                let via = laplace_of_measure(&m, t, None).unwrap();
                assert!(
                    (via - exact).abs() <= 1e-6f64.max(1e-6 * exact),
                    "{k} at t={t}: {via} vs {exact}"
                );
            }
        }
    }

    #[test]
    fn exp_sum_round_trip_is_exact() {
        let k = Kernel::exp_sum(vec![(1.5, 0.25), (0.5, 4.0)]).unwrap();
        let m = k.lift_measure();
        for t in log_grid(1e-2, 10.0, 15) {
            assert_eq!(laplace_of_measure(&m, t, None).unwrap(), k.eval(t).unwrap());
        }
    }

    #[test]
    fn complete_monotonicity_examples() {
        let grid: Vec<f64> = (0..50).map(|i| 0.1 + 0.1 * i as f64).collect();
        let e = Kernel::exp_sum(vec![(1.0, 1.0)]).unwrap();
        assert!(e.check_complete_monotonicity(4, &grid).unwrap().passed());
        let f = Kernel::fractional(0.6).unwrap();
        assert!(f.check_complete_monotonicity(4, &grid).unwrap().passed());
        let d = Kernel::damped(Kernel::fractional(0.6).unwrap(), 1.0).unwrap();
        assert!(d.check_complete_monotonicity(3, &grid).unwrap().passed());
        for k in catalog() {
            let r = k.check_complete_monotonicity(4, &grid).unwrap();
            assert!(r.passed(), "{k}: {:?}", r.violations);
            assert!(r.warnings.is_empty());
        }
    }

    #[test]
    fn monotonicity_check_flags_coarse_grid_and_bad_input() {
        let k = Kernel::fractional(0.6).unwrap();
        let r = k.check_complete_monotonicity(2, &[0.01, 1.0, 2.0]).unwrap();
        assert_eq!(r.warnings.len(), 1);
        assert!(k.check_complete_monotonicity(7, &[1.0, 2.0]).is_err());
        assert!(k.check_complete_monotonicity(2, &[0.0, 1.0]).is_err());
        assert!(k.check_complete_monotonicity(2, &[2.0, 1.0]).is_err());
    }

    #[test]
    fn antiderivatives_match_quadrature() {
        for k in catalog() {
            let closed = k.integral(0.0, 1.5).unwrap();
            let numeric = if k.is_singular() {
                integrate::integrate_endpoint_singular(|_, s, _| k.eval_unchecked(s), 0.0, 1.5, Tolerance::new(1e-14, 1e-12))
            } else {
                integrate::integrate(|s| k.eval_unchecked(s), 0.0, 1.5, Tolerance::new(1e-14, 1e-12))
            }
            .unwrap()
            .value;
            assert_relative_eq!(closed, numeric, max_relative = 1e-9);
        }
    }

    #[test]
    fn theta_integral_is_finite_and_reported() {
        let exp = Kernel::exp_sum(vec![(1.0, 2.0)]).unwrap().lift_measure();
        assert!(exp.theta_stability().unwrap().stable());
        let shifted = Kernel::shifted(Kernel::fractional(0.7).unwrap(), 1.0).unwrap().lift_measure();
        assert!(shifted.theta_stability().unwrap().stable());
        // power tails with θ = 1 - α + 0.05 converge only like X^{-0.05}; the
        // doubling change matches the analytic tail ∫_X^{2X} x^{-α-θ} dx
        let frac = Kernel::fractional(0.7).unwrap().lift_measure();
        let check = frac.theta_stability().unwrap();
        assert!(check.base.is_finite() && check.extended > check.base);
        let x = frac.truncation;
        let tail = (x.powf(-0.05) - (2.0 * x).powf(-0.05)) / 0.05 / (gamma(0.7) * gamma(0.3));
        assert_relative_eq!(check.extended - check.base, tail, max_relative = 1e-3);
    }
}
