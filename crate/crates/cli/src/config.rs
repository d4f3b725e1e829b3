//! Experiment configuration (TOML) and the coefficient registry.

use std::sync::Arc;

use serde::Deserialize;
use svlift::lifted_sde::ScalarFn;
use svlift::{Coefficients, Kernel, PartitionSpec};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub output: Option<String>,
    #[serde(default = "default_x0")]
    pub x0: f64,
    pub kernel_b: Option<KernelSpec>,
    pub kernel_sigma: Option<KernelSpec>,
    pub drift: Option<CoefficientSpec>,
    pub diffusion: Option<CoefficientSpec>,
    pub grid: Option<GridSection>,
    pub ensemble: Option<EnsembleSection>,
    #[serde(default)]
    pub quadrature: QuadratureSection,
    pub kernel_info: Option<KernelInfoSection>,
    pub decay_fit: Option<DecayFitSection>,
    pub simulate: Option<SimulateSection>,
    pub compare: Option<CompareSection>,
    pub ito_check: Option<ItoSection>,
    pub lyapunov: Option<LyapunovSection>,
    pub invariant: Option<InvariantSection>,
}

fn default_x0() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// k(t) = Σ c e^{-y t}, terms as [c, y] pairs
    ExpSum { terms: Vec<(f64, f64)> },
    Fractional { alpha: f64 },
    Gamma { alpha: f64, beta: f64 },
    Damped { base: Box<KernelSpec>, beta: f64 },
    Shifted { base: Box<KernelSpec>, delta: f64 },
}

impl KernelSpec {
    pub fn build(&self) -> svlift::Result<Kernel> {
        match self {
            KernelSpec::ExpSum { terms } => Kernel::exp_sum(terms.clone()),
            KernelSpec::Fractional { alpha } => Kernel::fractional(*alpha),
            KernelSpec::Gamma { alpha, beta } => Kernel::gamma(*alpha, *beta),
            KernelSpec::Damped { base, beta } => Kernel::damped(base.build()?, *beta),
            KernelSpec::Shifted { base, delta } => Kernel::shifted(base.build()?, *delta),
        }
    }
}

/// Registry entry for one coefficient function of x.
#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum CoefficientSpec {
    /// a x + c
    Linear {
        a: f64,
        #[serde(default)]
        c: f64,
    },
    /// same as linear
    Affine {
        a: f64,
        #[serde(default)]
        c: f64,
    },
    /// -κ x
    MeanRevert { kappa: f64 },
    /// a sin x
    BoundedSin { a: f64 },
    /// a sign(x) √|x|, continuous with linear growth but not Lipschitz at 0
    SqrtGrowth { a: f64 },
    Const { value: f64 },
}

/// One registry function with its declared constants.
pub struct RegistryFn {
    pub f: ScalarFn,
    pub growth: f64,
    pub lipschitz: Option<f64>,
    pub is_zero: bool,
    pub label: String,
}

impl CoefficientSpec {
    pub fn build(&self) -> RegistryFn {
        let (f, growth, lipschitz, label): (ScalarFn, f64, Option<f64>, String) = match *self {
            CoefficientSpec::Linear { a, c } | CoefficientSpec::Affine { a, c } => (
                Arc::new(move |_, x| a * x + c),
                a.abs().max(c.abs()),
                Some(a.abs()),
                format!("linear(a={a}, c={c})"),
            ),
            CoefficientSpec::MeanRevert { kappa } => (
                Arc::new(move |_, x| -kappa * x),
                kappa.abs(),
                Some(kappa.abs()),
                format!("mean_revert(kappa={kappa})"),
            ),
            CoefficientSpec::BoundedSin { a } => (
                Arc::new(move |_, x: f64| a * x.sin()),
                a.abs(),
                Some(a.abs()),
                format!("bounded_sin(a={a})"),
            ),
            CoefficientSpec::SqrtGrowth { a } => (
                Arc::new(move |_, x: f64| a * x.signum() * x.abs().sqrt()),
                a.abs(),
                None,
                format!("sqrt_growth(a={a})"),
            ),
            CoefficientSpec::Const { value } => (
                Arc::new(move |_, _| value),
                value.abs(),
                Some(0.0),
                format!("const({value})"),
            ),
        };
        let is_zero = matches!(*self, CoefficientSpec::Const { value } if value == 0.0);
        RegistryFn {
            f,
            growth,
            lipschitz,
            is_zero,
            label,
        }
    }
}

/// Drift and diffusion from the registry. A missing diffusion means σ ≡ 0.
pub fn registry_coefficients(drift: &CoefficientSpec, diffusion: Option<&CoefficientSpec>) -> Coefficients {
    let b = drift.build();
    let s = diffusion.map_or_else(|| CoefficientSpec::Const { value: 0.0 }.build(), |d| d.build());
    let lipschitz = match (b.lipschitz, s.lipschitz) {
        (Some(x), Some(y)) => Some(x.max(y)),
        _ => None,
    };
    let mut c = Coefficients::from_parts(
        b.f,
        s.f,
        b.growth.max(s.growth),
        lipschitz,
        format!("b={}, σ={}", b.label, s.label),
    );
    c.zero_diffusion = s.is_zero;
    c
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(rename = "T", alias = "t_end")]
    pub t_end: f64,
    #[serde(rename = "N", alias = "n_steps")]
    pub n_steps: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    pub paths: usize,
    /// master seed, same as the top-level `seed`
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSection {
    #[serde(default = "default_atoms")]
    pub n_atoms: usize,
    #[serde(default = "default_x_min")]
    pub x_min: f64,
    #[serde(default = "default_x_max")]
    pub x_max: f64,
    /// lump [0, x_min] into one extra atom
    #[serde(default = "default_true")]
    pub origin_cell: bool,
}

fn default_true() -> bool {
    true
}

fn default_atoms() -> usize {
    200
}
fn default_x_min() -> f64 {
    1e-5
}
fn default_x_max() -> f64 {
    1e5
}

impl Default for QuadratureSection {
    fn default() -> Self {
        QuadratureSection {
            n_atoms: default_atoms(),
            x_min: default_x_min(),
            x_max: default_x_max(),
            origin_cell: true,
        }
    }
}

impl QuadratureSection {
    pub fn partition(&self) -> svlift::Result<PartitionSpec> {
        Ok(PartitionSpec::geometric(self.n_atoms, self.x_min, self.x_max)?.with_origin_cell(self.origin_cell))
    }
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct KernelInfoSection {
    pub t_min: Option<f64>,
    pub t_max: Option<f64>,
    pub points: Option<usize>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct DecayFitSection {
    pub eta: Option<f64>,
    /// ε̃ in the fractional-kernel prediction 1 − α + ε̃ + η
    pub eps_tilde: Option<f64>,
    /// expected γ̂ (overrides the prediction) and tolerance for --assert
    pub expect: Option<f64>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    /// "lifted" (default) or "picard"
    pub solver: Option<String>,
    /// Lipschitz constant for the envelope when a non-Lipschitz drift meets the Picard solver
    pub envelope_k: Option<f64>,
    /// paths written in full to paths.csv
    pub write_paths: Option<usize>,
    /// grid steps whose factor states go to factors.csv
    #[serde(default)]
    pub factor_steps: Vec<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSection {
    #[serde(rename = "N", alias = "n_steps")]
    pub n_steps: Vec<usize>,
    pub min_ratio: Option<f64>,
    /// paths of the finest level written to compare.csv
    pub write_paths: Option<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItoSection {
    pub observable: String,
    /// "atomized" (default) or "analytic"
    pub kernels: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovSection {
    #[serde(default = "default_v")]
    pub v: String,
    #[serde(default = "default_p")]
    pub p: f64,
    pub radius: f64,
    pub points: usize,
    pub lag_max: f64,
    pub lags: usize,
}

fn default_v() -> String {
    "x2".into()
}
fn default_p() -> f64 {
    2.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvariantSection {
    pub t_long: f64,
    #[serde(rename = "N", alias = "n_steps")]
    pub n_steps: usize,
    pub checkpoint_every: usize,
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    #[serde(default)]
    pub write_samples: bool,
    pub lt_window: Option<(f64, f64)>,
}

fn default_burn_in() -> f64 {
    0.2
}

/// Parse error with the 1-based line of the offending span when toml reports one.
pub fn parse(source: &str) -> Result<ExperimentConfig, String> {
    toml::from_str(source).map_err(|e| {
        let msg = e.message().to_string();
        match e.span() {
            Some(span) => {
                let line = source[..span.start.min(source.len())].matches('\n').count() + 1;
                format!("line {line}: {msg}")
            }
            None => msg,
        }
    })
}

/// 1-based line on which `key` is assigned or its `[key]` table opens, for
/// anchoring semantic errors found after parsing.
pub fn line_of(source: &str, key: &str) -> Option<usize> {
    source.lines().position(|l| {
        let t = l.trim_start();
        t.starts_with(&format!("[{key}]"))
            || t.strip_prefix(key).is_some_and(|rest| rest.trim_start().starts_with('='))
    })
    .map(|i| i + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_examples() {
        let c = registry_coefficients(&CoefficientSpec::MeanRevert { kappa: 1.0 }, Some(&CoefficientSpec::BoundedSin { a: 2.0 }));
        assert_eq!(c.b(0.0, 3.0), -3.0);
        assert_eq!(c.growth, 2.0);
        let xs: Vec<f64> = (-200..=200).map(|i| i as f64 * 0.5).collect();
        assert!(xs.iter().all(|&x| c.sigma(0.0, x).abs() <= 2.0));
        let sq = registry_coefficients(&CoefficientSpec::SqrtGrowth { a: 1.0 }, None);
        assert!(sq.lipschitz.is_none() && sq.zero_diffusion);
        assert!(sq.check_linear_growth(&[0.0], &xs).is_ok());
    }

    #[test]
    fn errors_carry_lines() {
        let src = "seed = 1\n\n[drift]\nname = \"nope\"\n";
        let err = parse(src).unwrap_err();
        assert!(err.starts_with("line 3") || err.starts_with("line 4"), "{err}");
        let src = "seed = 1\nx0 = \"a\"\n";
        assert!(parse(src).unwrap_err().starts_with("line 2"));
        assert_eq!(line_of("a = 1\n[grid]\n", "grid"), Some(2));
    }

    #[test]
    fn nested_kernels_parse() {
        let src = "seed = 3\n[kernel_b]\nvariant = \"damped\"\nbeta = 1.0\nbase = { variant = \"fractional\", alpha = 0.7 }\n";
        let cfg = parse(src).unwrap();
        assert!(cfg.kernel_b.unwrap().build().is_ok());
    }
}
