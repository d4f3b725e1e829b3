//! Collapse a lift measure into finitely many atoms.
//!
//! Density measures are cut on a geometric partition of the distance from the
//! support start; each cell becomes one atom carrying the cell mass, placed at
//! the cell's first-moment center. The resulting exponential sum is again
//! completely monotone because all masses are nonnegative.

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::integrate::Tolerance;
use crate::kernels::{Kernel, LiftMeasureSpec, MeasureForm};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PartitionRule {
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionSpec {
    pub n_cells: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub rule: PartitionRule,
    /// Lump the mass of [0, x_min] into one extra atom instead of dropping it.
    pub origin_cell: bool,
}

impl PartitionSpec {
    pub fn geometric(n_cells: usize, x_min: f64, x_max: f64) -> Result<Self> {
        let p = PartitionSpec {
            n_cells,
            x_min,
            x_max,
            rule: PartitionRule::Geometric,
            origin_cell: false,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_origin_cell(mut self, on: bool) -> Self {
        self.origin_cell = on;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cells == 0 {
            return Err(Error::InvalidParameter("n_cells must be at least 1".into()));
        }
        if !(self.x_min > 0.0 && self.x_min < self.x_max && self.x_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < x_min < x_max < inf, got [{}, {}]",
                self.x_min, self.x_max
            )));
        }
        Ok(())
    }

    /// Cell edges a_0 = x_min < ... < a_n = x_max.
    pub fn edges(&self) -> Vec<f64> {
        let ratio = self.x_max / self.x_min;
        let n = self.n_cells;
        let mut edges: Vec<f64> = (0..=n)
            .map(|i| self.x_min * ratio.powf(i as f64 / n as f64))
            .collect();
        edges[n] = self.x_max;
        edges
    }
}

impl Default for PartitionSpec {
    /// 200 geometric cells on [1e-5, 1e5] plus the origin cell.
    fn default() -> Self {
        PartitionSpec {
            n_cells: 200,
            x_min: 1e-5,
            x_max: 1e5,
            rule: PartitionRule::Geometric,
            origin_cell: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub source: String,
    pub partition: Option<PartitionSpec>,
}

/// Finite atom system Σ c_i δ_{x_i}, nodes strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLiftMeasure {
    nodes: Vec<f64>,
    masses: Vec<f64>,
    pub provenance: Provenance,
}

impl DiscreteLiftMeasure {
    /// Sorts the atoms, merges repeated nodes and drops zero masses.
    pub fn from_atoms(atoms: &[(f64, f64)], source: impl Into<String>) -> Result<Self> {
        let mut sorted: Vec<(f64, f64)> = atoms.to_vec();
        for &(x, c) in &sorted {
            if !(x >= 0.0 && c >= 0.0 && x.is_finite() && c.is_finite()) {
                return Err(Error::InvalidParameter(format!("atom ({x}, {c}) must be nonnegative and finite")));
            }
        }
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut nodes: Vec<f64> = Vec::with_capacity(sorted.len());
        let mut masses: Vec<f64> = Vec::with_capacity(sorted.len());
        for (x, c) in sorted {
            if c == 0.0 {
                continue;
            }
            if nodes.last() == Some(&x) {
                *masses.last_mut().unwrap() += c;
            } else {
                nodes.push(x);
                masses.push(c);
            }
        }
        Ok(DiscreteLiftMeasure {
            nodes,
            masses,
            provenance: Provenance {
                source: source.into(),
                partition: None,
            },
        })
    }

    pub fn empty() -> Self {
        DiscreteLiftMeasure {
            nodes: vec![],
            masses: vec![],
            provenance: Provenance {
                source: "empty".into(),
                partition: None,
            },
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn atoms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.masses.iter().copied())
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Σ c_i e^{-x_i t}.
    pub fn kernel_value(&self, t: f64) -> f64 {
        self.atoms().map(|(x, c)| c * (-x * t).exp()).sum()
    }

    /// Same nodes with every mass multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        DiscreteLiftMeasure {
            nodes: self.nodes.clone(),
            masses: self.masses.iter().map(|c| c * factor).collect(),
            provenance: self.provenance.clone(),
        }
    }

    /// The measure e^{-x t} ν(dx), i.e. ν transported by the semigroup for time t.
    pub fn decayed(&self, t: f64) -> Self {
        DiscreteLiftMeasure {
            nodes: self.nodes.clone(),
            masses: self.atoms().map(|(x, c)| c * (-x * t).exp()).collect(),
            provenance: self.provenance.clone(),
        }
    }

    pub fn to_exp_sum_kernel(&self) -> Result<Kernel> {
        Kernel::exp_sum(self.atoms().map(|(x, c)| (c, x)).collect())
    }
}

fn cell_tolerance() -> Tolerance {
    Tolerance::new(1e-18, 1e-12)
}

/// Atomize a lift measure. Atom measures pass through unchanged.
pub fn discretize(m: &LiftMeasureSpec, p: &PartitionSpec) -> Result<DiscreteLiftMeasure> {
    p.validate()?;
    let density = match &m.form {
        MeasureForm::Atoms(atoms) => return DiscreteLiftMeasure::from_atoms(atoms, "atoms"),
        MeasureForm::Density(d) => *d,
    };
    let mut edges = p.edges();
    if p.origin_cell {
        edges.insert(0, 0.0);
    }
    let tol = cell_tolerance();
    let mut atoms = Vec::with_capacity(edges.len());
    for w in edges.windows(2) {
        let (lo, hi) = (w[0], w[1]);
        let mass = density.integrate_offset(|_| 1.0, lo, hi, tol)?;
        if !(mass > 0.0) {
            continue;
        }
        // first moment in the offset variable keeps precision when start is large
        let moment = density.integrate_offset(|u| u, lo, hi, tol)?;
        let node = density.start + (moment / mass).clamp(lo, hi);
        atoms.push((node, mass));
    }
    let mut out = DiscreteLiftMeasure::from_atoms(&atoms, "density")?;
    out.provenance = Provenance {
        source: format!(
            "power density(alpha={}, start={}, tilt={})",
            density.alpha, density.start, density.tilt
        ),
        partition: Some(*p),
    };
    Ok(out)
}

/// Convenience: lift measure of `k` discretized with `p`.
pub fn discretize_kernel(k: &Kernel, p: &PartitionSpec) -> Result<DiscreteLiftMeasure> {
    let mut d = discretize(&k.lift_measure(), p)?;
    d.provenance.source = k.to_string();
    Ok(d)
}

/// Truncated total mass over the region a partition covers.
pub fn covered_mass(m: &LiftMeasureSpec, p: &PartitionSpec) -> Result<f64> {
    match &m.form {
        MeasureForm::Atoms(atoms) => Ok(atoms.iter().map(|a| a.1).sum()),
        MeasureForm::Density(d) => {
            let lo = if p.origin_cell { 0.0 } else { p.x_min };
            d.integrate_offset(|_| 1.0, lo, p.x_max, cell_tolerance())
        }
    }
}

/// (sup_abs, sup_rel) of |k(t) - Σ c_i e^{-x_i t}| over the grid.
pub fn kernel_approx_error(k: &Kernel, d: &DiscreteLiftMeasure, t_grid: &[f64]) -> Result<(f64, f64)> {
    let mut sup_abs = 0.0f64;
    let mut sup_rel = 0.0f64;
    for &t in t_grid {
        let exact = k.eval(t)?;
        let err = (exact - d.kernel_value(t)).abs();
        sup_abs = sup_abs.max(err);
        sup_rel = sup_rel.max(err / exact.abs());
    }
    Ok((sup_abs, sup_rel))
}

/// Bound on the kernel error caused by truncating the support, at the worst
/// time t_min of the working window.
///
/// Upper part: the exact neglected integral beyond x_max. Lower part: the
/// dropped mass of [0, x_min] or, with an origin cell, the error of lumping that
/// mass into a single atom, at most 2 t_min ∫_0^{x_min} x ν(dx).
pub fn tail_bound(m: &LiftMeasureSpec, p: &PartitionSpec, t_min: f64) -> Result<f64> {
    if !(t_min > 0.0) {
        return Err(Error::Domain(format!("t_min must be positive, got {t_min}")));
    }
    p.validate()?;
    let d = match &m.form {
        MeasureForm::Atoms(_) => return Ok(0.0),
        MeasureForm::Density(d) => *d,
    };
    let upper = d.laplace_tail_exact(t_min, p.x_max);
    let lower = if p.origin_cell {
        2.0 * t_min * d.integrate_offset(|u| d.start + u, 0.0, p.x_min, cell_tolerance())?
    } else {
        d.integrate_offset(|_| 1.0, 0.0, p.x_min, cell_tolerance())?
    };
    Ok(upper + lower)
}

/// The scale 1/(Γ(α)Γ(1-α)) of the fractional lift density, exposed for oracles.
pub fn fractional_scale(alpha: f64) -> f64 {
    1.0 / (gamma(alpha) * gamma(1.0 - alpha))
}
