use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng::{normal_vec, path_seed};

use super::coefficients::Coefficients;
use super::state::{LiftedState, StepScheme, StepWeights, EXPLOSION_THRESHOLD};

/// Uniform grid t_m = T m / N.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimGrid {
    pub t_end: f64,
    pub n_steps: usize,
}

impl SimGrid {
    pub fn new(t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {t_end}")));
        }
        if n_steps == 0 {
            return Err(Error::InvalidParameter("step count must be at least 1".into()));
        }
        Ok(SimGrid { t_end, n_steps })
    }

    pub fn h(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }

    pub fn time(&self, m: usize) -> f64 {
        self.t_end * m as f64 / self.n_steps as f64
    }

    pub fn times(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|m| self.time(m)).collect()
    }
}

/// Brownian increments ΔW_m ~ N(0, h), m = 0..N-1.
#[derive(Debug, Clone, PartialEq)]
pub struct BrownianPath {
    pub seed: Option<u64>,
    pub grid: SimGrid,
    increments: Vec<f64>,
}

impl BrownianPath {
    pub fn new(seed: u64, grid: SimGrid) -> Self {
        BrownianPath {
            seed: Some(seed),
            grid,
            increments: normal_vec(seed, grid.n_steps, grid.h()),
        }
    }

    pub fn from_increments(increments: Vec<f64>, grid: SimGrid) -> Result<Self> {
        if increments.len() != grid.n_steps {
            return Err(Error::GridMismatch(format!(
                "{} increments for a grid of {} steps",
                increments.len(),
                grid.n_steps
            )));
        }
        Ok(BrownianPath {
            seed: None,
            grid,
            increments,
        })
    }

    pub fn increments(&self) -> &[f64] {
        &self.increments
    }

    /// Same Brownian path on the grid with `factor` times fewer steps.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || self.grid.n_steps % factor != 0 {
            return Err(Error::GridMismatch(format!(
                "cannot coarsen {} steps by {factor}",
                self.grid.n_steps
            )));
        }
        let grid = SimGrid::new(self.grid.t_end, self.grid.n_steps / factor)?;
        let increments = self.increments.chunks(factor).map(|c| c.iter().sum()).collect();
        Ok(BrownianPath {
            seed: self.seed,
            grid,
            increments,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum SnapshotPolicy {
    #[default]
    None,
    Every,
    Steps(Vec<usize>),
}

impl SnapshotPolicy {
    fn wants(&self, step: usize) -> bool {
        match self {
            SnapshotPolicy::None => false,
            SnapshotPolicy::Every => true,
            SnapshotPolicy::Steps(v) => v.contains(&step),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SimOptions {
    pub scheme: StepScheme,
    pub snapshots: SnapshotPolicy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub state: LiftedState,
}

/// Observable path on grid points `first_step..=first_step + values.len() - 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub first_step: usize,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    pub final_state: LiftedState,
}

impl PathSample {
    pub(crate) fn single(t: f64, x: f64, state: LiftedState) -> Self {
        PathSample {
            first_step: 0,
            times: vec![t],
            values: vec![x],
            snapshots: Vec::new(),
            final_state: state,
        }
    }

    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("path has at least one point")
    }

    pub fn snapshot_at(&self, step: usize) -> Option<&Snapshot> {
        self.snapshots
            .binary_search_by_key(&step, |s| s.step)
            .ok()
            .map(|i| &self.snapshots[i])
    }
}

#[derive(Debug, Clone)]
pub struct ExplosionReport {
    pub time: f64,
    pub step: usize,
    /// Path up to the last finite state.
    pub partial: PathSample,
}

pub fn simulate_path(
    s0: &LiftedState,
    c: &Coefficients,
    g: &SimGrid,
    w: &BrownianPath,
    opts: &SimOptions,
) -> Result<PathSample> {
    simulate_segment(s0, c, g, w, 0, g.n_steps, opts)
}

/// Steps from grid index `start` to `end` using the increments at those indices.
pub fn simulate_segment(
    s: &LiftedState,
    c: &Coefficients,
    g: &SimGrid,
    w: &BrownianPath,
    start: usize,
    end: usize,
    opts: &SimOptions,
) -> Result<PathSample> {
    if w.grid.n_steps != g.n_steps || w.grid.t_end != g.t_end {
        return Err(Error::GridMismatch(format!(
            "Brownian path has {} steps on [0, {}], grid has {} on [0, {}]",
            w.grid.n_steps, w.grid.t_end, g.n_steps, g.t_end
        )));
    }
    if start > end || end > g.n_steps {
        return Err(Error::InvalidParameter(format!(
            "segment {start}..{end} outside grid of {} steps",
            g.n_steps
        )));
    }
    let x_start = s.observable()?;
    let weights = StepWeights::new(&s.atoms_b, &s.atoms_sigma, g.h(), opts.scheme);
    let n = end - start;
    let mut times = Vec::with_capacity(n + 1);
    let mut values = Vec::with_capacity(n + 1);
    let mut snapshots = Vec::new();
    let mut state = s.clone();
    times.push(g.time(start));
    values.push(x_start);
    if opts.snapshots.wants(start) {
        snapshots.push(Snapshot {
            step: start,
            time: g.time(start),
            state: state.clone(),
        });
    }
    let dw = w.increments();
    for m in start..end {
        weights.apply(&mut state, g.time(m), dw[m], c);
        let x = state.observable_unchecked();
        if !(state.max_factor() <= EXPLOSION_THRESHOLD) || !x.is_finite() {
            let last = PathSample {
                first_step: start,
                times,
                values,
                snapshots,
                final_state: state,
            };
            return Err(Error::Explosion(Box::new(ExplosionReport {
                time: g.time(m + 1),
                step: m + 1,
                partial: last,
            })));
        }
        times.push(g.time(m + 1));
        values.push(x);
        if opts.snapshots.wants(m + 1) {
            snapshots.push(Snapshot {
                step: m + 1,
                time: g.time(m + 1),
                state: state.clone(),
            });
        }
    }
    Ok(PathSample {
        first_step: start,
        times,
        values,
        snapshots,
        final_state: state,
    })
}

/// Independent paths with seeds `path_seed(master_seed, i)`, returned in index order.
pub fn run_ensemble(
    s0: &LiftedState,
    c: &Coefficients,
    g: &SimGrid,
    master_seed: u64,
    paths: usize,
    opts: &SimOptions,
) -> Vec<Result<PathSample>> {
    (0..paths)
        .into_par_iter()
        .map(|i| {
            let w = BrownianPath::new(path_seed(master_seed, i as u64), *g);
            simulate_path(s0, c, g, &w, opts)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Kernel;
    use crate::quadrature::{discretize_kernel, DiscreteLiftMeasure, PartitionSpec};
    use std::sync::Arc;

    fn exp_atoms(list: &[(f64, f64)]) -> Arc<DiscreteLiftMeasure> {
        Arc::new(DiscreteLiftMeasure::from_atoms(list, "test").unwrap())
    }

    #[test]
    fn grid_validation() {
        assert!(SimGrid::new(0.0, 10).is_err());
        assert!(SimGrid::new(1.0, 0).is_err());
        let g = SimGrid::new(2.0, 8).unwrap();
        assert_eq!(g.h(), 0.25);
        assert_eq!(g.time(8), 2.0);
    }

    #[test]
    fn brownian_reproducible_with_variance_h() {
        let g = SimGrid::new(1.0, 20_000).unwrap();
        let a = BrownianPath::new(9, g);
        let b = BrownianPath::new(9, g);
        assert_eq!(a, b);
        let var = a.increments().iter().map(|d| d * d).sum::<f64>() / g.n_steps as f64;
        // relative sd of the sample variance is sqrt(2/N) ≈ 0.01
        assert!((var / g.h() - 1.0).abs() < 0.05);
        let c = a.coarsen(4).unwrap();
        assert_eq!(c.increments().len(), 5000);
        assert!((c.increments()[1] - a.increments()[4..8].iter().sum::<f64>()).abs() < 1e-15);
        assert!(a.coarsen(3).is_err());
    }

    #[test]
    fn zero_coefficients_give_constant_path() {
        let g = SimGrid::new(1.0, 100).unwrap();
        let s0 = LiftedState::initial(1.5, exp_atoms(&[(1.0, 1.0), (10.0, 0.5)]), exp_atoms(&[(2.0, 1.0)]));
        let p = simulate_path(&s0, &Coefficients::zero(), &g, &BrownianPath::new(1, g), &SimOptions::default()).unwrap();
        assert_eq!(p.values.len(), 101);
        assert!(p.values.iter().all(|&x| x == 1.5));
    }

    #[test]
    fn fractional_linear_drift_matches_mittag_leffler() {
        let alpha = 0.7;
        let lambda = 0.5;
        let atoms = Arc::new(discretize_kernel(&Kernel::fractional(alpha).unwrap(), &PartitionSpec::default()).unwrap());
        let s0 = LiftedState::initial(1.0, atoms, Arc::new(DiscreteLiftMeasure::empty()));
        let c = Coefficients::drift_only(move |_, x| lambda * x, lambda, Some(lambda), "linear");
        let g = SimGrid::new(1.0, 4000).unwrap();
        let w = BrownianPath::from_increments(vec![0.0; 4000], g).unwrap();
        let p = simulate_path(&s0, &c, &g, &w, &SimOptions::default()).unwrap();
        // E_{0.7}(0.5), 40-digit reference
        let exact = 1.824_985_056_851_202_5;
        assert!((p.terminal() / exact - 1.0).abs() < 1e-2, "{}", p.terminal());
    }

    #[test]
    fn constant_noise_variance_matches_kernel_l2() {
        let atoms = [(1.0, 1.0), (0.5, 3.0)];
        let s0 = LiftedState::initial(0.0, exp_atoms(&[]), exp_atoms(&atoms));
        let s = 0.8;
        let c = Coefficients::new(|_, _| 0.0, move |_, _| s, s, Some(0.0), "const");
        let g = SimGrid::new(1.0, 200).unwrap();
        let runs = run_ensemble(&s0, &c, &g, 77, 10_000, &SimOptions::default());
        let xs: Vec<f64> = runs.into_iter().map(|r| r.unwrap().terminal()).collect();
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        // ∫_0^1 (e^{-u} + 3 e^{-0.5 u})^2 du in closed form
        let l2 = (1.0 - (-2f64).exp()) / 2.0 + 6.0 * (1.0 - (-1.5f64).exp()) / 1.5 + 9.0 * (1.0 - (-1f64).exp());
        let target = s * s * l2;
        let se = target * (2.0 / (n - 1.0)).sqrt();
        // left-point noise weights bias the variance by O(h)
        assert!((var - target).abs() < 3.0 * se + 0.02 * target, "{var} vs {target}");
    }

    #[test]
    fn split_simulation_is_bitwise_equal() {
        let atoms = exp_atoms(&[(0.3, 1.0), (4.0, 0.7)]);
        let s0 = LiftedState::initial(0.4, atoms.clone(), atoms);
        let c = Coefficients::new(|t, x: f64| -x + t.sin(), |_, x: f64| 0.5 * x.cos(), 2.0, Some(1.0), "mix");
        let g = SimGrid::new(2.0, 500).unwrap();
        let w = BrownianPath::new(5, g);
        let opts = SimOptions::default();
        let full = simulate_path(&s0, &c, &g, &w, &opts).unwrap();
        let head = simulate_segment(&s0, &c, &g, &w, 0, 217, &opts).unwrap();
        let tail = simulate_segment(&head.final_state, &c, &g, &w, 217, 500, &opts).unwrap();
        assert_eq!(tail.final_state, full.final_state);
        assert_eq!(tail.values[..], full.values[217..]);
    }

    #[test]
    fn explosion_returns_partial_path() {
        let s0 = LiftedState::initial(1.0, exp_atoms(&[(0.0, 1.0)]), exp_atoms(&[]));
        let c = Coefficients::drift_only(|_, x: f64| x * x, 1.0, None, "square");
        let g = SimGrid::new(5.0, 500).unwrap();
        let w = BrownianPath::new(1, g);
        match simulate_path(&s0, &c, &g, &w, &SimOptions::default()) {
            Err(Error::Explosion(r)) => {
                // dx/dt = x^2 blows up at t = 1
                assert!(r.time > 0.9 && r.time < 1.3, "{}", r.time);
                assert_eq!(r.partial.values.len(), r.step);
            }
            other => panic!("expected explosion, got {other:?}"),
        }
    }

    #[test]
    fn snapshots_follow_policy() {
        let s0 = LiftedState::initial(1.0, exp_atoms(&[(1.0, 1.0)]), exp_atoms(&[(1.0, 1.0)]));
        let g = SimGrid::new(1.0, 10).unwrap();
        let w = BrownianPath::new(3, g);
        let opts = SimOptions {
            snapshots: SnapshotPolicy::Steps(vec![0, 5, 10]),
            ..SimOptions::default()
        };
        let c = Coefficients::new(|_, x| -x, |_, _| 1.0, 1.0, Some(1.0), "ou");
        let p = simulate_path(&s0, &c, &g, &w, &opts).unwrap();
        assert_eq!(p.snapshots.iter().map(|s| s.step).collect::<Vec<_>>(), vec![0, 5, 10]);
        assert_eq!(p.snapshot_at(5).unwrap().state.observable().unwrap(), p.values[5]);
        assert!(p.snapshot_at(4).is_none());
    }
}
