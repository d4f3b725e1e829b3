//! Subcommand implementations. Each writes its CSVs into the output directory
//! and returns the list of files written.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;
use svlift::invariant::{check_lt_kernel, long_run_kernels, LongRunConfig, LtRole};
use svlift::ito_verifier::{ito_ensemble, lyapunov_check, summarize, KernelMode, SmoothObservable};
use svlift::kernels::laplace_of_measure;
use svlift::lifted_sde::{
    picard_solve_deterministic, run_ensemble, simulate_path, BrownianPath, LiftedState, PicardRule, SimOptions,
    Snapshot, SnapshotPolicy,
};
use svlift::quadrature::{discretize_kernel, DiscreteLiftMeasure};
use svlift::rng::path_seed;
use svlift::volterra_reference::{compare_paths, direct_euler_with, ConvolutionWeights};
use svlift::weighted_sobolev::{default_decay_times, semigroup_decay_fit, Dictionary, WeightFamily};
use svlift::{Coefficients, Kernel, SimGrid};

use crate::config::{line_of, registry_coefficients, ExperimentConfig, KernelSpec};
use crate::output::Table;

#[derive(Debug)]
pub enum Failure {
    /// exit code 2
    Config(String),
    /// exit code 3
    Runtime(String),
    /// exit code 4
    Assert(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
            Failure::Assert(_) => 4,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "config error: {m}"),
            Failure::Runtime(m) => write!(f, "runtime error: {m}"),
            Failure::Assert(m) => write!(f, "check failed: {m}"),
        }
    }
}

pub type Outcome<T> = Result<T, Failure>;

pub struct Context<'a> {
    pub cfg: &'a ExperimentConfig,
    pub source: &'a str,
    pub out: PathBuf,
    pub seed: u64,
    pub assert: bool,
}

impl Context<'_> {
    fn config_error(&self, key: &str, msg: impl fmt::Display) -> Failure {
        match line_of(self.source, key) {
            Some(line) => Failure::Config(format!("line {line}: [{key}] {msg}")),
            None => Failure::Config(format!("[{key}] {msg}")),
        }
    }

    fn require<'b, T>(&self, v: &'b Option<T>, key: &str) -> Outcome<&'b T> {
        v.as_ref()
            .ok_or_else(|| Failure::Config(format!("missing section or key `{key}` for this subcommand")))
    }

    fn kernel(&self, spec: &Option<KernelSpec>, key: &str) -> Outcome<Kernel> {
        self.require(spec, key)?.build().map_err(|e| self.config_error(key, e))
    }

    fn atoms(&self, k: &Kernel) -> Outcome<DiscreteLiftMeasure> {
        let p = self.cfg.quadrature.partition().map_err(|e| self.config_error("quadrature", e))?;
        discretize_kernel(k, &p).map_err(|e| Failure::Runtime(e.to_string()))
    }

    fn coefficients(&self) -> Outcome<Coefficients> {
        let drift = self.require(&self.cfg.drift, "drift")?;
        Ok(registry_coefficients(drift, self.cfg.diffusion.as_ref()))
    }

    fn grid(&self) -> Outcome<SimGrid> {
        let g = self.require(&self.cfg.grid, "grid")?;
        SimGrid::new(g.t_end, g.n_steps).map_err(|e| self.config_error("grid", e))
    }

    fn paths(&self) -> Outcome<usize> {
        let e = self.require(&self.cfg.ensemble, "ensemble")?;
        if e.paths == 0 {
            return Err(self.config_error("ensemble", "paths must be positive"));
        }
        Ok(e.paths)
    }

    /// Drift atoms, plus diffusion atoms (empty when σ ≡ 0 and no kernel is given).
    fn state(&self, c: &Coefficients) -> Outcome<(Kernel, Kernel, LiftedState)> {
        let k_b = self.kernel(&self.cfg.kernel_b, "kernel_b")?;
        let (k_s, atoms_s) = match (&self.cfg.kernel_sigma, c.zero_diffusion) {
            (None, true) => (k_b.clone(), DiscreteLiftMeasure::empty()),
            (spec, _) => {
                let k = self.kernel(spec, "kernel_sigma")?;
                let a = self.atoms(&k)?;
                (k, a)
            }
        };
        let atoms_b = self.atoms(&k_b)?;
        let s0 = LiftedState::initial(self.cfg.x0, Arc::new(atoms_b), Arc::new(atoms_s));
        Ok((k_b, k_s, s0))
    }

    fn write(&self, name: &str, table: &Table) -> Outcome<PathBuf> {
        let path = self.out.join(name);
        table.write(&path).map_err(|e| Failure::Runtime(format!("writing {}: {e}", path.display())))?;
        Ok(path)
    }

    fn check(&self, ok: bool, msg: impl FnOnce() -> String) -> Outcome<()> {
        if self.assert && !ok {
            Err(Failure::Assert(msg()))
        } else {
            Ok(())
        }
    }
}

fn runtime(e: svlift::Error, out: &Path) -> Failure {
    if let svlift::Error::Explosion(report) = &e {
        let path = out.join("explosion.txt");
        let body = format!(
            "time = {}\nstep = {}\nlast_value = {}\n",
            report.time,
            report.step,
            report.partial.values.last().copied().unwrap_or(f64::NAN)
        );
        return match std::fs::write(&path, body) {
            Ok(()) => Failure::Runtime(format!("{e}; report written to {}", path.display())),
            Err(io) => Failure::Runtime(format!("{e}; could not write report: {io}")),
        };
    }
    Failure::Runtime(e.to_string())
}

fn log_points(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1).max(1) as f64)).collect()
}

pub fn kernel_info(ctx: &Context) -> Outcome<Vec<PathBuf>> {
    let sec = ctx.cfg.kernel_info.clone().unwrap_or_default();
    let ts = log_points(sec.t_min.unwrap_or(0.01), sec.t_max.unwrap_or(10.0), sec.points.unwrap_or(50));
    let mut kernels = vec![("kernel_b", ctx.kernel(&ctx.cfg.kernel_b, "kernel_b")?)];
    if ctx.cfg.kernel_sigma.is_some() {
        kernels.push(("kernel_sigma", ctx.kernel(&ctx.cfg.kernel_sigma, "kernel_sigma")?));
    }
    let mut files = Vec::new();
    let mut meta = Table::new(&["kernel", "key", "value"]);
    let mut worst = 0.0f64;
    let mut all_cm = true;
    for (name, k) in &kernels {
        let m = k.lift_measure();
        let mut values = Table::new(&["t", "k_t"]);
        for &t in &ts {
            let exact = k.eval(t).map_err(|e| ctx.config_error(name, e))?;
            let lap = laplace_of_measure(&m, t, None).map_err(|e| runtime(e, &ctx.out))?;
            worst = worst.max((lap - exact).abs() / exact);
            values.row(&[t.to_string(), exact.to_string()]);
        }
        let file = if *name == "kernel_b" { "kernel.csv" } else { "kernel_sigma.csv" };
        files.push(ctx.write(file, &values)?);
        let cm = k.check_complete_monotonicity(4, &ts).map_err(|e| runtime(e, &ctx.out))?;
        all_cm &= cm.passed();
        let lt = check_lt_kernel(k, (1.0, 100.0)).map_err(|e| runtime(e, &ctx.out))?;
        for (key, value) in [
            ("variant", format!("{:?}", k.variant())),
            ("singular", k.is_singular().to_string()),
            ("laplace_round_trip_rel_error", worst.to_string()),
            ("completely_monotone", cm.passed().to_string()),
            ("lt_l1", lt.l1.to_string()),
            ("lt_l1_status", format!("{:?}", lt.status(LtRole::Drift))),
            ("lt_l2", lt.l2.to_string()),
            ("lt_l2_status", format!("{:?}", lt.status(LtRole::Diffusion))),
            ("tail_exponent", lt.tail_exponent.to_string()),
        ] {
            meta.row(&[name.to_string(), key.to_string(), value]);
        }
    }
    files.push(ctx.write("measure.csv", &meta)?);
    ctx.check(worst <= 1e-6 && all_cm, || {
        format!("round-trip error {worst:e} or complete monotonicity failed")
    })?;
    Ok(files)
}

pub fn discretize(ctx: &Context) -> Outcome<Vec<PathBuf>> {
    let k = ctx.kernel(&ctx.cfg.kernel_b, "kernel_b")?;
    let atoms = ctx.atoms(&k)?;
    let mut t = Table::new(&["x_i", "c_i"]);
    for (x, c) in atoms.atoms() {
        t.row(&[x.to_string(), c.to_string()]);
    }
    let ts = log_points(0.01, 5.0, 50);
    let mut err = Table::new(&["t", "k_t", "approx", "abs_err"]);
    let mut sup_rel = 0.0f64;
    for &s in &ts {
        let exact = k.eval(s).map_err(|e| runtime(e, &ctx.out))?;
        let approx: f64 = atoms.atoms().map(|(x, c)| c * (-x * s).exp()).sum();
        sup_rel = sup_rel.max((approx - exact).abs() / exact.abs());
        err.row(&[s.to_string(), exact.to_string(), approx.to_string(), (approx - exact).abs().to_string()]);
    }
    let files = vec![ctx.write("atoms.csv", &t)?, ctx.write("error.csv", &err)?];
    ctx.check(sup_rel < 1e-2, || format!("kernel approximation error {sup_rel:e} ≥ 1e-2 on [0.01, 5]"))?;
    Ok(files)
}

/// γ predicted for the fractional kernel and for bounded exp-sums; None otherwise.
fn predicted_gamma(spec: &KernelSpec, eta: f64, eps_tilde: f64) -> Option<f64> {
    match spec {
        KernelSpec::ExpSum { .. } => Some(0.0),
        KernelSpec::Fractional { alpha } => Some(1.0 - alpha + eps_tilde + eta),
        _ => None,
    }
}

pub fn decay_fit(ctx: &Context) -> Outcome<Vec<PathBuf>> {
    let sec = ctx.cfg.decay_fit.clone().unwrap_or_default();
    let k = ctx.kernel(&ctx.cfg.kernel_b, "kernel_b")?;
    let atoms = ctx.atoms(&k)?;
    let eta = sec.eta.unwrap_or(-0.05);
    let w = WeightFamily::new(eta, 1).map_err(|e| ctx.config_error("decay_fit", e))?;
    let dict = Dictionary::for_decay_fit(w).map_err(|e| runtime(e, &ctx.out))?;
    let fit = semigroup_decay_fit(&atoms, &default_decay_times(), &dict).map_err(|e| runtime(e, &ctx.out))?;
    let mut t = Table::new(&["t", "dual_norm", "fit_line"]);
    for (&ti, &d) in fit.t.iter().zip(&fit.dual_norm) {
        t.row(&[ti.to_string(), d.to_string(), fit.fit_line(ti).to_string()]);
    }
    let spec = ctx.require(&ctx.cfg.kernel_b, "kernel_b")?;
    let theory = sec.expect.or_else(|| predicted_gamma(spec, eta, sec.eps_tilde.unwrap_or(0.1)));
    let diff = theory.map(|g| (fit.gamma_hat - g).abs());
    let show = |v: Option<f64>| v.map_or_else(String::new, |x| x.to_string());
    let mut s = Table::new(&["gamma_hat", "gamma_theory", "abs_diff"]);
    s.row(&[fit.gamma_hat.to_string(), show(theory), show(diff)]);
    let files = vec![ctx.write("decay.csv", &t)?, ctx.write("summary.csv", &s)?];
    let tol = sec.tolerance.unwrap_or(0.1);
    ctx.check(diff.map_or(true, |d| d < tol), || {
        format!("γ̂ = {} is not within {tol} of {:?}", fit.gamma_hat, theory)
    })?;
    Ok(files)
}

fn factor_rows(table: &mut Table, path: usize, snaps: &[Snapshot]) {
    for snap in snaps {
        let s = &snap.state;
        table.row(&[path.to_string(), snap.time.to_string(), "initial".into(), "0".into(), s.y0.to_string()]);
        for (x, y) in s.atoms_b.nodes().iter().zip(&s.y_b) {
            table.row(&[path.to_string(), snap.time.to_string(), "drift".into(), x.to_string(), y.to_string()]);
        }
        for (x, y) in s.atoms_sigma.nodes().iter().zip(&s.y_sigma) {
            table.row(&[path.to_string(), snap.time.to_string(), "diffusion".into(), x.to_string(), y.to_string()]);
        }
    }
}

pub fn simulate(ctx: &Context) -> Outcome<Vec<PathBuf>> {
    let sec = ctx.cfg.simulate.clone().unwrap_or_default();
    let c = ctx.coefficients()?;
    let (_, _, s0) = ctx.state(&c)?;
    let g = ctx.grid()?;
    match sec.solver.as_deref().unwrap_or("lifted") {
        "lifted" => {
            let paths = ctx.paths()?;
            let keep = sec.write_paths.unwrap_or(paths);
            if let Some(&bad) = sec.factor_steps.iter().find(|&&m| m > g.n_steps) {
                return Err(ctx.config_error("simulate", format!("factor step {bad} exceeds N = {}", g.n_steps)));
            }
            let opts = SimOptions {
                snapshots: if sec.factor_steps.is_empty() {
                    SnapshotPolicy::None
                } else {
                    SnapshotPolicy::Steps(sec.factor_steps.clone())
                },
                ..SimOptions::default()
            };
            let runs = run_ensemble(&s0, &c, &g, ctx.seed, paths, &opts);
            let mut full = Table::new(&["path_index", "t", "X"]);
            let mut terminal = Table::new(&["path_index", "X_T"]);
            let mut factors = Table::new(&["path_index", "t", "channel", "x", "y"]);
            for (i, run) in runs.into_iter().enumerate() {
                let run = run.map_err(|e| runtime(e, &ctx.out))?;
                if i < keep {
                    for (t, x) in run.times.iter().zip(&run.values) {
                        full.row(&[i.to_string(), t.to_string(), x.to_string()]);
                    }
                    factor_rows(&mut factors, i, &run.snapshots);
                }
                terminal.row(&[i.to_string(), run.terminal().to_string()]);
            }
            let mut files = vec![ctx.write("paths.csv", &full)?, ctx.write("terminal.csv", &terminal)?];
            if !sec.factor_steps.is_empty() {
                files.push(ctx.write("factors.csv", &factors)?);
            }
            Ok(files)
        }
        "picard" => {
            let c = if c.lipschitz.is_none() {
                c.with_lipschitz_drift(sec.envelope_k.unwrap_or(10.0))
            } else {
                c
            };
            let sol = picard_solve_deterministic(&c, &s0, &g, PicardRule::LeftPoint).map_err(|e| runtime(e, &ctx.out))?;
            let mut full = Table::new(&["path_index", "t", "X"]);
            for (t, x) in sol.times.iter().zip(&sol.values) {
                full.row(&["0".into(), t.to_string(), x.to_string()]);
            }
            let mut s = Table::new(&["iterations", "last_change", "converged"]);
            s.row(&[sol.iterations.to_string(), sol.last_change.to_string(), sol.converged.to_string()]);
            let files = vec![ctx.write("paths.csv", &full)?, ctx.write("picard.csv", &s)?];
            ctx.check(sol.converged, || "Picard iteration did not converge".into())?;
            Ok(files)
        }
        other => Err(ctx.config_error("simulate", format!("unknown solver '{other}', expected lifted or picard"))),
    }
}

pub fn compare(ctx: &Context) -> Outcome<Vec<PathBuf>> {
    let sec = ctx.require(&ctx.cfg.compare, "compare")?;
    let c = ctx.coefficients()?;
    let (k_b, k_s, s0) = ctx.state(&c)?;
    let t_end = ctx.grid()?.t_end;
    let paths = ctx.paths()?;
    let keep = sec.write_paths.unwrap_or(paths.min(10));
    let mut levels = sec.n_steps.clone();
    levels.sort_unstable();
    levels.dedup();
    let finest = *levels.last().ok_or_else(|| ctx.config_error("compare", "N is empty"))?;
    if levels.iter().any(|&n| n == 0 || finest % n != 0) {
        return Err(ctx.config_error("compare", "every N must divide the finest one"));
    }
    let fine = SimGrid::new(t_end, finest).map_err(|e| ctx.config_error("grid", e))?;
    let mut summary = Table::new(&["n_atoms", "N", "mean_sup", "mean_rms"]);
    let mut detail = Table::new(&["path_index", "t", "X_lift", "X_direct", "abs_diff"]);
    let mut sups = Vec::new();
    for &n in &levels {
        let g = SimGrid::new(t_end, n).map_err(|e| ctx.config_error("compare", e))?;
        let weights = ConvolutionWeights::new(&k_b, &k_s, &g).map_err(|e| runtime(e, &ctx.out))?;
        let per_path: Vec<(f64, f64, Vec<f64>, Vec<f64>)> = (0..paths)
            .into_par_iter()
            .map(|i| {
                let w = BrownianPath::new(path_seed(ctx.seed, i as u64), fine).coarsen(finest / n)?;
                let lifted = simulate_path(&s0, &c, &g, &w, &SimOptions::default())?;
                let direct = direct_euler_with(&weights, &c, ctx.cfg.x0, &g, &w)?;
                let (sup, rms) = compare_paths(&lifted.values, &direct)?;
                Ok((sup, rms, lifted.values, direct))
            })
            .collect::<svlift::Result<_>>()
            .map_err(|e| runtime(e, &ctx.out))?;
        let m = paths as f64;
        let mean_sup = per_path.iter().map(|p| p.0).sum::<f64>() / m;
        let mean_rms = per_path.iter().map(|p| p.1).sum::<f64>() / m;
        sups.push(mean_sup);
        summary.row(&[s0.atoms_b.len().to_string(), n.to_string(), mean_sup.to_string(), mean_rms.to_string()]);
        if n == finest {
            let times = g.times();
            for (i, (_, _, lifted, direct)) in per_path.iter().enumerate().take(keep) {
                for ((t, a), b) in times.iter().zip(lifted).zip(direct) {
                    detail.row(&[i.to_string(), t.to_string(), a.to_string(), b.to_string(), (a - b).abs().to_string()]);
                }
            }
        }
    }
    let files = vec![ctx.write("compare.csv", &detail)?, ctx.write("summary.csv", &summary)?];
    let min_ratio = sec.min_ratio.unwrap_or(1.7);
    ctx.check(sups.windows(2).all(|w| w[0] / w[1] >= min_ratio), || {
        format!("mean sup gaps {sups:?} do not shrink by {min_ratio} per refinement")
    })?;
    Ok(files)
}

pub fn ito_check(ctx: &Context) -> Outcome<Vec<PathBuf>> {
    let sec = ctx.require(&ctx.cfg.ito_check, "ito_check")?;
    let f = SmoothObservable::from_name(&sec.observable).map_err(|e| ctx.config_error("ito_check", e))?;
    let c = ctx.coefficients()?;
    let (k_b, k_s, s0) = ctx.state(&c)?;
    let g = ctx.grid()?;
    let mode = match sec.kernels.as_deref().unwrap_or("atomized") {
        "atomized" => KernelMode::Atomized,
        "analytic" => KernelMode::Analytic { k_b, k_sigma: k_s },
        other => return Err(ctx.config_error("ito_check", format!("unknown kernel mode '{other}'"))),
    };
    let out = ito_ensemble(&f, &s0, &c, &g, ctx.seed, ctx.paths()?, &mode).map_err(|e| runtime(e, &ctx.out))?;
    let mut t = Table::new(&["path_index", "residual"]);
    for (i, (r, _)) in out.iter().enumerate() {
        t.row(&[i.to_string(), r.to_string()]);
    }
    let res: Vec<f64> = out.iter().map(|r| r.0).collect();
    let sum = summarize(&res).map_err(|e| runtime(e, &ctx.out))?;
    let mut s = Table::new(&["mean", "stderr", "z_score"]);
    s.row(&[sum.mean.to_string(), sum.stderr.to_string(), sum.z_score.to_string()]);
    let files = vec![ctx.write("ito.csv", &t)?, ctx.write("summary.csv", &s)?];
    ctx.check(sum.z_score.abs() < 3.0, || format!("ensemble-mean residual z-score {}", sum.z_score))?;
    Ok(files)
}

pub fn lyapunov(ctx: &Context) -> Outcome<Vec<PathBuf>> {
    let sec = ctx.require(&ctx.cfg.lyapunov, "lyapunov")?;
    let v = SmoothObservable::from_name(&sec.v).map_err(|e| ctx.config_error("lyapunov", e))?;
    let c = ctx.coefficients()?;
    let k_b = ctx.kernel(&ctx.cfg.kernel_b, "kernel_b")?;
    let k_s = match &ctx.cfg.kernel_sigma {
        Some(_) => ctx.kernel(&ctx.cfg.kernel_sigma, "kernel_sigma")?,
        None => k_b.clone(),
    };
    if sec.points < 2 || sec.lags == 0 || !(sec.radius > 0.0) || !(sec.lag_max > 0.0) {
        return Err(ctx.config_error("lyapunov", "need points ≥ 2, lags ≥ 1 and positive radius and lag_max"));
    }
    let domain: Vec<f64> = (0..sec.points)
        .map(|i| -sec.radius + 2.0 * sec.radius * i as f64 / (sec.points - 1) as f64)
        .collect();
    let lags: Vec<f64> = (1..=sec.lags).map(|i| sec.lag_max * i as f64 / sec.lags as f64).collect();
    let rep = lyapunov_check(&v, sec.p, &k_b, &k_s, &c, &domain, &lags).map_err(|e| runtime(e, &ctx.out))?;
    let witness = match rep.witness {
        _ if rep.passed => "pass".to_string(),
        Some((x, lag, lv)) => format!("x={x} lag={lag} LV={lv}"),
        None => "fail".to_string(),
    };
    let mut s = Table::new(&["h_est", "d_est", "witness"]);
    s.row(&[rep.h_est.to_string(), rep.d_est.to_string(), witness]);
    let files = vec![ctx.write("lyapunov.csv", &s)?];
    ctx.check(rep.passed, || format!("no finite (h, d); witness {:?}", rep.witness))?;
    Ok(files)
}

pub fn invariant(ctx: &Context) -> Outcome<Vec<PathBuf>> {
    let sec = ctx.require(&ctx.cfg.invariant, "invariant")?;
    let c = ctx.coefficients()?;
    let k_b = ctx.kernel(&ctx.cfg.kernel_b, "kernel_b")?;
    let k_s = match &ctx.cfg.kernel_sigma {
        Some(_) => ctx.kernel(&ctx.cfg.kernel_sigma, "kernel_sigma")?,
        None => k_b.clone(),
    };
    let g = SimGrid::new(sec.t_long, sec.n_steps).map_err(|e| ctx.config_error("invariant", e))?;
    let mut cfg = LongRunConfig::new(ctx.cfg.x0, g, sec.checkpoint_every, ctx.paths()?, ctx.seed);
    cfg.burn_in = sec.burn_in;
    let partition = ctx.cfg.quadrature.partition().map_err(|e| ctx.config_error("quadrature", e))?;
    let rep = long_run_kernels(&c, &k_b, &k_s, &partition, sec.lt_window.unwrap_or((1.0, 100.0)), &cfg).map_err(|e| match e {
        svlift::Error::InvalidParameter(m) => ctx.config_error("invariant", m),
        other => runtime(other, &ctx.out),
    })?;
    let mut moments = Table::new(&["t", "mean", "second_moment"]);
    for ((t, m), s) in rep.checkpoint_times.iter().zip(&rep.mean).zip(&rep.second_moment) {
        moments.row(&[t.to_string(), m.to_string(), s.to_string()]);
    }
    let mut ks = Table::new(&["t1", "t2", "ks_stat", "critical_value"]);
    for e in &rep.ks {
        ks.row(&[e.t1.to_string(), e.t2.to_string(), e.statistic.to_string(), e.critical.to_string()]);
    }
    let mut files = vec![ctx.write("moments.csv", &moments)?, ctx.write("ks.csv", &ks)?];
    if sec.write_samples {
        let mut samples = Table::new(&["t", "path", "x"]);
        for (t, xs) in rep.checkpoint_times.iter().zip(&rep.samples) {
            for (i, x) in xs.iter().enumerate() {
                samples.row(&[t.to_string(), i.to_string(), x.to_string()]);
            }
        }
        files.push(ctx.write("samples.csv", &samples)?);
    }
    if rep.failed {
        let path = ctx.out.join("explosion.txt");
        let body = format!("exploded = {}\ntotal_paths = {}\n", rep.exploded, rep.total_paths);
        std::fs::write(&path, body).map_err(|e| Failure::Runtime(e.to_string()))?;
        return Err(Failure::Runtime(format!(
            "{} of {} paths exploded; report written to {}",
            rep.exploded,
            rep.total_paths,
            path.display()
        )));
    }
    let n = rep.checkpoint_times.len();
    let latest = (n >= 2)
        .then(|| rep.ks_between(rep.checkpoint_times[n - 2], rep.checkpoint_times[n - 1]))
        .flatten()
        .copied();
    ctx.check(rep.moment_bounded() && latest.is_some_and(|e| e.below_critical()), || {
        format!("moment ratio {} or latest KS {:?} failed", rep.moment_ratio(), latest)
    })?;
    Ok(files)
}
