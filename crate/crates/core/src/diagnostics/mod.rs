//! Experiments that hold simulations against the limit theorems: the
//! law-of-large-numbers error rate, the Gaussian fluctuation law, the
//! martingale property of the compensated process and moment bounds.

mod exponents;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use exponents::{exponent_calc, r0_admissible, ExponentReport};

use crate::ensemble::run_replicas;
use crate::error::{Error, Result};
use crate::lna::covariance_ode_meanfield;
use crate::meanfield::{integrate_meanfield, MeanFieldSolution};
use crate::models::{moment_s, mu, weighted_norm, ModelSpec};
use crate::ode::Tolerance;
use crate::process::{
    martingale_terminal, simulate_ssa, simulate_time_change, uniform_grid, JumpModel, RecordMode,
    SimOptions, Trajectory,
};
use crate::rng::derive_seed;
use crate::state::{DensityVector, SparseCounts};
use crate::stats::{self, KsResult, SlopeFit};

/// Counts `X_0` with `sum X_0 = N` closest to `N x0`: floors first, then the
/// leftover patches go to the largest remainders (ties to the lower type).
pub fn initial_counts(x0: &DensityVector, scale: u64) -> Result<SparseCounts> {
    let total = x0.sum();
    if x0.as_slice().iter().any(|&v| !(v >= 0.0 && v.is_finite())) || (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!(
            "initial density must be non-negative and sum to 1 (sum = {total})"
        )));
    }
    let n = scale as f64;
    let mut floors: Vec<u64> = x0.as_slice().iter().map(|v| (v * n).floor() as u64).collect();
    let assigned: u64 = floors.iter().sum();
    let mut order: Vec<usize> = (0..floors.len()).collect();
    let rem = |j: usize| x0.get(j) * n - floors[j] as f64;
    order.sort_by(|&a, &b| rem(b).total_cmp(&rem(a)).then(a.cmp(&b)));
    for &j in order.iter().take(scale.saturating_sub(assigned) as usize) {
        floors[j] += 1;
    }
    Ok(SparseCounts::from_dense(&floors))
}

/// `sup_k ||x^N(t_k) - x(t_k)||_mu` over `grid`; the path is read as
/// piecewise constant, the mean field as interpolated on its own grid.
pub fn sup_error(traj: &Trajectory, mf: &MeanFieldSolution, grid: &[f64]) -> Result<f64> {
    if (traj.horizon - mf.horizon()).abs() > 1e-9 * traj.horizon.max(1.0) {
        return Err(Error::HorizonMismatch(format!(
            "trajectory horizon {} vs mean-field horizon {}",
            traj.horizon,
            mf.horizon()
        )));
    }
    let mut worst: f64 = 0.0;
    for &t in grid {
        let xn = traj.density_at(t)?;
        let x = mf.density_at(t)?;
        worst = worst.max(weighted_norm(&xn.sub(&x)));
    }
    Ok(worst)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Simulator {
    Ssa,
    TimeChange,
}

impl Simulator {
    pub fn run<M: JumpModel + ?Sized>(
        self,
        model: &M,
        x0: &SparseCounts,
        scale: u64,
        horizon: f64,
        seed: u64,
        opts: &SimOptions,
    ) -> Result<Trajectory> {
        match self {
            Simulator::Ssa => simulate_ssa(model, x0, scale, horizon, seed, opts),
            Simulator::TimeChange => simulate_time_change(model, x0, scale, horizon, seed, opts),
        }
    }
}

/// Knobs shared by the studies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyOptions {
    /// Truncation of the mean-field and Gaussian computations.
    pub m: usize,
    pub tol: Tolerance,
    /// Checkpoints on `[0, T]` where sups are taken.
    pub grid_points: usize,
    pub simulator: Simulator,
    pub max_events: u64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            m: 60,
            tol: Tolerance::new(1e-10, 1e-13).expect("valid"),
            grid_points: 201,
            simulator: Simulator::Ssa,
            max_events: crate::process::DEFAULT_EVENT_BUDGET,
        }
    }
}

impl StudyOptions {
    fn sim_options(&self, grid: &[f64]) -> SimOptions {
        SimOptions { max_events: self.max_events, record: RecordMode::Grid(grid.to_vec()) }
    }
}

/// Empirical law-of-large-numbers rate.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergenceStudy {
    pub n_grid: Vec<u64>,
    pub replicas: usize,
    pub horizon: f64,
    pub grid_points: usize,
    /// `errors[k][r]`: sup-error of replica `r` at `n_grid[k]`.
    pub errors: Vec<Vec<f64>>,
    pub mean_errors: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub slope: SlopeFit,
    pub seed: u64,
}

pub fn lln_study(
    model: &ModelSpec,
    x0: &DensityVector,
    horizon: f64,
    n_grid: &[u64],
    replicas: usize,
    seed: u64,
    opts: &StudyOptions,
) -> Result<ConvergenceStudy> {
    if n_grid.len() < 2 || n_grid.windows(2).any(|w| w[1] <= w[0]) || replicas < 2 {
        return Err(Error::InvalidInput(
            "need an increasing N grid of at least two sizes and at least two replicas".into(),
        ));
    }
    let grid = uniform_grid(horizon, opts.grid_points);
    let mf = integrate_meanfield(model, x0, opts.m, &grid, opts.tol)?;
    let sim = opts.sim_options(&grid);
    let mut errors = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let start = initial_counts(x0, n)?;
        let n_seed = derive_seed(seed, "lln", n);
        let errs = run_replicas(replicas, n_seed, |_, s| {
            let traj = opts.simulator.run(model, &start, n, horizon, s, &sim)?;
            sup_error(&traj, &mf, &grid)
        })?;
        errors.push(errs);
    }
    let (mean_errors, std_errors): (Vec<f64>, Vec<f64>) = errors.iter().map(|e| stats::mean_se(e)).unzip();
    let ns: Vec<f64> = n_grid.iter().map(|&n| n as f64).collect();
    let slope = stats::log_log_slope(&ns, &mean_errors, &std_errors);
    Ok(ConvergenceStudy {
        n_grid: n_grid.to_vec(),
        replicas,
        horizon,
        grid_points: opts.grid_points,
        errors,
        mean_errors,
        std_errors,
        slope,
        seed,
    })
}

/// One entry of the covariance comparison.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CovarianceCheck {
    pub i: usize,
    pub j: usize,
    pub empirical: f64,
    pub predicted: f64,
    pub std_error: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CltReport {
    pub scale: u64,
    pub replicas: usize,
    pub horizon: f64,
    pub m: usize,
    /// Size of the leading block compared.
    pub block: usize,
    pub relative_tolerance: f64,
    /// Componentwise mean of `U^N_T` and its standard error, over `{0..=m}`.
    pub mean: Vec<f64>,
    pub mean_se: Vec<f64>,
    pub covariance: Vec<CovarianceCheck>,
    /// `l = (mu(0), ..., mu(block - 1))`.
    pub functional_variance: f64,
    pub ks: KsResult,
    /// Replicas whose state at `T` had patches above type `m`.
    pub replicas_above_m: usize,
    pub seed: u64,
}

impl CltReport {
    pub fn covariance_passed(&self) -> bool {
        self.covariance.iter().all(|c| c.passed)
    }

    pub fn passed(&self, level: f64) -> bool {
        self.covariance_passed() && self.ks.passes(level)
    }
}

/// Compares `U^N_T = sqrt(N) (x^N_T - x_T)` with the Gaussian limit `N(0, Sigma(T))`.
#[allow(clippy::too_many_arguments)]
pub fn clt_study(
    model: &ModelSpec,
    x0: &DensityVector,
    horizon: f64,
    scale: u64,
    replicas: usize,
    seed: u64,
    block: usize,
    opts: &StudyOptions,
) -> Result<CltReport> {
    let m = opts.m;
    if block == 0 || block > m + 1 || replicas < 3 {
        return Err(Error::InvalidInput("block must lie in 1..=M+1 and replicas >= 3".into()));
    }
    let grid = uniform_grid(horizon, opts.grid_points);
    let mf = integrate_meanfield(model, x0, m, &grid, opts.tol)?;
    let summary = covariance_ode_meanfield(model, &mf, &DMatrix::zeros(m + 1, m + 1), opts.tol)?;
    let sigma = summary.last_cov();
    let x_t = mf.values.last().expect("non-empty").clone();
    let start = initial_counts(x0, scale)?;
    let sim = SimOptions { max_events: opts.max_events, record: RecordMode::Grid(vec![0.0, horizon]) };
    let root_n = (scale as f64).sqrt();
    let samples = run_replicas(replicas, seed, |_, s| {
        let traj = opts.simulator.run(model, &start, scale, horizon, s, &sim)?;
        let last = traj.last();
        let above = last.len_dense() > m + 1;
        let u: Vec<f64> = (0..=m)
            .map(|j| root_n * (last.get(j) as f64 / scale as f64 - x_t[j]))
            .collect();
        Ok((u, above))
    })?;
    let replicas_above_m = samples.iter().filter(|s| s.1).count();
    let rows: Vec<Vec<f64>> = samples.into_iter().map(|s| s.0).collect();

    let (mean, mean_se): (Vec<f64>, Vec<f64>) = (0..=m)
        .map(|j| stats::mean_se(&rows.iter().map(|r| r[j]).collect::<Vec<_>>()))
        .unzip();
    let emp = stats::sample_covariance(&rows);
    let rel = 0.15;
    let mut covariance = Vec::new();
    for i in 0..block {
        for j in i..block {
            let se = stats::covariance_se(&rows, i, j);
            let (e, p) = (emp[(i, j)], sigma[(i, j)]);
            covariance.push(CovarianceCheck {
                i,
                j,
                empirical: e,
                predicted: p,
                std_error: se,
                passed: (e - p).abs() <= (rel * p.abs()).max(3.0 * se),
            });
        }
    }
    let ell: Vec<f64> = (0..block).map(mu).collect();
    let functional_variance: f64 = (0..block)
        .flat_map(|i| (0..block).map(move |j| (i, j)))
        .map(|(i, j)| ell[i] * ell[j] * sigma[(i, j)])
        .sum();
    let values: Vec<f64> = rows
        .iter()
        .map(|r| ell.iter().zip(r).map(|(l, u)| l * u).sum())
        .collect();
    let sd = functional_variance.max(0.0).sqrt();
    let ks = stats::ks_one_sample(&values, |v| stats::normal_cdf(v, 0.0, sd));
    Ok(CltReport {
        scale,
        replicas,
        horizon,
        m,
        block,
        relative_tolerance: rel,
        mean,
        mean_se,
        covariance,
        functional_variance,
        ks,
        replicas_above_m,
        seed,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentRow {
    pub scale: u64,
    /// `sup_t S_r(x_t^N)` per replica.
    pub sups: Vec<f64>,
    pub quantile: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MomentReport {
    pub r: f64,
    pub level: f64,
    pub rows: Vec<MomentRow>,
    /// `max / min - 1` of the upper quantiles across `N`.
    pub spread: f64,
    /// Largest relative increase of the upper quantile from a smaller to a
    /// larger `N`; the bound is uniform in `N`, so only growth counts against it.
    pub growth: f64,
    pub tolerance: f64,
    pub stable: bool,
}

/// `sup_t S_r(x_t^N)` over the recorded states of `traj`.
pub fn sup_moment(traj: &Trajectory, r: f64) -> f64 {
    traj.states
        .iter()
        .map(|s| moment_s(&s.density(traj.scale), r))
        .fold(0.0, f64::max)
}

/// Upper `level`-quantile of `sup_t S_r` per population size, and whether it
/// is stable in `N`: no larger size exceeds a smaller one by more than
/// `tolerance` (relative).
pub fn moment_study(groups: &[(u64, Vec<Trajectory>)], r: f64, level: f64, tolerance: f64) -> MomentReport {
    let rows: Vec<MomentRow> = groups
        .iter()
        .map(|(n, trajs)| {
            let sups: Vec<f64> = trajs.iter().map(|t| sup_moment(t, r)).collect();
            MomentRow { scale: *n, quantile: stats::quantile(&sups, level), sups }
        })
        .collect();
    moment_report(rows, r, level, tolerance)
}

fn moment_report(rows: Vec<MomentRow>, r: f64, level: f64, tolerance: f64) -> MomentReport {
    let hi = rows.iter().map(|q| q.quantile).fold(f64::NEG_INFINITY, f64::max);
    let lo = rows.iter().map(|q| q.quantile).fold(f64::INFINITY, f64::min);
    let spread = hi / lo - 1.0;
    let mut sorted: Vec<(u64, f64)> = rows.iter().map(|q| (q.scale, q.quantile)).collect();
    sorted.sort_by_key(|q| q.0);
    let mut growth: f64 = 0.0;
    for (k, later) in sorted.iter().enumerate() {
        for earlier in &sorted[..k] {
            growth = growth.max(later.1 / earlier.1 - 1.0);
        }
    }
    MomentReport { r, level, rows, spread, growth, tolerance, stable: growth <= tolerance }
}

/// Simulates and summarises in one pass, without keeping the trajectories.
#[allow(clippy::too_many_arguments)]
pub fn run_moment_study(
    model: &ModelSpec,
    x0: &DensityVector,
    horizon: f64,
    n_grid: &[u64],
    replicas: usize,
    seed: u64,
    r: f64,
    opts: &StudyOptions,
) -> Result<MomentReport> {
    let grid = uniform_grid(horizon, opts.grid_points);
    let sim = opts.sim_options(&grid);
    let mut rows = Vec::new();
    for &n in n_grid {
        let start = initial_counts(x0, n)?;
        let sups = run_replicas(replicas, derive_seed(seed, "moments", n), |_, s| {
            Ok(sup_moment(&opts.simulator.run(model, &start, n, horizon, s, &sim)?, r))
        })?;
        rows.push(MomentRow { scale: n, quantile: stats::quantile(&sups, 0.99), sups });
    }
    Ok(moment_report(rows, r, 0.99, 0.2))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub scale: u64,
    pub replicas: usize,
    pub horizon: f64,
    pub mean: Vec<f64>,
    pub std_error: Vec<f64>,
    /// Components whose mean exceeds three standard errors.
    pub flagged: Vec<usize>,
    pub seed: u64,
}

impl MartingaleReport {
    pub fn passed(&self) -> bool {
        self.flagged.is_empty()
    }
}

/// Componentwise mean and standard error of `m_T^N` across replicas.
pub fn martingale_study<M: JumpModel + ?Sized>(
    model: &M,
    x0: &DensityVector,
    scale: u64,
    horizon: f64,
    replicas: usize,
    seed: u64,
) -> Result<MartingaleReport> {
    let start = initial_counts(x0, scale)?;
    let terminal = run_replicas(replicas, seed, |_, s| {
        let traj = simulate_ssa(model, &start, scale, horizon, s, &SimOptions::default())?;
        martingale_terminal(&traj, model)
    })?;
    let dim = terminal.iter().map(DensityVector::len).max().unwrap_or(0);
    let mut mean = Vec::with_capacity(dim);
    let mut std_error = Vec::with_capacity(dim);
    let mut flagged = Vec::new();
    for j in 0..dim {
        let col: Vec<f64> = terminal.iter().map(|m| m.get(j)).collect();
        let (mj, se) = stats::mean_se(&col);
        // a component that is identically zero has nothing to test
        if mj.abs() > 3.0 * se && !(mj == 0.0 && se == 0.0) {
            flagged.push(j);
        }
        mean.push(mj);
        std_error.push(se);
    }
    Ok(MartingaleReport { scale, replicas, horizon, mean, std_error, flagged, seed })
}
