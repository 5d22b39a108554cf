use std::fmt::Write as _;

use mpp_core::diagnostics::{
    clt_study, exponent_calc, initial_counts, lln_study, martingale_study, r0_admissible, run_moment_study,
    ExponentReport, StudyOptions,
};
use mpp_core::ensemble::run_replicas;
use mpp_core::io::{
    covariance_csv, meanfield_csv, study_csv, trajectory_csv, MeanFieldMeta, OutputDir, StudyRow, TrajectoryHeader,
};
use mpp_core::lna::{covariance_ode_meanfield, simulate_y, stationary_covariance, ArrigoniLna, EmOptions};
use mpp_core::meanfield::{find_equilibrium, integrate_meanfield};
use mpp_core::models::{check_assumptions, sample_states, Betas, WeightStructure};
use mpp_core::process::{uniform_grid, RecordMode, SimOptions};
use mpp_core::rng::derive_seed;
use mpp_core::ModelSpec;
use serde::Serialize;

use crate::config::{Record, RunConfig, StudyName};
use crate::CliError;

/// What every command needs: the effective config, its hash and where to write.
pub struct Context {
    pub cfg: RunConfig,
    pub hash: String,
    pub out: OutputDir,
}

impl Context {
    pub fn new(cfg: RunConfig) -> Result<Self, CliError> {
        let hash = cfg.hash();
        let mut out = OutputDir::create(&cfg.output)?;
        out.write("config.json", cfg.to_json())?;
        Ok(Self { cfg, hash, out })
    }

    fn model(&self) -> Result<ModelSpec, CliError> {
        Ok(self.cfg.model.to_spec()?)
    }

    fn seed(&self) -> u64 {
        self.cfg.simulation.seed
    }

    fn study_options(&self) -> Result<StudyOptions, CliError> {
        let s = &self.cfg.simulation;
        Ok(StudyOptions {
            m: self.cfg.meanfield.m,
            tol: self.cfg.tolerance()?,
            grid_points: s.grid_points,
            simulator: s.simulator,
            max_events: s.max_events,
        })
    }

    /// Writes `<name>.json` with the config hash and seed alongside `body`.
    fn report<T: Serialize>(&mut self, name: &str, body: &T) -> Result<(), CliError> {
        #[derive(Serialize)]
        struct Report<'a, T> {
            command: &'a str,
            config_hash: &'a str,
            seed: u64,
            report: &'a T,
        }
        let seed = self.seed();
        let hash = self.hash.clone();
        self.out.write_json(
            &format!("{name}.json"),
            &Report { command: name, config_hash: &hash, seed, report: body },
        )?;
        Ok(())
    }

    pub fn finish(self, command: &str) -> Result<(), CliError> {
        let seed = self.seed();
        let root = self.out.root().display().to_string();
        let manifest = self.out.finish(command, &self.hash, seed)?;
        println!("wrote {} files to {root} (config {})", manifest.files.len() + 1, &self.hash[..12]);
        Ok(())
    }
}

pub fn dispatch(study: StudyName, ctx: &mut Context) -> Result<(), CliError> {
    match study {
        StudyName::Simulate => simulate(ctx),
        StudyName::Meanfield => meanfield(ctx),
        StudyName::Lna => lna(ctx),
        StudyName::Lln => lln(ctx),
        StudyName::Clt => clt(ctx),
        StudyName::Moments => moments(ctx),
        StudyName::Martingale => martingale(ctx),
        StudyName::Check => check(ctx),
        StudyName::Exponents => exponents(ctx),
    }
}

pub fn simulate(ctx: &mut Context) -> Result<(), CliError> {
    let model = ctx.model()?;
    let s = ctx.cfg.simulation.clone();
    let start = initial_counts(&ctx.cfg.x0(), s.n)?;
    let record = match s.record {
        Record::Full => RecordMode::Full,
        Record::Grid => RecordMode::Grid(uniform_grid(s.horizon, s.grid_points)),
    };
    let opts = SimOptions { max_events: s.max_events, record };
    let trajs = run_replicas(s.replicas, s.seed, |_, seed| {
        s.simulator.run(&model, &start, s.n, s.horizon, seed, &opts)
    })?;
    ctx.out.write("trajectories.csv", trajectory_csv(trajs.iter().enumerate()))?;
    let header = TrajectoryHeader {
        model: serde_json::to_value(&ctx.cfg.model).map_err(mpp_core::Error::from)?,
        scale: s.n,
        horizon: s.horizon,
        seed: s.seed,
        replicas: s.replicas,
        events: trajs.iter().map(|t| t.events).collect(),
        config_hash: ctx.hash.clone(),
    };
    ctx.out.write_json("trajectory.json", &header)?;
    Ok(())
}

pub fn meanfield(ctx: &mut Context) -> Result<(), CliError> {
    let model = ctx.model()?;
    let s = &ctx.cfg.simulation;
    let grid = uniform_grid(s.horizon, s.grid_points);
    let sol = integrate_meanfield(&model, &ctx.cfg.x0(), ctx.cfg.meanfield.m, &grid, ctx.cfg.tolerance()?)?;
    for w in &sol.warnings {
        eprintln!("warning: {w}");
    }
    ctx.out.write("meanfield.csv", meanfield_csv(&sol))?;
    let meta = MeanFieldMeta::new(&sol, ctx.hash.clone(), ctx.seed());
    ctx.out.write_json("meanfield.json", &meta)?;
    Ok(())
}

#[derive(Serialize)]
struct LnaReport {
    #[serde(rename = "M")]
    m: usize,
    horizon: f64,
    final_trace: f64,
    paths: usize,
    path_dt: Option<f64>,
    path_start: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    stationary: Option<StationaryReport>,
}

#[derive(Serialize)]
struct StationaryReport {
    equilibrium: Vec<f64>,
    newton_iterations: usize,
    equilibrium_residual: f64,
    lyapunov_residual: f64,
    spectral_abscissa: f64,
}

pub fn lna(ctx: &mut Context) -> Result<(), CliError> {
    let model = ctx.model()?;
    let (m, tol) = (ctx.cfg.lna.m, ctx.cfg.tolerance()?);
    let s = ctx.cfg.simulation.clone();
    let grid = uniform_grid(s.horizon, s.grid_points);
    let mf = integrate_meanfield(&model, &ctx.cfg.x0(), m, &grid, tol)?;
    let sigma0 = ctx.cfg.lna.sigma0.to_matrix(m)?;
    let summary = covariance_ode_meanfield(&model, &mf, &sigma0, tol)?;
    ctx.out.write("covariance.csv", covariance_csv(&summary))?;

    let paths = ctx.cfg.lna.paths;
    if paths > 0 {
        let sys = ArrigoniLna::new(&model, &mf);
        let opts = EmOptions { dt: ctx.cfg.lna.dt, record_points: s.grid_points };
        let ys = run_replicas(paths, derive_seed(s.seed, "lna-paths", 0), |_, seed| {
            simulate_y(&sys, &vec![0.0; m + 1], s.horizon, &opts, seed)
        })?;
        let mut csv = String::from("replica,time,type_index,value\n");
        for (r, y) in ys.iter().enumerate() {
            for (t, v) in y.times.iter().zip(&y.values) {
                for (j, x) in v.iter().enumerate() {
                    let _ = writeln!(csv, "{r},{t},{j},{x}");
                }
            }
        }
        ctx.out.write("lna_paths.csv", csv)?;
    }

    let stationary = if ctx.cfg.lna.stationary {
        let eq = find_equilibrium(&model, m, 1e-12)?;
        let st = stationary_covariance(&model, &eq.x, 1e-12)?;
        let mut csv = String::from("i,j,cov_ij\n");
        for i in 0..=m {
            for j in i..=m {
                let _ = writeln!(csv, "{i},{j},{}", st.sigma[(i, j)]);
            }
        }
        ctx.out.write("stationary.csv", csv)?;
        Some(StationaryReport {
            equilibrium: eq.x,
            newton_iterations: eq.newton_iterations,
            equilibrium_residual: eq.residual,
            lyapunov_residual: st.residual,
            spectral_abscissa: st.abscissa,
        })
    } else {
        None
    };
    let report = LnaReport {
        m,
        horizon: s.horizon,
        final_trace: summary.last_cov().trace(),
        paths,
        path_dt: ctx.cfg.lna.dt,
        path_start: "zero",
        stationary,
    };
    ctx.report("lna", &report)
}

pub fn lln(ctx: &mut Context) -> Result<(), CliError> {
    let model = ctx.model()?;
    let s = ctx.cfg.simulation.clone();
    let study = lln_study(&model, &ctx.cfg.x0(), s.horizon, &s.n_grid, s.replicas, s.seed, &ctx.study_options()?)?;
    let mut rows = Vec::new();
    for (k, &n) in study.n_grid.iter().enumerate() {
        for (r, e) in study.errors[k].iter().enumerate() {
            rows.push(StudyRow::new("lln", n, Some(r), "sup_error", *e));
        }
        rows.push(StudyRow::new("lln", n, None, "mean_sup_error", study.mean_errors[k]));
        rows.push(StudyRow::new("lln", n, None, "se_sup_error", study.std_errors[k]));
    }
    rows.push(StudyRow::new("lln", 0, None, "slope", study.slope.slope));
    rows.push(StudyRow::new("lln", 0, None, "slope_se", study.slope.slope_se));
    ctx.out.write("study.csv", study_csv(&rows))?;
    println!("log-log slope {:.4} ± {:.4}", study.slope.slope, study.slope.slope_se);
    ctx.report("lln", &study)
}

pub fn clt(ctx: &mut Context) -> Result<(), CliError> {
    let model = ctx.model()?;
    let s = ctx.cfg.simulation.clone();
    let rep = clt_study(
        &model,
        &ctx.cfg.x0(),
        s.horizon,
        s.n,
        s.replicas,
        s.seed,
        s.clt_block,
        &ctx.study_options()?,
    )?;
    let mut rows = Vec::new();
    for c in &rep.covariance {
        rows.push(StudyRow::new("clt", s.n, None, format!("cov_{}_{}_empirical", c.i, c.j), c.empirical));
        rows.push(StudyRow::new("clt", s.n, None, format!("cov_{}_{}_predicted", c.i, c.j), c.predicted));
        rows.push(StudyRow::new("clt", s.n, None, format!("cov_{}_{}_se", c.i, c.j), c.std_error));
    }
    rows.push(StudyRow::new("clt", s.n, None, "ks_statistic", rep.ks.statistic));
    rows.push(StudyRow::new("clt", s.n, None, "ks_p_value", rep.ks.p_value));
    ctx.out.write("study.csv", study_csv(&rows))?;
    println!(
        "covariance block {}, KS p = {:.4}",
        if rep.covariance_passed() { "within tolerance" } else { "OUT of tolerance" },
        rep.ks.p_value
    );
    ctx.report("clt", &rep)
}

pub fn moments(ctx: &mut Context) -> Result<(), CliError> {
    let model = ctx.model()?;
    let s = ctx.cfg.simulation.clone();
    let rep = run_moment_study(
        &model,
        &ctx.cfg.x0(),
        s.horizon,
        &s.n_grid,
        s.replicas,
        s.seed,
        s.moment_order,
        &ctx.study_options()?,
    )?;
    let mut rows = Vec::new();
    for row in &rep.rows {
        for (r, v) in row.sups.iter().enumerate() {
            rows.push(StudyRow::new("moments", row.scale, Some(r), "sup_S_r", *v));
        }
        rows.push(StudyRow::new("moments", row.scale, None, "q99", row.quantile));
    }
    ctx.out.write("study.csv", study_csv(&rows))?;
    println!("upper quantile growth in N {:.3} ({})", rep.growth, if rep.stable { "stable" } else { "unstable" });
    ctx.report("moments", &rep)
}

pub fn martingale(ctx: &mut Context) -> Result<(), CliError> {
    let model = ctx.model()?;
    let s = ctx.cfg.simulation.clone();
    let rep = martingale_study(&model, &ctx.cfg.x0(), s.n, s.horizon, s.replicas, s.seed)?;
    let mut rows = Vec::new();
    for (j, (m, se)) in rep.mean.iter().zip(&rep.std_error).enumerate() {
        rows.push(StudyRow::new("martingale", s.n, None, format!("mean_{j}"), *m));
        rows.push(StudyRow::new("martingale", s.n, None, format!("se_{j}"), *se));
    }
    ctx.out.write("study.csv", study_csv(&rows))?;
    println!("components beyond 3 s.e.: {:?}", rep.flagged);
    ctx.report("martingale", &rep)
}

pub fn check(ctx: &mut Context) -> Result<(), CliError> {
    let model = ctx.model()?;
    let m = ctx.cfg.meanfield.m;
    let samples = sample_states(m, ctx.cfg.check.samples, derive_seed(ctx.seed(), "check", 0));
    let rep = check_assumptions(&model, m, &samples, ctx.cfg.exponents.r0)?;
    for e in &rep.entries {
        println!("{} {}: {}", if e.passed { "pass" } else { "FAIL" }, e.name, e.detail);
    }
    ctx.report("assumptions", &rep)
}

#[derive(Serialize)]
struct ExponentsSummary {
    betas: Betas,
    r0: f64,
    threshold: f64,
    verdict: &'static str,
    reports: Vec<ExponentReport>,
}

pub fn exponents(ctx: &mut Context) -> Result<(), CliError> {
    let model = ctx.model()?;
    let r0 = ctx.cfg.exponents.r0;
    let betas = WeightStructure::for_model(&model, r0).betas;
    let threshold = betas.r0_threshold();
    let zetas: Vec<f64> = match ctx.cfg.exponents.zeta {
        Some(z) => vec![z],
        // interior of (1/r0, 1/threshold) when it is non-empty, else around 1/r0
        None if r0_admissible(betas, r0) => {
            let (lo, hi) = (1.0 / r0, 1.0 / threshold);
            (1..=9).map(|k| lo + (hi - lo) * k as f64 / 10.0).collect()
        }
        None => vec![1.0 / r0],
    };
    let reports: Vec<ExponentReport> = zetas.iter().map(|&z| exponent_calc(betas, r0, z)).collect();
    let verdict = if reports.iter().any(|r| r.feasible) { "feasible" } else { "infeasible" };
    let mut csv = String::from("zeta,b1,b2,feasible\n");
    for r in &reports {
        let _ = writeln!(csv, "{},{},{},{}", r.zeta, r.b1, r.b2, r.feasible);
    }
    ctx.out.write("exponents.csv", csv)?;
    println!("r0 = {r0}, threshold = {threshold}: {verdict}");
    ctx.report("exponents", &ExponentsSummary { betas, r0, threshold, verdict, reports })
}
