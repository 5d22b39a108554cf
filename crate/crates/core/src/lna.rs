//! Gaussian fluctuations around the fluid limit:
//! `dY = B(t) Y dt + dW`, `B(t) = A + DF(x_t)`, with `W` of covariance
//! `sigma^2(t) = sum_J J J^T alpha_J(x_t)`.
//!
//! Noise is synthesised in the jump basis, `sum_J J sqrt(alpha_J dt) xi_J`,
//! so no matrix square root is ever needed.

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::meanfield::{fluid_rhs, linearization, occupancy, MeanFieldSolution};
use crate::models::{transitions_from, truncated_a, ModelSpec, TruncatedOperator};
use crate::ode::{integrate, OdeOptions, Tolerance};
use crate::rng::rng_from_seed;
use crate::state::{DensityVector, JumpVector};

/// A linear SDE `dY = B(t, z) Y dt + sum_k v_k sqrt(r_k(t, z)) dW_k`, where
/// `z` is an auxiliary deterministic state (the fluid path) with its own ODE.
pub trait GaussianDynamics: Sync {
    fn dim(&self) -> usize;

    fn aux_dim(&self) -> usize {
        0
    }

    fn aux_initial(&self) -> Vec<f64> {
        Vec::new()
    }

    fn aux_rhs(&self, _aux: &[f64], _out: &mut [f64]) {}

    /// Interpolated auxiliary state, used by path simulation.
    fn aux_at(&self, _t: f64) -> Result<Vec<f64>> {
        Ok(Vec::new())
    }

    /// `out = B y`.
    fn drift(&self, aux: &[f64], y: &[f64], out: &mut [f64]);

    /// Noise directions with their (non-negative) intensities.
    fn noise(&self, aux: &[f64], terms: &mut Vec<(JumpVector, f64)>);

    /// `max_j |B_jj|`, for choosing explicit step sizes.
    fn stiffness(&self, aux: &[f64]) -> f64;

    /// `q += sigma^2`, `q` column-major `dim x dim`.
    fn add_noise_matrix(&self, aux: &[f64], q: &mut [f64]) {
        let n = self.dim();
        let mut terms = Vec::new();
        self.noise(aux, &mut terms);
        for (jump, a) in &terms {
            for &(i, di) in jump.entries() {
                for &(k, dk) in jump.entries() {
                    q[k * n + i] += a * f64::from(di) * f64::from(dk);
                }
            }
        }
    }
}

/// The linearisation of the metapopulation model around its fluid path on `{0..=m}`.
pub struct ArrigoniLna<'a> {
    model: &'a ModelSpec,
    mf: &'a MeanFieldSolution,
    op: TruncatedOperator,
}

impl<'a> ArrigoniLna<'a> {
    pub fn new(model: &'a ModelSpec, mf: &'a MeanFieldSolution) -> Self {
        Self { model, mf, op: truncated_a(model, mf.m) }
    }
}

impl GaussianDynamics for ArrigoniLna<'_> {
    fn dim(&self) -> usize {
        self.mf.m + 1
    }

    fn aux_dim(&self) -> usize {
        self.mf.m + 1
    }

    fn aux_initial(&self) -> Vec<f64> {
        self.mf.values[0].clone()
    }

    fn aux_rhs(&self, x: &[f64], out: &mut [f64]) {
        fluid_rhs(self.model, &self.op, x, out);
    }

    fn aux_at(&self, t: f64) -> Result<Vec<f64>> {
        self.mf.at(t)
    }

    fn drift(&self, x: &[f64], y: &[f64], out: &mut [f64]) {
        linear_drift(self.model, &self.op, x, y, out);
    }

    fn noise(&self, x: &[f64], terms: &mut Vec<(JumpVector, f64)>) {
        noise_terms(self.model, x, terms);
    }

    fn add_noise_matrix(&self, x: &[f64], q: &mut [f64]) {
        add_noise_matrix(self.model, x, q);
    }

    fn stiffness(&self, x: &[f64]) -> f64 {
        let rg = self.model.rho * self.model.gamma;
        let s = occupancy(x);
        (0..x.len())
            .map(|j| {
                let u = if j == 0 { -x[0] } else { x[j - 1] - x[j] };
                (self.op.diag[j] + rg * (j as f64 * u - s)).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// `out = (A + DF(x)) y` in `O(m)`: `DF(x)[y] = rho gamma (s(y) u + s(x) (y_shifted - y))`
/// with `u^i = x^{i-1} - x^i`.
fn linear_drift(model: &ModelSpec, op: &TruncatedOperator, x: &[f64], y: &[f64], out: &mut [f64]) {
    let rg = model.rho * model.gamma;
    op.apply_into(y, out);
    let (sx, sy) = (occupancy(x), occupancy(y));
    out[0] += rg * (-sy * x[0] - sx * y[0]);
    for i in 1..x.len() {
        out[i] += rg * (sy * (x[i - 1] - x[i]) + sx * (y[i - 1] - y[i]));
    }
}

/// Active jumps at `x` with support inside `{0..x.len()-1}`, with their rates `alpha_J(x)`.
fn noise_terms(model: &ModelSpec, x: &[f64], terms: &mut Vec<(JumpVector, f64)>) {
    terms.clear();
    let m = x.len() - 1;
    let support: Vec<usize> = (0..=m).filter(|&j| x[j] > 0.0).collect();
    let xd = DensityVector::from_vec(x.to_vec());
    for t in transitions_from(&support) {
        let jump = t.jump();
        if jump.max_index().is_none_or(|top| top > m) {
            continue;
        }
        let a = t.alpha(model, &xd);
        if a > 0.0 {
            terms.push((jump, a));
        }
    }
}

/// `sigma^2(x) = sum_J J J^T alpha_J(x)` over jumps supported in `{0..=m}`, `m = x.len() - 1`.
pub fn noise_matrix(model: &ModelSpec, x: &[f64]) -> DMatrix<f64> {
    let n = x.len();
    let mut q = vec![0.0; n * n];
    add_noise_matrix(model, x, &mut q);
    DMatrix::from_vec(n, n, q)
}

/// Same sum as `noise_terms` followed by outer products, without building jump vectors.
fn add_noise_matrix(model: &ModelSpec, x: &[f64], q: &mut [f64]) {
    let n = x.len();
    let m = n - 1;
    let rg = model.rho * model.gamma;
    let mut add = |entries: &[(usize, f64)], a: f64| {
        for &(i, di) in entries {
            for &(k, dk) in entries {
                q[k * n + i] += a * di * dk;
            }
        }
    };
    for i in 1..=m {
        if x[i] <= 0.0 {
            continue;
        }
        let fi = i as f64;
        let mut down = fi * x[i] * (model.death(i) + model.gamma * (1.0 - model.rho));
        if i == 1 {
            down += x[1] * model.kappa;
        }
        add(&[(i - 1, 1.0), (i, -1.0)], down);
        if i < m {
            add(&[(i + 1, 1.0), (i, -1.0)], fi * x[i] * model.birth(i));
        }
        if i >= 2 {
            add(&[(0, 1.0), (i, -1.0)], x[i] * model.kappa);
        }
        if rg > 0.0 {
            for k in (0..m).filter(|&k| k + 1 != i && x[k] > 0.0) {
                add(&[(k + 1, 1.0), (k, -1.0), (i - 1, 1.0), (i, -1.0)], rg * fi * x[i] * x[k]);
            }
        }
    }
}

/// Scalar Ornstein–Uhlenbeck process `dY = -a Y dt + sqrt(s) dW`.
#[derive(Clone, Copy, Debug)]
pub struct ScalarOu {
    pub a: f64,
    pub s: f64,
}

impl ScalarOu {
    pub fn stationary_variance(&self) -> f64 {
        self.s / (2.0 * self.a)
    }
}

impl GaussianDynamics for ScalarOu {
    fn dim(&self) -> usize {
        1
    }

    fn drift(&self, _: &[f64], y: &[f64], out: &mut [f64]) {
        out[0] = -self.a * y[0];
    }

    fn noise(&self, _: &[f64], terms: &mut Vec<(JumpVector, f64)>) {
        terms.clear();
        terms.push((JumpVector::from_pairs([(0, 1)]), self.s));
    }

    fn stiffness(&self, _: &[f64]) -> f64 {
        self.a.abs()
    }
}

#[derive(Clone, Debug)]
pub struct YPath {
    pub times: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct EmOptions {
    /// Step size; `None` picks `0.1 / max_j |B_jj|` over the path.
    pub dt: Option<f64>,
    /// Number of equally spaced recorded times including 0 and the horizon.
    pub record_points: usize,
}

impl Default for EmOptions {
    fn default() -> Self {
        Self { dt: None, record_points: 2 }
    }
}

/// Default Euler–Maruyama step: `dt * max_j |B_jj| <= 0.1` along the path.
pub fn default_dt<D: GaussianDynamics + ?Sized>(sys: &D, horizon: f64) -> Result<f64> {
    let mut stiff: f64 = 0.0;
    for k in 0..=20 {
        stiff = stiff.max(sys.stiffness(&sys.aux_at(horizon * k as f64 / 20.0)?));
    }
    Ok(if stiff > 0.0 { (0.1 / stiff).min(horizon) } else { horizon / 100.0 })
}

/// Euler–Maruyama path of `Y` on `[0, horizon]` started from `y0`.
pub fn simulate_y<D: GaussianDynamics + ?Sized>(
    sys: &D,
    y0: &[f64],
    horizon: f64,
    opts: &EmOptions,
    seed: u64,
) -> Result<YPath> {
    let n = sys.dim();
    if y0.len() != n {
        return Err(Error::InvalidInput(format!("Y0 has length {}, expected {n}", y0.len())));
    }
    if !(horizon > 0.0 && horizon.is_finite()) || opts.record_points < 2 {
        return Err(Error::InvalidInput("need a positive horizon and at least 2 record points".into()));
    }
    let dt_target = match opts.dt {
        Some(dt) if dt > 0.0 && dt.is_finite() => dt,
        Some(dt) => return Err(Error::InvalidInput(format!("dt must be positive, got {dt}"))),
        None => default_dt(sys, horizon)?,
    };
    let intervals = opts.record_points - 1;
    let per_interval = ((horizon / intervals as f64) / dt_target).ceil().max(1.0) as usize;
    let steps = per_interval * intervals;
    let dt = horizon / steps as f64;

    let mut rng = rng_from_seed(seed);
    let mut y = y0.to_vec();
    let mut by = vec![0.0; n];
    let mut terms = Vec::new();
    let mut path = YPath { times: vec![0.0], values: vec![y.clone()] };
    let blow_up = 1e12 * (1.0 + y0.iter().fold(0.0f64, |a, v| a.max(v.abs())));
    for step in 0..steps {
        let t = step as f64 * dt;
        let aux = sys.aux_at(t)?;
        sys.drift(&aux, &y, &mut by);
        sys.noise(&aux, &mut terms);
        for (yi, bi) in y.iter_mut().zip(&by) {
            *yi += bi * dt;
        }
        for (jump, a) in &terms {
            let xi: f64 = StandardNormal.sample(&mut rng);
            let amp = (a * dt).sqrt() * xi;
            for &(j, d) in jump.entries() {
                y[j] += f64::from(d) * amp;
            }
        }
        if y.iter().any(|v| !v.is_finite() || v.abs() > blow_up) {
            return Err(Error::BlowUp { time: t + dt });
        }
        if (step + 1) % per_interval == 0 {
            path.times.push((step + 1) as f64 * dt);
            path.values.push(y.clone());
        }
    }
    Ok(path)
}

#[derive(Clone, Debug)]
pub struct TruncatedGaussianSummary {
    pub grid: Vec<f64>,
    pub mean: Vec<Vec<f64>>,
    pub cov: Vec<DMatrix<f64>>,
}

impl TruncatedGaussianSummary {
    pub fn last_cov(&self) -> &DMatrix<f64> {
        self.cov.last().expect("summary grid is never empty")
    }
}

/// Mean and covariance of `Y` at `grid` (starting at 0):
/// `dm/dt = B m`, `dSigma/dt = B Sigma + Sigma B^T + sigma^2`, integrated
/// together with the auxiliary fluid state by the adaptive RK solver.
pub fn covariance_ode<D: GaussianDynamics + ?Sized>(
    sys: &D,
    mean0: &[f64],
    sigma0: &DMatrix<f64>,
    grid: &[f64],
    tol: Tolerance,
) -> Result<TruncatedGaussianSummary> {
    let n = sys.dim();
    let na = sys.aux_dim();
    if mean0.len() != n || sigma0.shape() != (n, n) {
        return Err(Error::InvalidInput(format!("initial mean/covariance must have dimension {n}")));
    }
    if (sigma0 - sigma0.transpose()).amax() > 1e-12 * (1.0 + sigma0.amax()) {
        return Err(Error::InvalidInput("initial covariance must be symmetric".into()));
    }
    if grid.first() != Some(&0.0) {
        return Err(Error::InvalidInput("grid must start at 0".into()));
    }
    let mut y0 = sys.aux_initial();
    y0.extend_from_slice(mean0);
    // column-major, like nalgebra
    y0.extend(sigma0.iter().copied());

    let mut col = vec![0.0; n];
    let mut bs = DMatrix::<f64>::zeros(n, n);
    let rhs = |_: f64, y: &[f64], dy: &mut [f64]| {
        let (aux, rest) = y.split_at(na);
        let (mean, sig) = rest.split_at(n);
        let (daux, drest) = dy.split_at_mut(na);
        let (dmean, dsig) = drest.split_at_mut(n);
        sys.aux_rhs(aux, daux);
        sys.drift(aux, mean, dmean);
        for c in 0..n {
            sys.drift(aux, &sig[c * n..(c + 1) * n], &mut col);
            bs.column_mut(c).copy_from_slice(&col);
        }
        for c in 0..n {
            for r in 0..n {
                dsig[c * n + r] = bs[(r, c)] + bs[(c, r)];
            }
        }
        sys.add_noise_matrix(aux, dsig);
    };
    let (ys, _) = integrate(rhs, 0.0, &y0, grid, &OdeOptions::with_tol(tol), |_, y| {
        let sig = &mut y[na + n..];
        for c in 0..n {
            for r in c + 1..n {
                let v = 0.5 * (sig[c * n + r] + sig[r * n + c]);
                sig[c * n + r] = v;
                sig[r * n + c] = v;
            }
        }
    })?;
    let mut mean = Vec::with_capacity(ys.len());
    let mut cov = Vec::with_capacity(ys.len());
    for y in ys {
        mean.push(y[na..na + n].to_vec());
        cov.push(DMatrix::from_column_slice(n, n, &y[na + n..]));
    }
    Ok(TruncatedGaussianSummary { grid: grid.to_vec(), mean, cov })
}

/// Covariance ODE for the metapopulation model along `mf`, from `Y_0 = 0`.
pub fn covariance_ode_meanfield(
    model: &ModelSpec,
    mf: &MeanFieldSolution,
    sigma0: &DMatrix<f64>,
    tol: Tolerance,
) -> Result<TruncatedGaussianSummary> {
    let sys = ArrigoniLna::new(model, mf);
    covariance_ode(&sys, &vec![0.0; mf.m + 1], sigma0, &mf.grid, tol)
}

#[derive(Clone, Debug)]
pub struct StationaryCovariance {
    pub sigma: DMatrix<f64>,
    /// `max |B Sigma + Sigma B^T + sigma^2|`.
    pub residual: f64,
    /// Largest real part of the eigenvalues of `B`.
    pub abscissa: f64,
}

pub fn lyapunov_residual(b: &DMatrix<f64>, sigma: &DMatrix<f64>, q: &DMatrix<f64>) -> f64 {
    (b * sigma + sigma * b.transpose() + q).amax()
}

pub fn spectral_abscissa(b: &DMatrix<f64>) -> f64 {
    b.clone()
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Solve `B X + X B^T + Q = 0` for stable `B` by the matrix-sign Newton
/// iteration, then polish with refinement sweeps on the residual.
pub fn solve_lyapunov(b: &DMatrix<f64>, q: &DMatrix<f64>, tol: f64) -> Result<(DMatrix<f64>, f64)> {
    let mut x = sign_lyapunov(b, q)?;
    x = (&x + x.transpose()) * 0.5;
    let mut res = lyapunov_residual(b, &x, q);
    for _ in 0..3 {
        if res <= tol {
            break;
        }
        let r = b * &x + &x * b.transpose() + q;
        let dx = sign_lyapunov(b, &r)?;
        let cand = &x + (&dx + dx.transpose()) * 0.5;
        let cres = lyapunov_residual(b, &cand, q);
        if cres >= res {
            break;
        }
        x = cand;
        res = cres;
    }
    Ok((x, res))
}

fn sign_lyapunov(b: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = b.nrows();
    let mut a = b.clone();
    let mut g = q.clone();
    for it in 0..100 {
        let Some(inv) = a.clone().try_inverse() else {
            return Err(Error::NonConvergence { iterations: it, residual: f64::INFINITY });
        };
        // determinant scaling speeds up the early iterations
        let c = if it < 10 {
            let lu = a.clone().lu();
            let ld = lu.u().diagonal().iter().map(|d| d.abs().ln()).sum::<f64>() / n as f64;
            if ld.is_finite() { (-ld).exp() } else { 1.0 }
        } else {
            1.0
        };
        let a_next = (&a * c + &inv / c) * 0.5;
        g = (&g * c + &inv * &g * inv.transpose() / c) * 0.5;
        let delta = (&a_next - &a).amax() / a_next.amax().max(1.0);
        a = a_next;
        if delta < 1e-13 {
            let dist = (&a + DMatrix::<f64>::identity(n, n)).amax();
            if dist > 1e-6 {
                return Err(Error::Unstable { abscissa: spectral_abscissa(b) });
            }
            return Ok(g * 0.5);
        }
    }
    Err(Error::NonConvergence { iterations: 100, residual: f64::NAN })
}

/// Stationary covariance of the Ornstein–Uhlenbeck limit at an equilibrium `x_bar`:
/// `B Sigma + Sigma B^T + sigma^2(x_bar) = 0`, `B = A + DF(x_bar)`.
pub fn stationary_covariance(model: &ModelSpec, x_bar: &[f64], tol: f64) -> Result<StationaryCovariance> {
    if x_bar.len() < 2 {
        return Err(Error::InvalidInput("equilibrium must cover at least types 0 and 1".into()));
    }
    let b = linearization(model, x_bar);
    let abscissa = spectral_abscissa(&b);
    if abscissa >= 0.0 {
        return Err(Error::Unstable { abscissa });
    }
    let q = noise_matrix(model, x_bar);
    let (sigma, residual) = solve_lyapunov(&b, &q, tol)?;
    Ok(StationaryCovariance { sigma, residual, abscissa })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meanfield::{find_equilibrium, integrate_meanfield};
    use crate::process::uniform_grid;

    fn tol() -> Tolerance {
        Tolerance::new(1e-10, 1e-13).unwrap()
    }

    #[test]
    fn noise_matrix_examples() {
        let model = ModelSpec::default_logistic();
        assert_eq!(noise_matrix(&model, &[0.0; 6]).amax(), 0.0);
        // only x^1 > 0 at M = 1: the down jump and nothing else fits the truncation
        let m = crate::models::ModelSpec::new(
            crate::models::DemographicLaw::Constant { b: 0.0, d: 1.5 },
            0.0,
            0.0,
            0.0,
        )
        .unwrap();
        let q = noise_matrix(&m, &[0.0, 0.4]);
        let lam = 1.5 * 0.4;
        assert!((q[(0, 0)] - lam).abs() < 1e-15 && (q[(1, 1)] - lam).abs() < 1e-15);
        assert!((q[(0, 1)] + lam).abs() < 1e-15 && (q[(1, 0)] + lam).abs() < 1e-15);
    }

    #[test]
    fn direct_noise_matrix_matches_jump_enumeration() {
        let model = ModelSpec::default_logistic();
        let x = [0.3, 0.2, 0.0, 0.1, 0.1, 0.08, 0.05, 0.17];
        let mut terms = Vec::new();
        noise_terms(&model, &x, &mut terms);
        let mut slow = DMatrix::<f64>::zeros(8, 8);
        for (jump, a) in &terms {
            for &(i, di) in jump.entries() {
                for &(k, dk) in jump.entries() {
                    slow[(i, k)] += a * f64::from(di) * f64::from(dk);
                }
            }
        }
        assert!((noise_matrix(&model, &x) - slow).amax() < 1e-14);
    }

    #[test]
    fn noise_matrix_is_psd_and_kills_ones() {
        let model = ModelSpec::default_logistic();
        let x = [0.3, 0.2, 0.15, 0.1, 0.1, 0.08, 0.05, 0.02];
        let q = noise_matrix(&model, &x);
        let eig = q.clone().symmetric_eigenvalues();
        assert!(eig.min() > -1e-12);
        let ones = DMatrix::from_element(x.len(), 1, 1.0);
        assert!((&q * ones).amax() < 1e-12);
    }

    #[test]
    fn drift_matches_dense_linearization() {
        let model = ModelSpec::default_logistic();
        let x = vec![0.3, 0.2, 0.15, 0.1, 0.1, 0.08, 0.05, 0.02];
        let y = vec![0.5, -0.2, 0.1, 0.3, -0.4, 0.0, 0.2, -0.1];
        let op = truncated_a(&model, 7);
        let mut out = vec![0.0; 8];
        linear_drift(&model, &op, &x, &y, &mut out);
        let dense = linearization(&model, &x) * nalgebra::DVector::from_vec(y);
        for i in 0..8 {
            assert!((out[i] - dense[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn scalar_covariance_closed_form() {
        let ou = ScalarOu { a: 1.3, s: 0.7 };
        let grid = uniform_grid(3.0, 31);
        let sum = covariance_ode(&ou, &[0.0], &DMatrix::from_element(1, 1, 2.0), &grid, tol()).unwrap();
        let v = ou.stationary_variance();
        for (t, c) in grid.iter().zip(&sum.cov) {
            let exact = v + (2.0 - v) * (-2.0 * ou.a * t).exp();
            assert!((c[(0, 0)] - exact).abs() < 1e-8, "t={t}");
        }
    }

    #[test]
    fn zero_noise_zero_covariance() {
        let ou = ScalarOu { a: 1.0, s: 0.0 };
        let sum = covariance_ode(&ou, &[0.0], &DMatrix::zeros(1, 1), &[0.0, 1.0], tol()).unwrap();
        assert_eq!(sum.last_cov()[(0, 0)], 0.0);
        let p = simulate_y(&ScalarOu { a: 0.0, s: 0.0 }, &[1.5], 1.0, &EmOptions { dt: Some(0.01), record_points: 5 }, 1)
            .unwrap();
        assert!(p.values.iter().all(|v| v[0] == 1.5));
        assert_eq!(p.times.len(), 5);
    }

    #[test]
    fn scalar_lyapunov() {
        let b = DMatrix::from_element(1, 1, -0.8);
        let q = DMatrix::from_element(1, 1, 0.4);
        let (x, res) = solve_lyapunov(&b, &q, 1e-14).unwrap();
        assert!((x[(0, 0)] - 0.25).abs() < 1e-14);
        assert!(res < 1e-14);
        assert!(matches!(solve_lyapunov(&(-b), &q, 1e-14), Err(Error::Unstable { .. })));
    }

    #[test]
    fn increment_covariance_is_sigma2_dt() {
        // average outer products of single Euler increments from Y = 0
        let model = ModelSpec::default_logistic();
        let x0 = DensityVector::from_pairs([(0, 0.4), (1, 0.3), (2, 0.3)]);
        let mf = integrate_meanfield(&model, &x0, 4, &[0.0, 1.0], tol()).unwrap();
        let sys = ArrigoniLna::new(&model, &mf);
        let dt = 1e-3;
        let q = noise_matrix(&model, &mf.values[0]);
        let reps = 4000;
        let mut acc = DMatrix::<f64>::zeros(5, 5);
        for r in 0..reps {
            let p = simulate_y(&sys, &[0.0; 5], dt, &EmOptions { dt: Some(dt), record_points: 2 }, r).unwrap();
            let v = nalgebra::DVector::from_vec(p.values[1].clone());
            acc += &v * v.transpose();
        }
        acc /= reps as f64 * dt;
        for i in 0..5 {
            for j in 0..5 {
                let se = ((q[(i, i)] * q[(j, j)] + q[(i, j)].powi(2)) / reps as f64).sqrt();
                assert!((acc[(i, j)] - q[(i, j)]).abs() <= 4.0 * se + 1e-12, "({i},{j})");
            }
        }
    }

    #[test]
    fn stationary_matches_long_covariance_ode() {
        let model = ModelSpec::default_logistic();
        let m = 45;
        let eq = find_equilibrium(&model, m, 1e-12).unwrap();
        let st = stationary_covariance(&model, &eq.x, 1e-12).unwrap();
        assert!(st.residual < 1e-10 && st.abscissa < 0.0);
        let mf = integrate_meanfield(&model, &DensityVector::from_vec(eq.x.clone()), m, &[0.0, 60.0], tol()).unwrap();
        let sum = covariance_ode_meanfield(&model, &mf, &DMatrix::zeros(m + 1, m + 1), tol()).unwrap();
        assert!((sum.last_cov() - &st.sigma).amax() < 1e-6 * st.sigma.amax());
    }
}
