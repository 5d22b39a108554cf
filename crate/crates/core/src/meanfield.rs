//! The deterministic limit `dx/dt = A x + F(x)` on the truncated type set
//! `{0..=M}`, the linear semigroup `R(t) = exp(tA)`, and equilibria.
//!
//! Flux leaving the truncation (births out of `M`, migrants landing in
//! patches of size `M`) is dropped and accumulated so it can be reported.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{truncated_a, weighted_norm, ModelSpec, TruncatedOperator};
use crate::ode::{integrate, OdeOptions, Tolerance};
use crate::state::DensityVector;

/// Largest truncation accepted; beyond it the explicit integrator is hopeless
/// for the logistic law anyway (`|A_jj| ~ c j^2`).
pub const MAX_TRUNCATION: usize = 2000;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeanFieldSolution {
    pub grid: Vec<f64>,
    /// Dense vectors over `{0..=m}`, one per grid time.
    pub values: Vec<Vec<f64>>,
    pub m: usize,
    pub tol: Tolerance,
    /// Cumulative mass lost through the truncation boundary, per grid time.
    pub dropped_flux: Vec<f64>,
    pub steps: usize,
    pub warnings: Vec<String>,
}

impl MeanFieldSolution {
    pub fn horizon(&self) -> f64 {
        *self.grid.last().expect("solution grid is never empty")
    }

    /// State at `t`, linearly interpolated between grid times.
    pub fn at(&self, t: f64) -> Result<Vec<f64>> {
        let (first, last) = (self.grid[0], self.horizon());
        if !(t >= first && t <= last * (1.0 + 1e-12)) {
            return Err(Error::HorizonMismatch(format!(
                "mean-field solution covers [{first}, {last}], asked for {t}"
            )));
        }
        let k = self.grid.partition_point(|&g| g <= t);
        if k == 0 {
            return Ok(self.values[0].clone());
        }
        if k >= self.grid.len() {
            return Ok(self.values[self.grid.len() - 1].clone());
        }
        let (t0, t1) = (self.grid[k - 1], self.grid[k]);
        let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
        Ok(self.values[k - 1]
            .iter()
            .zip(&self.values[k])
            .map(|(a, b)| a + w * (b - a))
            .collect())
    }

    pub fn density_at(&self, t: f64) -> Result<DensityVector> {
        self.at(t).map(DensityVector::from_vec)
    }

    pub fn total_dropped(&self) -> f64 {
        self.dropped_flux.last().copied().unwrap_or(0.0)
    }
}

/// `s(x) = sum_j j x^j`.
pub(crate) fn occupancy(x: &[f64]) -> f64 {
    x.iter().enumerate().map(|(j, v)| j as f64 * v).sum()
}

/// `out = A x + F(x)` on the truncation; returns the flux dropped at the boundary.
pub(crate) fn fluid_rhs(model: &ModelSpec, op: &TruncatedOperator, x: &[f64], out: &mut [f64]) -> f64 {
    let rg = model.rho * model.gamma;
    let m = op.m;
    op.apply_into(x, out);
    let s = occupancy(x);
    out[0] += model.kappa - rg * x[0] * s;
    for i in 1..=m {
        out[i] += rg * (x[i - 1] - x[i]) * s;
    }
    (op.dropped_birth + rg * s) * x[m]
}

fn check_truncation(m: usize) -> Result<()> {
    if m == 0 || m > MAX_TRUNCATION {
        return Err(Error::InvalidInput(format!(
            "truncation level M must lie in 1..={MAX_TRUNCATION}, got {m}"
        )));
    }
    Ok(())
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.first() != Some(&0.0) || grid.windows(2).any(|w| w[1] <= w[0]) || grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("output grid must start at 0 and increase strictly".into()));
    }
    Ok(())
}

/// Dense initial vector over `{0..=m}`; mass above `m` is an error.
pub(crate) fn dense_initial(x0: &DensityVector, m: usize) -> Result<Vec<f64>> {
    if let Some(j) = (m + 1..x0.len()).find(|&j| x0.get(j) != 0.0) {
        return Err(Error::InvalidInput(format!(
            "initial density has mass at type {j}, above the truncation M = {m}"
        )));
    }
    if let Some(j) = (0..x0.len()).find(|&j| !(x0.get(j) >= 0.0 && x0.get(j).is_finite())) {
        return Err(Error::InvalidInput(format!("initial density at type {j} is {}", x0.get(j))));
    }
    Ok(x0.to_dense(m + 1))
}

/// Solve the fluid limit on `{0..=m}` and report it at `grid` (which starts at 0).
pub fn integrate_meanfield(
    model: &ModelSpec,
    x0: &DensityVector,
    m: usize,
    grid: &[f64],
    tol: Tolerance,
) -> Result<MeanFieldSolution> {
    check_truncation(m)?;
    check_grid(grid)?;
    let op = truncated_a(model, m);
    let mut y0 = dense_initial(x0, m)?;
    y0.push(0.0); // dropped-flux accumulator
    let opts = OdeOptions::with_tol(tol);
    let floor = -10.0 * (tol.abs + tol.rel);
    let mut negative: Option<(f64, usize, f64)> = None;
    let (ys, stats) = integrate(
        |_, y, dy| {
            let lost = fluid_rhs(model, &op, &y[..=m], &mut dy[..=m]);
            dy[m + 1] = lost;
        },
        0.0,
        &y0,
        grid,
        &opts,
        |t, y| {
            if negative.is_none() {
                if let Some((i, &v)) = y[..=m].iter().enumerate().find(|(_, &v)| v < floor) {
                    negative = Some((t, i, v));
                }
            }
        },
    )?;
    if let Some((time, index, value)) = negative {
        return Err(Error::NegativeComponent { time, index, value });
    }
    let mut warnings = Vec::new();
    let stiffness = op.diag.iter().fold(0.0f64, |a, d| a.max(d.abs()));
    if stats.accepted > 200_000 {
        warnings.push(format!(
            "stiff truncation: {} steps for max |A_jj| = {stiffness:.3e}; consider a smaller M",
            stats.accepted
        ));
    }
    let (values, dropped_flux) = ys
        .into_iter()
        .map(|mut y| {
            let d = y.pop().unwrap_or(0.0);
            (y, d)
        })
        .unzip();
    Ok(MeanFieldSolution {
        grid: grid.to_vec(),
        values,
        m,
        tol,
        dropped_flux,
        steps: stats.accepted,
        warnings,
    })
}

/// `R(t) v`: solution at `t` of `dv/dt = A v` on `{0..=m}`.
pub fn semigroup_apply(model: &ModelSpec, v: &[f64], t: f64, m: usize, tol: Tolerance) -> Result<Vec<f64>> {
    check_truncation(m)?;
    if v.len() != m + 1 {
        return Err(Error::InvalidInput(format!("vector length {} != M + 1 = {}", v.len(), m + 1)));
    }
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("time must be non-negative, got {t}")));
    }
    let op = truncated_a(model, m);
    let (mut ys, _) = integrate(
        |_, y, dy| op.apply_into(y, dy),
        0.0,
        v,
        &[t],
        &OdeOptions::with_tol(tol),
        |_, _| {},
    )?;
    Ok(ys.pop().expect("one output requested"))
}

/// Dense `A + DF(x)` on `{0..=m}` (the migration influx into `m + 1` dropped).
pub fn linearization(model: &ModelSpec, x: &[f64]) -> DMatrix<f64> {
    let m = x.len() - 1;
    let rg = model.rho * model.gamma;
    let s = occupancy(x);
    let mut b = truncated_a(model, m).to_matrix();
    for i in 0..=m {
        let u = if i == 0 { -x[0] } else { x[i - 1] - x[i] };
        for k in 1..=m {
            b[(i, k)] += rg * k as f64 * u;
        }
        b[(i, i)] -= rg * s;
        if i >= 1 {
            b[(i, i - 1)] += rg * s;
        }
    }
    b
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Equilibrium {
    pub x: Vec<f64>,
    /// `||A x + F(x)||_mu` on the truncation.
    pub residual: f64,
    pub newton_iterations: usize,
}

/// Default starting point for the equilibrium search: mass spread over the
/// first few occupied sizes, so the search avoids the empty state `e^(0)`
/// (always an equilibrium) when a persistent one exists.
pub fn default_start(m: usize) -> DensityVector {
    let top = m.min(5);
    let mut x = DensityVector::zeros(top + 1);
    x.add_at(0, 0.5);
    for j in 1..=top {
        x.add_at(j, 0.5 / top as f64);
    }
    x
}

pub fn find_equilibrium(model: &ModelSpec, m: usize, tol: f64) -> Result<Equilibrium> {
    find_equilibrium_from(model, &default_start(m), m, tol)
}

/// Long-time integration to get close, then Newton on `A x + F(x) = 0` with
/// the first equation replaced by `sum x = 1`; the iterate is renormalised
/// after every step.
pub fn find_equilibrium_from(model: &ModelSpec, start: &DensityVector, m: usize, tol: f64) -> Result<Equilibrium> {
    check_truncation(m)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let op = truncated_a(model, m);
    let residual = |x: &[f64]| {
        let mut r = vec![0.0; m + 1];
        fluid_rhs(model, &op, x, &mut r);
        r
    };
    let norm = |r: &[f64]| weighted_norm(&DensityVector::from_vec(r.to_vec()));

    let mut x = dense_initial(start, m)?;
    normalize(&mut x);
    let ode_tol = Tolerance::new(1e-10, 1e-13)?;
    let mut horizon = 0.0;
    let mut chunk = 10.0;
    while norm(&residual(&x)) > 1e-6 && horizon < 2000.0 {
        let sol = integrate_meanfield(model, &DensityVector::from_vec(x.clone()), m, &[0.0, chunk], ode_tol)?;
        x = sol.values[1].iter().map(|v| v.max(0.0)).collect();
        normalize(&mut x);
        horizon += chunk;
        chunk *= 2.0;
    }

    let mut r = residual(&x);
    let mut res = norm(&r);
    let mut iterations = 0;
    while res > tol {
        if iterations >= 50 {
            return Err(Error::NonConvergence { iterations, residual: res });
        }
        iterations += 1;
        let mut jac = linearization(model, &x);
        let mut rhs = DVector::from_iterator(m + 1, r.iter().map(|v| -v));
        for k in 0..=m {
            jac[(0, k)] = 1.0;
        }
        rhs[0] = 1.0 - x.iter().sum::<f64>();
        let Some(dx) = jac.lu().solve(&rhs) else {
            return Err(Error::NonConvergence { iterations, residual: res });
        };
        let mut damping = 1.0;
        loop {
            let mut trial: Vec<f64> = x.iter().zip(dx.iter()).map(|(a, d)| a + damping * d).collect();
            normalize(&mut trial);
            let tr = residual(&trial);
            let tres = norm(&tr);
            if tres < res || damping < 1e-4 {
                x = trial;
                r = tr;
                res = tres;
                break;
            }
            damping *= 0.5;
        }
    }
    Ok(Equilibrium { x, residual: res, newton_iterations: iterations })
}

fn normalize(x: &mut [f64]) {
    let s: f64 = x.iter().sum();
    if s > 0.0 {
        x.iter_mut().for_each(|v| *v /= s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{drift_df, drift_f, DemographicLaw};

    fn tol() -> Tolerance {
        Tolerance::new(1e-10, 1e-13).unwrap()
    }

    #[test]
    fn empty_state_is_stationary() {
        let model = ModelSpec::default_logistic();
        let sol = integrate_meanfield(&model, &DensityVector::unit(0), 10, &[0.0, 1.0, 5.0], tol()).unwrap();
        for v in &sol.values {
            assert!((v[0] - 1.0).abs() < 1e-14);
            assert!(v[1..].iter().all(|&x| x.abs() < 1e-14));
        }
    }

    #[test]
    fn rhs_matches_a_plus_f() {
        let model = ModelSpec::default_logistic();
        let x = vec![0.2, 0.1, 0.3, 0.15, 0.25, 0.0, 0.0];
        let m = x.len() - 1;
        let op = truncated_a(&model, m);
        let mut out = vec![0.0; m + 1];
        fluid_rhs(&model, &op, &x, &mut out);
        let xd = DensityVector::from_vec(x.clone());
        let a = op.apply(&x);
        let f = drift_f(&model, &xd);
        for i in 0..=m {
            assert!((out[i] - (a[i] + f.get(i))).abs() < 1e-14);
        }
    }

    #[test]
    fn linearization_matches_directional_derivative() {
        let model = ModelSpec::default_logistic();
        let x = vec![0.2, 0.1, 0.3, 0.15, 0.25, 0.0];
        let h = vec![0.3, -0.2, 0.1, 0.0, -0.4, 0.05];
        let b = linearization(&model, &x);
        let bh = &b * DVector::from_vec(h.clone());
        let a = truncated_a(&model, 5).apply(&h);
        let df = drift_df(&model, &DensityVector::from_vec(x), &DensityVector::from_vec(h));
        for i in 0..=5 {
            assert!((bh[i] - a[i] - df.get(i)).abs() < 1e-13, "row {i}");
        }
    }

    #[test]
    fn mass_is_conserved() {
        let model = ModelSpec::default_logistic();
        let x0 = DensityVector::from_pairs([(0, 0.2), (2, 0.3), (5, 0.5)]);
        let grid = crate::process::uniform_grid(5.0, 51);
        let sol = integrate_meanfield(&model, &x0, 60, &grid, tol()).unwrap();
        for v in &sol.values {
            assert!((v.iter().sum::<f64>() - 1.0).abs() < 1e-8);
        }
        assert!(sol.total_dropped() < 1e-12);
    }

    #[test]
    fn interpolation_and_horizon() {
        let model = ModelSpec::default_logistic();
        let sol = integrate_meanfield(&model, &default_start(20), 20, &[0.0, 1.0, 2.0], tol()).unwrap();
        let mid = sol.at(1.5).unwrap();
        for j in 0..=20 {
            assert!((mid[j] - 0.5 * (sol.values[1][j] + sol.values[2][j])).abs() < 1e-15);
        }
        assert!(sol.at(2.5).is_err());
        assert!(sol.at(-0.1).is_err());
    }

    #[test]
    fn invalid_inputs() {
        let model = ModelSpec::default_logistic();
        assert!(integrate_meanfield(&model, &DensityVector::unit(0), 0, &[0.0, 1.0], tol()).is_err());
        assert!(integrate_meanfield(&model, &DensityVector::unit(7), 5, &[0.0, 1.0], tol()).is_err());
        assert!(integrate_meanfield(&model, &DensityVector::unit(0), 5, &[0.5, 1.0], tol()).is_err());
    }

    #[test]
    fn semigroup_identity_at_zero() {
        let model = ModelSpec::default_logistic();
        let v: Vec<f64> = (0..=8).map(|j| j as f64 * 0.1).collect();
        assert_eq!(semigroup_apply(&model, &v, 0.0, 8, tol()).unwrap(), v);
    }

    #[test]
    fn extinction_equilibrium_without_migration() {
        let model = ModelSpec::new(DemographicLaw::Constant { b: 0.0, d: 1.0 }, 0.0, 0.5, 0.3).unwrap();
        let eq = find_equilibrium(&model, 20, 1e-12).unwrap();
        assert!((eq.x[0] - 1.0).abs() < 1e-12);
        assert!(eq.residual <= 1e-12);
    }

    #[test]
    fn default_equilibrium_is_persistent() {
        let model = ModelSpec::default_logistic();
        let eq = find_equilibrium(&model, 60, 1e-10).unwrap();
        assert!(eq.residual <= 1e-10);
        assert!((eq.x.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(eq.x[0] < 0.9, "occupied equilibrium expected, got x0 = {}", eq.x[0]);
        assert!(eq.x.iter().all(|&v| v > -1e-12));
    }
}
