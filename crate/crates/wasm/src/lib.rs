//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every array handed to JavaScript is flat and row-major: one row per time
//! (or per quantity), `m + 1` columns for the types `0..=m`.

use mpp_core::diagnostics::initial_counts;
use mpp_core::lna::stationary_covariance;
use mpp_core::meanfield::{find_equilibrium, integrate_meanfield};
use mpp_core::models::DemographicLaw;
use mpp_core::ode::Tolerance;
use mpp_core::process::{simulate_ssa, uniform_grid, SimOptions};
use mpp_core::{DensityVector, ModelSpec, Result};
use wasm_bindgen::prelude::*;

/// Start used by the demo: some empty patches, some small, some large.
pub fn demo_x0() -> DensityVector {
    DensityVector::from_pairs([(0, 0.2), (2, 0.3), (5, 0.5)])
}

fn tol() -> Tolerance {
    Tolerance::new(1e-8, 1e-11).expect("valid tolerance")
}

/// Mean-field densities on `points` times in `[0, t]`.
pub fn meanfield_rows(model: &ModelSpec, t: f64, points: usize, m: usize) -> Result<Vec<f64>> {
    let sol = integrate_meanfield(model, &demo_x0(), m, &uniform_grid(t, points), tol())?;
    Ok(sol.values.concat())
}

/// One exact simulation with `n` patches, read on the same grid and cut at type `m`.
pub fn ssa_rows(model: &ModelSpec, n: u64, t: f64, points: usize, m: usize, seed: u64) -> Result<Vec<f64>> {
    let start = initial_counts(&demo_x0(), n)?;
    let traj = simulate_ssa(model, &start, n, t, seed, &SimOptions::grid(t, points))?;
    Ok(traj.states.iter().flat_map(|s| s.density(n).to_dense(m + 1)).collect())
}

/// Equilibrium density followed by the diagonal of its stationary covariance.
pub fn equilibrium_rows(model: &ModelSpec, m: usize) -> Result<Vec<f64>> {
    let eq = find_equilibrium(model, m, 1e-10)?;
    let st = stationary_covariance(model, &eq.x, 1e-10)?;
    let mut out = eq.x.clone();
    out.extend((0..=m).map(|j| st.sigma[(j, j)]));
    Ok(out)
}

fn js(e: mpp_core::Error) -> JsError {
    JsError::new(&e.to_string())
}

/// The logistic metapopulation model with the parameters set in the page.
#[wasm_bindgen]
pub struct Demo {
    model: ModelSpec,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(b: f64, d: f64, c: f64, gamma: f64, rho: f64, kappa: f64) -> std::result::Result<Demo, JsError> {
        let model = ModelSpec::new(DemographicLaw::Logistic { b, d, c }, gamma, rho, kappa).map_err(js)?;
        Ok(Demo { model })
    }

    /// Largest per-patch growth rate `w`; shown next to the sliders.
    #[wasm_bindgen(getter)]
    pub fn growth_bound(&self) -> f64 {
        self.model.growth_bound()
    }

    pub fn meanfield(&self, t: f64, points: usize, m: usize) -> std::result::Result<Vec<f64>, JsError> {
        meanfield_rows(&self.model, t, points, m).map_err(js)
    }

    pub fn simulate(&self, n: u32, t: f64, points: usize, m: usize, seed: u32) -> std::result::Result<Vec<f64>, JsError> {
        ssa_rows(&self.model, u64::from(n), t, points, m, u64::from(seed)).map_err(js)
    }

    pub fn equilibrium(&self, m: usize) -> std::result::Result<Vec<f64>, JsError> {
        equilibrium_rows(&self.model, m).map_err(js)
    }
}
