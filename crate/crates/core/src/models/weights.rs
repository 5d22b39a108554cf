use serde::{Deserialize, Serialize};

use super::rates::transitions_from;
use super::{DemographicLaw, ModelSpec};
use crate::state::DensityVector;

/// Moment order used when none is given; comfortably above the logistic threshold of 22.
pub const DEFAULT_R0: f64 = 32.0;

/// Moment weight `nu(j) = j + 1`.
pub fn nu(j: usize) -> f64 {
    (j + 1) as f64
}

/// Norm weight `mu(j) = j + 1`.
pub fn mu(j: usize) -> f64 {
    (j + 1) as f64
}

/// `||v||_mu = sum_m mu(m) |v^m|`.
pub fn weighted_norm(v: &DensityVector) -> f64 {
    weighted_norm_slice(v.as_slice())
}

pub(crate) fn weighted_norm_slice(v: &[f64]) -> f64 {
    v.iter().enumerate().map(|(m, x)| mu(m) * x.abs()).sum()
}

/// `S_r(x) = sum_j x^j nu(j)^r`.
pub fn moment_s(x: &DensityVector, r: f64) -> f64 {
    x.as_slice()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v != 0.0)
        .map(|(j, v)| v * nu(j).powf(r))
        .sum()
}

/// `(U_r(x), V_r(x))`: first and second moments of the `nu^r`-weighted jump sizes
/// under the rates `alpha_J(x)`.
pub fn moment_uv(model: &ModelSpec, x: &DensityVector, r: f64) -> (f64, f64) {
    let support: Vec<usize> = (0..x.len()).filter(|&j| x.get(j) != 0.0).collect();
    let mut u = 0.0;
    let mut v = 0.0;
    for t in transitions_from(&support) {
        let a = t.alpha(model, x);
        if a == 0.0 {
            continue;
        }
        let inc: f64 = t
            .jump()
            .entries()
            .iter()
            .map(|&(j, d)| f64::from(d) * nu(j).powf(r))
            .sum();
        u += a * inc;
        v += a * inc * inc;
    }
    (u, v)
}

/// Growth exponents of the weights: `|T_M| ~ M^b1`, `|J_M| ~ M^b2`,
/// `mu <= nu^b3`, `|A_jj| <= nu^b4`, rate Lipschitz constants `~ nu(J)^b5`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Betas {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
    pub b5: f64,
}

impl Betas {
    pub fn new(b1: f64, b2: f64, b3: f64, b4: f64, b5: f64) -> Self {
        Self { b1, b2, b3, b4, b5 }
    }

    /// `4 (b2 + b3 + b4) + 2 b5`, the lower limit `r0` must exceed.
    pub fn r0_threshold(&self) -> f64 {
        4.0 * (self.b2 + self.b3 + self.b4) + 2.0 * self.b5
    }
}

/// Weights and exponents attached to a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightStructure {
    pub betas: Betas,
    pub r0: f64,
    pub w: f64,
}

impl WeightStructure {
    /// `b1 = 1`, `b2 = 2` (migration touches pairs of types), `b3 = 1`;
    /// bounded death rates give `b4 = 1`, `b5 = 0`, linearly growing ones
    /// `b4 = 2`, `b5 = 1`.
    pub fn for_model(model: &ModelSpec, r0: f64) -> Self {
        let (b4, b5) = match model.law {
            DemographicLaw::Logistic { c, .. } if c > 0.0 => (2.0, 1.0),
            _ => (1.0, 0.0),
        };
        Self {
            betas: Betas::new(1.0, 2.0, 1.0, b4, b5),
            r0,
            w: model.growth_bound(),
        }
    }
}
