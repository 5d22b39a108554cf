//! The JSON run configuration. Every field has a default, unknown keys are
//! rejected, and a parsed config serialises back to an equal value.

use std::fmt;

use mpp_core::diagnostics::Simulator;
use mpp_core::meanfield::MAX_TRUNCATION;
use mpp_core::models::{ModelConfig, DEFAULT_R0};
use mpp_core::ode::Tolerance;
use mpp_core::process::DEFAULT_EVENT_BUDGET;
use mpp_core::DensityVector;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelConfig,
    pub simulation: SimulationConfig,
    pub meanfield: MeanFieldConfig,
    pub lna: LnaConfig,
    pub exponents: ExponentConfig,
    pub check: CheckConfig,
    /// Study run by `mpp run`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub study: Option<StudyName>,
    pub output: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            simulation: SimulationConfig::default(),
            meanfield: MeanFieldConfig::default(),
            lna: LnaConfig::default(),
            exponents: ExponentConfig::default(),
            check: CheckConfig::default(),
            study: None,
            output: "out".into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    /// Number of patches for single-size commands.
    #[serde(rename = "N")]
    pub n: u64,
    /// Sizes for the convergence and moment studies.
    #[serde(rename = "N_grid")]
    pub n_grid: Vec<u64>,
    #[serde(rename = "T")]
    pub horizon: f64,
    pub replicas: usize,
    pub seed: u64,
    pub grid_points: usize,
    pub simulator: Simulator,
    pub record: Record,
    /// Initial density as `[type, density]` pairs.
    pub x0: Vec<(usize, f64)>,
    pub max_events: u64,
    /// Order `r` of the moment functional `S_r`.
    pub moment_order: f64,
    /// Leading covariance block compared by the CLT study.
    pub clt_block: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            n_grid: vec![100, 400, 1600, 6400],
            horizon: 2.0,
            replicas: 100,
            seed: 1,
            grid_points: 201,
            simulator: Simulator::Ssa,
            record: Record::Grid,
            x0: vec![(0, 0.2), (2, 0.3), (5, 0.5)],
            max_events: DEFAULT_EVENT_BUDGET,
            moment_order: 2.0,
            clt_block: 5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Record {
    /// Every jump.
    Full,
    /// The `grid_points` uniform checkpoints.
    Grid,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeanFieldConfig {
    #[serde(rename = "M")]
    pub m: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for MeanFieldConfig {
    fn default() -> Self {
        Self { m: 60, rel_tol: 1e-10, abs_tol: 1e-13 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LnaConfig {
    /// Euler–Maruyama step for sample paths; `null` picks one from the stiffness.
    pub dt: Option<f64>,
    #[serde(rename = "M")]
    pub m: usize,
    pub sigma0: Sigma0,
    /// Number of sample paths of `Y` to write (started at 0).
    pub paths: usize,
    /// Also solve for the equilibrium and its stationary covariance.
    pub stationary: bool,
}

impl Default for LnaConfig {
    fn default() -> Self {
        Self { dt: None, m: 30, sigma0: Sigma0::Zero, paths: 0, stationary: false }
    }
}

/// Initial covariance of the fluctuation limit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sigma0 {
    Zero,
    /// Diagonal entries from type 0; missing ones are zero.
    Diagonal(Vec<f64>),
    /// Full symmetric matrix, rows from type 0, zero-padded to `M + 1`.
    Matrix(Vec<Vec<f64>>),
}

impl Sigma0 {
    pub fn to_matrix(&self, m: usize) -> Result<DMatrix<f64>, ConfigError> {
        let n = m + 1;
        let mut s = DMatrix::zeros(n, n);
        match self {
            Sigma0::Zero => {}
            Sigma0::Diagonal(d) => {
                if d.len() > n {
                    return Err(ConfigError::new("lna.sigma0", format!("diagonal longer than M + 1 = {n}")));
                }
                for (i, v) in d.iter().enumerate() {
                    if *v < 0.0 {
                        return Err(ConfigError::new("lna.sigma0", "diagonal entries must be non-negative"));
                    }
                    s[(i, i)] = *v;
                }
            }
            Sigma0::Matrix(rows) => {
                if rows.len() > n || rows.iter().any(|r| r.len() != rows.len()) {
                    return Err(ConfigError::new("lna.sigma0", format!("matrix must be square with size <= {n}")));
                }
                for (i, r) in rows.iter().enumerate() {
                    for (j, v) in r.iter().enumerate() {
                        s[(i, j)] = *v;
                    }
                }
                if (&s - s.transpose()).amax() > 0.0 {
                    return Err(ConfigError::new("lna.sigma0", "matrix must be symmetric"));
                }
                if s.clone().symmetric_eigenvalues().min() < -1e-12 * (1.0 + s.amax()) {
                    return Err(ConfigError::new("lna.sigma0", "matrix must be positive semidefinite"));
                }
            }
        }
        Ok(s)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExponentConfig {
    pub r0: f64,
    /// A single `zeta` to report; `null` tabulates the feasible range.
    pub zeta: Option<f64>,
}

impl Default for ExponentConfig {
    fn default() -> Self {
        Self { r0: DEFAULT_R0, zeta: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CheckConfig {
    /// Random states on which the rate assumptions are probed.
    pub samples: usize,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self { samples: 200 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyName {
    Simulate,
    Meanfield,
    Lna,
    Lln,
    Clt,
    Moments,
    Martingale,
    Check,
    Exponents,
}

/// A configuration problem, located by its key path (and line, when parsing).
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self { key: key.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.key.is_empty() || self.key == "." {
            write!(f, "config error: {}", self.message)
        } else {
            write!(f, "config error at `{}`: {}", self.key, self.message)
        }
    }
}

impl std::error::Error for ConfigError {}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            // serde_json's message already carries the line and column
            ConfigError::new(e.path().to_string(), e.inner().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config is always serialisable");
        s.push('\n');
        s
    }

    /// Content hash of everything that determines the data (the output
    /// directory is excluded).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output.clear();
        mpp_core::io::config_hash(&c).expect("config is always serialisable")
    }

    pub fn x0(&self) -> DensityVector {
        DensityVector::from_pairs(self.simulation.x0.iter().copied())
    }

    pub fn tolerance(&self) -> Result<Tolerance, ConfigError> {
        Tolerance::new(self.meanfield.rel_tol, self.meanfield.abs_tol)
            .map_err(|e| ConfigError::new("meanfield.rel_tol", e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model.to_spec().map_err(|e| ConfigError::new("model", e.to_string()))?;
        let s = &self.simulation;
        if s.n == 0 {
            return Err(ConfigError::new("simulation.N", "must be at least 1"));
        }
        if s.n_grid.is_empty() || s.n_grid.contains(&0) || s.n_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(ConfigError::new("simulation.N_grid", "must be a non-empty increasing list of positive sizes"));
        }
        if !(s.horizon > 0.0 && s.horizon.is_finite()) {
            return Err(ConfigError::new("simulation.T", "must be positive and finite"));
        }
        if s.replicas == 0 {
            return Err(ConfigError::new("simulation.replicas", "must be at least 1"));
        }
        if s.grid_points < 2 {
            return Err(ConfigError::new("simulation.grid_points", "must be at least 2"));
        }
        if s.max_events == 0 {
            return Err(ConfigError::new("simulation.max_events", "must be at least 1"));
        }
        if !s.moment_order.is_finite() || s.moment_order < 0.0 {
            return Err(ConfigError::new("simulation.moment_order", "must be non-negative"));
        }
        let total: f64 = s.x0.iter().map(|p| p.1).sum();
        if s.x0.is_empty() || s.x0.iter().any(|p| !(p.1 >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return Err(ConfigError::new("simulation.x0", format!("densities must be non-negative and sum to 1 (sum = {total})")));
        }
        for (key, m) in [("meanfield.M", self.meanfield.m), ("lna.M", self.lna.m)] {
            if m == 0 || m > MAX_TRUNCATION {
                return Err(ConfigError::new(key, format!("truncation must lie in 1..={MAX_TRUNCATION}, got {m}")));
            }
        }
        let top = s.x0.iter().filter(|p| p.1 > 0.0).map(|p| p.0).max().unwrap_or(0);
        if top > self.meanfield.m {
            return Err(ConfigError::new("simulation.x0", format!("support reaches type {top} > meanfield.M")));
        }
        if s.clt_block == 0 || s.clt_block > self.meanfield.m + 1 {
            return Err(ConfigError::new("simulation.clt_block", "must lie in 1..=M+1"));
        }
        self.tolerance()?;
        if let Some(dt) = self.lna.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(ConfigError::new("lna.dt", "must be positive"));
            }
        }
        self.lna.sigma0.to_matrix(self.lna.m)?;
        if !(self.exponents.r0 > 0.0 && self.exponents.r0.is_finite()) {
            return Err(ConfigError::new("exponents.r0", "must be positive"));
        }
        if let Some(z) = self.exponents.zeta {
            if !(z > 0.0 && z.is_finite()) {
                return Err(ConfigError::new("exponents.zeta", "must be positive"));
            }
        }
        Ok(())
    }
}
