//! The structured metapopulation model: `N` patches, `X^i` of them holding
//! `i` individuals, with within-patch births and deaths, migration between
//! patches and patch catastrophes.

mod assumptions;
mod drift;
mod rates;
mod weights;

use serde::{Deserialize, Serialize};

pub use assumptions::{check_assumptions, sample_states, AssumptionReport, CheckEntry};
pub use drift::{
    drift_dd_f, drift_df, drift_f, drift_f_quadratic, jump_drift, partial_df, quadratic_bound,
    truncated_a, TruncatedOperator,
};
pub use rates::{alpha, transitions_for, Transition};
pub(crate) use rates::transitions_from;
pub use weights::{moment_s, moment_uv, mu, nu, weighted_norm, Betas, WeightStructure, DEFAULT_R0};

use crate::error::{Error, Result};

/// Per-capita birth and death schedules `(b_i)`, `(d_i)`, `i >= 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum DemographicLaw {
    /// `b_i = b`, `d_i = d` (Ricker-type, bounded rates).
    Constant { b: f64, d: f64 },
    /// `b_i = b`, `d_i = d + c i` (Verhulst-type).
    Logistic { b: f64, d: f64, c: f64 },
    /// Tables starting at `i = 1`, held constant beyond `cap` (or the table end).
    Custom { b: Vec<f64>, d: Vec<f64>, cap: usize },
}

impl DemographicLaw {
    pub fn birth(&self, i: usize) -> f64 {
        match self {
            DemographicLaw::Constant { b, .. } | DemographicLaw::Logistic { b, .. } => *b,
            DemographicLaw::Custom { b, cap, .. } => table_at(b, *cap, i),
        }
    }

    pub fn death(&self, i: usize) -> f64 {
        match self {
            DemographicLaw::Constant { d, .. } => *d,
            DemographicLaw::Logistic { d, c, .. } => d + c * i as f64,
            DemographicLaw::Custom { d, cap, .. } => table_at(d, *cap, i),
        }
    }

    /// Index beyond which both schedules are affine in `i`; `w` is attained at or below it.
    fn last_varying_index(&self) -> usize {
        match self {
            DemographicLaw::Constant { .. } | DemographicLaw::Logistic { .. } => 1,
            DemographicLaw::Custom { b, d, cap } => (*cap).min(b.len().max(d.len())).max(1),
        }
    }
}

fn table_at(table: &[f64], cap: usize, i: usize) -> f64 {
    let last = cap.min(table.len());
    if last == 0 {
        return 0.0;
    }
    table[i.clamp(1, last) - 1]
}

/// Full parameterisation of the metapopulation model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub law: DemographicLaw,
    /// Per-capita migration rate.
    pub gamma: f64,
    /// Probability that a migrant survives to reach its new patch.
    pub rho: f64,
    /// Catastrophe rate per patch.
    pub kappa: f64,
}

impl ModelSpec {
    pub fn new(law: DemographicLaw, gamma: f64, rho: f64, kappa: f64) -> Result<Self> {
        let m = Self { law, gamma, rho, kappa };
        m.validate()?;
        Ok(m)
    }

    /// Logistic defaults used throughout the studies and the CLI.
    pub fn default_logistic() -> Self {
        Self {
            law: DemographicLaw::Logistic { b: 1.5, d: 0.5, c: 0.1 },
            gamma: 0.5,
            rho: 0.8,
            kappa: 0.2,
        }
    }

    /// All rates zero: every state is absorbing.
    pub fn frozen() -> Self {
        Self {
            law: DemographicLaw::Constant { b: 0.0, d: 0.0 },
            gamma: 0.0,
            rho: 0.0,
            kappa: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidInput(what.to_string()));
        let nonneg = |v: f64| v.is_finite() && v >= 0.0;
        if !nonneg(self.gamma) {
            return bad("gamma must be finite and non-negative");
        }
        if !nonneg(self.kappa) {
            return bad("kappa must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return bad("rho must lie in [0, 1]");
        }
        match &self.law {
            DemographicLaw::Constant { b, d } => {
                if !nonneg(*b) || !nonneg(*d) {
                    return bad("b and d must be finite and non-negative");
                }
            }
            DemographicLaw::Logistic { b, d, c } => {
                if !nonneg(*b) || !nonneg(*d) || !nonneg(*c) {
                    return bad("b, d and c must be finite and non-negative");
                }
            }
            DemographicLaw::Custom { b, d, cap } => {
                if b.is_empty() || d.is_empty() {
                    return bad("custom birth and death tables must be non-empty");
                }
                if *cap == 0 {
                    return bad("custom table cap must be at least 1");
                }
                if !b.iter().chain(d).all(|&v| nonneg(v)) {
                    return bad("custom birth and death rates must be finite and non-negative");
                }
            }
        }
        Ok(())
    }

    pub fn birth(&self, i: usize) -> f64 {
        self.law.birth(i)
    }

    pub fn death(&self, i: usize) -> f64 {
        self.law.death(i)
    }

    /// `w = max_{i >= 1} (b_i - d_i - gamma - kappa)_+`.
    pub fn growth_bound(&self) -> f64 {
        (1..=self.law.last_varying_index())
            .map(|i| self.birth(i) - self.death(i) - self.gamma - self.kappa)
            .fold(0.0, f64::max)
    }

    pub fn weights(&self) -> WeightStructure {
        WeightStructure::for_model(self, weights::DEFAULT_R0)
    }

    /// `sum_l |J^l|` is at most 4 (migration moves two patches by one each).
    pub const JUMP_BOUND: u32 = 4;
}

/// JSON model configuration: `{law, b, d, c, gamma, rho, kappa, M_cap}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub law: LawName,
    #[serde(default = "default_b")]
    pub b: RateParam,
    #[serde(default = "default_d")]
    pub d: RateParam,
    #[serde(default = "default_c")]
    pub c: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(rename = "M_cap", default, skip_serializing_if = "Option::is_none")]
    pub m_cap: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LawName {
    Constant,
    Logistic,
    Custom,
}

/// A scalar rate or a table indexed from `i = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateParam {
    Scalar(f64),
    Table(Vec<f64>),
}

fn default_b() -> RateParam {
    RateParam::Scalar(1.5)
}
fn default_d() -> RateParam {
    RateParam::Scalar(0.5)
}
fn default_c() -> f64 {
    0.1
}
fn default_gamma() -> f64 {
    0.5
}
fn default_rho() -> f64 {
    0.8
}
fn default_kappa() -> f64 {
    0.2
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            law: LawName::Logistic,
            b: default_b(),
            d: default_d(),
            c: default_c(),
            gamma: default_gamma(),
            rho: default_rho(),
            kappa: default_kappa(),
            m_cap: None,
        }
    }
}

impl ModelConfig {
    pub fn to_spec(&self) -> Result<ModelSpec> {
        let scalar = |p: &RateParam, key: &str| match p {
            RateParam::Scalar(v) => Ok(*v),
            RateParam::Table(_) => Err(Error::InvalidInput(format!(
                "`{key}` must be a number for the {:?} law",
                self.law
            ))),
        };
        let table = |p: &RateParam| match p {
            RateParam::Scalar(v) => vec![*v],
            RateParam::Table(t) => t.clone(),
        };
        let law = match self.law {
            LawName::Constant => DemographicLaw::Constant {
                b: scalar(&self.b, "b")?,
                d: scalar(&self.d, "d")?,
            },
            LawName::Logistic => DemographicLaw::Logistic {
                b: scalar(&self.b, "b")?,
                d: scalar(&self.d, "d")?,
                c: self.c,
            },
            LawName::Custom => {
                let (b, d) = (table(&self.b), table(&self.d));
                let cap = self.m_cap.unwrap_or(b.len().max(d.len()));
                DemographicLaw::Custom { b, d, cap }
            }
        };
        ModelSpec::new(law, self.gamma, self.rho, self.kappa)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn growth_bound_examples() {
        let m = ModelSpec::new(DemographicLaw::Constant { b: 2.0, d: 1.0 }, 0.5, 1.0, 0.3).unwrap();
        assert!((m.growth_bound() - 0.2).abs() < 1e-15);
        let m = ModelSpec::default_logistic();
        // b - d - c - gamma - kappa at i = 1
        assert!((m.growth_bound() - 0.2).abs() < 1e-12);
        let m = ModelSpec::new(DemographicLaw::Constant { b: 0.1, d: 1.0 }, 0.5, 1.0, 0.3).unwrap();
        assert_eq!(m.growth_bound(), 0.0);
    }

    #[test]
    fn custom_tables_extrapolate_constantly() {
        let law = DemographicLaw::Custom { b: vec![1.0, 2.0, 3.0], d: vec![0.5], cap: 2 };
        assert_eq!(law.birth(1), 1.0);
        assert_eq!(law.birth(2), 2.0);
        assert_eq!(law.birth(3), 2.0);
        assert_eq!(law.birth(100), 2.0);
        assert_eq!(law.death(7), 0.5);
        let m = ModelSpec::new(law, 0.1, 0.5, 0.1).unwrap();
        assert!((m.growth_bound() - 1.3).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        assert!(ModelSpec::new(DemographicLaw::Constant { b: 1.0, d: 1.0 }, 1.0, 1.5, 0.0).is_err());
        assert!(ModelSpec::new(DemographicLaw::Constant { b: -1.0, d: 1.0 }, 1.0, 0.5, 0.0).is_err());
        assert!(ModelSpec::new(DemographicLaw::Constant { b: 1.0, d: 1.0 }, f64::NAN, 0.5, 0.0).is_err());
    }

    #[test]
    fn config_parsing() {
        let c: ModelConfig = serde_json::from_str(r#"{"law":"constant","b":2,"d":1}"#).unwrap();
        let m = c.to_spec().unwrap();
        assert_eq!(m.law, DemographicLaw::Constant { b: 2.0, d: 1.0 });
        let err = serde_json::from_str::<ModelConfig>(r#"{"b":2}"#).unwrap_err();
        assert!(err.to_string().contains("law"));
        let err = serde_json::from_str::<ModelConfig>(r#"{"law":"constant","beta":2}"#).unwrap_err();
        assert!(err.to_string().contains("beta"));
        let c: ModelConfig =
            serde_json::from_str(r#"{"law":"custom","b":[1,2],"d":[1],"M_cap":1}"#).unwrap();
        assert!(matches!(c.to_spec().unwrap().law, DemographicLaw::Custom { cap: 1, .. }));
        let c: ModelConfig = serde_json::from_str(r#"{"law":"logistic","b":[1,2]}"#).unwrap();
        assert!(c.to_spec().is_err());
        assert_eq!(ModelConfig::default().to_spec().unwrap(), ModelSpec::default_logistic());
    }
}
