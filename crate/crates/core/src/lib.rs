//! Density-dependent Markov population processes with countably many types.
//!
//! The crate simulates such processes exactly ([`process`]), instantiates them
//! on a structured metapopulation model ([`models`]), solves the deterministic
//! fluid limit ([`meanfield`]) and its Gaussian fluctuation limit ([`lna`]),
//! and measures how well simulations match both ([`diagnostics`]).

pub mod diagnostics;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod lna;
pub mod meanfield;
pub mod models;
pub mod ode;
pub mod process;
pub mod rng;
pub mod state;
pub mod stats;

pub use error::{Error, Result};
pub use models::{DemographicLaw, ModelConfig, ModelSpec};
pub use process::{JumpModel, RateTable, Trajectory};
pub use state::{DensityVector, JumpVector, SparseCounts};
