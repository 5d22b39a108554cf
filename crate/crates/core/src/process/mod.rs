//! Exact simulation of density-dependent Markov jump processes
//! `X -> X + J` at rate `N alpha_J(X / N)` over a countable type set.

mod martingale;
mod simulate;
mod trajectory;

use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

pub use martingale::{martingale_path, martingale_terminal};
pub use simulate::{simulate_ssa, simulate_time_change, SimOptions};
pub use trajectory::{uniform_grid, RecordMode, Trajectory};

use crate::error::{Error, Result};
use crate::rng::SimRng;
use crate::state::{DensityVector, JumpVector, SparseCounts};

/// Default cap on the number of events in a single trajectory.
pub const DEFAULT_EVENT_BUDGET: u64 = 100_000_000;

/// Jumps available from one state, with their rates (already scaled by `N`).
///
/// Entries are sorted by the canonical order of `JumpVector`, contain no
/// duplicates, no null jumps and no zero rates.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RateTable {
    active: Vec<(JumpVector, f64)>,
    total_rate: f64,
}

impl RateTable {
    pub fn active(&self) -> &[(JumpVector, f64)] {
        &self.active
    }

    pub fn total_rate(&self) -> f64 {
        self.total_rate
    }

    pub fn is_empty(&self) -> bool {
        self.active.is_empty()
    }

    pub fn len(&self) -> usize {
        self.active.len()
    }

    pub fn rate_of(&self, jump: &JumpVector) -> f64 {
        self.active
            .binary_search_by(|(j, _)| j.cmp(jump))
            .map_or(0.0, |k| self.active[k].1)
    }
}

/// Accumulates `(jump, rate)` contributions, merging repeated jumps.
#[derive(Default)]
pub struct RateTableBuilder {
    rates: BTreeMap<JumpVector, f64>,
}

impl RateTableBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, jump: JumpVector, rate: f64) -> Result<()> {
        if !rate.is_finite() || rate < 0.0 {
            return Err(Error::RateOverflow { rate });
        }
        if rate > 0.0 && !jump.is_zero() {
            *self.rates.entry(jump).or_insert(0.0) += rate;
        }
        Ok(())
    }

    pub fn build(self) -> Result<RateTable> {
        let active: Vec<_> = self.rates.into_iter().collect();
        let total_rate: f64 = active.iter().map(|(_, r)| r).sum();
        if !total_rate.is_finite() {
            return Err(Error::RateOverflow { rate: total_rate });
        }
        Ok(RateTable { active, total_rate })
    }
}

/// A density-dependent jump model. Implementors must give zero rate to any
/// jump that would make a count negative.
///
/// Only `rate_table` is required. The direct-method hooks `total_rate` and
/// `choose_jump`, and `drift`, default to scanning the table; models with
/// structure (such as factorised migration) override them for speed.
pub trait JumpModel: Sync {
    fn rate_table(&self, state: &SparseCounts, scale: u64) -> Result<RateTable>;

    fn total_rate(&self, state: &SparseCounts, scale: u64) -> Result<f64> {
        Ok(self.rate_table(state, scale)?.total_rate())
    }

    /// Draws a jump with probability proportional to its rate.
    fn choose_jump(
        &self,
        state: &SparseCounts,
        scale: u64,
        _total_rate: f64,
        rng: &mut SimRng,
    ) -> Result<JumpVector> {
        let table = self.rate_table(state, scale)?;
        categorical(&table, rng)
            .cloned()
            .ok_or_else(|| Error::InvalidInput("no jump has positive rate".into()))
    }

    /// `sum_J J alpha_J(X/N)` computed from the rates actually used by the
    /// simulator, in density units.
    fn drift(&self, state: &SparseCounts, scale: u64) -> Result<DensityVector> {
        let table = self.rate_table(state, scale)?;
        let mut out = DensityVector::default();
        let n = scale as f64;
        for (jump, rate) in table.active() {
            for &(j, d) in jump.entries() {
                out.add_at(j, f64::from(d) * rate / n);
            }
        }
        Ok(out)
    }
}

/// Inverse-CDF draw from a rate table.
pub fn categorical<'a>(table: &'a RateTable, rng: &mut SimRng) -> Option<&'a JumpVector> {
    let last = table.active.last()?;
    let target = rng.random::<f64>() * table.total_rate;
    let mut acc = 0.0;
    for (jump, rate) in &table.active {
        acc += rate;
        if target < acc {
            return Some(jump);
        }
    }
    Some(&last.0)
}

pub(crate) fn exp1(rng: &mut SimRng) -> f64 {
    Exp1.sample(rng)
}

/// A model with no transitions at all; every state is absorbing.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroRateModel;

impl JumpModel for ZeroRateModel {
    fn rate_table(&self, _state: &SparseCounts, _scale: u64) -> Result<RateTable> {
        Ok(RateTable::default())
    }
}

/// Fixed jumps at constant rates `N * lambda_J`, switched off whenever the
/// jump is infeasible from the current state.
#[derive(Clone, Debug)]
pub struct ConstantRateModel {
    pub jumps: Vec<(JumpVector, f64)>,
}

impl JumpModel for ConstantRateModel {
    fn rate_table(&self, state: &SparseCounts, scale: u64) -> Result<RateTable> {
        let mut b = RateTableBuilder::new();
        for (jump, lambda) in &self.jumps {
            if jump.feasible_from(state) {
                b.push(jump.clone(), lambda * scale as f64)?;
            }
        }
        b.build()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;

    #[test]
    fn builder_merges_and_drops() {
        let mut b = RateTableBuilder::new();
        let j = JumpVector::transfer(1, 0);
        b.push(j.clone(), 1.5).unwrap();
        b.push(j.clone(), 0.5).unwrap();
        b.push(JumpVector::default(), 3.0).unwrap();
        b.push(JumpVector::transfer(0, 1), 0.0).unwrap();
        let t = b.build().unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t.rate_of(&j), 2.0);
        assert_eq!(t.total_rate(), 2.0);
    }

    #[test]
    fn builder_rejects_non_finite() {
        let mut b = RateTableBuilder::new();
        assert!(matches!(
            b.push(JumpVector::transfer(1, 0), f64::INFINITY),
            Err(Error::RateOverflow { .. })
        ));
        assert!(b.push(JumpVector::transfer(1, 0), -1.0).is_err());
    }

    #[test]
    fn categorical_frequencies() {
        let mut b = RateTableBuilder::new();
        b.push(JumpVector::transfer(1, 0), 1.0).unwrap();
        b.push(JumpVector::transfer(0, 1), 3.0).unwrap();
        let t = b.build().unwrap();
        let mut rng = rng_from_seed(3);
        let hits = (0..40_000)
            .filter(|_| *categorical(&t, &mut rng).unwrap() == JumpVector::transfer(0, 1))
            .count();
        let p = hits as f64 / 40_000.0;
        assert!((p - 0.75).abs() < 4.0 * (0.75f64 * 0.25 / 40_000.0).sqrt());
    }
}
