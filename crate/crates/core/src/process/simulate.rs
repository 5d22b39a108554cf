use std::collections::HashMap;

use super::trajectory::Recorder;
use super::{exp1, JumpModel, RecordMode, Trajectory, DEFAULT_EVENT_BUDGET};
use crate::error::{Error, Result};
use crate::rng::{keyed_rng, rng_from_seed, SimRng};
use crate::state::{JumpVector, SparseCounts};

#[derive(Clone, Debug)]
pub struct SimOptions {
    pub max_events: u64,
    pub record: RecordMode,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            max_events: DEFAULT_EVENT_BUDGET,
            record: RecordMode::Full,
        }
    }
}

impl SimOptions {
    pub fn grid(horizon: f64, points: usize) -> Self {
        Self {
            record: RecordMode::uniform_grid(horizon, points),
            ..Self::default()
        }
    }
}

fn check_args(scale: u64, horizon: f64) -> Result<()> {
    if scale == 0 {
        return Err(Error::InvalidInput("scale N must be at least 1".into()));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidInput(format!("horizon must be positive, got {horizon}")));
    }
    Ok(())
}

/// Gillespie direct method: one exponential holding time at the total rate,
/// then one categorical draw of the jump. Stops at the horizon or on absorption.
pub fn simulate_ssa<M: JumpModel + ?Sized>(
    model: &M,
    x0: &SparseCounts,
    scale: u64,
    horizon: f64,
    seed: u64,
    opts: &SimOptions,
) -> Result<Trajectory> {
    check_args(scale, horizon)?;
    let mut rng = rng_from_seed(seed);
    let mut rec = Recorder::new(opts.record.clone(), horizon)?;
    let mut state = x0.clone();
    let mut t = 0.0;
    let mut events = 0u64;
    rec.start(&state);
    loop {
        let total = model.total_rate(&state, scale)?;
        if !total.is_finite() {
            return Err(Error::RateOverflow { rate: total });
        }
        if total <= 0.0 {
            break;
        }
        let dt = exp1(&mut rng) / total;
        if t + dt >= horizon {
            break;
        }
        t += dt;
        events += 1;
        if events > opts.max_events {
            return Err(Error::EventBudget { limit: opts.max_events, time: t });
        }
        let jump = model.choose_jump(&state, scale, total, &mut rng)?;
        rec.before_jump(t, &state);
        state.apply(&jump)?;
        rec.after_jump(t, &state);
    }
    Ok(rec.finish(&state, scale, horizon, events))
}

/// Unit-rate Poisson process attached to one jump direction, run on its own
/// internal clock (the integrated rate of that jump so far).
struct PoissonClock {
    rng: SimRng,
    internal: f64,
    next_firing: f64,
}

impl PoissonClock {
    fn new(seed: u64, jump: &JumpVector) -> Self {
        let mut rng = keyed_rng(seed, "time-change", &jump.canonical_bytes());
        let first = exp1(&mut rng);
        Self {
            rng,
            internal: 0.0,
            next_firing: first,
        }
    }
}

/// Random time-change representation: `X_t = X_0 + sum_J J P_J(int_0^t N alpha_J(x_s) ds)`
/// with independent unit-rate Poisson processes `P_J`.
///
/// Each direction's stream is created on first use from a PRF of the seed and
/// the jump's canonical bytes, so directions that never become active cost
/// nothing and the result does not depend on enumeration order.
pub fn simulate_time_change<M: JumpModel + ?Sized>(
    model: &M,
    x0: &SparseCounts,
    scale: u64,
    horizon: f64,
    seed: u64,
    opts: &SimOptions,
) -> Result<Trajectory> {
    check_args(scale, horizon)?;
    let mut clocks: HashMap<JumpVector, PoissonClock> = HashMap::new();
    let mut rec = Recorder::new(opts.record.clone(), horizon)?;
    let mut state = x0.clone();
    let mut t = 0.0;
    let mut events = 0u64;
    rec.start(&state);
    loop {
        let table = model.rate_table(&state, scale)?;
        if table.is_empty() {
            break;
        }
        let mut best: Option<(usize, f64)> = None;
        for (k, (jump, rate)) in table.active().iter().enumerate() {
            let clock = clocks
                .entry(jump.clone())
                .or_insert_with(|| PoissonClock::new(seed, jump));
            let wait = (clock.next_firing - clock.internal) / rate;
            if best.is_none_or(|(_, w)| wait < w) {
                best = Some((k, wait));
            }
        }
        let (fire, wait) = best.expect("table is non-empty");
        let step = if t + wait >= horizon { horizon - t } else { wait };
        for (jump, rate) in table.active() {
            if let Some(c) = clocks.get_mut(jump) {
                c.internal += rate * step;
            }
        }
        if t + wait >= horizon {
            break;
        }
        t += wait;
        events += 1;
        if events > opts.max_events {
            return Err(Error::EventBudget { limit: opts.max_events, time: t });
        }
        let jump = &table.active()[fire].0;
        let clock = clocks.get_mut(jump).expect("clock created above");
        clock.internal = clock.next_firing;
        clock.next_firing += exp1(&mut clock.rng);
        rec.before_jump(t, &state);
        state.apply(jump)?;
        rec.after_jump(t, &state);
    }
    Ok(rec.finish(&state, scale, horizon, events))
}
