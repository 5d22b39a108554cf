use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{DensityVector, SparseCounts};

/// What a simulator keeps of a sample path.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RecordMode {
    /// Every jump.
    Full,
    /// The state at each of the given times (increasing, starting at 0,
    /// none beyond the horizon).
    Grid(Vec<f64>),
}

impl RecordMode {
    /// `points` equally spaced times covering `[0, horizon]`.
    pub fn uniform_grid(horizon: f64, points: usize) -> Self {
        RecordMode::Grid(uniform_grid(horizon, points))
    }
}

pub fn uniform_grid(horizon: f64, points: usize) -> Vec<f64> {
    let points = points.max(2);
    (0..points)
        .map(|k| horizon * k as f64 / (points - 1) as f64)
        .collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SparseCounts>,
    pub scale: u64,
    pub horizon: f64,
    pub full: bool,
    /// Number of jumps simulated, recorded or not.
    pub events: u64,
}

impl Trajectory {
    pub fn initial(&self) -> &SparseCounts {
        &self.states[0]
    }

    pub fn last(&self) -> &SparseCounts {
        self.states.last().expect("trajectory always holds the initial state")
    }

    /// State at time `t`, treating the path as right-continuous and piecewise constant.
    pub fn state_at(&self, t: f64) -> Result<&SparseCounts> {
        if t < 0.0 || t > self.horizon * (1.0 + 1e-12) {
            return Err(Error::HorizonMismatch(format!(
                "t = {t} outside [0, {}]",
                self.horizon
            )));
        }
        let k = self.times.partition_point(|&s| s <= t);
        Ok(&self.states[k.max(1) - 1])
    }

    pub fn density_at(&self, t: f64) -> Result<DensityVector> {
        Ok(self.state_at(t)?.density(self.scale))
    }
}

/// Incremental builder used by the simulators.
pub(crate) struct Recorder {
    mode: RecordMode,
    next_grid: usize,
    times: Vec<f64>,
    states: Vec<SparseCounts>,
}

impl Recorder {
    pub fn new(mode: RecordMode, horizon: f64) -> Result<Self> {
        if let RecordMode::Grid(g) = &mode {
            let ok = !g.is_empty()
                && g[0] == 0.0
                && g.windows(2).all(|w| w[0] < w[1])
                && g.last().is_some_and(|&t| t <= horizon);
            if !ok {
                return Err(Error::InvalidInput(
                    "recording grid must be increasing, start at 0 and end by the horizon".into(),
                ));
            }
        }
        Ok(Self {
            mode,
            next_grid: 0,
            times: Vec::new(),
            states: Vec::new(),
        })
    }

    pub fn start(&mut self, x0: &SparseCounts) {
        match &self.mode {
            RecordMode::Full => {
                self.times.push(0.0);
                self.states.push(x0.clone());
            }
            RecordMode::Grid(_) => self.flush_until(0.0, x0, true),
        }
    }

    /// Call before applying a jump at time `t`, with the pre-jump state.
    pub fn before_jump(&mut self, t: f64, state: &SparseCounts) {
        if matches!(self.mode, RecordMode::Grid(_)) {
            self.flush_until(t, state, false);
        }
    }

    /// Call after applying a jump at time `t`.
    pub fn after_jump(&mut self, t: f64, state: &SparseCounts) {
        if matches!(self.mode, RecordMode::Full) {
            self.times.push(t);
            self.states.push(state.clone());
        }
    }

    fn flush_until(&mut self, t: f64, state: &SparseCounts, inclusive: bool) {
        let RecordMode::Grid(grid) = &self.mode else {
            return;
        };
        while self.next_grid < grid.len() {
            let g = grid[self.next_grid];
            if g < t || (inclusive && g <= t) {
                self.times.push(g);
                self.states.push(state.clone());
                self.next_grid += 1;
            } else {
                break;
            }
        }
    }

    pub fn finish(mut self, state: &SparseCounts, scale: u64, horizon: f64, events: u64) -> Trajectory {
        let full = matches!(self.mode, RecordMode::Full);
        if !full {
            self.flush_until(f64::INFINITY, state, true);
        }
        Trajectory {
            times: self.times,
            states: self.states,
            scale,
            horizon,
            full,
            events,
        }
    }
}
