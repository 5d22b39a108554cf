use super::{JumpModel, Trajectory};
use crate::error::{Error, Result};
use crate::state::DensityVector;

/// `m_t = x_t - x_0 - int_0^t sum_J J alpha_J(x_s) ds` at every recorded jump time.
///
/// Rates are constant between jumps, so the compensator integral is a finite
/// sum of drift-times-holding-time terms and is exact.
pub fn martingale_path<M: JumpModel + ?Sized>(
    traj: &Trajectory,
    model: &M,
) -> Result<Vec<DensityVector>> {
    Ok(compensated(traj, model, false)?.0)
}

/// `m_T` at the trajectory's horizon.
pub fn martingale_terminal<M: JumpModel + ?Sized>(
    traj: &Trajectory,
    model: &M,
) -> Result<DensityVector> {
    Ok(compensated(traj, model, true)?.1)
}

fn compensated<M: JumpModel + ?Sized>(
    traj: &Trajectory,
    model: &M,
    to_horizon: bool,
) -> Result<(Vec<DensityVector>, DensityVector)> {
    if !traj.full {
        return Err(Error::InvalidInput(
            "martingale needs a fully recorded trajectory".into(),
        ));
    }
    let x0 = traj.initial().density(traj.scale);
    let mut compensator = DensityVector::default();
    let mut path = Vec::with_capacity(traj.times.len());
    path.push(DensityVector::default());
    for k in 1..traj.times.len() {
        let dt = traj.times[k] - traj.times[k - 1];
        accumulate(&mut compensator, &model.drift(&traj.states[k - 1], traj.scale)?, dt);
        let x = traj.states[k].density(traj.scale);
        path.push(x.sub(&x0).sub(&compensator));
    }
    let terminal = if to_horizon {
        let t_last = *traj.times.last().expect("non-empty");
        let dt = traj.horizon - t_last;
        if dt > 0.0 {
            accumulate(&mut compensator, &model.drift(traj.last(), traj.scale)?, dt);
        }
        traj.last().density(traj.scale).sub(&x0).sub(&compensator)
    } else {
        path.last().cloned().unwrap_or_default()
    };
    Ok((path, terminal))
}

fn accumulate(acc: &mut DensityVector, drift: &DensityVector, dt: f64) {
    for (j, &v) in drift.as_slice().iter().enumerate() {
        if v != 0.0 {
            acc.add_at(j, v * dt);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{simulate_ssa, SimOptions, ZeroRateModel};
    use crate::state::SparseCounts;

    #[test]
    fn zero_rate_martingale_vanishes() {
        let x0 = SparseCounts::from_pairs([(0, 3), (2, 7)]);
        let tr = simulate_ssa(&ZeroRateModel, &x0, 10, 1.0, 0, &SimOptions::default()).unwrap();
        let path = martingale_path(&tr, &ZeroRateModel).unwrap();
        assert_eq!(path.len(), 1);
        assert!(path[0].as_slice().iter().all(|&v| v == 0.0));
        let m = martingale_terminal(&tr, &ZeroRateModel).unwrap();
        assert!(m.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn grid_trajectory_rejected() {
        let x0 = SparseCounts::from_pairs([(0, 3)]);
        let tr = simulate_ssa(&ZeroRateModel, &x0, 3, 1.0, 0, &SimOptions::grid(1.0, 5)).unwrap();
        assert!(martingale_path(&tr, &ZeroRateModel).is_err());
    }
}
