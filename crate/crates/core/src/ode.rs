//! Adaptive Dormand–Prince 5(4) integration with exact output times.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mixed error tolerance: a component passes when its local error estimate
/// is below `abs + rel * |y|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
}

impl Tolerance {
    pub fn new(rel: f64, abs: f64) -> Result<Self> {
        let t = Self { rel, abs };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if !ok(self.rel) || !ok(self.abs) || self.rel + self.abs == 0.0 {
            return Err(Error::InvalidInput(format!(
                "tolerances must be non-negative and not both zero (rel {}, abs {})",
                self.rel, self.abs
            )));
        }
        Ok(())
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Self { rel: 1e-9, abs: 1e-12 }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct OdeOptions {
    pub tol: Tolerance,
    pub max_steps: usize,
    /// Largest step ever taken (`inf` for none).
    pub max_step: f64,
}

impl OdeOptions {
    pub fn with_tol(tol: Tolerance) -> Self {
        Self { tol, max_steps: 20_000_000, max_step: f64::INFINITY }
    }
}

#[derive(Clone, Debug, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

// Dormand–Prince tableau.
const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate `y' = f(t, y)` from `(t0, y0)`, returning the state at each of
/// `outputs` (non-decreasing, all `>= t0`). Steps are shortened to land on
/// every output time exactly. `post_step` may project the accepted state
/// (symmetrisation, renormalisation); pass `|_, _| {}` for none.
pub fn integrate<F, P>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    outputs: &[f64],
    opts: &OdeOptions,
    mut post_step: P,
) -> Result<(Vec<Vec<f64>>, OdeStats)>
where
    F: FnMut(f64, &[f64], &mut [f64]),
    P: FnMut(f64, &mut [f64]),
{
    opts.tol.validate()?;
    if outputs.windows(2).any(|w| w[1] < w[0]) || outputs.first().is_some_and(|&t| t < t0) {
        return Err(Error::InvalidInput("output times must be sorted and >= t0".into()));
    }
    let n = y0.len();
    let mut stats = OdeStats::default();
    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    let mut y_new = vec![0.0; n];
    let mut out = Vec::with_capacity(outputs.len());

    f(t, &y, &mut k[0]);
    stats.evaluations += 1;
    let mut h = initial_step(&y, &k[0], opts);
    let mut last_err: f64 = 1e-4;

    for &t_out in outputs {
        while t < t_out {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(Error::StepUnderflow { time: t, step: h });
            }
            let remaining = t_out - t;
            let landing = h >= remaining * (1.0 - 1e-12);
            let step = if landing { remaining } else { h.min(opts.max_step) };
            if step <= 8.0 * f64::EPSILON * t.abs().max(1.0) && !landing {
                return Err(Error::StepUnderflow { time: t, step });
            }
            for s in 1..7 {
                for j in 0..n {
                    let mut acc = 0.0;
                    for (r, kr) in k.iter().enumerate().take(s) {
                        acc += A[s][r] * kr[j];
                    }
                    stage[j] = y[j] + step * acc;
                }
                f(t + C[s] * step, &stage, &mut k[s]);
                stats.evaluations += 1;
                if s == 6 {
                    y_new.copy_from_slice(&stage);
                }
            }
            let mut err = 0.0;
            for j in 0..n {
                let mut e = 0.0;
                for (r, kr) in k.iter().enumerate() {
                    e += E[r] * kr[j];
                }
                let sc = opts.tol.abs + opts.tol.rel * y[j].abs().max(y_new[j].abs());
                let q = step * e / sc;
                err += q * q;
            }
            let err = if n == 0 { 0.0 } else { (err / n as f64).sqrt() };
            if !err.is_finite() {
                return Err(Error::BlowUp { time: t });
            }
            if err <= 1.0 {
                stats.accepted += 1;
                t = if landing { t_out } else { t + step };
                post_step(t, &mut y_new);
                std::mem::swap(&mut y, &mut y_new);
                // FSAL: the last stage is f at the accepted point, unless projected
                f(t, &y, &mut k[0]);
                stats.evaluations += 1;
                // PI controller
                let fac = 0.9 * err.max(1e-10).powf(-0.7 / 5.0) * last_err.powf(0.4 / 5.0);
                // a short landing step says nothing about the step we could take
                let base = if landing { h.max(step) } else { step };
                h = base * fac.clamp(0.2, 5.0);
                last_err = err.max(1e-4);
            } else {
                stats.rejected += 1;
                h = step * (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
            }
        }
        out.push(y.clone());
    }
    Ok((out, stats))
}

fn initial_step(y: &[f64], dy: &[f64], opts: &OdeOptions) -> f64 {
    let sc = |v: f64| opts.tol.abs + opts.tol.rel * v.abs();
    let d0 = y.iter().map(|&v| (v / sc(v)).powi(2)).sum::<f64>().sqrt();
    let d1 = y
        .iter()
        .zip(dy)
        .map(|(&v, &d)| (d / sc(v)).powi(2))
        .sum::<f64>()
        .sqrt();
    let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h.min(opts.max_step).max(1e-10)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay_hits_outputs() {
        let opts = OdeOptions::with_tol(Tolerance::new(1e-10, 1e-13).unwrap());
        let times = [0.0, 0.3, 1.0, 1.0, 2.5];
        let (ys, _) =
            integrate(|_, y, d| d[0] = -2.0 * y[0], 0.0, &[1.0], &times, &opts, |_, _| {}).unwrap();
        for (t, y) in times.iter().zip(&ys) {
            assert!((y[0] - (-2.0 * t).exp()).abs() < 1e-9, "t={t}");
        }
    }

    #[test]
    fn harmonic_oscillator_error_tracks_tolerance() {
        let run = |tol: f64| {
            let opts = OdeOptions::with_tol(Tolerance::new(tol, tol * 1e-3).unwrap());
            let (ys, _) = integrate(
                |_, y, d| {
                    d[0] = y[1];
                    d[1] = -y[0];
                },
                0.0,
                &[1.0, 0.0],
                &[10.0],
                &opts,
                |_, _| {},
            )
            .unwrap();
            (ys[0][0] - 10f64.cos()).abs()
        };
        let (coarse, fine) = (run(1e-6), run(1e-10));
        assert!(fine < 1e-8);
        assert!(fine < coarse);
    }

    #[test]
    fn time_dependent_rhs() {
        let opts = OdeOptions::with_tol(Tolerance::default());
        let (ys, _) = integrate(|t, _, d| d[0] = t.cos(), 0.0, &[0.0], &[2.0], &opts, |_, _| {}).unwrap();
        assert!((ys[0][0] - 2f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn blow_up_is_reported() {
        let opts = OdeOptions::with_tol(Tolerance::default());
        let r = integrate(|_, y, d| d[0] = y[0] * y[0], 0.0, &[1.0], &[2.0], &opts, |_, _| {});
        assert!(matches!(r, Err(Error::StepUnderflow { .. }) | Err(Error::BlowUp { .. })));
    }

    #[test]
    fn rejects_unsorted_outputs() {
        let opts = OdeOptions::with_tol(Tolerance::default());
        assert!(integrate(|_, _, _| {}, 0.0, &[1.0], &[1.0, 0.5], &opts, |_, _| {}).is_err());
        assert!(Tolerance::new(0.0, 0.0).is_err());
    }
}
