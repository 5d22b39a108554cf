//! Small Monte Carlo statistics toolkit: moments, quantiles, Kolmogorov–Smirnov
//! tests and a log–log regression with propagated standard errors.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1) as f64
}

/// Sample mean and its standard error.
pub fn mean_se(xs: &[f64]) -> (f64, f64) {
    (mean(xs), (variance(xs) / xs.len() as f64).sqrt())
}

/// Linear-interpolation quantile (the usual "type 7" definition).
pub fn quantile(xs: &[f64], p: f64) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let h = (v.len() - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    v[lo] + (h - lo as f64) * (v[hi] - v[lo])
}

pub fn normal_cdf(x: f64, mean: f64, sd: f64) -> f64 {
    Normal::new(mean, sd).map(|n| n.cdf(x)).unwrap_or(f64::NAN)
}

/// `P(K > lambda)` for the Kolmogorov distribution.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    // below 0.2 the survival is 1 to double precision and the series is slow
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

impl KsResult {
    pub fn passes(&self, level: f64) -> bool {
        self.p_value > level
    }
}

fn ks_p(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_survival((s + 0.12 + 0.11 / s) * d)
}

/// Two-sample Kolmogorov–Smirnov test (asymptotic p-value with the usual
/// small-sample correction).
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len(), b.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < na && j < nb {
        let x = a[i].min(b[j]);
        while i < na && a[i] <= x {
            i += 1;
        }
        while j < nb && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na as f64 - j as f64 / nb as f64).abs());
    }
    let n_eff = (na * nb) as f64 / (na + nb) as f64;
    KsResult { statistic: d, p_value: ks_p(d, n_eff) }
}

/// One-sample Kolmogorov–Smirnov test against a continuous `cdf`.
pub fn ks_one_sample(xs: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    let d = v
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max);
    KsResult { statistic: d, p_value: ks_p(d, n) }
}

/// Sample covariance (unbiased) of row vectors.
pub fn sample_covariance(rows: &[Vec<f64>]) -> DMatrix<f64> {
    let n = rows.len();
    let dim = rows.first().map_or(0, Vec::len);
    let mut mu = vec![0.0; dim];
    for r in rows {
        for (m, v) in mu.iter_mut().zip(r) {
            *m += v / n as f64;
        }
    }
    let mut c = DMatrix::zeros(dim, dim);
    for r in rows {
        for i in 0..dim {
            let di = r[i] - mu[i];
            for j in 0..dim {
                c[(i, j)] += di * (r[j] - mu[j]);
            }
        }
    }
    c / (n as f64 - 1.0)
}

/// Standard error of the sample covariance entry `(i, j)`, from the fourth
/// mixed moment: `Var((X_i - m_i)(X_j - m_j)) / n`.
pub fn covariance_se(rows: &[Vec<f64>], i: usize, j: usize) -> f64 {
    let n = rows.len() as f64;
    let mi = rows.iter().map(|r| r[i]).sum::<f64>() / n;
    let mj = rows.iter().map(|r| r[j]).sum::<f64>() / n;
    let prods: Vec<f64> = rows.iter().map(|r| (r[i] - mi) * (r[j] - mj)).collect();
    (variance(&prods) / n).sqrt()
}

/// Ordinary least-squares slope of `ys` on `xs`, with the standard error
/// propagated from independent per-point standard errors `y_se`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_se: f64,
}

pub fn fit_slope(xs: &[f64], ys: &[f64], y_se: &[f64]) -> SlopeFit {
    let mx = mean(xs);
    let my = mean(ys);
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let var: f64 = xs
        .iter()
        .zip(y_se)
        .map(|(x, s)| ((x - mx) / sxx).powi(2) * s * s)
        .sum();
    SlopeFit { slope, intercept: my - slope * mx, slope_se: var.sqrt() }
}

/// Slope of `log(mean)` against `log(n)`; the standard error of each
/// `log(mean)` is taken as `se / mean` (delta method).
pub fn log_log_slope(ns: &[f64], means: &[f64], ses: &[f64]) -> SlopeFit {
    let xs: Vec<f64> = ns.iter().map(|n| n.ln()).collect();
    let ys: Vec<f64> = means.iter().map(|m| m.ln()).collect();
    let lse: Vec<f64> = means.iter().zip(ses).map(|(m, s)| s / m).collect();
    fit_slope(&xs, &ys, &lse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from_seed;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn moments_and_quantiles() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(mean(&xs), 2.5);
        assert!((variance(&xs) - 5.0 / 3.0).abs() < 1e-15);
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 4.0);
        assert!((quantile(&xs, 0.5) - 2.5).abs() < 1e-15);
        assert!((quantile(&[3.0, 1.0, 2.0], 0.25) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn kolmogorov_reference_values() {
        // classical critical values of the Kolmogorov distribution
        assert!((kolmogorov_survival(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_survival(1.6276) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_survival(1.2238) - 0.10).abs() < 1e-4);
        assert_eq!(kolmogorov_survival(0.0), 1.0);
    }

    #[test]
    fn ks_detects_shift_and_accepts_same_law() {
        let mut rng = rng_from_seed(3);
        let a: Vec<f64> = (0..400).map(|_| StandardNormal.sample(&mut rng)).collect();
        let b: Vec<f64> = (0..400).map(|_| StandardNormal.sample(&mut rng)).collect();
        let shifted: Vec<f64> = b.iter().map(|x| x + 0.5).collect();
        assert!(ks_two_sample(&a, &b).passes(0.01));
        assert!(!ks_two_sample(&a, &shifted).passes(0.01));
        assert!(ks_one_sample(&a, |x| normal_cdf(x, 0.0, 1.0)).passes(0.01));
        assert!(!ks_one_sample(&a, |x| normal_cdf(x, 0.0, 0.5)).passes(0.01));
    }

    #[test]
    fn ks_statistic_by_hand() {
        let r = ks_two_sample(&[1.0, 2.0, 3.0], &[2.5, 3.5, 4.5]);
        assert!((r.statistic - 2.0 / 3.0).abs() < 1e-15);
        let r = ks_one_sample(&[0.5], |x| x);
        assert!((r.statistic - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ks_level_is_calibrated() {
        let mut rng = rng_from_seed(11);
        let trials = 400;
        let rejections = (0..trials)
            .filter(|_| {
                let a: Vec<f64> = (0..100).map(|_| rng.random::<f64>()).collect();
                let b: Vec<f64> = (0..100).map(|_| rng.random::<f64>()).collect();
                !ks_two_sample(&a, &b).passes(0.05)
            })
            .count();
        // the asymptotic test is slightly conservative
        assert!(rejections < 40, "{rejections} rejections at level 0.05");
    }

    #[test]
    fn slope_fit_exact_line() {
        let ns = [100.0, 400.0, 1600.0, 6400.0];
        let means: Vec<f64> = ns.iter().map(|n: &f64| 3.0 * n.powf(-0.5)).collect();
        let fit = log_log_slope(&ns, &means, &[0.01; 4]);
        assert!((fit.slope + 0.5).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
        // halving every standard error halves the slope's
        let half = log_log_slope(&ns, &means, &[0.005; 4]);
        assert!((fit.slope_se / half.slope_se - 2.0).abs() < 1e-12);
    }

    #[test]
    fn covariance_of_known_rows() {
        let rows = vec![vec![1.0, 2.0], vec![3.0, 6.0], vec![5.0, 10.0]];
        let c = sample_covariance(&rows);
        assert!((c[(0, 0)] - 4.0).abs() < 1e-14);
        assert!((c[(0, 1)] - 8.0).abs() < 1e-14);
        assert!((c[(1, 1)] - 16.0).abs() < 1e-14);
    }
}
