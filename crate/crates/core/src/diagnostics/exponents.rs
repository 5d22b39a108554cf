use serde::{Deserialize, Serialize};

use crate::models::Betas;

/// Exponents of the coupling error `N^{-b1}` (in sup-norm) and the failure
/// probability `N^{-b2}` for a given `zeta`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentReport {
    pub betas: Betas,
    pub r0: f64,
    pub zeta: f64,
    pub b1: f64,
    pub b2: f64,
    /// `4 (b2 + b3 + b4) + 2 b5`.
    pub threshold: f64,
    /// `1/r0 < zeta < 1/threshold`.
    pub feasible: bool,
}

/// `b1 = min{1/4 - zeta (beta2 + beta3 + beta4 + beta5/2), zeta (r0 - beta2 - 2(beta3 + beta4)) / 2}`,
/// `b2 = min{zeta r0 - 1, 1}`.
pub fn exponent_calc(betas: Betas, r0: f64, zeta: f64) -> ExponentReport {
    let Betas { b2: beta2, b3: beta3, b4: beta4, b5: beta5, .. } = betas;
    let b1 = (0.25 - zeta * (beta2 + beta3 + beta4 + beta5 / 2.0))
        .min(zeta * (r0 - beta2 - 2.0 * (beta3 + beta4)) / 2.0);
    let b2 = (zeta * r0 - 1.0).min(1.0);
    let threshold = betas.r0_threshold();
    let feasible = zeta * r0 > 1.0 && zeta * threshold < 1.0;
    ExponentReport { betas, r0, zeta, b1, b2, threshold, feasible }
}

/// Whether any `zeta` is feasible, i.e. `r0` exceeds the threshold.
pub fn r0_admissible(betas: Betas, r0: f64) -> bool {
    r0 > betas.r0_threshold()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logistic() -> Betas {
        Betas::new(1.0, 2.0, 1.0, 2.0, 1.0)
    }

    #[test]
    fn logistic_threshold() {
        let rep = exponent_calc(logistic(), 22.0, 1.0 / 22.0);
        assert_eq!(rep.threshold, 22.0);
        assert!(!rep.feasible);
        assert!(!r0_admissible(logistic(), 22.0));
        assert!(r0_admissible(logistic(), 22.5));
        // every zeta fails for r0 <= 22
        for k in 1..200 {
            let r0 = 10.0 + 12.0 * k as f64 / 200.0;
            for z in 1..100 {
                assert!(!exponent_calc(logistic(), r0, z as f64 / 1000.0).feasible);
            }
        }
    }

    #[test]
    fn boundary_zeta() {
        let rep = exponent_calc(logistic(), 40.0, 1.0 / 40.0);
        assert!(rep.b2.abs() < 1e-15);
        assert!(!rep.feasible);
    }

    #[test]
    fn hand_computed_point() {
        // r0 = 40, zeta = 1/30: b1 = min(1/4 - 5.5/30, (40 - 2 - 6)/60), b2 = min(40/30 - 1, 1)
        let rep = exponent_calc(logistic(), 40.0, 1.0 / 30.0);
        assert!((rep.b1 - (0.25 - 5.5 / 30.0)).abs() < 1e-15);
        assert!((rep.b2 - 1.0 / 3.0).abs() < 1e-15);
        assert!(rep.feasible);
    }

    #[test]
    fn monotone_in_r0() {
        let zeta = 0.02;
        let mut prev = exponent_calc(logistic(), 51.0, zeta);
        for r0 in (52..400).map(f64::from) {
            let rep = exponent_calc(logistic(), r0, zeta);
            assert!(rep.b1 >= prev.b1 && rep.b2 >= prev.b2);
            prev = rep;
        }
    }
}
