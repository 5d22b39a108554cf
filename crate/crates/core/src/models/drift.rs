//! The fluid drift `sum_J J alpha_J(x) = A x + F(x)`, with `A` linear
//! (tridiagonal) and `F` the quadratic migration term plus the catastrophe
//! constant. The split uses `sum_j x^j = 1`.

use nalgebra::DMatrix;

use super::rates::transitions_from;
use super::ModelSpec;
use crate::state::DensityVector;

/// `s(x) = sum_{j >= 1} j x^j`.
fn occupancy(x: &[f64]) -> f64 {
    x.iter().enumerate().map(|(j, v)| j as f64 * v).sum()
}

/// `F(x)`: `F^0 = -rho gamma x^0 s(x) + kappa`, `F^i = rho gamma (x^{i-1} - x^i) s(x)`.
pub fn drift_f(model: &ModelSpec, x: &DensityVector) -> DensityVector {
    let x = x.as_slice();
    let rg = model.rho * model.gamma;
    let s = occupancy(x);
    let mut out = vec![0.0; x.len() + 1];
    out[0] = model.kappa;
    for (i, o) in out.iter_mut().enumerate() {
        let prev = if i == 0 { 0.0 } else { x[i - 1] };
        let cur = x.get(i).copied().unwrap_or(0.0);
        *o += rg * (prev - cur) * s;
    }
    DensityVector::from_vec(out)
}

/// `D_k F^i(x) = rho gamma k (x^{i-1} - x^i) + rho gamma s(x) (1{k = i-1} - 1{k = i})`,
/// with `x^{-1} = 0`.
pub fn partial_df(model: &ModelSpec, x: &DensityVector, i: usize, k: usize) -> f64 {
    let rg = model.rho * model.gamma;
    let prev = if i == 0 { 0.0 } else { x.get(i - 1) };
    let ind = f64::from(u8::from(k + 1 == i)) - f64::from(u8::from(k == i));
    rg * (k as f64 * (prev - x.get(i)) + occupancy(x.as_slice()) * ind)
}

/// `DF(x)[h]`, the directional derivative of `F` at `x` along `h`.
pub fn drift_df(model: &ModelSpec, x: &DensityVector, h: &DensityVector) -> DensityVector {
    let rg = model.rho * model.gamma;
    let sx = occupancy(x.as_slice());
    let sh = occupancy(h.as_slice());
    let len = x.len().max(h.len()) + 1;
    let out = (0..len)
        .map(|i| {
            let (xp, hp) = if i == 0 { (0.0, 0.0) } else { (x.get(i - 1), h.get(i - 1)) };
            rg * (sh * (xp - x.get(i)) + sx * (hp - h.get(i)))
        })
        .collect();
    DensityVector::from_vec(out)
}

/// `D_{kl} F^i = rho gamma { k [1{l = i-1} - 1{l = i}] + l [1{k = i-1} - 1{k = i}] }`;
/// constant in `x` since `F` is quadratic.
pub fn drift_dd_f(model: &ModelSpec, i: usize, k: usize, l: usize) -> f64 {
    let ind = |a: usize| f64::from(u8::from(a + 1 == i)) - f64::from(u8::from(a == i));
    model.rho * model.gamma * (k as f64 * ind(l) + l as f64 * ind(k))
}

/// The purely quadratic part `Q(h) = F(x + h) - F(x) - DF(x)[h]`,
/// i.e. `Q(h)^i = rho gamma s(h) (h^{i-1} - h^i)`.
pub fn drift_f_quadratic(model: &ModelSpec, h: &DensityVector) -> DensityVector {
    let mut q = drift_f(model, h);
    q.add_at(0, -model.kappa);
    q
}

/// Constant `K` with `||Q(h)||_mu <= K ||h||_mu^2`, namely `4 rho gamma`
/// (the sharp value is `3 rho gamma`).
pub fn quadratic_bound(model: &ModelSpec) -> f64 {
    4.0 * model.rho * model.gamma
}

/// `sum_J J alpha_J(x)` summed directly over the transitions active at `x`.
pub fn jump_drift(model: &ModelSpec, x: &DensityVector) -> DensityVector {
    let support: Vec<usize> = (0..x.len()).filter(|&j| x.get(j) != 0.0).collect();
    let mut out = DensityVector::zeros(x.len() + 2);
    for t in transitions_from(&support) {
        let a = t.alpha(model, x);
        if a == 0.0 {
            continue;
        }
        for &(j, d) in t.jump().entries() {
            out.add_at(j, f64::from(d) * a);
        }
    }
    out
}

/// `A` restricted to types `{0..=m}`.
///
/// `A_ii = -(kappa + i (b_i + d_i + gamma))`, `A_00 = -kappa`, flow `i -> i-1`
/// at `i (d_i + gamma)` and `i -> i+1` at `i b_i`. The birth flow out of
/// type `m` has no target and is dropped; its coefficient is kept in
/// `dropped_birth` so the lost mass can be accounted for.
#[derive(Clone, Debug, PartialEq)]
pub struct TruncatedOperator {
    pub m: usize,
    pub diag: Vec<f64>,
    /// `lower[i] = A_{i+1, i}` for `i < m`.
    pub lower: Vec<f64>,
    /// `upper[i] = A_{i, i+1}` for `i < m`.
    pub upper: Vec<f64>,
    pub dropped_birth: f64,
}

pub fn truncated_a(model: &ModelSpec, m: usize) -> TruncatedOperator {
    let diag = (0..=m)
        .map(|i| {
            if i == 0 {
                -model.kappa
            } else {
                let fi = i as f64;
                -(model.kappa + fi * (model.birth(i) + model.death(i) + model.gamma))
            }
        })
        .collect();
    let lower = (0..m).map(|i| i as f64 * model.birth(i)).collect();
    let upper = (0..m)
        .map(|i| (i + 1) as f64 * (model.death(i + 1) + model.gamma))
        .collect();
    TruncatedOperator {
        m,
        diag,
        lower,
        upper,
        dropped_birth: m as f64 * model.birth(m),
    }
}

impl TruncatedOperator {
    pub fn dim(&self) -> usize {
        self.m + 1
    }

    /// `out = A v`, `v` of length `m + 1`.
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut acc = self.diag[i] * v[i];
            if i > 0 {
                acc += self.lower[i - 1] * v[i - 1];
            }
            if i + 1 < n {
                acc += self.upper[i] * v[i + 1];
            }
            out[i] = acc;
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.apply_into(v, &mut out);
        out
    }

    /// `A^T v`.
    pub fn transpose_apply(&self, v: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|i| {
                let mut acc = self.diag[i] * v[i];
                if i > 0 {
                    acc += self.upper[i - 1] * v[i - 1];
                }
                if i + 1 < n {
                    acc += self.lower[i] * v[i + 1];
                }
                acc
            })
            .collect()
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut a = DMatrix::zeros(n, n);
        for i in 0..n {
            a[(i, i)] = self.diag[i];
            if i + 1 < n {
                a[(i + 1, i)] = self.lower[i];
                a[(i, i + 1)] = self.upper[i];
            }
        }
        a
    }

    pub fn off_diagonal_nonnegative(&self) -> bool {
        self.lower.iter().chain(&self.upper).all(|&v| v >= 0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{weighted_norm, DemographicLaw};
    use proptest::prelude::*;

    fn constant(b: f64, d: f64, gamma: f64, rho: f64, kappa: f64) -> ModelSpec {
        ModelSpec::new(DemographicLaw::Constant { b, d }, gamma, rho, kappa).unwrap()
    }

    fn normalized(raw: Vec<f64>) -> DensityVector {
        let s: f64 = raw.iter().sum();
        DensityVector::from_vec(raw.into_iter().map(|v| v / s).collect())
    }

    #[test]
    fn f_at_unit_vectors() {
        let m = constant(1.0, 1.0, 0.7, 0.6, 0.25);
        let rg = 0.7 * 0.6;
        let f = drift_f(&m, &DensityVector::unit(0));
        assert_eq!(f.get(0), 0.25);
        assert!((1..5).all(|i| f.get(i) == 0.0));
        let f = drift_f(&m, &DensityVector::unit(1));
        assert!((f.get(0) - 0.25).abs() < 1e-15);
        assert!((f.get(1) + rg).abs() < 1e-15);
        assert!((f.get(2) - rg).abs() < 1e-15);
        assert!((3..6).all(|i| f.get(i) == 0.0));
    }

    #[test]
    fn m1_split_reproduces_jump_drift() {
        // symbolic check on the smallest truncation: x = (x0, x1), sum 1
        let (b, d, g, r, k) = (1.7, 0.4, 0.9, 0.35, 0.6);
        let m = constant(b, d, g, r, k);
        let x1 = 0.3;
        let x = DensityVector::from_vec(vec![1.0 - x1, x1]);
        let a = truncated_a(&m, 2);
        let ax = a.apply(&x.to_dense(3));
        let f = drift_f(&m, &x);
        let lhs = jump_drift(&m, &x);
        // component 0: x1 (d + gamma) from A, kappa - rg x0 s from F
        let by_hand0 = x1 * (d + g) - k * (1.0 - x1) + k - r * g * (1.0 - x1) * x1;
        assert!((lhs.get(0) - by_hand0).abs() < 1e-14);
        for i in 0..3 {
            assert!((lhs.get(i) - (ax[i] + f.get(i))).abs() < 1e-14, "i={i}");
        }
    }

    #[test]
    fn operator_structure() {
        let m = constant(2.0, 1.0, 0.5, 0.5, 0.3);
        let a = truncated_a(&m, 1);
        assert_eq!(a.diag, vec![-0.3, -(0.3 + 3.5)]);
        assert_eq!(a.upper, vec![1.5]);
        assert_eq!(a.lower, vec![0.0]);
        assert_eq!(a.dropped_birth, 2.0);
        let a = truncated_a(&m, 50);
        assert!(a.off_diagonal_nonnegative());
        let mu: Vec<f64> = (0..=50).map(|j| (j + 1) as f64).collect();
        let w = m.growth_bound();
        let at_mu = a.transpose_apply(&mu);
        for i in 0..=50 {
            assert!(at_mu[i] <= w * mu[i] + 1e-12, "i={i}");
        }
        let dense = a.to_matrix();
        let v: Vec<f64> = (0..=50).map(|j| (j as f64 * 0.37).sin()).collect();
        let prod = &dense * nalgebra::DVector::from_vec(v.clone());
        let fast = a.apply(&v);
        for i in 0..=50 {
            assert!((prod[i] - fast[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn second_derivative_pattern() {
        // |D_kl F^i| <= K1 (mu(l) 1{i in N(k)} + mu(k) 1{i in N(l)}) with
        // N(k) = {k, k+1}: n0 = 2, max_{N(k)} mu <= 2 mu(k), K1 = rho gamma
        let m = constant(1.0, 1.0, 1.3, 0.7, 0.2);
        let k1 = m.rho * m.gamma;
        let mu = |j: usize| (j + 1) as f64;
        let in_n = |i: usize, k: usize| i == k || i == k + 1;
        for k in 0..25 {
            assert!(mu(k + 1) <= 2.0 * mu(k));
            for l in 0..25 {
                for i in 0..27 {
                    let v = drift_dd_f(&m, i, k, l).abs();
                    let bound = k1
                        * (mu(l) * f64::from(u8::from(in_n(i, k)))
                            + mu(k) * f64::from(u8::from(in_n(i, l))));
                    assert!(v <= bound + 1e-15, "i={i} k={k} l={l}");
                }
            }
        }
    }

    fn arb_density(max_len: usize) -> impl Strategy<Value = DensityVector> {
        proptest::collection::vec(0.0f64..1.0, 1..max_len).prop_map(normalized)
    }

    fn arb_signed(max_len: usize) -> impl Strategy<Value = DensityVector> {
        proptest::collection::vec(-1.0f64..1.0, 1..max_len).prop_map(DensityVector::from_vec)
    }

    proptest! {
        #[test]
        fn decomposition_identity(x in arb_density(30)) {
            let m = ModelSpec::default_logistic();
            let lhs = jump_drift(&m, &x);
            let a = truncated_a(&m, x.len() + 1);
            let ax = a.apply(&x.to_dense(x.len() + 2));
            let f = drift_f(&m, &x);
            let rhs = DensityVector::from_vec((0..x.len() + 2).map(|i| ax[i] + f.get(i)).collect());
            prop_assert!(weighted_norm(&lhs.sub(&rhs)) < 1e-11);
            // mass neutrality
            prop_assert!(lhs.sum().abs() < 1e-11);
        }

        #[test]
        fn df_matches_partials(x in arb_density(12), h in arb_signed(12)) {
            let m = constant(1.0, 2.0, 0.8, 0.9, 0.1);
            let df = drift_df(&m, &x, &h);
            for i in 0..14 {
                let by_partials: f64 = (0..h.len()).map(|k| partial_df(&m, &x, i, k) * h.get(k)).sum();
                prop_assert!((df.get(i) - by_partials).abs() < 1e-12);
            }
        }

        #[test]
        fn f_is_exactly_quadratic(x in arb_density(12), h in arb_signed(12)) {
            let m = constant(1.0, 2.0, 0.8, 0.9, 0.1);
            let exact = drift_f(&m, &DensityVector::from_vec(
                (0..x.len().max(h.len())).map(|j| x.get(j) + h.get(j)).collect()));
            let approx = drift_f(&m, &x);
            let df = drift_df(&m, &x, &h);
            let q = drift_f_quadratic(&m, &h);
            for i in 0..14 {
                let v = approx.get(i) + df.get(i) + q.get(i);
                prop_assert!((exact.get(i) - v).abs() < 1e-12);
            }
            prop_assert!(weighted_norm(&q) <= quadratic_bound(&m) * weighted_norm(&h).powi(2) + 1e-12);
        }

        #[test]
        fn f_local_lipschitz(x in arb_density(15), y in arb_density(15)) {
            let m = constant(1.0, 2.0, 0.8, 0.9, 0.1);
            let z = weighted_norm(&x).max(weighted_norm(&y));
            let lhs = weighted_norm(&drift_f(&m, &x).sub(&drift_f(&m, &y)));
            prop_assert!(lhs <= 4.0 * m.rho * m.gamma * z * weighted_norm(&x.sub(&y)) + 1e-12);
        }
    }

    #[test]
    fn df_of_zero_direction() {
        let m = ModelSpec::default_logistic();
        let x = normalized(vec![0.2, 0.3, 0.5]);
        assert!(drift_df(&m, &x, &DensityVector::zeros(3)).as_slice().iter().all(|&v| v == 0.0));
    }
}
