use rand::Rng;

use super::ModelSpec;
use crate::error::{Error, Result};
use crate::process::{JumpModel, RateTable, RateTableBuilder};
use crate::rng::SimRng;
use crate::state::{DensityVector, JumpVector, SparseCounts};

/// One elementary transition of the metapopulation model.
///
/// `Down(1)` carries both deaths and catastrophes of single-individual
/// patches, since both send a patch from 1 to 0.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Transition {
    /// A patch of size `i >= 1` loses an individual (death or failed emigration).
    Down(usize),
    /// A patch of size `i >= 1` gains an individual by birth.
    Up(usize),
    /// A patch of size `i >= 2` is wiped out.
    Catastrophe(usize),
    /// A migrant leaves a patch of size `i >= 1` and lands in a patch of size `k`.
    Migration { i: usize, k: usize },
}

impl Transition {
    pub fn jump(&self) -> JumpVector {
        match *self {
            Transition::Down(i) => JumpVector::transfer(i, i - 1),
            Transition::Up(i) => JumpVector::transfer(i, i + 1),
            Transition::Catastrophe(i) => JumpVector::transfer(i, 0),
            Transition::Migration { i, k } => {
                JumpVector::from_pairs([(k + 1, 1), (k, -1), (i - 1, 1), (i, -1)])
            }
        }
    }

    fn is_valid(&self) -> bool {
        match *self {
            Transition::Down(i) | Transition::Up(i) => i >= 1,
            Transition::Catastrophe(i) => i >= 2,
            Transition::Migration { i, .. } => i >= 1,
        }
    }

    /// `alpha_J(x)` for this transition: the tabulated rate with the factor `N` removed.
    pub fn alpha(&self, model: &ModelSpec, x: &DensityVector) -> f64 {
        let rg = model.rho * model.gamma;
        match *self {
            Transition::Down(i) => {
                let fi = i as f64;
                let mut r = fi * x.get(i) * (model.death(i) + model.gamma * (1.0 - model.rho));
                if i == 1 {
                    r += x.get(1) * model.kappa;
                }
                r
            }
            Transition::Up(i) => i as f64 * x.get(i) * model.birth(i),
            Transition::Catastrophe(i) => x.get(i) * model.kappa,
            Transition::Migration { i, k } => i as f64 * x.get(i) * x.get(k) * rg,
        }
    }

    /// Non-zero partial derivatives `(m, d alpha_J / d x^m)` at `x`.
    pub fn alpha_gradient(&self, model: &ModelSpec, x: &DensityVector) -> Vec<(usize, f64)> {
        let rg = model.rho * model.gamma;
        match *self {
            Transition::Down(i) => {
                let mut g = i as f64 * (model.death(i) + model.gamma * (1.0 - model.rho));
                if i == 1 {
                    g += model.kappa;
                }
                vec![(i, g)]
            }
            Transition::Up(i) => vec![(i, i as f64 * model.birth(i))],
            Transition::Catastrophe(i) => vec![(i, model.kappa)],
            Transition::Migration { i, k } if i == k => vec![(i, 2.0 * i as f64 * x.get(i) * rg)],
            Transition::Migration { i, k } => vec![
                (i, i as f64 * x.get(k) * rg),
                (k, i as f64 * x.get(i) * rg),
            ],
        }
    }

    /// Rate at counts `X` with scale `N`.
    ///
    /// Equal to `N alpha_J(X/N)` except for migration into a patch of the
    /// source's own size (`k = i`), where the target must be a *different*
    /// patch: the factor `X^k` becomes `X^i - 1`. Without this the jump
    /// `e^(i+1) - 2e^(i) + e^(i-1)` could fire from `X^i = 1`.
    pub fn rate(&self, model: &ModelSpec, counts: &SparseCounts, scale: u64) -> f64 {
        let n = scale as f64;
        let rg = model.rho * model.gamma;
        let xc = |j: usize| counts.get(j) as f64;
        match *self {
            Transition::Migration { i, k } => {
                let target = if k == i { xc(i) - 1.0 } else { xc(k) };
                if target <= 0.0 {
                    0.0
                } else {
                    i as f64 * xc(i) * target * rg / n
                }
            }
            Transition::Down(i) => {
                let fi = i as f64;
                let mut r = fi * xc(i) * (model.death(i) + model.gamma * (1.0 - model.rho));
                if i == 1 {
                    r += xc(1) * model.kappa;
                }
                r
            }
            Transition::Up(i) => i as f64 * xc(i) * model.birth(i),
            Transition::Catastrophe(i) => xc(i) * model.kappa,
        }
    }
}

/// All transitions whose jump vector equals `jump` (empty if none).
pub fn transitions_for(jump: &JumpVector) -> Vec<Transition> {
    let negatives: Vec<usize> = jump
        .entries()
        .iter()
        .filter(|e| e.1 < 0)
        .map(|e| e.0)
        .collect();
    let mut candidates = Vec::new();
    for &m in &negatives {
        candidates.extend([Transition::Down(m), Transition::Up(m), Transition::Catastrophe(m)]);
        for &k in &negatives {
            candidates.push(Transition::Migration { i: m, k });
        }
    }
    candidates.retain(|t| t.is_valid() && t.jump() == *jump);
    candidates.sort();
    candidates.dedup();
    candidates
}

/// `alpha_J(x)`; rejects vectors that are not a jump of this model.
pub fn alpha(model: &ModelSpec, jump: &JumpVector, x: &DensityVector) -> Result<f64> {
    let ts = transitions_for(jump);
    if ts.is_empty() {
        return Err(Error::InvalidJump(format!("{jump:?} is not a transition of the model")));
    }
    Ok(ts.iter().map(|t| t.alpha(model, x)).sum())
}

/// Every transition that can be non-zero from a state with the given support.
pub(crate) fn transitions_from(support: &[usize]) -> Vec<Transition> {
    let mut out = Vec::new();
    for &i in support.iter().filter(|&&i| i >= 1) {
        out.push(Transition::Down(i));
        out.push(Transition::Up(i));
        if i >= 2 {
            out.push(Transition::Catastrophe(i));
        }
        for &k in support {
            if k + 1 != i {
                out.push(Transition::Migration { i, k });
            }
        }
    }
    out
}

impl ModelSpec {
    /// Total rate of the events leaving patches of size `i`, excluding the
    /// null migration `k = i - 1`.
    fn type_rate(&self, i: usize, counts: &SparseCounts, scale: u64) -> f64 {
        let xi = counts.get(i) as f64;
        if i == 0 || xi == 0.0 {
            return 0.0;
        }
        let fi = i as f64;
        let local = fi * (self.death(i) + self.gamma * (1.0 - self.rho) + self.birth(i)) + self.kappa;
        let targets = counts.total() as f64 - counts.get(i - 1) as f64 - 1.0;
        let migration = self.rho * self.gamma * fi * targets / scale as f64;
        xi * (local + migration.max(0.0))
    }
}

impl JumpModel for ModelSpec {
    fn rate_table(&self, state: &SparseCounts, scale: u64) -> Result<RateTable> {
        let support: Vec<usize> = state.iter().map(|(j, _)| j).collect();
        let mut b = RateTableBuilder::new();
        for t in transitions_from(&support) {
            b.push(t.jump(), t.rate(self, state, scale))?;
        }
        b.build()
    }

    fn total_rate(&self, state: &SparseCounts, scale: u64) -> Result<f64> {
        let total: f64 = state
            .iter()
            .map(|(i, _)| self.type_rate(i, state, scale))
            .sum();
        if !total.is_finite() {
            return Err(Error::RateOverflow { rate: total });
        }
        Ok(total)
    }

    /// Two-level draw: the source patch size `i` in proportion to its total
    /// rate, then the event within that size; a migrant's target is a
    /// uniformly chosen other patch, excluding sizes `i - 1` (a null move).
    fn choose_jump(
        &self,
        state: &SparseCounts,
        scale: u64,
        total_rate: f64,
        rng: &mut SimRng,
    ) -> Result<JumpVector> {
        let mut target = rng.random::<f64>() * total_rate;
        let mut chosen = None;
        let mut last_positive = None;
        for (i, _) in state.iter() {
            let w = self.type_rate(i, state, scale);
            if w <= 0.0 {
                continue;
            }
            last_positive = Some(i);
            if target < w {
                chosen = Some(i);
                break;
            }
            target -= w;
        }
        let i = chosen
            .or(last_positive)
            .ok_or_else(|| Error::InvalidInput("no transition has positive rate".into()))?;
        let xi = state.get(i) as f64;
        let fi = i as f64;
        let down = fi * xi * (self.death(i) + self.gamma * (1.0 - self.rho))
            + if i == 1 { xi * self.kappa } else { 0.0 };
        let up = fi * xi * self.birth(i);
        let cat = if i >= 2 { xi * self.kappa } else { 0.0 };
        let t = if target < down {
            Transition::Down(i)
        } else if target < down + up {
            Transition::Up(i)
        } else if target < down + up + cat {
            Transition::Catastrophe(i)
        } else {
            self.pick_migration_target(i, state, rng)
                .map(|k| Transition::Migration { i, k })
                // only reachable through rounding at the very top of the range
                .unwrap_or(if cat > 0.0 { Transition::Catastrophe(i) } else { Transition::Down(i) })
        };
        Ok(t.jump())
    }

    fn drift(&self, state: &SparseCounts, scale: u64) -> Result<DensityVector> {
        let n = scale as f64;
        let len = state.len_dense() + 2;
        let mut d = vec![0.0; len];
        let total = state.total() as f64;
        let rg = self.rho * self.gamma;
        let mut c_sum = 0.0;
        for (i, x) in state.iter().filter(|&(i, _)| i >= 1) {
            let xi = x as f64;
            let fi = i as f64;
            let mut down = fi * xi * (self.death(i) + self.gamma * (1.0 - self.rho));
            if i == 1 {
                down += xi * self.kappa;
            }
            d[i - 1] += down;
            d[i] -= down;
            let up = fi * xi * self.birth(i);
            d[i + 1] += up;
            d[i] -= up;
            if i >= 2 {
                d[0] += xi * self.kappa;
                d[i] -= xi * self.kappa;
            }
            // migration from size i into any other patch
            let c = rg * fi * xi / n;
            c_sum += c;
            d[i + 1] -= c;
            d[i] += c;
            d[i - 1] += c * (total - 1.0);
            d[i] -= c * (total - 1.0);
        }
        for (k, x) in state.iter() {
            let v = c_sum * x as f64;
            d[k + 1] += v;
            d[k] -= v;
        }
        Ok(DensityVector::from_vec(d.into_iter().map(|v| v / n).collect()))
    }
}

impl ModelSpec {
    fn pick_migration_target(&self, i: usize, state: &SparseCounts, rng: &mut SimRng) -> Option<usize> {
        let excluded = state.get(i - 1);
        let eligible = state.total().checked_sub(excluded + 1)?;
        if eligible == 0 {
            return None;
        }
        let mut r = rng.random_range(0..eligible);
        for (k, x) in state.iter() {
            if k + 1 == i {
                continue;
            }
            let w = if k == i { x - 1 } else { x };
            if r < w {
                return Some(k);
            }
            r -= w;
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::DemographicLaw;
    use crate::rng::rng_from_seed;
    use proptest::prelude::*;

    fn model(b: f64, d: f64, gamma: f64, rho: f64, kappa: f64) -> ModelSpec {
        ModelSpec::new(DemographicLaw::Constant { b, d }, gamma, rho, kappa).unwrap()
    }

    #[test]
    fn alpha_examples() {
        let m = model(1.0, 0.5, 0.3, 0.5, 2.0);
        let mut x = DensityVector::zeros(4);
        x.add_at(3, 0.3);
        let cat = JumpVector::transfer(3, 0);
        assert!((alpha(&m, &cat, &x).unwrap() - 0.6).abs() < 1e-15);

        let mut x = DensityVector::zeros(3);
        x.add_at(2, 0.5);
        let birth = JumpVector::transfer(2, 3);
        assert!((alpha(&m, &birth, &x).unwrap() - 1.0).abs() < 1e-15);

        let zero = DensityVector::zeros(10);
        for j in [cat, birth, JumpVector::transfer(1, 0), Transition::Migration { i: 3, k: 5 }.jump()] {
            assert_eq!(alpha(&m, &j, &zero).unwrap(), 0.0);
        }
        assert!(alpha(&m, &JumpVector::transfer(5, 2), &x).is_err());
        assert!(alpha(&m, &JumpVector::from_pairs([(0, 1)]), &x).is_err());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = ModelSpec::default_logistic();
        let x = DensityVector::from_vec(vec![0.1, 0.2, 0.3, 0.15, 0.25]);
        let ts = [
            Transition::Down(1),
            Transition::Down(3),
            Transition::Up(2),
            Transition::Catastrophe(4),
            Transition::Migration { i: 2, k: 2 },
            Transition::Migration { i: 3, k: 0 },
        ];
        for t in ts {
            let grad = t.alpha_gradient(&m, &x);
            for j in 0..5 {
                let h = 1e-6;
                let mut xp = x.clone();
                xp.add_at(j, h);
                let fd = (t.alpha(&m, &xp) - t.alpha(&m, &x)) / h;
                let an: f64 = grad.iter().filter(|g| g.0 == j).map(|g| g.1).sum();
                assert!((fd - an).abs() < 1e-5, "{t:?} j={j}: {fd} vs {an}");
            }
        }
    }

    #[test]
    fn rate_table_from_one_occupied_patch() {
        let (b, d, gamma, rho, kappa) = (1.3, 0.7, 0.9, 0.6, 0.4);
        let m = model(b, d, gamma, rho, kappa);
        let n = 25u64;
        let s = SparseCounts::from_pairs([(0, n - 1), (1, 1)]);
        let t = m.rate_table(&s, n).unwrap();
        let r_down = t.rate_of(&JumpVector::transfer(1, 0));
        assert!((r_down - (d + gamma * (1.0 - rho) + kappa)).abs() < 1e-14);
        assert!((t.rate_of(&JumpVector::transfer(1, 2)) - b).abs() < 1e-14);
        // (i=1, k=0) is the null jump; (i=1, k=1) needs a second size-1 patch
        assert!(t.rate_of(&Transition::Migration { i: 1, k: 1 }.jump()) == 0.0);
        assert_eq!(t.len(), 2);
        assert!((t.total_rate() - m.total_rate(&s, n).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn migration_rates_match_table() {
        let m = model(1.0, 1.0, 2.0, 0.5, 0.0);
        let n = 10u64;
        let s = SparseCounts::from_pairs([(0, 4), (1, 3), (2, 3)]);
        let t = m.rate_table(&s, n).unwrap();
        let rg = 1.0;
        // i = 2 into k = 0: 2 * X^2 * X^0 * rg / N
        let r = t.rate_of(&Transition::Migration { i: 2, k: 0 }.jump());
        assert!((r - 2.0 * 3.0 * 4.0 * rg / 10.0).abs() < 1e-14);
        // i = 1 into k = 1 (another size-1 patch): X^1 (X^1 - 1)
        let r = t.rate_of(&Transition::Migration { i: 1, k: 1 }.jump());
        assert!((r - 3.0 * 2.0 * rg / 10.0).abs() < 1e-14);
    }

    #[test]
    fn empty_and_frozen_states() {
        let m = ModelSpec::default_logistic();
        let s = SparseCounts::from_pairs([(0, 50)]);
        let t = m.rate_table(&s, 50).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.total_rate(), 0.0);
        assert_eq!(m.total_rate(&s, 50).unwrap(), 0.0);
        let frozen = ModelSpec::frozen();
        let s = SparseCounts::from_pairs([(0, 5), (3, 5), (7, 2)]);
        assert!(frozen.rate_table(&s, 12).unwrap().is_empty());
        assert_eq!(frozen.total_rate(&s, 12).unwrap(), 0.0);
    }

    #[test]
    fn transitions_for_is_unique_for_model_jumps() {
        for i in 1..8 {
            for t in [Transition::Down(i), Transition::Up(i)] {
                assert_eq!(transitions_for(&t.jump()), vec![t]);
            }
            if i >= 2 {
                let t = Transition::Catastrophe(i);
                assert_eq!(transitions_for(&t.jump()), vec![t]);
            }
            for k in 0..8 {
                if k + 1 == i {
                    continue;
                }
                let t = Transition::Migration { i, k };
                assert_eq!(transitions_for(&t.jump()), vec![t], "{t:?}");
            }
        }
    }

    fn arb_state() -> impl Strategy<Value = SparseCounts> {
        proptest::collection::vec((0usize..12, 1u64..6), 1..8)
            .prop_map(SparseCounts::from_pairs)
    }

    proptest! {
        #[test]
        fn fast_paths_agree_with_table(s in arb_state()) {
            let m = ModelSpec::default_logistic();
            let n = s.total();
            let t = m.rate_table(&s, n).unwrap();
            let total = m.total_rate(&s, n).unwrap();
            prop_assert!((t.total_rate() - total).abs() <= 1e-10 * total.max(1.0));
            let generic = {
                let mut out = DensityVector::default();
                for (j, r) in t.active() {
                    for &(k, v) in j.entries() {
                        out.add_at(k, f64::from(v) * r / n as f64);
                    }
                }
                out
            };
            let fast = m.drift(&s, n).unwrap();
            let len = generic.len().max(fast.len());
            for k in 0..len {
                prop_assert!((generic.get(k) - fast.get(k)).abs() < 1e-10, "k={}", k);
            }
            // every listed jump is feasible
            for (j, _) in t.active() {
                prop_assert!(j.feasible_from(&s));
            }
        }
    }

    // The two-level sampler must reproduce the table's categorical law.
    #[test]
    fn structured_sampler_frequencies() {
        let m = model(0.8, 0.4, 1.2, 0.7, 0.3);
        let s = SparseCounts::from_pairs([(0, 3), (1, 2), (2, 1), (4, 2)]);
        let n = s.total();
        let t = m.rate_table(&s, n).unwrap();
        let total = m.total_rate(&s, n).unwrap();
        let mut rng = rng_from_seed(11);
        let draws = 200_000;
        let mut counts = std::collections::HashMap::new();
        for _ in 0..draws {
            *counts.entry(m.choose_jump(&s, n, total, &mut rng).unwrap()).or_insert(0usize) += 1;
        }
        for (j, r) in t.active() {
            let p = r / t.total_rate();
            let got = *counts.get(j).unwrap_or(&0) as f64 / draws as f64;
            let se = (p * (1.0 - p) / draws as f64).sqrt();
            assert!((got - p).abs() < 5.0 * se + 1e-4, "{j:?}: {got} vs {p}");
        }
        assert_eq!(counts.len(), t.len());
    }
}
