//! Both simulators against an exact oracle: the law at time `T` of a few
//! *labelled* patches, computed by uniformisation of a generator written
//! straight from the patch-level rules (not from the crate's rate tables).

use std::collections::{BTreeMap, HashMap};

use mpp_core::models::DemographicLaw;
use mpp_core::process::{simulate_ssa, simulate_time_change, RecordMode, SimOptions};
use mpp_core::{ModelSpec, SparseCounts};

const PATCHES: usize = 3;

struct Params {
    d: f64,
    gamma: f64,
    rho: f64,
    kappa: f64,
}

/// Outgoing transitions of labelled patch occupancies `s` (no births, so the
/// total never grows and the chain is finite).
fn labelled_moves(p: &Params, s: &[usize]) -> Vec<(Vec<usize>, f64)> {
    let n = s.len() as f64;
    let mut out = Vec::new();
    for a in 0..s.len() {
        let i = s[a];
        if i == 0 {
            continue;
        }
        let fi = i as f64;
        let mut down = s.to_vec();
        down[a] -= 1;
        out.push((down.clone(), fi * p.d + fi * p.gamma * (1.0 - p.rho)));
        let mut wiped = s.to_vec();
        wiped[a] = 0;
        out.push((wiped, p.kappa));
        // the migrant picks any patch uniformly; landing at home changes nothing
        for b in 0..s.len() {
            if b != a {
                let mut moved = down.clone();
                moved[b] += 1;
                out.push((moved, fi * p.gamma * p.rho / n));
            }
        }
    }
    out
}

fn counts_of(s: &[usize]) -> Vec<u64> {
    let mut c = vec![0u64; s.iter().max().unwrap() + 1];
    for &i in s {
        c[i] += 1;
    }
    while c.len() > 1 && *c.last().unwrap() == 0 {
        c.pop();
    }
    c
}

/// Law of the type counts at `t` from labelled start `s0`.
fn exact_law(p: &Params, s0: &[usize], t: f64) -> BTreeMap<Vec<u64>, f64> {
    let mut index: HashMap<Vec<usize>, usize> = HashMap::new();
    let mut states = vec![s0.to_vec()];
    index.insert(s0.to_vec(), 0);
    let mut edges = Vec::new();
    let mut k = 0;
    while k < states.len() {
        let moves = labelled_moves(p, &states[k]);
        for (to, rate) in moves {
            if to == states[k] {
                continue;
            }
            let j = *index.entry(to.clone()).or_insert_with(|| {
                states.push(to.clone());
                states.len() - 1
            });
            edges.push((k, j, rate));
        }
        k += 1;
    }
    let mut exit = vec![0.0; states.len()];
    for &(a, _, r) in &edges {
        exit[a] += r;
    }
    let lambda = exit.iter().cloned().fold(0.0, f64::max) * 1.05;
    // p(t) = sum_k Poisson(k; lambda t) P^k p0 with P = I + Q / lambda
    let mut v = vec![0.0; states.len()];
    v[0] = 1.0;
    let mut law = vec![0.0; states.len()];
    let mut weight = (-lambda * t).exp();
    for step in 0..10_000 {
        for (l, x) in law.iter_mut().zip(&v) {
            *l += weight * x;
        }
        let mut next: Vec<f64> = v.iter().zip(&exit).map(|(x, e)| x * (1.0 - e / lambda)).collect();
        for &(a, b, r) in &edges {
            next[b] += v[a] * r / lambda;
        }
        v = next;
        weight *= lambda * t / (step + 1) as f64;
        if step as f64 > lambda * t && weight < 1e-18 {
            break;
        }
    }
    let mut out = BTreeMap::new();
    for (s, pr) in states.iter().zip(law) {
        *out.entry(counts_of(s)).or_insert(0.0) += pr;
    }
    out
}

fn empirical(finals: &[SparseCounts]) -> BTreeMap<Vec<u64>, f64> {
    let mut out = BTreeMap::new();
    for s in finals {
        let mut c = s.as_dense().to_vec();
        while c.len() > 1 && *c.last().unwrap() == 0 {
            c.pop();
        }
        *out.entry(c).or_insert(0.0) += 1.0 / finals.len() as f64;
    }
    out
}

fn compare(exact: &BTreeMap<Vec<u64>, f64>, emp: &BTreeMap<Vec<u64>, f64>, reps: usize) {
    let total: f64 = exact.values().sum();
    assert!((total - 1.0).abs() < 1e-12, "oracle mass {total}");
    for key in emp.keys() {
        assert!(exact.contains_key(key), "simulated state {key:?} is unreachable");
    }
    for (key, &p) in exact {
        let f = emp.get(key).copied().unwrap_or(0.0);
        let se = (p * (1.0 - p) / reps as f64).sqrt();
        assert!((f - p).abs() <= 4.5 * se + 1e-3, "{key:?}: empirical {f:.4}, exact {p:.4}");
    }
}

fn run(sim: &str, model: &ModelSpec, x0: &SparseCounts, t: f64, reps: usize) -> Vec<SparseCounts> {
    let opts = SimOptions { record: RecordMode::Grid(vec![0.0, t]), ..SimOptions::default() };
    (0..reps as u64)
        .map(|seed| {
            let traj = match sim {
                "ssa" => simulate_ssa(model, x0, PATCHES as u64, t, seed, &opts),
                _ => simulate_time_change(model, x0, PATCHES as u64, t, seed + 1_000_000, &opts),
            };
            traj.unwrap().last().clone()
        })
        .collect()
}

fn setup() -> (Params, ModelSpec, Vec<usize>) {
    let p = Params { d: 0.4, gamma: 0.9, rho: 0.7, kappa: 0.3 };
    let model = ModelSpec::new(DemographicLaw::Constant { b: 0.0, d: p.d }, p.gamma, p.rho, p.kappa).unwrap();
    (p, model, vec![2, 2, 1])
}

#[test]
fn ssa_matches_labelled_patch_oracle() {
    let (p, model, s0) = setup();
    let x0 = SparseCounts::from_dense(&counts_of(&s0));
    let exact = exact_law(&p, &s0, 0.8);
    let reps = 6000;
    compare(&exact, &empirical(&run("ssa", &model, &x0, 0.8, reps)), reps);
}

#[test]
fn time_change_matches_labelled_patch_oracle() {
    let (p, model, s0) = setup();
    let x0 = SparseCounts::from_dense(&counts_of(&s0));
    let exact = exact_law(&p, &s0, 0.8);
    let reps = 6000;
    compare(&exact, &empirical(&run("tc", &model, &x0, 0.8, reps)), reps);
}

#[test]
fn pure_death_oracle_is_binomial() {
    // sanity check of the oracle itself: independent deaths only
    let p = Params { d: 1.0, gamma: 0.0, rho: 0.0, kappa: 0.0 };
    let law = exact_law(&p, &[2, 2, 2], 0.5);
    let q = (-0.5f64).exp();
    // every patch keeps both individuals
    let all_full = (q * q).powi(3);
    assert!((law[&vec![0, 0, 3]] - all_full).abs() < 1e-12);
    let all_empty = ((1.0 - q) * (1.0 - q)).powi(3);
    assert!((law[&vec![3]] - all_empty).abs() < 1e-12);
}
