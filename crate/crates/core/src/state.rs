//! State-space types: integer counts over a countable type set, real densities,
//! and bounded-influence jump vectors.

use std::fmt;

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

/// Finite-support vector of non-negative counts indexed by type.
///
/// Backed by a dense vector whose trailing zeros are trimmed, so the logical
/// support is `{j : get(j) > 0}` and `len_dense()` is one past the largest
/// occupied type.
#[derive(Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SparseCounts {
    counts: Vec<u64>,
    total: u64,
}

impl SparseCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I: IntoIterator<Item = (usize, u64)>>(pairs: I) -> Self {
        let mut s = Self::new();
        for (j, c) in pairs {
            s.add(j, c);
        }
        s
    }

    pub fn from_dense(counts: &[u64]) -> Self {
        let mut v = counts.to_vec();
        let total = v.iter().sum();
        trim(&mut v);
        Self { counts: v, total }
    }

    pub fn get(&self, j: usize) -> u64 {
        self.counts.get(j).copied().unwrap_or(0)
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    /// One past the largest occupied type (0 for the empty state).
    pub fn len_dense(&self) -> usize {
        self.counts.len()
    }

    /// Dense view; entries may be zero, but the last entry is positive.
    pub fn as_dense(&self) -> &[u64] {
        &self.counts
    }

    /// Non-zero entries in increasing type order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(j, &c)| (j, c))
    }

    pub fn support_size(&self) -> usize {
        self.counts.iter().filter(|&&c| c > 0).count()
    }

    pub fn add(&mut self, j: usize, c: u64) {
        if c == 0 {
            return;
        }
        if j >= self.counts.len() {
            self.counts.resize(j + 1, 0);
        }
        self.counts[j] += c;
        self.total += c;
    }

    /// Applies `X -> X + J`, rejecting jumps that would make a count negative.
    /// The state is left untouched on error.
    pub fn apply(&mut self, jump: &JumpVector) -> Result<()> {
        for &(j, v) in jump.entries() {
            if v < 0 && self.get(j) < v.unsigned_abs() as u64 {
                return Err(Error::NegativeCount { index: j });
            }
        }
        let top = jump.entries().last().map_or(0, |&(j, _)| j + 1);
        if top > self.counts.len() {
            self.counts.resize(top, 0);
        }
        for &(j, v) in jump.entries() {
            if v >= 0 {
                self.counts[j] += v as u64;
                self.total += v as u64;
            } else {
                self.counts[j] -= v.unsigned_abs() as u64;
                self.total -= v.unsigned_abs() as u64;
            }
        }
        trim(&mut self.counts);
        Ok(())
    }

    /// Normalised density `X / N`.
    pub fn density(&self, scale: u64) -> DensityVector {
        let n = scale as f64;
        DensityVector::from_vec(self.counts.iter().map(|&c| c as f64 / n).collect())
    }
}

fn trim(v: &mut Vec<u64>) {
    while v.last() == Some(&0) {
        v.pop();
    }
}

impl fmt::Debug for SparseCounts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_map().entries(self.iter()).finish()
    }
}

/// Finite-support real vector indexed by type; zero beyond `len()`.
///
/// Used for densities `x = X/N`, mean-field states, and signed differences.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DensityVector(Vec<f64>);

impl DensityVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn from_vec(v: Vec<f64>) -> Self {
        Self(v)
    }

    /// Unit vector `e^(j)`.
    pub fn unit(j: usize) -> Self {
        let mut v = vec![0.0; j + 1];
        v[j] = 1.0;
        Self(v)
    }

    pub fn from_pairs<I: IntoIterator<Item = (usize, f64)>>(pairs: I) -> Self {
        let mut v = Self::default();
        for (j, x) in pairs {
            v.add_at(j, x);
        }
        v
    }

    pub fn get(&self, j: usize) -> f64 {
        self.0.get(j).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn add_at(&mut self, j: usize, x: f64) {
        if j >= self.0.len() {
            self.0.resize(j + 1, 0.0);
        }
        self.0[j] += x;
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    /// Zero-padded (or truncated) dense copy of length `len`.
    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut v = vec![0.0; len];
        let k = len.min(self.0.len());
        v[..k].copy_from_slice(&self.0[..k]);
        v
    }

    pub fn sub(&self, other: &DensityVector) -> DensityVector {
        let n = self.len().max(other.len());
        DensityVector((0..n).map(|j| self.get(j) - other.get(j)).collect())
    }
}

/// Sparse integer jump `J`, stored as `(type, change)` pairs sorted by type
/// with zero entries removed. The ordering gives a canonical form: two equal
/// jumps have identical entry lists regardless of how they were built.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct JumpVector(SmallVec<[(usize, i32); 4]>);

impl JumpVector {
    pub fn from_pairs<I: IntoIterator<Item = (usize, i32)>>(pairs: I) -> Self {
        let mut v: SmallVec<[(usize, i32); 4]> = SmallVec::new();
        for (j, d) in pairs {
            match v.iter_mut().find(|(k, _)| *k == j) {
                Some(e) => e.1 += d,
                None => v.push((j, d)),
            }
        }
        v.retain(|e| e.1 != 0);
        v.sort_unstable();
        Self(v)
    }

    /// `e^(to) - e^(from)`: one individual moves between types.
    pub fn transfer(from: usize, to: usize) -> Self {
        Self::from_pairs([(to, 1), (from, -1)])
    }

    /// Checks bounded influence: `sum |J^l| <= j_star`.
    pub fn validated(self, j_star: u32) -> Result<Self> {
        if self.influence() > j_star {
            return Err(Error::InvalidJump(format!(
                "total influence {} exceeds bound {j_star}",
                self.influence()
            )));
        }
        Ok(self)
    }

    pub fn entries(&self) -> &[(usize, i32)] {
        &self.0
    }

    pub fn get(&self, j: usize) -> i32 {
        self.0.iter().find(|e| e.0 == j).map_or(0, |e| e.1)
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    /// `sum_l |J^l|`.
    pub fn influence(&self) -> u32 {
        self.0.iter().map(|e| e.1.unsigned_abs()).sum()
    }

    /// Largest type touched by the jump.
    pub fn max_index(&self) -> Option<usize> {
        self.0.last().map(|e| e.0)
    }

    /// Byte encoding of the canonical form, used to key per-jump random streams.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 * self.0.len());
        for &(j, d) in &self.0 {
            out.extend_from_slice(&(j as u64).to_le_bytes());
            out.extend_from_slice(&d.to_le_bytes());
        }
        out
    }

    /// True if `state` has enough individuals of every type the jump removes.
    pub fn feasible_from(&self, state: &SparseCounts) -> bool {
        self.0
            .iter()
            .all(|&(j, d)| d >= 0 || state.get(j) >= d.unsigned_abs() as u64)
    }
}

impl fmt::Debug for JumpVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "J[")?;
        for (n, (j, d)) in self.0.iter().enumerate() {
            if n > 0 {
                write!(f, " ")?;
            }
            write!(f, "{d:+}e{j}")?;
        }
        write!(f, "]")
    }
}
