//! Coefficient tuples `E = (d_1, ..., d_{m-1})` of the weighted-average
//! equation `d_1 x_1 + ... + d_{m-1} x_{m-1} = d x_m`, with `d = d_1 + ... + d_{m-1}`.
//!
//! Positions are numbered from 1 as in the equation itself: coefficient
//! position `k` carries `d_k`, and position `m` is the right-hand side.

use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Largest coefficient sum accepted; keeps `d * x` inside 128-bit intermediates.
pub const MAX_WEIGHT: u64 = i64::MAX as u64;

/// A nondecreasing list of positive coefficients with at least two entries.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CoefficientTuple {
    coeffs: Vec<u64>,
    weight: u64,
}

impl CoefficientTuple {
    /// Builds a tuple, sorting the coefficients into nondecreasing order.
    pub fn new(coeffs: impl Into<Vec<u64>>) -> Result<Self> {
        let mut coeffs = coeffs.into();
        if coeffs.len() < 2 {
            return Err(Error::MalformedTuple(format!(
                "need at least two coefficients, got {}",
                coeffs.len()
            )));
        }
        if coeffs.contains(&0) {
            return Err(Error::MalformedTuple("coefficients must be positive".into()));
        }
        coeffs.sort_unstable();
        let weight = coeffs
            .iter()
            .try_fold(0u64, |acc, &c| acc.checked_add(c))
            .filter(|&w| w <= MAX_WEIGHT)
            .ok_or_else(|| Error::MalformedTuple("coefficient sum exceeds 63 bits".into()))?;
        Ok(CoefficientTuple { coeffs, weight })
    }

    /// The tuple `E_m = (1, ..., 1)` with `m - 1` ones.
    pub fn uniform(m: usize) -> Result<Self> {
        if m < 3 {
            return Err(Error::UnsupportedM(m));
        }
        Self::new(vec![1; m - 1])
    }

    pub fn coeffs(&self) -> &[u64] {
        &self.coeffs
    }

    /// Coefficient at 1-based position `k` (`1 <= k <= m - 1`).
    pub fn coeff(&self, k: usize) -> u64 {
        self.coeffs[k - 1]
    }

    /// Number of unknowns in the equation, one more than the tuple length.
    pub fn m(&self) -> usize {
        self.coeffs.len() + 1
    }

    /// `d(E)`, the sum of all coefficients.
    pub fn weight(&self) -> u64 {
        self.weight
    }

    /// Base of the digit closed forms, `d + 1`.
    pub fn base(&self) -> u64 {
        self.weight + 1
    }

    /// `d_1 = 1` and every later coefficient is at most the sum of those before it.
    pub fn is_valid(&self) -> bool {
        if self.coeffs[0] != 1 {
            return false;
        }
        let mut prefix = 0u64;
        for &c in &self.coeffs {
            if prefix > 0 && c > prefix {
                return false;
            }
            prefix += c;
        }
        true
    }

    /// Validity decided by subset sums: every `j` in `[0, d - 1]` must be a
    /// sum of some subset of `{d_2, ..., d_{m-1}}`.
    ///
    /// Kept independent of [`is_valid`](Self::is_valid): reachable sums are
    /// tracked as a list of disjoint closed intervals.
    pub fn is_valid_by_cover(&self) -> bool {
        let mut reach: Vec<(u64, u64)> = vec![(0, 0)];
        for &c in &self.coeffs[1..] {
            let mut merged: Vec<(u64, u64)> = reach
                .iter()
                .copied()
                .chain(reach.iter().map(|&(a, b)| (a + c, b + c)))
                .collect();
            merged.sort_unstable();
            let mut out: Vec<(u64, u64)> = Vec::with_capacity(merged.len());
            for (a, b) in merged {
                match out.last_mut() {
                    Some(last) if a <= last.1 + 1 => last.1 = last.1.max(b),
                    _ => out.push((a, b)),
                }
            }
            reach = out;
        }
        // sums range over [0, d - d_1]; d_1 must be 1 for the top value d - 1 to be hit
        reach.len() == 1 && reach[0] == (0, self.weight - 1)
    }

    pub fn require_valid(&self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::InvalidTuple(self.to_string()))
        }
    }

    /// Builds `H_0, ..., H_{d-1}` by the interval induction over `l = 3, ..., m - 1`.
    pub fn subset_sum_table(&self) -> Result<SubsetSumTable> {
        self.require_valid()?;
        let m = self.m();
        let mut entries: Vec<Vec<usize>> = vec![vec![], vec![2]];
        let mut covered = 1u64;
        for l in 3..m {
            let dl = self.coeff(l);
            for j in covered + 1..=covered + dl {
                let mut h = entries[(j - dl) as usize].clone();
                h.push(l);
                entries.push(h);
            }
            covered += dl;
        }
        debug_assert_eq!(entries.len() as u64, self.weight);
        Ok(SubsetSumTable { entries })
    }

    /// Sum of `d_k` over the given 1-based positions.
    pub fn positions_sum(&self, positions: &[usize]) -> u64 {
        positions.iter().map(|&k| self.coeff(k)).sum()
    }
}

impl fmt::Display for CoefficientTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, c) in self.coeffs.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for CoefficientTuple {
    type Err = Error;

    /// Parses the comma-separated form, e.g. `1,1,2,3`.
    fn from_str(s: &str) -> Result<Self> {
        let coeffs = s
            .split(',')
            .map(|part| {
                part.trim()
                    .parse::<u64>()
                    .map_err(|_| Error::MalformedTuple(format!("bad coefficient {part:?} in {s:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(coeffs)
    }
}

impl Serialize for CoefficientTuple {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.coeffs.serialize(serializer)
    }
}

/// `H_j` for each `j` in `[0, d - 1]`: a set of positions in `{2, ..., m - 1}`
/// whose coefficients sum to `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsetSumTable {
    entries: Vec<Vec<usize>>,
}

impl SubsetSumTable {
    /// Positions of `H_j`, ascending, or `None` when `j >= d`.
    pub fn get(&self, j: u64) -> Option<&[usize]> {
        self.entries.get(j as usize).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &[usize])> {
        self.entries
            .iter()
            .enumerate()
            .map(|(j, h)| (j as u64, h.as_slice()))
    }
}
