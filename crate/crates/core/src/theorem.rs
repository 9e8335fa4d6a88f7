//! Sufficient conditions for an `S_E` closed form, automatic discovery of
//! `(c, R)` from a greedy prefix, and the explicit `(c_m, R_m)` family for the
//! uniform tuples `E_m = (1, ..., 1)`.
//!
//! For `R = {a_0, ..., a_z}` and `c = a_{z+1}` taken from the greedy sequence,
//! the closed form `c * a + r` (0/1-digit `a` in base `d + 1`, `r` in `R`)
//! describes all of `S_E` when
//!
//! * (i) `c = 1 + d max(R) - sum_{k=2}^{m-1} d_k (m - k - 1)`, and
//! * (ii) for every `r_1` in `[0, c - 1]` and every `j` in `[0, d - 2]` there
//!   are `H` within `{2, ..., m - 1}` with coefficient sum `j` and
//!   `r_2, ..., r_m` in `R` solving the equation, with `{r_k : k in H}` plus
//!   `r_m` pairwise distinct and the remaining `r_k` (`k` not in `H`,
//!   `k != 1, m`) pairwise distinct.

use rayon::prelude::*;
use serde::Serialize;

use crate::closed_form::ClosedForm;
use crate::error::{Error, Result};
use crate::greedy::{Caps, GreedySequence};
use crate::solver::{
    find_representation, all_representations, pairwise_distinct, AvoidanceRule, Budget, FixedSlot,
    FreeSlot, Pool, Representation, Rhs, Search, TermSet, Witness, DEFAULT_NODE_LIMIT,
};
use crate::tuple::CoefficientTuple;

/// A published closed form `(tuple, c, R)` with base `d + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReferenceRow {
    pub tuple: &'static [u64],
    pub c: u64,
    #[serde(rename = "R")]
    pub residues: &'static [u64],
    /// The values the greedy sequence actually gives, when the published ones are wrong.
    pub corrected: Option<Correction>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Correction {
    pub c: u64,
    #[serde(rename = "R")]
    pub residues: &'static [u64],
    pub reason: &'static str,
}

impl ReferenceRow {
    /// `(c, R)` expected from discovery.
    pub fn expected(&self) -> (u64, &'static [u64]) {
        match self.corrected {
            Some(fix) => (fix.c, fix.residues),
            None => (self.c, self.residues),
        }
    }
}

const fn row(tuple: &'static [u64], c: u64, residues: &'static [u64]) -> ReferenceRow {
    ReferenceRow {
        tuple,
        c,
        residues,
        corrected: None,
    }
}

/// Published closed forms for valid tuples with `4 <= m <= 6`.
pub const REFERENCE_CLOSED_FORMS: &[ReferenceRow] = &[
    row(&[1, 1, 1], 12, &[0, 1, 2, 3, 4]),
    row(&[1, 1, 2], 16, &[0, 1, 2, 3, 4]),
    row(&[1, 1, 1, 1], 122, &[0, 1, 2, 3, 5, 7, 13, 26, 27, 28, 29, 31]),
    row(&[1, 1, 1, 2], 103, &[0, 1, 2, 3, 4, 14, 18, 19, 20, 21]),
    ReferenceRow {
        tuple: &[1, 1, 2, 3],
        c: 81,
        residues: &[0, 1, 2, 3, 4, 14, 17, 31, 130, 131, 132, 133, 134, 144, 147],
        corrected: Some(Correction {
            c: 81,
            residues: &[0, 1, 2, 3, 10, 11, 12],
            reason: "published R belongs to (1,1,1,2,3) and fails condition (i); S_E begins 0,1,2,3,10,11,12,81",
        }),
    },
    row(&[1, 1, 2, 4], 29, &[0, 1, 2, 3, 4]),
    row(&[1, 1, 1, 1, 1], 25, &[0, 1, 2, 3, 4, 5, 6]),
    row(&[1, 1, 1, 1, 2], 31, &[0, 1, 2, 3, 4, 5, 6]),
    row(&[1, 1, 1, 1, 3], 30, &[0, 1, 2, 3, 4, 5]),
    row(&[1, 1, 1, 1, 4], 51, &[0, 1, 2, 3, 4, 6, 7]),
    row(&[1, 1, 1, 2, 2], 106, &[0, 1, 2, 3, 4, 14, 15, 16]),
    row(&[1, 1, 1, 2, 3], 1170, &[0, 1, 2, 3, 4, 14, 17, 31, 130, 131, 132, 133, 134, 144, 147]),
    row(&[1, 1, 1, 3, 3], 38, &[0, 1, 2, 3, 4, 5]),
    row(&[1, 1, 1, 3, 4], 43, &[0, 1, 2, 3, 4, 5]),
    row(&[1, 1, 1, 3, 5], 48, &[0, 1, 2, 3, 4, 5]),
    row(&[1, 1, 1, 3, 6], 653, &[0, 1, 2, 3, 4, 12, 34, 42, 48, 55]),
    row(&[1, 1, 2, 2, 2], 32, &[0, 1, 2, 3, 4, 5]),
    row(&[1, 1, 2, 2, 3], 208, &[0, 1, 2, 3, 4, 18, 19, 20, 24]),
    row(
        &[1, 1, 2, 2, 5],
        3622,
        &[0, 1, 2, 3, 4, 19, 22, 28, 50, 300, 301, 302, 303, 304, 319, 322, 330],
    ),
    row(&[1, 1, 2, 2, 6], 52, &[0, 1, 2, 3, 4, 5]),
    row(&[1, 1, 2, 3, 3], 401, &[0, 1, 2, 3, 4, 8, 37, 38, 39, 40, 41]),
    row(&[1, 1, 2, 3, 4], 420, &[0, 1, 2, 3, 4, 23, 35, 37, 39]),
    row(&[1, 1, 2, 3, 7], 61, &[0, 1, 2, 3, 4, 5]),
    row(&[1, 1, 2, 4, 4], 50, &[0, 1, 2, 3, 4, 5]),
    ReferenceRow {
        tuple: &[1, 1, 2, 4, 7],
        c: 80,
        residues: &[0, 1, 2, 3, 4, 5, 6],
        corrected: Some(Correction {
            c: 80,
            residues: &[0, 1, 2, 3, 4, 6],
            reason: "5 is excluded: 1*1 + 1*3 + 2*5 + 4*4 + 7*0 = 15*2",
        }),
    },
];

/// Both sides of condition (i).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConditionI {
    /// The candidate `c`.
    pub lhs: i128,
    /// `1 + d max(R) - sum_{k=2}^{m-1} d_k (m - k - 1)`.
    pub rhs: i128,
    pub pass: bool,
}

pub fn check_condition_i(tuple: &CoefficientTuple, residues: &[u64], c: u64) -> Result<ConditionI> {
    tuple.require_valid()?;
    let max = *residues
        .iter()
        .max()
        .ok_or_else(|| Error::Domain("residue set is empty".into()))?;
    let m = tuple.m() as i128;
    let correction: i128 = (2..tuple.m())
        .map(|k| tuple.coeff(k) as i128 * (m - k as i128 - 1))
        .sum();
    let rhs = 1 + tuple.weight() as i128 * max as i128 - correction;
    Ok(ConditionI {
        lhs: c as i128,
        rhs,
        pass: rhs == c as i128,
    })
}

/// Outcome of condition (ii) for one `(r_1, j)` pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CellOutcome {
    pub r1: u64,
    pub j: u64,
    /// 1-based positions of `H_j`, or `None` when the pair failed.
    #[serde(rename = "H")]
    pub h: Option<Vec<usize>>,
    /// `(r_1, ..., r_m)`, or `None` when the pair failed.
    pub witness: Option<Vec<u64>>,
}

impl CellOutcome {
    pub fn passed(&self) -> bool {
        self.witness.is_some()
    }

    /// Re-checks a stored witness against every constraint of condition (ii).
    pub fn validate(&self, tuple: &CoefficientTuple, residues: &[u64]) -> bool {
        let (Some(h), Some(r)) = (&self.h, &self.witness) else {
            return false;
        };
        let m = tuple.m();
        if r.len() != m || r[0] != self.r1 {
            return false;
        }
        if !r[1..].iter().all(|v| residues.contains(v)) {
            return false;
        }
        if h.iter().any(|&k| k < 2 || k > m - 1) || !pairwise_distinct(&h.iter().map(|&k| k as u64).collect::<Vec<_>>()) {
            return false;
        }
        if tuple.positions_sum(h) != self.j {
            return false;
        }
        let lhs: u128 = (1..m).map(|k| tuple.coeff(k) as u128 * r[k - 1] as u128).sum();
        if lhs != tuple.weight() as u128 * r[m - 1] as u128 {
            return false;
        }
        let mut inside: Vec<u64> = h.iter().map(|&k| r[k - 1]).collect();
        inside.push(r[m - 1]);
        let outside: Vec<u64> = (2..m).filter(|k| !h.contains(k)).map(|k| r[k - 1]).collect();
        pairwise_distinct(&inside) && pairwise_distinct(&outside)
    }
}

/// Full evaluation of both conditions for one `(E, R, c)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConditionReport {
    pub tuple: CoefficientTuple,
    pub c: u64,
    #[serde(rename = "R")]
    pub residues: Vec<u64>,
    pub cond_i: ConditionI,
    pub cond_ii: Vec<CellOutcome>,
    pub overall: bool,
}

impl ConditionReport {
    pub fn failures(&self) -> impl Iterator<Item = &CellOutcome> {
        self.cond_ii.iter().filter(|cell| !cell.passed())
    }
}

/// Index sets within `{2, ..., m - 1}` grouped by coefficient sum. Sets that
/// differ only by swapping equal coefficients are interchangeable, so only the
/// first of each such family (in bitmask order) is kept.
fn subsets_by_sum(tuple: &CoefficientTuple) -> Vec<Vec<Vec<usize>>> {
    let inner = tuple.m() - 2;
    let mut by_sum: Vec<Vec<Vec<usize>>> = vec![Vec::new(); tuple.weight() as usize];
    let mut seen = std::collections::HashSet::new();
    for mask in 0u32..(1 << inner) {
        let h: Vec<usize> = (0..inner).filter(|b| mask >> b & 1 == 1).map(|b| b + 2).collect();
        let sum = tuple.positions_sum(&h) as usize;
        if sum >= by_sum.len() {
            continue;
        }
        let signature: Vec<u64> = h.iter().map(|&k| tuple.coeff(k)).collect();
        if seen.insert(signature) {
            by_sum[sum].push(h);
        }
    }
    by_sum
}

fn solve_cell(
    tuple: &CoefficientTuple,
    residues: &TermSet,
    subsets: &[Vec<usize>],
    r1: u64,
    j: u64,
    node_limit: u64,
) -> Result<CellOutcome> {
    const INSIDE: u8 = 0;
    const OUTSIDE: u8 = 1;
    let m = tuple.m();
    let mut budget = Budget::new(node_limit);
    for h in subsets {
        let free = (2..m)
            .map(|k| FreeSlot {
                position: k - 1,
                coeff: tuple.coeff(k),
                class: Some(if h.contains(&k) { INSIDE } else { OUTSIDE }),
            })
            .collect();
        let found = Search::new(
            tuple.weight(),
            m,
            free,
            vec![FixedSlot {
                position: 0,
                coeff: tuple.coeff(1),
                value: r1,
                class: None,
            }],
            Rhs::Free { class: Some(INSIDE) },
            Pool::of(residues),
            Pool::of(residues),
            false,
        )
        .first(&mut budget)?;
        if let Some(values) = found {
            return Ok(CellOutcome {
                r1,
                j,
                h: Some(h.clone()),
                witness: Some(values),
            });
        }
    }
    Ok(CellOutcome {
        r1,
        j,
        h: None,
        witness: None,
    })
}

/// Evaluates conditions (i) and (ii). Cells are searched in parallel and
/// reported in `(r_1, j)` order; `node_limit` applies to each cell.
pub fn check_condition_ii(
    tuple: &CoefficientTuple,
    residues: &[u64],
    c: u64,
    node_limit: u64,
) -> Result<ConditionReport> {
    let cond_i = check_condition_i(tuple, residues, c)?;
    let set = TermSet::from_values(residues.iter().copied());
    let by_sum = subsets_by_sum(tuple);
    let top_j = tuple.weight() - 2;
    let rows: Vec<Vec<CellOutcome>> = (0..c)
        .into_par_iter()
        .map(|r1| {
            (0..=top_j)
                .map(|j| solve_cell(tuple, &set, &by_sum[j as usize], r1, j, node_limit))
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let cond_ii: Vec<CellOutcome> = rows.into_iter().flatten().collect();
    let overall = cond_i.pass && cond_ii.iter().all(CellOutcome::passed);
    Ok(ConditionReport {
        tuple: tuple.clone(),
        c,
        residues: set.as_slice().to_vec(),
        cond_i,
        cond_ii,
        overall,
    })
}

/// Limits for [`discover_closed_forms`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DiscoveryOptions {
    /// Largest `|R|` tried.
    pub max_residues: usize,
    /// Greedy generation stops here.
    pub max_frontier: u64,
    /// Per-call solver budget, for generation and for each condition (ii) cell.
    pub node_limit: u64,
    /// Keep scanning after the first (minimal `c`) success.
    pub find_all: bool,
}

impl Default for DiscoveryOptions {
    fn default() -> Self {
        DiscoveryOptions {
            max_residues: 64,
            max_frontier: 80_000,
            node_limit: DEFAULT_NODE_LIMIT,
            find_all: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Discovery {
    pub closed_form: ClosedForm,
    pub report: ConditionReport,
}

/// Everything a discovery run found, plus how far it looked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DiscoveryOutcome {
    pub found: Vec<Discovery>,
    /// Number of residue-set sizes examined.
    pub prefixes_tried: usize,
    pub frontier: u64,
    pub terms_generated: usize,
}

/// Scans `R = {a_0, ..., a_z}`, `c = a_{z+1}` for `z = 0, 1, ...` over the
/// greedy `S_E` prefix and keeps the pairs passing both conditions.
pub fn discover_closed_forms(tuple: &CoefficientTuple, opts: DiscoveryOptions) -> Result<DiscoveryOutcome> {
    tuple.require_valid()?;
    let mut seq = GreedySequence::start(tuple.clone(), AvoidanceRule::Distinct).with_node_limit(opts.node_limit);
    let mut found = Vec::new();
    let mut tried = 0;
    for z in 0..opts.max_residues {
        seq.advance(Caps {
            max_terms: Some(z + 2),
            max_value: Some(opts.max_frontier),
        })?;
        if seq.len() < z + 2 {
            break;
        }
        tried = z + 1;
        let residues = &seq.terms()[..=z];
        let c = seq.terms()[z + 1];
        if !check_condition_i(tuple, residues, c)?.pass {
            continue;
        }
        let report = check_condition_ii(tuple, residues, c, opts.node_limit)?;
        if report.overall {
            found.push(Discovery {
                closed_form: ClosedForm::for_tuple(tuple, c, residues.to_vec())?,
                report,
            });
            if !opts.find_all {
                break;
            }
        }
    }
    Ok(DiscoveryOutcome {
        found,
        prefixes_tried: tried,
        frontier: seq.frontier(),
        terms_generated: seq.len(),
    })
}

/// The minimal-`c` closed form, if one is found within the limits.
pub fn discover_closed_form(tuple: &CoefficientTuple, opts: DiscoveryOptions) -> Result<Option<Discovery>> {
    let opts = DiscoveryOptions {
        find_all: false,
        ..opts
    };
    Ok(discover_closed_forms(tuple, opts)?.found.into_iter().next())
}

/// `(c_m, R_m)` for the uniform tuple `E_m`.
pub fn table1_parameters(m: usize) -> Result<(u64, Vec<u64>)> {
    match m {
        0..=2 => Err(Error::UnsupportedM(m)),
        3 => Ok((1, vec![0])),
        5 => Ok((122, vec![0, 1, 2, 3, 5, 7, 13, 26, 27, 28, 29, 31])),
        7 => Ok((219, vec![0, 1, 2, 3, 4, 5, 7, 10, 33, 34, 35, 36, 37, 38])),
        m if m % 2 == 0 => {
            let n = (m / 2) as u64;
            Ok((2 * n * n + 3 * n - 2, (0..=2 * n).collect()))
        }
        m => {
            let n = ((m - 1) / 2) as u64;
            let c = 4 * n * n * n + 12 * n * n + 5 * n;
            let base: Vec<u64> = (0..2 * n).chain(std::iter::once(2 * n + 1)).collect();
            let shift = 2 * n * n + 5 * n;
            let mut r: Vec<u64> = base.clone();
            r.push(3 * n + 1);
            r.extend(base.iter().map(|v| v + shift));
            r.sort_unstable();
            Ok((c, r))
        }
    }
}

/// Greedy `S_m` below `c_m` compared against `R_m`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct PrefixCheck {
    pub m: usize,
    pub c: u64,
    pub expected: Vec<u64>,
    pub generated: Vec<u64>,
    pub pass: bool,
}

pub fn verify_prefix(m: usize, node_limit: u64) -> Result<PrefixCheck> {
    let (c, expected) = table1_parameters(m)?;
    let tuple = CoefficientTuple::uniform(m)?;
    let mut seq = GreedySequence::start(tuple, AvoidanceRule::Distinct).with_node_limit(node_limit);
    seq.advance(Caps::value(c - 1))?;
    let generated = seq.terms().to_vec();
    Ok(PrefixCheck {
        m,
        c,
        pass: generated == expected,
        expected,
        generated,
    })
}

/// For each `r_1` in `R_m`, a solution with `r_2, ..., r_m` in `R_m` and
/// `r_2, ..., r_{m-1}` pairwise distinct.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ResidueAveraging {
    pub m: usize,
    pub witnesses: Vec<(u64, Option<Witness>)>,
    pub pass: bool,
}

pub fn check_residue_averaging(m: usize, node_limit: u64) -> Result<ResidueAveraging> {
    let (_, residues) = table1_parameters(m)?;
    let tuple = CoefficientTuple::uniform(m)?;
    let pool = TermSet::from_values(residues.iter().copied());
    let witnesses = residues
        .iter()
        .map(|&r1| {
            let mut budget = Budget::new(node_limit);
            find_representation(r1, &pool, &tuple, Representation::InnerDistinct, &mut budget)
                .map(|w| (r1, w))
        })
        .collect::<Result<Vec<_>>>()?;
    let pass = witnesses.iter().all(|(_, w)| w.is_some());
    Ok(ResidueAveraging { m, witnesses, pass })
}

/// All averaging solutions for one `r_1`, inner values listed ascending.
pub fn residue_averaging_witnesses(m: usize, r1: u64, node_limit: u64) -> Result<Vec<Witness>> {
    let (_, residues) = table1_parameters(m)?;
    let tuple = CoefficientTuple::uniform(m)?;
    let pool = TermSet::from_values(residues);
    all_representations(r1, &pool, &tuple, Representation::InnerDistinct, &mut Budget::new(node_limit))
}
