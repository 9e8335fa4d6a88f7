//! Greedy generation of `A_E` (not-all-equal rule) and `S_E` (distinct rule):
//! start from 0 and keep appending the least larger integer that creates no
//! solution of the weighted-average equation.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::solver::{
    creates_solution, creates_solution_cached, AvoidanceRule, Budget, SearchCache, TermSet, Witness,
    DEFAULT_NODE_LIMIT,
};
use crate::tuple::CoefficientTuple;

/// Largest value the engine will examine.
pub const MAX_VALUE: u64 = i64::MAX as u64;

/// Stopping conditions for generation; at least one must be set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Caps {
    pub max_terms: Option<usize>,
    pub max_value: Option<u64>,
}

impl Caps {
    pub fn terms(n: usize) -> Self {
        Caps {
            max_terms: Some(n),
            max_value: None,
        }
    }

    pub fn value(v: u64) -> Self {
        Caps {
            max_terms: None,
            max_value: Some(v),
        }
    }
}

/// A generated prefix of a greedy sequence, resumable from its frontier.
#[derive(Debug, Clone)]
pub struct GreedySequence {
    tuple: CoefficientTuple,
    rule: AvoidanceRule,
    terms: TermSet,
    frontier: u64,
    node_limit: u64,
    cache: SearchCache,
}

impl PartialEq for GreedySequence {
    fn eq(&self, other: &Self) -> bool {
        self.tuple == other.tuple
            && self.rule == other.rule
            && self.terms == other.terms
            && self.frontier == other.frontier
            && self.node_limit == other.node_limit
    }
}

impl Eq for GreedySequence {}

impl GreedySequence {
    /// The one-term prefix `[0]`.
    pub fn start(tuple: CoefficientTuple, rule: AvoidanceRule) -> Self {
        let mut terms = TermSet::new();
        terms.push(0);
        GreedySequence {
            tuple,
            rule,
            terms,
            frontier: 0,
            node_limit: DEFAULT_NODE_LIMIT,
            cache: SearchCache::default(),
        }
    }

    /// Per-candidate node limit handed to the solver.
    pub fn with_node_limit(mut self, limit: u64) -> Self {
        self.node_limit = limit;
        self
    }

    pub fn tuple(&self) -> &CoefficientTuple {
        &self.tuple
    }

    pub fn rule(&self) -> AvoidanceRule {
        self.rule
    }

    pub fn terms(&self) -> &[u64] {
        self.terms.as_slice()
    }

    pub fn term_set(&self) -> &TermSet {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Highest integer examined so far.
    pub fn frontier(&self) -> u64 {
        self.frontier
    }

    /// Scans candidates `frontier + 1, frontier + 2, ...` until a cap is hit.
    ///
    /// On `BudgetExhausted` the sequence keeps everything decided so far and
    /// can be advanced again later.
    pub fn advance(&mut self, caps: Caps) -> Result<()> {
        if caps.max_terms.is_none() && caps.max_value.is_none() {
            return Err(Error::Domain("generation needs a term or value cap".into()));
        }
        let max_value = caps.max_value.unwrap_or(MAX_VALUE).min(MAX_VALUE);
        loop {
            if caps.max_terms.is_some_and(|n| self.terms.len() >= n) {
                return Ok(());
            }
            if self.frontier >= max_value {
                return Ok(());
            }
            let candidate = self.frontier + 1;
            let mut budget = Budget::new(self.node_limit);
            let rejected = creates_solution_cached(
                &self.terms,
                candidate,
                &self.tuple,
                self.rule,
                &mut self.cache,
                &mut budget,
            )?;
            if rejected.is_none() {
                self.terms.push(candidate);
            }
            self.frontier = candidate;
        }
    }

    /// Functional form of [`advance`](Self::advance).
    pub fn extend(&self, caps: Caps) -> Result<GreedySequence> {
        let mut next = self.clone();
        next.advance(caps)?;
        Ok(next)
    }

    /// Recomputes the witness that excluded `skipped`, a non-term at or below the frontier.
    pub fn skip_certificate(&self, skipped: u64) -> Result<Witness> {
        if skipped > self.frontier || self.terms.contains(skipped) {
            return Err(Error::Domain(format!("{skipped} was not skipped")));
        }
        let below = TermSet::from_values(self.terms().iter().copied().take_while(|&t| t < skipped));
        let mut budget = Budget::new(self.node_limit);
        creates_solution(&below, skipped, &self.tuple, self.rule, &mut budget)?
            .ok_or_else(|| Error::Domain(format!("{skipped} has no rejection witness")))
    }

    /// Serializes to the cache format: a header line, then one term per line.
    pub fn to_cache(&self) -> String {
        let mut out = format!(
            "# tuple={} rule={} frontier={}\n",
            self.tuple, self.rule, self.frontier
        );
        for t in self.terms() {
            writeln!(out, "{t}").unwrap();
        }
        out
    }

    /// Parses the cache format written by [`to_cache`](Self::to_cache).
    pub fn from_cache(text: &str) -> Result<Self> {
        let bad = |msg: &str| Error::MalformedCache(msg.to_string());
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty cache"))?;
        let fields = header
            .strip_prefix("# ")
            .ok_or_else(|| bad("header must start with '# '"))?;
        let (mut tuple, mut rule, mut frontier) = (None, None, None);
        for field in fields.split_whitespace() {
            match field.split_once('=') {
                Some(("tuple", v)) => tuple = Some(v.parse::<CoefficientTuple>()?),
                Some(("rule", v)) => rule = Some(v.parse::<AvoidanceRule>()?),
                Some(("frontier", v)) => {
                    frontier = Some(v.parse::<u64>().map_err(|_| bad("bad frontier"))?)
                }
                _ => return Err(bad(&format!("unknown header field {field:?}"))),
            }
        }
        let (Some(tuple), Some(rule), Some(frontier)) = (tuple, rule, frontier) else {
            return Err(bad("header needs tuple, rule and frontier"));
        };
        let mut terms = TermSet::new();
        for line in lines {
            let v: u64 = line
                .trim()
                .parse()
                .map_err(|_| bad(&format!("bad term {line:?}")))?;
            if terms.max().is_some_and(|last| v <= last) {
                return Err(bad("terms must be strictly increasing"));
            }
            terms.push(v);
        }
        if terms.as_slice().first() != Some(&0) {
            return Err(bad("first term must be 0"));
        }
        if terms.max().is_some_and(|last| last > frontier) {
            return Err(bad("term beyond the frontier"));
        }
        Ok(GreedySequence {
            tuple,
            rule,
            terms,
            frontier,
            node_limit: DEFAULT_NODE_LIMIT,
            cache: SearchCache::default(),
        })
    }
}

/// Generates the greedy prefix from scratch.
pub fn generate(
    tuple: &CoefficientTuple,
    rule: AvoidanceRule,
    caps: Caps,
) -> Result<GreedySequence> {
    let mut seq = GreedySequence::start(tuple.clone(), rule);
    seq.advance(caps)?;
    Ok(seq)
}

/// Reference generator for tests: tries every assignment of the left-hand
/// positions over the current set plus the candidate. Slow; small inputs only.
pub fn naive_generate(tuple: &CoefficientTuple, rule: AvoidanceRule, max_value: u64) -> Vec<u64> {
    let coeffs = tuple.coeffs();
    let weight = tuple.weight() as u128;
    let mut terms: Vec<u64> = vec![0];
    for candidate in 1..=max_value {
        let mut pool = terms.clone();
        pool.push(candidate);
        let members: std::collections::HashSet<u64> = pool.iter().copied().collect();
        let n = pool.len();
        let mut idx = vec![0usize; coeffs.len()];
        let mut bad = false;
        'odometer: loop {
            let sum: u128 = idx
                .iter()
                .zip(coeffs)
                .map(|(&i, &c)| c as u128 * pool[i] as u128)
                .sum();
            if sum.is_multiple_of(weight) {
                let rhs = (sum / weight) as u64;
                if members.contains(&rhs) {
                    let mut vals: Vec<u64> = idx.iter().map(|&i| pool[i]).collect();
                    vals.push(rhs);
                    let ok = match rule {
                        AvoidanceRule::Distinct => {
                            let mut s = vals.clone();
                            s.sort_unstable();
                            s.dedup();
                            s.len() == vals.len()
                        }
                        AvoidanceRule::NotAllEqual => vals.iter().any(|&v| v != vals[0]),
                    };
                    if ok {
                        bad = true;
                        break 'odometer;
                    }
                }
            }
            for slot in idx.iter_mut() {
                *slot += 1;
                if *slot < n {
                    continue 'odometer;
                }
                *slot = 0;
            }
            break;
        }
        if !bad {
            terms.push(candidate);
        }
    }
    terms
}
