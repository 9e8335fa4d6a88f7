//! Exact witness search for `d_1 x_1 + ... + d_{m-1} x_{m-1} = d x_m` over
//! finite sets of nonnegative integers.
//!
//! Every public entry point reduces to one depth-first [`Search`]: the
//! right-hand value `x_m` is enumerated from the largest feasible value
//! downwards, then the free coefficient positions are filled in
//! nonincreasing coefficient order, and the last position is solved by a
//! membership lookup. Positions sharing a coefficient (and a distinctness
//! class) take values in increasing order, strictly so when they must be
//! distinct.
//!
//! Repeated queries against one growing set can pass a [`PairIndex`] cache,
//! which finishes the last two positions with a single sum lookup.

use std::borrow::Cow;
use rustc_hash::FxHashMap;
use std::ops::ControlFlow;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::tuple::CoefficientTuple;

/// Default node cap for a single search call.
pub const DEFAULT_NODE_LIMIT: u64 = 100_000_000;

/// Values above this use binary search instead of a dense bitmap.
const DENSE_LIMIT: u64 = 1 << 26;

/// Which solutions are forbidden.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AvoidanceRule {
    /// All `m` values pairwise distinct (the `S_E` sequences).
    Distinct,
    /// Values not all the same (the `A_E` sequences).
    NotAllEqual,
}

impl AvoidanceRule {
    pub fn as_str(self) -> &'static str {
        match self {
            AvoidanceRule::Distinct => "distinct",
            AvoidanceRule::NotAllEqual => "notallequal",
        }
    }
}

impl std::fmt::Display for AvoidanceRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AvoidanceRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "distinct" => Ok(AvoidanceRule::Distinct),
            "notallequal" | "not-all-equal" => Ok(AvoidanceRule::NotAllEqual),
            other => Err(Error::MalformedTuple(format!("unknown rule {other:?}"))),
        }
    }
}

/// A concrete solution `(x_1, ..., x_{m-1}; x_m)`, aligned with the
/// coefficients of its tuple. The equation is checked on construction.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
#[serde(transparent)]
pub struct Witness {
    values: Vec<u64>,
}

impl Witness {
    pub fn new(values: Vec<u64>, tuple: &CoefficientTuple) -> Result<Self> {
        if values.len() != tuple.m() {
            return Err(Error::MalformedWitness(format!(
                "expected {} values, got {}",
                tuple.m(),
                values.len()
            )));
        }
        let lhs: i128 = tuple
            .coeffs()
            .iter()
            .zip(&values)
            .map(|(&d, &x)| d as i128 * x as i128)
            .sum();
        let rhs = tuple.weight() as i128 * values[values.len() - 1] as i128;
        if lhs != rhs {
            return Err(Error::MalformedWitness(format!(
                "{values:?} does not satisfy the equation for ({tuple}): {lhs} != {rhs}"
            )));
        }
        Ok(Witness { values })
    }

    /// All `m` values, right-hand value last.
    pub fn values(&self) -> &[u64] {
        &self.values
    }

    pub fn lhs(&self) -> &[u64] {
        &self.values[..self.values.len() - 1]
    }

    pub fn rhs(&self) -> u64 {
        self.values[self.values.len() - 1]
    }

    pub fn contains(&self, x: u64) -> bool {
        self.values.contains(&x)
    }

    pub fn respects(&self, rule: AvoidanceRule) -> bool {
        match rule {
            AvoidanceRule::Distinct => pairwise_distinct(&self.values),
            AvoidanceRule::NotAllEqual => self.values.iter().any(|&v| v != self.values[0]),
        }
    }
}

impl std::fmt::Display for Witness {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let (lhs, rhs) = self.values.split_at(self.values.len() - 1);
        f.write_str("(")?;
        for (i, v) in lhs.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ";{})", rhs[0])
    }
}

pub(crate) fn pairwise_distinct(values: &[u64]) -> bool {
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    sorted.windows(2).all(|w| w[0] != w[1])
}

/// A sorted set of nonnegative integers with fast membership, grown by
/// appending larger values.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TermSet {
    sorted: Vec<u64>,
    bits: Vec<u64>,
    dense: bool,
}

impl TermSet {
    pub fn new() -> Self {
        TermSet {
            sorted: Vec::new(),
            bits: Vec::new(),
            dense: true,
        }
    }

    /// Builds from arbitrary values; duplicates are dropped.
    pub fn from_values(values: impl IntoIterator<Item = u64>) -> Self {
        let mut sorted: Vec<u64> = values.into_iter().collect();
        sorted.sort_unstable();
        sorted.dedup();
        let mut set = TermSet::new();
        for v in sorted {
            set.push(v);
        }
        set
    }

    /// Appends `v`, which must exceed every current element.
    pub fn push(&mut self, v: u64) {
        assert!(
            self.sorted.last().is_none_or(|&last| v > last),
            "TermSet::push requires increasing values"
        );
        self.sorted.push(v);
        if self.dense && v < DENSE_LIMIT {
            let word = (v / 64) as usize;
            if word >= self.bits.len() {
                self.bits.resize((word + 1).next_power_of_two(), 0);
            }
            self.bits[word] |= 1 << (v % 64);
        } else {
            self.dense = false;
            self.bits = Vec::new();
        }
    }

    #[inline]
    pub fn contains(&self, v: u64) -> bool {
        if self.dense {
            let word = (v / 64) as usize;
            word < self.bits.len() && self.bits[word] & (1 << (v % 64)) != 0
        } else {
            self.sorted.binary_search(&v).is_ok()
        }
    }

    pub fn as_slice(&self) -> &[u64] {
        &self.sorted
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn max(&self) -> Option<u64> {
        self.sorted.last().copied()
    }
}

/// Per-call node budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Budget {
    limit: u64,
    spent: u64,
}

impl Budget {
    pub fn new(limit: u64) -> Self {
        Budget { limit, spent: 0 }
    }

    pub fn spent(&self) -> u64 {
        self.spent
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    #[inline]
    fn tick(&mut self) -> Result<()> {
        self.spent += 1;
        if self.spent > self.limit {
            Err(Error::BudgetExhausted { limit: self.limit })
        } else {
            Ok(())
        }
    }
}

impl Default for Budget {
    fn default() -> Self {
        Budget::new(DEFAULT_NODE_LIMIT)
    }
}

/// A value set for free positions: sorted values plus membership.
#[derive(Clone, Copy)]
pub(crate) struct Pool<'a> {
    sorted: &'a [u64],
    set: &'a TermSet,
    extra: Option<u64>,
}

impl<'a> Pool<'a> {
    pub(crate) fn of(set: &'a TermSet) -> Self {
        Pool {
            sorted: set.as_slice(),
            set,
            extra: None,
        }
    }

    /// `set` plus one extra value; `merged` must be the sorted union.
    fn with_extra(set: &'a TermSet, merged: &'a [u64], extra: u64) -> Self {
        Pool {
            sorted: merged,
            set,
            extra: Some(extra),
        }
    }

    #[inline]
    fn contains(&self, v: u64) -> bool {
        self.extra == Some(v) || self.set.contains(v)
    }
}

/// All sums `hi * a + lo * b` over pairs from a growing [`TermSet`], with the
/// pairs that produce them. For `hi == lo` only `a <= b` is stored.
#[derive(Debug, Clone)]
pub(crate) struct PairIndex {
    hi: u64,
    lo: u64,
    indexed: usize,
    /// Presence bits for sums below `SUM_BITS_LIMIT`; most lookups miss.
    present: Vec<u64>,
    buckets: FxHashMap<u128, Vec<(u64, u64)>>,
}

const SUM_BITS_LIMIT: u128 = 1 << 28;

impl PairIndex {
    fn new(hi: u64, lo: u64) -> Self {
        PairIndex {
            hi,
            lo,
            indexed: 0,
            present: Vec::new(),
            buckets: FxHashMap::default(),
        }
    }

    /// Indexes the elements of `set` added since the last call.
    fn sync(&mut self, set: &TermSet) {
        let values = set.as_slice();
        for j in self.indexed..values.len() {
            let t = values[j];
            for &a in &values[..=j] {
                self.insert(a, t);
                if self.hi != self.lo && a != t {
                    self.insert(t, a);
                }
            }
        }
        self.indexed = values.len();
    }

    fn insert(&mut self, a: u64, b: u64) {
        let key = self.hi as u128 * a as u128 + self.lo as u128 * b as u128;
        if key < SUM_BITS_LIMIT {
            let word = (key / 64) as usize;
            if word >= self.present.len() {
                self.present.resize((word + 1).next_power_of_two(), 0);
            }
            self.present[word] |= 1 << (key % 64);
        }
        self.buckets.entry(key).or_default().push((a, b));
    }

    fn bucket(&self, sum: i128) -> &[(u64, u64)] {
        if sum < 0 {
            return &[];
        }
        let key = sum as u128;
        if key < SUM_BITS_LIMIT {
            let word = (key / 64) as usize;
            if word >= self.present.len() || self.present[word] & (1 << (key % 64)) == 0 {
                return &[];
            }
        }
        self.buckets.get(&key).map_or(&[], Vec::as_slice)
    }
}

/// Weighted sumsets `{c_1 v_1 + ... + c_k v_k : v_i in set}` (repeats allowed)
/// as bitsets, one per coefficient multiset and closed under removing a
/// coefficient. A target outside the sumset of the positions still to be
/// filled has no completion, so whole subtrees are skipped.
#[derive(Debug, Clone, Default)]
struct SumFilters {
    indexed: usize,
    sets: Vec<FilterSet>,
}

#[derive(Debug, Clone)]
struct FilterSet {
    /// Coefficient multiset, decreasing.
    key: Vec<u64>,
    /// `None` once the sumset outgrows `SUM_FILTER_BITS`.
    bits: Option<Vec<u64>>,
    /// For each distinct coefficient `c`: `c` and the id of `key` minus one `c`.
    parents: Vec<(u64, Option<usize>)>,
}

const SUM_FILTER_BITS: u128 = 1 << 28;

impl SumFilters {
    fn find(&self, key: &[u64]) -> Option<usize> {
        self.sets.iter().position(|f| f.key == key)
    }

    /// Id of the filter for `key`, creating it (and its sub-multisets) if needed.
    fn ensure(&mut self, key: &[u64], set: &TermSet) -> usize {
        if let Some(id) = self.find(key) {
            return id;
        }
        let mut pending = vec![key.to_vec()];
        let mut i = 0;
        while i < pending.len() {
            let k = pending[i].clone();
            for j in 0..k.len() {
                let mut sub = k.clone();
                sub.remove(j);
                if !sub.is_empty() && !pending.contains(&sub) && self.find(&sub).is_none() {
                    pending.push(sub);
                }
            }
            i += 1;
        }
        pending.sort_by_key(Vec::len);
        for k in pending {
            let mut distinct = k.clone();
            distinct.dedup();
            let parents = distinct
                .into_iter()
                .map(|c| {
                    let mut rest = k.clone();
                    let at = rest.iter().position(|&x| x == c).expect("coefficient present");
                    rest.remove(at);
                    (c, self.find(&rest))
                })
                .collect();
            self.sets.push(FilterSet {
                key: k,
                bits: None,
                parents,
            });
        }
        // replay the whole set so old and new filters stay in step
        for f in &mut self.sets {
            f.bits = Some(Vec::new());
        }
        self.indexed = 0;
        self.sync(set);
        self.find(key).expect("just inserted")
    }

    fn sync(&mut self, set: &TermSet) {
        let values = set.as_slice();
        let mut order: Vec<usize> = (0..self.sets.len()).collect();
        order.sort_by_key(|&id| self.sets[id].key.len());
        for &t in &values[self.indexed..] {
            for &id in &order {
                let Some(mut bits) = self.sets[id].bits.take() else { continue };
                let total: u128 = self.sets[id].key.iter().map(|&c| c as u128).sum();
                if total * t as u128 >= SUM_FILTER_BITS {
                    continue;
                }
                let mut complete = true;
                for &(c, parent) in &self.sets[id].parents {
                    let shift = (c * t) as usize;
                    match parent {
                        None => set_bit(&mut bits, shift),
                        Some(p) => match &self.sets[p].bits {
                            Some(src) => or_shifted(&mut bits, src, shift),
                            None => complete = false,
                        },
                    }
                }
                if complete {
                    self.sets[id].bits = Some(bits);
                }
            }
        }
        self.indexed = values.len();
    }

    fn bits(&self, id: usize) -> Option<&[u64]> {
        self.sets[id].bits.as_deref()
    }
}

fn set_bit(bits: &mut Vec<u64>, at: usize) {
    let word = at / 64;
    if word >= bits.len() {
        bits.resize(word + 1, 0);
    }
    bits[word] |= 1 << (at % 64);
}

fn or_shifted(dst: &mut Vec<u64>, src: &[u64], shift: usize) {
    let (q, r) = (shift / 64, shift % 64);
    let need = src.len() + q + 1;
    if dst.len() < need {
        dst.resize(need, 0);
    }
    for (i, &w) in src.iter().enumerate() {
        if w == 0 {
            continue;
        }
        dst[i + q] |= w << r;
        if r > 0 {
            dst[i + q + 1] |= w >> (64 - r);
        }
    }
}

fn has_bit(bits: &[u64], at: i128) -> bool {
    if at < 0 {
        return false;
    }
    let word = (at / 64) as usize;
    word < bits.len() && bits[word] & (1 << (at % 64)) != 0
}

/// The candidate-independent part of one `creates_solution` search.
#[derive(Debug, Clone)]
pub(crate) struct Plan {
    slots: Vec<Prepared>,
    /// Left-hand position and coefficient taken by the candidate; `None`
    /// puts the candidate on the right-hand side.
    fixed: Option<(usize, u64)>,
    class: Option<u8>,
    pair: Option<usize>,
    filters: Vec<Option<usize>>,
}

/// Search plans, pair indexes and sum filters kept in step with one set that
/// only ever grows by appending.
#[derive(Debug, Clone, Default)]
pub(crate) struct SearchCache {
    pairs: Vec<PairIndex>,
    sums: SumFilters,
    plans: Vec<Plan>,
    /// Set size and tuple at the last preparation.
    prepared: Option<(usize, CoefficientTuple, AvoidanceRule)>,
}

impl SearchCache {
    fn pair_id(&mut self, hi: u64, lo: u64) -> usize {
        match self.pairs.iter().position(|p| p.hi == hi && p.lo == lo) {
            Some(id) => id,
            None => {
                self.pairs.push(PairIndex::new(hi, lo));
                self.pairs.len() - 1
            }
        }
    }
}

/// A position left for the search to fill.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FreeSlot {
    /// 0-based index into the witness value vector.
    pub position: usize,
    pub coeff: u64,
    /// Values sharing a class must be pairwise distinct.
    pub class: Option<u8>,
}

/// A position whose value is fixed before the search starts.
#[derive(Debug, Clone, Copy)]
pub(crate) struct FixedSlot {
    pub position: usize,
    pub coeff: u64,
    pub value: u64,
    pub class: Option<u8>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) enum Rhs {
    Fixed { value: u64, class: Option<u8> },
    Free { class: Option<u8> },
}

#[derive(Debug, Clone, Copy)]
struct Prepared {
    slot: FreeSlot,
    /// Shares coefficient and class with the previous slot in fill order.
    follows_group: bool,
    /// Number of later slots in the same group.
    group_rest: u64,
    /// Coefficient sum of later slots outside the group.
    other_coeff: i128,
}

/// One depth-first search instance.
pub(crate) struct Search<'a> {
    slots: Cow<'a, [Prepared]>,
    fixed: Vec<FixedSlot>,
    rhs: Rhs,
    weight: i128,
    width: usize,
    pool: Pool<'a>,
    rhs_pool: Pool<'a>,
    not_all_equal: bool,
    cache: Option<&'a SearchCache>,
    pair: Option<usize>,
    /// Sum filter id for the slots `i..` at level `i`.
    filters: &'a [Option<usize>],
    // scratch
    values: Vec<u64>,
    classes: Vec<Option<u8>>,
    assigned: Vec<bool>,
}

fn prepare_slots(mut free: Vec<FreeSlot>) -> Vec<Prepared> {
    free.sort_by(|a, b| {
        b.coeff
            .cmp(&a.coeff)
            .then(a.class.cmp(&b.class))
            .then(a.position.cmp(&b.position))
    });
    let same = |a: &FreeSlot, b: &FreeSlot| a.coeff == b.coeff && a.class == b.class;
    (0..free.len())
        .map(|i| {
            let group_rest = free[i + 1..].iter().filter(|s| same(s, &free[i])).count() as u64;
            let other_coeff = free[i + 1..]
                .iter()
                .filter(|s| !same(s, &free[i]))
                .map(|s| s.coeff as i128)
                .sum();
            Prepared {
                slot: free[i],
                follows_group: i > 0 && same(&free[i - 1], &free[i]),
                group_rest,
                other_coeff,
            }
        })
        .collect()
}

impl<'a> Search<'a> {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn new(
        weight: u64,
        width: usize,
        free: Vec<FreeSlot>,
        fixed: Vec<FixedSlot>,
        rhs: Rhs,
        pool: Pool<'a>,
        rhs_pool: Pool<'a>,
        not_all_equal: bool,
    ) -> Self {
        Self::assemble(
            Cow::Owned(prepare_slots(free)),
            weight,
            width,
            fixed,
            rhs,
            pool,
            rhs_pool,
            not_all_equal,
        )
    }

    /// A search for `candidate` following `plan`; the cache, when given, must
    /// be the one the plan came from and be synced with the pool's base set.
    #[allow(clippy::too_many_arguments)]
    fn from_plan(
        plan: &'a Plan,
        cache: Option<&'a SearchCache>,
        weight: u64,
        width: usize,
        candidate: u64,
        pool: Pool<'a>,
        not_all_equal: bool,
    ) -> Self {
        let (fixed, rhs) = match plan.fixed {
            None => (
                Vec::new(),
                Rhs::Fixed {
                    value: candidate,
                    class: plan.class,
                },
            ),
            Some((position, coeff)) => (
                vec![FixedSlot {
                    position,
                    coeff,
                    value: candidate,
                    class: plan.class,
                }],
                Rhs::Free { class: plan.class },
            ),
        };
        let mut search = Self::assemble(
            Cow::Borrowed(&plan.slots),
            weight,
            width,
            fixed,
            rhs,
            pool,
            pool,
            not_all_equal,
        );
        if cache.is_some() {
            search.cache = cache;
            search.pair = plan.pair;
            search.filters = &plan.filters;
        }
        search
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        slots: Cow<'a, [Prepared]>,
        weight: u64,
        width: usize,
        fixed: Vec<FixedSlot>,
        rhs: Rhs,
        pool: Pool<'a>,
        rhs_pool: Pool<'a>,
        not_all_equal: bool,
    ) -> Self {
        let mut values = vec![0; width];
        let mut classes = vec![None; width];
        let mut assigned = vec![false; width];
        for f in &fixed {
            values[f.position] = f.value;
            classes[f.position] = f.class;
            assigned[f.position] = true;
        }
        Search {
            slots,
            fixed,
            rhs,
            weight: weight as i128,
            width,
            pool,
            rhs_pool,
            not_all_equal,
            cache: None,
            pair: None,
            filters: &[],
            values,
            classes,
            assigned,
        }
    }

    /// Runs the search, handing every solution to `visit` until it breaks.
    /// Returns `true` when `visit` asked to stop.
    pub(crate) fn run(
        &mut self,
        budget: &mut Budget,
        visit: &mut dyn FnMut(&[u64]) -> ControlFlow<()>,
    ) -> Result<bool> {
        // two fixed values of one class that collide make the instance empty
        for (i, a) in self.fixed.iter().enumerate() {
            for b in &self.fixed[i + 1..] {
                if a.class.is_some() && a.class == b.class && a.value == b.value {
                    return Ok(false);
                }
            }
        }
        let fixed_lhs: i128 = self
            .fixed
            .iter()
            .map(|f| f.coeff as i128 * f.value as i128)
            .sum();
        let rhs_pos = self.width - 1;
        match self.rhs {
            Rhs::Fixed { value, class } => {
                budget.tick()?;
                if !self.fits_class(value, class) {
                    return Ok(false);
                }
                self.place(rhs_pos, value, class);
                let target = self.weight * value as i128 - fixed_lhs;
                let stop = self.fill(0, target, budget, visit)?;
                self.unplace(rhs_pos);
                Ok(stop)
            }
            Rhs::Free { class } => {
                let free_coeff: i128 = self.slots.iter().map(|s| s.slot.coeff as i128).sum();
                let (p_min, p_max) = match (self.pool.sorted.first(), self.pool.sorted.last()) {
                    (Some(&a), Some(&b)) => (a as i128, b as i128),
                    _ if self.slots.is_empty() => (0, 0),
                    _ => return Ok(false),
                };
                let lo_sum = fixed_lhs + free_coeff * p_min;
                let hi_sum = fixed_lhs + free_coeff * p_max;
                let lo = div_ceil(lo_sum, self.weight).max(0);
                let hi = hi_sum.div_euclid(self.weight);
                if hi < lo {
                    return Ok(false);
                }
                let rhs_values = self.rhs_pool.sorted;
                let start = rhs_values.partition_point(|&v| (v as i128) < lo);
                let end = rhs_values.partition_point(|&v| (v as i128) <= hi);
                for idx in (start..end).rev() {
                    let value = rhs_values[idx];
                    budget.tick()?;
                    if !self.fits_class(value, class) {
                        continue;
                    }
                    self.place(rhs_pos, value, class);
                    let target = self.weight * value as i128 - fixed_lhs;
                    let stop = self.fill(0, target, budget, visit)?;
                    self.unplace(rhs_pos);
                    if stop {
                        return Ok(true);
                    }
                }
                Ok(false)
            }
        }
    }

    /// The first solution in search order.
    pub(crate) fn first(&mut self, budget: &mut Budget) -> Result<Option<Vec<u64>>> {
        let mut found = None;
        self.run(budget, &mut |vals| {
            found = Some(vals.to_vec());
            ControlFlow::Break(())
        })?;
        Ok(found)
    }

    #[inline]
    fn place(&mut self, pos: usize, value: u64, class: Option<u8>) {
        self.values[pos] = value;
        self.classes[pos] = class;
        self.assigned[pos] = true;
    }

    #[inline]
    fn unplace(&mut self, pos: usize) {
        self.assigned[pos] = false;
    }

    #[inline]
    fn fits_class(&self, value: u64, class: Option<u8>) -> bool {
        let Some(c) = class else { return true };
        !(0..self.width)
            .any(|p| self.assigned[p] && self.classes[p] == Some(c) && self.values[p] == value)
    }

    fn fill(
        &mut self,
        i: usize,
        target: i128,
        budget: &mut Budget,
        visit: &mut dyn FnMut(&[u64]) -> ControlFlow<()>,
    ) -> Result<bool> {
        if i == self.slots.len() {
            if target != 0 {
                return Ok(false);
            }
            return Ok(self.emit(visit));
        }
        let prep = self.slots[i];
        let coeff = prep.slot.coeff as i128;
        let strict = prep.slot.class.is_some();
        let mut lo: i128 = 0;
        if prep.follows_group {
            let prev = self.values[self.slots[i - 1].slot.position] as i128;
            lo = if strict { prev + 1 } else { prev };
        }
        if let Some(cache) = self.cache {
            if let Some(bits) = self.filters.get(i).copied().flatten().and_then(|id| cache.sums.bits(id)) {
                if !has_bit(bits, target) {
                    return Ok(false);
                }
            }
            if i + 2 == self.slots.len() {
                if let Some(id) = self.pair {
                    return self.finish_pair(i, lo, target, &cache.pairs[id], budget, visit);
                }
            }
        }
        let sorted = self.pool.sorted;
        if i + 1 == self.slots.len() {
            budget.tick()?;
            if target < 0 || target % coeff != 0 {
                return Ok(false);
            }
            let v = target / coeff;
            if v < lo || v > u64::MAX as i128 {
                return Ok(false);
            }
            let v = v as u64;
            if !self.pool.contains(v) || !self.fits_class(v, prep.slot.class) {
                return Ok(false);
            }
            let pos = prep.slot.position;
            self.place(pos, v, prep.slot.class);
            let stop = self.emit(visit);
            self.unplace(pos);
            return Ok(stop);
        }
        let (Some(&p_min), Some(&p_max)) = (sorted.first(), sorted.last()) else {
            return Ok(false);
        };
        let (p_min, p_max) = (p_min as i128, p_max as i128);
        let g = prep.group_rest as i128;
        let rest_max = (prep.other_coeff + g * coeff) * p_max;
        lo = lo.max(div_ceil(target - rest_max, coeff));
        let hi = (target - prep.other_coeff * p_min).div_euclid(coeff * (1 + g));
        if hi < lo {
            return Ok(false);
        }
        let start = sorted.partition_point(|&v| (v as i128) < lo);
        let pos = prep.slot.position;
        for &v in &sorted[start..] {
            if v as i128 > hi {
                break;
            }
            budget.tick()?;
            if !self.fits_class(v, prep.slot.class) {
                continue;
            }
            self.place(pos, v, prep.slot.class);
            let stop = self.fill(i + 1, target - coeff * v as i128, budget, visit)?;
            self.unplace(pos);
            if stop {
                return Ok(true);
            }
        }
        Ok(false)
    }

    /// Solves slots `i` and `i + 1` from the pair index, plus the pairs that
    /// use the pool's extra value, which the index does not hold.
    fn finish_pair(
        &mut self,
        i: usize,
        lo: i128,
        target: i128,
        index: &'a PairIndex,
        budget: &mut Budget,
        visit: &mut dyn FnMut(&[u64]) -> ControlFlow<()>,
    ) -> Result<bool> {
        let a = self.slots[i].slot;
        let b = self.slots[i + 1];
        let (ca, cb) = (a.coeff as i128, b.slot.coeff as i128);
        let swap = ca == cb;
        budget.tick()?;
        for &(x, y) in index.bucket(target) {
            let stop = self.try_pair(i, lo, x, y, budget, visit)?
                || (swap && x != y && self.try_pair(i, lo, y, x, budget, visit)?);
            if stop {
                return Ok(true);
            }
        }
        if let Some(e) = self.pool.extra {
            let e128 = e as i128;
            let rest = target - ca * e128;
            if rest >= 0 && rest % cb == 0 {
                let y = rest / cb;
                if y <= u64::MAX as i128 && self.pool.contains(y as u64) && self.try_pair(i, lo, e, y as u64, budget, visit)? {
                    return Ok(true);
                }
            }
            let rest = target - cb * e128;
            if rest >= 0 && rest % ca == 0 {
                let x = rest / ca;
                if x <= u64::MAX as i128 && x != e128 && self.pool.set.contains(x as u64) && self.try_pair(i, lo, x as u64, e, budget, visit)? {
                    return Ok(true);
                }
            }
        }
        Ok(false)
    }

    fn try_pair(
        &mut self,
        i: usize,
        lo: i128,
        x: u64,
        y: u64,
        budget: &mut Budget,
        visit: &mut dyn FnMut(&[u64]) -> ControlFlow<()>,
    ) -> Result<bool> {
        budget.tick()?;
        let a = self.slots[i].slot;
        let b = self.slots[i + 1];
        if (x as i128) < lo {
            return Ok(false);
        }
        if b.follows_group && (y < x || (b.slot.class.is_some() && y == x)) {
            return Ok(false);
        }
        if !self.fits_class(x, a.class) {
            return Ok(false);
        }
        self.place(a.position, x, a.class);
        let mut stop = false;
        if self.fits_class(y, b.slot.class) {
            self.place(b.slot.position, y, b.slot.class);
            stop = self.emit(visit);
            self.unplace(b.slot.position);
        }
        self.unplace(a.position);
        Ok(stop)
    }

    fn emit(&mut self, visit: &mut dyn FnMut(&[u64]) -> ControlFlow<()>) -> bool {
        if self.not_all_equal && self.values.iter().all(|&v| v == self.values[0]) {
            return false;
        }
        visit(&self.values).is_break()
    }
}

fn div_ceil(a: i128, b: i128) -> i128 {
    let q = a.div_euclid(b);
    if q * b == a {
        q
    } else {
        q + 1
    }
}

/// Sorts the values of each run of equal coefficients among the given
/// 0-based positions, leaving other positions untouched.
fn canonicalize_groups(values: &mut [u64], tuple: &CoefficientTuple, positions: &[usize]) {
    let coeffs = tuple.coeffs();
    let mut start = 0;
    while start < positions.len() {
        let mut end = start + 1;
        while end < positions.len() && coeffs[positions[end]] == coeffs[positions[start]] {
            end += 1;
        }
        let mut group: Vec<u64> = positions[start..end].iter().map(|&p| values[p]).collect();
        group.sort_unstable();
        for (&p, v) in positions[start..end].iter().zip(group) {
            values[p] = v;
        }
        start = end;
    }
}

fn lhs_free_slots(tuple: &CoefficientTuple, skip: Option<usize>, class: Option<u8>) -> Vec<FreeSlot> {
    tuple
        .coeffs()
        .iter()
        .enumerate()
        .filter(|&(p, _)| Some(p) != skip)
        .map(|(position, &coeff)| FreeSlot {
            position,
            coeff,
            class,
        })
        .collect()
}

/// Looks for a solution over `ground ∪ {candidate}` that uses `candidate`.
///
/// `ground` is assumed to be solution-free under `(tuple, rule)`, so a
/// `None` result means the union is solution-free as well. The returned
/// witness lists equal-coefficient positions in ascending order.
pub fn creates_solution(
    ground: &TermSet,
    candidate: u64,
    tuple: &CoefficientTuple,
    rule: AvoidanceRule,
    budget: &mut Budget,
) -> Result<Option<Witness>> {
    creates_solution_with(ground, candidate, tuple, rule, None, budget)
}

/// [`creates_solution`] through a pair cache for `ground`. The witness found
/// may differ from the uncached one; existence does not.
pub(crate) fn creates_solution_cached(
    ground: &TermSet,
    candidate: u64,
    tuple: &CoefficientTuple,
    rule: AvoidanceRule,
    cache: &mut SearchCache,
    budget: &mut Budget,
) -> Result<Option<Witness>> {
    let stamp = (ground.len(), tuple.clone(), rule);
    if cache.prepared.as_ref() != Some(&stamp) {
        prepare_cache(ground, tuple, rule, cache);
        cache.prepared = Some(stamp);
    }
    creates_solution_with(ground, candidate, tuple, rule, Some(cache), budget)
}

fn rule_class(rule: AvoidanceRule) -> Option<u8> {
    match rule {
        AvoidanceRule::Distinct => Some(0),
        AvoidanceRule::NotAllEqual => None,
    }
}

/// Role (a) puts the candidate on the right; role (b) puts it at the first
/// position of each run of equal coefficients.
fn build_plans(tuple: &CoefficientTuple, rule: AvoidanceRule) -> Vec<Plan> {
    let class = rule_class(rule);
    let coeffs = tuple.coeffs();
    let mut plans = vec![Plan {
        slots: prepare_slots(lhs_free_slots(tuple, None, class)),
        fixed: None,
        class,
        pair: None,
        filters: Vec::new(),
    }];
    for p in 0..coeffs.len() {
        if p > 0 && coeffs[p] == coeffs[p - 1] {
            continue;
        }
        plans.push(Plan {
            slots: prepare_slots(lhs_free_slots(tuple, Some(p), class)),
            fixed: Some((p, coeffs[p])),
            class,
            pair: None,
            filters: Vec::new(),
        });
    }
    plans
}

fn prepare_cache(ground: &TermSet, tuple: &CoefficientTuple, rule: AvoidanceRule, cache: &mut SearchCache) {
    let mut plans = build_plans(tuple, rule);
    for plan in &mut plans {
        let coeffs: Vec<u64> = plan.slots.iter().map(|p| p.slot.coeff).collect();
        let k = coeffs.len();
        if k >= 2 {
            plan.pair = Some(cache.pair_id(coeffs[k - 2], coeffs[k - 1]));
        }
        // the NotAllEqual pool carries the candidate as an extra value the filters do not know
        if rule == AvoidanceRule::Distinct {
            plan.filters = (0..k)
                .map(|i| (k - i >= 3).then(|| cache.sums.ensure(&coeffs[i..], ground)))
                .collect();
        }
    }
    for index in &mut cache.pairs {
        index.sync(ground);
    }
    cache.sums.sync(ground);
    cache.plans = plans;
}

fn creates_solution_with(
    ground: &TermSet,
    candidate: u64,
    tuple: &CoefficientTuple,
    rule: AvoidanceRule,
    cache: Option<&SearchCache>,
    budget: &mut Budget,
) -> Result<Option<Witness>> {
    if ground.contains(candidate) {
        return Err(Error::Domain(format!("candidate {candidate} already in the ground set")));
    }
    let merged: Vec<u64>;
    let pool = match rule {
        AvoidanceRule::Distinct => Pool::of(ground),
        AvoidanceRule::NotAllEqual => {
            let s = ground.as_slice();
            let at = s.partition_point(|&v| v < candidate);
            merged = s[..at]
                .iter()
                .copied()
                .chain(std::iter::once(candidate))
                .chain(s[at..].iter().copied())
                .collect();
            Pool::with_extra(ground, &merged, candidate)
        }
    };
    let built: Vec<Plan>;
    let plans: &[Plan] = match cache {
        Some(c) => &c.plans,
        None => {
            built = build_plans(tuple, rule);
            &built
        }
    };
    let mut found = None;
    for plan in plans {
        found = Search::from_plan(
            plan,
            cache,
            tuple.weight(),
            tuple.m(),
            candidate,
            pool,
            rule == AvoidanceRule::NotAllEqual,
        )
        .first(budget)?;
        if found.is_some() {
            break;
        }
    }
    match found {
        Some(mut values) => {
            let all_lhs: Vec<usize> = (0..tuple.m() - 1).collect();
            canonicalize_groups(&mut values, tuple, &all_lhs);
            Ok(Some(Witness::new(values, tuple)?))
        }
        None => Ok(None),
    }
}

/// Which positions of a representation must differ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Representation {
    /// All `m` values pairwise distinct, `x_1 = alpha` included.
    Distinct,
    /// Only `x_2, ..., x_{m-1}` pairwise distinct; `x_1` and `x_m` are free.
    InnerDistinct,
}

fn representation_search<'a>(
    alpha: u64,
    pool: &'a TermSet,
    tuple: &CoefficientTuple,
    mode: Representation,
) -> Search<'a> {
    let m = tuple.m();
    let (outer, inner) = match mode {
        Representation::Distinct => (Some(0), Some(0)),
        Representation::InnerDistinct => (None, Some(0)),
    };
    Search::new(
        tuple.weight(),
        m,
        lhs_free_slots(tuple, Some(0), inner),
        vec![FixedSlot {
            position: 0,
            coeff: tuple.coeff(1),
            value: alpha,
            class: outer,
        }],
        Rhs::Free { class: outer },
        Pool::of(pool),
        Pool::of(pool),
        false,
    )
}

/// Finds `x_2, ..., x_m` in `pool` with `x_1 = alpha` solving the equation.
pub fn find_representation(
    alpha: u64,
    pool: &TermSet,
    tuple: &CoefficientTuple,
    mode: Representation,
    budget: &mut Budget,
) -> Result<Option<Witness>> {
    if mode == Representation::Distinct && pool.contains(alpha) {
        return Err(Error::Domain(format!("alpha {alpha} lies in the pool")));
    }
    let found = representation_search(alpha, pool, tuple, mode).first(budget)?;
    let inner: Vec<usize> = (1..tuple.m() - 1).collect();
    found
        .map(|mut v| {
            canonicalize_groups(&mut v, tuple, &inner);
            Witness::new(v, tuple)
        })
        .transpose()
}

/// Every representation of `alpha`, one per assignment up to reordering of
/// equal-coefficient positions among `x_2, ..., x_{m-1}`.
pub fn all_representations(
    alpha: u64,
    pool: &TermSet,
    tuple: &CoefficientTuple,
    mode: Representation,
    budget: &mut Budget,
) -> Result<Vec<Witness>> {
    let mut raw = Vec::new();
    representation_search(alpha, pool, tuple, mode).run(budget, &mut |vals| {
        raw.push(vals.to_vec());
        ControlFlow::Continue(())
    })?;
    let inner: Vec<usize> = (1..tuple.m() - 1).collect();
    raw.into_iter()
        .map(|mut v| {
            canonicalize_groups(&mut v, tuple, &inner);
            Witness::new(v, tuple)
        })
        .collect()
}

/// Searches for any solution lying entirely inside `set`.
///
/// Adds the elements one at a time and asks [`creates_solution`] about each,
/// so a solution is found as soon as its largest element is added.
pub fn verify_solution_free(
    set: &[u64],
    tuple: &CoefficientTuple,
    rule: AvoidanceRule,
    budget: &mut Budget,
) -> Result<Option<Witness>> {
    let mut sorted = set.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut ground = TermSet::new();
    for v in sorted {
        if let Some(w) = creates_solution(&ground, v, tuple, rule, budget)? {
            return Ok(Some(w));
        }
        ground.push(v);
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(s: &str) -> CoefficientTuple {
        s.parse().unwrap()
    }

    fn set(v: &[u64]) -> TermSet {
        TermSet::from_values(v.iter().copied())
    }

    #[test]
    fn creates_solution_examples() {
        let w = creates_solution(&set(&[0, 1]), 2, &t("1,1"), AvoidanceRule::Distinct, &mut Budget::default())
            .unwrap()
            .unwrap();
        assert_eq!(w.values(), &[0, 2, 1]);

        let none = creates_solution(
            &set(&[0, 1, 3, 4]),
            9,
            &t("1,1"),
            AvoidanceRule::Distinct,
            &mut Budget::default(),
        )
        .unwrap();
        assert!(none.is_none());

        let none = creates_solution(&set(&[0]), 1, &t("1,1,1"), AvoidanceRule::NotAllEqual, &mut Budget::default())
            .unwrap();
        assert!(none.is_none());
    }

    #[test]
    fn candidate_in_ground_is_rejected() {
        let r = creates_solution(&set(&[0, 1]), 1, &t("1,1"), AvoidanceRule::Distinct, &mut Budget::default());
        assert!(matches!(r, Err(Error::Domain(_))));
    }

    #[test]
    fn not_all_equal_allows_repeated_candidate() {
        // 0 + 2*3 ... (1,2): x_1 + 2 x_2 = 3 x_3; with {0} and candidate 3: 3 + 2*0 = 3*1? no.
        // (1,1): x_1 + x_2 = 2 x_3 over {0, 2} with candidate 1: 0 + 2 = 2*1.
        let w = creates_solution(&set(&[0, 2]), 1, &t("1,1"), AvoidanceRule::NotAllEqual, &mut Budget::default())
            .unwrap()
            .unwrap();
        assert_eq!(w.values(), &[0, 2, 1]);
        // (1,1,1) over {0} with candidate 3: 3 + 3 + 0 = 3 * 2? 2 absent. 3+0+0 = 3*1? 1 absent.
        let none = creates_solution(&set(&[0]), 3, &t("1,1,1"), AvoidanceRule::NotAllEqual, &mut Budget::default())
            .unwrap();
        assert!(none.is_none());
        // (1,1,1) over {0, 1}: 2+2+2? all equal. 2 + 1 + 0 = 3 * 1.
        let w = creates_solution(&set(&[0, 1]), 2, &t("1,1,1"), AvoidanceRule::NotAllEqual, &mut Budget::default())
            .unwrap()
            .unwrap();
        assert!(w.respects(AvoidanceRule::NotAllEqual));
        assert!(w.contains(2));
    }

    #[test]
    fn find_representation_examples() {
        let pool = set(&[0, 1, 2, 3, 4]);
        let w = find_representation(5, &pool, &t("1,1,1"), Representation::Distinct, &mut Budget::default())
            .unwrap()
            .unwrap();
        assert_eq!(w.values(), &[5, 0, 4, 3]);

        let none = find_representation(2, &set(&[0, 1]), &t("1,1,1"), Representation::Distinct, &mut Budget::default())
            .unwrap();
        assert!(none.is_none());
    }

    #[test]
    fn relaxed_representation_of_thirteen() {
        let r5 = [0, 1, 2, 3, 5, 7, 13, 26, 27, 28, 29, 31];
        let pool = set(&r5);
        let e = t("1,1,1,1");
        let all = all_representations(13, &pool, &e, Representation::InnerDistinct, &mut Budget::default())
            .unwrap();
        assert!(all.iter().any(|w| w.values() == [13, 3, 5, 7, 7]));
        assert!(all.iter().all(|w| pairwise_distinct(&w.values()[1..4])));

        let without: Vec<u64> = r5.iter().copied().filter(|&v| v != 13).collect();
        let pool = set(&without);
        if let Some(w) = find_representation(13, &pool, &e, Representation::Distinct, &mut Budget::default()).unwrap() {
            assert!(w.respects(AvoidanceRule::Distinct));
            assert_ne!(w.values(), &[13, 3, 5, 7, 7]);
        }
    }

    #[test]
    fn verify_solution_free_examples() {
        let e = t("1,1");
        assert!(verify_solution_free(&[0, 1, 3, 4, 9, 10, 12, 13], &e, AvoidanceRule::Distinct, &mut Budget::default())
            .unwrap()
            .is_none());
        let w = verify_solution_free(&[0, 1, 2], &e, AvoidanceRule::Distinct, &mut Budget::default())
            .unwrap()
            .unwrap();
        assert_eq!(w.values(), &[0, 2, 1]);
        assert!(verify_solution_free(
            &[0, 1, 2, 3, 4, 12, 13, 14, 15, 16],
            &t("1,1,1"),
            AvoidanceRule::Distinct,
            &mut Budget::default()
        )
        .unwrap()
        .is_none());
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let ground = TermSet::from_values((0..200).map(|v| 2 * v));
        let e = t("1,1,1,1");
        let mut big = Budget::default();
        creates_solution(&ground, 301, &e, AvoidanceRule::Distinct, &mut big).unwrap();
        assert!(big.spent() > 5);
        let r = creates_solution(&ground, 301, &e, AvoidanceRule::Distinct, &mut Budget::new(5));
        assert_eq!(r, Err(Error::BudgetExhausted { limit: 5 }));
    }

    #[test]
    fn witness_checks_equation() {
        let e = t("1,1");
        assert!(Witness::new(vec![0, 2, 1], &e).is_ok());
        assert!(Witness::new(vec![0, 3, 1], &e).is_err());
        assert!(Witness::new(vec![0, 2], &e).is_err());
        assert_eq!(Witness::new(vec![0, 2, 1], &e).unwrap().to_string(), "(0,2;1)");
    }

    #[test]
    fn term_set_membership() {
        let mut s = TermSet::new();
        for v in [0, 5, 64, 1000] {
            s.push(v);
        }
        assert!(s.contains(64) && s.contains(0) && !s.contains(63) && !s.contains(5000));
        s.push(DENSE_LIMIT + 7);
        assert!(s.contains(1000) && s.contains(DENSE_LIMIT + 7) && !s.contains(1));
    }
}
