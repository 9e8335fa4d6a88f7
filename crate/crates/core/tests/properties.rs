use std::collections::BTreeSet;

use nonavg::asymptotics::{behrend_lower_bound, g_bounds, h_bounds};
use nonavg::closed_form::{count_a_below, is_zero_one, popcount_residue_check, zero_one_nth};
use nonavg::greedy::{generate, naive_generate};
use nonavg::solver::{all_representations, creates_solution, find_representation, Representation};
use nonavg::{AvoidanceRule, Budget, Caps, ClosedForm, CoefficientTuple, TermSet};
use proptest::prelude::*;

fn valid_tuple(max_len: usize) -> impl Strategy<Value = CoefficientTuple> {
    prop::collection::vec(0u64..1000, 1..max_len).prop_map(|picks| {
        let mut coeffs = vec![1u64];
        let mut prefix = 1;
        for p in picks {
            let prev = *coeffs.last().unwrap();
            let c = prev + p % (prefix - prev + 1);
            coeffs.push(c);
            prefix += c;
        }
        CoefficientTuple::new(coeffs).unwrap()
    })
}

fn small_tuple() -> impl Strategy<Value = CoefficientTuple> {
    prop::collection::vec(1u64..4, 2..5).prop_map(|c| CoefficientTuple::new(c).unwrap())
}

fn rule() -> impl Strategy<Value = AvoidanceRule> {
    prop_oneof![Just(AvoidanceRule::Distinct), Just(AvoidanceRule::NotAllEqual)]
}

fn distinct(values: &[u64]) -> bool {
    values.iter().collect::<BTreeSet<_>>().len() == values.len()
}

fn respects(values: &[u64], rule: AvoidanceRule) -> bool {
    match rule {
        AvoidanceRule::Distinct => distinct(values),
        AvoidanceRule::NotAllEqual => values.iter().any(|&v| v != values[0]),
    }
}

/// Every left-hand assignment over `pool`, in odometer order.
fn assignments(pool: &[u64], width: usize) -> Vec<Vec<u64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..width {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                pool.iter().map(move |&v| {
                    let mut next = prefix.clone();
                    next.push(v);
                    next
                })
            })
            .collect();
    }
    out
}

fn rhs_of(tuple: &CoefficientTuple, lhs: &[u64]) -> Option<u64> {
    let sum: u64 = tuple.coeffs().iter().zip(lhs).map(|(c, x)| c * x).sum();
    sum.is_multiple_of(tuple.weight()).then(|| sum / tuple.weight())
}

fn brute_creates(ground: &[u64], candidate: u64, tuple: &CoefficientTuple, rule: AvoidanceRule) -> bool {
    let mut pool = ground.to_vec();
    pool.push(candidate);
    assignments(&pool, tuple.m() - 1).into_iter().any(|lhs| {
        let Some(rhs) = rhs_of(tuple, &lhs) else { return false };
        let mut all = lhs;
        all.push(rhs);
        pool.contains(&rhs) && all.contains(&candidate) && respects(&all, rule)
    })
}

/// Canonical representations of `alpha`: inner runs of equal coefficients sorted.
fn brute_representations(alpha: u64, pool: &[u64], tuple: &CoefficientTuple, mode: Representation) -> BTreeSet<Vec<u64>> {
    let m = tuple.m();
    let mut out = BTreeSet::new();
    for inner in assignments(pool, m - 2) {
        let mut lhs = vec![alpha];
        lhs.extend(&inner);
        let Some(rhs) = rhs_of(tuple, &lhs) else { continue };
        if !pool.contains(&rhs) {
            continue;
        }
        let mut all = lhs;
        all.push(rhs);
        let ok = match mode {
            Representation::Distinct => distinct(&all),
            Representation::InnerDistinct => distinct(&all[1..m - 1]),
        };
        if !ok {
            continue;
        }
        let mut k = 1;
        while k < m - 1 {
            let mut end = k + 1;
            while end < m - 1 && tuple.coeff(end + 1) == tuple.coeff(k + 1) {
                end += 1;
            }
            all[k..end].sort_unstable();
            k = end;
        }
        out.insert(all);
    }
    out
}

fn small_set() -> impl Strategy<Value = Vec<u64>> {
    prop::collection::btree_set(0u64..40, 0..7).prop_map(|s| s.into_iter().collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn validity_agrees_with_cover(coeffs in prop::collection::vec(1u64..12, 2..7)) {
        let t = CoefficientTuple::new(coeffs).unwrap();
        prop_assert_eq!(t.is_valid(), t.is_valid_by_cover());
    }

    #[test]
    fn generated_tuples_are_valid(t in valid_tuple(7)) {
        prop_assert!(t.is_valid());
        prop_assert!(t.is_valid_by_cover());
    }

    #[test]
    fn coefficient_order_is_normalised(mut coeffs in prop::collection::vec(1u64..20, 2..7), seed in any::<u64>()) {
        let a = CoefficientTuple::new(coeffs.clone()).unwrap();
        let n = coeffs.len();
        coeffs.rotate_left(seed as usize % n);
        coeffs.swap(0, (seed >> 8) as usize % n);
        prop_assert_eq!(a, CoefficientTuple::new(coeffs).unwrap());
    }

    #[test]
    fn subset_sum_table_is_sound(t in valid_tuple(7)) {
        let table = t.subset_sum_table().unwrap();
        prop_assert_eq!(table.len() as u64, t.weight());
        for (j, positions) in table.iter() {
            prop_assert!(positions.iter().all(|&k| (2..t.m()).contains(&k)));
            let mut sorted = positions.to_vec();
            sorted.sort_unstable();
            sorted.dedup();
            prop_assert_eq!(sorted.len(), positions.len());
            prop_assert_eq!(t.positions_sum(positions), j);
        }
    }

    #[test]
    fn creates_solution_matches_brute_force(
        t in small_tuple(),
        ground in small_set(),
        step in 1u64..20,
        r in rule(),
    ) {
        let candidate = ground.last().copied().unwrap_or(0) + step;
        let set = TermSet::from_values(ground.iter().copied());
        let found = creates_solution(&set, candidate, &t, r, &mut Budget::default()).unwrap();
        prop_assert_eq!(found.is_some(), brute_creates(&ground, candidate, &t, r));
        if let Some(w) = found {
            prop_assert!(w.contains(candidate));
            prop_assert!(w.respects(r));
            prop_assert!(w.values().iter().all(|&v| v == candidate || set.contains(v)));
            prop_assert_eq!(rhs_of(&t, w.lhs()), Some(w.rhs()));
        }
    }

    #[test]
    fn creates_solution_matches_brute_force_on_wider_sets(
        coeffs in prop::collection::vec(1u64..5, 2..4),
        ground in prop::collection::btree_set(0u64..60, 0..12),
        step in 1u64..20,
        r in rule(),
    ) {
        let t = CoefficientTuple::new(coeffs).unwrap();
        let ground: Vec<u64> = ground.into_iter().collect();
        let candidate = ground.last().copied().unwrap_or(0) + step;
        let set = TermSet::from_values(ground.iter().copied());
        let found = creates_solution(&set, candidate, &t, r, &mut Budget::default()).unwrap();
        prop_assert_eq!(found.is_some(), brute_creates(&ground, candidate, &t, r));
    }

    #[test]
    fn creates_solution_is_deterministic(t in small_tuple(), ground in small_set(), step in 1u64..20, r in rule()) {
        let candidate = ground.last().copied().unwrap_or(0) + step;
        let set = TermSet::from_values(ground.iter().copied());
        let a = creates_solution(&set, candidate, &t, r, &mut Budget::default()).unwrap();
        let b = creates_solution(&set, candidate, &t, r, &mut Budget::default()).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn representations_match_brute_force(
        t in small_tuple(),
        pool in small_set(),
        alpha in 0u64..40,
        inner in any::<bool>(),
    ) {
        let mode = if inner { Representation::InnerDistinct } else { Representation::Distinct };
        prop_assume!(inner || !pool.contains(&alpha));
        let set = TermSet::from_values(pool.iter().copied());
        let expected = brute_representations(alpha, &pool, &t, mode);
        let first = find_representation(alpha, &set, &t, mode, &mut Budget::default()).unwrap();
        prop_assert_eq!(first.is_some(), !expected.is_empty());
        let all = all_representations(alpha, &set, &t, mode, &mut Budget::default()).unwrap();
        let got: Vec<Vec<u64>> = all.iter().map(|w| w.values().to_vec()).collect();
        prop_assert_eq!(got.len(), expected.len());
        prop_assert_eq!(got.into_iter().collect::<BTreeSet<_>>(), expected);
        if let Some(w) = first {
            prop_assert!(all.contains(&w));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn generate_matches_naive(t in valid_tuple(4), r in rule()) {
        let limit = 120;
        let fast = generate(&t, r, Caps::value(limit)).unwrap();
        let slow = naive_generate(&t, r, limit);
        prop_assert_eq!(fast.terms(), slow.as_slice());
    }

    #[test]
    fn not_all_equal_greedy_is_zero_one(t in valid_tuple(5)) {
        let seq = generate(&t, AvoidanceRule::NotAllEqual, Caps::value(400)).unwrap();
        let expected: Vec<u64> = (0..=400).filter(|&x| is_zero_one(t.base(), x)).collect();
        prop_assert_eq!(seq.terms(), expected.as_slice());
    }
}

fn closed_form() -> impl Strategy<Value = ClosedForm> {
    (1u64..40, 2u64..9)
        .prop_flat_map(|(c, base)| (Just(c), Just(base), prop::collection::btree_set(0..c, 0..6)))
        .prop_map(|(c, base, mut r)| {
            r.insert(0);
            ClosedForm::new(c, r.into_iter().collect::<Vec<_>>(), base).unwrap()
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn closed_form_round_trips(cf in closed_form()) {
        let members: Vec<u64> = (0..3000).filter(|&x| cf.contains(x)).collect();
        for (n, &x) in members.iter().enumerate() {
            prop_assert_eq!(cf.nth(n as u64).unwrap(), x);
        }
        for n in [0u64, 1, 7, 100, 999, 2999, 3000] {
            let below = members.iter().filter(|&&x| x < n).count() as u64;
            prop_assert_eq!(cf.count_below(n), below);
        }
    }

    #[test]
    fn zero_one_nth_inverts_the_count(base in 2u64..12, n in 0u64..100_000) {
        let x = zero_one_nth(base, n).unwrap();
        prop_assert!(is_zero_one(base, x));
        prop_assert_eq!(nonavg::closed_form::count_zero_one_below(base, x), n);
    }

    #[test]
    fn popcount_identity(t in valid_tuple(5), n in 0u64..1 << 15) {
        let (p, a) = popcount_residue_check(&t, n).unwrap();
        prop_assert_eq!(p, a);
    }

    #[test]
    fn counting_bounds_sandwich(t in valid_tuple(5), n in 1u64..1_000_000_000) {
        let g = g_bounds::<f64>(&t, n).unwrap();
        prop_assert_eq!(g.exact, Some(count_a_below(&t, n)));
        prop_assert_eq!(g.sandwiches(1e-9), Some(true));
    }

    #[test]
    fn closed_form_count_sandwich(cf in closed_form(), n in 1u64..1_000_000_000) {
        let h = h_bounds::<f64>(&cf, n).unwrap();
        prop_assert_eq!(h.exact, Some(cf.count_below(n)));
        prop_assert_eq!(h.sandwiches(1e-9), Some(true));
    }

    #[test]
    fn behrend_is_monotone_in_n(d in 2u64..10, a in 1.0f64..30.0, b in 1.0f64..30.0) {
        let lo = (d * d) as f64 * 2.0;
        let (x, y) = (lo * a.min(b).exp(), lo * a.max(b).exp());
        prop_assert!(behrend_lower_bound(d, x).unwrap() <= behrend_lower_bound(d, y).unwrap());
    }
}
