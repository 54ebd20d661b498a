mod support;

use std::collections::BTreeSet;

use num_bigint::BigUint;
use support::{closed_terms, from_term, longest, min_names, to_term, Derivations, L};
use treemonkey::counting::CountTable;
use treemonkey::fixtures;
use treemonkey::lambda::{
    beta_max_len, build_lambda_grammar, embed, num_vars, rename_canonical, to_db, typecheck,
    BetaLength,
};
use treemonkey::rtg::Grammar;

fn check_counts(g: &Grammar, max: usize) {
    let table = CountTable::build_with_contexts(g, max).unwrap();
    let mut oracle = Derivations::new(g);
    let nts: Vec<String> = g.nonterminals().iter().map(|s| s.to_string()).collect();
    for n in 0..=max {
        for a in &nts {
            let ds = oracle.trees(a, n);
            assert_eq!(
                table.count_trees(a, n).unwrap(),
                BigUint::from(ds.len()),
                "trees {a} {n}"
            );
            for b in &nts {
                let cs = oracle.contexts(b, a, n);
                assert_eq!(
                    table.count_contexts(b, a, n).unwrap(),
                    BigUint::from(cs.len()),
                    "contexts {b} => {a} at {n}"
                );
            }
        }
    }
}

#[test]
fn counts_match_derivation_oracle_on_small_fixtures() {
    for g in [
        fixtures::g0(),
        fixtures::ambiguous(),
        fixtures::typed_example(),
        fixtures::single_loop(),
    ] {
        check_counts(&g, 12);
    }
}

#[test]
fn counts_match_oracle_on_lambda_grammars() {
    check_counts(&build_lambda_grammar(1, 1, 1).unwrap().grammar, 12);
    check_counts(&build_lambda_grammar(2, 2, 1).unwrap().grammar, 9);
}

#[test]
fn ambiguous_counts_are_derivation_sums() {
    let g = fixtures::ambiguous();
    let table = CountTable::build(&g, 6).unwrap();
    for n in 0..=6 {
        let trees = g.enumerate_trees("A", n).unwrap();
        let total: u64 = trees
            .iter()
            .map(|t| g.count_leftmost_derivations("A", t, 100).unwrap())
            .sum();
        assert_eq!(table.count_trees("A", n).unwrap(), BigUint::from(total));
    }
    assert_eq!(table.count_trees("A", 3).unwrap(), BigUint::from(2u32));
}

#[test]
fn g0_is_unambiguous_up_to_12() {
    let g = fixtures::g0();
    for nt in ["A0", "B0"] {
        for n in 1..=12 {
            for t in g.enumerate_trees(nt, n).unwrap() {
                assert_eq!(g.count_leftmost_derivations(nt, &t, 10).unwrap(), 1);
            }
        }
    }
}

fn closed_counts(d: usize, i: usize, x: usize, n: usize) -> (usize, usize) {
    let lg = build_lambda_grammar(d, i, x).unwrap();
    let table = CountTable::build(&lg.grammar, n).unwrap();
    let grammar: usize = lg
        .closed_nonterminals()
        .iter()
        .map(|nt| table.count_trees(nt, n).unwrap())
        .sum::<BigUint>()
        .try_into()
        .unwrap();
    let terms: BTreeSet<L> = closed_terms(d, i, x, n)
        .into_iter()
        .map(|(t, _)| t)
        .collect();
    (grammar, terms.len())
}

#[test]
fn closed_counts_match_term_enumeration() {
    for (d, i, x) in [(1, 1, 1), (2, 2, 1), (2, 2, 2)] {
        for n in 1..=7 {
            let (g, o) = closed_counts(d, i, x, n);
            assert_eq!(g, o, "G({d},{i},{x}) at size {n}");
        }
    }
}

#[test]
fn per_type_counts_match_term_enumeration() {
    let lg = build_lambda_grammar(2, 2, 2).unwrap();
    let table = CountTable::build(&lg.grammar, 7).unwrap();
    for n in 1..=7 {
        let terms = closed_terms(2, 2, 2, n);
        for nt in lg.closed_nonterminals() {
            let ty = &lg.typing(&nt).unwrap().ty;
            let o = terms.iter().filter(|(_, t)| t == ty).count();
            assert_eq!(
                table.count_trees(&nt, n).unwrap(),
                BigUint::from(o),
                "{nt} at {n}"
            );
        }
    }
}

#[test]
fn embedding_is_injective_up_to_alpha() {
    let lg = build_lambda_grammar(2, 2, 2).unwrap();
    for n in 1..=7 {
        let mut seen = BTreeSet::new();
        for nt in lg.closed_nonterminals() {
            for t in lg.grammar.enumerate_trees(&nt, n).unwrap() {
                let l = from_term(&embed(&t).unwrap()).unwrap();
                assert!(seen.insert(l), "two trees embed to one α-class at size {n}");
            }
        }
    }
}

#[test]
fn renaming_round_trips_and_counts_names() {
    for n in 1..=7 {
        for (t, _) in closed_terms(2, 2, 2, n) {
            let named = to_term(&t);
            let tree = rename_canonical(&named, None).unwrap();
            let back = embed(&tree).unwrap();
            assert_eq!(from_term(&back).unwrap(), t);
            assert_eq!(num_vars(&named).unwrap(), min_names(&t));
        }
    }
}

#[test]
fn typecheck_agrees_with_enumerated_types() {
    for n in 1..=6 {
        for (t, ty) in closed_terms(2, 2, 2, n) {
            let j = typecheck(&to_term(&t)).unwrap();
            assert_eq!(j.ty, ty);
            assert!(j.order <= 2 && j.iar <= 2);
        }
    }
}

#[test]
fn longest_reduction_matches_plain_search() {
    for n in 1..=7 {
        for (t, _) in closed_terms(2, 2, 2, n) {
            let named = to_term(&t);
            assert_eq!(
                beta_max_len(&named, 100_000).unwrap(),
                BetaLength::Exact(longest(&t))
            );
            assert_eq!(
                from_term(&treemonkey::lambda::from_db(&to_db(&named))).unwrap(),
                t
            );
        }
    }
}
