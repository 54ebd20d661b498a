mod support;

use proptest::prelude::*;
use support::{from_term, longest};
use treemonkey::counting::CountTable;
use treemonkey::lambda::{
    beta_max_len, build_lambda_grammar, embed, exp_tower, explosive, identity, parse_term,
    perpetual_length, rename_canonical, restrict_reachable, typecheck, BetaLength, Term, Type,
    Typing, DEFAULT_BETA_BUDGET,
};
use treemonkey::rng::stream;
use treemonkey::trees::{is_subcontext, parse_context};

fn oo() -> Type {
    Type::arrow(Type::O, Type::O)
}

/// Closed terms that contain `e` as a subterm.
fn wrappers(e: &Term) -> Vec<Term> {
    vec![
        Term::lam("y", Type::O, Term::app(e.clone(), Term::var("y"))),
        Term::app(
            Term::lam_unused(oo(), Term::lam("z", Type::O, Term::var("z"))),
            e.clone(),
        ),
        Term::app(identity_at(oo()), e.clone()),
    ]
}

fn identity_at(ty: Type) -> Term {
    Term::lam("w", ty, Term::var("w"))
}

#[test]
fn explosive_subterm_forces_long_reductions() {
    for (m, exact) in [(1, true), (2, true), (3, false)] {
        let e = explosive(m, 2).unwrap();
        let pattern = rename_canonical(&e, None).unwrap();
        for t in wrappers(&e) {
            assert!(typecheck(&t).is_ok());
            assert!(is_subcontext(
                &pattern,
                &rename_canonical(&t, None).unwrap()
            ));
            let bound = exp_tower(2, m as u64);
            if exact {
                let b = beta_max_len(&t, DEFAULT_BETA_BUDGET).unwrap();
                assert!(matches!(b, BetaLength::Exact(v) if v >= bound), "{b:?}");
            } else {
                assert!(perpetual_length(&t, 1 << 32).unwrap() >= bound);
            }
        }
    }
}

#[test]
fn small_explosive_values() {
    assert_eq!(
        beta_max_len(&explosive(1, 2).unwrap(), 10_000).unwrap(),
        BetaLength::Exact(15)
    );
    let e = from_term(&explosive(1, 2).unwrap()).unwrap();
    assert_eq!(longest(&e), 15);
    assert!(explosive(0, 2).is_err());
    assert!(explosive(1, 1).is_err());
    assert_eq!(explosive(1, 3).unwrap().size(), 30);
}

#[test]
fn renaming_example() {
    let t = parse_term(r"\x:o. (\y:o->o.y) (\z:o.x)").unwrap();
    let tree = rename_canonical(&t, Some(1)).unwrap();
    assert_eq!(
        tree,
        parse_context("lam_x1_o(app(lam_x1_Aoo(x1),lam_s_o(x1)))").unwrap()
    );
    assert!(treemonkey::lambda::alpha_eq(&embed(&tree).unwrap(), &t));
    let two_live = parse_term(r"\x:o->o. \y:o. x y").unwrap();
    assert!(rename_canonical(&two_live, Some(1)).is_err());
    assert!(rename_canonical(&two_live, Some(2)).is_ok());
    assert_eq!(
        beta_max_len(&Term::app(identity(), Term::var("y")), 10).unwrap(),
        BetaLength::Exact(1)
    );
}

#[test]
fn explosive_is_in_e222() {
    let e = restrict_reachable(&build_lambda_grammar(2, 2, 2).unwrap()).unwrap();
    let nt = e.nonterminal(&Typing::closed(oo())).unwrap().clone();
    for m in 1..=3 {
        let tree = rename_canonical(&explosive(m, 2).unwrap(), Some(2)).unwrap();
        assert_eq!(
            e.grammar.count_leftmost_derivations(&nt, &tree, 3).unwrap(),
            1
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampled_grammar_trees_round_trip(seed in any::<u64>(), n in 5usize..40) {
        let e = restrict_reachable(&build_lambda_grammar(2, 2, 2).unwrap()).unwrap();
        let table = CountTable::build(&e.grammar, n).unwrap();
        let mut rng = stream(seed, 0);
        for nt in e.closed_nonterminals() {
            if table.count_trees(&nt, n).unwrap() == 0u32.into() {
                continue;
            }
            let tree = table.sample(&nt, n, &mut rng).unwrap();
            let term = embed(&tree).unwrap();
            let j = typecheck(&term).unwrap();
            prop_assert_eq!(&j.ty, &e.typing(&nt).unwrap().ty);
            prop_assert!(j.order <= 2 && j.iar <= 2);
            prop_assert_eq!(term.size(), n);
            prop_assert_eq!(rename_canonical(&term, Some(2)).unwrap(), tree);
        }
    }

    #[test]
    fn perpetual_is_a_lower_bound(seed in any::<u64>(), n in 5usize..14) {
        let e = restrict_reachable(&build_lambda_grammar(2, 2, 2).unwrap()).unwrap();
        let nt = e.nonterminal(&Typing::closed(oo())).unwrap().clone();
        let table = CountTable::build(&e.grammar, n).unwrap();
        let tree = table.sample(&nt, n, &mut stream(seed, 1)).unwrap();
        let term = embed(&tree).unwrap();
        let exact = beta_max_len(&term, DEFAULT_BETA_BUDGET).unwrap();
        prop_assert!(matches!(exact, BetaLength::Exact(_)));
        prop_assert!(perpetual_length(&term, 1 << 32).unwrap() <= exact.value());
        if n <= 11 {
            prop_assert_eq!(exact.value(), longest(&from_term(&term).unwrap()));
        }
    }
}
