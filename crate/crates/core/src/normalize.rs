//! Canonical-form pipeline: prune empty nonterminals, split right-hand
//! sides into semi-canonical form, close unit rules, and expand away
//! nonterminals with finite languages.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::{Error, Result};
use crate::rtg::{Grammar, Rule};
use crate::trees::{sym, Context, Sym};

/// Default cap on the number of rules produced by the unit closure.
pub const DEFAULT_RULE_BUDGET: usize = 200_000;

/// Canonical grammar plus `Q_N` for every nonterminal of the input.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CanonicalizationResult {
    pub grammar: Grammar,
    pub name_map: BTreeMap<Sym, BTreeSet<Sym>>,
}

/// Removes nonterminals with an empty language and every rule mentioning them.
pub fn prune_empty(g: &Grammar) -> Result<Grammar> {
    let ne = g.nonempty_nonterminals();
    if ne.is_empty() {
        return Err(Error::AllEmpty);
    }
    let rules = g
        .rules()
        .iter()
        .filter(|r| {
            ne.contains(&r.lhs) && g.rhs_nonterminals(&r.rhs).iter().all(|n| ne.contains(n))
        })
        .cloned()
        .collect();
    Grammar::new(g.alphabet().clone(), rules)
}

fn is_nt_leaf(g_nts: &BTreeSet<Sym>, c: &Context) -> bool {
    matches!(c, Context::Node(a, k) if k.is_empty() && g_nts.contains(a))
}

/// Splits `N → a(…, T_i, …)` with a non-nonterminal `T_i` into
/// `N → a(…, F, …)` and `F → T_i` until every rule is canonical or a unit rule.
pub fn to_semi_canonical(g: &Grammar) -> Result<Grammar> {
    let mut nts: BTreeSet<Sym> = g.nonterminals().clone();
    let mut counter = 0usize;
    let mut queue: VecDeque<Rule> = g.rules().iter().cloned().collect();
    let mut done = Vec::new();
    while let Some(rule) = queue.pop_front() {
        let Context::Node(a, kids) = &rule.rhs else {
            unreachable!("validated grammars have no hole right-hand sides")
        };
        let unit = kids.is_empty() && nts.contains(a);
        let pos = kids.iter().position(|k| !is_nt_leaf(&nts, k));
        match (unit, pos) {
            (false, Some(i)) => {
                let base = rule.lhs.split('$').next().unwrap_or(&rule.lhs).to_string();
                let fresh = loop {
                    counter += 1;
                    let cand = sym(&format!("{base}${counter}"));
                    if !nts.contains(&cand) && g.alphabet().rank(&cand).is_none() {
                        break cand;
                    }
                };
                nts.insert(fresh.clone());
                let mut new_kids = kids.clone();
                let moved =
                    std::mem::replace(&mut new_kids[i], Context::Node(fresh.clone(), vec![]));
                queue.push_front(Rule {
                    lhs: fresh,
                    rhs: moved,
                });
                queue.push_front(Rule {
                    lhs: rule.lhs.clone(),
                    rhs: Context::Node(a.clone(), new_kids),
                });
            }
            _ => done.push(rule),
        }
    }
    Grammar::new(g.alphabet().clone(), done)
}

/// Reflexive-transitive closure of the unit rules.
fn unit_closure(g: &Grammar) -> BTreeMap<Sym, BTreeSet<Sym>> {
    let mut step: BTreeMap<Sym, Vec<Sym>> = BTreeMap::new();
    for r in g.rules() {
        if g.is_unit_rule(r) {
            if let Context::Node(m, _) = &r.rhs {
                step.entry(r.lhs.clone()).or_default().push(m.clone());
            }
        }
    }
    g.nonterminals()
        .iter()
        .map(|n| {
            let mut seen = BTreeSet::from([n.clone()]);
            let mut q = vec![n.clone()];
            while let Some(x) = q.pop() {
                for y in step.get(&x).into_iter().flatten() {
                    if seen.insert(y.clone()) {
                        q.push(y.clone());
                    }
                }
            }
            (n.clone(), seen)
        })
        .collect()
}

/// Eliminates unit rules of a semi-canonical grammar by the closure
/// construction; `name_map[N] = { N' owning a canonical rule | N →* N' }`.
pub fn to_canonical(g: &Grammar) -> Result<CanonicalizationResult> {
    to_canonical_with_budget(g, DEFAULT_RULE_BUDGET)
}

pub fn to_canonical_with_budget(g: &Grammar, budget: usize) -> Result<CanonicalizationResult> {
    if let Some(r) = g
        .rules()
        .iter()
        .find(|r| !g.is_unit_rule(r) && !g.is_canonical_rule(r))
    {
        return Err(Error::NotCanonical(format!(
            "rule {} -> {} is neither canonical nor a unit rule",
            r.lhs, r.rhs
        )));
    }
    let keep: BTreeSet<Sym> = g
        .rules()
        .iter()
        .filter(|r| g.is_canonical_rule(r))
        .map(|r| r.lhs.clone())
        .collect();
    if keep.is_empty() {
        return Err(Error::AllEmpty);
    }
    let closure = unit_closure(g);
    let q: BTreeMap<Sym, BTreeSet<Sym>> = closure
        .iter()
        .map(|(n, s)| (n.clone(), s.intersection(&keep).cloned().collect()))
        .collect();
    let mut rules = Vec::new();
    for r in g.rules().iter().filter(|r| g.is_canonical_rule(r)) {
        let Context::Node(a, kids) = &r.rhs else {
            unreachable!()
        };
        let mut combos: Vec<Vec<Context>> = vec![Vec::new()];
        for k in kids {
            let Context::Node(n, _) = k else {
                unreachable!()
            };
            let mut next = Vec::new();
            for prefix in &combos {
                for m in &q[n] {
                    let mut p = prefix.clone();
                    p.push(Context::Node(m.clone(), vec![]));
                    next.push(p);
                }
            }
            combos = next;
        }
        for c in combos {
            rules.push(Rule {
                lhs: r.lhs.clone(),
                rhs: Context::Node(a.clone(), c),
            });
            if rules.len() > budget {
                return Err(Error::Budget(budget));
            }
        }
    }
    let grammar = Grammar::new(g.alphabet().clone(), rules)?;
    Ok(CanonicalizationResult {
        grammar,
        name_map: q,
    })
}

/// Removes every nonterminal with a finite language by substituting each
/// member of that language at every occurrence.
pub fn eliminate_inessential(g: &Grammar, budget: usize) -> Result<Grammar> {
    let g = prune_empty(g)?;
    let inf = g.infinite_nonterminals()?;
    if inf.is_empty() {
        return Err(Error::NoInfinite);
    }
    let finite: BTreeSet<Sym> = g.nonterminals().difference(&inf).cloned().collect();
    let langs = finite_languages(&g, &finite, budget)?;
    let mut rules = Vec::new();
    for r in g.rules().iter().filter(|r| inf.contains(&r.lhs)) {
        for rhs in expand(&g, &r.rhs, &langs) {
            rules.push(Rule {
                lhs: r.lhs.clone(),
                rhs,
            });
            if rules.len() > budget {
                return Err(Error::Budget(budget));
            }
        }
    }
    Grammar::new(g.alphabet().clone(), rules)
}

fn finite_languages(
    g: &Grammar,
    finite: &BTreeSet<Sym>,
    budget: usize,
) -> Result<BTreeMap<Sym, BTreeSet<Context>>> {
    let mut langs: BTreeMap<Sym, BTreeSet<Context>> = finite
        .iter()
        .map(|n| (n.clone(), BTreeSet::new()))
        .collect();
    loop {
        let mut changed = false;
        for r in g.rules().iter().filter(|r| finite.contains(&r.lhs)) {
            for t in expand(g, &r.rhs, &langs) {
                if langs.get_mut(&r.lhs).unwrap().insert(t) {
                    changed = true;
                }
            }
        }
        if langs.values().map(BTreeSet::len).sum::<usize>() > budget {
            return Err(Error::Budget(budget));
        }
        if !changed {
            return Ok(langs);
        }
    }
}

/// Every instantiation of the nonterminal leaves of `rhs` found in `langs`.
fn expand(g: &Grammar, rhs: &Context, langs: &BTreeMap<Sym, BTreeSet<Context>>) -> Vec<Context> {
    match rhs {
        Context::Hole => vec![Context::Hole],
        Context::Node(a, k) if k.is_empty() && g.is_nonterminal(a) => match langs.get(a) {
            Some(l) => l.iter().cloned().collect(),
            None => vec![rhs.clone()],
        },
        Context::Node(a, kids) => {
            let mut combos: Vec<Vec<Context>> = vec![Vec::new()];
            for k in kids {
                let opts = expand(g, k, langs);
                let mut next = Vec::with_capacity(combos.len() * opts.len());
                for p in &combos {
                    for o in &opts {
                        let mut q = p.clone();
                        q.push(o.clone());
                        next.push(q);
                    }
                }
                combos = next;
            }
            combos
                .into_iter()
                .map(|c| Context::Node(a.clone(), c))
                .collect()
        }
    }
}

/// `prune_empty`, then semi-canonical form, then unit closure. The map is
/// reported for the nonterminals of the input grammar.
pub fn full_pipeline(g: &Grammar) -> Result<CanonicalizationResult> {
    let pruned = prune_empty(g)?;
    let semi = to_semi_canonical(&pruned)?;
    let canon = to_canonical(&semi)?;
    let final_g = prune_empty(&canon.grammar)?;
    let name_map = g
        .nonterminals()
        .iter()
        .map(|n| {
            let q = canon
                .name_map
                .get(n)
                .map(|s| {
                    s.iter()
                        .filter(|m| final_g.is_nonterminal(m))
                        .cloned()
                        .collect()
                })
                .unwrap_or_default();
            (n.clone(), q)
        })
        .collect();
    Ok(CanonicalizationResult {
        grammar: final_g,
        name_map,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::rtg::parse_grammar;

    fn rules_text(g: &Grammar) -> Vec<String> {
        g.rules()
            .iter()
            .map(|r| format!("{} -> {}", r.lhs, r.rhs))
            .collect()
    }

    #[test]
    fn prune() {
        let g0 = fixtures::g0();
        assert_eq!(prune_empty(&g0).unwrap(), g0);
        let g =
            parse_grammar("terminal a 2\nterminal c 0\nrule A -> a(A,B)\nrule B -> c\n").unwrap();
        assert_eq!(rules_text(&prune_empty(&g).unwrap()), vec!["B -> c"]);
        let g = parse_grammar("terminal b 1\nrule A -> b(A)\n").unwrap();
        assert_eq!(prune_empty(&g), Err(Error::AllEmpty));
    }

    #[test]
    fn semi_canonical_split() {
        let g = fixtures::split_example();
        let s = to_semi_canonical(&g).unwrap();
        assert_eq!(
            rules_text(&s),
            vec!["N -> a(N,N)", "N -> b(N$1)", "N$1 -> c"]
        );
        let g0 = fixtures::g0();
        assert_eq!(to_semi_canonical(&g0).unwrap(), g0);
        let g = parse_grammar("terminal a 2\nterminal b 1\nterminal c 0\nrule N -> a(b(c),N)\n")
            .unwrap();
        let s = to_semi_canonical(&g).unwrap();
        assert_eq!(
            rules_text(&s),
            vec!["N -> a(N$1,N)", "N$1 -> b(N$2)", "N$2 -> c"]
        );
    }

    #[test]
    fn unit_closure_example() {
        let g = parse_grammar("terminal c 0\nrule N -> M\nrule M -> c\n").unwrap();
        let r = to_canonical(&g).unwrap();
        assert_eq!(rules_text(&r.grammar), vec!["M -> c"]);
        assert_eq!(r.name_map[&sym("N")], BTreeSet::from([sym("M")]));
        let g0 = fixtures::g0();
        let r = to_canonical(&g0).unwrap();
        assert_eq!(r.grammar, g0);
        assert!(r
            .name_map
            .iter()
            .all(|(n, q)| q == &BTreeSet::from([n.clone()])));
    }

    #[test]
    fn rejects_non_semi_canonical() {
        let g = fixtures::split_example();
        assert!(matches!(to_canonical(&g), Err(Error::NotCanonical(_))));
    }

    #[test]
    fn inessential() {
        let g = fixtures::periodic();
        let e = eliminate_inessential(&g, 1000).unwrap();
        assert_eq!(rules_text(&e), vec!["A -> a(B)", "A -> c(e)", "B -> b(A)"]);
        assert!(e.is_strongly_connected().unwrap());
        let g0 = fixtures::g0();
        assert_eq!(eliminate_inessential(&g0, 1000).unwrap(), g0);
        let f = parse_grammar("terminal c 0\nrule A -> c\n").unwrap();
        assert_eq!(eliminate_inessential(&f, 1000), Err(Error::NoInfinite));
    }

    #[test]
    fn pipeline_split_example() {
        let r = full_pipeline(&fixtures::split_example()).unwrap();
        assert!(r.grammar.is_canonical());
        assert_eq!(r.grammar.nonterminals().len(), 2);
        assert_eq!(r.name_map[&sym("N")], BTreeSet::from([sym("N")]));
    }
}
