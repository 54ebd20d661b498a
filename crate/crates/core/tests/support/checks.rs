//! Whole-suite checks shared by the unit-style test files and the
//! acceptance harness. Each returns a short summary or the first failure.

#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap};

use num_bigint::BigUint;
use treemonkey::counting::CountTable;
use treemonkey::decomposition::{
    decompose, decompose_aux, good_for, recompose, HoleSpec, SoContext, TypeChecker,
};
use treemonkey::normalize::full_pipeline;
use treemonkey::rtg::{ContextType, Grammar};
use treemonkey::trees::{Context, Tree};

use super::{contexts_over, set_of, trees_over, Derivations};

pub type Check = Result<String, String>;

pub const ABC: [(&str, usize); 3] = [("a", 2), ("b", 1), ("c", 0)];

/// Tree and context counts against derivation enumeration.
pub fn counts_vs_oracle(g: &Grammar, max: usize) -> Check {
    let table = CountTable::build_with_contexts(g, max).map_err(|e| e.to_string())?;
    let mut oracle = Derivations::new(g);
    let nts: Vec<String> = g.nonterminals().iter().map(|s| s.to_string()).collect();
    let mut cells = 0usize;
    for n in 0..=max {
        for a in &nts {
            let ds = oracle.trees(a, n);
            if table.count_trees(a, n).unwrap() != BigUint::from(ds.len()) {
                return Err(format!("count_trees({a}, {n}) != {}", ds.len()));
            }
            cells += 1;
            for b in &nts {
                let cs = oracle.contexts(b, a, n);
                if table.count_contexts(b, a, n).unwrap() != BigUint::from(cs.len()) {
                    return Err(format!("count_contexts({b} => {a}, {n}) != {}", cs.len()));
                }
                cells += 1;
            }
        }
    }
    Ok(format!("{} nonterminals, {cells} cells", nts.len()))
}

/// Round trip, goodness, `|U| < m`, part sizes and part count.
pub fn decomposition_suite(max_size: usize, ms: &[usize]) -> Check {
    let r = 2usize;
    let mut cases = 0usize;
    for size in 1..=max_size {
        for t in trees_over(&ABC, size) {
            for &m in ms {
                let (u, _, p) = decompose_aux(&t, m);
                let d = decompose(&t, m);
                let back = recompose(&d.frame, &d.parts).map_err(|e| e.to_string())?;
                if back.to_tree().as_ref() != Some(&t) {
                    return Err(format!("round trip fails for {t} at m={m}"));
                }
                if d.frame.size() != t.size() {
                    return Err(format!("|frame| != |t| for {t} at m={m}"));
                }
                if u.hole_count() != 1 || u.size() >= m {
                    return Err(format!("u = {u} for {t} at m={m}"));
                }
                if p != d.parts {
                    return Err(format!("closed parts differ from φ parts for {t}"));
                }
                for part in &d.parts {
                    if !good_for(part, m).unwrap() {
                        return Err(format!("part {part} of {t} not good for {m}"));
                    }
                    if part.size() < m || part.size() > r * (m - 1) + 1 {
                        return Err(format!("part {part} of {t} outside size window for {m}"));
                    }
                }
                if m <= t.size() && 2 * r * m * d.parts.len() < t.size() {
                    return Err(format!("{} parts for {t} at m={m}", d.parts.len()));
                }
                cases += 1;
            }
        }
    }
    Ok(format!("{cases} (tree, m) cases"))
}

/// `Φ̂(E[P']) = (E, P')` for every tuple of good hole-matching parts.
pub fn replacement_stability(max_size: usize, ms: &[usize]) -> Check {
    let mut pool: HashMap<(usize, usize, usize), Vec<Context>> = HashMap::new();
    let mut tuples = 0usize;
    for size in 1..=max_size {
        for t in trees_over(&ABC, size) {
            for &m in ms {
                let d = decompose(&t, m);
                let holes: Vec<HoleSpec> = d.frame.holes().into_iter().cloned().collect();
                let options: Vec<Vec<Context>> = holes
                    .iter()
                    .map(|h| {
                        pool.entry((h.size, h.arity, m))
                            .or_insert_with(|| {
                                contexts_over(&ABC, h.size, h.arity == 1)
                                    .into_iter()
                                    .filter(|c| good_for(c, m).unwrap())
                                    .collect()
                            })
                            .clone()
                    })
                    .collect();
                let mut idx = vec![0usize; options.len()];
                loop {
                    let parts: Vec<Context> = idx
                        .iter()
                        .zip(&options)
                        .map(|(&i, o)| o[i].clone())
                        .collect();
                    let t2 = recompose(&d.frame, &parts)
                        .map_err(|e| e.to_string())?
                        .to_tree()
                        .ok_or("unfilled hole")?;
                    let d2 = decompose(&t2, m);
                    if d2.frame != d.frame || d2.parts != parts {
                        return Err(format!(
                            "replacement in {} at m={m} gives {}",
                            d.frame, d2.frame
                        ));
                    }
                    tuples += 1;
                    let mut k = 0;
                    while k < idx.len() && idx[k] + 1 == options[k].len() {
                        idx[k] = 0;
                        k += 1;
                    }
                    if k == idx.len() {
                        break;
                    }
                    idx[k] += 1;
                }
            }
        }
    }
    Ok(format!("{tuples} replacement tuples"))
}

fn annotate(e: &SoContext, types: &[ContextType], next: &mut usize) -> SoContext {
    match e {
        SoContext::Node(a, kids) => SoContext::Node(
            a.clone(),
            kids.iter().map(|k| annotate(k, types, next)).collect(),
        ),
        SoContext::Hole(h, kids) => {
            let ty = types[*next].clone();
            *next += 1;
            let kids = kids.iter().map(|k| annotate(k, types, next)).collect();
            SoContext::Hole(
                HoleSpec {
                    ty: Some(ty),
                    ..h.clone()
                },
                kids,
            )
        }
    }
}

/// The typed refinement forgets to `Φ̂` and is the only annotation that
/// typechecks with the parts in their holes.
pub fn refinement_unique(g: &Grammar, start: &str, max_size: usize, ms: &[usize]) -> Check {
    let tc = TypeChecker::new(g).map_err(|e| e.to_string())?;
    let nts: Vec<String> = g.nonterminals().iter().map(|s| s.to_string()).collect();
    let mut checked = 0usize;
    for n in 1..=max_size {
        for t in g.enumerate_trees(start, n).map_err(|e| e.to_string())? {
            for &m in ms {
                let refined = tc.refine(start, &t, m).map_err(|e| e.to_string())?;
                let plain = decompose(&t, m);
                if refined.frame.forget() != plain.frame || refined.parts != plain.parts {
                    return Err(format!("refinement of {t} does not forget to Φ̂"));
                }
                let holes = plain.frame.holes();
                let choices: Vec<Vec<ContextType>> = holes
                    .iter()
                    .map(|h| {
                        let mut v = Vec::new();
                        for res in &nts {
                            if h.arity == 0 {
                                v.push(ContextType::new(&[], res));
                            } else {
                                for arg in &nts {
                                    v.push(ContextType::new(&[arg.as_str()], res));
                                }
                            }
                        }
                        v
                    })
                    .collect();
                let mut idx = vec![0usize; choices.len()];
                let mut passing = Vec::new();
                loop {
                    let types: Vec<ContextType> = idx
                        .iter()
                        .zip(&choices)
                        .map(|(&i, c)| c[i].clone())
                        .collect();
                    let ann = annotate(&plain.frame, &types, &mut 0);
                    let parts_ok = plain
                        .parts
                        .iter()
                        .zip(&types)
                        .all(|(p, k)| tc.has_type(p, k));
                    if parts_ok && tc.typecheck_frame(&ann, start) {
                        passing.push(ann);
                    }
                    let mut k = 0;
                    while k < idx.len() && idx[k] + 1 == choices[k].len() {
                        idx[k] = 0;
                        k += 1;
                    }
                    if k == idx.len() {
                        break;
                    }
                    idx[k] += 1;
                }
                if passing != vec![refined.frame.clone()] {
                    return Err(format!(
                        "{} valid annotations for {t} at m={m}",
                        passing.len()
                    ));
                }
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} refinements unique"))
}

/// `L(G, N)` is the disjoint union of `L(G', N')` over `Q_N`, as multisets.
pub fn pipeline_preserves(g: &Grammar, max: usize) -> Check {
    let res = full_pipeline(g).map_err(|e| e.to_string())?;
    if !res.grammar.is_canonical() {
        return Err("result is not canonical".into());
    }
    let mut before = Derivations::new(g);
    let mut after = Derivations::new(&res.grammar);
    for (n0, q) in &res.name_map {
        for n in 1..=max {
            let mut lhs: Vec<Tree> = before.trees(n0, n);
            let mut rhs: Vec<Tree> = Vec::new();
            let mut seen: BTreeSet<Tree> = BTreeSet::new();
            for nt in q {
                let part = after.trees(nt, n);
                let part_set = set_of(&part);
                if part_set.iter().any(|t| seen.contains(t)) {
                    return Err(format!("Q_{n0} languages overlap at size {n}"));
                }
                seen.extend(part_set);
                rhs.extend(part);
            }
            lhs.sort();
            rhs.sort();
            if lhs != rhs {
                return Err(format!("language of {n0} changes at size {n}"));
            }
        }
    }
    Ok(format!("{} nonterminals preserved", res.name_map.len()))
}
