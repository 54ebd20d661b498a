//! Exact size-indexed counting over canonical grammars, uniform sampling by
//! the recursive method, and empirical period detection.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::rtg::Grammar;
use crate::trees::{Context, Sym, Tree};

/// A canonical rule `lhs → symbol(args…)` over nonterminal indices.
#[derive(Clone, Debug)]
pub struct IndexedRule {
    pub lhs: usize,
    pub symbol: Sym,
    pub args: Vec<usize>,
}

/// A canonical grammar with nonterminals numbered in name order.
#[derive(Clone, Debug)]
pub struct Indexed {
    pub names: Vec<Sym>,
    pub index: HashMap<Sym, usize>,
    pub rules: Vec<IndexedRule>,
    pub by_lhs: Vec<Vec<usize>>,
}

impl Indexed {
    pub fn new(g: &Grammar) -> Result<Self> {
        if let Some(r) = g.rules().iter().find(|r| !g.is_canonical_rule(r)) {
            return Err(Error::NotCanonical(format!("{} -> {}", r.lhs, r.rhs)));
        }
        let names: Vec<Sym> = g.nonterminals().iter().cloned().collect();
        let index: HashMap<Sym, usize> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let mut by_lhs = vec![Vec::new(); names.len()];
        let rules: Vec<IndexedRule> = g
            .rules()
            .iter()
            .enumerate()
            .map(|(ri, r)| {
                let Context::Node(a, kids) = &r.rhs else {
                    unreachable!()
                };
                let args = kids
                    .iter()
                    .map(|k| match k {
                        Context::Node(n, _) => index[n],
                        Context::Hole => unreachable!(),
                    })
                    .collect();
                by_lhs[index[&r.lhs]].push(ri);
                IndexedRule {
                    lhs: index[&r.lhs],
                    symbol: a.clone(),
                    args,
                }
            })
            .collect();
        Ok(Indexed {
            names,
            index,
            rules,
            by_lhs,
        })
    }

    pub fn id(&self, n: &str) -> Result<usize> {
        self.index
            .get(n)
            .copied()
            .ok_or_else(|| Error::UnknownNonterminal(n.to_string()))
    }
}

/// Exact counts `|L_n(G,N)|` and optionally `|L_n(G, N ⇒ N')|` for
/// `0 ≤ n ≤ max_size`.
///
/// The tables count derivations, which equals the number of trees when the
/// grammar is unambiguous.
#[derive(Clone, Debug)]
pub struct CountTable {
    pub grammar: Indexed,
    pub max_size: usize,
    /// `trees[N][n]`.
    trees: Vec<Vec<BigUint>>,
    /// Per rule, prefix convolutions `P_j` for `j = 2..=k` (`P_1` is the
    /// first child's tree column); `P_j[s]` counts tuples of the first `j`
    /// children with total size `s`.
    prefix: Vec<Vec<Vec<BigUint>>>,
    /// `contexts[outer][inner][n]`: 1-contexts `S` with `outer →* S[inner]`.
    contexts: Option<Vec<Vec<Vec<BigUint>>>>,
}

fn convolve_at(a: &[BigUint], b: &[BigUint], s: usize) -> BigUint {
    let mut acc = BigUint::zero();
    for i in 0..=s {
        if i < a.len() && s - i < b.len() && !a[i].is_zero() && !b[s - i].is_zero() {
            acc += &a[i] * &b[s - i];
        }
    }
    acc
}

impl CountTable {
    pub fn build(g: &Grammar, max_size: usize) -> Result<Self> {
        Self::build_with(g, max_size, false, Exec::default())
    }

    pub fn build_with_contexts(g: &Grammar, max_size: usize) -> Result<Self> {
        Self::build_with(g, max_size, true, Exec::default())
    }

    pub fn build_with(g: &Grammar, max_size: usize, contexts: bool, exec: Exec) -> Result<Self> {
        let ix = Indexed::new(g)?;
        let nn = ix.names.len();
        let mut trees: Vec<Vec<BigUint>> = vec![vec![BigUint::zero()]; nn];
        let mut prefix: Vec<Vec<Vec<BigUint>>> = ix
            .rules
            .iter()
            .map(|r| vec![vec![BigUint::zero()]; r.args.len().saturating_sub(1)])
            .collect();
        for n in 1..=max_size {
            let s = n - 1;
            // Extend every prefix column to index s; independent per rule.
            let fresh: Vec<Vec<BigUint>> = par::map_range(exec, ix.rules.len(), |ri| {
                let r = &ix.rules[ri];
                let mut col: Vec<BigUint> = Vec::with_capacity(r.args.len().saturating_sub(1));
                for j in 1..r.args.len() {
                    let left: &[BigUint] = if j == 1 {
                        &trees[r.args[0]]
                    } else {
                        &prefix[ri][j - 2]
                    };
                    let right = &trees[r.args[j]];
                    // trees[_][0] is zero, so P_j[s] itself is never read.
                    col.push(convolve_at(left, right, s));
                }
                col
            });
            for (ri, col) in fresh.into_iter().enumerate() {
                for (j, v) in col.into_iter().enumerate() {
                    if s > 0 {
                        prefix[ri][j].push(v);
                    } else {
                        prefix[ri][j][0] = v;
                    }
                }
            }
            let mut column = vec![BigUint::zero(); nn];
            for (ri, r) in ix.rules.iter().enumerate() {
                let w = rule_weight(&trees, &prefix[ri], r, n);
                column[r.lhs] += w;
            }
            for (i, v) in column.into_iter().enumerate() {
                trees[i].push(v);
            }
        }
        let mut table = CountTable {
            grammar: ix,
            max_size,
            trees,
            prefix,
            contexts: None,
        };
        if contexts {
            table.contexts = Some(table.context_counts(exec));
        }
        Ok(table)
    }

    fn context_counts(&self, exec: Exec) -> Vec<Vec<Vec<BigUint>>> {
        let ix = &self.grammar;
        let nn = ix.names.len();
        let m = self.max_size;
        // others[ri][j][s]: tuples of all children except j with total s.
        let others: Vec<Vec<Vec<BigUint>>> = ix
            .rules
            .iter()
            .map(|r| {
                (0..r.args.len())
                    .map(|j| {
                        let mut acc = vec![BigUint::zero(); m + 1];
                        acc[0] = BigUint::one();
                        for (i, &a) in r.args.iter().enumerate() {
                            if i == j {
                                continue;
                            }
                            acc = (0..=m)
                                .map(|s| convolve_at(&acc, &self.trees[a], s))
                                .collect();
                        }
                        acc
                    })
                    .collect()
            })
            .collect();
        // Inner nonterminals are independent of each other.
        let per_inner: Vec<Vec<Vec<BigUint>>> = par::map_range(exec, nn, |inner| {
            let mut ctx: Vec<Vec<BigUint>> = (0..nn)
                .map(|o| {
                    vec![if o == inner {
                        BigUint::one()
                    } else {
                        BigUint::zero()
                    }]
                })
                .collect();
            for n in 1..=m {
                let mut col = vec![BigUint::zero(); nn];
                for (ri, r) in ix.rules.iter().enumerate() {
                    for (j, &a) in r.args.iter().enumerate() {
                        col[r.lhs] += convolve_at(&ctx[a], &others[ri][j], n - 1);
                    }
                }
                for (o, v) in col.into_iter().enumerate() {
                    ctx[o].push(v);
                }
            }
            ctx
        });
        // Reorder to [outer][inner][n].
        let mut out = vec![vec![Vec::new(); nn]; nn];
        for (inner, by_outer) in per_inner.into_iter().enumerate() {
            for (outer, col) in by_outer.into_iter().enumerate() {
                out[outer][inner] = col;
            }
        }
        out
    }

    fn check_size(&self, n: usize) -> Result<()> {
        if n > self.max_size {
            Err(Error::OutOfRange {
                size: n,
                bound: self.max_size,
            })
        } else {
            Ok(())
        }
    }

    pub fn count_trees(&self, nt: &str, n: usize) -> Result<BigUint> {
        self.check_size(n)?;
        Ok(self.trees[self.grammar.id(nt)?][n].clone())
    }

    pub fn tree_column(&self, nt: &str) -> Result<&[BigUint]> {
        Ok(&self.trees[self.grammar.id(nt)?])
    }

    /// Number of 1-contexts `S` with `outer →* S[inner]` and `|S| = n`.
    pub fn count_contexts(&self, inner: &str, outer: &str, n: usize) -> Result<BigUint> {
        self.check_size(n)?;
        let ctx = self
            .contexts
            .as_ref()
            .ok_or_else(|| Error::Domain("table built without context counts".into()))?;
        Ok(ctx[self.grammar.id(outer)?][self.grammar.id(inner)?][n].clone())
    }

    pub fn has_contexts(&self) -> bool {
        self.contexts.is_some()
    }

    /// Draws a tree uniformly from `L_n(G, nt)`.
    pub fn sample<R: Rng + ?Sized>(&self, nt: &str, n: usize, rng: &mut R) -> Result<Tree> {
        self.check_size(n)?;
        let id = self.grammar.id(nt)?;
        if self.trees[id][n].is_zero() {
            return Err(Error::EmptySlice {
                nt: nt.to_string(),
                size: n,
            });
        }
        Ok(self.sample_id(id, n, rng))
    }

    pub(crate) fn sample_id<R: Rng + ?Sized>(&self, id: usize, n: usize, rng: &mut R) -> Tree {
        let mut pick = rng.gen_biguint_below(&self.trees[id][n]);
        let mut chosen = None;
        for &ri in &self.grammar.by_lhs[id] {
            let r = &self.grammar.rules[ri];
            let w = rule_weight(&self.trees, &self.prefix[ri], r, n);
            if pick < w {
                chosen = Some(ri);
                break;
            }
            pick -= w;
        }
        let ri = chosen.expect("weights sum to the tree count");
        let r = &self.grammar.rules[ri];
        let k = r.args.len();
        let mut sizes = vec![0usize; k];
        let mut rest = n - 1;
        // Peel children from the right; child j's size s has weight
        // P_{j-1}[rest - s] * trees[arg_j][s].
        for j in (1..k).rev() {
            let total = self.prefix[ri][j - 1][rest].clone();
            let mut pick = rng.gen_biguint_below(&total);
            let left: &[BigUint] = if j == 1 {
                &self.trees[r.args[0]]
            } else {
                &self.prefix[ri][j - 2]
            };
            let mut sz = None;
            for s in 1..=rest {
                let l = &left[rest - s];
                let t = &self.trees[r.args[j]][s];
                if l.is_zero() || t.is_zero() {
                    continue;
                }
                let w = l * t;
                if pick < w {
                    sz = Some(s);
                    break;
                }
                pick -= w;
            }
            let s = sz.expect("composition weights sum to the total");
            sizes[j] = s;
            rest -= s;
        }
        if k > 0 {
            sizes[0] = rest;
        }
        let kids = r
            .args
            .iter()
            .zip(&sizes)
            .map(|(&a, &s)| self.sample_id(a, s, rng))
            .collect();
        Context::Node(r.symbol.clone(), kids)
    }
}

/// Number of trees of size `n` whose root uses rule `r`.
fn rule_weight(
    trees: &[Vec<BigUint>],
    prefix: &[Vec<BigUint>],
    r: &IndexedRule,
    n: usize,
) -> BigUint {
    let s = n - 1;
    match r.args.len() {
        0 => {
            if n == 1 {
                BigUint::one()
            } else {
                BigUint::zero()
            }
        }
        1 => trees[r.args[0]].get(s).cloned().unwrap_or_default(),
        k => prefix[k - 2].get(s).cloned().unwrap_or_default(),
    }
}

/// Free-function form of [`CountTable::sample`].
pub fn sample_uniform<R: Rng + ?Sized>(
    t: &CountTable,
    nt: &str,
    n: usize,
    rng: &mut R,
) -> Result<Tree> {
    t.sample(nt, n, rng)
}

/// Period `c` and residues `d_{N,N'}` of the context-size spectra.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PeriodReport {
    pub period: usize,
    /// Key `(N, N')` refers to contexts of type `N ⇒ N'`, i.e. `N' →* S[N]`.
    pub residues: BTreeMap<(String, String), usize>,
    /// Least `n0 ≤ M` from which every residue-matching size up to `M` is
    /// populated. An observation bounded by `M`, not the true constant.
    pub n0_estimate: usize,
    pub max_size: usize,
    pub scope: Vec<String>,
}

/// Detects the basic period over `scope` (default: `N^inf`) using context
/// counts up to `max_size`.
pub fn detect_period(
    g: &Grammar,
    scope: Option<&BTreeSet<Sym>>,
    max_size: usize,
) -> Result<PeriodReport> {
    let table = CountTable::build_with_contexts(g, max_size)?;
    let scope: BTreeSet<Sym> = match scope {
        Some(s) => s.clone(),
        None => g.infinite_nonterminals()?,
    };
    if scope.is_empty() {
        return Err(Error::NoInfinite);
    }
    let ids: Vec<(Sym, usize)> = scope
        .iter()
        .map(|n| Ok((n.clone(), table.grammar.id(n)?)))
        .collect::<Result<_>>()?;
    let ctx = table.contexts.as_ref().expect("built with contexts");
    let spectrum = |inner: usize, outer: usize| -> Vec<usize> {
        (0..=max_size)
            .filter(|&n| !ctx[outer][inner][n].is_zero())
            .collect()
    };
    let mut c = 0usize;
    for (a, ia) in &ids {
        for (b, ib) in &ids {
            let sp = spectrum(*ia, *ib);
            if sp.len() < 2 {
                return Err(Error::InsufficientData(format!(
                    "pair ({a}, {b}) has {} witnesses up to size {max_size}",
                    sp.len()
                )));
            }
            for w in sp.windows(2) {
                c = c.gcd(&(w[1] - w[0]));
            }
        }
    }
    let mut residues = BTreeMap::new();
    for (a, ia) in &ids {
        for (b, ib) in &ids {
            let sp = spectrum(*ia, *ib);
            let d = sp[0] % c;
            if let Some(bad) = sp.iter().find(|&&n| n % c != d) {
                return Err(Error::PeriodCheck(format!(
                    "context of size {bad} for ({a}, {b}) breaks residue {d} mod {c}"
                )));
            }
            residues.insert((a.to_string(), b.to_string()), d);
        }
    }
    for (a, _) in &ids {
        let d = residues[&(a.to_string(), a.to_string())];
        if d != 0 {
            return Err(Error::PeriodCheck(format!("d({a},{a}) = {d}")));
        }
    }
    for (a, _) in &ids {
        for (b, _) in &ids {
            for (e, _) in &ids {
                let ab = residues[&(a.to_string(), b.to_string())];
                let be = residues[&(b.to_string(), e.to_string())];
                let ae = residues[&(a.to_string(), e.to_string())];
                if (ab + be) % c != ae {
                    return Err(Error::PeriodCheck(format!(
                        "d({a},{b}) + d({b},{e}) != d({a},{e}) mod {c}"
                    )));
                }
            }
        }
    }
    let mut n0 = 0;
    for (a, ia) in &ids {
        for (b, ib) in &ids {
            let d = residues[&(a.to_string(), b.to_string())];
            for n in (0..=max_size).rev() {
                if n % c == d && ctx[*ib][*ia][n].is_zero() {
                    n0 = n0.max(n + 1);
                    break;
                }
            }
        }
    }
    Ok(PeriodReport {
        period: c,
        residues,
        n0_estimate: n0,
        max_size,
        scope: scope.iter().map(|s| s.to_string()).collect(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Aperiodicity {
    /// Every size in `[n0, M]` is populated and that run covers at least
    /// half of the range.
    AperiodicUpTo {
        n0: usize,
        max_size: usize,
    },
    PeriodicWithGaps,
    Inconclusive,
}

pub fn is_aperiodic(t: &CountTable, nt: &str) -> Result<Aperiodicity> {
    let col = t.tree_column(nt)?;
    let m = t.max_size;
    let populated = col.iter().filter(|c| !c.is_zero()).count();
    if populated < 2 {
        return Ok(Aperiodicity::Inconclusive);
    }
    let mut n0 = m + 1;
    while n0 > 0 && !col[n0 - 1].is_zero() {
        n0 -= 1;
    }
    if n0 <= m && 2 * (m + 1 - n0) >= m {
        Ok(Aperiodicity::AperiodicUpTo { n0, max_size: m })
    } else {
        Ok(Aperiodicity::PeriodicWithGaps)
    }
}
