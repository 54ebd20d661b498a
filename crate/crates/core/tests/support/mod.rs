//! Brute-force oracles shared by the integration tests. Nothing here calls
//! into the counting, renaming or reduction code under test.

#![allow(dead_code)]

pub mod checks;

use std::collections::{BTreeSet, HashMap};

use treemonkey::lambda::{Term, Type};
use treemonkey::rtg::Grammar;
use treemonkey::trees::{sym, Context, Tree};

// ---------------------------------------------------------------- grammars

fn is_nt(g: &Grammar, c: &Context) -> Option<String> {
    match c {
        Context::Node(a, k) if k.is_empty() && g.is_nonterminal(a) => Some(a.to_string()),
        _ => None,
    }
}

/// Every derivation of a size-`n` tree from `nt`, read off as its tree.
/// Ambiguous grammars yield repeated trees. Assumes no unit-rule cycles.
pub struct Derivations<'g> {
    g: &'g Grammar,
    trees: HashMap<(String, usize), Vec<Tree>>,
    ctxs: HashMap<(String, String, usize), Vec<Context>>,
}

impl<'g> Derivations<'g> {
    pub fn new(g: &'g Grammar) -> Self {
        Derivations {
            g,
            trees: HashMap::new(),
            ctxs: HashMap::new(),
        }
    }

    pub fn trees(&mut self, nt: &str, n: usize) -> Vec<Tree> {
        let key = (nt.to_string(), n);
        if let Some(v) = self.trees.get(&key) {
            return v.clone();
        }
        let rhss: Vec<Context> = self.g.rules_for(nt).map(|r| r.rhs.clone()).collect();
        let mut out = Vec::new();
        for rhs in &rhss {
            out.extend(self.expand(rhs, n));
        }
        self.trees.insert(key, out.clone());
        out
    }

    fn expand(&mut self, c: &Context, n: usize) -> Vec<Tree> {
        if let Some(m) = is_nt(self.g, c) {
            return self.trees(&m, n);
        }
        let Context::Node(a, kids) = c else {
            return Vec::new();
        };
        if n == 0 {
            return Vec::new();
        }
        self.expand_seq(kids, n - 1)
            .into_iter()
            .map(|ks| Context::Node(a.clone(), ks))
            .collect()
    }

    fn expand_seq(&mut self, kids: &[Context], total: usize) -> Vec<Vec<Tree>> {
        if kids.is_empty() {
            return if total == 0 {
                vec![Vec::new()]
            } else {
                Vec::new()
            };
        }
        let mut out = Vec::new();
        for s in 1..=total {
            let heads = self.expand(&kids[0], s);
            if heads.is_empty() {
                continue;
            }
            let tails = self.expand_seq(&kids[1..], total - s);
            for h in &heads {
                for t in &tails {
                    let mut v = vec![h.clone()];
                    v.extend(t.iter().cloned());
                    out.push(v);
                }
            }
        }
        out
    }

    /// Every derivation `outer →* S[inner]` with `|S| = n`, read off as `S`.
    pub fn contexts(&mut self, inner: &str, outer: &str, n: usize) -> Vec<Context> {
        let key = (inner.to_string(), outer.to_string(), n);
        if let Some(v) = self.ctxs.get(&key) {
            return v.clone();
        }
        let mut out = Vec::new();
        if inner == outer && n == 0 {
            out.push(Context::Hole);
        }
        let rhss: Vec<Context> = self.g.rules_for(outer).map(|r| r.rhs.clone()).collect();
        for rhs in &rhss {
            out.extend(self.expand_ctx(inner, rhs, n));
        }
        self.ctxs.insert(key, out.clone());
        out
    }

    fn expand_ctx(&mut self, inner: &str, c: &Context, n: usize) -> Vec<Context> {
        if let Some(m) = is_nt(self.g, c) {
            return self.contexts(inner, &m, n);
        }
        let Context::Node(a, kids) = c else {
            return Vec::new();
        };
        if n == 0 {
            return Vec::new();
        }
        let mut out = Vec::new();
        for j in 0..kids.len() {
            for s in 0..n {
                let holed = self.expand_ctx(inner, &kids[j], s);
                if holed.is_empty() {
                    continue;
                }
                let mut rest: Vec<Context> = kids.to_vec();
                rest.remove(j);
                for others in self.expand_seq(&rest, n - 1 - s) {
                    for h in &holed {
                        let mut ks = others.clone();
                        ks.insert(j, h.clone());
                        out.push(Context::Node(a.clone(), ks));
                    }
                }
            }
        }
        out
    }
}

/// All trees of exactly `size` nodes over a ranked alphabet.
pub fn trees_over(alpha: &[(&str, usize)], size: usize) -> Vec<Tree> {
    contexts_over(alpha, size, false)
}

/// All contexts of `size` terminals with exactly one hole (`holed`) or none.
pub fn contexts_over(alpha: &[(&str, usize)], size: usize, holed: bool) -> Vec<Context> {
    fn go(alpha: &[(&str, usize)], size: usize, holes: usize) -> Vec<Context> {
        let mut out = Vec::new();
        if size == 0 {
            if holes == 1 {
                out.push(Context::Hole);
            }
            return out;
        }
        for &(a, r) in alpha {
            for kids in seq(alpha, r, size - 1, holes) {
                out.push(Context::node(a, kids));
            }
        }
        out
    }
    fn seq(alpha: &[(&str, usize)], k: usize, size: usize, holes: usize) -> Vec<Vec<Context>> {
        if k == 0 {
            return if size == 0 && holes == 0 {
                vec![Vec::new()]
            } else {
                Vec::new()
            };
        }
        let mut out = Vec::new();
        for s in 0..=size {
            for h in 0..=holes {
                for head in go(alpha, s, h) {
                    for tail in seq(alpha, k - 1, size - s, holes - h) {
                        let mut v = vec![head.clone()];
                        v.extend(tail);
                        out.push(v);
                    }
                }
            }
        }
        out
    }
    go(alpha, size, usize::from(holed))
}

// ------------------------------------------------------------------ λ-terms

/// De Bruijn terms with typed binders; one value per α-class.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum L {
    V(usize),
    Lam(Type, Box<L>),
    App(Box<L>, Box<L>),
}

pub fn ord(t: &Type) -> usize {
    match t {
        Type::O => 0,
        Type::Arrow(a, b) => (ord(a) + 1).max(ord(b)),
    }
}

fn arity(t: &Type) -> usize {
    match t {
        Type::O => 0,
        Type::Arrow(_, b) => 1 + arity(b),
    }
}

pub fn iar(t: &Type) -> usize {
    match t {
        Type::O => 0,
        Type::Arrow(a, b) => arity(t).max(iar(a)).max(iar(b)),
    }
}

/// Types with order at most `d` and internal arity at most `i`.
pub fn types_upto(d: usize, i: usize) -> Vec<Type> {
    if d == 0 {
        return vec![Type::O];
    }
    let args = types_upto(d - 1, i);
    let mut out = vec![Type::O];
    let mut layer: Vec<Vec<Type>> = vec![Vec::new()];
    for _ in 0..i {
        let mut next = Vec::new();
        for l in &layer {
            for a in &args {
                let mut v = l.clone();
                v.push(a.clone());
                next.push(v);
            }
        }
        for l in &next {
            out.push(
                l.iter()
                    .rev()
                    .fold(Type::O, |acc, a| Type::arrow(a.clone(), acc)),
            );
        }
        layer = next;
    }
    out.sort();
    out.dedup();
    out
}

pub fn size(t: &L) -> usize {
    match t {
        L::V(_) => 1,
        L::Lam(_, b) => 1 + size(b),
        L::App(f, a) => 1 + size(f) + size(a),
    }
}

fn mentions(t: &L, k: usize) -> bool {
    match t {
        L::V(i) => *i == k,
        L::Lam(_, b) => mentions(b, k + 1),
        L::App(f, a) => mentions(f, k) || mentions(a, k),
    }
}

/// Least number of names needed to write `t` with shadowing allowed and
/// unused binders written `∗`, found by trying every assignment.
pub fn min_names(t: &L) -> usize {
    // Used binders in preorder; occurrences as (binder, binders strictly inside it).
    fn walk(
        t: &L,
        stack: &mut Vec<Option<usize>>,
        binders: &mut usize,
        occ: &mut Vec<(usize, Vec<usize>)>,
    ) {
        match t {
            L::V(i) => {
                let pos = stack.len() - 1 - i;
                let target = stack[pos].expect("occurrence of a used binder");
                let inside = stack[pos + 1..].iter().flatten().copied().collect();
                occ.push((target, inside));
            }
            L::Lam(_, b) => {
                let id = if mentions(b, 0) {
                    *binders += 1;
                    Some(*binders - 1)
                } else {
                    None
                };
                stack.push(id);
                walk(b, stack, binders, occ);
                stack.pop();
            }
            L::App(f, a) => {
                walk(f, stack, binders, occ);
                walk(a, stack, binders, occ);
            }
        }
    }
    let mut binders = 0;
    let mut occ = Vec::new();
    walk(t, &mut Vec::new(), &mut binders, &mut occ);
    if binders == 0 {
        return 0;
    }
    for v in 1..=binders {
        let mut name = vec![0usize; binders];
        loop {
            if occ
                .iter()
                .all(|(b, inside)| inside.iter().all(|j| name[*j] != name[*b]))
            {
                return v;
            }
            let mut i = 0;
            while i < binders && name[i] + 1 == v {
                name[i] = 0;
                i += 1;
            }
            if i == binders {
                break;
            }
            name[i] += 1;
        }
    }
    binders
}

/// The closed terms of size `n` typable within order `delta` and internal
/// arity `iota` and writable with at most `xi` names, paired with their type.
pub fn closed_terms(delta: usize, iota: usize, xi: usize, n: usize) -> Vec<(L, Type)> {
    let ok = |t: &Type| ord(t) <= delta && iar(t) <= iota;
    let binder_types: Vec<Type> = if delta == 0 {
        Vec::new()
    } else {
        types_upto(delta - 1, iota)
    };
    type Memo = HashMap<(Vec<Type>, usize), Vec<(L, Type)>>;
    fn gen(
        ctx: &mut Vec<Type>,
        n: usize,
        bt: &[Type],
        ok: &dyn Fn(&Type) -> bool,
        memo: &mut Memo,
    ) -> Vec<(L, Type)> {
        let key = (ctx.clone(), n);
        if let Some(v) = memo.get(&key) {
            return v.clone();
        }
        let mut out = Vec::new();
        if n == 1 {
            for (i, t) in ctx.iter().rev().enumerate() {
                if ok(t) {
                    out.push((L::V(i), t.clone()));
                }
            }
        }
        if n >= 2 {
            for s in bt {
                ctx.push(s.clone());
                let bodies = gen(ctx, n - 1, bt, ok, memo);
                ctx.pop();
                for (b, tb) in bodies {
                    let ty = Type::arrow(s.clone(), tb);
                    if ok(&ty) {
                        out.push((L::Lam(s.clone(), Box::new(b)), ty));
                    }
                }
            }
        }
        if n >= 3 {
            for a in 1..n - 1 {
                let fs = gen(ctx, a, bt, ok, memo);
                if fs.is_empty() {
                    continue;
                }
                let xs = gen(ctx, n - 1 - a, bt, ok, memo);
                for (f, tf) in &fs {
                    let Type::Arrow(dom, cod) = tf else { continue };
                    if !ok(cod) {
                        continue;
                    }
                    for (x, tx) in &xs {
                        if tx == dom.as_ref() {
                            out.push((
                                L::App(Box::new(f.clone()), Box::new(x.clone())),
                                (**cod).clone(),
                            ));
                        }
                    }
                }
            }
        }
        memo.insert(key, out.clone());
        out
    }
    let mut memo = Memo::new();
    gen(&mut Vec::new(), n, &binder_types, &ok, &mut memo)
        .into_iter()
        .filter(|(t, _)| min_names(t) <= xi)
        .collect()
}

/// Named reading with a fresh name per binder, so no shadowing occurs.
pub fn to_term(t: &L) -> Term {
    fn go(t: &L, names: &mut Vec<Option<String>>, fresh: &mut usize) -> Term {
        match t {
            L::V(i) => Term::var(names[names.len() - 1 - i].as_deref().expect("used binder")),
            L::Lam(ty, b) => {
                let name = if mentions(b, 0) {
                    *fresh += 1;
                    Some(format!("y{fresh}"))
                } else {
                    None
                };
                names.push(name.clone());
                let body = go(b, names, fresh);
                names.pop();
                match name {
                    Some(x) => Term::lam(&x, ty.clone(), body),
                    None => Term::lam_unused(ty.clone(), body),
                }
            }
            L::App(f, a) => Term::app(go(f, names, fresh), go(a, names, fresh)),
        }
    }
    go(t, &mut Vec::new(), &mut 0)
}

/// De Bruijn reading of a closed named term.
pub fn from_term(t: &Term) -> Option<L> {
    fn go(t: &Term, stack: &mut Vec<Option<String>>) -> Option<L> {
        match t {
            Term::Var(x) => {
                let i = stack
                    .iter()
                    .rev()
                    .position(|b| b.as_deref() == Some(&**x))?;
                Some(L::V(i))
            }
            Term::Lam(b, ty, body) => {
                stack.push(b.as_ref().map(|s| s.to_string()));
                let r = go(body, stack);
                stack.pop();
                Some(L::Lam(ty.clone(), Box::new(r?)))
            }
            Term::App(f, a) => Some(L::App(Box::new(go(f, stack)?), Box::new(go(a, stack)?))),
        }
    }
    go(t, &mut Vec::new())
}

fn shift(t: &L, d: isize, cutoff: usize) -> L {
    match t {
        L::V(i) if *i >= cutoff => L::V((*i as isize + d) as usize),
        L::V(i) => L::V(*i),
        L::Lam(ty, b) => L::Lam(ty.clone(), Box::new(shift(b, d, cutoff + 1))),
        L::App(f, a) => L::App(Box::new(shift(f, d, cutoff)), Box::new(shift(a, d, cutoff))),
    }
}

fn subst(t: &L, j: usize, s: &L) -> L {
    match t {
        L::V(i) if *i == j => s.clone(),
        L::V(i) => L::V(*i),
        L::Lam(ty, b) => L::Lam(ty.clone(), Box::new(subst(b, j + 1, &shift(s, 1, 0)))),
        L::App(f, a) => L::App(Box::new(subst(f, j, s)), Box::new(subst(a, j, s))),
    }
}

/// Every one-step β-reduct.
pub fn reducts(t: &L) -> Vec<L> {
    let mut out = Vec::new();
    match t {
        L::V(_) => {}
        L::Lam(ty, b) => out.extend(
            reducts(b)
                .into_iter()
                .map(|b| L::Lam(ty.clone(), Box::new(b))),
        ),
        L::App(f, a) => {
            if let L::Lam(_, body) = f.as_ref() {
                out.push(shift(&subst(body, 0, &shift(a, 1, 0)), -1, 0));
            }
            out.extend(
                reducts(f)
                    .into_iter()
                    .map(|f| L::App(Box::new(f), a.clone())),
            );
            out.extend(
                reducts(a)
                    .into_iter()
                    .map(|a| L::App(f.clone(), Box::new(a))),
            );
        }
    }
    out
}

/// Longest reduction sequence by plain exhaustive search.
pub fn longest(t: &L) -> u64 {
    reducts(t).iter().map(|r| 1 + longest(r)).max().unwrap_or(0)
}

// -------------------------------------------------------------------- words

/// Exact probability that a uniform word of length `n` over `k` letters
/// contains `pat` as a factor, by a KMP automaton.
pub fn word_containment(k: usize, pat: &[usize], n: usize) -> f64 {
    let m = pat.len();
    if m == 0 {
        return 1.0;
    }
    let mut fail = vec![0usize; m];
    for i in 1..m {
        let mut j = fail[i - 1];
        while j > 0 && pat[i] != pat[j] {
            j = fail[j - 1];
        }
        if pat[i] == pat[j] {
            j += 1;
        }
        fail[i] = j;
    }
    let step = |mut s: usize, c: usize| {
        while s > 0 && pat[s] != c {
            s = fail[s - 1];
        }
        if pat[s] == c {
            s + 1
        } else {
            0
        }
    };
    let mut dist = vec![0.0f64; m];
    dist[0] = 1.0;
    let mut found = 0.0;
    for _ in 0..n {
        let mut next = vec![0.0; m];
        for (s, &p) in dist.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for c in 0..k {
                let t = step(s, c);
                if t == m {
                    found += p / k as f64;
                } else {
                    next[t] += p / k as f64;
                }
            }
        }
        dist = next;
    }
    found
}

// ------------------------------------------------------------------- stats

/// `|k/n − p|` is within `sigmas` binomial standard deviations.
pub fn within_sigmas(k: usize, n: usize, p: f64, sigmas: f64) -> bool {
    let sd = (p * (1.0 - p) / n as f64).sqrt();
    let f = k as f64 / n as f64;
    (f - p).abs() <= sigmas * sd + 1e-12
}

pub fn set_of(v: &[Tree]) -> BTreeSet<Tree> {
    v.iter().cloned().collect()
}

pub fn leaf(a: &str) -> Tree {
    Context::Node(sym(a), Vec::new())
}
