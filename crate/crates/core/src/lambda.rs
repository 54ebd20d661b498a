//! Simply-typed λ-terms with unused binders, minimal-environment typing,
//! β-reduction lengths, and the regular tree grammar `G(δ,ι,ξ)` whose trees
//! are canonical representatives of α-classes of bounded terms.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rtg::{Grammar, Rule};
use crate::trees::{sym, Context, Cursor, RankedAlphabet, Sym, Tree};

/// Default cap on the number of candidate `(Γ, τ)` pairs.
pub const DEFAULT_NONTERMINAL_CAP: usize = 200_000;
/// Default state budget of the exact β search.
pub const DEFAULT_BETA_BUDGET: usize = 1_000_000;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Type {
    O,
    Arrow(Box<Type>, Box<Type>),
}

impl Type {
    pub fn arrow(a: Type, b: Type) -> Type {
        Type::Arrow(Box::new(a), Box::new(b))
    }

    /// `τ1 → … → τn → o` as `[τ1..τn]`.
    pub fn args(&self) -> Vec<&Type> {
        let mut out = Vec::new();
        let mut t = self;
        while let Type::Arrow(a, b) = t {
            out.push(a.as_ref());
            t = b;
        }
        out
    }

    pub fn ord(&self) -> usize {
        match self {
            Type::O => 0,
            Type::Arrow(a, b) => (a.ord() + 1).max(b.ord()),
        }
    }

    pub fn iar(&self) -> usize {
        let args = self.args();
        args.iter().map(|a| a.iar()).fold(args.len(), usize::max)
    }

    /// Prefix encoding safe for grammar identifiers: `o`, `A<arg><res>`.
    pub fn encode(&self) -> String {
        match self {
            Type::O => "o".to_string(),
            Type::Arrow(a, b) => format!("A{}{}", a.encode(), b.encode()),
        }
    }

    pub fn decode(s: &str) -> Result<Type> {
        fn go(cs: &[u8], i: &mut usize) -> Option<Type> {
            let c = *cs.get(*i)?;
            *i += 1;
            match c {
                b'o' => Some(Type::O),
                b'A' => {
                    let a = go(cs, i)?;
                    let b = go(cs, i)?;
                    Some(Type::arrow(a, b))
                }
                _ => None,
            }
        }
        let mut i = 0;
        match go(s.as_bytes(), &mut i) {
            Some(t) if i == s.len() => Ok(t),
            _ => Err(Error::Domain(format!("bad type code `{s}`"))),
        }
    }

    /// `T_0 = o`, `T_{i+1} = T_i → T_i`.
    pub fn twice(i: usize) -> Type {
        (0..i).fold(Type::O, |t, _| Type::arrow(t.clone(), t))
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::O => write!(f, "o"),
            Type::Arrow(a, b) => match a.as_ref() {
                Type::O => write!(f, "o->{b}"),
                _ => write!(f, "({a})->{b}"),
            },
        }
    }
}

impl fmt::Debug for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Type {
    type Err = Error;
    fn from_str(s: &str) -> Result<Type> {
        let mut c = Cursor::new(s);
        let t = parse_type(&mut c)?;
        if c.peek().is_some() {
            return Err(c.error("trailing input"));
        }
        Ok(t)
    }
}

/// `Types(δ, ι)`: every type with order at most `δ` and internal arity at most `ι`.
pub fn types_bounded(delta: usize, iota: usize) -> Vec<Type> {
    if delta == 0 {
        return vec![Type::O];
    }
    let lower = types_bounded(delta - 1, iota);
    let mut out = vec![Type::O];
    let mut seqs: Vec<Vec<&Type>> = vec![Vec::new()];
    for _ in 0..iota {
        let mut next = Vec::new();
        for s in &seqs {
            for t in &lower {
                let mut s2 = s.clone();
                s2.push(t);
                out.push(
                    s2.iter()
                        .rev()
                        .fold(Type::O, |acc, a| Type::arrow((*a).clone(), acc)),
                );
                next.push(s2);
            }
        }
        seqs = next;
    }
    out
}

/// A λ-term; a binder of `None` is the unused binder `∗`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(Sym),
    Lam(Option<Sym>, Type, Box<Term>),
    App(Box<Term>, Box<Term>),
}

impl Term {
    pub fn var(x: &str) -> Term {
        Term::Var(sym(x))
    }

    pub fn lam(x: &str, ty: Type, body: Term) -> Term {
        Term::Lam(Some(sym(x)), ty, Box::new(body))
    }

    pub fn lam_unused(ty: Type, body: Term) -> Term {
        Term::Lam(None, ty, Box::new(body))
    }

    pub fn app(f: Term, a: Term) -> Term {
        Term::App(Box::new(f), Box::new(a))
    }

    pub fn apps(f: Term, args: impl IntoIterator<Item = Term>) -> Term {
        args.into_iter().fold(f, Term::app)
    }

    pub fn size(&self) -> usize {
        match self {
            Term::Var(_) => 1,
            Term::Lam(_, _, b) => 1 + b.size(),
            Term::App(f, a) => 1 + f.size() + a.size(),
        }
    }

    pub fn free_vars(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        self.collect_free(&mut Vec::new(), &mut out);
        out
    }

    fn collect_free(&self, bound: &mut Vec<Sym>, out: &mut BTreeSet<Sym>) {
        match self {
            Term::Var(x) => {
                if !bound.contains(x) {
                    out.insert(x.clone());
                }
            }
            Term::Lam(b, _, body) => {
                if let Some(x) = b {
                    bound.push(x.clone());
                    body.collect_free(bound, out);
                    bound.pop();
                } else {
                    body.collect_free(bound, out);
                }
            }
            Term::App(f, a) => {
                f.collect_free(bound, out);
                a.collect_free(bound, out);
            }
        }
    }

    fn occurs_free(&self, x: &str) -> bool {
        match self {
            Term::Var(y) => y.as_ref() == x,
            Term::Lam(Some(y), _, _) if y.as_ref() == x => false,
            Term::Lam(_, _, b) => b.occurs_free(x),
            Term::App(f, a) => f.occurs_free(x) || a.occurs_free(x),
        }
    }

    /// `V(t)`: named variables and named binders.
    pub fn vars(&self) -> BTreeSet<Sym> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Sym>) {
        match self {
            Term::Var(x) => {
                out.insert(x.clone());
            }
            Term::Lam(b, _, body) => {
                if let Some(x) = b {
                    out.insert(x.clone());
                }
                body.collect_vars(out);
            }
            Term::App(f, a) => {
                f.collect_vars(out);
                a.collect_vars(out);
            }
        }
    }

    pub fn is_closed(&self) -> bool {
        self.free_vars().is_empty()
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Var(x) => write!(f, "{x}"),
            Term::Lam(b, ty, body) => match b {
                Some(x) => write!(f, "\\{x}:{ty}.{body}"),
                None => write!(f, "\\*:{ty}.{body}"),
            },
            Term::App(fun, arg) => {
                match fun.as_ref() {
                    Term::Lam(..) => write!(f, "({fun})")?,
                    _ => write!(f, "{fun}")?,
                }
                match arg.as_ref() {
                    Term::Var(_) => write!(f, " {arg}"),
                    _ => write!(f, " ({arg})"),
                }
            }
        }
    }
}

impl fmt::Debug for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl FromStr for Term {
    type Err = Error;
    fn from_str(s: &str) -> Result<Term> {
        parse_term(s)
    }
}

/// Parses `\x:T.t`, `\*:T.t`, left-associative juxtaposition and parentheses.
pub fn parse_term(s: &str) -> Result<Term> {
    let mut c = Cursor::new(s);
    let t = term(&mut c)?;
    if c.peek().is_some() {
        return Err(c.error("trailing input"));
    }
    Ok(t)
}

fn parse_type(c: &mut Cursor) -> Result<Type> {
    let a = if c.eat('(') {
        let t = parse_type(c)?;
        c.expect(')')?;
        t
    } else {
        let id = c.ident()?;
        if id != "o" {
            return Err(c.error("expected type `o`"));
        }
        Type::O
    };
    if c.eat_str("->") {
        Ok(Type::arrow(a, parse_type(c)?))
    } else {
        Ok(a)
    }
}

fn lambda(c: &mut Cursor) -> Result<Term> {
    let binder = if c.eat('*') {
        None
    } else {
        Some(sym(&c.ident()?))
    };
    c.expect(':')?;
    let ty = parse_type(c)?;
    c.expect('.')?;
    Ok(Term::Lam(binder, ty, Box::new(term(c)?)))
}

fn term(c: &mut Cursor) -> Result<Term> {
    let mut acc: Option<Term> = None;
    loop {
        let next = match c.peek() {
            Some('\\') => {
                c.eat('\\');
                let l = lambda(c)?;
                acc = Some(match acc {
                    None => l,
                    Some(f) => Term::app(f, l),
                });
                break;
            }
            Some('(') => {
                c.eat('(');
                let t = term(c)?;
                c.expect(')')?;
                t
            }
            Some(ch) if ch.is_ascii_alphabetic() => Term::Var(sym(&c.ident()?)),
            _ => break,
        };
        acc = Some(match acc {
            None => next,
            Some(f) => Term::app(f, next),
        });
    }
    acc.ok_or_else(|| c.error("expected term"))
}

/// `Γ ⊢ t : τ` with `Dom(Γ) = FV(t)`, plus the order and internal arity
/// of its derivation.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Judgment {
    pub env: BTreeMap<Sym, Type>,
    pub term: Term,
    pub ty: Type,
    pub order: usize,
    pub iar: usize,
}

/// Typing of a closed term, or of an open one whose free variables all
/// appear in `hint`.
pub fn typecheck(t: &Term) -> Result<Judgment> {
    typecheck_in(t, &BTreeMap::new())
}

pub fn typecheck_in(t: &Term, hint: &BTreeMap<Sym, Type>) -> Result<Judgment> {
    let (env, ty, order, iar) = infer(t, &mut Vec::new(), hint)?;
    Ok(Judgment {
        env,
        term: t.clone(),
        ty,
        order,
        iar,
    })
}

type Inferred = (BTreeMap<Sym, Type>, Type, usize, usize);

fn infer(
    t: &Term,
    scope: &mut Vec<(Option<Sym>, Type)>,
    hint: &BTreeMap<Sym, Type>,
) -> Result<Inferred> {
    match t {
        Term::Var(x) => {
            let ty = scope
                .iter()
                .rev()
                .find(|(b, _)| b.as_ref() == Some(x))
                .map(|(_, ty)| ty.clone())
                .or_else(|| hint.get(x).cloned())
                .ok_or_else(|| Error::Type(format!("free variable `{x}` has no type")))?;
            let (o, i) = (ty.ord(), ty.iar());
            Ok((BTreeMap::from([(x.clone(), ty.clone())]), ty, o, i))
        }
        Term::Lam(b, sigma, body) => {
            scope.push((b.clone(), sigma.clone()));
            let r = infer(body, scope, hint);
            scope.pop();
            let (mut env, tau, o, i) = r?;
            if let Some(x) = b {
                env.remove(x);
            }
            let ty = Type::arrow(sigma.clone(), tau);
            let (o, i) = (o.max(ty.ord()), i.max(ty.iar()));
            Ok((env, ty, o, i))
        }
        Term::App(f, a) => {
            let (env1, tf, o1, i1) = infer(f, scope, hint)?;
            let (env2, ta, o2, i2) = infer(a, scope, hint)?;
            let Type::Arrow(sigma, tau) = tf else {
                return Err(Error::Type(format!(
                    "`{f}` has type {tf} and cannot be applied"
                )));
            };
            if *sigma != ta {
                return Err(Error::Type(format!(
                    "`{f}` expects {sigma} but `{a}` has type {ta}"
                )));
            }
            let mut env = env1;
            for (x, ty) in env2 {
                if let Some(prev) = env.get(&x) {
                    if prev != &ty {
                        return Err(Error::Type(format!("`{x}` used at types {prev} and {ty}")));
                    }
                }
                env.insert(x, ty);
            }
            let ty = *tau;
            let (o, i) = (o1.max(o2).max(ty.ord()), i1.max(i2).max(ty.iar()));
            Ok((env, ty, o, i))
        }
    }
}

pub fn judgment_order(j: &Judgment) -> usize {
    j.order
}

pub fn judgment_iar(j: &Judgment) -> usize {
    j.iar
}

/// Typed de Bruijn form; a `∗` binder occupies a level that no index uses.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub enum Db {
    Var(usize),
    Free(Sym),
    Lam(Type, Arc<Db>),
    App(Arc<Db>, Arc<Db>),
}

pub fn to_db(t: &Term) -> Db {
    fn go(t: &Term, stack: &mut Vec<Option<Sym>>) -> Db {
        match t {
            Term::Var(x) => match stack.iter().rev().position(|b| b.as_ref() == Some(x)) {
                Some(i) => Db::Var(i),
                None => Db::Free(x.clone()),
            },
            Term::Lam(b, ty, body) => {
                stack.push(b.clone());
                let d = go(body, stack);
                stack.pop();
                Db::Lam(ty.clone(), Arc::new(d))
            }
            Term::App(f, a) => Db::App(Arc::new(go(f, stack)), Arc::new(go(a, stack))),
        }
    }
    go(t, &mut Vec::new())
}

/// Reads a de Bruijn term back with binders `v<depth>`, and `∗` where unused.
pub fn from_db(d: &Db) -> Term {
    fn go(d: &Db, depth: usize) -> Term {
        match d {
            Db::Var(i) => Term::Var(sym(&format!("v{}", depth - 1 - i))),
            Db::Free(x) => Term::Var(x.clone()),
            Db::Lam(ty, b) => {
                let body = go(b, depth + 1);
                if uses(b, 0) {
                    Term::lam(&format!("v{depth}"), ty.clone(), body)
                } else {
                    Term::lam_unused(ty.clone(), body)
                }
            }
            Db::App(f, a) => Term::app(go(f, depth), go(a, depth)),
        }
    }
    go(d, 0)
}

pub fn alpha_eq(a: &Term, b: &Term) -> bool {
    to_db(a) == to_db(b)
}

fn uses(d: &Db, k: usize) -> bool {
    match d {
        Db::Var(i) => *i == k,
        Db::Free(_) => false,
        Db::Lam(_, b) => uses(b, k + 1),
        Db::App(f, a) => uses(f, k) || uses(a, k),
    }
}

fn lift(d: &Arc<Db>, n: usize, cutoff: usize) -> Arc<Db> {
    if n == 0 {
        return d.clone();
    }
    match d.as_ref() {
        Db::Var(i) if *i >= cutoff => Arc::new(Db::Var(i + n)),
        Db::Var(_) | Db::Free(_) => d.clone(),
        Db::Lam(ty, b) => Arc::new(Db::Lam(ty.clone(), lift(b, n, cutoff + 1))),
        Db::App(f, a) => Arc::new(Db::App(lift(f, n, cutoff), lift(a, n, cutoff))),
    }
}

/// `b[a/0]` with the outer binder removed.
fn instantiate(b: &Arc<Db>, a: &Arc<Db>, depth: usize) -> Arc<Db> {
    match b.as_ref() {
        Db::Var(i) if *i == depth => lift(a, depth, 0),
        Db::Var(i) if *i > depth => Arc::new(Db::Var(i - 1)),
        Db::Var(_) | Db::Free(_) => b.clone(),
        Db::Lam(ty, body) => Arc::new(Db::Lam(ty.clone(), instantiate(body, a, depth + 1))),
        Db::App(f, x) => Arc::new(Db::App(instantiate(f, a, depth), instantiate(x, a, depth))),
    }
}

pub fn is_normal(d: &Db) -> bool {
    match d {
        Db::Var(_) | Db::Free(_) => true,
        Db::Lam(_, b) => is_normal(b),
        Db::App(f, a) => !matches!(f.as_ref(), Db::Lam(..)) && is_normal(f) && is_normal(a),
    }
}

/// Every one-step β-reduct of a de Bruijn term.
pub fn db_step_all(d: &Arc<Db>) -> Vec<Arc<Db>> {
    let mut out = Vec::new();
    match d.as_ref() {
        Db::Var(_) | Db::Free(_) => {}
        Db::Lam(ty, b) => {
            out.extend(
                db_step_all(b)
                    .into_iter()
                    .map(|b2| Arc::new(Db::Lam(ty.clone(), b2))),
            );
        }
        Db::App(f, a) => {
            if let Db::Lam(_, body) = f.as_ref() {
                out.push(instantiate(body, a, 0));
            }
            out.extend(
                db_step_all(f)
                    .into_iter()
                    .map(|f2| Arc::new(Db::App(f2, a.clone()))),
            );
            out.extend(
                db_step_all(a)
                    .into_iter()
                    .map(|a2| Arc::new(Db::App(f.clone(), a2))),
            );
        }
    }
    out
}

/// One step of the perpetual strategy: the leftmost redex is contracted
/// when it uses its argument or the argument is normal, otherwise the
/// argument is reduced first so that no work is discarded.
pub fn perpetual_step(d: &Arc<Db>) -> Option<Arc<Db>> {
    match d.as_ref() {
        Db::Var(_) | Db::Free(_) => None,
        Db::Lam(ty, b) => perpetual_step(b).map(|b2| Arc::new(Db::Lam(ty.clone(), b2))),
        Db::App(..) => {
            let mut args = Vec::new();
            let mut head = d;
            while let Db::App(f, a) = head.as_ref() {
                args.push(a.clone());
                head = f;
            }
            args.reverse();
            let rebuild = |h: Arc<Db>, args: &[Arc<Db>]| {
                args.iter()
                    .fold(h, |acc, a| Arc::new(Db::App(acc, a.clone())))
            };
            if let Db::Lam(_, body) = head.as_ref() {
                let a0 = &args[0];
                if uses(body, 0) || is_normal(a0) {
                    return Some(rebuild(instantiate(body, a0, 0), &args[1..]));
                }
                let a1 = perpetual_step(a0).expect("argument is not normal");
                let mut args2 = args.clone();
                args2[0] = a1;
                return Some(rebuild(head.clone(), &args2));
            }
            let h2 = perpetual_step(head);
            if let Some(h2) = h2 {
                return Some(rebuild(h2, &args));
            }
            for i in 0..args.len() {
                if let Some(ai) = perpetual_step(&args[i]) {
                    let mut args2 = args.clone();
                    args2[i] = ai;
                    return Some(rebuild(head.clone(), &args2));
                }
            }
            None
        }
    }
}

/// Length of the perpetual reduction sequence, a lower bound on `β(t)`.
pub fn perpetual_length(t: &Term, max_steps: u64) -> Result<u64> {
    let mut d = Arc::new(to_db(t));
    let mut n = 0u64;
    while let Some(next) = perpetual_step(&d) {
        n += 1;
        if n > max_steps {
            return Err(Error::Budget(max_steps as usize));
        }
        d = next;
    }
    Ok(n)
}

/// `β(t)`, exact or a certified lower bound.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum BetaLength {
    Exact(u64),
    LowerBound(u64),
}

impl BetaLength {
    pub fn value(self) -> u64 {
        match self {
            BetaLength::Exact(n) | BetaLength::LowerBound(n) => n,
        }
    }
}

/// Longest β-reduction length by memoized search over α-normal de Bruijn
/// terms; beyond `budget` states the perpetual strategy supplies a lower bound.
///
/// The search only branches where branching can matter:
/// - In a head normal form `λx⃗. y t1 … tn` the arguments never interact,
///   so the value is the sum over the arguments.
/// - In `(λx.P) Q R⃗`, a step inside `P` or some `Ri` has exactly one
///   residual after the head contraction, so postponing it keeps the length.
///   When `x` occurs in `P`, a step inside `Q` done afterwards is repeated
///   once per copy, so contracting first is never shorter. When `x` is
///   unused, `Q` is erased, and its steps are independent of the rest, so
///   they add exactly the longest reduction of `Q`.
///
/// [`db_step_all`] exposes every reduct for brute-force cross-checks.
pub fn beta_max_len(t: &Term, budget: usize) -> Result<BetaLength> {
    let start = Arc::new(to_db(t));
    let mut search = Longest {
        memo: HashMap::new(),
        budget,
    };
    match search.go(&start) {
        Some(n) => Ok(BetaLength::Exact(n)),
        None => Ok(BetaLength::LowerBound(perpetual_length(t, u64::MAX)?)),
    }
}

struct Longest {
    memo: HashMap<Arc<Db>, u64>,
    budget: usize,
}

impl Longest {
    fn go(&mut self, d: &Arc<Db>) -> Option<u64> {
        if let Db::Lam(_, b) = d.as_ref() {
            return self.go(b);
        }
        if let Some(&v) = self.memo.get(d) {
            return Some(v);
        }
        let mut args = Vec::new();
        let mut head = d;
        while let Db::App(f, a) = head.as_ref() {
            args.push(a.clone());
            head = f;
        }
        args.reverse();
        let v = match head.as_ref() {
            Db::Lam(_, body) => {
                let q = &args[0];
                let contracted = args[1..].iter().fold(instantiate(body, q, 0), |acc, a| {
                    Arc::new(Db::App(acc, a.clone()))
                });
                let erased = if uses(body, 0) { 0 } else { self.go(q)? };
                1 + erased + self.go(&contracted)?
            }
            _ => {
                let mut sum = 0u64;
                for a in &args {
                    sum += self.go(a)?;
                }
                sum
            }
        };
        self.memo.insert(d.clone(), v);
        if self.memo.len() > self.budget {
            return None;
        }
        Some(v)
    }
}

/// Capture-avoiding `t[s/x]`.
pub fn substitute(t: &Term, x: &str, s: &Term) -> Term {
    match t {
        Term::Var(y) => {
            if y.as_ref() == x {
                s.clone()
            } else {
                t.clone()
            }
        }
        Term::App(f, a) => Term::app(substitute(f, x, s), substitute(a, x, s)),
        Term::Lam(None, ty, b) => Term::lam_unused(ty.clone(), substitute(b, x, s)),
        Term::Lam(Some(y), ty, b) => {
            if y.as_ref() == x || !b.occurs_free(x) {
                return t.clone();
            }
            let fs = s.free_vars();
            if !fs.contains(y) {
                return Term::Lam(Some(y.clone()), ty.clone(), Box::new(substitute(b, x, s)));
            }
            let avoid: BTreeSet<Sym> = fs.union(&b.vars()).cloned().chain([sym(x)]).collect();
            let z = (1..)
                .map(|k| sym(&format!("{y}{k}")))
                .find(|z| !avoid.contains(z))
                .expect("fresh name exists");
            let renamed = substitute(b, y, &Term::Var(z.clone()));
            Term::Lam(Some(z), ty.clone(), Box::new(substitute(&renamed, x, s)))
        }
    }
}

/// Every one-step β-reduct, contracting each redex position once.
pub fn beta_step_all(t: &Term) -> Vec<Term> {
    let mut out = Vec::new();
    match t {
        Term::Var(_) => {}
        Term::Lam(b, ty, body) => {
            out.extend(
                beta_step_all(body)
                    .into_iter()
                    .map(|b2| Term::Lam(b.clone(), ty.clone(), Box::new(b2))),
            );
        }
        Term::App(f, a) => {
            if let Term::Lam(b, _, body) = f.as_ref() {
                out.push(match b {
                    None => body.as_ref().clone(),
                    Some(x) => substitute(body, x, a),
                });
            }
            out.extend(
                beta_step_all(f)
                    .into_iter()
                    .map(|f2| Term::app(f2, a.as_ref().clone())),
            );
            out.extend(
                beta_step_all(a)
                    .into_iter()
                    .map(|a2| Term::app(f.as_ref().clone(), a2)),
            );
        }
    }
    let mut seen = BTreeSet::new();
    out.retain(|r| seen.insert(r.clone()));
    out
}

/// `Tw_k = λf:T_{k−1}. λx:T_{k−2}. f (f x)`, defined for `k ≥ 2`.
pub fn twice(k: usize) -> Term {
    assert!(k >= 2, "Tw_k needs k >= 2");
    Term::lam(
        "f",
        Type::twice(k - 1),
        Term::lam(
            "x",
            Type::twice(k - 2),
            Term::app(Term::var("f"), Term::app(Term::var("f"), Term::var("x"))),
        ),
    )
}

/// `D = λx:o. (λx:o. λ∗:o. x) x x`.
pub fn duplicator() -> Term {
    let k = Term::lam("x", Type::O, Term::lam_unused(Type::O, Term::var("x")));
    Term::lam(
        "x",
        Type::O,
        Term::apps(k, [Term::var("x"), Term::var("x")]),
    )
}

/// `I = λx:o. x`.
pub fn identity() -> Term {
    Term::lam("x", Type::O, Term::var("x"))
}

/// `Expl_m^k`. For `k = 2` the chain `Tw_{k−1} ⋯ Tw_2` is empty and the
/// term is `λx. (Tw_2^m D) (I x)`, which keeps the size `8m + 8k − 2`.
pub fn explosive(m: usize, k: usize) -> Result<Term> {
    if m < 1 || k < 2 {
        return Err(Error::Domain(format!(
            "explosive term needs m >= 1 and k >= 2, got m={m}, k={k}"
        )));
    }
    let fold = |base: Term| (0..m).fold(base, |acc, _| Term::app(twice(k), acc));
    let head = if k == 2 {
        fold(duplicator())
    } else {
        let core = fold(twice(k - 1));
        let chain = Term::apps(core, (2..=k - 2).rev().map(twice));
        Term::app(chain, duplicator())
    };
    let ix = Term::app(identity(), Term::var("x"));
    Ok(Term::lam("x", Type::O, Term::app(head, ix)))
}

/// `exp_k(x)`, saturating at `u64::MAX`.
pub fn exp_tower(k: usize, x: u64) -> u64 {
    (0..k).fold(x, |acc, _| if acc >= 64 { u64::MAX } else { 1u64 << acc })
}

pub const APP: &str = "app";

fn var_label(i: usize) -> String {
    format!("x{i}")
}

fn lam_label(binder: Option<usize>, ty: &Type) -> String {
    match binder {
        Some(i) => format!("lam_x{i}_{}", ty.encode()),
        None => format!("lam_s_{}", ty.encode()),
    }
}

fn pool_index(name: &str) -> Option<usize> {
    name.strip_prefix('x')?
        .parse::<usize>()
        .ok()
        .filter(|&i| i >= 1)
}

/// The canonical renaming `rn`: binders take the least pool index not used
/// by the free variables of the abstraction, unused binders become `∗`.
/// Free variables named `x<i>` keep their index; others receive the least
/// unused indices in name order. `xi = None` leaves the pool unbounded.
pub fn rename_canonical(t: &Term, xi: Option<usize>) -> Result<Tree> {
    let mut rho: BTreeMap<Sym, usize> = BTreeMap::new();
    let free = t.free_vars();
    for x in &free {
        if let Some(i) = pool_index(x) {
            rho.insert(x.clone(), i);
        }
    }
    for x in &free {
        if !rho.contains_key(x) {
            let taken: BTreeSet<usize> = rho.values().copied().collect();
            let i = (1..).find(|i| !taken.contains(i)).expect("unbounded");
            rho.insert(x.clone(), i);
        }
    }
    if let Some(bound) = xi {
        if let Some(&i) = rho.values().find(|&&i| i > bound) {
            return Err(Error::TooManyVariables(i));
        }
    }
    rn(t, &mut rho, xi)
}

fn rn(t: &Term, rho: &mut BTreeMap<Sym, usize>, xi: Option<usize>) -> Result<Tree> {
    match t {
        Term::Var(x) => Ok(Context::leaf(&var_label(rho[x]))),
        Term::App(f, a) => Ok(Context::node(APP, vec![rn(f, rho, xi)?, rn(a, rho, xi)?])),
        Term::Lam(b, ty, body) => {
            let used = match b {
                Some(x) => body.occurs_free(x),
                None => false,
            };
            if !used {
                return Ok(Context::node(
                    &lam_label(None, ty),
                    vec![rn(body, rho, xi)?],
                ));
            }
            let x = b.as_ref().expect("used binder is named");
            let dom: BTreeSet<usize> = t.free_vars().iter().map(|y| rho[y]).collect();
            let i = (1..).find(|i| !dom.contains(i)).expect("unbounded");
            if let Some(bound) = xi {
                if i > bound {
                    return Err(Error::TooManyVariables(bound));
                }
            }
            let saved = rho.insert(x.clone(), i);
            let r = rn(body, rho, xi);
            match saved {
                Some(v) => rho.insert(x.clone(), v),
                None => rho.remove(x),
            };
            Ok(Context::node(&lam_label(Some(i), ty), vec![r?]))
        }
    }
}

/// The embedding `e` of a tree over the λ-alphabet into terms.
pub fn embed(t: &Tree) -> Result<Term> {
    let Context::Node(a, kids) = t else {
        return Err(Error::Domain("holes have no λ reading".into()));
    };
    let bad = || {
        Error::Domain(format!(
            "`{a}` with {} children is not a λ constructor",
            kids.len()
        ))
    };
    match kids.len() {
        0 if pool_index(a).is_some() => Ok(Term::Var(a.clone())),
        2 if a.as_ref() == APP => Ok(Term::app(embed(&kids[0])?, embed(&kids[1])?)),
        1 => {
            let rest = a.strip_prefix("lam_").ok_or_else(bad)?;
            let (binder, code) = rest.split_once('_').ok_or_else(bad)?;
            let ty = Type::decode(code)?;
            let body = Box::new(embed(&kids[0])?);
            match binder {
                "s" => Ok(Term::Lam(None, ty, body)),
                x if pool_index(x).is_some() => Ok(Term::Lam(Some(sym(x)), ty, body)),
                _ => Err(bad()),
            }
        }
        _ => Err(bad()),
    }
}

/// `#V(t)`: the number of named variables in the canonical renaming.
pub fn num_vars(t: &Term) -> Result<usize> {
    let tree = rename_canonical(t, None)?;
    let mut names = BTreeSet::new();
    for n in tree.preorder() {
        if let Context::Node(a, kids) = n {
            if kids.is_empty() {
                names.insert(a.to_string());
            } else if let Some(rest) = a.strip_prefix("lam_x") {
                names.insert(format!("x{}", rest.split('_').next().unwrap_or_default()));
            }
        }
    }
    Ok(names.len())
}

/// A pair `(Γ, τ)` with `Γ` mapping pool indices to types.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Typing {
    pub env: BTreeMap<usize, Type>,
    pub ty: Type,
}

impl Typing {
    pub fn closed(ty: Type) -> Self {
        Typing {
            env: BTreeMap::new(),
            ty,
        }
    }
}

impl fmt::Display for Typing {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "N{{")?;
        for (k, (i, ty)) in self.env.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "x{i}:{ty}")?;
        }
        write!(f, "|-{}}}", self.ty)
    }
}

/// `G(δ,ι,ξ)` together with the meaning of each nonterminal.
#[derive(Clone, Debug)]
pub struct LambdaGrammar {
    pub grammar: Grammar,
    pub bounds: (usize, usize, usize),
    typings: BTreeMap<Sym, Typing>,
    names: HashMap<Typing, Sym>,
}

impl LambdaGrammar {
    pub fn nonterminal(&self, t: &Typing) -> Option<&Sym> {
        self.names.get(t)
    }

    pub fn typing(&self, n: &str) -> Option<&Typing> {
        self.typings.get(n)
    }

    pub fn is_empty(&self) -> bool {
        self.typings.is_empty()
    }

    /// Nonterminals `N_{∅⊢σ}`.
    pub fn closed_nonterminals(&self) -> Vec<Sym> {
        self.typings
            .iter()
            .filter(|(_, t)| t.env.is_empty())
            .map(|(n, _)| n.clone())
            .collect()
    }

    pub fn typings(&self) -> impl Iterator<Item = (&Sym, &Typing)> {
        self.typings.iter()
    }

    /// Grammar name to `N{x1:o|-o->o}` display name.
    pub fn name_map(&self) -> BTreeMap<String, String> {
        self.typings
            .iter()
            .map(|(n, t)| (n.to_string(), t.to_string()))
            .collect()
    }
}

fn env_label(alphabet: &mut Vec<(String, usize)>, xi: usize, btypes: &[Type]) {
    for i in 1..=xi {
        alphabet.push((var_label(i), 0));
    }
    alphabet.push((APP.to_string(), 2));
    for ty in btypes {
        alphabet.push((lam_label(None, ty), 1));
        for i in 1..=xi {
            alphabet.push((lam_label(Some(i), ty), 1));
        }
    }
}

/// Builds `G(δ,ι,ξ)`, keeping exactly the pairs `(Γ, τ)` with a nonempty language.
pub fn build_lambda_grammar(delta: usize, iota: usize, xi: usize) -> Result<LambdaGrammar> {
    build_lambda_grammar_with_cap(delta, iota, xi, DEFAULT_NONTERMINAL_CAP)
}

pub fn build_lambda_grammar_with_cap(
    delta: usize,
    iota: usize,
    xi: usize,
    cap: usize,
) -> Result<LambdaGrammar> {
    let types = types_bounded(delta, iota);
    let btypes = if delta >= 1 {
        types_bounded(delta - 1, iota)
    } else {
        Vec::new()
    };
    let type_set: BTreeSet<&Type> = types.iter().collect();
    let env_count = (btypes.len() + 1)
        .checked_pow(xi as u32)
        .filter(|&e| e.saturating_mul(types.len()) <= cap)
        .ok_or(Error::Budget(cap))?;

    let mut envs: Vec<BTreeMap<usize, Type>> = Vec::with_capacity(env_count);
    for code in 0..env_count {
        let mut env = BTreeMap::new();
        let mut c = code;
        for i in 1..=xi {
            let d = c % (btypes.len() + 1);
            c /= btypes.len() + 1;
            if d > 0 {
                env.insert(i, btypes[d - 1].clone());
            }
        }
        envs.push(env);
    }

    let mut candidates: Vec<Typing> = Vec::new();
    for env in &envs {
        for ty in &types {
            candidates.push(Typing {
                env: env.clone(),
                ty: ty.clone(),
            });
        }
    }
    candidates.sort();
    let index: HashMap<&Typing, usize> =
        candidates.iter().enumerate().map(|(i, t)| (t, i)).collect();

    let mut rules: Vec<(usize, String, Vec<usize>)> = Vec::new();
    for (ni, t) in candidates.iter().enumerate() {
        if t.env.len() == 1 {
            let (&i, ty) = t.env.iter().next().expect("one binding");
            if *ty == t.ty {
                rules.push((ni, var_label(i), Vec::new()));
            }
        }
        if let Type::Arrow(sigma, tau) = &t.ty {
            let body = Typing {
                env: t.env.clone(),
                ty: (**tau).clone(),
            };
            rules.push((ni, lam_label(None, sigma), vec![index[&body]]));
            if let Some(i) = (1..=xi).find(|i| !t.env.contains_key(i)) {
                let mut env = t.env.clone();
                env.insert(i, (**sigma).clone());
                let body = Typing {
                    env,
                    ty: (**tau).clone(),
                };
                rules.push((ni, lam_label(Some(i), sigma), vec![index[&body]]));
            }
        }
        let dom: Vec<usize> = t.env.keys().copied().collect();
        for sigma in &types {
            let fty = Type::arrow(sigma.clone(), t.ty.clone());
            if !type_set.contains(&fty) {
                continue;
            }
            // each variable goes left, right or both
            for split in 0..3usize.pow(dom.len() as u32) {
                let (mut e1, mut e2) = (BTreeMap::new(), BTreeMap::new());
                let mut s = split;
                for &i in &dom {
                    let ty = t.env[&i].clone();
                    match s % 3 {
                        0 => {
                            e1.insert(i, ty);
                        }
                        1 => {
                            e2.insert(i, ty);
                        }
                        _ => {
                            e1.insert(i, ty.clone());
                            e2.insert(i, ty);
                        }
                    }
                    s /= 3;
                }
                let l = Typing {
                    env: e1,
                    ty: fty.clone(),
                };
                let r = Typing {
                    env: e2,
                    ty: sigma.clone(),
                };
                rules.push((ni, APP.to_string(), vec![index[&l], index[&r]]));
            }
        }
    }

    let mut nonempty = vec![false; candidates.len()];
    let mut changed = true;
    while changed {
        changed = false;
        for (lhs, _, kids) in &rules {
            if !nonempty[*lhs] && kids.iter().all(|&k| nonempty[k]) {
                nonempty[*lhs] = true;
                changed = true;
            }
        }
    }

    let mut typings = BTreeMap::new();
    let mut names = HashMap::new();
    let mut id_of = vec![None; candidates.len()];
    let mut next = 0usize;
    for (i, t) in candidates.iter().enumerate() {
        if nonempty[i] {
            let n = sym(&format!("N{next}"));
            next += 1;
            id_of[i] = Some(n.clone());
            typings.insert(n.clone(), t.clone());
            names.insert(t.clone(), n);
        }
    }
    let grammar_rules: Vec<Rule> = rules
        .iter()
        .filter(|(lhs, _, kids)| nonempty[*lhs] && kids.iter().all(|&k| nonempty[k]))
        .map(|(lhs, label, kids)| {
            let args = kids
                .iter()
                .map(|&k| Context::leaf(id_of[k].as_ref().expect("nonempty")))
                .collect();
            Rule::new(
                id_of[*lhs].as_ref().expect("nonempty"),
                Context::node(label, args),
            )
        })
        .collect();
    let mut alphabet = Vec::new();
    env_label(&mut alphabet, xi, &btypes);
    let grammar = Grammar::new(RankedAlphabet::new(alphabet)?, grammar_rules)?;
    Ok(LambdaGrammar {
        grammar,
        bounds: (delta, iota, xi),
        typings,
        names,
    })
}

/// The grammar `E`: nonterminals reachable from some closed `N_{∅⊢σ}`.
pub fn restrict_reachable(lg: &LambdaGrammar) -> Result<LambdaGrammar> {
    let g = &lg.grammar;
    let mut keep: BTreeSet<Sym> = lg.closed_nonterminals().into_iter().collect();
    let mut queue: VecDeque<Sym> = keep.iter().cloned().collect();
    while let Some(n) = queue.pop_front() {
        for r in g.rules_for(&n) {
            for m in g.rhs_nonterminals(&r.rhs) {
                if keep.insert(m.clone()) {
                    queue.push_back(m);
                }
            }
        }
    }
    let rules: Vec<Rule> = g
        .rules()
        .iter()
        .filter(|r| keep.contains(&r.lhs))
        .cloned()
        .collect();
    let grammar = Grammar::new(g.alphabet().clone(), rules)?;
    let typings: BTreeMap<Sym, Typing> = lg
        .typings
        .iter()
        .filter(|(n, _)| keep.contains(*n))
        .map(|(n, t)| (n.clone(), t.clone()))
        .collect();
    let names = typings
        .iter()
        .map(|(n, t)| (t.clone(), n.clone()))
        .collect();
    Ok(LambdaGrammar {
        grammar,
        bounds: lg.bounds,
        typings,
        names,
    })
}
