//! Second-order contexts and the decomposition of a tree into a frame and
//! a sequence of affine parts that are good for a threshold `m`.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use crate::counting::Indexed;
use crate::error::{Error, Result};
use crate::par::{self, Exec};
use crate::rtg::{ContextType, Enumerator, Grammar};
use crate::trees::{Context, Sym, Tree};

/// A second-order hole `⟦⟧_k^n`, optionally typed by a context type.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct HoleSpec {
    pub arity: usize,
    pub size: usize,
    pub ty: Option<ContextType>,
}

/// A tree whose nodes are terminals or second-order holes. A hole of
/// arity `k` has `k` children.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SoContext {
    Node(Sym, Vec<SoContext>),
    Hole(HoleSpec, Vec<SoContext>),
}

impl SoContext {
    /// Lifts a tree; panics on first-order holes, which frames never carry.
    pub fn from_tree(t: &Tree) -> Self {
        match t {
            Context::Node(a, kids) => {
                SoContext::Node(a.clone(), kids.iter().map(Self::from_tree).collect())
            }
            Context::Hole => panic!("first-order hole in a frame"),
        }
    }

    /// `c[args]`: replaces the first-order holes of `c` by `args` in order.
    pub fn fill_context(c: &Context, args: Vec<SoContext>) -> Result<Self> {
        let holes = c.hole_count();
        if holes != args.len() {
            return Err(Error::Arity {
                expected: holes,
                found: args.len(),
            });
        }
        let mut it = args.into_iter();
        Ok(Self::fill_rec(c, &mut it))
    }

    fn fill_rec(c: &Context, it: &mut impl Iterator<Item = SoContext>) -> Self {
        match c {
            Context::Hole => it.next().expect("hole count checked"),
            Context::Node(a, kids) => SoContext::Node(
                a.clone(),
                kids.iter().map(|k| Self::fill_rec(k, it)).collect(),
            ),
        }
    }

    /// `|E|`: terminals plus declared hole sizes.
    pub fn size(&self) -> usize {
        match self {
            SoContext::Node(_, kids) => 1 + kids.iter().map(Self::size).sum::<usize>(),
            SoContext::Hole(h, kids) => h.size + kids.iter().map(Self::size).sum::<usize>(),
        }
    }

    /// Number of second-order holes.
    pub fn shn(&self) -> usize {
        match self {
            SoContext::Node(_, kids) => kids.iter().map(Self::shn).sum(),
            SoContext::Hole(_, kids) => 1 + kids.iter().map(Self::shn).sum::<usize>(),
        }
    }

    /// Hole annotations in preorder.
    pub fn holes(&self) -> Vec<&HoleSpec> {
        let mut out = Vec::new();
        self.collect_holes(&mut out);
        out
    }

    fn collect_holes<'a>(&'a self, out: &mut Vec<&'a HoleSpec>) {
        match self {
            SoContext::Node(_, kids) => kids.iter().for_each(|k| k.collect_holes(out)),
            SoContext::Hole(h, kids) => {
                out.push(h);
                kids.iter().for_each(|k| k.collect_holes(out));
            }
        }
    }

    /// Drops every type annotation.
    pub fn forget(&self) -> Self {
        match self {
            SoContext::Node(a, kids) => {
                SoContext::Node(a.clone(), kids.iter().map(Self::forget).collect())
            }
            SoContext::Hole(h, kids) => SoContext::Hole(
                HoleSpec {
                    ty: None,
                    ..h.clone()
                },
                kids.iter().map(Self::forget).collect(),
            ),
        }
    }

    pub fn to_tree(&self) -> Option<Tree> {
        match self {
            SoContext::Node(a, kids) => Some(Context::Node(
                a.clone(),
                kids.iter().map(Self::to_tree).collect::<Option<Vec<_>>>()?,
            )),
            SoContext::Hole(..) => None,
        }
    }
}

impl fmt::Display for SoContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kids = match self {
            SoContext::Node(a, kids) => {
                write!(f, "{a}")?;
                kids
            }
            SoContext::Hole(h, kids) => {
                match &h.ty {
                    None => write!(f, "[[{}:{}]]", h.arity, h.size)?,
                    Some(k) => write!(f, "[[{}:{}]]", k, h.size)?,
                }
                kids
            }
        };
        if !kids.is_empty() {
            write!(f, "(")?;
            for (i, k) in kids.iter().enumerate() {
                if i > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{k}")?;
            }
            write!(f, ")")?;
        }
        Ok(())
    }
}

impl fmt::Debug for SoContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A frame and the parts filling its holes in preorder.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Decomposition {
    pub frame: SoContext,
    pub parts: Vec<Context>,
}

/// `u` is good for `m`: `|u| ≥ m` and every immediate subcontext is smaller than `m`.
pub fn good_for(u: &Context, m: usize) -> Result<bool> {
    let h = u.hole_count();
    if h > 1 {
        return Err(Error::NotAffine(h));
    }
    Ok(match u {
        Context::Hole => false,
        Context::Node(_, kids) => u.size() >= m && kids.iter().all(|k| k.size() < m),
    })
}

/// The auxiliary decomposition `φ_m`: a 1-context `u`, a frame `e` and
/// parts `p` with `(u[e])[p] = t`.
pub fn decompose_aux(t: &Tree, m: usize) -> (Context, SoContext, Vec<Context>) {
    assert!(m >= 1, "threshold must be positive");
    let size = t.size();
    if size < m {
        return (Context::Hole, SoContext::from_tree(t), Vec::new());
    }
    let Context::Node(a, kids) = t else {
        panic!("decompose_aux expects a tree")
    };
    let large: Vec<usize> = (0..kids.len()).filter(|&i| kids[i].size() >= m).collect();
    match large.len() {
        0 => (
            Context::Hole,
            SoContext::Hole(
                HoleSpec {
                    arity: 0,
                    size,
                    ty: None,
                },
                Vec::new(),
            ),
            vec![t.clone()],
        ),
        1 => {
            let i = large[0];
            let (ui, ei, pi) = decompose_aux(&kids[i], m);
            let mut shell_kids = kids.clone();
            shell_kids[i] = ui;
            let shell = Context::Node(a.clone(), shell_kids);
            let n = shell.size();
            if n >= m {
                let mut parts = vec![shell];
                parts.extend(pi);
                let hole = HoleSpec {
                    arity: 1,
                    size: n,
                    ty: None,
                };
                (Context::Hole, SoContext::Hole(hole, vec![ei]), parts)
            } else {
                (shell, ei, pi)
            }
        }
        _ => {
            let mut frames = Vec::with_capacity(kids.len());
            let mut parts = Vec::new();
            for k in kids {
                let (u, e, p) = decompose_aux(k, m);
                frames.push(SoContext::fill_context(&u, vec![e]).expect("u has one hole"));
                parts.extend(p);
            }
            (Context::Hole, SoContext::Node(a.clone(), frames), parts)
        }
    }
}

/// `Φ̂_m(t) = (u[e], p)`.
pub fn decompose(t: &Tree, m: usize) -> Decomposition {
    let (u, e, p) = decompose_aux(t, m);
    Decomposition {
        frame: SoContext::fill_context(&u, vec![e]).expect("u has one hole"),
        parts: p,
    }
}

/// Fills the holes of `e` leftmost-first with `parts`. Fewer parts than
/// holes leave the trailing holes in place.
pub fn recompose(e: &SoContext, parts: &[Context]) -> Result<SoContext> {
    if parts.len() > e.shn() {
        return Err(Error::Arity {
            expected: e.shn(),
            found: parts.len(),
        });
    }
    let mut next = 0usize;
    recompose_rec(e, parts, &mut next, &|_, _, _| Ok(()))
}

/// As [`recompose`], additionally checking each part against the hole's
/// context type when annotated.
pub fn recompose_typed(g: &Grammar, e: &SoContext, parts: &[Context]) -> Result<SoContext> {
    if parts.len() > e.shn() {
        return Err(Error::Arity {
            expected: e.shn(),
            found: parts.len(),
        });
    }
    let checker = TypeChecker::new(g)?;
    let mut next = 0usize;
    recompose_rec(
        e,
        parts,
        &mut next,
        &|i, h: &HoleSpec, c: &Context| match &h.ty {
            Some(k) if !checker.has_type(c, k) => Err(Error::HoleMismatch {
                hole: i + 1,
                msg: format!("part {c} does not have type {k}"),
            }),
            _ => Ok(()),
        },
    )
}

type PartCheck<'a> = dyn Fn(usize, &HoleSpec, &Context) -> Result<()> + 'a;

fn recompose_rec(
    e: &SoContext,
    parts: &[Context],
    next: &mut usize,
    check: &PartCheck,
) -> Result<SoContext> {
    match e {
        SoContext::Node(a, kids) => Ok(SoContext::Node(
            a.clone(),
            kids.iter()
                .map(|k| recompose_rec(k, parts, next, check))
                .collect::<Result<_>>()?,
        )),
        SoContext::Hole(h, kids) => {
            if *next >= parts.len() {
                let kids = kids
                    .iter()
                    .map(|k| recompose_rec(k, parts, next, check))
                    .collect::<Result<_>>()?;
                return Ok(SoContext::Hole(h.clone(), kids));
            }
            let i = *next;
            let c = &parts[i];
            *next += 1;
            if c.hole_count() != h.arity {
                return Err(Error::HoleMismatch {
                    hole: i + 1,
                    msg: format!(
                        "arity {} expected, part has {} holes",
                        h.arity,
                        c.hole_count()
                    ),
                });
            }
            if c.size() != h.size {
                return Err(Error::HoleMismatch {
                    hole: i + 1,
                    msg: format!("size {} expected, part has size {}", h.size, c.size()),
                });
            }
            check(i, h, c)?;
            let kids = kids
                .iter()
                .map(|k| recompose_rec(k, parts, next, check))
                .collect::<Result<Vec<_>>>()?;
            SoContext::fill_context(c, kids)
        }
    }
}

/// Membership and hole typing against a canonical grammar.
pub struct TypeChecker {
    ix: Indexed,
}

impl TypeChecker {
    pub fn new(g: &Grammar) -> Result<Self> {
        Ok(TypeChecker {
            ix: Indexed::new(g)?,
        })
    }

    /// Nonterminals deriving `t`, bottom-up.
    pub fn derivers(&self, t: &Tree) -> Vec<bool> {
        let mut memo = HashMap::new();
        self.derivers_memo(t, &mut memo)
    }

    fn derivers_memo(&self, t: &Tree, memo: &mut HashMap<*const Context, Vec<bool>>) -> Vec<bool> {
        if let Some(v) = memo.get(&(t as *const Context)) {
            return v.clone();
        }
        let mut out = vec![false; self.ix.names.len()];
        if let Context::Node(a, kids) = t {
            let ks: Vec<Vec<bool>> = kids.iter().map(|k| self.derivers_memo(k, memo)).collect();
            for r in &self.ix.rules {
                if &r.symbol == a
                    && r.args.len() == kids.len()
                    && r.args.iter().zip(&ks).all(|(&n, k)| k[n])
                {
                    out[r.lhs] = true;
                }
            }
        }
        memo.insert(t as *const Context, out.clone());
        out
    }

    /// Every labelling `N1..Nk` of the holes of `c` with `n →* c[N1..Nk]`
    /// and `accept(i, Ni)` for each hole `i`.
    fn hole_labellings(
        &self,
        c: &Context,
        n: usize,
        accept: &dyn Fn(usize, usize) -> bool,
        offset: usize,
    ) -> Vec<Vec<usize>> {
        match c {
            Context::Hole => {
                if accept(offset, n) {
                    vec![vec![n]]
                } else {
                    Vec::new()
                }
            }
            Context::Node(a, kids) => {
                let mut out = Vec::new();
                for &ri in &self.ix.by_lhs[n] {
                    let r = &self.ix.rules[ri];
                    if &r.symbol != a || r.args.len() != kids.len() {
                        continue;
                    }
                    let mut acc: Vec<Vec<usize>> = vec![Vec::new()];
                    let mut off = offset;
                    for (k, &arg) in kids.iter().zip(&r.args) {
                        let opts = self.hole_labellings(k, arg, accept, off);
                        off += k.hole_count();
                        let mut next = Vec::new();
                        for p in &acc {
                            for o in &opts {
                                let mut q = p.clone();
                                q.extend(o);
                                next.push(q);
                            }
                        }
                        acc = next;
                        if acc.is_empty() {
                            break;
                        }
                    }
                    out.extend(acc);
                }
                out
            }
        }
    }

    /// `c ∈ L(G, κ)`.
    pub fn has_type(&self, c: &Context, k: &ContextType) -> bool {
        let Ok(res) = self.ix.id(&k.result) else {
            return false;
        };
        let Ok(args) = k
            .args
            .iter()
            .map(|a| self.ix.id(a))
            .collect::<Result<Vec<_>>>()
        else {
            return false;
        };
        if c.hole_count() != args.len() {
            return false;
        }
        !self
            .hole_labellings(c, res, &|i, n| args[i] == n, 0)
            .is_empty()
    }

    /// The unique `N1..Nk` with `c ∈ L(G, N1..Nk ⇒ n0)` and `Ti ∈ L(G, Ni)`.
    pub fn infer_child_types(&self, c: &Context, subtrees: &[Tree], n0: &str) -> Result<Vec<Sym>> {
        if c.hole_count() != subtrees.len() {
            return Err(Error::Arity {
                expected: c.hole_count(),
                found: subtrees.len(),
            });
        }
        let root = self.ix.id(n0)?;
        let sets: Vec<Vec<bool>> = subtrees.iter().map(|t| self.derivers(t)).collect();
        let found = self.hole_labellings(c, root, &|i, n| sets[i][n], 0);
        match found.len() {
            0 => Err(Error::NotInLanguage(n0.to_string())),
            1 => Ok(found[0].iter().map(|&i| self.ix.names[i].clone()).collect()),
            _ => Err(Error::Ambiguous(format!(
                "{} hole typings for {c}",
                found.len()
            ))),
        }
    }

    /// `⊢ e : n` under the two frame typing rules.
    pub fn typecheck_frame(&self, e: &SoContext, n: &str) -> bool {
        match self.ix.id(n) {
            Ok(id) => self.frame_has_type(e, id),
            Err(_) => false,
        }
    }

    fn frame_has_type(&self, e: &SoContext, n: usize) -> bool {
        match e {
            SoContext::Node(a, kids) => self.ix.by_lhs[n].iter().any(|&ri| {
                let r = &self.ix.rules[ri];
                &r.symbol == a
                    && r.args.len() == kids.len()
                    && kids
                        .iter()
                        .zip(&r.args)
                        .all(|(k, &arg)| self.frame_has_type(k, arg))
            }),
            SoContext::Hole(h, kids) => match &h.ty {
                Some(k) => {
                    self.ix.id(&k.result).ok() == Some(n)
                        && k.args.len() == kids.len()
                        && h.arity == kids.len()
                        && kids.iter().zip(&k.args).all(|(kid, a)| {
                            self.ix
                                .id(a)
                                .map(|ai| self.frame_has_type(kid, ai))
                                .unwrap_or(false)
                        })
                }
                None => false,
            },
        }
    }

    /// The typed refinement of `Φ̂_m(t)` for `t ∈ L(G, n)`.
    pub fn refine(&self, n: &str, t: &Tree, m: usize) -> Result<Decomposition> {
        let root = self.ix.id(n)?;
        if !self.derivers(t)[root] {
            return Err(Error::NotInLanguage(n.to_string()));
        }
        let d = decompose(t, m);
        let mut next = 0usize;
        let frame = self.annotate(&d.frame, &d.parts, &mut next, root)?;
        Ok(Decomposition {
            frame,
            parts: d.parts,
        })
    }

    fn annotate(
        &self,
        e: &SoContext,
        parts: &[Context],
        next: &mut usize,
        n: usize,
    ) -> Result<SoContext> {
        match e {
            SoContext::Node(a, kids) => {
                let mut trees = Vec::with_capacity(kids.len());
                let mut off = *next;
                for k in kids {
                    let cnt = k.shn();
                    let filled = recompose(k, &parts[off..off + cnt])?;
                    trees.push(filled.to_tree().expect("all holes filled"));
                    off += cnt;
                }
                let sets: Vec<Vec<bool>> = trees.iter().map(|t| self.derivers(t)).collect();
                let candidates: Vec<usize> = self.ix.by_lhs[n]
                    .iter()
                    .copied()
                    .filter(|&ri| {
                        let r = &self.ix.rules[ri];
                        &r.symbol == a
                            && r.args.len() == kids.len()
                            && r.args.iter().zip(&sets).all(|(&x, s)| s[x])
                    })
                    .collect();
                let ri = match candidates.len() {
                    0 => return Err(Error::NotInLanguage(self.ix.names[n].to_string())),
                    1 => candidates[0],
                    _ => {
                        return Err(Error::Ambiguous(format!(
                            "several rules of {} match",
                            self.ix.names[n]
                        )))
                    }
                };
                let args = self.ix.rules[ri].args.clone();
                let kids = kids
                    .iter()
                    .zip(args)
                    .map(|(k, arg)| self.annotate(k, parts, next, arg))
                    .collect::<Result<_>>()?;
                Ok(SoContext::Node(a.clone(), kids))
            }
            SoContext::Hole(h, kids) => {
                let part = &parts[*next];
                *next += 1;
                let mut trees = Vec::with_capacity(kids.len());
                let mut off = *next;
                for k in kids {
                    let cnt = k.shn();
                    let filled = recompose(k, &parts[off..off + cnt])?;
                    trees.push(filled.to_tree().expect("all holes filled"));
                    off += cnt;
                }
                let result = self.ix.names[n].clone();
                let args = self.infer_child_types(part, &trees, &result)?;
                let kids = kids
                    .iter()
                    .zip(&args)
                    .map(|(k, a)| self.annotate(k, parts, next, self.ix.id(a)?))
                    .collect::<Result<_>>()?;
                Ok(SoContext::Hole(
                    HoleSpec {
                        ty: Some(ContextType { args, result }),
                        ..h.clone()
                    },
                    kids,
                ))
            }
        }
    }
}

pub fn infer_child_types(
    g: &Grammar,
    c: &Context,
    subtrees: &[Tree],
    n0: &str,
) -> Result<Vec<Sym>> {
    TypeChecker::new(g)?.infer_child_types(c, subtrees, n0)
}

pub fn refine(g: &Grammar, n: &str, t: &Tree, m: usize) -> Result<Decomposition> {
    TypeChecker::new(g)?.refine(n, t, m)
}

pub fn typecheck_frame(g: &Grammar, e: &SoContext, n: &str) -> Result<bool> {
    Ok(TypeChecker::new(g)?.typecheck_frame(e, n))
}

/// Outcome of [`verify_bijection`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BijectionReport {
    pub trees: usize,
    pub frames: usize,
    pub product_total: usize,
    pub counterexample: Option<String>,
}

impl BijectionReport {
    pub fn passed(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// One tree together with its typed decomposition.
pub type Entry = (Tree, Decomposition);

/// Enumerates `L_n(G, N)`, refines every tree and checks injectivity and
/// the per-frame product structure.
pub fn verify_bijection(g: &Grammar, n0: &str, n: usize, m: usize) -> Result<BijectionReport> {
    let checker = TypeChecker::new(g)?;
    let trees: Vec<Tree> = Enumerator::new(g, n, 0, crate::rtg::DEFAULT_ENUM_BUDGET)?
        .trees(n0, n)?
        .into_iter()
        .collect();
    let entries: Vec<Result<Entry>> = par::map_slice(Exec::default(), &trees, |t| {
        checker.refine(n0, t, m).map(|d| (t.clone(), d))
    });
    let entries = entries.into_iter().collect::<Result<Vec<_>>>()?;
    check_bijection(g, n0, n, m, &entries)
}

/// The checking half of [`verify_bijection`], exposed so that corrupted
/// entry lists can be fed to it.
pub fn check_bijection(
    g: &Grammar,
    n0: &str,
    n: usize,
    m: usize,
    entries: &[Entry],
) -> Result<BijectionReport> {
    let checker = TypeChecker::new(g)?;
    let en = Enumerator::new(g, n, 1, crate::rtg::DEFAULT_ENUM_BUDGET)?;
    let mut report = BijectionReport {
        trees: entries.len(),
        frames: 0,
        product_total: 0,
        counterexample: None,
    };
    let fail = |mut r: BijectionReport, msg: String| {
        r.counterexample = Some(msg);
        Ok(r)
    };
    let mut seen: HashSet<&Decomposition> = HashSet::new();
    let mut groups: BTreeMap<&SoContext, Vec<&Decomposition>> = BTreeMap::new();
    for (t, d) in entries {
        if !seen.insert(d) {
            return fail(
                report,
                format!("two trees decompose to frame {} with equal parts", d.frame),
            );
        }
        match recompose(&d.frame, &d.parts).map(|e| e.to_tree()) {
            Ok(Some(back)) if &back == t => {}
            _ => {
                return fail(
                    report,
                    format!("decomposition of {t} does not recompose to it"),
                )
            }
        }
        if !checker.typecheck_frame(&d.frame, n0) {
            return fail(report, format!("frame {} does not type as {n0}", d.frame));
        }
        groups.entry(&d.frame).or_default().push(d);
    }
    report.frames = groups.len();
    let mut components: HashMap<(ContextType, usize), HashSet<Context>> = HashMap::new();
    let mut total = 0usize;
    for (frame, members) in &groups {
        let holes = frame.holes();
        let mut product = 1usize;
        let mut comps = Vec::with_capacity(holes.len());
        for h in &holes {
            let Some(k) = &h.ty else {
                return fail(report, format!("frame {frame} has an untyped hole"));
            };
            let key = (k.clone(), h.size);
            if !components.contains_key(&key) {
                let set: HashSet<Context> = en
                    .contexts(k, h.size)?
                    .into_iter()
                    .filter(|u| good_for(u, m).unwrap_or(false))
                    .collect();
                components.insert(key.clone(), set);
            }
            product = product.saturating_mul(components[&key].len());
            comps.push(key);
        }
        for d in members {
            for (i, (p, key)) in d.parts.iter().zip(&comps).enumerate() {
                if !components[key].contains(p) {
                    return fail(
                        report,
                        format!(
                            "part {} = {p} of frame {frame} is outside its component",
                            i + 1
                        ),
                    );
                }
            }
        }
        if members.len() != product {
            return fail(
                report,
                format!(
                    "frame {frame} has {} part tuples, product has {product}",
                    members.len()
                ),
            );
        }
        total += product;
    }
    report.product_total = total;
    let exact = en.trees(n0, n)?.len();
    if total != exact || entries.len() != exact {
        return fail(
            report,
            format!("|L_n| = {exact} but products sum to {total}"),
        );
    }
    Ok(report)
}
