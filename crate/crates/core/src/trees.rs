//! Ranked alphabets, trees and contexts with first-order holes.
//!
//! A single type [`Context`] covers trees (no holes) and k-contexts. Holes
//! are numbered in depth-first, left-to-right preorder everywhere.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Interned-by-`Arc` symbol name.
pub type Sym = Arc<str>;

pub fn sym(s: &str) -> Sym {
    Arc::from(s)
}

/// A tree over a ranked alphabet extended with the nullary hole `_`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Context {
    Hole,
    Node(Sym, Vec<Context>),
}

/// A context without holes.
pub type Tree = Context;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RankedAlphabet {
    symbols: BTreeMap<Sym, usize>,
    max_rank: usize,
}

impl RankedAlphabet {
    pub fn new<I, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, usize)>,
        S: AsRef<str>,
    {
        let mut symbols = BTreeMap::new();
        for (name, rank) in pairs {
            let name = sym(name.as_ref());
            if let Some(&old) = symbols.get(&name) {
                if old != rank {
                    return Err(Error::RankMismatch {
                        symbol: name.to_string(),
                        expected: old,
                        found: rank,
                    });
                }
            }
            symbols.insert(name, rank);
        }
        if symbols.is_empty() {
            return Err(Error::Domain("empty alphabet".into()));
        }
        let max_rank = symbols.values().copied().max().unwrap_or(0);
        Ok(RankedAlphabet { symbols, max_rank })
    }

    pub fn rank(&self, s: &str) -> Option<usize> {
        self.symbols.get(s).copied()
    }

    pub fn max_rank(&self) -> usize {
        self.max_rank
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Sym, usize)> {
        self.symbols.iter().map(|(s, &r)| (s, r))
    }

    /// Checks that every node of `c` uses a declared symbol at its rank.
    pub fn check(&self, c: &Context) -> Result<()> {
        match c {
            Context::Hole => Ok(()),
            Context::Node(a, kids) => {
                let r = self
                    .rank(a)
                    .ok_or_else(|| Error::Undeclared(a.to_string()))?;
                if r != kids.len() {
                    return Err(Error::RankMismatch {
                        symbol: a.to_string(),
                        expected: r,
                        found: kids.len(),
                    });
                }
                kids.iter().try_for_each(|k| self.check(k))
            }
        }
    }
}

impl Context {
    pub fn leaf(a: &str) -> Self {
        Context::Node(sym(a), Vec::new())
    }

    pub fn node(a: &str, kids: Vec<Context>) -> Self {
        Context::Node(sym(a), kids)
    }

    pub fn is_hole(&self) -> bool {
        matches!(self, Context::Hole)
    }

    /// Number of terminal occurrences; holes count zero.
    pub fn size(&self) -> usize {
        match self {
            Context::Hole => 0,
            Context::Node(_, kids) => 1 + kids.iter().map(Context::size).sum::<usize>(),
        }
    }

    pub fn hole_count(&self) -> usize {
        match self {
            Context::Hole => 1,
            Context::Node(_, kids) => kids.iter().map(Context::hole_count).sum(),
        }
    }

    pub fn is_tree(&self) -> bool {
        self.hole_count() == 0
    }

    pub fn depth(&self) -> usize {
        match self {
            Context::Hole => 0,
            Context::Node(_, kids) => 1 + kids.iter().map(Context::depth).max().unwrap_or(0),
        }
    }

    /// Replaces the i-th hole by `parts[i]` for every i.
    pub fn fill(&self, parts: &[Context]) -> Result<Context> {
        let holes = self.hole_count();
        if holes != parts.len() {
            return Err(Error::Arity {
                expected: holes,
                found: parts.len(),
            });
        }
        let mut it = parts.iter();
        Ok(self.fill_iter(&mut it))
    }

    fn fill_iter<'a>(&self, it: &mut impl Iterator<Item = &'a Context>) -> Context {
        match self {
            Context::Hole => it.next().cloned().unwrap_or(Context::Hole),
            Context::Node(a, kids) => {
                Context::Node(a.clone(), kids.iter().map(|k| k.fill_iter(it)).collect())
            }
        }
    }

    /// Replaces only hole `i` (1-based).
    pub fn fill_at(&self, part: &Context, i: usize) -> Result<Context> {
        let holes = self.hole_count();
        if i == 0 || i > holes {
            return Err(Error::HoleIndex { index: i, holes });
        }
        let mut seen = 0;
        Ok(self.fill_at_rec(part, i, &mut seen))
    }

    fn fill_at_rec(&self, part: &Context, i: usize, seen: &mut usize) -> Context {
        match self {
            Context::Hole => {
                *seen += 1;
                if *seen == i {
                    part.clone()
                } else {
                    Context::Hole
                }
            }
            Context::Node(a, kids) => Context::Node(
                a.clone(),
                kids.iter().map(|k| k.fill_at_rec(part, i, seen)).collect(),
            ),
        }
    }

    /// Decides `self ⪯ other`: some node of `other` (or `other` itself)
    /// matches `self` with holes of `self` cutting arbitrary subcontexts.
    pub fn is_subcontext_of(&self, other: &Context) -> bool {
        if self.is_hole() {
            return true;
        }
        let mut stack = vec![other];
        while let Some(n) = stack.pop() {
            if matches_at(self, n) {
                return true;
            }
            if let Context::Node(_, kids) = n {
                stack.extend(kids.iter());
            }
        }
        false
    }

    /// Subtrees in preorder, the root first.
    pub fn preorder(&self) -> Vec<&Context> {
        let mut out = Vec::new();
        let mut stack = vec![self];
        while let Some(n) = stack.pop() {
            out.push(n);
            if let Context::Node(_, kids) = n {
                stack.extend(kids.iter().rev());
            }
        }
        out
    }

    /// XML-like serialization of an affine context.
    pub fn serialize_affine(&self) -> Result<Vec<Letter>> {
        let h = self.hole_count();
        if h > 1 {
            return Err(Error::NotAffine(h));
        }
        let mut out = Vec::with_capacity(2 * self.size() + h);
        self.serialize_into(&mut out);
        Ok(out)
    }

    fn serialize_into(&self, out: &mut Vec<Letter>) {
        match self {
            Context::Hole => out.push(Letter::Square),
            Context::Node(a, kids) => {
                out.push(Letter::Open(a.clone()));
                kids.iter().for_each(|k| k.serialize_into(out));
                out.push(Letter::Close(a.clone()));
            }
        }
    }
}

fn matches_at(pat: &Context, t: &Context) -> bool {
    match (pat, t) {
        (Context::Hole, _) => true,
        (Context::Node(a, ps), Context::Node(b, ts)) => {
            a == b && ps.len() == ts.len() && ps.iter().zip(ts).all(|(p, t)| matches_at(p, t))
        }
        _ => false,
    }
}

/// Free-function form of [`Context::is_subcontext_of`].
pub fn is_subcontext(c: &Context, c2: &Context) -> bool {
    c.is_subcontext_of(c2)
}

/// Letters of the serialization alphabet: opening tag, closing tag, hole mark.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Letter {
    Open(Sym),
    Close(Sym),
    Square,
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Letter::Open(a) => write!(f, "⟨{a}⟩"),
            Letter::Close(a) => write!(f, "⟨/{a}⟩"),
            Letter::Square => write!(f, "▢"),
        }
    }
}

pub fn word_to_string(w: &[Letter]) -> String {
    w.iter().map(|l| l.to_string()).collect()
}

/// True iff `pattern` occurs as a contiguous factor of `w`.
pub fn find_subword<T: PartialEq>(w: &[T], pattern: &[T]) -> bool {
    pattern.is_empty() || w.windows(pattern.len()).any(|win| win == pattern)
}

/// All contexts over `alpha` with exactly `size` terminals and exactly
/// `holes` holes. Exponential; meant for small exhaustive checks.
pub fn all_contexts(alpha: &RankedAlphabet, size: usize, holes: usize) -> Vec<Context> {
    let mut memo: BTreeMap<(usize, usize), Vec<Context>> = BTreeMap::new();
    all_rec(alpha, size, holes, &mut memo)
}

fn all_rec(
    alpha: &RankedAlphabet,
    size: usize,
    holes: usize,
    memo: &mut BTreeMap<(usize, usize), Vec<Context>>,
) -> Vec<Context> {
    if let Some(v) = memo.get(&(size, holes)) {
        return v.clone();
    }
    let mut out = Vec::new();
    if size == 0 {
        if holes == 1 {
            out.push(Context::Hole);
        }
    } else {
        for (a, r) in alpha.iter() {
            for (sizes, hs) in splits(r, size - 1, holes) {
                let mut acc: Vec<Vec<Context>> = vec![Vec::new()];
                for (s, h) in sizes.iter().zip(&hs) {
                    let opts = all_rec(alpha, *s, *h, memo);
                    let mut next = Vec::new();
                    for prefix in &acc {
                        for o in &opts {
                            let mut p = prefix.clone();
                            p.push(o.clone());
                            next.push(p);
                        }
                    }
                    acc = next;
                }
                out.extend(acc.into_iter().map(|kids| Context::Node(a.clone(), kids)));
            }
        }
    }
    memo.insert((size, holes), out.clone());
    out
}

/// All ways to split `size` terminals and `holes` holes across `k` children.
fn splits(k: usize, size: usize, holes: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    if k == 0 {
        return if size == 0 && holes == 0 {
            vec![(Vec::new(), Vec::new())]
        } else {
            Vec::new()
        };
    }
    let mut out = Vec::new();
    for s in 0..=size {
        for h in 0..=holes {
            for (mut ss, mut hh) in splits(k - 1, size - s, holes - h) {
                ss.insert(0, s);
                hh.insert(0, h);
                out.push((ss, hh));
            }
        }
    }
    out
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Context::Hole => write!(f, "_"),
            Context::Node(a, kids) => {
                write!(f, "{a}")?;
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
    }
}

impl fmt::Debug for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl std::str::FromStr for Context {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_context(s)
    }
}

/// Parses a tree/context literal such as `a(b(_),c)`.
pub fn parse_context(s: &str) -> Result<Context> {
    let mut p = Cursor::new(s);
    let c = p.node()?;
    p.skip_ws();
    if !p.at_end() {
        return Err(p.error("trailing input"));
    }
    Ok(c)
}

/// Tiny character cursor shared by the literal parsers.
pub(crate) struct Cursor<'a> {
    chars: Vec<char>,
    pos: usize,
    _src: &'a str,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(src: &'a str) -> Self {
        Cursor {
            chars: src.chars().collect(),
            pos: 0,
            _src: src,
        }
    }

    pub(crate) fn error(&self, msg: &str) -> Error {
        Error::Parse {
            line: 1,
            col: self.pos + 1,
            msg: msg.to_string(),
        }
    }

    pub(crate) fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    pub(crate) fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    pub(crate) fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub(crate) fn eat_str(&mut self, s: &str) -> bool {
        self.skip_ws();
        let cs: Vec<char> = s.chars().collect();
        if self.chars[self.pos..].starts_with(&cs) {
            self.pos += cs.len();
            true
        } else {
            false
        }
    }

    pub(crate) fn expect(&mut self, c: char) -> Result<()> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(self.error(&format!("expected `{c}`")))
        }
    }

    /// Identifier `[A-Za-z][A-Za-z0-9_]*`.
    pub(crate) fn ident(&mut self) -> Result<String> {
        self.skip_ws();
        let start = self.pos;
        match self.chars.get(self.pos) {
            Some(c) if c.is_ascii_alphabetic() => self.pos += 1,
            _ => return Err(self.error("expected identifier")),
        }
        while matches!(self.chars.get(self.pos), Some(c) if c.is_ascii_alphanumeric() || *c == '_')
        {
            self.pos += 1;
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn node(&mut self) -> Result<Context> {
        if self.eat('_') {
            return Ok(Context::Hole);
        }
        let name = self.ident()?;
        let mut kids = Vec::new();
        if self.eat('(') && !self.eat(')') {
            loop {
                kids.push(self.node()?);
                if self.eat(')') {
                    break;
                }
                self.expect(',')?;
            }
        }
        Ok(Context::Node(sym(&name), kids))
    }
}
