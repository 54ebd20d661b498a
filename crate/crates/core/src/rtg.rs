//! Regular tree grammars: parsing, brute-force enumeration, leftmost
//! derivation counting, reachability and strong connectivity.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use crate::error::{Error, Result};
use crate::trees::{sym, Context, Cursor, RankedAlphabet, Sym, Tree};

/// Default cap on the number of items a brute-force enumeration may hold.
pub const DEFAULT_ENUM_BUDGET: usize = 5_000_000;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rule {
    pub lhs: Sym,
    pub rhs: Context,
}

impl Rule {
    pub fn new(lhs: &str, rhs: Context) -> Self {
        Rule { lhs: sym(lhs), rhs }
    }
}

/// `N1 … Nk ⇒ N`: the type of k-contexts `C` with `N →* C[N1, …, Nk]`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContextType {
    pub args: Vec<Sym>,
    pub result: Sym,
}

impl ContextType {
    pub fn new(args: &[&str], result: &str) -> Self {
        ContextType {
            args: args.iter().map(|a| sym(a)).collect(),
            result: sym(result),
        }
    }
}

impl fmt::Display for ContextType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let args: Vec<&str> = self.args.iter().map(|a| &**a).collect();
        write!(f, "{}=>{}", args.join(","), self.result)
    }
}

/// A regular tree grammar. Rules are kept sorted and deduplicated.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grammar {
    alphabet: RankedAlphabet,
    nonterminals: BTreeSet<Sym>,
    rules: Vec<Rule>,
}

impl Grammar {
    /// Validates and builds a grammar. Nonterminals are exactly the rule heads.
    pub fn new(alphabet: RankedAlphabet, rules: Vec<Rule>) -> Result<Self> {
        let nonterminals: BTreeSet<Sym> = rules.iter().map(|r| r.lhs.clone()).collect();
        for n in &nonterminals {
            if alphabet.rank(n).is_some() {
                return Err(Error::Domain(format!(
                    "`{n}` is both a terminal and a nonterminal"
                )));
            }
        }
        for r in &rules {
            if r.rhs.is_hole() {
                return Err(Error::Domain(format!("rule for `{}` has a hole", r.lhs)));
            }
            check_rhs(&alphabet, &nonterminals, &r.rhs)?;
        }
        let mut rules = rules;
        rules.sort();
        rules.dedup();
        Ok(Grammar {
            alphabet,
            nonterminals,
            rules,
        })
    }

    pub fn alphabet(&self) -> &RankedAlphabet {
        &self.alphabet
    }

    pub fn nonterminals(&self) -> &BTreeSet<Sym> {
        &self.nonterminals
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rules_for<'a>(&'a self, n: &'a str) -> impl Iterator<Item = &'a Rule> + 'a {
        self.rules.iter().filter(move |r| &*r.lhs == n)
    }

    pub fn is_nonterminal(&self, s: &str) -> bool {
        self.nonterminals.contains(s)
    }

    pub fn nonterminal(&self, s: &str) -> Result<Sym> {
        self.nonterminals
            .get(s)
            .cloned()
            .ok_or_else(|| Error::UnknownNonterminal(s.to_string()))
    }

    /// Nonterminal leaves of `rhs` in preorder.
    pub fn rhs_nonterminals(&self, rhs: &Context) -> Vec<Sym> {
        rhs.preorder()
            .into_iter()
            .filter_map(|n| match n {
                Context::Node(a, k) if k.is_empty() && self.is_nonterminal(a) => Some(a.clone()),
                _ => None,
            })
            .collect()
    }

    /// `rhs` with every nonterminal leaf turned into a hole.
    pub fn rhs_template(&self, rhs: &Context) -> Context {
        match rhs {
            Context::Node(a, k) if k.is_empty() && self.is_nonterminal(a) => Context::Hole,
            Context::Node(a, k) => {
                Context::Node(a.clone(), k.iter().map(|c| self.rhs_template(c)).collect())
            }
            Context::Hole => Context::Hole,
        }
    }

    pub fn is_unit_rule(&self, r: &Rule) -> bool {
        matches!(&r.rhs, Context::Node(a, k) if k.is_empty() && self.is_nonterminal(a))
    }

    /// True iff every rule reads `N → a(N1, …, Nk)`.
    pub fn is_canonical(&self) -> bool {
        self.rules.iter().all(|r| self.is_canonical_rule(r))
    }

    pub fn is_canonical_rule(&self, r: &Rule) -> bool {
        match &r.rhs {
            Context::Node(a, kids) => self.alphabet.rank(a).is_some()
                && kids.iter().all(
                    |k| matches!(k, Context::Node(b, g) if g.is_empty() && self.is_nonterminal(b)),
                ),
            Context::Hole => false,
        }
    }

    /// Serializes in the line-oriented grammar file format.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (a, r) in self.alphabet.iter() {
            s.push_str(&format!("terminal {a} {r}\n"));
        }
        for r in &self.rules {
            s.push_str(&format!("rule {} -> {}\n", r.lhs, r.rhs));
        }
        s
    }

    /// Nonterminals with a nonempty language (least fixpoint).
    pub fn nonempty_nonterminals(&self) -> BTreeSet<Sym> {
        let mut ok: BTreeSet<Sym> = BTreeSet::new();
        loop {
            let mut changed = false;
            for r in &self.rules {
                if !ok.contains(&r.lhs)
                    && self.rhs_nonterminals(&r.rhs).iter().all(|n| ok.contains(n))
                {
                    ok.insert(r.lhs.clone());
                    changed = true;
                }
            }
            if !changed {
                return ok;
            }
        }
    }

    fn require_pruned(&self) -> Result<()> {
        let ne = self.nonempty_nonterminals();
        let empty: Vec<&str> = self
            .nonterminals
            .iter()
            .filter(|n| !ne.contains(*n))
            .map(|n| &**n)
            .collect();
        if empty.is_empty() {
            Ok(())
        } else {
            Err(Error::Unpruned(empty.join(", ")))
        }
    }

    /// Edges `N → M` whenever `M` occurs in a right-hand side of `N`; the
    /// flag says whether the rule carries at least one terminal.
    fn edges(&self) -> BTreeMap<Sym, Vec<(Sym, bool)>> {
        let mut e: BTreeMap<Sym, Vec<(Sym, bool)>> = BTreeMap::new();
        for n in &self.nonterminals {
            e.entry(n.clone()).or_default();
        }
        for r in &self.rules {
            let productive = r.rhs.size() > self.rhs_nonterminals(&r.rhs).len();
            for m in self.rhs_nonterminals(&r.rhs) {
                e.get_mut(&r.lhs).unwrap().push((m, productive));
            }
        }
        e
    }

    fn closure_from(&self, edges: &BTreeMap<Sym, Vec<(Sym, bool)>>, from: &Sym) -> BTreeSet<Sym> {
        let mut seen = BTreeSet::from([from.clone()]);
        let mut q = VecDeque::from([from.clone()]);
        while let Some(n) = q.pop_front() {
            for (m, _) in &edges[&n] {
                if seen.insert(m.clone()) {
                    q.push_back(m.clone());
                }
            }
        }
        seen
    }

    /// Reachability matrix: `to ∈ result[from]` iff some 1-context `S`
    /// satisfies `from →* S[to]`. Requires a pruned grammar.
    pub fn reachability(&self) -> Result<BTreeMap<Sym, BTreeSet<Sym>>> {
        self.require_pruned()?;
        let edges = self.edges();
        Ok(self
            .nonterminals
            .iter()
            .map(|n| (n.clone(), self.closure_from(&edges, n)))
            .collect())
    }

    pub fn reachable(&self, from: &str, to: &str) -> Result<bool> {
        let from = self.nonterminal(from)?;
        let to = self.nonterminal(to)?;
        self.require_pruned()?;
        Ok(self.closure_from(&self.edges(), &from).contains(&to))
    }

    /// `N^inf`: nonterminals whose language is infinite. Requires pruning.
    pub fn infinite_nonterminals(&self) -> Result<BTreeSet<Sym>> {
        let reach = self.reachability()?;
        let mut pumping = BTreeSet::new();
        for r in &self.rules {
            if r.rhs.size() > self.rhs_nonterminals(&r.rhs).len() {
                for v in self.rhs_nonterminals(&r.rhs) {
                    // Every M with M →* lhs and v →* M lies on a pumping cycle.
                    for m in &reach[&v] {
                        if reach[m].contains(&r.lhs) {
                            pumping.insert(m.clone());
                        }
                    }
                }
            }
        }
        Ok(self
            .nonterminals
            .iter()
            .filter(|n| reach[*n].iter().any(|m| pumping.contains(m)))
            .cloned()
            .collect())
    }

    pub fn is_strongly_connected(&self) -> Result<bool> {
        let reach = self.reachability()?;
        Ok(reach.values().all(|s| s.len() == self.nonterminals.len()))
    }

    pub fn is_essentially_strongly_connected(&self) -> Result<bool> {
        let reach = self.reachability()?;
        let inf = self.infinite_nonterminals()?;
        Ok(inf.iter().all(|a| inf.iter().all(|b| reach[a].contains(b))))
    }

    /// Number of leftmost derivations `n0 →* t`, saturating at `cap`.
    pub fn count_leftmost_derivations(&self, n0: &str, t: &Tree, cap: u64) -> Result<u64> {
        let n0 = self.nonterminal(n0)?;
        let nts: Vec<Sym> = self.nonterminals.iter().cloned().collect();
        let idx: HashMap<Sym, usize> = nts
            .iter()
            .enumerate()
            .map(|(i, n)| (n.clone(), i))
            .collect();
        let mut memo: HashMap<*const Context, Vec<u64>> = HashMap::new();
        let counts = self.derivations_at(t, &nts, &idx, cap, &mut memo);
        Ok(counts[idx[&n0]])
    }

    fn derivations_at(
        &self,
        t: &Context,
        nts: &[Sym],
        idx: &HashMap<Sym, usize>,
        cap: u64,
        memo: &mut HashMap<*const Context, Vec<u64>>,
    ) -> Vec<u64> {
        if let Some(v) = memo.get(&(t as *const Context)) {
            return v.clone();
        }
        if let Context::Node(_, kids) = t {
            for k in kids {
                self.derivations_at(k, nts, idx, cap, memo);
            }
        }
        let mut base = vec![0u64; nts.len()];
        let mut units: Vec<(usize, usize)> = Vec::new();
        for r in &self.rules {
            let i = idx[&r.lhs];
            if self.is_unit_rule(r) {
                if let Context::Node(m, _) = &r.rhs {
                    units.push((i, idx[m]));
                }
                continue;
            }
            let mut captured = Vec::new();
            if self.match_rhs(&r.rhs, t, &mut captured) {
                let mut prod = 1u64;
                for (m, sub) in captured {
                    let c = self.derivations_at(sub, nts, idx, cap, memo)[idx[&m]];
                    prod = prod.saturating_mul(c).min(cap);
                }
                base[i] = base[i].saturating_add(prod).min(cap);
            }
        }
        // Unit rules keep the same subject tree: iterate to a fixpoint.
        let mut cur = base.clone();
        loop {
            let mut next = base.clone();
            for &(i, j) in &units {
                next[i] = next[i].saturating_add(cur[j]).min(cap);
            }
            if next == cur {
                break;
            }
            cur = next;
        }
        memo.insert(t as *const Context, cur.clone());
        cur
    }

    fn match_rhs<'t>(
        &self,
        rhs: &Context,
        t: &'t Context,
        out: &mut Vec<(Sym, &'t Context)>,
    ) -> bool {
        match (rhs, t) {
            (Context::Node(a, k), _) if k.is_empty() && self.is_nonterminal(a) => {
                out.push((a.clone(), t));
                true
            }
            (Context::Node(a, ks), Context::Node(b, ts)) => {
                a == b
                    && ks.len() == ts.len()
                    && ks.iter().zip(ts).all(|(k, s)| self.match_rhs(k, s, out))
            }
            _ => false,
        }
    }

    /// Brute-force `L_n(G, n0)`.
    pub fn enumerate_trees(&self, n0: &str, n: usize) -> Result<BTreeSet<Tree>> {
        let e = Enumerator::new(self, n, 0, DEFAULT_ENUM_BUDGET)?;
        e.trees(n0, n)
    }

    /// Brute-force `L_n(G, κ)`.
    pub fn enumerate_contexts(&self, kappa: &ContextType, n: usize) -> Result<BTreeSet<Context>> {
        let e = Enumerator::new(self, n, kappa.args.len(), DEFAULT_ENUM_BUDGET)?;
        e.contexts(kappa, n)
    }
}

fn check_rhs(alpha: &RankedAlphabet, nts: &BTreeSet<Sym>, c: &Context) -> Result<()> {
    match c {
        Context::Hole => Err(Error::Domain("hole in a right-hand side".into())),
        Context::Node(a, kids) => {
            if let Some(r) = alpha.rank(a) {
                if r != kids.len() {
                    return Err(Error::RankMismatch {
                        symbol: a.to_string(),
                        expected: r,
                        found: kids.len(),
                    });
                }
                kids.iter().try_for_each(|k| check_rhs(alpha, nts, k))
            } else if nts.contains(a) {
                if kids.is_empty() {
                    Ok(())
                } else {
                    Err(Error::RankMismatch {
                        symbol: a.to_string(),
                        expected: 0,
                        found: kids.len(),
                    })
                }
            } else {
                Err(Error::Undeclared(a.to_string()))
            }
        }
    }
}

/// Parses the grammar file format:
/// `terminal <name> <rank>` and `rule <NT> -> <tree literal>`, `#` comments.
pub fn parse_grammar(text: &str) -> Result<Grammar> {
    let mut terminals: Vec<(String, usize)> = Vec::new();
    let mut raw_rules: Vec<(usize, String, Context)> = Vec::new();
    let relocate = |e: Error, line: usize, offset: usize| match e {
        Error::Parse { col, msg, .. } => Error::Parse {
            line,
            col: col + offset,
            msg,
        },
        other => other,
    };
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("");
        let trimmed = line.trim_start();
        if trimmed.trim().is_empty() {
            continue;
        }
        let lead = line.len() - trimmed.len();
        if let Some(rest) = trimmed.strip_prefix("terminal") {
            let mut parts = rest.split_whitespace();
            let (Some(name), Some(rank), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Parse {
                    line: line_no,
                    col: lead + 1,
                    msg: "expected `terminal <name> <rank>`".into(),
                });
            };
            let mut cur = Cursor::new(name);
            let id = cur.ident().map_err(|e| relocate(e, line_no, lead))?;
            if id != name {
                return Err(Error::Parse {
                    line: line_no,
                    col: lead + 1,
                    msg: format!("bad terminal name `{name}`"),
                });
            }
            let rank: usize = rank.parse().map_err(|_| Error::Parse {
                line: line_no,
                col: lead + 1,
                msg: format!("bad rank `{rank}`"),
            })?;
            terminals.push((name.to_string(), rank));
        } else if let Some(rest) = trimmed.strip_prefix("rule") {
            let Some((lhs, rhs)) = rest.split_once("->") else {
                return Err(Error::Parse {
                    line: line_no,
                    col: lead + 1,
                    msg: "expected `rule <NT> -> <tree>`".into(),
                });
            };
            let lhs = lhs.trim();
            let mut cur = Cursor::new(lhs);
            let id = cur.ident().map_err(|e| relocate(e, line_no, lead + 4))?;
            if id != lhs {
                return Err(Error::Parse {
                    line: line_no,
                    col: lead + 5,
                    msg: format!("bad nonterminal `{lhs}`"),
                });
            }
            let offset = lead + 4 + rest.find("->").unwrap_or(0) + 2;
            let rhs_tree =
                crate::trees::parse_context(rhs).map_err(|e| relocate(e, line_no, offset))?;
            raw_rules.push((line_no, lhs.to_string(), rhs_tree));
        } else {
            return Err(Error::Parse {
                line: line_no,
                col: lead + 1,
                msg: "expected `terminal` or `rule`".into(),
            });
        }
    }
    let alphabet = RankedAlphabet::new(terminals.iter().map(|(n, r)| (n.as_str(), *r)))?;
    let rules = raw_rules
        .into_iter()
        .map(|(_, l, r)| Rule::new(&l, r))
        .collect();
    Grammar::new(alphabet, rules)
}

/// Sentential forms of one size: the context and its hole labels.
type Layer = BTreeSet<(Context, Vec<Sym>)>;

/// Size-layered brute-force enumeration of sentential forms `N →* C[N1..Nk]`
/// with at most `max_holes` holes, used as the independent oracle.
pub struct Enumerator<'g> {
    g: &'g Grammar,
    max_size: usize,
    layers: BTreeMap<Sym, Vec<Layer>>,
}

impl<'g> Enumerator<'g> {
    pub fn new(g: &'g Grammar, max_size: usize, max_holes: usize, budget: usize) -> Result<Self> {
        let mut layers: BTreeMap<Sym, Vec<Layer>> = g
            .nonterminals
            .iter()
            .map(|n| (n.clone(), Vec::new()))
            .collect();
        let compiled: Vec<(Sym, Context, Vec<Sym>, usize)> = g
            .rules
            .iter()
            .map(|r| {
                (
                    r.lhs.clone(),
                    g.rhs_template(&r.rhs),
                    g.rhs_nonterminals(&r.rhs),
                    r.rhs.size() - g.rhs_nonterminals(&r.rhs).len(),
                )
            })
            .collect();
        let mut total = 0usize;
        for s in 0..=max_size {
            for v in layers.values_mut() {
                v.push(BTreeSet::new());
            }
            if max_holes >= 1 && s == 0 {
                for n in &g.nonterminals {
                    layers.get_mut(n).unwrap()[0].insert((Context::Hole, vec![n.clone()]));
                }
            }
            // Rules with at least one terminal only read smaller layers.
            for (lhs, tmpl, leaves, weight) in &compiled {
                if *weight == 0 || *weight > s {
                    continue;
                }
                let mut acc: Vec<(Vec<Context>, Vec<Sym>, usize)> =
                    vec![(Vec::new(), Vec::new(), 0)];
                let rest = s - weight;
                for (li, leaf) in leaves.iter().enumerate() {
                    let remaining_leaves = leaves.len() - li - 1;
                    let mut next = Vec::new();
                    for (parts, labels, used) in &acc {
                        let avail = rest - used;
                        // Holes have size 0, so a leaf may take anything up to
                        // `avail`; the last leaf takes exactly the rest.
                        for (sz, layer) in layers[leaf].iter().enumerate().take(avail + 1) {
                            if remaining_leaves == 0 && sz != avail {
                                continue;
                            }
                            for (c, ls) in layer {
                                if labels.len() + ls.len() > max_holes {
                                    continue;
                                }
                                let mut p = parts.clone();
                                p.push(c.clone());
                                let mut l = labels.clone();
                                l.extend(ls.iter().cloned());
                                next.push((p, l, used + sz));
                            }
                        }
                    }
                    acc = next;
                    if acc.len() > budget {
                        return Err(Error::Budget(budget));
                    }
                }
                for (parts, labels, used) in acc {
                    if used != rest {
                        continue;
                    }
                    let c = tmpl.fill(&parts)?;
                    if layers.get_mut(lhs).unwrap()[s].insert((c, labels)) {
                        total += 1;
                    }
                }
            }
            // Unit rules stay within the layer: saturate.
            loop {
                let mut changed = false;
                for (lhs, _, leaves, weight) in &compiled {
                    if *weight != 0 {
                        continue;
                    }
                    let src: Vec<(Context, Vec<Sym>)> =
                        layers[&leaves[0]][s].iter().cloned().collect();
                    let dst = &mut layers.get_mut(lhs).unwrap()[s];
                    for item in src {
                        if dst.insert(item) {
                            total += 1;
                            changed = true;
                        }
                    }
                }
                if !changed {
                    break;
                }
            }
            if total > budget {
                return Err(Error::Budget(budget));
            }
        }
        Ok(Enumerator {
            g,
            max_size,
            layers,
        })
    }

    fn layer(&self, n0: &str, n: usize) -> Result<&BTreeSet<(Context, Vec<Sym>)>> {
        let n0 = self.g.nonterminal(n0)?;
        if n > self.max_size {
            return Err(Error::OutOfRange {
                size: n,
                bound: self.max_size,
            });
        }
        Ok(&self.layers[&n0][n])
    }

    pub fn trees(&self, n0: &str, n: usize) -> Result<BTreeSet<Tree>> {
        Ok(self
            .layer(n0, n)?
            .iter()
            .filter(|(_, l)| l.is_empty())
            .map(|(c, _)| c.clone())
            .collect())
    }

    pub fn contexts(&self, kappa: &ContextType, n: usize) -> Result<BTreeSet<Context>> {
        Ok(self
            .layer(&kappa.result, n)?
            .iter()
            .filter(|(_, l)| *l == kappa.args)
            .map(|(c, _)| c.clone())
            .collect())
    }
}
