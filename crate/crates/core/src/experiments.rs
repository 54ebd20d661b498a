//! Monte-Carlo estimates of pattern containment in random words and trees.
//!
//! Samples are split into fixed chunks of [`CHUNK`]; chunk `c` of row `r`
//! draws from stream `(seed, r << 32 | c)`. Counts are summed, so output is
//! identical for any number of worker threads.

use num_bigint::{BigUint, RandBigInt};
use num_traits::Zero;
use rand::Rng;
use serde::Serialize;

use crate::counting::CountTable;
use crate::error::{Error, Result};
use crate::lambda::{build_lambda_grammar, explosive, rename_canonical, restrict_reachable};
use crate::par::{self, Exec};
use crate::rng::{self, Stream};
use crate::rtg::{Enumerator, Grammar, DEFAULT_ENUM_BUDGET};
use crate::trees::{find_subword, Context, Sym, Tree};

pub const CHUNK: usize = 256;
/// Normal quantile for 95% intervals.
pub const Z95: f64 = 1.96;
pub const CSV_HEADER: [&str; 9] = [
    "n",
    "m",
    "pattern_size",
    "samples",
    "contains",
    "frequency",
    "wilson_lo",
    "wilson_hi",
    "seed",
];

/// Wilson score interval for `k` successes out of `n`.
pub fn wilson(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let (k, n) = (k as f64, n as f64);
    let p = k / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// `⌈p · log₂ n⌉`, at least 1.
pub fn pattern_scale(p: f64, n: usize) -> usize {
    ((p * (n as f64).log2()).ceil() as usize).max(1)
}

/// Counts successes of `trial` over `samples` draws.
pub fn count_successes<F>(exec: Exec, samples: usize, seed: u64, row: u64, trial: F) -> usize
where
    F: Fn(&mut Stream) -> bool + Sync + Send,
{
    let chunks = samples.div_ceil(CHUNK);
    par::map_range(exec, chunks, |c| {
        let mut rng = rng::stream(seed, (row << 32) | c as u64);
        let len = CHUNK.min(samples - c * CHUNK);
        (0..len).filter(|_| trial(&mut rng)).count()
    })
    .into_iter()
    .sum()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrendRow {
    pub n: usize,
    pub m: usize,
    pub pattern_size: usize,
    pub samples: usize,
    pub contains: usize,
    pub frequency: f64,
    pub wilson_lo: f64,
    pub wilson_hi: f64,
    pub seed: u64,
}

impl TrendRow {
    fn new(
        n: usize,
        m: usize,
        pattern_size: usize,
        samples: usize,
        contains: usize,
        seed: u64,
    ) -> Self {
        let (wilson_lo, wilson_hi) = wilson(contains, samples, Z95);
        TrendRow {
            n,
            m,
            pattern_size,
            samples,
            contains,
            frequency: contains as f64 / samples as f64,
            wilson_lo,
            wilson_hi,
            seed,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct TrendReport {
    pub rows: Vec<TrendRow>,
    /// Sizes whose slice was empty.
    pub skipped: Vec<usize>,
    pub warnings: Vec<String>,
}

impl TrendReport {
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| Error::Io(e.to_string());
        w.write_record(CSV_HEADER).map_err(io)?;
        for r in &self.rows {
            w.write_record([
                r.n.to_string(),
                r.m.to_string(),
                r.pattern_size.to_string(),
                r.samples.to_string(),
                r.contains.to_string(),
                format!("{:.6}", r.frequency),
                format!("{:.6}", r.wilson_lo),
                format!("{:.6}", r.wilson_hi),
                r.seed.to_string(),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
    }

    /// Each frequency is at least the previous one, or their intervals overlap.
    pub fn is_non_decreasing(&self) -> bool {
        self.rows
            .windows(2)
            .all(|w| w[1].frequency >= w[0].frequency || w[1].wilson_hi >= w[0].wilson_lo)
    }
}

/// Frequency of `pattern(⌈p log n⌉)` as a factor of uniform words in `alphabet^n`.
pub fn monkey_words<T, F>(
    alphabet: &[T],
    pattern: F,
    p: f64,
    sizes: &[usize],
    samples: usize,
    seed: u64,
) -> Result<TrendReport>
where
    T: PartialEq + Clone + Sync,
    F: Fn(usize) -> Vec<T>,
{
    if alphabet.is_empty() || samples == 0 {
        return Err(Error::Domain(
            "need a nonempty alphabet and at least one sample".into(),
        ));
    }
    let mut report = TrendReport::default();
    for (row, &n) in sizes.iter().enumerate() {
        let m = pattern_scale(p, n);
        let pat = pattern(m);
        let contains = count_successes(Exec::default(), samples, seed, row as u64, |rng| {
            let w: Vec<T> = (0..n)
                .map(|_| alphabet[rng.gen_range(0..alphabet.len())].clone())
                .collect();
            find_subword(&w, &pat)
        });
        report
            .rows
            .push(TrendRow::new(n, m, pat.len(), samples, contains, seed));
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Containment {
    pub contains: usize,
    pub total: usize,
    pub frequency: f64,
    /// Whether the whole slice was enumerated.
    pub exact: bool,
}

/// Estimated share of `L_n(G, N)` containing `pattern`. The slice is
/// enumerated instead when its size is at most `exact_limit`.
pub fn containment_probability(
    g: &Grammar,
    nt: &str,
    n: usize,
    pattern: &Context,
    samples: usize,
    seed: u64,
    exact_limit: Option<usize>,
) -> Result<Containment> {
    let table = CountTable::build(g, n)?;
    let count = table.count_trees(nt, n)?;
    if count.is_zero() {
        return Err(Error::EmptySlice {
            nt: nt.to_string(),
            size: n,
        });
    }
    if let Some(limit) = exact_limit {
        if count <= BigUint::from(limit) {
            let trees = Enumerator::new(g, n, 0, DEFAULT_ENUM_BUDGET)?.trees(nt, n)?;
            let contains = trees.iter().filter(|t| pattern.is_subcontext_of(t)).count();
            return Ok(Containment {
                contains,
                total: trees.len(),
                frequency: contains as f64 / trees.len() as f64,
                exact: true,
            });
        }
    }
    if samples == 0 {
        return Err(Error::Domain("samples must be at least 1".into()));
    }
    let contains = count_successes(Exec::default(), samples, seed, 0, |rng| {
        let t = table.sample(nt, n, rng).expect("slice is nonempty");
        pattern.is_subcontext_of(&t)
    });
    Ok(Containment {
        contains,
        total: samples,
        frequency: contains as f64 / samples as f64,
        exact: false,
    })
}

/// Uniform draw from the disjoint union of the slices `L_n(N)` for `N ∈ nts`.
pub fn sample_union<R: Rng + ?Sized>(
    table: &CountTable,
    nts: &[Sym],
    n: usize,
    rng: &mut R,
) -> Result<Tree> {
    let weights = nts
        .iter()
        .map(|nt| table.count_trees(nt, n))
        .collect::<Result<Vec<_>>>()?;
    let total: BigUint = weights.iter().sum();
    if total.is_zero() {
        return Err(Error::EmptySlice {
            nt: nts
                .iter()
                .map(|s| s.to_string())
                .collect::<Vec<_>>()
                .join("+"),
            size: n,
        });
    }
    let mut r = rng.gen_biguint_below(&total);
    for (nt, w) in nts.iter().zip(&weights) {
        if &r < w {
            return table.sample(nt, n, rng);
        }
        r -= w;
    }
    unreachable!("r is below the total weight")
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub samples: usize,
    pub sizes: Vec<usize>,
    pub p: f64,
    pub k: usize,
    pub delta: usize,
    pub iota: usize,
    pub xi: usize,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Domain("samples must be at least 1".into()));
        }
        if self.sizes.is_empty() || self.sizes.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Domain(
                "sizes must be nonempty and strictly ascending".into(),
            ));
        }
        if !(self.p > 0.0 && self.p.is_finite()) {
            return Err(Error::Domain("p must be positive".into()));
        }
        if self.k < 2 {
            return Err(Error::Domain("k must be at least 2".into()));
        }
        Ok(())
    }
}

/// For each size `n`: samples closed terms of `E(δ,ι,ξ)` of size `n`,
/// uniformly over all closed types, and counts those containing the tree
/// of `Expl_m^k` with `m = ⌈p log₂ n⌉`.
pub fn run_main_experiment(cfg: &ExperimentConfig) -> Result<TrendReport> {
    run_main_experiment_with(cfg, Exec::default())
}

pub fn run_main_experiment_with(cfg: &ExperimentConfig, exec: Exec) -> Result<TrendReport> {
    cfg.validate()?;
    let mut report = TrendReport::default();
    if cfg.delta < cfg.k || cfg.iota < cfg.k || cfg.xi < 2 {
        report.warnings.push(format!(
            "pattern not in language: Expl needs delta, iota >= {} and xi >= 2, got ({},{},{})",
            cfg.k, cfg.delta, cfg.iota, cfg.xi
        ));
    }
    let e = restrict_reachable(&build_lambda_grammar(cfg.delta, cfg.iota, cfg.xi)?)?;
    let closed = e.closed_nonterminals();
    let max = *cfg.sizes.last().expect("validated");
    let table = if closed.is_empty() {
        None
    } else {
        Some(CountTable::build_with(&e.grammar, max, false, exec)?)
    };
    for (row, &n) in cfg.sizes.iter().enumerate() {
        let m = pattern_scale(cfg.p, n);
        let pattern = rename_canonical(&explosive(m, cfg.k)?, None)?;
        let nonempty = match &table {
            Some(t) => closed
                .iter()
                .map(|nt| t.count_trees(nt, n))
                .collect::<Result<Vec<_>>>()?
                .iter()
                .any(|c| !c.is_zero()),
            None => false,
        };
        if !nonempty {
            report.skipped.push(n);
            continue;
        }
        let table = table.as_ref().expect("nonempty slice implies a table");
        let contains = count_successes(exec, cfg.samples, cfg.seed, row as u64, |rng| {
            let t = sample_union(table, &closed, n, rng).expect("slice is nonempty");
            pattern.is_subcontext_of(&t)
        });
        report.rows.push(TrendRow::new(
            n,
            m,
            pattern.size(),
            cfg.samples,
            contains,
            cfg.seed,
        ));
    }
    Ok(report)
}
