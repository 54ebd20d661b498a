use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context as _, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigUint;
use serde_json::json;

use treemonkey::counting::{detect_period, CountTable};
use treemonkey::decomposition::{decompose, TypeChecker};
use treemonkey::experiments::{
    containment_probability, monkey_words, run_main_experiment, sample_union, ExperimentConfig,
};
use treemonkey::lambda::{
    beta_max_len, build_lambda_grammar, embed, explosive, parse_term, rename_canonical, BetaLength,
    DEFAULT_BETA_BUDGET,
};
use treemonkey::normalize::full_pipeline;
use treemonkey::rng;
use treemonkey::rtg::{parse_grammar, Grammar};
use treemonkey::trees::{parse_context, Sym};

#[derive(Parser)]
#[command(
    name = "treemonkey",
    version,
    about = "Regular tree grammars, tree decompositions and random λ-terms"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Grammar normalization, counting, sampling and periods.
    #[command(subcommand)]
    Rtg(RtgCmd),
    /// Splits a tree into a second-order frame and good parts.
    Decompose(DecomposeArgs),
    /// λ-term utilities and the grammar of bounded terms.
    #[command(subcommand)]
    Lambda(LambdaCmd),
    /// Monte-Carlo containment experiments.
    #[command(subcommand)]
    Experiment(ExperimentCmd),
}

#[derive(Subcommand)]
enum RtgCmd {
    Canonicalize {
        input: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    Count {
        grammar: PathBuf,
        #[arg(short = 'N')]
        nt: String,
        #[arg(short)]
        n: usize,
    },
    Sample {
        grammar: PathBuf,
        #[arg(short = 'N')]
        nt: String,
        #[arg(short)]
        n: usize,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    Period {
        grammar: PathBuf,
        #[arg(long)]
        max_size: usize,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Args)]
struct DecomposeArgs {
    #[arg(long)]
    tree: String,
    #[arg(short)]
    m: usize,
    #[arg(long, requires = "nt")]
    grammar: Option<PathBuf>,
    #[arg(short = 'N')]
    nt: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Emit {
    Term,
    Tree,
}

#[derive(Subcommand)]
enum LambdaCmd {
    Grammar {
        #[arg(short)]
        d: usize,
        #[arg(short)]
        i: usize,
        #[arg(short)]
        x: usize,
        /// Output file; stdout when omitted.
        #[arg(short)]
        o: Option<PathBuf>,
        #[arg(long)]
        map: Option<PathBuf>,
    },
    Beta {
        #[arg(long)]
        term: String,
        #[arg(long, default_value_t = DEFAULT_BETA_BUDGET)]
        budget: usize,
    },
    Explosive {
        #[arg(short)]
        m: usize,
        #[arg(short)]
        k: usize,
        #[arg(long, value_enum, default_value = "term")]
        emit: Emit,
    },
    Sample {
        #[arg(short)]
        d: usize,
        #[arg(short)]
        i: usize,
        #[arg(short)]
        x: usize,
        #[arg(short)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
}

#[derive(Subcommand)]
enum ExperimentCmd {
    /// Uniform words over `--alphabet` searched for `--unit` repeated ⌈m/len⌉ times.
    Words {
        #[arg(long, default_value = "ab")]
        alphabet: String,
        #[arg(long, default_value = "ab")]
        unit: String,
        #[arg(short, default_value_t = 1.0)]
        p: f64,
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    Containment {
        #[arg(long)]
        grammar: PathBuf,
        #[arg(short = 'N')]
        nt: String,
        #[arg(short)]
        n: usize,
        #[arg(long)]
        pattern: String,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        exact: bool,
    },
    Main {
        #[arg(short)]
        d: usize,
        #[arg(short)]
        i: usize,
        #[arg(short)]
        x: usize,
        #[arg(short)]
        k: usize,
        #[arg(short)]
        p: f64,
        #[arg(long, value_delimiter = ',')]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 2000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

fn load(path: &PathBuf) -> Result<Grammar> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_grammar(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Canonical grammar plus the canonical nonterminals standing for `nt`.
fn canonical_for(g: &Grammar, nt: &str) -> Result<(Grammar, Vec<Sym>)> {
    g.nonterminal(nt)?;
    let c = full_pipeline(g)?;
    let q = c
        .name_map
        .get(nt)
        .map(|s| s.iter().cloned().collect())
        .unwrap_or_default();
    Ok((c.grammar, q))
}

fn write_or_print(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn rtg(cmd: RtgCmd) -> Result<()> {
    match cmd {
        RtgCmd::Canonicalize {
            input,
            output,
            report,
        } => {
            let c = full_pipeline(&load(&input)?)?;
            fs::write(&output, c.grammar.to_text())?;
            if let Some(r) = report {
                let map: serde_json::Map<String, serde_json::Value> = c
                    .name_map
                    .iter()
                    .map(|(k, v)| {
                        (
                            k.to_string(),
                            json!(v.iter().map(|s| s.to_string()).collect::<Vec<_>>()),
                        )
                    })
                    .collect();
                fs::write(r, serde_json::to_string_pretty(&map)?)?;
            }
        }
        RtgCmd::Count { grammar, nt, n } => {
            let (g, q) = canonical_for(&load(&grammar)?, &nt)?;
            let table = CountTable::build(&g, n)?;
            let counts = q
                .iter()
                .map(|x| table.count_trees(x, n))
                .collect::<Result<Vec<_>, _>>()?;
            println!("{}", counts.iter().sum::<BigUint>());
        }
        RtgCmd::Sample {
            grammar,
            nt,
            n,
            count,
            seed,
        } => {
            let (g, q) = canonical_for(&load(&grammar)?, &nt)?;
            let table = CountTable::build(&g, n)?;
            for i in 0..count {
                let mut r = rng::stream(seed, i as u64);
                println!("{}", sample_union(&table, &q, n, &mut r)?);
            }
        }
        RtgCmd::Period {
            grammar,
            max_size,
            json,
        } => {
            let g = full_pipeline(&load(&grammar)?)?.grammar;
            let r = detect_period(&g, None, max_size)?;
            if json {
                let residues: Vec<_> = r
                    .residues
                    .iter()
                    .map(|((a, b), d)| json!({"from": a, "to": b, "residue": d}))
                    .collect();
                let v = json!({
                    "period": r.period,
                    "residues": residues,
                    "n0_estimate": r.n0_estimate,
                    "max_size": r.max_size,
                    "scope": r.scope,
                });
                println!("{}", serde_json::to_string_pretty(&v)?);
            } else {
                println!("period {}", r.period);
                for ((a, b), d) in &r.residues {
                    println!("d({a},{b}) = {d}");
                }
                println!(
                    "n0 estimate {} (observed up to {})",
                    r.n0_estimate, r.max_size
                );
            }
        }
    }
    Ok(())
}

fn decompose_cmd(a: DecomposeArgs) -> Result<()> {
    let t = parse_context(&a.tree)?;
    if !t.is_tree() {
        bail!("--tree must not contain holes");
    }
    if a.m == 0 {
        bail!("-m must be at least 1");
    }
    let d = match (&a.grammar, &a.nt) {
        (Some(path), Some(nt)) => {
            let (g, q) = canonical_for(&load(path)?, nt)?;
            let checker = TypeChecker::new(&g)?;
            let found = q.iter().find_map(|x| checker.refine(x, &t, a.m).ok());
            match found {
                Some(d) => d,
                None => bail!("tree is not generated by {nt}"),
            }
        }
        _ => decompose(&t, a.m),
    };
    println!("frame {}", d.frame);
    for (i, p) in d.parts.iter().enumerate() {
        println!("part {} {p}", i + 1);
    }
    Ok(())
}

fn lambda(cmd: LambdaCmd) -> Result<()> {
    match cmd {
        LambdaCmd::Grammar { d, i, x, o, map } => {
            let lg = build_lambda_grammar(d, i, x)?;
            if lg.is_empty() {
                eprintln!("warning: G({d},{i},{x}) has no nonterminals");
            }
            match o {
                Some(o) => fs::write(o, lg.grammar.to_text())?,
                None => print!("{}", lg.grammar.to_text()),
            }
            if let Some(m) = map {
                fs::write(m, serde_json::to_string_pretty(&lg.name_map())?)?;
            }
        }
        LambdaCmd::Beta { term, budget } => {
            let t = parse_term(&term)?;
            match beta_max_len(&t, budget)? {
                BetaLength::Exact(n) => println!("{n}"),
                BetaLength::LowerBound(n) => println!(">= {n} (state budget {budget} exceeded)"),
            }
        }
        LambdaCmd::Explosive { m, k, emit } => {
            let t = explosive(m, k)?;
            match emit {
                Emit::Term => println!("{t}"),
                Emit::Tree => println!("{}", rename_canonical(&t, None)?),
            }
        }
        LambdaCmd::Sample {
            d,
            i,
            x,
            n,
            seed,
            count,
        } => {
            let lg = build_lambda_grammar(d, i, x)?;
            let closed = lg.closed_nonterminals();
            if closed.is_empty() {
                bail!("no closed terms within ({d},{i},{x})");
            }
            let table = CountTable::build(&lg.grammar, n)?;
            for c in 0..count {
                let mut r = rng::stream(seed, c as u64);
                let tree = sample_union(&table, &closed, n, &mut r)?;
                println!("{tree}\t{}", embed(&tree)?);
            }
        }
    }
    Ok(())
}

fn experiment(cmd: ExperimentCmd) -> Result<()> {
    match cmd {
        ExperimentCmd::Words {
            alphabet,
            unit,
            p,
            sizes,
            samples,
            seed,
            csv,
        } => {
            let letters: Vec<char> = alphabet.chars().collect();
            let unit: Vec<char> = unit.chars().collect();
            if unit.iter().any(|c| !letters.contains(c)) {
                bail!("--unit uses letters outside --alphabet");
            }
            let r = monkey_words(
                &letters,
                |m| {
                    unit.iter()
                        .cycle()
                        .take(m.div_ceil(unit.len().max(1)) * unit.len())
                        .copied()
                        .collect()
                },
                p,
                &sizes,
                samples,
                seed,
            )?;
            write_or_print(csv.as_ref(), &r.to_csv()?)?;
        }
        ExperimentCmd::Containment {
            grammar,
            nt,
            n,
            pattern,
            samples,
            seed,
            exact,
        } => {
            let (g, q) = canonical_for(&load(&grammar)?, &nt)?;
            if q.len() != 1 {
                bail!(
                    "{nt} splits into {} canonical nonterminals; pass a canonical grammar",
                    q.len()
                );
            }
            let pat = parse_context(&pattern)?;
            let limit = if exact { Some(usize::MAX) } else { None };
            let r = containment_probability(&g, &q[0], n, &pat, samples, seed, limit)?;
            println!("{}", serde_json::to_string(&r)?);
        }
        ExperimentCmd::Main {
            d,
            i,
            x,
            k,
            p,
            sizes,
            samples,
            seed,
            csv,
        } => {
            let cfg = ExperimentConfig {
                seed,
                samples,
                sizes,
                p,
                k,
                delta: d,
                iota: i,
                xi: x,
            };
            let r = run_main_experiment(&cfg)?;
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            for n in &r.skipped {
                eprintln!("skipped n={n}: no closed terms of that size");
            }
            write_or_print(csv.as_ref(), &r.to_csv()?)?;
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Rtg(c) => rtg(c),
        Cmd::Decompose(a) => decompose_cmd(a),
        Cmd::Lambda(c) => lambda(c),
        Cmd::Experiment(c) => experiment(c),
    }
}
