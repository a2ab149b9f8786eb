//! `pcfg` — induce a grammar from a treebank, parse sentences under three
//! decoding objectives, and evaluate the output with six bracket metrics.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use pcfg::decode::{decode_or_fallback, Objective};
use pcfg::grammar::Grammar;
use pcfg::metrics::{aggregate, evaluate_pair, CorpusReport, SentenceEval, METRIC_NAMES};
use pcfg::oracle::{brute_best_recall_tree, brute_posterior, enumerate_parses, RecallObjective};
use pcfg::tree::{binarize, load_treebank, read_bracketed, to_constituents, ParseTree};

#[derive(Parser)]
#[command(name = "pcfg", version, about)]
struct Cli {
    /// Seed for randomized processing. All built-in subcommands are
    /// deterministic; the seed is accepted for reproducible scripting.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Decoder {
    LabelledTree,
    LabelledRecall,
    BracketedRecall,
}

impl Decoder {
    fn objective(self) -> Objective {
        match self {
            Decoder::LabelledTree => Objective::LabelledTree,
            Decoder::LabelledRecall => Objective::LabelledRecall,
            Decoder::BracketedRecall => Objective::BracketedRecall,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Averaging {
    Micro,
    Macro,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Table,
    Tsv,
}

#[derive(Subcommand)]
enum Command {
    /// Induce a grammar from a treebank by relative-frequency counting.
    Induce {
        /// Treebank files, or directories of treebank files.
        #[arg(num_args = 1.., required = true)]
        treebank: Vec<PathBuf>,
        /// Output grammar file (stdout if omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Skip trees with more than this many symbols (words plus
        /// nonterminal nodes, counted after binarization).
        #[arg(long, default_value_t = 40, value_parser = clap::value_parser!(u32).range(2..))]
        max_symbols: u32,
    },
    /// Parse sentences (one per line, space-tokenized) into bracketed trees.
    Parse {
        grammar: PathBuf,
        sentences: PathBuf,
        #[arg(long, value_enum, default_value_t = Decoder::LabelledRecall)]
        decoder: Decoder,
        /// Output tree file (stdout if omitted).
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Dump per-sentence charts to stderr as `s t X e f g` lines.
        #[arg(long)]
        dump_charts: bool,
    },
    /// Evaluate guessed trees against a gold treebank.
    Evaluate {
        guessed: PathBuf,
        gold: PathBuf,
        /// Which averaging the tsv output reports (the table shows both).
        #[arg(long, value_enum, default_value_t = Averaging::Micro)]
        averaging: Averaging,
        /// Ignore constituents spanning fewer words than this (2 excludes
        /// the preterminal layer).
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=2))]
        spans_min_length: u32,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
        /// Write a per-sentence breakdown to this file.
        #[arg(long)]
        per_sentence: Option<PathBuf>,
    },
    /// Compare two or more guessed-tree files against one gold treebank,
    /// with paired-difference statistics.
    Compare {
        /// Gold treebank.
        #[arg(long)]
        gold: PathBuf,
        /// Guessed-tree files, aligned with the gold treebank.
        #[arg(num_args = 2.., required = true)]
        guessed: Vec<PathBuf>,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..=2))]
        spans_min_length: u32,
        #[arg(long, value_enum, default_value_t = Format::Table)]
        format: Format,
    },
    /// Enumerate every parse of one sentence, print the posterior
    /// constituents and the optimum of each decoding objective.
    Oracle {
        grammar: PathBuf,
        /// The sentence, one word per argument.
        #[arg(num_args = 1.., required = true)]
        words: Vec<String>,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(err) = run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Induce {
            treebank,
            output,
            max_symbols,
        } => cmd_induce(&treebank, output.as_deref(), max_symbols as usize),
        Command::Parse {
            grammar,
            sentences,
            decoder,
            output,
            dump_charts,
        } => cmd_parse(
            &grammar,
            &sentences,
            decoder.objective(),
            output.as_deref(),
            dump_charts,
        ),
        Command::Evaluate {
            guessed,
            gold,
            averaging,
            spans_min_length,
            format,
            per_sentence,
        } => cmd_evaluate(
            &guessed,
            &gold,
            averaging,
            spans_min_length as usize,
            format,
            per_sentence.as_deref(),
        ),
        Command::Compare {
            gold,
            guessed,
            spans_min_length,
            format,
        } => cmd_compare(&gold, &guessed, spans_min_length as usize, format),
        Command::Oracle { grammar, words } => cmd_oracle(&grammar, &words),
    }
}

/// stdout or a file.
fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn cmd_induce(treebank: &[PathBuf], output: Option<&Path>, max_symbols: usize) -> Result<()> {
    let mut raw = Vec::new();
    for path in treebank {
        raw.extend(
            load_treebank(path).with_context(|| format!("reading treebank {}", path.display()))?,
        );
    }
    if raw.is_empty() {
        bail!("treebank contains no trees");
    }
    let mut kept = Vec::new();
    let mut skipped = 0usize;
    for (i, tree) in raw.iter().enumerate() {
        let binary = binarize(tree).with_context(|| format!("binarizing tree {}", i + 1))?;
        if binary.symbol_count() > max_symbols {
            skipped += 1;
        } else {
            kept.push(binary);
        }
    }
    if kept.is_empty() {
        bail!("all {} trees exceed {max_symbols} symbols", raw.len());
    }
    let grammar = Grammar::induce_from_trees(&kept)?;
    let mut out = open_output(output)?;
    grammar.write_to(&mut out)?;
    out.flush()?;
    eprintln!(
        "induced {} rules over {} nonterminals from {} trees ({} skipped over {max_symbols} symbols)",
        grammar.rule_count(),
        grammar.nonterminal_count(),
        kept.len(),
        skipped,
    );
    Ok(())
}

/// Loads a grammar, reporting any probabilistic invariant violations on
/// stderr (they are warnings, not errors: decoding still works).
fn load_grammar(path: &Path) -> Result<Grammar> {
    let grammar =
        Grammar::from_path(path).with_context(|| format!("reading grammar {}", path.display()))?;
    for violation in grammar.validate() {
        eprintln!("warning: {}: {violation}", path.display());
    }
    Ok(grammar)
}

fn cmd_parse(
    grammar_path: &Path,
    sentences: &Path,
    objective: Objective,
    output: Option<&Path>,
    dump_charts: bool,
) -> Result<()> {
    let grammar = load_grammar(grammar_path)?;
    let text = std::fs::read_to_string(sentences)
        .with_context(|| format!("reading sentences {}", sentences.display()))?;
    let mut corpus: Vec<Vec<String>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let words: Vec<String> = line.split_whitespace().map(str::to_string).collect();
        if words.is_empty() {
            bail!("empty sentence at line {}", lineno + 1);
        }
        corpus.push(words);
    }

    let results: Vec<(ParseTree, bool)> = corpus
        .par_iter()
        .map(|words| {
            let (result, fell_back) = decode_or_fallback(&grammar, words, objective)
                .expect("non-empty sentences cannot raise EmptySentence");
            (result.tree, fell_back)
        })
        .collect();

    let mut out = open_output(output)?;
    let mut failures = 0usize;
    for (tree, fell_back) in &results {
        failures += *fell_back as usize;
        writeln!(out, "{tree}")?;
    }
    out.flush()?;

    if dump_charts {
        for (i, words) in corpus.iter().enumerate() {
            match pcfg::chart::Chart::build(&grammar, words) {
                Ok(chart) => {
                    eprintln!("# chart for sentence {}", i + 1);
                    eprint!("{}", chart.dump(&grammar));
                }
                Err(_) => eprintln!("# sentence {} unparsable, no chart", i + 1),
            }
        }
    }

    eprintln!(
        "parsed {} sentences with {}: {} unparsable ({:.1}%) got the fallback structure",
        corpus.len(),
        objective.name(),
        failures,
        100.0 * failures as f64 / corpus.len() as f64,
    );
    Ok(())
}

/// Reads a tree file and binarizes each tree (an identity for trees that are
/// already in CNF shape, e.g. parser output).
fn load_binarized(path: &Path) -> Result<Vec<ParseTree>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let trees = read_bracketed(&text).with_context(|| format!("parsing {}", path.display()))?;
    trees
        .iter()
        .enumerate()
        .map(|(i, t)| {
            binarize(t).with_context(|| format!("binarizing tree {} of {}", i + 1, path.display()))
        })
        .collect()
}

fn evaluate_file_pair(
    guessed: &[ParseTree],
    gold: &[ParseTree],
    min_span: usize,
) -> Result<Vec<SentenceEval>> {
    if guessed.len() != gold.len() {
        bail!(
            "tree count mismatch: {} guessed vs {} gold",
            guessed.len(),
            gold.len()
        );
    }
    guessed
        .iter()
        .zip(gold)
        .enumerate()
        .map(|(i, (g, c))| {
            evaluate_pair(&to_constituents(g), &to_constituents(c), min_span)
                .with_context(|| format!("evaluating pair {}", i + 1))
        })
        .collect()
}

fn print_report(report: &CorpusReport, averaging: Averaging, format: Format) {
    match format {
        Format::Table => print!("{}", report.to_table()),
        Format::Tsv => print!("{}", report.to_tsv(averaging == Averaging::Micro)),
    }
}

fn cmd_evaluate(
    guessed_path: &Path,
    gold_path: &Path,
    averaging: Averaging,
    min_span: usize,
    format: Format,
    per_sentence: Option<&Path>,
) -> Result<()> {
    let guessed = load_binarized(guessed_path)?;
    let gold = load_binarized(gold_path)?;
    let evals = evaluate_file_pair(&guessed, &gold, min_span)?;
    let report = aggregate(&evals, None)?;

    if let Some(path) = per_sentence {
        let mut out = BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        );
        write!(out, "sentence\tn\tL\tB\tC\tN_G\tN_C")?;
        for name in METRIC_NAMES {
            write!(out, "\t{name}")?;
        }
        writeln!(out)?;
        for (i, (eval, tree)) in evals.iter().zip(&gold).enumerate() {
            let c = eval.counts;
            write!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                i + 1,
                tree.word_count(),
                c.labelled,
                c.bracketed,
                c.consistent,
                c.guessed,
                c.correct
            )?;
            for v in eval.report.values() {
                write!(out, "\t{v:.6}")?;
            }
            writeln!(out)?;
        }
        out.flush()?;
    }

    println!("evaluated {} sentence pairs", evals.len());
    print_report(&report, averaging, format);
    Ok(())
}

fn cmd_compare(
    gold_path: &Path,
    guessed_paths: &[PathBuf],
    min_span: usize,
    format: Format,
) -> Result<()> {
    let gold = load_binarized(gold_path)?;
    let mut all_evals = Vec::new();
    for path in guessed_paths {
        let guessed = load_binarized(path)?;
        all_evals.push(
            evaluate_file_pair(&guessed, &gold, min_span)
                .with_context(|| format!("system {}", path.display()))?,
        );
    }

    for (path, evals) in guessed_paths.iter().zip(&all_evals) {
        let report = aggregate(evals, None)?;
        println!("== system {} ==", path.display());
        print_report(&report, Averaging::Micro, format);
        println!();
    }
    for i in 0..all_evals.len() {
        for j in i + 1..all_evals.len() {
            let report = aggregate(&all_evals[i], Some(&all_evals[j]))?;
            println!(
                "== paired differences: {} minus {} ==",
                guessed_paths[i].display(),
                guessed_paths[j].display()
            );
            print!("{}", report.paired_table().expect("paired stats requested"));
            println!();
        }
    }
    Ok(())
}

fn cmd_oracle(grammar_path: &Path, words: &[String]) -> Result<()> {
    let grammar = load_grammar(grammar_path)?;
    let forest = enumerate_parses(&grammar, words)?;
    println!(
        "{} parses; total probability {}",
        forest.trees.len(),
        forest.total_prob()
    );
    for (tree, prob) in &forest.trees {
        println!("{prob}\t{tree}");
    }
    if forest.trees.is_empty() {
        println!("sentence is unparsable; the parse command would emit the fallback structure");
        return Ok(());
    }

    let posterior = brute_posterior(&forest)?;
    let mut entries: Vec<(&(usize, usize, String), &f64)> = posterior.iter().collect();
    entries.sort_by(|a, b| a.0.cmp(b.0));
    println!("\nposterior constituents (s t label g):");
    for ((s, t, label), g) in entries {
        println!("{s} {t} {label} {g}");
    }

    for (objective, name) in [
        (RecallObjective::Labelled, "labelled-recall"),
        (RecallObjective::Bracketed, "bracketed-recall"),
    ] {
        let (score, set) = brute_best_recall_tree(&posterior, words.len(), objective)?;
        let spans: Vec<String> = set
            .triples
            .iter()
            .map(|(s, t, label)| format!("({s},{t},{label})"))
            .collect();
        println!("\n{name} optimum: expected correct = {score}");
        println!("{}", spans.join(" "));
    }

    println!();
    for decoder in [
        Objective::LabelledTree,
        Objective::LabelledRecall,
        Objective::BracketedRecall,
    ] {
        let result = pcfg::decode::decode(&grammar, words, decoder)?;
        println!(
            "{} decoder: score {} tree {}",
            decoder.name(),
            result.expected_score,
            result.tree
        );
    }
    Ok(())
}
