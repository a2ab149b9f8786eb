//! Brute-force reference implementations.
//!
//! These enumerate every parse (or every bracketing) explicitly and are used
//! to verify the chart and the dynamic-programming decoders on small
//! instances. They intentionally share no code with the implementations they
//! check.

use std::collections::HashMap;

use crate::grammar::{Grammar, NtId};
use crate::tree::{to_constituents, ConstituentSet, ParseTree};

/// Hard ceiling on enumerated parse trees (and on their total node count).
const MAX_TREES: u128 = 10_000_000;
const MAX_NODES: u128 = 10_000_000;

/// Maximum sentence length for exhaustive bracketing search.
const MAX_BRACKETING_WORDS: usize = 12;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum OracleError {
    #[error("cannot enumerate parses of an empty sentence")]
    EmptySentence,
    #[error("parse forest too large to enumerate ({count} trees)")]
    GuardExceeded { count: u128 },
    #[error("forest has zero total probability")]
    ZeroTotalProbability,
    #[error("sentence too long for exhaustive bracketing search ({n} > {max})", max = MAX_BRACKETING_WORDS)]
    TooLong { n: usize },
}

type Memo = HashMap<(usize, usize, u32), Vec<(ParseTree, f64)>>;

/// Every parse of a sentence, with its probability.
#[derive(Debug, Clone)]
pub struct EnumeratedForest {
    pub trees: Vec<(ParseTree, f64)>,
}

impl EnumeratedForest {
    /// Sum of tree probabilities; equals the inside probability `e(1,n,S)`.
    pub fn total_prob(&self) -> f64 {
        self.trees.iter().map(|(_, p)| p).sum()
    }
}

/// Constituent marginals keyed by `(start, end, label)`.
pub type PosteriorMap = HashMap<(usize, usize, String), f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecallObjective {
    Labelled,
    Bracketed,
}

/// Counts derivations per `(start, length, nt)` cell, saturating; used to
/// refuse enumeration before it exhausts memory.
fn count_parses(grammar: &Grammar, words: &[String]) -> Vec<u128> {
    let n = words.len();
    let k = grammar.nonterminal_count();
    let idx = |s: usize, len: usize, x: u32| ((len - 1) * n + (s - 1)) * k + x as usize;
    let mut counts = vec![0u128; n * n * k];
    for (i, word) in words.iter().enumerate() {
        if let Some(term) = grammar.term_id(word) {
            for rule in grammar.lexical_rules_for_term(term) {
                counts[idx(i + 1, 1, rule.lhs.0)] = 1;
            }
        }
    }
    for len in 2..=n {
        for s in 1..=(n - len + 1) {
            for r in s..(s + len - 1) {
                let l1 = r - s + 1;
                for rule in grammar.binary_rules() {
                    let left = counts[idx(s, l1, rule.left.0)];
                    if left == 0 {
                        continue;
                    }
                    let right = counts[idx(r + 1, len - l1, rule.right.0)];
                    if right == 0 {
                        continue;
                    }
                    let cell = idx(s, len, rule.lhs.0);
                    counts[cell] = counts[cell].saturating_add(left.saturating_mul(right));
                }
            }
        }
    }
    counts
}

/// Enumerates every derivation of the sentence with its exact probability
/// (the product of its rule probabilities).
pub fn enumerate_parses(
    grammar: &Grammar,
    words: &[String],
) -> Result<EnumeratedForest, OracleError> {
    let n = words.len();
    if n == 0 {
        return Err(OracleError::EmptySentence);
    }
    let k = grammar.nonterminal_count();
    let idx = |s: usize, len: usize, x: u32| ((len - 1) * n + (s - 1)) * k + x as usize;
    let counts = count_parses(grammar, words);
    let total = counts[idx(1, n, grammar.start().0)];
    let nodes = total.saturating_mul(2 * n as u128 - 1);
    if total > MAX_TREES || nodes > MAX_NODES {
        return Err(OracleError::GuardExceeded { count: total });
    }

    fn expand(
        grammar: &Grammar,
        words: &[String],
        s: usize,
        t: usize,
        x: NtId,
        memo: &mut Memo,
    ) -> Vec<(ParseTree, f64)> {
        if let Some(cached) = memo.get(&(s, t, x.0)) {
            return cached.clone();
        }
        let mut out = Vec::new();
        if s == t {
            if let Some(term) = grammar.term_id(&words[s - 1]) {
                for rule in grammar.lexical_rules_for_term(term) {
                    if rule.lhs == x {
                        out.push((
                            ParseTree::Node {
                                label: grammar.nt_name(x).to_string(),
                                children: vec![ParseTree::Leaf {
                                    word: words[s - 1].clone(),
                                    position: s,
                                }],
                            },
                            rule.prob,
                        ));
                    }
                }
            }
        } else {
            for rule in grammar.binary_rules_for(x) {
                for r in s..t {
                    let lefts = expand(grammar, words, s, r, rule.left, memo);
                    if lefts.is_empty() {
                        continue;
                    }
                    let rights = expand(grammar, words, r + 1, t, rule.right, memo);
                    for (lt, lp) in &lefts {
                        for (rt, rp) in &rights {
                            out.push((
                                ParseTree::Node {
                                    label: grammar.nt_name(x).to_string(),
                                    children: vec![lt.clone(), rt.clone()],
                                },
                                rule.prob * lp * rp,
                            ));
                        }
                    }
                }
            }
        }
        memo.insert((s, t, x.0), out.clone());
        out
    }

    let mut memo = Memo::new();
    let trees = expand(grammar, words, 1, n, grammar.start(), &mut memo);
    Ok(EnumeratedForest { trees })
}

/// Normalized constituent marginals: for each `(s,t,X)`, the total
/// probability of trees containing that constituent, divided by the forest
/// probability.
pub fn brute_posterior(forest: &EnumeratedForest) -> Result<PosteriorMap, OracleError> {
    let total = forest.total_prob();
    if total <= 0.0 {
        return Err(OracleError::ZeroTotalProbability);
    }
    let mut map = PosteriorMap::new();
    for (tree, prob) in &forest.trees {
        for triple in to_constituents(tree).triples {
            *map.entry(triple).or_insert(0.0) += prob / total;
        }
    }
    Ok(map)
}

/// All binary bracketings of `s..=t` as span lists (including the one-word
/// spans). Catalan(t - s) of them.
fn bracketings(s: usize, t: usize) -> Vec<Vec<(usize, usize)>> {
    if s == t {
        return vec![vec![(s, s)]];
    }
    let mut out = Vec::new();
    for r in s..t {
        for left in bracketings(s, r) {
            for right in bracketings(r + 1, t) {
                let mut spans = left.clone();
                spans.extend_from_slice(&right);
                spans.push((s, t));
                out.push(spans);
            }
        }
    }
    out
}

/// Exhaustively maximizes the expected recall objective over all binary
/// bracketings. For the labelled objective each span takes its argmax
/// label; for the bracketed objective each span scores the label sum.
/// Returns the exact optimum and the winning constituents.
pub fn brute_best_recall_tree(
    posterior: &PosteriorMap,
    n: usize,
    objective: RecallObjective,
) -> Result<(f64, ConstituentSet), OracleError> {
    if n > MAX_BRACKETING_WORDS {
        return Err(OracleError::TooLong { n });
    }
    // deterministic fill-in label for spans carrying no posterior mass
    let default_label = posterior
        .keys()
        .map(|(_, _, label)| label.clone())
        .min()
        .unwrap_or_else(|| "X".to_string());

    // per span: (objective score, argmax-g decoration)
    let mut span_score: HashMap<(usize, usize), (f64, f64, String)> = HashMap::new();
    for (&(s, t, ref label), &g) in posterior {
        let entry =
            span_score
                .entry((s, t))
                .or_insert((0.0, f64::NEG_INFINITY, default_label.clone()));
        if g > entry.1 || (g == entry.1 && *label < entry.2) {
            entry.1 = g;
            entry.2 = label.clone();
        }
        match objective {
            RecallObjective::Labelled => entry.0 = entry.1,
            RecallObjective::Bracketed => entry.0 += g,
        }
    }

    let mut best: Option<(f64, Vec<(usize, usize)>)> = None;
    for spans in bracketings(1, n) {
        let score: f64 = spans
            .iter()
            .map(|span| span_score.get(span).map_or(0.0, |(g, ..)| *g))
            .sum();
        if best.as_ref().is_none_or(|(b, _)| score > *b) {
            best = Some((score, spans));
        }
    }
    let (score, spans) = best.expect("at least one bracketing exists");
    let triples = spans
        .into_iter()
        .map(|span| {
            let label = span_score
                .get(&span)
                .map_or(default_label.clone(), |(.., l)| l.clone());
            (span.0, span.1, label)
        })
        .collect();
    Ok((
        score,
        ConstituentSet {
            sentence_length: n,
            triples,
        },
    ))
}
