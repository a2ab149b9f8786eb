//! The three parsing algorithms plus the right-branching fallback.
//!
//! * Labelled Tree (Viterbi): the single most probable tree, by max-product
//!   CKY in log space.
//! * Labelled Recall: the tree maximizing the expected number of correct
//!   labelled constituents, `sum of g(s,t,X)` over the tree.
//! * Bracketed Recall: the same dynamic program with the per-span score
//!   summed over labels instead of maximized.
//!
//! All three are deterministic: score ties break toward the smallest split
//! point, then the smallest label id.

use crate::chart::{Chart, ChartError, PosteriorTable};
use crate::grammar::{Grammar, NtId};
use crate::tree::{ParseTree, FALLBACK_LABEL};

/// Tie window for Viterbi log-probability comparisons.
const LOG_TIE_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    LabelledTree,
    LabelledRecall,
    BracketedRecall,
    Fallback,
}

impl Objective {
    pub fn name(&self) -> &'static str {
        match self {
            Objective::LabelledTree => "labelled-tree",
            Objective::LabelledRecall => "labelled-recall",
            Objective::BracketedRecall => "bracketed-recall",
            Objective::Fallback => "fallback",
        }
    }
}

#[derive(Debug, Clone)]
pub struct DecodeResult {
    pub tree: ParseTree,
    /// For the recall objectives, `maxc[1,n]`: the expected number of correct
    /// constituents of the returned tree under the model. For Viterbi, the
    /// tree's probability. Zero for fallback trees.
    pub expected_score: f64,
    pub objective: Objective,
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("cannot decode an empty sentence")]
    EmptySentence,
    #[error("sentence has zero probability under the grammar")]
    Unparsable,
}

impl From<ChartError> for DecodeError {
    fn from(e: ChartError) -> Self {
        match e {
            ChartError::EmptySentence => DecodeError::EmptySentence,
            ChartError::Unparsable => DecodeError::Unparsable,
        }
    }
}

/// Per-span dynamic-programming table for the recall objectives: the best
/// achievable expected-correct mass, the chosen label, and the chosen split.
#[derive(Debug)]
pub struct MaxcTable {
    n: usize,
    score: Vec<f64>,
    label: Vec<u32>,
    split: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SpanScore {
    /// max over labels of g(s,t,X): labelled recall
    Max,
    /// sum over labels of g(s,t,X): bracketed recall
    Sum,
}

impl MaxcTable {
    #[inline]
    fn idx(&self, s: usize, t: usize) -> usize {
        (t - s) * self.n + (s - 1)
    }

    pub fn score(&self, s: usize, t: usize) -> f64 {
        self.score[self.idx(s, t)]
    }

    pub fn best_label(&self, s: usize, t: usize) -> NtId {
        NtId(self.label[self.idx(s, t)])
    }

    pub fn best_split(&self, s: usize, t: usize) -> usize {
        self.split[self.idx(s, t)]
    }

    fn build(posterior: &PosteriorTable, mode: SpanScore) -> MaxcTable {
        let n = posterior.n();
        let mut table = MaxcTable {
            n,
            score: vec![0.0; n * n],
            label: vec![0; n * n],
            split: vec![0; n * n],
        };
        for s in 1..=n {
            let (g, x) = span_value(posterior, s, s, mode);
            let idx = table.idx(s, s);
            table.score[idx] = g;
            table.label[idx] = x.0;
        }
        for len in 2..=n {
            for s in 1..=(n - len + 1) {
                let t = s + len - 1;
                let (max_g, x) = span_value(posterior, s, t, mode);
                let mut best_split = s;
                let mut best = f64::NEG_INFINITY;
                for r in s..t {
                    let candidate = table.score(s, r) + table.score(r + 1, t);
                    if candidate > best {
                        best = candidate;
                        best_split = r;
                    }
                }
                let idx = table.idx(s, t);
                table.score[idx] = max_g + best;
                table.label[idx] = x.0;
                table.split[idx] = best_split;
            }
        }
        table
    }

    fn extract_tree(&self, words: &[String], grammar: &Grammar, s: usize, t: usize) -> ParseTree {
        let label = grammar.nt_name(self.best_label(s, t)).to_string();
        if s == t {
            return ParseTree::Node {
                label,
                children: vec![ParseTree::Leaf {
                    word: words[s - 1].clone(),
                    position: s,
                }],
            };
        }
        let r = self.best_split(s, t);
        ParseTree::Node {
            label,
            children: vec![
                self.extract_tree(words, grammar, s, r),
                self.extract_tree(words, grammar, r + 1, t),
            ],
        }
    }
}

/// Score and decorating label for one span. The label is the argmax of `g`
/// in both modes; only the score differs. Ties take the smallest label id.
fn span_value(posterior: &PosteriorTable, s: usize, t: usize, mode: SpanScore) -> (f64, NtId) {
    let row = posterior.span_row(s, t);
    let mut best_x = 0u32;
    let mut best_g = f64::NEG_INFINITY;
    let mut sum = 0.0;
    for (x, &g) in row.iter().enumerate() {
        sum += g;
        if g > best_g {
            best_g = g;
            best_x = x as u32;
        }
    }
    match mode {
        SpanScore::Max => (best_g, NtId(best_x)),
        SpanScore::Sum => (sum, NtId(best_x)),
    }
}

/// Decodes with an existing posterior table; used when the chart is also
/// wanted (e.g. for dumping).
pub fn labelled_recall_from_posterior(
    grammar: &Grammar,
    posterior: &PosteriorTable,
    words: &[String],
) -> DecodeResult {
    let table = MaxcTable::build(posterior, SpanScore::Max);
    DecodeResult {
        tree: table.extract_tree(words, grammar, 1, posterior.n()),
        expected_score: table.score(1, posterior.n()),
        objective: Objective::LabelledRecall,
    }
}

pub fn bracketed_recall_from_posterior(
    grammar: &Grammar,
    posterior: &PosteriorTable,
    words: &[String],
) -> DecodeResult {
    let table = MaxcTable::build(posterior, SpanScore::Sum);
    DecodeResult {
        tree: table.extract_tree(words, grammar, 1, posterior.n()),
        expected_score: table.score(1, posterior.n()),
        objective: Objective::BracketedRecall,
    }
}

/// Maximizes the expected number of correct labelled constituents.
pub fn labelled_recall_parse(
    grammar: &Grammar,
    words: &[String],
) -> Result<DecodeResult, DecodeError> {
    let chart = Chart::build(grammar, words)?;
    Ok(labelled_recall_from_posterior(
        grammar,
        &chart.posterior,
        words,
    ))
}

/// Maximizes the expected number of correct brackets, ignoring labels.
pub fn bracketed_recall_parse(
    grammar: &Grammar,
    words: &[String],
) -> Result<DecodeResult, DecodeError> {
    let chart = Chart::build(grammar, words)?;
    Ok(bracketed_recall_from_posterior(
        grammar,
        &chart.posterior,
        words,
    ))
}

/// Returns the most probable tree under the grammar (max-product CKY in log
/// space). `expected_score` carries the tree's probability.
pub fn viterbi_parse(grammar: &Grammar, words: &[String]) -> Result<DecodeResult, DecodeError> {
    let n = words.len();
    if n == 0 {
        return Err(DecodeError::EmptySentence);
    }
    let k = grammar.nonterminal_count();
    let idx = |s: usize, t: usize, x: u32| ((t - s) * n + (s - 1)) * k + x as usize;

    let mut best = vec![f64::NEG_INFINITY; n * n * k];
    // (split, rule index into grammar.binary_rules())
    let mut back: Vec<(usize, u32)> = vec![(0, 0); n * n * k];

    for (i, word) in words.iter().enumerate() {
        let s = i + 1;
        if let Some(term) = grammar.term_id(word) {
            for rule in grammar.lexical_rules_for_term(term) {
                let cell = &mut best[idx(s, s, rule.lhs.0)];
                let cand = rule.prob.ln();
                if cand > *cell + LOG_TIE_EPS {
                    *cell = cand;
                }
            }
        }
    }

    let rules = grammar.binary_rules();
    for len in 2..=n {
        for s in 1..=(n - len + 1) {
            let t = s + len - 1;
            for r in s..t {
                for (ri, rule) in rules.iter().enumerate() {
                    let left = best[idx(s, r, rule.left.0)];
                    if left == f64::NEG_INFINITY {
                        continue;
                    }
                    let right = best[idx(r + 1, t, rule.right.0)];
                    if right == f64::NEG_INFINITY {
                        continue;
                    }
                    let cand = rule.prob.ln() + left + right;
                    let cell = idx(s, t, rule.lhs.0);
                    if cand > best[cell] + LOG_TIE_EPS {
                        best[cell] = cand;
                        back[cell] = (r, ri as u32);
                    }
                }
            }
        }
    }

    let top = best[idx(1, n, grammar.start().0)];
    if top == f64::NEG_INFINITY {
        return Err(DecodeError::Unparsable);
    }

    fn extract(
        grammar: &Grammar,
        words: &[String],
        back: &[(usize, u32)],
        idx: &dyn Fn(usize, usize, u32) -> usize,
        s: usize,
        t: usize,
        x: NtId,
    ) -> ParseTree {
        let label = grammar.nt_name(x).to_string();
        if s == t {
            return ParseTree::Node {
                label,
                children: vec![ParseTree::Leaf {
                    word: words[s - 1].clone(),
                    position: s,
                }],
            };
        }
        let (r, ri) = back[idx(s, t, x.0)];
        let rule = &grammar.binary_rules()[ri as usize];
        ParseTree::Node {
            label,
            children: vec![
                extract(grammar, words, back, idx, s, r, rule.left),
                extract(grammar, words, back, idx, r + 1, t, rule.right),
            ],
        }
    }

    let tree = extract(grammar, words, &back, &idx, 1, n, grammar.start());
    Ok(DecodeResult {
        tree,
        expected_score: top.exp(),
        objective: Objective::LabelledTree,
    })
}

/// Deterministic right-branching tree for sentences the grammar cannot
/// parse: span `(i, n)` splits as `(i, i)` plus `(i+1, n)`, with the last
/// two words grouped. Every node is labelled [`FALLBACK_LABEL`].
pub fn fallback_parse(words: &[String]) -> DecodeResult {
    assert!(!words.is_empty(), "fallback_parse needs at least one word");
    fn preterminal(words: &[String], s: usize) -> ParseTree {
        ParseTree::Node {
            label: FALLBACK_LABEL.to_string(),
            children: vec![ParseTree::Leaf {
                word: words[s - 1].clone(),
                position: s,
            }],
        }
    }
    fn spine(words: &[String], s: usize, n: usize) -> ParseTree {
        if s == n {
            return preterminal(words, s);
        }
        let right = if s + 1 == n {
            preterminal(words, n)
        } else {
            spine(words, s + 1, n)
        };
        ParseTree::Node {
            label: FALLBACK_LABEL.to_string(),
            children: vec![preterminal(words, s), right],
        }
    }
    DecodeResult {
        tree: spine(words, 1, words.len()),
        expected_score: 0.0,
        objective: Objective::Fallback,
    }
}

/// Dispatches on the objective. `Objective::Fallback` ignores the grammar.
pub fn decode(
    grammar: &Grammar,
    words: &[String],
    objective: Objective,
) -> Result<DecodeResult, DecodeError> {
    match objective {
        Objective::LabelledTree => viterbi_parse(grammar, words),
        Objective::LabelledRecall => labelled_recall_parse(grammar, words),
        Objective::BracketedRecall => bracketed_recall_parse(grammar, words),
        Objective::Fallback => {
            if words.is_empty() {
                Err(DecodeError::EmptySentence)
            } else {
                Ok(fallback_parse(words))
            }
        }
    }
}

/// Decodes, routing unparsable sentences to the fallback. The flag reports
/// whether the fallback was used.
pub fn decode_or_fallback(
    grammar: &Grammar,
    words: &[String],
    objective: Objective,
) -> Result<(DecodeResult, bool), DecodeError> {
    match decode(grammar, words, objective) {
        Ok(r) => Ok((r, false)),
        Err(DecodeError::Unparsable) => Ok((fallback_parse(words), true)),
        Err(e) => Err(e),
    }
}

/// Expected number of correct labelled constituents of `tree` under the
/// posterior: the sum of `g(s,t,X)` over constituents with span length at
/// least `min_span_len`. Labels unknown to the grammar contribute zero.
pub fn expected_labelled_constituents(
    grammar: &Grammar,
    posterior: &PosteriorTable,
    tree: &ParseTree,
    min_span_len: usize,
) -> f64 {
    crate::tree::to_constituents(tree)
        .triples
        .iter()
        .filter(|&&(s, t, _)| t - s + 1 >= min_span_len)
        .map(|(s, t, label)| match grammar.nt_id(label) {
            Some(x) => posterior.value(*s, *t, x),
            None => 0.0,
        })
        .sum()
}

/// Expected number of correct brackets of `tree` under the posterior: the
/// sum over its spans of `sum over X of g(s,t,X)`.
pub fn expected_correct_brackets(
    posterior: &PosteriorTable,
    tree: &ParseTree,
    min_span_len: usize,
) -> f64 {
    crate::tree::to_constituents(tree)
        .spans()
        .iter()
        .filter(|&&(s, t)| t - s + 1 >= min_span_len)
        .map(|&(s, t)| posterior.span_row(s, t).iter().sum::<f64>())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{toy_grammar, words};

    #[test]
    fn toy_viterbi_returns_a_grammar_tree_with_prob_quarter() {
        let g = toy_grammar();
        let sentence = words("x x x x");
        let result = viterbi_parse(&g, &sentence).unwrap();
        assert_eq!(result.objective, Objective::LabelledTree);
        assert!((result.expected_score - 0.25).abs() < 1e-12);
        // ties break toward the smallest label ids: rule S -> A C
        assert_eq!(
            result.tree.to_string(),
            "(S (A (X_x x) (X_x x)) (C (X_x x) (X_x x)))"
        );
        let chart = Chart::build(&g, &sentence).unwrap();
        let e = expected_labelled_constituents(&g, &chart.posterior, &result.tree, 2);
        assert!((e - 1.75).abs() < 1e-12, "expected 1.75, got {e}");
    }

    #[test]
    fn toy_labelled_recall_finds_the_zero_probability_tree() {
        let g = toy_grammar();
        let sentence = words("x x x x");
        let result = labelled_recall_parse(&g, &sentence).unwrap();
        assert_eq!(
            result.tree.to_string(),
            "(S (A (X_x x) (X_x x)) (B (X_x x) (X_x x)))"
        );
        // maxc[1,n] counts the four preterminals too: 2.0 + 4.0
        assert!((result.expected_score - 6.0).abs() < 1e-12);
        let chart = Chart::build(&g, &sentence).unwrap();
        let e = expected_labelled_constituents(&g, &chart.posterior, &result.tree, 2);
        assert!((e - 2.0).abs() < 1e-12);
        // ... and that tree has zero probability under the grammar
        let viterbi = viterbi_parse(&g, &sentence).unwrap();
        assert_ne!(viterbi.tree, result.tree);
    }

    #[test]
    fn toy_bracketed_recall_scores_brackets() {
        let g = toy_grammar();
        let sentence = words("x x x x");
        let result = bracketed_recall_parse(&g, &sentence).unwrap();
        assert!((result.expected_score - 7.0).abs() < 1e-12);
        let chart = Chart::build(&g, &sentence).unwrap();
        let b = expected_correct_brackets(&chart.posterior, &result.tree, 2);
        assert!((b - 3.0).abs() < 1e-12, "expected 3.0, got {b}");
        // spans (1,2) and (3,4) occur in all four trees
        let spans = crate::tree::to_constituents(&result.tree).spans();
        assert!(spans.contains(&(1, 2)));
        assert!(spans.contains(&(3, 4)));
    }

    #[test]
    fn unambiguous_grammar_all_decoders_agree() {
        let g = Grammar::builder("S")
            .binary("S", "A", "B", 1.0)
            .binary("B", "C", "D", 1.0)
            .lexical("A", "a", 1.0)
            .lexical("C", "c", 1.0)
            .lexical("D", "d", 1.0)
            .build()
            .unwrap();
        let sentence = words("a c d");
        let v = viterbi_parse(&g, &sentence).unwrap();
        let lr = labelled_recall_parse(&g, &sentence).unwrap();
        let br = bracketed_recall_parse(&g, &sentence).unwrap();
        assert_eq!(v.tree, lr.tree);
        assert_eq!(v.tree, br.tree);
        assert!((v.expected_score - 1.0).abs() < 1e-12);
        let n = sentence.len() as f64;
        assert!((lr.expected_score - (2.0 * n - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn all_decoders_fail_on_the_same_sentences() {
        let g = toy_grammar();
        for bad in ["x y x x", "x x x", "z"] {
            let sentence = words(bad);
            assert_eq!(
                viterbi_parse(&g, &sentence).unwrap_err(),
                DecodeError::Unparsable
            );
            assert_eq!(
                labelled_recall_parse(&g, &sentence).unwrap_err(),
                DecodeError::Unparsable
            );
            assert_eq!(
                bracketed_recall_parse(&g, &sentence).unwrap_err(),
                DecodeError::Unparsable
            );
        }
    }

    #[test]
    fn empty_sentence_is_an_error() {
        let g = toy_grammar();
        assert_eq!(
            viterbi_parse(&g, &[]).unwrap_err(),
            DecodeError::EmptySentence
        );
        assert_eq!(
            labelled_recall_parse(&g, &[]).unwrap_err(),
            DecodeError::EmptySentence
        );
    }

    #[test]
    fn fallback_shapes() {
        let one = fallback_parse(&words("w1"));
        assert_eq!(one.tree.to_string(), "(X_FALLBACK w1)");
        assert_eq!(one.objective, Objective::Fallback);

        let two = fallback_parse(&words("w1 w2"));
        assert_eq!(
            two.tree.to_string(),
            "(X_FALLBACK (X_FALLBACK w1) (X_FALLBACK w2))"
        );

        let four = fallback_parse(&words("w1 w2 w3 w4"));
        let spans: Vec<(usize, usize)> = crate::tree::to_constituents(&four.tree)
            .spans()
            .into_iter()
            .filter(|&(s, t)| s != t)
            .collect();
        assert_eq!(spans, vec![(1, 4), (2, 4), (3, 4)]);
    }

    #[test]
    fn decode_or_fallback_routes_unparsable() {
        let g = toy_grammar();
        let (result, fell_back) =
            decode_or_fallback(&g, &words("x y"), Objective::LabelledRecall).unwrap();
        assert!(fell_back);
        assert_eq!(result.objective, Objective::Fallback);
        let (result, fell_back) =
            decode_or_fallback(&g, &words("x x x x"), Objective::LabelledRecall).unwrap();
        assert!(!fell_back);
        assert_eq!(result.objective, Objective::LabelledRecall);
    }

    #[test]
    fn decoders_are_deterministic() {
        let g = toy_grammar();
        let sentence = words("x x x x");
        for _ in 0..3 {
            assert_eq!(
                viterbi_parse(&g, &sentence).unwrap().tree,
                viterbi_parse(&g, &sentence).unwrap().tree
            );
            assert_eq!(
                labelled_recall_parse(&g, &sentence).unwrap().tree,
                labelled_recall_parse(&g, &sentence).unwrap().tree
            );
            assert_eq!(
                bracketed_recall_parse(&g, &sentence).unwrap().tree,
                bracketed_recall_parse(&g, &sentence).unwrap().tree
            );
        }
    }
}
