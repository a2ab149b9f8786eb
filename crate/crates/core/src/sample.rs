//! Seeded sampling of trees from a grammar, for synthetic corpora in tests
//! and demos.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grammar::{Grammar, NtId};
use crate::tree::ParseTree;

/// Caps on a single sampled tree; expansion past either aborts the attempt.
#[derive(Debug, Clone, Copy)]
pub struct SampleLimits {
    pub max_words: usize,
    pub max_depth: usize,
}

impl Default for SampleLimits {
    fn default() -> Self {
        SampleLimits {
            max_words: 40,
            max_depth: 64,
        }
    }
}

/// Samples one tree top-down from the start symbol, or `None` if a limit was
/// hit or a nonterminal had no rules to expand.
pub fn sample_tree<R: Rng>(
    grammar: &Grammar,
    rng: &mut R,
    limits: SampleLimits,
) -> Option<ParseTree> {
    let mut words = 0usize;
    let tree = expand(grammar, grammar.start(), rng, limits, 0, &mut words)?;
    let mut next = 0;
    fn renumber(t: &mut ParseTree, next: &mut usize) {
        match t {
            ParseTree::Leaf { position, .. } => {
                *next += 1;
                *position = *next;
            }
            ParseTree::Node { children, .. } => children.iter_mut().for_each(|c| renumber(c, next)),
        }
    }
    let mut tree = tree;
    renumber(&mut tree, &mut next);
    Some(tree)
}

fn expand<R: Rng>(
    grammar: &Grammar,
    nt: NtId,
    rng: &mut R,
    limits: SampleLimits,
    depth: usize,
    words: &mut usize,
) -> Option<ParseTree> {
    if depth > limits.max_depth || *words > limits.max_words {
        return None;
    }
    let binary = grammar.binary_rules_for(nt);
    let lexical: Vec<_> = grammar.lexical_rules_for(nt).collect();
    let total: f64 =
        binary.iter().map(|r| r.prob).sum::<f64>() + lexical.iter().map(|r| r.prob).sum::<f64>();
    if total <= 0.0 {
        return None;
    }
    let mut pick = rng.gen_range(0.0..total);
    for rule in binary {
        if pick < rule.prob {
            let left = expand(grammar, rule.left, rng, limits, depth + 1, words)?;
            let right = expand(grammar, rule.right, rng, limits, depth + 1, words)?;
            return Some(ParseTree::Node {
                label: grammar.nt_name(nt).to_string(),
                children: vec![left, right],
            });
        }
        pick -= rule.prob;
    }
    for rule in &lexical {
        if pick < rule.prob {
            *words += 1;
            return Some(ParseTree::Node {
                label: grammar.nt_name(nt).to_string(),
                children: vec![ParseTree::Leaf {
                    word: grammar.term_name(rule.term).to_string(),
                    position: *words,
                }],
            });
        }
        pick -= rule.prob;
    }
    // numerical edge: fall through to the last lexical rule if any
    lexical.last().map(|rule| {
        *words += 1;
        ParseTree::Node {
            label: grammar.nt_name(nt).to_string(),
            children: vec![ParseTree::Leaf {
                word: grammar.term_name(rule.term).to_string(),
                position: *words,
            }],
        }
    })
}

/// Samples `count` trees with yields of at most `max_words` words, rejecting
/// oversize or aborted attempts. Deterministic for a given seed.
pub fn sample_corpus(
    grammar: &Grammar,
    seed: u64,
    count: usize,
    max_words: usize,
) -> Vec<ParseTree> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let limits = SampleLimits {
        max_words,
        ..SampleLimits::default()
    };
    let mut corpus = Vec::with_capacity(count);
    let mut attempts = 0usize;
    while corpus.len() < count {
        attempts += 1;
        assert!(
            attempts < count.saturating_mul(10_000).max(100_000),
            "sampling rejects too often; grammar may not terminate"
        );
        if let Some(tree) = sample_tree(grammar, &mut rng, limits) {
            if tree.word_count() <= max_words {
                corpus.push(tree);
            }
        }
    }
    corpus
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chart::compute_inside;
    use crate::grammar::Grammar;
    use crate::testutil::toy_grammar;

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let g = toy_grammar();
        let a = sample_corpus(&g, 7, 20, 10);
        let b = sample_corpus(&g, 7, 20, 10);
        assert_eq!(a, b);
        let c = sample_corpus(&g, 8, 20, 10);
        assert_ne!(a, c);
    }

    #[test]
    fn sampled_trees_parse_under_the_source_grammar() {
        let g = Grammar::builder("S")
            .binary("S", "S", "S", 0.3)
            .lexical("S", "a", 0.4)
            .lexical("S", "b", 0.3)
            .build()
            .unwrap();
        for tree in sample_corpus(&g, 3, 30, 12) {
            let words: Vec<String> = tree.yield_words().iter().map(|w| w.to_string()).collect();
            let inside = compute_inside(&g, &words).unwrap();
            assert!(inside.is_parsable());
        }
    }

    #[test]
    fn induced_probabilities_approach_source_probabilities() {
        let g = Grammar::builder("S")
            .binary("S", "A", "B", 0.7)
            .binary("S", "B", "A", 0.3)
            .lexical("A", "a", 1.0)
            .lexical("B", "b", 1.0)
            .build()
            .unwrap();
        let corpus = sample_corpus(&g, 11, 2000, 10);
        let induced = Grammar::induce_from_trees(&corpus).unwrap();
        for rule in induced.lookup_binary("S").unwrap() {
            let source = g
                .lookup_binary("S")
                .unwrap()
                .iter()
                .find(|r| {
                    g.nt_name(r.left) == induced.nt_name(rule.left)
                        && g.nt_name(r.right) == induced.nt_name(rule.right)
                })
                .map(|r| r.prob)
                .unwrap();
            assert!(
                (rule.prob - source).abs() < 0.05,
                "induced {} vs source {source}",
                rule.prob
            );
        }
        assert!(induced.validate().is_empty());
    }
}
