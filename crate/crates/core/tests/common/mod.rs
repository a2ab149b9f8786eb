#![allow(dead_code)] // each test binary uses a different subset

//! Shared helpers for integration tests: the worked-example grammar and a
//! seeded generator of small random grammars and sentences.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pcfg::grammar::Grammar;
use pcfg::sample::{sample_tree, SampleLimits};

pub fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}

/// The running example: four trees with equal probability over "x x x x".
pub fn toy_grammar() -> Grammar {
    Grammar::builder("S")
        .binary("S", "A", "C", 0.25)
        .binary("S", "A", "D", 0.25)
        .binary("S", "E", "B", 0.25)
        .binary("S", "F", "B", 0.25)
        .binary("A", "X_x", "X_x", 1.0)
        .binary("B", "X_x", "X_x", 1.0)
        .binary("C", "X_x", "X_x", 1.0)
        .binary("D", "X_x", "X_x", 1.0)
        .binary("E", "X_x", "X_x", 1.0)
        .binary("F", "X_x", "X_x", 1.0)
        .lexical("X_x", "x", 1.0)
        .build()
        .unwrap()
}

/// Random proper CNF grammar with at most 5 nonterminals and 25 rules.
/// Every nonterminal has lexical mass, so sampling terminates; the start
/// symbol always has at least one binary rule so sentences longer than one
/// word exist.
pub fn random_grammar(seed: u64) -> Grammar {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.gen_range(2..=5usize);
    let terms = ["a", "b", "c"];
    let t = rng.gen_range(2..=terms.len());
    let nt_name = |i: usize| format!("N{i}");

    // raw weights per lhs
    let mut lexical: Vec<Vec<(usize, f64)>> = vec![Vec::new(); k];
    let mut binary: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); k];
    for lex in lexical.iter_mut() {
        let count = rng.gen_range(1..=2usize);
        let mut picked: Vec<usize> = (0..t).collect();
        for _ in 0..(t - count.min(t)) {
            picked.remove(rng.gen_range(0..picked.len()));
        }
        for term in picked {
            lex.push((term, rng.gen_range(0.2..1.0)));
        }
    }
    binary[0].push((
        rng.gen_range(0..k),
        rng.gen_range(0..k),
        rng.gen_range(0.2..1.0),
    ));
    let extra = rng.gen_range(0..=14usize);
    for _ in 0..extra {
        let lhs = rng.gen_range(0..k);
        binary[lhs].push((
            rng.gen_range(0..k),
            rng.gen_range(0..k),
            rng.gen_range(0.2..1.0),
        ));
    }

    // normalize: binary rules get at most 0.45 of each lhs's mass so that
    // sampled trees stay finite
    let mut builder = Grammar::builder(&nt_name(0));
    for nt in 0..k {
        let lex_total: f64 = lexical[nt].iter().map(|(_, w)| w).sum();
        let bin_total: f64 = binary[nt].iter().map(|(_, _, w)| w).sum();
        let bin_share = if binary[nt].is_empty() { 0.0 } else { 0.45 };
        for &(term, w) in &lexical[nt] {
            builder
                .try_lexical(&nt_name(nt), terms[term], (1.0 - bin_share) * w / lex_total)
                .unwrap();
        }
        for &(l, r, w) in &binary[nt] {
            builder
                .try_binary(
                    &nt_name(nt),
                    &nt_name(l),
                    &nt_name(r),
                    bin_share * w / bin_total,
                )
                .unwrap();
        }
    }
    builder.build().unwrap()
}

/// Samples a sentence of at most `max_words` words from the grammar,
/// preferring multi-word yields.
pub fn random_sentence(grammar: &Grammar, rng: &mut ChaCha8Rng, max_words: usize) -> Vec<String> {
    let limits = SampleLimits {
        max_words,
        max_depth: 48,
    };
    let mut fallback: Option<Vec<String>> = None;
    for _ in 0..500 {
        let Some(tree) = sample_tree(grammar, rng, limits) else {
            continue;
        };
        let sentence: Vec<String> = tree.yield_words().iter().map(|w| w.to_string()).collect();
        if sentence.len() > max_words {
            continue;
        }
        if sentence.len() >= 2 {
            return sentence;
        }
        fallback = Some(sentence);
    }
    fallback.expect("grammar failed to produce any sentence")
}

/// Deterministic (grammar, sentence) instance for oracle cross-checks.
pub fn random_instance(seed: u64, max_words: usize) -> (Grammar, Vec<String>) {
    let grammar = random_grammar(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37_79b9).wrapping_add(17));
    let sentence = random_sentence(&grammar, &mut rng, max_words);
    (grammar, sentence)
}

pub fn assert_close(a: f64, b: f64, tol: f64, what: &str) {
    let scale = 1.0f64.max(a.abs()).max(b.abs());
    assert!(
        (a - b).abs() <= tol * scale,
        "{what}: {a} vs {b} (tol {tol})"
    );
}
