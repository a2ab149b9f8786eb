//! Shared fixtures for unit tests.

use crate::grammar::Grammar;

/// The running example grammar: four trees with equal probability over
/// "x x x x". The two-terminal rules are in CNF via the `X_x` preterminal.
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

pub fn words(s: &str) -> Vec<String> {
    s.split_whitespace().map(str::to_string).collect()
}
