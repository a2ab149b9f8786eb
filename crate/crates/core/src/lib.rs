//! PCFG parsing toolkit.
//!
//! Decodes sentences under a probabilistic context-free grammar with three
//! different objectives and scores the results against a treebank:
//!
//! * [`decode::viterbi_parse`] — the single most probable tree (max-product CKY),
//! * [`decode::labelled_recall_parse`] — the tree maximizing the expected number
//!   of correct labelled constituents under the grammar's posterior,
//! * [`decode::bracketed_recall_parse`] — the tree maximizing the expected number
//!   of correct brackets, ignoring labels.
//!
//! The recall decoders run on posterior constituent probabilities computed by
//! the [`chart`] module (inside/outside tables). Grammars are CNF with lexical
//! unaries and can be induced from a binarized treebank by relative-frequency
//! counting ([`grammar::Grammar::induce_from_trees`]). The [`metrics`] module
//! implements six bracket-based evaluation metrics, and [`oracle`] holds
//! brute-force reference implementations used to verify the dynamic programs.

pub mod chart;
pub mod decode;
pub mod grammar;
pub mod metrics;
pub mod oracle;
pub mod sample;
pub mod tree;

#[cfg(test)]
pub(crate) mod testutil;

pub use chart::{Chart, ChartError};
pub use decode::{DecodeError, DecodeResult, Objective};
pub use grammar::{Grammar, GrammarError, NtId, TermId};
pub use metrics::{CorpusReport, EvalCounts, MetricReport, SentenceEval};
pub use tree::{ConstituentSet, ParseTree, TreeError};
