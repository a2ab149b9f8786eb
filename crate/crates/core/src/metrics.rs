//! Bracket-based evaluation of a guessed parse against a correct parse.
//!
//! Three match criteria of decreasing strictness over the guessed
//! constituents:
//!
//! * `L` — labelled match: `(s,t,X)` occurs in the correct parse,
//! * `B` — bracketed match: some `(s,t,Y)` occurs in the correct parse,
//! * `C` — consistent brackets: no correct constituent crosses `(s,t)`.
//!
//! Each yields a recall rate and an exact-match ("tree") rate, giving six
//! metrics. When the correct parse is binary branching, `C = B`.

use std::fmt::Write as _;

use crate::tree::ConstituentSet;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("sentence lengths differ: guessed {guessed}, correct {correct}")]
    LengthMismatch { guessed: usize, correct: usize },
    #[error("cannot aggregate an empty report list")]
    EmptyInput,
    #[error("paired reports have different lengths: {left} vs {right}")]
    PairLengthMismatch { left: usize, right: usize },
}

/// True iff the spans cross: `s < q <= t < r` or `q < s <= r < t`.
/// Crossing spans cannot coexist in one tree.
pub fn crosses(a: (usize, usize), b: (usize, usize)) -> bool {
    let (s, t) = a;
    let (q, r) = b;
    (s < q && q <= t && t < r) || (q < s && s <= r && r < t)
}

/// Match counts for one sentence pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EvalCounts {
    /// L: guessed constituents correct under labelled match.
    pub labelled: usize,
    /// B: guessed constituents correct under bracketed match.
    pub bracketed: usize,
    /// C: guessed constituents crossed by no correct constituent.
    pub consistent: usize,
    /// N_G: constituents in the guessed parse.
    pub guessed: usize,
    /// N_C: constituents in the correct parse.
    pub correct: usize,
}

/// The six metric values for one sentence, all in [0, 1]; the tree metrics
/// are exactly 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricReport {
    pub labelled_recall: f64,
    pub labelled_tree: f64,
    pub bracketed_recall: f64,
    pub bracketed_tree: f64,
    pub consistent_recall: f64,
    pub consistent_tree: f64,
}

pub const METRIC_NAMES: [&str; 6] = [
    "labelled_recall",
    "labelled_tree",
    "bracketed_recall",
    "bracketed_tree",
    "consistent_brackets_recall",
    "consistent_brackets_tree",
];

impl MetricReport {
    pub fn values(&self) -> [f64; 6] {
        [
            self.labelled_recall,
            self.labelled_tree,
            self.bracketed_recall,
            self.bracketed_tree,
            self.consistent_recall,
            self.consistent_tree,
        ]
    }
}

/// Vacuous ratios (0/0 after span filtering) count as perfect.
fn rate(num: usize, den: usize) -> f64 {
    if den == 0 {
        1.0
    } else {
        num as f64 / den as f64
    }
}

impl EvalCounts {
    pub fn report(&self) -> MetricReport {
        MetricReport {
            labelled_recall: rate(self.labelled, self.correct),
            labelled_tree: if self.labelled == self.correct {
                1.0
            } else {
                0.0
            },
            bracketed_recall: rate(self.bracketed, self.correct),
            bracketed_tree: if self.bracketed == self.correct {
                1.0
            } else {
                0.0
            },
            consistent_recall: rate(self.consistent, self.guessed),
            consistent_tree: if self.consistent == self.guessed {
                1.0
            } else {
                0.0
            },
        }
    }
}

/// Counts plus derived rates for one sentence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SentenceEval {
    pub counts: EvalCounts,
    pub report: MetricReport,
}

/// Evaluates one guessed/correct pair. Constituents spanning fewer than
/// `min_span_len` words are ignored on both sides (2 excludes the
/// preterminal layer). Not symmetric: swapping the arguments swaps the
/// roles of `N_G` and `N_C`.
pub fn evaluate_pair(
    guessed: &ConstituentSet,
    correct: &ConstituentSet,
    min_span_len: usize,
) -> Result<SentenceEval, MetricsError> {
    if guessed.sentence_length != correct.sentence_length {
        return Err(MetricsError::LengthMismatch {
            guessed: guessed.sentence_length,
            correct: correct.sentence_length,
        });
    }
    let keep = |&&(s, t, _): &&(usize, usize, String)| t - s + 1 >= min_span_len;
    let guessed_triples: Vec<&(usize, usize, String)> =
        guessed.triples.iter().filter(keep).collect();
    let correct_triples: Vec<&(usize, usize, String)> =
        correct.triples.iter().filter(keep).collect();
    let correct_spans: std::collections::BTreeSet<(usize, usize)> =
        correct_triples.iter().map(|&&(s, t, _)| (s, t)).collect();

    let mut counts = EvalCounts {
        guessed: guessed_triples.len(),
        correct: correct_triples.len(),
        ..EvalCounts::default()
    };
    for triple in &guessed_triples {
        let &&(s, t, _) = triple;
        if correct_triples.iter().any(|c| c == triple) {
            counts.labelled += 1;
        }
        if correct_spans.contains(&(s, t)) {
            counts.bracketed += 1;
        }
        if !correct_spans.iter().any(|&span| crosses((s, t), span)) {
            counts.consistent += 1;
        }
    }
    Ok(SentenceEval {
        counts,
        report: counts.report(),
    })
}

/// Minimum, maximum, mean and sample standard deviation (0 for a single
/// item).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub stdev: f64,
}

pub fn stats(values: &[f64]) -> Stats {
    assert!(!values.is_empty());
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for &v in values {
        min = min.min(v);
        max = max.max(v);
    }
    let stdev = if values.len() < 2 {
        0.0
    } else {
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        var.sqrt()
    };
    Stats {
        min,
        max,
        mean,
        stdev,
    }
}

/// Per-metric statistics of item-wise differences, with a paired t
/// statistic. `t_degenerate` flags a zero-variance difference (t reported
/// as 0).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedDiff {
    pub stats: Stats,
    pub t_stat: f64,
    pub t_degenerate: bool,
}

/// Corpus-level aggregation: micro rates from pooled counts, macro
/// statistics over per-sentence rates, and optional paired differences
/// against a second system.
#[derive(Debug, Clone)]
pub struct CorpusReport {
    pub items: usize,
    pub micro: MetricReport,
    pub macro_stats: [Stats; 6],
    pub paired: Option<[PairedDiff; 6]>,
}

impl CorpusReport {
    pub fn macro_report(&self) -> MetricReport {
        MetricReport {
            labelled_recall: self.macro_stats[0].mean,
            labelled_tree: self.macro_stats[1].mean,
            bracketed_recall: self.macro_stats[2].mean,
            bracketed_tree: self.macro_stats[3].mean,
            consistent_recall: self.macro_stats[4].mean,
            consistent_tree: self.macro_stats[5].mean,
        }
    }

    /// Line-oriented `metric<TAB>value` format; rates as fractions in `[0,1]`.
    pub fn to_tsv(&self, micro: bool) -> String {
        let report = if micro {
            self.micro
        } else {
            self.macro_report()
        };
        let mut out = String::new();
        for (name, value) in METRIC_NAMES.iter().zip(report.values()) {
            writeln!(out, "{name}\t{value:.6}").unwrap();
        }
        out
    }

    /// Aligned table with percentages, micro and macro side by side.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        writeln!(
            out,
            "{:<28} {:>8} {:>8} {:>8} {:>8} {:>8}",
            "metric", "micro%", "macro%", "min%", "max%", "sdev"
        )
        .unwrap();
        for (i, name) in METRIC_NAMES.iter().enumerate() {
            let s = self.macro_stats[i];
            writeln!(
                out,
                "{:<28} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8.2}",
                name,
                self.micro.values()[i] * 100.0,
                s.mean * 100.0,
                s.min * 100.0,
                s.max * 100.0,
                s.stdev * 100.0
            )
            .unwrap();
        }
        out
    }

    /// Paired-difference table (this system minus the other).
    pub fn paired_table(&self) -> Option<String> {
        let paired = self.paired.as_ref()?;
        let mut out = String::new();
        writeln!(
            out,
            "{:<28} {:>8} {:>8} {:>8} {:>8} {:>8}",
            "difference", "min%", "max%", "mean%", "sdev", "t"
        )
        .unwrap();
        for (i, name) in METRIC_NAMES.iter().enumerate() {
            let d = &paired[i];
            let t = if d.t_degenerate {
                "0*".to_string()
            } else {
                format!("{:.3}", d.t_stat)
            };
            writeln!(
                out,
                "{:<28} {:>8.2} {:>8.2} {:>8.2} {:>8.2} {:>8}",
                name,
                d.stats.min * 100.0,
                d.stats.max * 100.0,
                d.stats.mean * 100.0,
                d.stats.stdev * 100.0,
                t
            )
            .unwrap();
        }
        Some(out)
    }
}

fn micro_report(items: &[SentenceEval]) -> MetricReport {
    let mut pooled = EvalCounts::default();
    let mut labelled_exact = 0usize;
    let mut bracketed_exact = 0usize;
    let mut consistent_exact = 0usize;
    for item in items {
        pooled.labelled += item.counts.labelled;
        pooled.bracketed += item.counts.bracketed;
        pooled.consistent += item.counts.consistent;
        pooled.guessed += item.counts.guessed;
        pooled.correct += item.counts.correct;
        labelled_exact += (item.counts.labelled == item.counts.correct) as usize;
        bracketed_exact += (item.counts.bracketed == item.counts.correct) as usize;
        consistent_exact += (item.counts.consistent == item.counts.guessed) as usize;
    }
    let n = items.len();
    MetricReport {
        labelled_recall: rate(pooled.labelled, pooled.correct),
        labelled_tree: labelled_exact as f64 / n as f64,
        bracketed_recall: rate(pooled.bracketed, pooled.correct),
        bracketed_tree: bracketed_exact as f64 / n as f64,
        consistent_recall: rate(pooled.consistent, pooled.guessed),
        consistent_tree: consistent_exact as f64 / n as f64,
    }
}

/// Aggregates per-sentence evaluations; `paired` holds a second system's
/// evaluations of the same sentences, in the same order.
pub fn aggregate(
    items: &[SentenceEval],
    paired: Option<&[SentenceEval]>,
) -> Result<CorpusReport, MetricsError> {
    if items.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    if let Some(other) = paired {
        if other.len() != items.len() {
            return Err(MetricsError::PairLengthMismatch {
                left: items.len(),
                right: other.len(),
            });
        }
    }

    let column = |i: usize, from: &[SentenceEval]| -> Vec<f64> {
        from.iter().map(|e| e.report.values()[i]).collect()
    };
    let macro_stats: [Stats; 6] = std::array::from_fn(|i| stats(&column(i, items)));

    let paired = paired.map(|other| {
        std::array::from_fn(|i| {
            let a = column(i, items);
            let b = column(i, other);
            let diffs: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x - y).collect();
            let s = stats(&diffs);
            let m = diffs.len() as f64;
            let degenerate = s.stdev == 0.0 || diffs.len() < 2;
            let t_stat = if degenerate {
                0.0
            } else {
                s.mean / (s.stdev / m.sqrt())
            };
            PairedDiff {
                stats: s,
                t_stat,
                t_degenerate: degenerate,
            }
        })
    });

    Ok(CorpusReport {
        items: items.len(),
        micro: micro_report(items),
        macro_stats,
        paired,
    })
}
