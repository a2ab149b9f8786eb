//! Inside, outside and posterior probability tables.
//!
//! For a sentence `w_1..w_n` and grammar with start symbol `S`:
//!
//! * inside  `e(s,t,X) = P(X =>* w_s..w_t)`
//! * outside `f(s,t,X) = P(S =>* w_1..w_{s-1} X w_{t+1}..w_n)`
//! * posterior `g(s,t,X) = f(s,t,X) * e(s,t,X) / e(1,n,S)`,
//!   the probability that constituent `(s,t,X)` occurs in the true parse
//!   given the sentence.
//!
//! Values are kept in linear space. To survive underflow on long sentences,
//! each span length gets a shared power-of-two scale factor; rescaling by
//! powers of two is exact in binary floating point, so the `g` ratio is
//! unaffected.

use crate::grammar::{Grammar, NtId};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ChartError {
    #[error("cannot build a chart for an empty sentence")]
    EmptySentence,
    #[error("sentence has zero probability under the grammar")]
    Unparsable,
}

/// 2^e with clamping; exact for representable exponents.
fn pow2(e: i64) -> f64 {
    if e > 1023 {
        f64::INFINITY
    } else if e < -2200 {
        0.0
    } else if e >= -1022 {
        2f64.powi(e as i32)
    } else {
        // subnormal range: split so each factor is representable
        2f64.powi(-1022) * 2f64.powi((e + 1022) as i32)
    }
}

/// Multiplies every entry by 2^e, split into safe factors.
fn scale_slice(row: &mut [f64], e: i64) {
    if e == 0 {
        return;
    }
    let mut rem = e;
    while rem != 0 {
        let step = rem.clamp(-1000, 1000);
        let factor = pow2(step);
        for v in row.iter_mut() {
            *v *= factor;
        }
        rem -= step;
    }
}

/// Dense `(start, length, nonterminal)` table of scaled mantissas with one
/// base-2 exponent per span length: `value = m * 2^exp[len]`.
#[derive(Debug, Clone)]
struct ScaledTable {
    n: usize,
    k: usize,
    m: Vec<f64>,
    exp: Vec<i64>, // indexed by length - 1
}

impl ScaledTable {
    fn new(n: usize, k: usize) -> Self {
        ScaledTable {
            n,
            k,
            m: vec![0.0; n * n * k],
            exp: vec![0; n],
        }
    }

    #[inline]
    fn idx(&self, s: usize, len: usize, x: u32) -> usize {
        ((len - 1) * self.n + (s - 1)) * self.k + x as usize
    }

    #[inline]
    fn get_m(&self, s: usize, len: usize, x: u32) -> f64 {
        self.m[self.idx(s, len, x)]
    }

    /// Unscaled value; may under/overflow to 0/inf for extreme exponents.
    fn value(&self, s: usize, t: usize, x: NtId) -> f64 {
        let len = t - s + 1;
        self.get_m(s, len, x.0) * pow2(self.exp[len - 1])
    }

    /// Normalizes the row for `len` so its max mantissa lands in [1, 2).
    fn normalize_row(&mut self, len: usize, base_exp: i64) {
        let k = self.k;
        let start = (len - 1) * self.n * k;
        let end = start + (self.n - len + 1) * k;
        let row = &mut self.m[start..end];
        let max = row.iter().cloned().fold(0.0f64, f64::max);
        if max <= 0.0 {
            self.exp[len - 1] = 0;
            return;
        }
        let u = max.log2().floor() as i64;
        scale_slice(row, -u);
        self.exp[len - 1] = base_exp + u;
    }
}

/// Inside table plus the sentence probability `e(1,n,S)`.
#[derive(Debug, Clone)]
pub struct InsideTable {
    table: ScaledTable,
    sp_m: f64,
    sp_exp: i64,
}

impl InsideTable {
    pub fn n(&self) -> usize {
        self.table.n
    }

    pub fn value(&self, s: usize, t: usize, x: NtId) -> f64 {
        self.table.value(s, t, x)
    }

    /// `e(1,n,S)` as a plain double; underflows to 0 for extremely unlikely
    /// sentences even when the sentence is parsable (see [`Self::is_parsable`]).
    pub fn sentence_prob(&self) -> f64 {
        self.sp_m * pow2(self.sp_exp)
    }

    pub fn is_parsable(&self) -> bool {
        self.sp_m > 0.0
    }

    /// log2 of the sentence probability, safe against underflow.
    pub fn sentence_log2_prob(&self) -> f64 {
        if self.sp_m > 0.0 {
            self.sp_m.log2() + self.sp_exp as f64
        } else {
            f64::NEG_INFINITY
        }
    }
}

/// Outside table.
#[derive(Debug, Clone)]
pub struct OutsideTable {
    table: ScaledTable,
}

impl OutsideTable {
    pub fn value(&self, s: usize, t: usize, x: NtId) -> f64 {
        self.table.value(s, t, x)
    }
}

/// Posterior constituent probabilities, all in [0, 1].
#[derive(Debug, Clone)]
pub struct PosteriorTable {
    n: usize,
    k: usize,
    g: Vec<f64>,
}

impl PosteriorTable {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nonterminal_count(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn value(&self, s: usize, t: usize, x: NtId) -> f64 {
        self.g[((t - s) * self.n + (s - 1)) * self.k + x.0 as usize]
    }

    /// All labels' posteriors for one span.
    #[inline]
    pub fn span_row(&self, s: usize, t: usize) -> &[f64] {
        let base = ((t - s) * self.n + (s - 1)) * self.k;
        &self.g[base..base + self.k]
    }

    /// Sum of `g` over every span and label; equals `2n - 1` for a parsable
    /// sentence.
    pub fn total_mass(&self) -> f64 {
        let mut sum = 0.0;
        for len in 1..=self.n {
            for s in 1..=(self.n - len + 1) {
                sum += self.span_row(s, s + len - 1).iter().sum::<f64>();
            }
        }
        sum
    }
}

/// Computes the inside table bottom-up: `e(s,s,X)` from lexical rules, longer
/// spans from `e(s,t,X) = sum over X -> Y Z and splits r of
/// prob * e(s,r,Y) * e(r+1,t,Z)`.
pub fn compute_inside(grammar: &Grammar, words: &[String]) -> Result<InsideTable, ChartError> {
    let n = words.len();
    if n == 0 {
        return Err(ChartError::EmptySentence);
    }
    let k = grammar.nonterminal_count();
    let mut table = ScaledTable::new(n, k);

    for (i, word) in words.iter().enumerate() {
        let s = i + 1;
        if let Some(term) = grammar.term_id(word) {
            for rule in grammar.lexical_rules_for_term(term) {
                let idx = table.idx(s, 1, rule.lhs.0);
                table.m[idx] += rule.prob;
            }
        }
        // unknown words leave the column zero: the sentence is unparsable
    }
    table.normalize_row(1, 0);

    let rules = grammar.binary_rules();
    for len in 2..=n {
        // one shared exponent for all split terms of this length
        let base_exp = (1..len)
            .map(|l1| table.exp[l1 - 1] + table.exp[len - l1 - 1])
            .max()
            .unwrap();
        let adj: Vec<f64> = (0..len)
            .map(|l1| match l1 {
                0 => 0.0,
                _ => pow2(table.exp[l1 - 1] + table.exp[len - l1 - 1] - base_exp),
            })
            .collect();
        for s in 1..=(n - len + 1) {
            let t = s + len - 1;
            for r in s..t {
                let l1 = r - s + 1;
                let factor = adj[l1];
                if factor == 0.0 {
                    continue;
                }
                for rule in rules {
                    let left = table.get_m(s, l1, rule.left.0);
                    if left == 0.0 {
                        continue;
                    }
                    let right = table.get_m(r + 1, len - l1, rule.right.0);
                    if right == 0.0 {
                        continue;
                    }
                    let idx = table.idx(s, len, rule.lhs.0);
                    table.m[idx] += rule.prob * left * right * factor;
                }
            }
        }
        table.normalize_row(len, base_exp);
    }

    let sp_m = table.get_m(1, n, grammar.start().0);
    let sp_exp = table.exp[n - 1];
    Ok(InsideTable {
        table,
        sp_m,
        sp_exp,
    })
}

/// Computes the outside table top-down from `f(1,n,S) = 1`. Contributions are
/// pulled from parent spans: for a rule `W -> X Z`,
/// `f(s,t,X) += prob * f(s,t',W) * e(t+1,t',Z)`, and symmetrically for right
/// children.
pub fn compute_outside(grammar: &Grammar, inside: &InsideTable) -> OutsideTable {
    let n = inside.table.n;
    let k = inside.table.k;
    let mut table = ScaledTable::new(n, k);
    let idx_top = table.idx(1, n, grammar.start().0);
    table.m[idx_top] = 1.0;
    table.exp[n - 1] = 0;

    let rules = grammar.binary_rules();
    for len in (1..n).rev() {
        let base_exp = (len + 1..=n)
            .map(|lp| table.exp[lp - 1] + inside.table.exp[lp - len - 1])
            .max()
            .unwrap();
        let adj: Vec<f64> = (0..=n)
            .map(|lp| match lp {
                _ if lp <= len => 0.0,
                _ => pow2(table.exp[lp - 1] + inside.table.exp[lp - len - 1] - base_exp),
            })
            .collect();
        for s in 1..=(n - len + 1) {
            let t = s + len - 1;
            // as left child: parent (s, t2), sibling (t+1, t2)
            for t2 in t + 1..=n {
                let lp = t2 - s + 1;
                let factor = adj[lp];
                if factor == 0.0 {
                    continue;
                }
                for rule in rules {
                    let parent = table.get_m(s, lp, rule.lhs.0);
                    if parent == 0.0 {
                        continue;
                    }
                    let sibling = inside.table.get_m(t + 1, t2 - t, rule.right.0);
                    if sibling == 0.0 {
                        continue;
                    }
                    let idx = table.idx(s, len, rule.left.0);
                    table.m[idx] += rule.prob * parent * sibling * factor;
                }
            }
            // as right child: parent (s2, t), sibling (s2, s-1)
            for s2 in 1..s {
                let lp = t - s2 + 1;
                let factor = adj[lp];
                if factor == 0.0 {
                    continue;
                }
                for rule in rules {
                    let parent = table.get_m(s2, lp, rule.lhs.0);
                    if parent == 0.0 {
                        continue;
                    }
                    let sibling = inside.table.get_m(s2, s - s2, rule.left.0);
                    if sibling == 0.0 {
                        continue;
                    }
                    let idx = table.idx(s, len, rule.right.0);
                    table.m[idx] += rule.prob * parent * sibling * factor;
                }
            }
        }
        table.normalize_row(len, base_exp);
    }
    OutsideTable { table }
}

/// `g(s,t,X) = f * e / e(1,n,S)`. Fails on unparsable sentences, so callers
/// never observe NaN.
pub fn compute_posterior(
    inside: &InsideTable,
    outside: &OutsideTable,
) -> Result<PosteriorTable, ChartError> {
    if !inside.is_parsable() {
        return Err(ChartError::Unparsable);
    }
    let n = inside.table.n;
    let k = inside.table.k;
    let mut g = vec![0.0; n * n * k];
    for len in 1..=n {
        let exp = inside.table.exp[len - 1] + outside.table.exp[len - 1] - inside.sp_exp;
        let factor = pow2(exp);
        for s in 1..=(n - len + 1) {
            for x in 0..k as u32 {
                let idx = inside.table.idx(s, len, x);
                let e = inside.table.m[idx];
                if e == 0.0 {
                    continue;
                }
                let f = outside.table.m[idx];
                if f == 0.0 {
                    continue;
                }
                g[idx] = e * f / inside.sp_m * factor;
            }
        }
    }
    Ok(PosteriorTable { n, k, g })
}

/// Inside, outside and posterior tables for one sentence.
#[derive(Debug, Clone)]
pub struct Chart {
    pub inside: InsideTable,
    pub outside: OutsideTable,
    pub posterior: PosteriorTable,
}

impl Chart {
    /// Runs the full pipeline; errors if the sentence is empty or unparsable.
    pub fn build(grammar: &Grammar, words: &[String]) -> Result<Chart, ChartError> {
        let inside = compute_inside(grammar, words)?;
        let outside = compute_outside(grammar, &inside);
        let posterior = compute_posterior(&inside, &outside)?;
        Ok(Chart {
            inside,
            outside,
            posterior,
        })
    }

    pub fn n(&self) -> usize {
        self.inside.n()
    }

    pub fn sentence_prob(&self) -> f64 {
        self.inside.sentence_prob()
    }

    /// Tab-separated `s t X e f g` lines for every span with inside mass.
    pub fn dump(&self, grammar: &Grammar) -> String {
        let mut out = String::new();
        let n = self.n();
        for len in 1..=n {
            for s in 1..=(n - len + 1) {
                let t = s + len - 1;
                for x in grammar.nonterminals() {
                    let e = self.inside.value(s, t, x);
                    if e == 0.0 {
                        continue;
                    }
                    out.push_str(&format!(
                        "{}\t{}\t{}\t{}\t{}\t{}\n",
                        s,
                        t,
                        grammar.nt_name(x),
                        e,
                        self.outside.value(s, t, x),
                        self.posterior.value(s, t, x)
                    ));
                }
            }
        }
        out
    }
}
