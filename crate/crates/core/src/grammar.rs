//! CNF probabilistic context-free grammars.
//!
//! A grammar holds binary rules `X -> Y Z` and lexical rules `X -> w`, each
//! with a probability, plus a start symbol. Nonterminals and terminals live in
//! disjoint interned namespaces so chart tables can be indexed densely by
//! [`NtId`].

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::ops::Range;

use crate::tree::ParseTree;

/// Interned nonterminal id, dense in `0..k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NtId(pub u32);

/// Interned terminal id.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct TermId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolKind {
    Terminal,
    Nonterminal,
}

/// `lhs -> left right` with probability `prob`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryRule {
    pub lhs: NtId,
    pub left: NtId,
    pub right: NtId,
    pub prob: f64,
}

/// `lhs -> term` with probability `prob`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LexicalRule {
    pub lhs: NtId,
    pub term: TermId,
    pub prob: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum GrammarError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("symbol `{0}` is used both as a terminal and as a nonterminal")]
    NamespaceClash(String),
    #[error("rule {lhs} -> {rhs} has invalid probability {prob}")]
    InvalidProb { lhs: String, rhs: String, prob: f64 },
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("`{0}` is a terminal, not a nonterminal")]
    NotANonterminal(String),
    #[error("missing `start:` header")]
    MissingStart,
    #[error("duplicate `start:` header at line {0}")]
    DuplicateStart(usize),
    #[error("cannot induce a grammar from an empty tree sequence")]
    EmptyTreebank,
    #[error("trees have differing root labels: `{expected}` vs `{found}`")]
    RootMismatch { expected: String, found: String },
    #[error("tree is not in binarized CNF shape at node `{0}`")]
    NonBinaryTree(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A single failed grammar invariant, produced by [`Grammar::validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Probabilities for this lhs do not sum to 1.
    LhsSum { lhs: String, sum: f64 },
    /// A rule carries a probability outside (0, 1].
    RuleProb { lhs: String, rhs: String, prob: f64 },
    /// The start symbol never appears as a lhs.
    StartUnused { start: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::LhsSum { lhs, sum } => write!(f, "{lhs} sums to {sum}"),
            Violation::RuleProb { lhs, rhs, prob } => {
                write!(f, "{lhs} -> {rhs} has probability {prob}")
            }
            Violation::StartUnused { start } => {
                write!(f, "start symbol {start} has no rules")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum RhsKey {
    Binary(NtId, NtId),
    Lexical(TermId),
}

/// An immutable CNF PCFG. Safe to share across threads once built.
#[derive(Debug, Clone)]
pub struct Grammar {
    start: NtId,
    nt_names: Vec<String>,
    term_names: Vec<String>,
    nt_index: HashMap<String, NtId>,
    term_index: HashMap<String, TermId>,
    binary: Vec<BinaryRule>,
    lexical: Vec<LexicalRule>,
    binary_by_lhs: Vec<Range<usize>>,
    binary_by_left: Vec<Vec<u32>>,
    binary_by_right: Vec<Vec<u32>>,
    lexical_by_term: Vec<Vec<u32>>,
    lexical_by_lhs: Vec<Vec<u32>>,
}

/// Incrementally collects rules before index construction.
pub struct GrammarBuilder {
    start: String,
    nt_names: Vec<String>,
    term_names: Vec<String>,
    nt_index: HashMap<String, NtId>,
    term_index: HashMap<String, TermId>,
    rules: HashMap<(NtId, RhsKey), f64>,
}

impl GrammarBuilder {
    pub fn new(start: &str) -> Self {
        GrammarBuilder {
            start: start.to_string(),
            nt_names: Vec::new(),
            term_names: Vec::new(),
            nt_index: HashMap::new(),
            term_index: HashMap::new(),
            rules: HashMap::new(),
        }
    }

    fn intern_nt(&mut self, name: &str) -> Result<NtId, GrammarError> {
        if self.term_index.contains_key(name) {
            return Err(GrammarError::NamespaceClash(name.to_string()));
        }
        if let Some(&id) = self.nt_index.get(name) {
            return Ok(id);
        }
        let id = NtId(self.nt_names.len() as u32);
        self.nt_names.push(name.to_string());
        self.nt_index.insert(name.to_string(), id);
        Ok(id)
    }

    fn intern_term(&mut self, name: &str) -> Result<TermId, GrammarError> {
        if self.nt_index.contains_key(name) {
            return Err(GrammarError::NamespaceClash(name.to_string()));
        }
        if let Some(&id) = self.term_index.get(name) {
            return Ok(id);
        }
        let id = TermId(self.term_names.len() as u32);
        self.term_names.push(name.to_string());
        self.term_index.insert(name.to_string(), id);
        Ok(id)
    }

    fn add(&mut self, lhs: NtId, rhs: RhsKey, prob: f64) -> Result<(), GrammarError> {
        if !prob.is_finite() || prob < 0.0 {
            let (rhs_str, _) = self.rhs_strings(&rhs);
            return Err(GrammarError::InvalidProb {
                lhs: self.nt_names[lhs.0 as usize].clone(),
                rhs: rhs_str,
                prob,
            });
        }
        if prob == 0.0 {
            return Ok(()); // zero-probability rules are dropped
        }
        *self.rules.entry((lhs, rhs)).or_insert(0.0) += prob; // duplicates merge
        Ok(())
    }

    fn rhs_strings(&self, rhs: &RhsKey) -> (String, bool) {
        match rhs {
            RhsKey::Binary(y, z) => (
                format!(
                    "{} {}",
                    self.nt_names[y.0 as usize], self.nt_names[z.0 as usize]
                ),
                true,
            ),
            RhsKey::Lexical(t) => (self.term_names[t.0 as usize].clone(), false),
        }
    }

    pub fn binary(mut self, lhs: &str, left: &str, right: &str, prob: f64) -> Self {
        self.try_binary(lhs, left, right, prob)
            .expect("invalid binary rule");
        self
    }

    pub fn lexical(mut self, lhs: &str, word: &str, prob: f64) -> Self {
        self.try_lexical(lhs, word, prob)
            .expect("invalid lexical rule");
        self
    }

    pub fn try_binary(
        &mut self,
        lhs: &str,
        left: &str,
        right: &str,
        prob: f64,
    ) -> Result<(), GrammarError> {
        let lhs = self.intern_nt(lhs)?;
        let left = self.intern_nt(left)?;
        let right = self.intern_nt(right)?;
        self.add(lhs, RhsKey::Binary(left, right), prob)
    }

    pub fn try_lexical(&mut self, lhs: &str, word: &str, prob: f64) -> Result<(), GrammarError> {
        let lhs = self.intern_nt(lhs)?;
        let term = self.intern_term(word)?;
        self.add(lhs, RhsKey::Lexical(term), prob)
    }

    pub fn build(mut self) -> Result<Grammar, GrammarError> {
        let start = self.intern_nt(&self.start.clone())?;
        let k = self.nt_names.len();
        let t = self.term_names.len();

        let mut binary = Vec::new();
        let mut lexical = Vec::new();
        for (&(lhs, ref rhs), &prob) in &self.rules {
            match *rhs {
                RhsKey::Binary(left, right) => binary.push(BinaryRule {
                    lhs,
                    left,
                    right,
                    prob,
                }),
                RhsKey::Lexical(term) => lexical.push(LexicalRule { lhs, term, prob }),
            }
        }
        binary.sort_by_key(|r| (r.lhs, r.left, r.right));
        lexical.sort_by_key(|r| (r.lhs, r.term));

        let mut binary_by_lhs = vec![0..0; k];
        let mut i = 0;
        while i < binary.len() {
            let lhs = binary[i].lhs;
            let mut j = i;
            while j < binary.len() && binary[j].lhs == lhs {
                j += 1;
            }
            binary_by_lhs[lhs.0 as usize] = i..j;
            i = j;
        }

        let mut binary_by_left = vec![Vec::new(); k];
        let mut binary_by_right = vec![Vec::new(); k];
        for (i, r) in binary.iter().enumerate() {
            binary_by_left[r.left.0 as usize].push(i as u32);
            binary_by_right[r.right.0 as usize].push(i as u32);
        }
        let mut lexical_by_term = vec![Vec::new(); t];
        let mut lexical_by_lhs = vec![Vec::new(); k];
        for (i, r) in lexical.iter().enumerate() {
            lexical_by_term[r.term.0 as usize].push(i as u32);
            lexical_by_lhs[r.lhs.0 as usize].push(i as u32);
        }

        Ok(Grammar {
            start,
            nt_names: self.nt_names,
            term_names: self.term_names,
            nt_index: self.nt_index,
            term_index: self.term_index,
            binary,
            lexical,
            binary_by_lhs,
            binary_by_left,
            binary_by_right,
            lexical_by_term,
            lexical_by_lhs,
        })
    }
}

impl Grammar {
    pub fn builder(start: &str) -> GrammarBuilder {
        GrammarBuilder::new(start)
    }

    pub fn start(&self) -> NtId {
        self.start
    }

    pub fn start_name(&self) -> &str {
        &self.nt_names[self.start.0 as usize]
    }

    /// Number of distinct nonterminals, `k`.
    pub fn nonterminal_count(&self) -> usize {
        self.nt_names.len()
    }

    pub fn terminal_count(&self) -> usize {
        self.term_names.len()
    }

    /// Total number of rules, `r`.
    pub fn rule_count(&self) -> usize {
        self.binary.len() + self.lexical.len()
    }

    pub fn nt_name(&self, id: NtId) -> &str {
        &self.nt_names[id.0 as usize]
    }

    pub fn term_name(&self, id: TermId) -> &str {
        &self.term_names[id.0 as usize]
    }

    pub fn nt_id(&self, name: &str) -> Option<NtId> {
        self.nt_index.get(name).copied()
    }

    pub fn term_id(&self, name: &str) -> Option<TermId> {
        self.term_index.get(name).copied()
    }

    pub fn nonterminals(&self) -> impl Iterator<Item = NtId> + '_ {
        (0..self.nt_names.len() as u32).map(NtId)
    }

    pub fn binary_rules(&self) -> &[BinaryRule] {
        &self.binary
    }

    pub fn lexical_rules(&self) -> &[LexicalRule] {
        &self.lexical
    }

    /// All binary rules with the given lhs, sorted by `(left, right)` ids.
    pub fn binary_rules_for(&self, lhs: NtId) -> &[BinaryRule] {
        &self.binary[self.binary_by_lhs[lhs.0 as usize].clone()]
    }

    /// Name-based variant of [`Grammar::binary_rules_for`].
    pub fn lookup_binary(&self, lhs: &str) -> Result<&[BinaryRule], GrammarError> {
        if self.term_index.contains_key(lhs) {
            return Err(GrammarError::NotANonterminal(lhs.to_string()));
        }
        let id = self
            .nt_id(lhs)
            .ok_or_else(|| GrammarError::UnknownSymbol(lhs.to_string()))?;
        Ok(self.binary_rules_for(id))
    }

    /// Rule indices into `binary_rules()` whose left child is `nt`.
    pub fn binary_with_left(&self, nt: NtId) -> &[u32] {
        &self.binary_by_left[nt.0 as usize]
    }

    pub fn binary_with_right(&self, nt: NtId) -> &[u32] {
        &self.binary_by_right[nt.0 as usize]
    }

    /// Lexical rules rewriting to the given terminal.
    pub fn lexical_rules_for_term(&self, term: TermId) -> impl Iterator<Item = &LexicalRule> {
        self.lexical_by_term[term.0 as usize]
            .iter()
            .map(move |&i| &self.lexical[i as usize])
    }

    /// Lexical rules with the given lhs.
    pub fn lexical_rules_for(&self, lhs: NtId) -> impl Iterator<Item = &LexicalRule> {
        self.lexical_by_lhs[lhs.0 as usize]
            .iter()
            .map(move |&i| &self.lexical[i as usize])
    }

    /// Checks the probabilistic invariants; an empty report means all hold.
    pub fn validate(&self) -> Vec<Violation> {
        let mut report = Vec::new();
        let mut sums = vec![0.0f64; self.nt_names.len()];
        let mut has_rule = vec![false; self.nt_names.len()];
        for r in &self.binary {
            sums[r.lhs.0 as usize] += r.prob;
            has_rule[r.lhs.0 as usize] = true;
            if r.prob > 1.0 {
                report.push(Violation::RuleProb {
                    lhs: self.nt_name(r.lhs).to_string(),
                    rhs: format!("{} {}", self.nt_name(r.left), self.nt_name(r.right)),
                    prob: r.prob,
                });
            }
        }
        for r in &self.lexical {
            sums[r.lhs.0 as usize] += r.prob;
            has_rule[r.lhs.0 as usize] = true;
            if r.prob > 1.0 {
                report.push(Violation::RuleProb {
                    lhs: self.nt_name(r.lhs).to_string(),
                    rhs: self.term_name(r.term).to_string(),
                    prob: r.prob,
                });
            }
        }
        for (i, (&sum, &has)) in sums.iter().zip(&has_rule).enumerate() {
            if has && (sum - 1.0).abs() > 1e-9 {
                report.push(Violation::LhsSum {
                    lhs: self.nt_names[i].clone(),
                    sum,
                });
            }
        }
        if !has_rule[self.start.0 as usize] {
            report.push(Violation::StartUnused {
                start: self.start_name().to_string(),
            });
        }
        report
    }

    /// Induces a grammar from binarized trees by relative-frequency counting.
    ///
    /// Rule probability is `count(lhs -> rhs) / count(lhs)`; the start symbol
    /// is the shared root label of the trees. No smoothing. Symbols are
    /// interned in sorted-name order so the result is independent of the
    /// input ordering.
    pub fn induce_from_trees(trees: &[ParseTree]) -> Result<Grammar, GrammarError> {
        if trees.is_empty() {
            return Err(GrammarError::EmptyTreebank);
        }
        let root = match &trees[0] {
            ParseTree::Node { label, .. } => label.clone(),
            ParseTree::Leaf { word, .. } => return Err(GrammarError::NonBinaryTree(word.clone())),
        };

        #[derive(PartialEq, Eq, Hash)]
        enum Rhs {
            Bin(String, String),
            Lex(String),
        }
        let mut counts: HashMap<(String, Rhs), u64> = HashMap::new();
        let mut lhs_totals: HashMap<String, u64> = HashMap::new();

        fn walk(
            t: &ParseTree,
            counts: &mut HashMap<(String, Rhs), u64>,
            totals: &mut HashMap<String, u64>,
        ) -> Result<(), GrammarError> {
            let ParseTree::Node { label, children } = t else {
                return Err(GrammarError::NonBinaryTree("<leaf>".to_string()));
            };
            let rhs = match children.as_slice() {
                [ParseTree::Leaf { word, .. }] => Rhs::Lex(word.clone()),
                [l @ ParseTree::Node { .. }, r @ ParseTree::Node { .. }] => {
                    walk(l, counts, totals)?;
                    walk(r, counts, totals)?;
                    Rhs::Bin(l.root_label().to_string(), r.root_label().to_string())
                }
                _ => return Err(GrammarError::NonBinaryTree(label.clone())),
            };
            *counts.entry((label.clone(), rhs)).or_insert(0) += 1;
            *totals.entry(label.clone()).or_insert(0) += 1;
            Ok(())
        }

        for t in trees {
            match t {
                ParseTree::Node { label, .. } if *label != root => {
                    return Err(GrammarError::RootMismatch {
                        expected: root,
                        found: label.clone(),
                    })
                }
                _ => {}
            }
            walk(t, &mut counts, &mut lhs_totals)?;
        }

        // Interning in sorted order makes induction permutation-invariant.
        let mut builder = GrammarBuilder::new(&root);
        let mut nts: Vec<&String> = lhs_totals.keys().collect();
        nts.sort();
        for nt in nts {
            builder.intern_nt(nt)?;
        }
        let mut words: Vec<&String> = counts
            .keys()
            .filter_map(|(_, rhs)| match rhs {
                Rhs::Lex(w) => Some(w),
                Rhs::Bin(..) => None,
            })
            .collect();
        words.sort();
        words.dedup();
        for w in words {
            builder.intern_term(w)?;
        }

        for ((lhs, rhs), count) in &counts {
            let prob = *count as f64 / lhs_totals[lhs] as f64;
            match rhs {
                Rhs::Bin(l, r) => builder.try_binary(lhs, l, r, prob)?,
                Rhs::Lex(w) => builder.try_lexical(lhs, w, prob)?,
            }
        }
        builder.build()
    }

    /// Parses the grammar text format:
    ///
    /// ```text
    /// start: S
    /// # a comment
    /// S -> A C 0.25
    /// X_x -> x 1
    /// ```
    ///
    /// Comments are whole lines starting with `#`. A `#` elsewhere is an
    /// ordinary symbol character (treebanks use `#` as a tag), so symbols
    /// themselves must not begin with `#`.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Grammar, GrammarError> {
        let mut start: Option<(String, usize)> = None;
        let mut entries: Vec<(String, Vec<String>, f64, usize)> = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let lineno = lineno + 1;
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(rest) = line.strip_prefix("start:") {
                if start.is_some() {
                    return Err(GrammarError::DuplicateStart(lineno));
                }
                let sym = rest.trim();
                if sym.is_empty() {
                    return Err(GrammarError::Parse {
                        line: lineno,
                        msg: "empty start symbol".to_string(),
                    });
                }
                start = Some((sym.to_string(), lineno));
                continue;
            }
            let Some((lhs, rhs)) = line.split_once("->") else {
                return Err(GrammarError::Parse {
                    line: lineno,
                    msg: format!("expected `LHS -> RHS... <prob>`, got `{line}`"),
                });
            };
            let lhs = lhs.trim();
            let mut fields: Vec<&str> = rhs.split_whitespace().collect();
            if lhs.is_empty() || fields.len() < 2 {
                return Err(GrammarError::Parse {
                    line: lineno,
                    msg: format!("expected `LHS -> RHS... <prob>`, got `{line}`"),
                });
            }
            let prob_str = fields.pop().unwrap();
            let prob: f64 = prob_str.parse().map_err(|_| GrammarError::Parse {
                line: lineno,
                msg: format!("bad probability `{prob_str}`"),
            })?;
            if fields.len() > 2 {
                return Err(GrammarError::Parse {
                    line: lineno,
                    msg: format!("rules must have 1 or 2 rhs symbols, got {}", fields.len()),
                });
            }
            entries.push((
                lhs.to_string(),
                fields.iter().map(|s| s.to_string()).collect(),
                prob,
                lineno,
            ));
        }
        let Some((start, _)) = start else {
            return Err(GrammarError::MissingStart);
        };
        let mut builder = GrammarBuilder::new(&start);
        for (lhs, rhs, prob, _lineno) in entries {
            match rhs.as_slice() {
                [w] => builder.try_lexical(&lhs, w, prob)?,
                [l, r] => builder.try_binary(&lhs, l, r, prob)?,
                _ => unreachable!(),
            }
        }
        builder.build()
    }

    pub fn from_str_text(text: &str) -> Result<Grammar, GrammarError> {
        Grammar::from_reader(text.as_bytes())
    }

    pub fn from_path(path: &std::path::Path) -> Result<Grammar, GrammarError> {
        let file = std::fs::File::open(path)?;
        Grammar::from_reader(std::io::BufReader::new(file))
    }

    /// Writes the text format. Rules are ordered by symbol names and
    /// probabilities use the shortest representation that round-trips, so
    /// read-write-read is the identity.
    pub fn write_to<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "start: {}", self.start_name())?;
        let mut lines: Vec<(String, String, String)> = self
            .binary
            .iter()
            .map(|r| {
                (
                    self.nt_name(r.lhs).to_string(),
                    format!("{} {}", self.nt_name(r.left), self.nt_name(r.right)),
                    r.prob.to_string(),
                )
            })
            .collect();
        lines.sort();
        let mut lex_lines: Vec<(String, String, String)> = self
            .lexical
            .iter()
            .map(|r| {
                (
                    self.nt_name(r.lhs).to_string(),
                    self.term_name(r.term).to_string(),
                    r.prob.to_string(),
                )
            })
            .collect();
        lex_lines.sort();
        for (lhs, rhs, prob) in lines.into_iter().chain(lex_lines) {
            writeln!(w, "{lhs} -> {rhs} {prob}")?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("grammar text is utf-8")
    }
}

impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}
