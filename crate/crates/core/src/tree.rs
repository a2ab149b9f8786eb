//! Bracketed parse trees and treebank preprocessing.
//!
//! Trees are read and written in the usual s-expression treebank notation.
//! [`binarize`] runs the preprocessing pipeline that turns raw treebank trees
//! into CNF shape: empty-element removal, unary collapse, and right-branching
//! conversion of n-ary productions.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

/// Reserved label for trees produced by the right-branching fallback decoder.
pub const FALLBACK_LABEL: &str = "X_FALLBACK";

/// Label marking empty elements; subtrees dominating only these are deleted.
pub const EMPTY_LABEL: &str = "-NONE-";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseTree {
    Leaf {
        word: String,
        position: usize,
    },
    Node {
        label: String,
        children: Vec<ParseTree>,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum TreeError {
    #[error("unbalanced at line {line}")]
    Unbalanced { line: usize },
    #[error("empty node `()` at line {line}")]
    EmptyNode { line: usize },
    #[error("node without a label at line {line}")]
    UnlabelledNode { line: usize },
    #[error("node `{label}` has no children at line {line}")]
    MissingChildren { line: usize, label: String },
    #[error("a bare word cannot be the root of a tree")]
    LeafRoot,
    #[error("tree has an empty yield after removing empty elements")]
    EmptyYield,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl ParseTree {
    pub fn leaf(word: &str, position: usize) -> ParseTree {
        ParseTree::Leaf {
            word: word.to_string(),
            position,
        }
    }

    pub fn node(label: &str, children: Vec<ParseTree>) -> ParseTree {
        ParseTree::Node {
            label: label.to_string(),
            children,
        }
    }

    pub fn root_label(&self) -> &str {
        match self {
            ParseTree::Leaf { word, .. } => word,
            ParseTree::Node { label, .. } => label,
        }
    }

    /// Number of words dominated by this tree.
    pub fn word_count(&self) -> usize {
        match self {
            ParseTree::Leaf { .. } => 1,
            ParseTree::Node { children, .. } => children.iter().map(ParseTree::word_count).sum(),
        }
    }

    /// The word sequence at the leaves, left to right.
    pub fn yield_words(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.collect_yield(&mut out);
        out
    }

    fn collect_yield<'a>(&'a self, out: &mut Vec<&'a str>) {
        match self {
            ParseTree::Leaf { word, .. } => out.push(word),
            ParseTree::Node { children, .. } => {
                for c in children {
                    c.collect_yield(out);
                }
            }
        }
    }

    /// Word tokens plus nonterminal nodes; the quantity the corpus-size cap
    /// is measured in.
    pub fn symbol_count(&self) -> usize {
        match self {
            ParseTree::Leaf { .. } => 1,
            ParseTree::Node { children, .. } => {
                1 + children.iter().map(ParseTree::symbol_count).sum::<usize>()
            }
        }
    }

    /// True if every node has exactly two node children or one leaf child.
    pub fn is_binarized(&self) -> bool {
        match self {
            ParseTree::Leaf { .. } => true,
            ParseTree::Node { children, .. } => match children.as_slice() {
                [ParseTree::Leaf { .. }] => true,
                [l @ ParseTree::Node { .. }, r @ ParseTree::Node { .. }] => {
                    l.is_binarized() && r.is_binarized()
                }
                _ => false,
            },
        }
    }
}

impl fmt::Display for ParseTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParseTree::Leaf { word, .. } => f.write_str(word),
            ParseTree::Node { label, children } => {
                write!(f, "({label}")?;
                for c in children {
                    write!(f, " {c}")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// One-line bracketed form; inverse of [`read_bracketed`].
pub fn write_bracketed(tree: &ParseTree) -> String {
    tree.to_string()
}

#[derive(Debug)]
enum Token {
    Open(usize),
    Close(usize),
    Atom(String, usize),
}

fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut line = 1;
    let mut atom = String::new();
    let mut atom_line = 1;
    for ch in text.chars() {
        match ch {
            '(' | ')' | ' ' | '\t' | '\r' | '\n' => {
                if !atom.is_empty() {
                    tokens.push(Token::Atom(std::mem::take(&mut atom), atom_line));
                }
                match ch {
                    '(' => tokens.push(Token::Open(line)),
                    ')' => tokens.push(Token::Close(line)),
                    '\n' => line += 1,
                    _ => {}
                }
            }
            _ => {
                if atom.is_empty() {
                    atom_line = line;
                }
                atom.push(ch);
            }
        }
    }
    if !atom.is_empty() {
        tokens.push(Token::Atom(atom, atom_line));
    }
    tokens
}

struct TreeParser {
    tokens: Vec<Token>,
    pos: usize,
    last_line: usize,
}

impl TreeParser {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<&Token> {
        let t = self.tokens.get(self.pos);
        if let Some(t) = t {
            self.pos += 1;
            self.last_line = match t {
                Token::Open(l) | Token::Close(l) | Token::Atom(_, l) => *l,
            };
        }
        t
    }

    /// Parses one `(LABEL child ...)` node, or unwraps a label-less wrapper
    /// `( tree )` around a single tree.
    fn parse_tree(&mut self, next_pos: &mut usize) -> Result<ParseTree, TreeError> {
        let open_line = match self.next() {
            Some(&Token::Open(l)) => l,
            Some(&Token::Close(l)) => return Err(TreeError::Unbalanced { line: l }),
            Some(Token::Atom(..)) => return Err(TreeError::LeafRoot),
            None => {
                return Err(TreeError::Unbalanced {
                    line: self.last_line,
                })
            }
        };
        match self.peek() {
            Some(&Token::Close(l)) => Err(TreeError::EmptyNode { line: l }),
            Some(Token::Open(_)) => {
                // Wrapper with empty label: must contain exactly one tree.
                let inner = self.parse_tree(next_pos)?;
                match self.next() {
                    Some(Token::Close(_)) => Ok(inner),
                    Some(&Token::Open(l)) | Some(&Token::Atom(_, l)) => {
                        Err(TreeError::UnlabelledNode { line: l })
                    }
                    None => Err(TreeError::Unbalanced {
                        line: self.last_line,
                    }),
                }
            }
            Some(Token::Atom(..)) => {
                let label = match self.next() {
                    Some(Token::Atom(a, _)) => a.clone(),
                    _ => unreachable!(),
                };
                let mut children = Vec::new();
                loop {
                    match self.peek() {
                        Some(Token::Open(_)) => {
                            children.push(self.parse_tree(next_pos)?);
                        }
                        Some(Token::Atom(..)) => {
                            let word = match self.next() {
                                Some(Token::Atom(a, _)) => a.clone(),
                                _ => unreachable!(),
                            };
                            children.push(ParseTree::Leaf {
                                word,
                                position: {
                                    *next_pos += 1;
                                    *next_pos
                                },
                            });
                        }
                        Some(Token::Close(_)) => {
                            self.next();
                            break;
                        }
                        None => return Err(TreeError::Unbalanced { line: open_line }),
                    }
                }
                if children.is_empty() {
                    return Err(TreeError::MissingChildren {
                        line: open_line,
                        label,
                    });
                }
                Ok(ParseTree::Node { label, children })
            }
            None => Err(TreeError::Unbalanced { line: open_line }),
        }
    }
}

/// Reads a whitespace-separated sequence of bracketed trees. Leaf positions
/// are assigned 1..n per tree, left to right.
pub fn read_bracketed(text: &str) -> Result<Vec<ParseTree>, TreeError> {
    let mut parser = TreeParser {
        tokens: tokenize(text),
        pos: 0,
        last_line: 1,
    };
    let mut trees = Vec::new();
    while parser.peek().is_some() {
        let mut next_pos = 0;
        trees.push(parser.parse_tree(&mut next_pos)?);
    }
    Ok(trees)
}

/// Loads trees from a file, or from every regular file in a directory
/// (sorted by name).
pub fn load_treebank(path: &Path) -> Result<Vec<ParseTree>, TreeError> {
    let mut files = Vec::new();
    if path.is_dir() {
        for entry in std::fs::read_dir(path)? {
            let p = entry?.path();
            if p.is_file() {
                files.push(p);
            }
        }
        files.sort();
    } else {
        files.push(path.to_path_buf());
    }
    let mut trees = Vec::new();
    for f in files {
        let text = std::fs::read_to_string(&f)?;
        trees.extend(read_bracketed(&text)?);
    }
    Ok(trees)
}

/// Converts a tree to CNF shape:
///
/// 1. subtrees labelled `-NONE-` or with an empty yield are deleted,
/// 2. unary nonterminal chains collapse to their bottom label,
/// 3. bare words beside siblings get a deterministic `X_<word>` preterminal,
/// 4. n-ary productions become right-branching with a shared `<X>_Cont`
///    continuation label:
///    `(X A B C D)` -> `(X A (X_Cont B (X_Cont C D)))`.
///
/// Leaf positions are renumbered 1..n. The result is idempotent under
/// re-binarization.
pub fn binarize(tree: &ParseTree) -> Result<ParseTree, TreeError> {
    if matches!(tree, ParseTree::Leaf { .. }) {
        return Err(TreeError::LeafRoot);
    }
    let pruned = prune_empty(tree).ok_or(TreeError::EmptyYield)?;
    let collapsed = collapse_unaries(pruned);
    let mut result = match collapsed {
        leaf @ ParseTree::Leaf { .. } => return Ok(wrap_leaf(leaf)),
        node => binarize_node(wrap_bare_leaves(node)),
    };
    let mut next = 0;
    renumber(&mut result, &mut next);
    Ok(result)
}

fn prune_empty(tree: &ParseTree) -> Option<ParseTree> {
    match tree {
        ParseTree::Leaf { .. } => Some(tree.clone()),
        ParseTree::Node { label, children } => {
            if label == EMPTY_LABEL {
                return None;
            }
            let kept: Vec<ParseTree> = children.iter().filter_map(prune_empty).collect();
            if kept.is_empty() {
                None
            } else {
                Some(ParseTree::Node {
                    label: label.clone(),
                    children: kept,
                })
            }
        }
    }
}

fn collapse_unaries(tree: ParseTree) -> ParseTree {
    match tree {
        leaf @ ParseTree::Leaf { .. } => leaf,
        ParseTree::Node {
            label,
            mut children,
        } => {
            if children.len() == 1 && matches!(children[0], ParseTree::Node { .. }) {
                return collapse_unaries(children.pop().unwrap());
            }
            ParseTree::Node {
                label,
                children: children.into_iter().map(collapse_unaries).collect(),
            }
        }
    }
}

fn wrap_leaf(leaf: ParseTree) -> ParseTree {
    let label = match &leaf {
        ParseTree::Leaf { word, .. } => format!("X_{word}"),
        ParseTree::Node { .. } => unreachable!(),
    };
    ParseTree::Node {
        label,
        children: vec![leaf],
    }
}

fn wrap_bare_leaves(tree: ParseTree) -> ParseTree {
    match tree {
        leaf @ ParseTree::Leaf { .. } => leaf,
        ParseTree::Node { label, children } => {
            if children.len() == 1 {
                return ParseTree::Node { label, children }; // preterminal
            }
            let children = children
                .into_iter()
                .map(|c| match c {
                    leaf @ ParseTree::Leaf { .. } => wrap_leaf(leaf),
                    node => wrap_bare_leaves(node),
                })
                .collect();
            ParseTree::Node { label, children }
        }
    }
}

fn binarize_node(tree: ParseTree) -> ParseTree {
    match tree {
        leaf @ ParseTree::Leaf { .. } => leaf,
        ParseTree::Node { label, children } => {
            if children.len() <= 2 {
                return ParseTree::Node {
                    label,
                    children: children.into_iter().map(binarize_node).collect(),
                };
            }
            let cont_label = format!("{label}_Cont");
            let mut iter = children.into_iter();
            let first = binarize_node(iter.next().unwrap());
            let rest: Vec<ParseTree> = iter.collect();
            ParseTree::Node {
                label,
                children: vec![first, build_continuation(&cont_label, rest)],
            }
        }
    }
}

fn build_continuation(label: &str, mut children: Vec<ParseTree>) -> ParseTree {
    if children.len() == 2 {
        let right = binarize_node(children.pop().unwrap());
        let left = binarize_node(children.pop().unwrap());
        return ParseTree::Node {
            label: label.to_string(),
            children: vec![left, right],
        };
    }
    let first = binarize_node(children.remove(0));
    ParseTree::Node {
        label: label.to_string(),
        children: vec![first, build_continuation(label, children)],
    }
}

fn renumber(tree: &mut ParseTree, next: &mut usize) {
    match tree {
        ParseTree::Leaf { position, .. } => {
            *next += 1;
            *position = *next;
        }
        ParseTree::Node { children, .. } => {
            for c in children {
                renumber(c, next);
            }
        }
    }
}

/// A tree as a set of labelled spans `(s, t, X)`, 1-based and inclusive.
/// Terminals are excluded; preterminals are included.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConstituentSet {
    pub sentence_length: usize,
    pub triples: BTreeSet<(usize, usize, String)>,
}

impl ConstituentSet {
    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Bare spans without labels.
    pub fn spans(&self) -> BTreeSet<(usize, usize)> {
        self.triples.iter().map(|&(s, t, _)| (s, t)).collect()
    }
}

/// Collects one `(start, end, label)` triple per nonterminal node.
pub fn to_constituents(tree: &ParseTree) -> ConstituentSet {
    let mut triples = BTreeSet::new();
    let mut next = 0;
    let (_, n) = collect_spans(tree, &mut next, &mut triples);
    ConstituentSet {
        sentence_length: n,
        triples,
    }
}

fn collect_spans(
    tree: &ParseTree,
    next: &mut usize,
    out: &mut BTreeSet<(usize, usize, String)>,
) -> (usize, usize) {
    match tree {
        ParseTree::Leaf { .. } => {
            *next += 1;
            (*next, *next)
        }
        ParseTree::Node { label, children } => {
            let mut start = usize::MAX;
            let mut end = 0;
            for c in children {
                let (s, t) = collect_spans(c, next, out);
                start = start.min(s);
                end = end.max(t);
            }
            out.insert((start, end, label.clone()));
            (start, end)
        }
    }
}
