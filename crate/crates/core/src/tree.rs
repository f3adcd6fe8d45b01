//! Letters, finite sequences and bounded-depth prefix-closed trees.
//!
//! Nodes are ordered first by length and then lexicographically, which makes
//! every level of a [`Tree`] a contiguous range of its node set and gives
//! trees themselves a canonical total order (lexicographic on the sorted node
//! list). Both orders are relied on for deterministic enumeration.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::caps::Caps;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TreeError {
    #[error("alphabet size must be at least 1")]
    EmptyAlphabet,
    #[error("horizon must be at least 1")]
    ZeroHorizon,
    #[error("node {node} uses a letter outside the alphabet of size {alphabet}")]
    LetterOutOfRange { node: Node, alphabet: u32 },
    #[error("node {node} is deeper than the depth bound {depth}")]
    TooDeep { node: Node, depth: usize },
    #[error("node {node} is present but its parent is not")]
    NotPrefixClosed { node: Node },
    #[error("node {node} has no extension below the horizon")]
    Unpruned { node: Node },
    #[error("tree is empty")]
    EmptyTree,
    #[error("enumerating {what} would produce {count} objects, above the cap of {cap}")]
    CapExceeded {
        what: &'static str,
        count: String,
        cap: u64,
    },
}

/// One symbol of an alphabet `{0, .., alphabet_size - 1}`.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Serialize, Deserialize)]
pub struct Letter(pub u32);

impl Letter {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A finite sequence of letters; a position in a game.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Node(Vec<Letter>);

impl Node {
    pub fn new(letters: Vec<Letter>) -> Self {
        Node(letters)
    }

    /// The empty sequence.
    pub fn root() -> Self {
        Node(Vec::new())
    }

    pub fn from_indices(indices: &[u32]) -> Self {
        Node(indices.iter().map(|&i| Letter(i)).collect())
    }

    /// Parses a digit string such as `"010"`; the empty string is the root.
    pub fn parse_digits(s: &str) -> Option<Self> {
        s.chars()
            .map(|c| c.to_digit(10).map(Letter))
            .collect::<Option<Vec<_>>>()
            .map(Node)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn letters(&self) -> &[Letter] {
        &self.0
    }

    pub fn last(&self) -> Option<Letter> {
        self.0.last().copied()
    }

    pub fn parent(&self) -> Option<Node> {
        if self.0.is_empty() {
            None
        } else {
            Some(Node(self.0[..self.0.len() - 1].to_vec()))
        }
    }

    pub fn child(&self, letter: Letter) -> Node {
        let mut v = Vec::with_capacity(self.0.len() + 1);
        v.extend_from_slice(&self.0);
        v.push(letter);
        Node(v)
    }

    pub fn concat(&self, other: &Node) -> Node {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Node(v)
    }

    /// The prefix of length `n` (the whole node when `n >= len`).
    pub fn prefix(&self, n: usize) -> Node {
        Node(self.0[..n.min(self.0.len())].to_vec())
    }

    /// The letters after the first `n`.
    pub fn suffix_from(&self, n: usize) -> Node {
        Node(self.0[n.min(self.0.len())..].to_vec())
    }

    /// `self ⪯ other` in the prefix order.
    pub fn is_prefix_of(&self, other: &Node) -> bool {
        other.0.starts_with(&self.0)
    }

    /// Every prefix of `self`, from the root up to `self` itself.
    pub fn prefixes(&self) -> impl Iterator<Item = Node> + '_ {
        (0..=self.0.len()).map(move |n| self.prefix(n))
    }

    /// Renders as a digit string (`""` for the root). Only meaningful for
    /// alphabets of at most ten letters.
    pub fn to_digits(&self) -> String {
        self.0
            .iter()
            .map(|l| char::from_digit(l.0, 10).unwrap_or('?'))
            .collect()
    }

    fn level_bounds(&self, extra: usize) -> (Node, Node) {
        let mut lo = self.0.clone();
        let mut hi = self.0.clone();
        lo.extend(std::iter::repeat(Letter(0)).take(extra));
        hi.extend(std::iter::repeat(Letter(u32::MAX)).take(extra));
        (Node(lo), Node(hi))
    }
}

impl Ord for Node {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .len()
            .cmp(&other.0.len())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("ε");
        }
        if self.0.iter().all(|l| l.0 < 10) {
            f.write_str(&self.to_digits())
        } else {
            let parts: Vec<String> = self.0.iter().map(|l| l.0.to_string()).collect();
            write!(f, "[{}]", parts.join(","))
        }
    }
}

impl fmt::Debug for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl From<&[u32]> for Node {
    fn from(v: &[u32]) -> Self {
        Node::from_indices(v)
    }
}

/// Truncation depth of a game; depth-H nodes stand for the cylinders of
/// infinite branches through them.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct Horizon(usize);

impl Horizon {
    pub fn new(h: usize) -> Result<Self, TreeError> {
        if h == 0 {
            Err(TreeError::ZeroHorizon)
        } else {
            Ok(Horizon(h))
        }
    }

    pub fn get(self) -> usize {
        self.0
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A finite prefix-closed set of nodes of bounded depth.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Tree {
    alphabet_size: u32,
    depth_bound: usize,
    nodes: BTreeSet<Node>,
}

impl Tree {
    /// Validates alphabet, depth and prefix-closure.
    pub fn new(
        alphabet_size: u32,
        depth_bound: usize,
        nodes: impl IntoIterator<Item = Node>,
    ) -> Result<Self, TreeError> {
        if alphabet_size == 0 {
            return Err(TreeError::EmptyAlphabet);
        }
        let nodes: BTreeSet<Node> = nodes.into_iter().collect();
        for node in &nodes {
            if node.len() > depth_bound {
                return Err(TreeError::TooDeep {
                    node: node.clone(),
                    depth: depth_bound,
                });
            }
            if node.letters().iter().any(|l| l.0 >= alphabet_size) {
                return Err(TreeError::LetterOutOfRange {
                    node: node.clone(),
                    alphabet: alphabet_size,
                });
            }
            if let Some(p) = node.parent() {
                if !nodes.contains(&p) {
                    return Err(TreeError::NotPrefixClosed { node: node.clone() });
                }
            }
        }
        Ok(Tree {
            alphabet_size,
            depth_bound,
            nodes,
        })
    }

    /// Builds the prefix closure of `nodes`.
    pub fn closure(
        alphabet_size: u32,
        depth_bound: usize,
        nodes: impl IntoIterator<Item = Node>,
    ) -> Result<Self, TreeError> {
        let mut all = BTreeSet::new();
        for n in nodes {
            for p in n.prefixes() {
                all.insert(p);
            }
        }
        Tree::new(alphabet_size, depth_bound, all)
    }

    pub(crate) fn from_parts_unchecked(
        alphabet_size: u32,
        depth_bound: usize,
        nodes: BTreeSet<Node>,
    ) -> Self {
        debug_assert!(nodes
            .iter()
            .all(|n| n.parent().map_or(true, |p| nodes.contains(&p))));
        Tree {
            alphabet_size,
            depth_bound,
            nodes,
        }
    }

    pub fn empty(alphabet_size: u32, depth_bound: usize) -> Self {
        Tree {
            alphabet_size: alphabet_size.max(1),
            depth_bound,
            nodes: BTreeSet::new(),
        }
    }

    /// The complete tree of the given depth.
    pub fn full(alphabet_size: u32, depth: usize) -> Self {
        let mut nodes = BTreeSet::new();
        let mut level = vec![Node::root()];
        for _ in 0..depth {
            let mut next = Vec::with_capacity(level.len() * alphabet_size as usize);
            for n in &level {
                for a in 0..alphabet_size {
                    next.push(n.child(Letter(a)));
                }
            }
            nodes.extend(level);
            level = next;
        }
        nodes.extend(level);
        Tree {
            alphabet_size,
            depth_bound: depth,
            nodes,
        }
    }

    pub fn alphabet_size(&self) -> u32 {
        self.alphabet_size
    }

    pub fn depth_bound(&self) -> usize {
        self.depth_bound
    }

    pub fn nodes(&self) -> &BTreeSet<Node> {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, x: &Node) -> bool {
        self.nodes.contains(x)
    }

    /// One-letter extensions of `x` present in the tree, in canonical order.
    pub fn children<'a>(&'a self, x: &Node) -> impl Iterator<Item = &'a Node> + 'a {
        let (lo, hi) = x.level_bounds(1);
        self.nodes.range(lo..=hi)
    }

    pub fn child_letters(&self, x: &Node) -> Vec<Letter> {
        self.children(x).filter_map(|c| c.last()).collect()
    }

    pub fn has_child(&self, x: &Node, a: Letter) -> bool {
        self.nodes.contains(&x.child(a))
    }

    /// Nodes of length exactly `n`.
    pub fn level(&self, n: usize) -> impl Iterator<Item = &Node> + '_ {
        let (lo, hi) = Node::root().level_bounds(n);
        self.nodes.range(lo..=hi)
    }

    /// Nodes of length exactly `n` that extend `x`.
    pub fn level_below<'a>(&'a self, x: &Node, n: usize) -> impl Iterator<Item = &'a Node> + 'a {
        let extra = n.saturating_sub(x.len());
        let (lo, hi) = x.level_bounds(extra);
        let empty = n < x.len();
        self.nodes.range(lo..=hi).filter(move |_| !empty)
    }

    /// Nodes at the depth bound.
    pub fn leaves(&self) -> impl Iterator<Item = &Node> + '_ {
        self.level(self.depth_bound)
    }

    /// All nodes of the tree extending `x` (including `x`).
    pub fn descendants<'a>(&'a self, x: &'a Node) -> impl Iterator<Item = &'a Node> + 'a {
        (x.len()..=self.depth_bound).flat_map(move |n| self.level_below(x, n))
    }

    /// `{ y | x·y ∈ t }`, with the depth bound reduced by `|x|`.
    pub fn sub_at(&self, x: &Node) -> Tree {
        let depth = self.depth_bound.saturating_sub(x.len());
        if !self.contains(x) {
            return Tree::empty(self.alphabet_size, depth);
        }
        let k = x.len();
        let nodes = self.descendants(x).map(|y| y.suffix_from(k)).collect();
        Tree::from_parts_unchecked(self.alphabet_size, depth, nodes)
    }

    /// The nodes of length at most `n`.
    pub fn level_restrict(&self, n: usize) -> Tree {
        let depth = n.min(self.depth_bound);
        let nodes = self
            .nodes
            .iter()
            .take_while(|x| x.len() <= depth)
            .cloned()
            .collect();
        Tree::from_parts_unchecked(self.alphabet_size, depth, nodes)
    }

    /// True iff the tree is nonempty and every node shorter than `h` has a
    /// one-letter extension.
    pub fn is_pruned_to_horizon(&self, h: Horizon) -> bool {
        self.first_unpruned(h).is_none() && !self.is_empty()
    }

    /// The first node (canonical order) shorter than `h` without children.
    pub fn first_unpruned(&self, h: Horizon) -> Option<&Node> {
        self.nodes
            .iter()
            .take_while(|x| x.len() < h.get())
            .find(|x| self.children(x).next().is_none())
    }

    /// Checks pruned-to-horizon and reports the offending node.
    pub fn check_pruned(&self, h: Horizon) -> Result<(), TreeError> {
        if self.is_empty() {
            return Err(TreeError::EmptyTree);
        }
        match self.first_unpruned(h) {
            Some(node) => Err(TreeError::Unpruned { node: node.clone() }),
            None => Ok(()),
        }
    }

    /// Same nodes with a different (larger or equal) alphabet declaration.
    pub fn with_alphabet(mut self, alphabet_size: u32) -> Tree {
        debug_assert!(alphabet_size >= self.alphabet_size);
        self.alphabet_size = alphabet_size;
        self
    }

    /// Same nodes with a new depth bound, which must not cut nodes off.
    pub fn with_depth_bound(mut self, depth_bound: usize) -> Tree {
        debug_assert!(self.nodes.iter().all(|n| n.len() <= depth_bound));
        self.depth_bound = depth_bound;
        self
    }
}

impl Ord for Tree {
    fn cmp(&self, other: &Self) -> Ordering {
        self.nodes
            .iter()
            .cmp(other.nodes.iter())
            .then_with(|| self.depth_bound.cmp(&other.depth_bound))
            .then_with(|| self.alphabet_size.cmp(&other.alphabet_size))
    }
}

impl PartialOrd for Tree {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.nodes.iter().map(|n| n.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// `x ⪯ leaf`: the basic cylinder of `x` contains the branch through `leaf`.
pub fn cylinder_contains(x: &Node, leaf: &Node) -> bool {
    x.is_prefix_of(leaf)
}

/// Number of trees (including the empty one) of the given depth bound,
/// via `t(0) = 2`, `t(d) = 1 + t(d-1)^a`. `None` on overflow.
pub fn count_trees(alphabet_size: u32, depth: usize) -> Option<u128> {
    let mut t: u128 = 2;
    for _ in 0..depth {
        t = t.checked_pow(alphabet_size)?.checked_add(1)?;
    }
    Some(t)
}

/// Every tree over the alphabet with the given depth bound, in canonical order.
pub fn enumerate_trees(
    alphabet_size: u32,
    depth: usize,
    caps: &Caps,
) -> Result<Vec<Tree>, TreeError> {
    if alphabet_size == 0 {
        return Err(TreeError::EmptyAlphabet);
    }
    match count_trees(alphabet_size, depth) {
        Some(c) if c <= caps.max_enumeration as u128 => {}
        other => {
            return Err(TreeError::CapExceeded {
                what: "trees",
                count: other.map_or_else(|| "more than 2^128".into(), |c| c.to_string()),
                cap: caps.max_enumeration,
            })
        }
    }
    // Nonempty trees of depth d as node sets relative to their root.
    fn nonempty(alphabet: u32, depth: usize) -> Vec<BTreeSet<Node>> {
        if depth == 0 {
            return vec![BTreeSet::from([Node::root()])];
        }
        let below = nonempty(alphabet, depth - 1);
        let mut acc: Vec<BTreeSet<Node>> = vec![BTreeSet::from([Node::root()])];
        for a in 0..alphabet {
            let prefix = Node::from_indices(&[a]);
            let mut next = Vec::with_capacity(acc.len() * (below.len() + 1));
            for partial in &acc {
                next.push(partial.clone());
                for sub in &below {
                    let mut s = partial.clone();
                    s.extend(sub.iter().map(|y| prefix.concat(y)));
                    next.push(s);
                }
            }
            acc = next;
        }
        acc
    }
    let mut out: Vec<Tree> = std::iter::once(BTreeSet::new())
        .chain(nonempty(alphabet_size, depth))
        .map(|nodes| Tree::from_parts_unchecked(alphabet_size, depth, nodes))
        .collect();
    out.sort();
    Ok(out)
}
