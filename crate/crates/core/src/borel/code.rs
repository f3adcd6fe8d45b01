//! Finite Borel codes over cylinder and closed generators.

use std::collections::BTreeSet;
use std::fmt;

use crate::tree::{cylinder_contains, Node};

/// Syntax of a payoff set built from basic sets by complement and finite union.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum BorelCode {
    /// The basic open (and closed) cylinder of branches through a node.
    Cylinder(Node),
    /// Branches avoiding every generator cylinder.
    ClosedGen(BTreeSet<Node>),
    Complement(Box<BorelCode>),
    /// Nonempty finite union.
    Union(Vec<BorelCode>),
}

impl BorelCode {
    pub fn cylinder(node: Node) -> Self {
        BorelCode::Cylinder(node)
    }

    pub fn closed(gens: impl IntoIterator<Item = Node>) -> Self {
        BorelCode::ClosedGen(gens.into_iter().collect())
    }

    pub fn complement(self) -> Self {
        BorelCode::Complement(Box::new(self))
    }

    /// `None` for an empty child list.
    pub fn union(children: Vec<BorelCode>) -> Option<Self> {
        if children.is_empty() {
            None
        } else {
            Some(BorelCode::Union(children))
        }
    }

    /// Membership of the branch through `leaf`.
    pub fn eval(&self, leaf: &Node) -> bool {
        match self {
            BorelCode::Cylinder(x) => cylinder_contains(x, leaf),
            BorelCode::ClosedGen(gens) => !gens.iter().any(|g| cylinder_contains(g, leaf)),
            BorelCode::Complement(c) => !c.eval(leaf),
            BorelCode::Union(cs) => cs.iter().any(|c| c.eval(leaf)),
        }
    }

    /// Constructor layers above the generators (generators have depth 0).
    pub fn nesting_depth(&self) -> usize {
        match self {
            BorelCode::Cylinder(_) | BorelCode::ClosedGen(_) => 0,
            BorelCode::Complement(c) => 1 + c.nesting_depth(),
            BorelCode::Union(cs) => 1 + cs.iter().map(|c| c.nesting_depth()).max().unwrap_or(0),
        }
    }

    pub fn referenced_nodes(&self) -> Vec<&Node> {
        let mut out = Vec::new();
        self.collect_nodes(&mut out);
        out
    }

    fn collect_nodes<'a>(&'a self, out: &mut Vec<&'a Node>) {
        match self {
            BorelCode::Cylinder(x) => out.push(x),
            BorelCode::ClosedGen(gens) => out.extend(gens.iter()),
            BorelCode::Complement(c) => c.collect_nodes(out),
            BorelCode::Union(cs) => cs.iter().for_each(|c| c.collect_nodes(out)),
        }
    }

    /// Length of the longest referenced node.
    pub fn max_node_len(&self) -> usize {
        self.referenced_nodes().iter().map(|n| n.len()).max().unwrap_or(0)
    }
}

/// Membership of the branch through `leaf` in the coded set.
pub fn eval_code(code: &BorelCode, leaf: &Node) -> bool {
    code.eval(leaf)
}

impl fmt::Display for BorelCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BorelCode::Cylinder(x) => write!(f, "cyl({x})"),
            BorelCode::ClosedGen(gens) => {
                let parts: Vec<String> = gens.iter().map(|g| g.to_string()).collect();
                write!(f, "closed{{{}}}", parts.join(","))
            }
            BorelCode::Complement(c) => write!(f, "¬{c}"),
            BorelCode::Union(cs) => {
                let parts: Vec<String> = cs.iter().map(|c| c.to_string()).collect();
                write!(f, "∪[{}]", parts.join(", "))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> Node {
        Node::parse_digits(s).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert!(eval_code(&BorelCode::cylinder(n("0")), &n("01")));
        assert!(!eval_code(&BorelCode::cylinder(n("0")).complement(), &n("01")));
        let u = BorelCode::union(vec![BorelCode::cylinder(n("00")), BorelCode::cylinder(n("11"))]).unwrap();
        assert!(eval_code(&u, &n("11")));
        assert!(!eval_code(&u, &n("10")));
        assert!(eval_code(&BorelCode::closed([n("1")]), &n("01")));
        assert!(!eval_code(&BorelCode::closed([n("1")]), &n("10")));
    }

    #[test]
    fn depth_counts_constructors() {
        let atom = BorelCode::cylinder(n("0"));
        assert_eq!(atom.nesting_depth(), 0);
        assert_eq!(atom.clone().complement().nesting_depth(), 1);
        let u = BorelCode::Union(vec![atom.clone().complement(), atom]);
        assert_eq!(u.nesting_depth(), 2);
        assert!(BorelCode::union(vec![]).is_none());
    }
}
