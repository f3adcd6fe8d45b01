//! Players, payoff representations and horizon-truncated Gale-Stewart games.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::borel::BorelCode;
use crate::tree::{cylinder_contains, Horizon, Node, Tree, TreeError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("tree depth bound {depth} is below the horizon {horizon}")]
    TreeTooShallow { depth: usize, horizon: usize },
    #[error("{role} node {node} is not in the game tree")]
    NodeNotInTree { node: Node, role: &'static str },
    #[error("accepted node {node} is not a leaf at the horizon")]
    AcceptNotLeaf { node: Node },
    #[error("malformed leaf {leaf}: not a depth-H node of the game tree")]
    MalformedLeaf { leaf: Node },
    #[error("Borel code nests {depth} levels deep, above the bound {bound}")]
    CodeTooDeep { depth: usize, bound: usize },
}

/// Default bound on Borel-code nesting accepted by [`Game::new`].
pub const MAX_CODE_DEPTH: usize = 8;

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub enum Player {
    Zero,
    One,
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::Zero, Player::One];

    pub fn opponent(self) -> Player {
        match self {
            Player::Zero => Player::One,
            Player::One => Player::Zero,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Player::Zero => 0,
            Player::One => 1,
        }
    }

    pub fn from_index(i: usize) -> Option<Player> {
        match i {
            0 => Some(Player::Zero),
            1 => Some(Player::One),
            _ => None,
        }
    }

    /// The player who moves at a position of the given length.
    pub fn to_move_at(len: usize) -> Player {
        if len % 2 == 0 {
            Player::Zero
        } else {
            Player::One
        }
    }
}

impl fmt::Display for Player {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.index())
    }
}

/// Whether `x` is a position of `p`: player zero moves at even lengths,
/// starting with the empty position.
pub fn is_position(x: &Node, p: Player) -> bool {
    x.len() % 2 == p.index()
}

/// The payoff set `P`, in one of four representations.
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum Payoff {
    /// Accepted depth-H leaves.
    Clopen(BTreeSet<Node>),
    /// A branch is in `P` iff no generator is a prefix of it.
    Closed(BTreeSet<Node>),
    /// A branch is in `P` iff some generator is a prefix of it.
    Open(BTreeSet<Node>),
    Borel(BorelCode),
}

impl Payoff {
    pub fn kind(&self) -> &'static str {
        match self {
            Payoff::Clopen(_) => "clopen",
            Payoff::Closed(_) => "closed",
            Payoff::Open(_) => "open",
            Payoff::Borel(_) => "borel",
        }
    }

    /// Membership of the branch through `leaf`; no validation.
    pub fn contains(&self, leaf: &Node) -> bool {
        match self {
            Payoff::Clopen(accept) => accept.contains(leaf),
            Payoff::Closed(gens) => !gens.iter().any(|g| cylinder_contains(g, leaf)),
            Payoff::Open(gens) => gens.iter().any(|g| cylinder_contains(g, leaf)),
            Payoff::Borel(code) => code.eval(leaf),
        }
    }

    /// The complementary payoff over the same tree.
    pub fn complement(&self, tree: &Tree) -> Payoff {
        match self {
            Payoff::Clopen(accept) => Payoff::Clopen(
                tree.leaves()
                    .filter(|l| !accept.contains(*l))
                    .cloned()
                    .collect(),
            ),
            Payoff::Closed(g) => Payoff::Open(g.clone()),
            Payoff::Open(g) => Payoff::Closed(g.clone()),
            Payoff::Borel(code) => Payoff::Borel(BorelCode::Complement(Box::new(code.clone()))),
        }
    }

    /// The extensionally equal clopen payoff (accepted leaves of `tree`).
    pub fn to_clopen(&self, tree: &Tree) -> Payoff {
        Payoff::Clopen(self.accepted_leaves(tree))
    }

    pub fn accepted_leaves(&self, tree: &Tree) -> BTreeSet<Node> {
        tree.leaves().filter(|l| self.contains(l)).cloned().collect()
    }
}

/// Drops every generator that has a proper prefix also in the set.
pub fn normalize_generators(gens: &BTreeSet<Node>) -> BTreeSet<Node> {
    gens.iter()
        .filter(|g| {
            !(0..g.len()).any(|n| gens.contains(&g.prefix(n)))
        })
        .cloned()
        .collect()
}

/// A game `(T, P)` truncated at horizon `H`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Game {
    tree: Arc<Tree>,
    horizon: Horizon,
    payoff: Payoff,
}

impl Game {
    /// Validates that the tree is pruned to the horizon and that the payoff
    /// only mentions nodes of the tree. Generator sets are normalized.
    pub fn new(tree: impl Into<Arc<Tree>>, horizon: Horizon, payoff: Payoff) -> Result<Self, GameError> {
        let mut tree: Arc<Tree> = tree.into();
        let h = horizon.get();
        if tree.depth_bound() < h {
            return Err(GameError::TreeTooShallow {
                depth: tree.depth_bound(),
                horizon: h,
            });
        }
        if tree.depth_bound() > h {
            tree = Arc::new(tree.level_restrict(h));
        }
        tree.check_pruned(horizon)?;
        let payoff = match payoff {
            Payoff::Clopen(accept) => {
                for node in &accept {
                    if node.len() != h || !tree.contains(node) {
                        return Err(GameError::AcceptNotLeaf { node: node.clone() });
                    }
                }
                Payoff::Clopen(accept)
            }
            Payoff::Closed(gens) => Payoff::Closed(check_generators(&tree, gens)?),
            Payoff::Open(gens) => Payoff::Open(check_generators(&tree, gens)?),
            Payoff::Borel(code) => {
                let depth = code.nesting_depth();
                if depth > MAX_CODE_DEPTH {
                    return Err(GameError::CodeTooDeep {
                        depth,
                        bound: MAX_CODE_DEPTH,
                    });
                }
                for node in code.referenced_nodes() {
                    if !tree.contains(node) {
                        return Err(GameError::NodeNotInTree {
                            node: node.clone(),
                            role: "code",
                        });
                    }
                }
                Payoff::Borel(code)
            }
        };
        Ok(Game {
            tree,
            horizon,
            payoff,
        })
    }

    pub fn tree(&self) -> &Tree {
        &self.tree
    }

    pub fn tree_arc(&self) -> &Arc<Tree> {
        &self.tree
    }

    pub fn horizon(&self) -> Horizon {
        self.horizon
    }

    pub fn payoff(&self) -> &Payoff {
        &self.payoff
    }

    /// Same tree, different payoff.
    pub fn with_payoff(&self, payoff: Payoff) -> Result<Game, GameError> {
        Game::new(self.tree.clone(), self.horizon, payoff)
    }

    /// Same tree with the complementary payoff.
    pub fn complement(&self) -> Game {
        Game {
            tree: self.tree.clone(),
            horizon: self.horizon,
            payoff: self.payoff.complement(&self.tree),
        }
    }

    /// The game with its payoff expanded to an accepted-leaf set.
    pub fn to_clopen(&self) -> Game {
        Game {
            tree: self.tree.clone(),
            horizon: self.horizon,
            payoff: self.payoff.to_clopen(&self.tree),
        }
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Node> + '_ {
        self.tree.leaves()
    }
}

fn check_generators(tree: &Tree, gens: BTreeSet<Node>) -> Result<BTreeSet<Node>, GameError> {
    for g in &gens {
        if !tree.contains(g) {
            return Err(GameError::NodeNotInTree {
                node: g.clone(),
                role: "generator",
            });
        }
    }
    Ok(normalize_generators(&gens))
}

/// The winner of the play ending at `leaf`.
pub fn eval_payoff(g: &Game, leaf: &Node) -> Result<Player, GameError> {
    if leaf.len() != g.horizon.get() || !g.tree.contains(leaf) {
        return Err(GameError::MalformedLeaf { leaf: leaf.clone() });
    }
    Ok(if g.payoff.contains(leaf) {
        Player::Zero
    } else {
        Player::One
    })
}

/// Least `d >= |x|` such that, below every depth-`d` descendant of `x`, all
/// leaves have the same winner.
pub fn decision_depth(g: &Game, x: &Node) -> Option<usize> {
    if !g.tree.contains(x) {
        return None;
    }
    let h = g.horizon.get();
    let outcome: BTreeMap<&Node, bool> = g
        .tree
        .level_below(x, h)
        .map(|leaf| (leaf, g.payoff.contains(leaf)))
        .collect();
    (x.len()..=h).find(|&d| {
        let mut seen: BTreeMap<Node, bool> = BTreeMap::new();
        outcome.iter().all(|(leaf, &won)| {
            let key = leaf.prefix(d);
            *seen.entry(key).or_insert(won) == won
        })
    })
}
