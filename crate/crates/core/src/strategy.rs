//! Prestrategies, quasistrategies and strategies as functions from own
//! positions to sets of one-letter extensions, and the map sending each of
//! them to its tree of consistent positions.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::caps::Caps;
use crate::game::{eval_payoff, is_position, Game, Player};
use crate::tree::{Horizon, Letter, Node, Tree};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StrategyError {
    #[error("{node} is not a position of player {player}")]
    NotOwnPosition { node: Node, player: Player },
    #[error("{node} is not a node of the tree below the horizon")]
    KeyOutsideTree { node: Node },
    #[error("move {letter} at {node} leaves the tree")]
    MoveOutsideTree { node: Node, letter: Letter },
    #[error("no move is allowed at reachable position {node}")]
    EmptyChoice { node: Node },
    #[error("more than one move is allowed at reachable position {node}")]
    NotSingleton { node: Node },
    #[error("{count} strategies exceed the enumeration cap {cap}")]
    CapExceeded { count: String, cap: u64 },
}

/// Choice sets at own positions; absent keys mean "no move".
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct PreStrategy {
    player: Player,
    choices: BTreeMap<Node, BTreeSet<Letter>>,
}

impl PreStrategy {
    /// Checks every key is an own position of `tree` shorter than `h` and
    /// every chosen letter stays in the tree. Empty sets are dropped.
    pub fn new(
        player: Player,
        choices: BTreeMap<Node, BTreeSet<Letter>>,
        tree: &Tree,
        h: Horizon,
    ) -> Result<Self, StrategyError> {
        for (node, letters) in &choices {
            if !is_position(node, player) {
                return Err(StrategyError::NotOwnPosition {
                    node: node.clone(),
                    player,
                });
            }
            if node.len() >= h.get() || !tree.contains(node) {
                return Err(StrategyError::KeyOutsideTree { node: node.clone() });
            }
            for &letter in letters {
                if !tree.has_child(node, letter) {
                    return Err(StrategyError::MoveOutsideTree {
                        node: node.clone(),
                        letter,
                    });
                }
            }
        }
        Ok(Self::from_choices_unchecked(player, choices))
    }

    pub(crate) fn from_choices_unchecked(
        player: Player,
        choices: BTreeMap<Node, BTreeSet<Letter>>,
    ) -> Self {
        let choices = choices.into_iter().filter(|(_, s)| !s.is_empty()).collect();
        PreStrategy { player, choices }
    }

    /// The prestrategy allowing nothing; vacuously winning.
    pub fn empty(player: Player) -> Self {
        PreStrategy {
            player,
            choices: BTreeMap::new(),
        }
    }

    /// Allows every move at every own position.
    pub fn full(player: Player, tree: &Tree, h: Horizon) -> Self {
        let choices = own_positions(tree, h, player)
            .into_iter()
            .map(|x| {
                let letters = tree.child_letters(&x).into_iter().collect();
                (x, letters)
            })
            .collect();
        Self::from_choices_unchecked(player, choices)
    }

    pub fn player(&self) -> Player {
        self.player
    }

    pub fn choices(&self) -> &BTreeMap<Node, BTreeSet<Letter>> {
        &self.choices
    }

    pub fn choice_set(&self, x: &Node) -> Option<&BTreeSet<Letter>> {
        self.choices.get(x)
    }

    pub fn allows(&self, x: &Node, a: Letter) -> bool {
        self.choices.get(x).map_or(false, |s| s.contains(&a))
    }

    /// Keeps only the keys of length `< n`.
    pub fn restrict_levels(&self, n: usize) -> PreStrategy {
        PreStrategy {
            player: self.player,
            choices: self
                .choices
                .iter()
                .filter(|(x, _)| x.len() < n)
                .map(|(x, s)| (x.clone(), s.clone()))
                .collect(),
        }
    }

    /// Pointwise inclusion of choice sets.
    pub fn is_sub_of(&self, other: &PreStrategy) -> bool {
        self.player == other.player
            && self.choices.iter().all(|(x, s)| {
                other
                    .choices
                    .get(x)
                    .map_or(false, |t| s.is_subset(t))
            })
    }
}

/// A prestrategy with a nonempty choice at every reachable own position.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct QuasiStrategy(PreStrategy);

impl QuasiStrategy {
    pub fn new(pre: PreStrategy, tree: &Tree, h: Horizon) -> Result<Self, StrategyError> {
        if let Some(node) = first_reachable_gap(&pre, tree, h, |s| s.is_empty()) {
            return Err(StrategyError::EmptyChoice { node });
        }
        Ok(QuasiStrategy(pre))
    }

    pub fn full(player: Player, tree: &Tree, h: Horizon) -> Self {
        QuasiStrategy(PreStrategy::full(player, tree, h))
    }

    pub fn pre(&self) -> &PreStrategy {
        &self.0
    }

    pub fn player(&self) -> Player {
        self.0.player
    }

    pub fn into_pre(self) -> PreStrategy {
        self.0
    }
}

/// A quasistrategy with exactly one move at every reachable own position.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Strategy(QuasiStrategy);

impl Strategy {
    pub fn new(pre: PreStrategy, tree: &Tree, h: Horizon) -> Result<Self, StrategyError> {
        let quasi = QuasiStrategy::new(pre, tree, h)?;
        if let Some(node) = first_reachable_gap(&quasi.0, tree, h, |s| s.len() > 1) {
            return Err(StrategyError::NotSingleton { node });
        }
        Ok(Strategy(quasi))
    }

    /// Builds a strategy from one move per position, validating it.
    pub fn from_moves(
        player: Player,
        moves: BTreeMap<Node, Letter>,
        tree: &Tree,
        h: Horizon,
    ) -> Result<Self, StrategyError> {
        let choices = moves
            .into_iter()
            .map(|(x, a)| (x, BTreeSet::from([a])))
            .collect();
        Strategy::new(PreStrategy::new(player, choices, tree, h)?, tree, h)
    }

    pub(crate) fn from_moves_unchecked(player: Player, moves: BTreeMap<Node, Letter>) -> Self {
        let choices = moves
            .into_iter()
            .map(|(x, a)| (x, BTreeSet::from([a])))
            .collect();
        Strategy(QuasiStrategy(PreStrategy::from_choices_unchecked(
            player, choices,
        )))
    }

    /// Restricts `pre` to its reachable positions and fills every remaining
    /// own position with the canonical least letter (least allowed letter
    /// where `pre` offers several).
    pub fn complete_canonically(pre: &PreStrategy, tree: &Tree, h: Horizon) -> Strategy {
        let moves = own_positions(tree, h, pre.player)
            .into_iter()
            .filter_map(|x| {
                let a = pre
                    .choice_set(&x)
                    .and_then(|s| s.iter().next().copied())
                    .or_else(|| tree.child_letters(&x).first().copied())?;
                Some((x, a))
            })
            .collect();
        Strategy::from_moves_unchecked(pre.player, moves)
    }

    pub fn player(&self) -> Player {
        self.0 .0.player
    }

    pub fn pre(&self) -> &PreStrategy {
        &self.0 .0
    }

    pub fn quasi(&self) -> &QuasiStrategy {
        &self.0
    }

    /// The move at `x`, if one is assigned.
    pub fn move_at(&self, x: &Node) -> Option<Letter> {
        self.0 .0.choices.get(x).and_then(|s| s.iter().next().copied())
    }

    /// `(position, move)` pairs in canonical order.
    pub fn moves(&self) -> impl Iterator<Item = (&Node, Letter)> + '_ {
        self.0
             .0
            .choices
            .iter()
            .filter_map(|(x, s)| s.iter().next().map(|&a| (x, a)))
    }
}

fn first_reachable_gap(
    pre: &PreStrategy,
    tree: &Tree,
    h: Horizon,
    bad: impl Fn(&BTreeSet<Letter>) -> bool,
) -> Option<Node> {
    let empty = BTreeSet::new();
    strategy_subtree(pre, tree, h)
        .nodes()
        .iter()
        .filter(|x| x.len() < h.get() && is_position(x, pre.player))
        .find(|x| bad(pre.choice_set(x).unwrap_or(&empty)))
        .cloned()
}

/// Positions of `p` in `tree` shorter than the horizon, in canonical order.
pub fn own_positions(tree: &Tree, h: Horizon, p: Player) -> Vec<Node> {
    tree.nodes()
        .iter()
        .take_while(|x| x.len() < h.get())
        .filter(|x| is_position(x, p))
        .cloned()
        .collect()
}

/// Nodes reachable when the strategy's own moves stay inside its choice sets
/// and the opponent moves freely.
pub fn strategy_subtree(s: &PreStrategy, t: &Tree, h: Horizon) -> Tree {
    let mut nodes = BTreeSet::new();
    if !t.contains(&Node::root()) {
        return Tree::empty(t.alphabet_size(), h.get());
    }
    let mut stack = vec![Node::root()];
    while let Some(x) = stack.pop() {
        if x.len() < h.get() {
            let own = is_position(&x, s.player);
            for child in t.children(&x) {
                let a = child.last().expect("child has a last letter");
                if !own || s.allows(&x, a) {
                    stack.push(child.clone());
                }
            }
        }
        nodes.insert(x);
    }
    Tree::from_parts_unchecked(t.alphabet_size(), h.get(), nodes)
}

/// Depth-H nodes of the strategy subtree.
pub fn consistent_leaves(s: &PreStrategy, t: &Tree, h: Horizon) -> BTreeSet<Node> {
    strategy_subtree(s, t, h).leaves().cloned().collect()
}

/// Every consistent leaf is won by the strategy's player.
pub fn is_winning(s: &PreStrategy, g: &Game) -> bool {
    consistent_leaves(s, g.tree(), g.horizon())
        .iter()
        .all(|leaf| eval_payoff(g, leaf).map_or(false, |w| w == s.player))
}

/// Keeps only the keys of length `< n`.
pub fn restrict_levels(s: &PreStrategy, n: usize) -> PreStrategy {
    s.restrict_levels(n)
}

/// Number of total functional strategies of `p` (product of branching
/// degrees over own positions). `None` on overflow.
pub fn count_strategies(t: &Tree, h: Horizon, p: Player) -> Option<u128> {
    own_positions(t, h, p)
        .iter()
        .try_fold(1u128, |acc, x| acc.checked_mul(t.children(x).count() as u128))
}

/// Every total functional strategy of `p`, in canonical (odometer) order.
pub fn enumerate_strategies(
    t: &Tree,
    h: Horizon,
    p: Player,
    caps: &Caps,
) -> Result<Vec<Strategy>, StrategyError> {
    match count_strategies(t, h, p) {
        Some(c) if c <= caps.max_enumeration as u128 => {}
        other => {
            return Err(StrategyError::CapExceeded {
                count: other.map_or_else(|| "more than 2^128".into(), |c| c.to_string()),
                cap: caps.max_enumeration,
            })
        }
    }
    let positions = own_positions(t, h, p);
    let options: Vec<Vec<Letter>> = positions.iter().map(|x| t.child_letters(x)).collect();
    let mut out = Vec::new();
    let mut digits = vec![0usize; positions.len()];
    loop {
        let moves = positions
            .iter()
            .zip(&digits)
            .zip(&options)
            .map(|((x, &d), opts)| (x.clone(), opts[d]))
            .collect();
        out.push(Strategy::from_moves_unchecked(p, moves));
        // Advance the last position first so the first position varies slowest.
        let mut i = positions.len();
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < options[i].len() {
                break;
            }
            digits[i] = 0;
        }
    }
}

/// The unique leaf reached when `zero` and `one` play against each other.
pub fn play(zero: &Strategy, one: &Strategy, t: &Tree, h: Horizon) -> Option<Node> {
    let mut x = Node::root();
    while x.len() < h.get() {
        let mover = if is_position(&x, Player::Zero) { zero } else { one };
        let a = mover.move_at(&x)?;
        x = x.child(a);
        if !t.contains(&x) {
            return None;
        }
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Payoff;

    fn n(s: &str) -> Node {
        Node::parse_digits(s).unwrap()
    }

    fn h(k: usize) -> Horizon {
        Horizon::new(k).unwrap()
    }

    fn always(player: Player, letter: u32, t: &Tree, hz: Horizon) -> Strategy {
        let moves = own_positions(t, hz, player)
            .into_iter()
            .map(|x| (x, Letter(letter)))
            .collect();
        Strategy::from_moves(player, moves, t, hz).unwrap()
    }

    fn g_cyl() -> Game {
        let accept = [n("00"), n("01")].into_iter().collect();
        Game::new(Tree::full(2, 2), h(2), Payoff::Clopen(accept)).unwrap()
    }

    #[test]
    fn subtree_examples() {
        let t = Tree::full(2, 2);
        let empty = PreStrategy::empty(Player::Zero);
        assert_eq!(strategy_subtree(&empty, &t, h(2)).nodes().len(), 1);
        let s = always(Player::Zero, 0, &t, h(2));
        let sub = strategy_subtree(s.pre(), &t, h(2));
        let expect: BTreeSet<Node> = ["", "0", "00", "01"].iter().map(|x| n(x)).collect();
        assert_eq!(sub.nodes(), &expect);
        let full = PreStrategy::full(Player::One, &t, h(2));
        assert_eq!(strategy_subtree(&full, &t, h(2)), t);
    }

    #[test]
    fn consistent_leaf_examples() {
        let t = Tree::full(2, 2);
        let s = always(Player::Zero, 0, &t, h(2));
        let leaves = consistent_leaves(s.pre(), &t, h(2));
        assert_eq!(leaves, [n("00"), n("01")].into_iter().collect());
        let full = PreStrategy::full(Player::Zero, &t, h(2));
        assert_eq!(consistent_leaves(&full, &t, h(2)).len(), 4);
        assert!(consistent_leaves(&PreStrategy::empty(Player::Zero), &t, h(2)).is_empty());
    }

    #[test]
    fn winning_examples() {
        let g = g_cyl();
        assert!(is_winning(always(Player::Zero, 0, g.tree(), h(2)).pre(), &g));
        assert!(!is_winning(always(Player::Zero, 1, g.tree(), h(2)).pre(), &g));
        assert!(is_winning(&PreStrategy::empty(Player::Zero), &g));
        assert!(is_winning(&PreStrategy::empty(Player::One), &g));
    }

    #[test]
    fn restrict_levels_examples() {
        let t = Tree::full(2, 4);
        let s = always(Player::One, 0, &t, h(4));
        assert!(restrict_levels(s.pre(), 0).choices().is_empty());
        assert_eq!(restrict_levels(s.pre(), 4), *s.pre());
        let mut moves: BTreeMap<Node, Letter> = s.moves().map(|(x, a)| (x.clone(), a)).collect();
        moves.insert(n("000"), Letter(1));
        let s2 = Strategy::from_moves(Player::One, moves, &t, h(4)).unwrap();
        assert_ne!(s.pre(), s2.pre());
        assert_eq!(restrict_levels(s.pre(), 2), restrict_levels(s2.pre(), 2));
        assert_eq!(restrict_levels(s.pre(), 3), restrict_levels(s2.pre(), 3));
        assert_ne!(restrict_levels(s.pre(), 4), restrict_levels(s2.pre(), 4));
    }

    #[test]
    fn enumeration_counts() {
        let caps = Caps::default();
        let t2 = Tree::full(2, 2);
        let zero = enumerate_strategies(&t2, h(2), Player::Zero, &caps).unwrap();
        assert_eq!(zero.len(), 2);
        assert_eq!(zero[0].move_at(&Node::root()), Some(Letter(0)));
        assert_eq!(enumerate_strategies(&t2, h(2), Player::One, &caps).unwrap().len(), 4);
        let t3 = Tree::full(2, 3);
        let all = enumerate_strategies(&t3, h(3), Player::Zero, &caps).unwrap();
        assert_eq!(all.len(), 32);
        let distinct: BTreeSet<_> = all.iter().map(|s| s.pre().clone()).collect();
        assert_eq!(distinct.len(), 32);
        assert!(matches!(
            enumerate_strategies(&Tree::full(2, 5), h(5), Player::Zero, &Caps::new(100)),
            Err(StrategyError::CapExceeded { .. })
        ));
    }

    #[test]
    fn validation_errors() {
        let t = Tree::full(2, 2);
        let bad_key = BTreeMap::from([(n("0"), BTreeSet::from([Letter(0)]))]);
        assert!(matches!(
            PreStrategy::new(Player::Zero, bad_key, &t, h(2)),
            Err(StrategyError::NotOwnPosition { .. })
        ));
        let pre = PreStrategy::new(
            Player::Zero,
            BTreeMap::from([(Node::root(), BTreeSet::from([Letter(0), Letter(1)]))]),
            &t,
            h(2),
        )
        .unwrap();
        assert!(QuasiStrategy::new(pre.clone(), &t, h(2)).is_ok());
        assert!(matches!(
            Strategy::new(pre, &t, h(2)),
            Err(StrategyError::NotSingleton { .. })
        ));
        assert!(matches!(
            QuasiStrategy::new(PreStrategy::empty(Player::Zero), &t, h(2)),
            Err(StrategyError::EmptyChoice { .. })
        ));
        // Player one never moves before H = 1, so the empty prestrategy is a quasistrategy there.
        let t1 = Tree::full(2, 1);
        assert!(QuasiStrategy::new(PreStrategy::empty(Player::One), &t1, h(1)).is_ok());
    }

    #[test]
    fn play_reaches_a_leaf() {
        let t = Tree::full(2, 3);
        let z = always(Player::Zero, 1, &t, h(3));
        let o = always(Player::One, 0, &t, h(3));
        assert_eq!(play(&z, &o, &t, h(3)), Some(n("101")));
    }
}
