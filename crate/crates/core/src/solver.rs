//! Backward induction and the defensive quasistrategy for closed games.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::game::{eval_payoff, is_position, Game, Payoff, Player};
use crate::strategy::{PreStrategy, QuasiStrategy, Strategy};
use crate::tree::{Letter, Node};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolveError {
    #[error("defensive quasistrategy needs a closed payoff, got {kind}")]
    NotClosed { kind: &'static str },
    #[error("player one already wins from the root; no defensive quasistrategy exists")]
    OneWins,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SolveResult {
    pub winner: Player,
    pub strategy: Strategy,
    /// Positions from which player one wins.
    pub region: BTreeSet<Node>,
}

/// Nodes from which `p` wins the residual game.
pub fn winning_region(g: &Game, p: Player) -> BTreeSet<Node> {
    let t = g.tree();
    let h = g.horizon().get();
    let mut region = BTreeSet::new();
    // Canonical order is (length, lex), so reverse iteration visits children first.
    for x in t.nodes().iter().rev() {
        let wins = if x.len() == h {
            eval_payoff(g, x).map_or(false, |w| w == p)
        } else if is_position(x, p) {
            t.children(x).any(|c| region.contains(c))
        } else {
            t.children(x).all(|c| region.contains(c))
        };
        if wins {
            region.insert(x.clone());
        }
    }
    region
}

/// Zermelo: the winner from the root with a strategy that always moves to
/// the canonical least child inside its region.
pub fn backward_induction(g: &Game) -> SolveResult {
    let zero_region = winning_region(g, Player::Zero);
    let winner = if zero_region.contains(&Node::root()) {
        Player::Zero
    } else {
        Player::One
    };
    let one_region: BTreeSet<Node> = g
        .tree()
        .nodes()
        .iter()
        .filter(|x| !zero_region.contains(*x))
        .cloned()
        .collect();
    let own = if winner == Player::Zero {
        &zero_region
    } else {
        &one_region
    };
    let h = g.horizon().get();
    let moves: BTreeMap<Node, Letter> = g
        .tree()
        .nodes()
        .iter()
        .filter(|x| x.len() < h && is_position(x, winner))
        .filter_map(|x| {
            let pick = g
                .tree()
                .children(x)
                .find(|c| own.contains(*c))
                .or_else(|| g.tree().children(x).next())?;
            Some((x.clone(), pick.last()?))
        })
        .collect();
    SolveResult {
        winner,
        strategy: Strategy::from_moves_unchecked(winner, moves),
        region: one_region,
    }
}

/// Player zero's quasistrategy allowing exactly the moves that stay out of
/// player one's winning region.
pub fn defensive_quasistrategy(g: &Game) -> Result<QuasiStrategy, SolveError> {
    if !matches!(g.payoff(), Payoff::Closed(_)) {
        return Err(SolveError::NotClosed {
            kind: g.payoff().kind(),
        });
    }
    let bad = winning_region(g, Player::One);
    if bad.contains(&Node::root()) {
        return Err(SolveError::OneWins);
    }
    let h = g.horizon().get();
    let choices = g
        .tree()
        .nodes()
        .iter()
        .filter(|x| x.len() < h && is_position(x, Player::Zero) && !bad.contains(*x))
        .map(|x| {
            let safe = g
                .tree()
                .children(x)
                .filter(|c| !bad.contains(*c))
                .filter_map(|c| c.last())
                .collect();
            (x.clone(), safe)
        })
        .collect();
    let pre = PreStrategy::from_choices_unchecked(Player::Zero, choices);
    Ok(QuasiStrategy::new(pre, g.tree(), g.horizon())
        .expect("a zero position outside one's region has a child outside it"))
}

fn region_of(g: &Game, p: Player) -> BTreeSet<Node> {
    winning_region(g, p)
}

/// Number of winning strategies of `p` that differ on reachable positions,
/// saturating at `u128::MAX`.
pub fn count_winning_strategies(g: &Game, p: Player) -> u128 {
    let region = region_of(g, p);
    fn go(g: &Game, p: Player, region: &BTreeSet<Node>, x: &Node) -> u128 {
        if x.len() == g.horizon().get() {
            return 1;
        }
        let kids = g.tree().children(x).filter(|c| region.contains(*c));
        if is_position(x, p) {
            kids.fold(0u128, |acc, c| acc.saturating_add(go(g, p, region, c)))
        } else {
            kids.fold(1u128, |acc, c| acc.saturating_mul(go(g, p, region, c)))
        }
    }
    if region.contains(&Node::root()) {
        go(g, p, &region, &Node::root())
    } else {
        0
    }
}

/// All winning strategies of `p` up to their off-play moves, each completed
/// canonically; `None` when there are more than `limit`.
pub fn enumerate_winning_strategies(g: &Game, p: Player, limit: u128) -> Option<Vec<Strategy>> {
    if count_winning_strategies(g, p) > limit {
        return None;
    }
    let region = region_of(g, p);
    fn go(g: &Game, p: Player, region: &BTreeSet<Node>, x: &Node) -> Vec<BTreeMap<Node, Letter>> {
        if x.len() == g.horizon().get() {
            return vec![BTreeMap::new()];
        }
        let kids: Vec<&Node> = g.tree().children(x).filter(|c| region.contains(*c)).collect();
        if is_position(x, p) {
            let mut out = Vec::new();
            for c in kids {
                for mut m in go(g, p, region, c) {
                    m.insert(x.clone(), c.last().expect("child of a node"));
                    out.push(m);
                }
            }
            out
        } else {
            let mut out = vec![BTreeMap::new()];
            for c in kids {
                let below = go(g, p, region, c);
                out = out
                    .iter()
                    .flat_map(|m| {
                        below.iter().map(move |b| {
                            let mut m = m.clone();
                            m.extend(b.iter().map(|(k, v)| (k.clone(), *v)));
                            m
                        })
                    })
                    .collect();
            }
            out
        }
    }
    if !region.contains(&Node::root()) {
        return Some(Vec::new());
    }
    Some(
        go(g, p, &region, &Node::root())
            .into_iter()
            .map(|m| {
                let s = Strategy::from_moves_unchecked(p, m);
                Strategy::complete_canonically(s.pre(), g.tree(), g.horizon())
            })
            .collect(),
    )
}

/// A uniformly chosen winning move at every winning position of `p`.
pub fn random_winning_strategy(g: &Game, p: Player, rng: &mut impl rand::Rng) -> Option<Strategy> {
    let region = region_of(g, p);
    if !region.contains(&Node::root()) {
        return None;
    }
    let h = g.horizon().get();
    let moves = g
        .tree()
        .nodes()
        .iter()
        .filter(|x| x.len() < h && is_position(x, p) && region.contains(*x))
        .map(|x| {
            let good: Vec<&Node> = g.tree().children(x).filter(|c| region.contains(*c)).collect();
            let c = good[rng.gen_range(0..good.len())];
            (x.clone(), c.last().expect("child of a node"))
        })
        .collect();
    let s = Strategy::from_moves_unchecked(p, moves);
    Some(Strategy::complete_canonically(s.pre(), g.tree(), g.horizon()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strategy::is_winning;
    use crate::tree::{Horizon, Tree};

    fn n(s: &str) -> Node {
        Node::parse_digits(s).unwrap()
    }

    fn clopen(h: usize, accept: &[&str]) -> Game {
        let acc = accept.iter().map(|s| n(s)).collect();
        Game::new(Tree::full(2, h), Horizon::new(h).unwrap(), Payoff::Clopen(acc)).unwrap()
    }

    fn closed(h: usize, gens: &[&str]) -> Game {
        let g = gens.iter().map(|s| n(s)).collect();
        Game::new(Tree::full(2, h), Horizon::new(h).unwrap(), Payoff::Closed(g)).unwrap()
    }

    #[test]
    fn region_examples() {
        let g = clopen(2, &["00", "01"]);
        let r = winning_region(&g, Player::Zero);
        for x in ["", "0", "00", "01"] {
            assert!(r.contains(&n(x)));
        }
        assert!(!r.contains(&n("1")));
        let all = clopen(2, &["00", "01", "10", "11"]);
        assert!(winning_region(&all, Player::One).is_empty());
        assert_eq!(winning_region(&all, Player::Zero).len(), 7);
    }

    #[test]
    fn solve_examples() {
        let cyl = backward_induction(&clopen(2, &["00", "01"]));
        assert_eq!(cyl.winner, Player::Zero);
        assert_eq!(cyl.strategy.move_at(&Node::root()), Some(Letter(0)));
        assert_eq!(backward_induction(&clopen(2, &["00", "11"])).winner, Player::One);
        let none = clopen(2, &[]);
        let r = backward_induction(&none);
        assert_eq!(r.winner, Player::One);
        assert!(is_winning(r.strategy.pre(), &none));
    }

    #[test]
    fn winning_strategy_enumeration() {
        let g = clopen(2, &["00", "01", "10"]);
        assert_eq!(count_winning_strategies(&g, Player::Zero), 1);
        let all = enumerate_winning_strategies(&g, Player::Zero, 10).unwrap();
        assert_eq!(all.len(), 1);
        assert!(all.iter().all(|s| is_winning(s.pre(), &g)));
        let h3 = clopen(3, &["000", "010", "100", "110"]);
        let n = count_winning_strategies(&h3, Player::Zero);
        let all = enumerate_winning_strategies(&h3, Player::Zero, 1000).unwrap();
        assert_eq!(all.len() as u128, n);
        assert!(all.iter().all(|s| is_winning(s.pre(), &h3)));
        assert_eq!(count_winning_strategies(&h3, Player::One), 0);
    }

    #[test]
    fn defensive_examples() {
        let g = closed(3, &["1"]);
        let q = defensive_quasistrategy(&g).unwrap();
        assert_eq!(
            q.pre().choice_set(&Node::root()),
            Some(&BTreeSet::from([Letter(0)]))
        );
        assert!(is_winning(q.pre(), &g));
        let free = closed(2, &[]);
        let q = defensive_quasistrategy(&free).unwrap();
        assert_eq!(q.pre().choice_set(&Node::root()).map(|s| s.len()), Some(2));
        assert_eq!(
            defensive_quasistrategy(&closed(2, &[""])),
            Err(SolveError::OneWins)
        );
        assert!(matches!(
            defensive_quasistrategy(&clopen(2, &["00"])),
            Err(SolveError::NotClosed { .. })
        ));
    }
}
