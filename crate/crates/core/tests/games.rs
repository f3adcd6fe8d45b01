use std::collections::BTreeSet;
use std::sync::Arc;

use gsdet::game::eval_payoff;
use gsdet::selftest::{all_clopen_games, closed_generator_corpus};
use gsdet::solver::{backward_induction, winning_region};
use gsdet::strategy::{consistent_leaves, enumerate_strategies, is_winning, play, strategy_subtree};
use gsdet::{BorelCode, Caps, Game, Horizon, Node, Payoff, Player, PreStrategy, Tree};
use gsdet::Strategy as Strat;
use proptest::prelude::*;

fn h(n: usize) -> Horizon {
    Horizon::new(n).unwrap()
}

#[test]
fn closed_agrees_with_clopen_expansion() {
    for hh in 1..=3 {
        for g in closed_generator_corpus(hh) {
            let clopen = g.to_clopen();
            for leaf in g.leaves() {
                assert_eq!(eval_payoff(&g, leaf), eval_payoff(&clopen, leaf));
            }
        }
    }
}

#[test]
fn complement_swaps_every_leaf() {
    let t = Arc::new(Tree::full(2, 3));
    let n = |s: &str| Node::parse_digits(s).unwrap();
    let payoffs = [
        Payoff::Clopen([n("000"), n("101")].into()),
        Payoff::Closed([n("1"), n("00")].into()),
        Payoff::Open([n("01")].into()),
        Payoff::Borel(BorelCode::Union(vec![BorelCode::cylinder(n("0")), BorelCode::closed([n("11")])])),
    ];
    for p in payoffs {
        let g = Game::new(t.clone(), h(3), p).unwrap();
        let c = g.complement();
        for leaf in g.leaves() {
            assert_eq!(eval_payoff(&g, leaf).unwrap(), eval_payoff(&c, leaf).unwrap().opponent());
        }
    }
}

#[test]
fn determinacy_up_to_horizon_four() {
    let caps = Caps::default();
    for hh in 1..=4 {
        for g in all_clopen_games(2, hh, &caps).unwrap() {
            let zero = winning_region(&g, Player::Zero).contains(&Node::root());
            let one = winning_region(&g, Player::One).contains(&Node::root());
            assert!(zero != one);
            let r = backward_induction(&g);
            assert!(is_winning(r.strategy.pre(), &g));
        }
    }
}

#[test]
fn no_two_winners() {
    let caps = Caps::default();
    for hh in 1..=3 {
        for g in all_clopen_games(2, hh, &caps).unwrap() {
            let wins = |p| -> Vec<Strat> {
                enumerate_strategies(g.tree(), g.horizon(), p, &caps)
                    .unwrap()
                    .into_iter()
                    .filter(|s| is_winning(s.pre(), &g))
                    .collect()
            };
            let (zs, os) = (wins(Player::Zero), wins(Player::One));
            assert!(zs.is_empty() || os.is_empty());
            if let (Some(z), Some(o)) = (zs.first(), os.first()) {
                panic!("{:?} vs {:?} reaches {:?}", z, o, play(z, o, g.tree(), g.horizon()));
            }
        }
    }
}

#[test]
fn consistent_leaves_count_opponent_behaviour() {
    let caps = Caps::default();
    for hh in 1..=3 {
        let t = Tree::full(2, hh);
        for p in Player::BOTH {
            for s in enumerate_strategies(&t, h(hh), p, &caps).unwrap() {
                let opp_moves = (0..hh).filter(|&d| Player::to_move_at(d) != p).count();
                assert_eq!(consistent_leaves(s.pre(), &t, h(hh)).len(), 1 << opp_moves);
            }
        }
    }
}

#[test]
fn surjection_forgets_off_path_moves() {
    let t = Tree::full(2, 3);
    let caps = Caps::default();
    let all = enumerate_strategies(&t, h(3), Player::Zero, &caps).unwrap();
    let mut seen = std::collections::BTreeMap::new();
    for s in &all {
        let sub = strategy_subtree(s.pre(), &t, h(3));
        let on_path: BTreeSet<(Node, gsdet::Letter)> = s
            .moves()
            .filter(|(x, _)| sub.contains(x))
            .map(|(x, a)| (x.clone(), a))
            .collect();
        if let Some(prev) = seen.insert(on_path, sub.nodes().clone()) {
            assert_eq!(&prev, sub.nodes());
        }
    }
    // 32 strategies, 8 strategy trees: the map is not injective.
    assert_eq!(all.len(), 32);
    assert_eq!(seen.len(), 8);
}

fn arb_choice(t: &Tree, hh: usize) -> impl Strategy<Value = (PreStrategy, PreStrategy)> {
    let positions: Vec<Node> = t
        .nodes()
        .iter()
        .filter(|x| x.len() < hh && Player::to_move_at(x.len()) == Player::Zero)
        .cloned()
        .collect();
    let n = positions.len();
    let t = t.clone();
    (prop::collection::vec(0u8..4, n), prop::collection::vec(0u8..4, n)).prop_map(move |(a, b)| {
        let build = |masks: &[u8]| {
            let choices = positions
                .iter()
                .zip(masks)
                .map(|(x, m)| {
                    let set = (0..2).filter(|i| m >> i & 1 == 1).map(gsdet::Letter).collect();
                    (x.clone(), set)
                })
                .collect();
            PreStrategy::new(Player::Zero, choices, &t, h(hh)).unwrap()
        };
        let small = build(&a);
        let union: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x | y).collect();
        (small, build(&union))
    })
}

proptest! {
    #[test]
    fn subtree_is_monotone((s, big) in arb_choice(&Tree::full(2, 3), 3)) {
        let t = Tree::full(2, 3);
        prop_assert!(s.is_sub_of(&big));
        let a = strategy_subtree(&s, &t, h(3));
        let b = strategy_subtree(&big, &t, h(3));
        prop_assert!(a.nodes().is_subset(b.nodes()));
    }
}
