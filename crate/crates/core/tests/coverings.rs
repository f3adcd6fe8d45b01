use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gsdet::covering::{
    compose_coverings, extend_limit_covering, random_strategy, transfer, verify_covering, CoveringError,
    CoveringSystem, FiberTracking, SingleLiftTracking, VerifyMode,
};
use gsdet::morphism::{collapse_chain, compose, duplicate_letters, limit_tree, InverseSystem};
use gsdet::selftest::closed_generator_corpus;
use gsdet::solver::{backward_induction, enumerate_winning_strategies, random_winning_strategy};
use gsdet::strategy::{consistent_leaves, is_winning};
use gsdet::unravel::build_unravel_covering;
use gsdet::{Caps, Covering, Horizon, Node, Player, StrategyMap, Tree};

fn h(n: usize) -> Horizon {
    Horizon::new(n).unwrap()
}

/// A chain over the complete binary tree of depth 3: covering `i`
/// duplicates letters from position `i + 1` on, so the schedule is (1, 2, 3).
fn chain() -> Vec<Covering> {
    let mut below = Arc::new(Tree::full(2, 3));
    let mut out = Vec::new();
    for i in 0..3 {
        let pi = Arc::new(duplicate_letters(below.clone(), i + 1));
        below = pi.source_arc().clone();
        out.push(Covering::with_fiber_tracking(pi, h(3), i + 1, &Caps::default()));
    }
    out
}

#[test]
fn projections_commute_and_stabilize() {
    let sys = collapse_chain(3, 3);
    for depth in 0..=3 {
        let lim = limit_tree(&sys, depth, 10).unwrap();
        for i in 0..3 {
            let pi = lim.projection(&sys, i).unwrap();
            let next = lim.projection(&sys, i + 1).unwrap();
            let step = sys.transition(i).level_restrict(depth);
            assert_eq!(compose(&step, &next).unwrap().map(), pi.map());
            for n in 0..=depth {
                if sys.fixing_schedule(i) >= n {
                    assert!(pi.level_restrict(n).is_level_bijective(n));
                }
            }
        }
    }
}

#[test]
fn chain_coverings_verify() {
    for (i, c) in chain().into_iter().enumerate() {
        assert_eq!(c.pi.fixing_level(), if i < 2 { i + 1 } else { 3 });
        let r = verify_covering(&c, h(3), 10_000).unwrap();
        assert!(r.ok(), "{:?}", r.counterexample);
    }
    // Small enough to enumerate.
    let pi = Arc::new(duplicate_letters(Arc::new(Tree::full(2, 2)), 1));
    let c = Covering::with_fiber_tracking(pi, h(2), 1, &Caps::default());
    let r = verify_covering(&c, h(2), 100_000).unwrap();
    assert_eq!(r.mode, VerifyMode::Exhaustive);
    assert!(r.ok());
}

#[test]
fn limit_covering_over_schedule_one_two_three() {
    let t = Arc::new(Tree::full(2, 3));
    let sys = CoveringSystem::new(t, chain()).unwrap();
    assert_eq!((0..3).map(|i| sys.fixing_schedule(i)).collect::<Vec<_>>(), [1, 2, 3]);
    for i in 0..3 {
        let c = extend_limit_covering(&sys, h(3), i, 10).unwrap();
        assert_eq!(c.k, i + 1);
        assert!(c.pi.is_k_fixing(i + 1));
        assert!(verify_covering(&c, h(3), 10_000).unwrap().ok());
    }
}

#[test]
fn composite_takes_the_smaller_k() {
    let cs = chain();
    let c = compose_coverings(&cs[1], &cs[2]).unwrap();
    assert_eq!(c.k, 2);
    assert!(c.pi.fixing_level() >= 2);
    let r = verify_covering(&c, h(3), 10_000).unwrap();
    assert!(r.ok(), "{:?}", r.counterexample);
}

#[test]
fn k_clause_below_the_fixing_level() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for c in chain() {
        let pi = c.pi.clone();
        for p in Player::BOTH {
            for _ in 0..64 {
                let s = random_strategy(pi.source(), h(3), p, &mut rng);
                let img = c.phi.apply(p, &s).unwrap();
                for (x, a) in s.moves().filter(|(x, _)| x.len() < c.k) {
                    let y = pi.apply(x).unwrap();
                    let ya = pi.apply(&x.child(a)).unwrap();
                    assert_eq!(img.move_at(y), ya.last());
                }
            }
        }
    }
}

#[test]
fn transfer_on_unravel_coverings() {
    let caps = Caps::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut exhaustive = 0;
    for hh in 2..=3 {
        for g in closed_generator_corpus(hh) {
            let (u, c) = build_unravel_covering(&g, 0, &caps).unwrap();
            let w = backward_induction(&u.game).winner;
            let pool = match enumerate_winning_strategies(&u.game, w, 2000) {
                Some(v) => {
                    exhaustive += 1;
                    v
                }
                None => (0..32).filter_map(|_| random_winning_strategy(&u.game, w, &mut rng)).collect(),
            };
            assert!(!pool.is_empty());
            for s in pool {
                let t = transfer(&c, &g, &s).unwrap();
                assert!(is_winning(t.pre(), &g));
            }
        }
    }
    assert!(exhaustive >= 29);
}

#[test]
fn lifts_are_consistent_and_project_down() {
    let caps = Caps::default();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for hh in 2..=3 {
        for g in closed_generator_corpus(hh).into_iter().step_by(7) {
            let (_, c) = build_unravel_covering(&g, 0, &caps).unwrap();
            let ft = FiberTracking::new(c.pi.clone(), h(hh), &caps);
            for p in Player::BOTH {
                for _ in 0..8 {
                    let s = random_strategy(c.pi.source(), h(hh), p, &mut rng);
                    let tr = ft.trace(p, &s).unwrap();
                    let mine = consistent_leaves(s.pre(), c.pi.source(), h(hh));
                    for leaf in consistent_leaves(tr.strategy.pre(), c.pi.target(), h(hh)) {
                        let up = tr.lift_of(&leaf).expect("every play lifts");
                        assert!(mine.contains(up));
                        assert_eq!(c.pi.apply(up), Some(&leaf));
                    }
                }
            }
        }
    }
}

#[test]
fn single_lift_tracking_strands() {
    let caps = Caps::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut strands = 0;
    for g in closed_generator_corpus(3) {
        let (_, c) = build_unravel_covering(&g, 0, &caps).unwrap();
        let naive = SingleLiftTracking::new(c.pi.clone(), h(3));
        for p in Player::BOTH {
            for _ in 0..4 {
                let s = random_strategy(c.pi.source(), h(3), p, &mut rng);
                if let Err(CoveringError::LiftStranded { .. }) = naive.apply(p, &s) {
                    strands += 1;
                }
            }
        }
    }
    assert!(strands > 0, "the naive tracker never stranded");
}

#[test]
fn identity_covering_root() {
    let t = Arc::new(Tree::full(2, 2));
    let c = Covering::identity(t.clone());
    assert_eq!(c.pi.apply(&Node::root()), Some(&Node::root()));
    assert!(verify_covering(&c, h(2), 100).unwrap().ok());
}
