use std::sync::Arc;

use proptest::prelude::*;

use gsdet::borel::{
    check_code_clopen, code_corpus, corpus_atoms, minimal_horizon, padded_binary, pullback_code, solve_borel,
    unravel_code, BorelCode, PipelineError,
};
use gsdet::covering::verify_covering;
use gsdet::morphism::duplicate_letters;
use gsdet::{Caps, Game, Horizon, Node, Payoff, Tree};

fn h(n: usize) -> Horizon {
    Horizon::new(n).unwrap()
}

fn n(s: &str) -> Node {
    Node::parse_digits(s).unwrap()
}

fn code() -> impl Strategy<Value = BorelCode> {
    let leaf = prop::sample::select(corpus_atoms());
    leaf.prop_recursive(3, 12, 3, |inner| {
        prop_oneof![
            inner.clone().prop_map(BorelCode::complement),
            prop::collection::vec(inner, 1..=3).prop_map(BorelCode::Union),
        ]
    })
}

proptest! {
    #[test]
    fn double_complement_is_identity(c in code()) {
        let t = Tree::full(2, 3);
        let cc = c.clone().complement().complement();
        for leaf in t.leaves() {
            prop_assert_eq!(cc.eval(leaf), c.eval(leaf));
            prop_assert_ne!(c.clone().complement().eval(leaf), c.eval(leaf));
        }
    }

    #[test]
    fn pullback_commutes_with_evaluation(c in code(), from in 0usize..3) {
        let pi = duplicate_letters(Arc::new(Tree::full(2, 3)), from);
        let back = pullback_code(&c, &pi);
        for x in pi.source().leaves() {
            prop_assert_eq!(back.eval(x), c.eval(pi.apply(x).unwrap()));
        }
    }
}

#[test]
fn preimage_is_the_pulled_back_set() {
    let caps = Caps::default();
    for c in code_corpus().iter().step_by(7) {
        let hh = h(minimal_horizon(c));
        let t = Arc::new(padded_binary(hh.get()));
        let r = unravel_code(&t, hh, c, 0, &caps).unwrap();
        for leaf in r.source().leaves() {
            let y = r.covering.pi.apply(leaf).unwrap();
            assert_eq!(r.preimage.contains(leaf), c.eval(y), "{c}");
        }
        assert!(check_code_clopen(&r, hh).unwrap(), "{c}");
        assert!(r.decision_bound <= hh.get());
        assert!(r.covering.pi.is_k_fixing(r.covering.k));
    }
}

#[test]
fn code_coverings_verify() {
    let caps = Caps::default();
    for c in code_corpus().iter().step_by(53) {
        let hh = h(minimal_horizon(c));
        let t = Arc::new(padded_binary(hh.get()));
        let r = unravel_code(&t, hh, c, 0, &caps).unwrap();
        let v = verify_covering(&r.covering, hh, 4096).unwrap();
        assert!(v.ok(), "{c}: {:?}", v.counterexample);
    }
}

#[test]
fn full_tree_codes_match_the_oracle() {
    let caps = Caps::default();
    let cyl = |s: &str| BorelCode::cylinder(n(s));
    let codes = [
        BorelCode::Union(vec![cyl("00"), cyl("11")]),
        BorelCode::Union(vec![cyl("01"), cyl("10")]).complement(),
        BorelCode::Union(vec![BorelCode::closed([n("1")]), cyl("11")]),
        BorelCode::Union(vec![BorelCode::closed([n("01"), n("10")]).complement(), cyl("0")]),
    ];
    for c in codes {
        let g = Game::new(Tree::full(2, 4), h(4), Payoff::Borel(c.clone())).unwrap();
        let r = solve_borel(&g, &caps).unwrap();
        assert_eq!(r.winner, r.oracle_winner, "{c}");
    }
}

#[test]
fn horizon_bookkeeping() {
    let atom = BorelCode::closed([n("1")]);
    assert_eq!(minimal_horizon(&atom), 2);
    let u = BorelCode::Union(vec![atom.clone(), atom.clone()]);
    assert_eq!(minimal_horizon(&u), 4);
    let g = Game::new(Tree::full(2, 3), h(3), Payoff::Borel(u)).unwrap();
    assert!(matches!(
        solve_borel(&g, &Caps::default()),
        Err(PipelineError::HorizonTooSmall { h: 3, need: 4 })
    ));
    let g = Game::new(Tree::full(2, 2), h(2), Payoff::Clopen(Default::default())).unwrap();
    assert!(matches!(solve_borel(&g, &Caps::default()), Err(PipelineError::NotBorel)));
}
