//! Invariant suites over generated corpora. Each suite counts its checks and
//! collects failures; a failure is a falsification of a stated property.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::borel::{code_corpus, minimal_horizon, padded_binary, solve_borel};
use crate::caps::Caps;
use crate::covering::{verify_covering, CoveringError};
use crate::format::{parse_game_file, print_game};
use crate::game::{Game, Payoff, Player};
use crate::morphism::{
    collapse_chain, compose, enumerate_morphisms, level_functor_check, limit_tree, InverseSystem,
};
use crate::oracle::brute_force_winner;
use crate::solver::{
    backward_induction, defensive_quasistrategy, enumerate_winning_strategies,
    random_winning_strategy, SolveError,
};
use crate::strategy::{enumerate_strategies, is_winning, play, Strategy};
use crate::tree::{enumerate_trees, Horizon, Letter, Node, Tree};
use crate::unravel::{build_unravel_covering, clopen_at_level, unpruned_condition_positions};

/// Outcome of one suite.
#[derive(Clone, Debug, Default)]
pub struct SuiteReport {
    pub name: &'static str,
    pub checked: u64,
    pub failures: Vec<String>,
    /// Parts of the corpus left out because they exceed the caps.
    pub skipped: Vec<String>,
}

impl SuiteReport {
    fn new(name: &'static str) -> Self {
        SuiteReport {
            name,
            ..Default::default()
        }
    }

    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn fail(&mut self, msg: impl Into<String>) {
        // Keep the report readable when a suite breaks everywhere.
        if self.failures.len() < 20 {
            self.failures.push(msg.into());
        } else if self.failures.len() == 20 {
            self.failures.push("further failures omitted".into());
        }
    }

    fn absorb(&mut self, other: SuiteReport) {
        self.checked += other.checked;
        for f in other.failures {
            self.fail(f);
        }
        self.skipped.extend(other.skipped);
    }
}

#[derive(Clone, Debug)]
pub struct SelftestOptions {
    pub max_alphabet: u32,
    pub max_horizon: usize,
    pub caps: Caps,
    pub seed: u64,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        SelftestOptions {
            max_alphabet: 2,
            max_horizon: 3,
            caps: Caps::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SelftestReport {
    pub suites: Vec<SuiteReport>,
}

impl SelftestReport {
    pub fn falsified(&self) -> bool {
        self.suites.iter().any(|s| !s.passed())
    }
}

fn h(n: usize) -> Horizon {
    Horizon::new(n).expect("positive horizon")
}

/// Every clopen payoff on the complete tree; `None` above the cap.
pub fn all_clopen_games(alphabet: u32, horizon: usize, caps: &Caps) -> Option<Vec<Game>> {
    let t = Arc::new(Tree::full(alphabet, horizon));
    let leaves: Vec<Node> = t.leaves().cloned().collect();
    if leaves.len() >= 64 || 1u64 << leaves.len() > caps.max_enumeration {
        return None;
    }
    Some(
        (0u64..1 << leaves.len())
            .map(|mask| {
                let acc = leaves
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, l)| l.clone())
                    .collect();
                Game::new(t.clone(), h(horizon), Payoff::Clopen(acc)).expect("leaves of the tree")
            })
            .collect(),
    )
}

/// Clopen payoffs on the complete tree, each leaf accepted with probability 1/2.
pub fn random_clopen_games(alphabet: u32, horizon: usize, n: usize, rng: &mut impl Rng) -> Vec<Game> {
    let t = Arc::new(Tree::full(alphabet, horizon));
    (0..n)
        .map(|_| {
            let acc = t.leaves().filter(|_| rng.gen_bool(0.5)).cloned().collect();
            Game::new(t.clone(), h(horizon), Payoff::Clopen(acc)).expect("leaves of the tree")
        })
        .collect()
}

/// A pruned tree in which every inner node keeps a random nonempty set of
/// children.
pub fn random_pruned_tree(alphabet: u32, horizon: usize, rng: &mut impl Rng) -> Tree {
    let mut nodes = vec![Node::root()];
    let mut frontier = vec![Node::root()];
    while let Some(x) = frontier.pop() {
        if x.len() == horizon {
            continue;
        }
        let mut letters: Vec<u32> = (0..alphabet).filter(|_| rng.gen_bool(0.6)).collect();
        if letters.is_empty() {
            letters.push(rng.gen_range(0..alphabet));
        }
        for a in letters {
            let c = x.child(Letter(a));
            nodes.push(c.clone());
            frontier.push(c);
        }
    }
    Tree::new(alphabet, horizon, nodes).expect("built prefix-closed")
}

/// A closed game on a random pruned tree with one to three generators.
pub fn random_closed_game(max_alphabet: u32, max_horizon: usize, rng: &mut impl Rng) -> Game {
    let a = rng.gen_range(2..=max_alphabet.max(2));
    let hh = rng.gen_range(2..=max_horizon.max(2));
    let t = random_pruned_tree(a, hh, rng);
    let pool: Vec<Node> = t.nodes().iter().filter(|x| !x.is_empty()).cloned().collect();
    let n = rng.gen_range(1..=3);
    let gens: BTreeSet<Node> = pool.choose_multiple(rng, n).cloned().collect();
    Game::new(t, h(hh), Payoff::Closed(gens)).expect("generators are nodes")
}

/// Closed games on the complete binary tree with at most two generators.
pub fn closed_generator_corpus(horizon: usize) -> Vec<Game> {
    let t = Arc::new(Tree::full(2, horizon));
    let nodes: Vec<Node> = t.nodes().iter().cloned().collect();
    let mut sets: Vec<BTreeSet<Node>> = vec![BTreeSet::new()];
    for (i, a) in nodes.iter().enumerate() {
        sets.push(BTreeSet::from([a.clone()]));
        for b in &nodes[i + 1..] {
            sets.push(BTreeSet::from([a.clone(), b.clone()]));
        }
    }
    sets.into_iter()
        .map(|u| Game::new(t.clone(), h(horizon), Payoff::Closed(u)).expect("generators are nodes"))
        .collect()
}

/// Backward induction against strategy-pair enumeration.
pub fn zermelo_suite(games: &[Game], caps: &Caps) -> SuiteReport {
    let mut r = SuiteReport::new("zermelo");
    for g in games {
        match brute_force_winner(g, caps) {
            Ok(w) => {
                r.checked += 1;
                let bi = backward_induction(g).winner;
                if bi != w {
                    r.fail(format!("{:?}: backward induction says {bi}, enumeration says {w}", g.payoff()));
                }
            }
            Err(e) => r.skipped.push(e.to_string()),
        }
    }
    r
}

/// The backward-induction strategy wins, and beats every strategy of the
/// opponent in a play-off, so the opponent has no winning strategy.
pub fn uniqueness_suite(games: &[Game], caps: &Caps) -> SuiteReport {
    let mut r = SuiteReport::new("uniqueness");
    for g in games {
        let sol = backward_induction(g);
        let w = sol.winner;
        if !is_winning(sol.strategy.pre(), g) {
            r.fail(format!("{:?}: the strategy of {w} does not win", g.payoff()));
            continue;
        }
        let others = match enumerate_strategies(g.tree(), g.horizon(), w.opponent(), caps) {
            Ok(v) => v,
            Err(e) => {
                r.skipped.push(e.to_string());
                continue;
            }
        };
        r.checked += 1;
        for t in &others {
            let (zero, one) = match w {
                Player::Zero => (&sol.strategy, t),
                Player::One => (t, &sol.strategy),
            };
            let leaf = play(zero, one, g.tree(), g.horizon());
            let won = leaf.map_or(false, |l| (g.payoff().contains(&l)) == (w == Player::Zero));
            if !won {
                r.fail(format!("{:?}: both players have winning strategies", g.payoff()));
                break;
            }
        }
    }
    r
}

/// A random strategy refining `q`: one allowed move per position, least
/// letter where `q` is silent.
fn refine(q: &crate::strategy::QuasiStrategy, g: &Game, rng: &mut impl Rng) -> Strategy {
    let moves = q
        .pre()
        .choices()
        .iter()
        .map(|(x, s)| {
            let v: Vec<Letter> = s.iter().copied().collect();
            (x.clone(), v[rng.gen_range(0..v.len())])
        })
        .collect();
    let s = Strategy::from_moves_unchecked(Player::Zero, moves);
    Strategy::complete_canonically(s.pre(), g.tree(), g.horizon())
}

/// Refinements of the defensive quasistrategy win whenever player one has
/// no winning strategy.
pub fn defensive_suite(games: &[Game], refinements: usize, rng: &mut impl Rng) -> SuiteReport {
    let mut r = SuiteReport::new("defensive");
    for g in games {
        match defensive_quasistrategy(g) {
            Ok(q) => {
                for _ in 0..refinements {
                    r.checked += 1;
                    let s = refine(&q, g, rng);
                    if !is_winning(s.pre(), g) {
                        r.fail(format!("{:?}: refinement {:?} loses", g.payoff(), s));
                    }
                }
            }
            Err(SolveError::OneWins) => {
                if backward_induction(g).winner != Player::One {
                    r.fail(format!("{:?}: defensive construction claims one wins", g.payoff()));
                }
            }
            Err(e) => r.fail(format!("{:?}: {e}", g.payoff())),
        }
    }
    r
}

/// Counts from [`unravel_suite`] split by the property checked.
#[derive(Clone, Debug, Default)]
pub struct UnravelSuites {
    pub covering: SuiteReport,
    pub transfer: SuiteReport,
    pub clopen: SuiteReport,
    pub pruned: SuiteReport,
    pub stranded: u64,
}

/// Strategy count per player up to which unravel coverings are verified
/// exhaustively; above it the lifting certificate plus a sample is used.
pub const VERIFY_BUDGET: u64 = 4096;

/// Winning strategies checked per unraveled game when there are too many to
/// enumerate.
pub const TRANSFER_SAMPLES: usize = 24;

/// Unravel covering laws, transfer of winning strategies, clopen-ness of the
/// preimage and pruned-ness of the unraveled tree.
pub fn unravel_suite(games: &[Game], k: usize, caps: &Caps, seed: u64) -> UnravelSuites {
    let mut out = UnravelSuites {
        covering: SuiteReport::new("unravel-covering"),
        transfer: SuiteReport::new("unravel-transfer"),
        clopen: SuiteReport::new("unravel-clopen"),
        pruned: SuiteReport::new("unravel-pruned"),
        stranded: 0,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for g in games {
        let tag = format!("{:?} at H={}", g.payoff(), g.horizon());
        let (u, c) = match build_unravel_covering(g, k, caps) {
            Ok(x) => x,
            Err(e) => {
                out.covering.fail(format!("{tag}: {e}"));
                continue;
            }
        };
        out.covering.checked += 1;
        match verify_covering(&c, g.horizon(), VERIFY_BUDGET.min(caps.max_enumeration)) {
            Ok(rep) if rep.ok() => {}
            Ok(rep) => {
                let cx = rep.counterexample.expect("failed report has a counterexample");
                out.covering.fail(format!("{tag}: {} law fails: {}", cx.law, cx.detail));
            }
            Err(e) => out.covering.fail(format!("{tag}: {e}")),
        }
        out.clopen.checked += 1;
        if !clopen_at_level(&u.game, u.decision_level()) {
            out.clopen.fail(format!("{tag}: preimage undecided at {}", u.decision_level()));
        }
        out.pruned.checked += 1;
        let bad = unpruned_condition_positions(&u);
        if !bad.is_empty() {
            out.pruned.fail(format!("{tag}: {} positions without a condition move", bad.len()));
        }
        let w = backward_induction(&u.game).winner;
        let pool = enumerate_winning_strategies(&u.game, w, TRANSFER_SAMPLES as u128).unwrap_or_else(|| {
            (0..TRANSFER_SAMPLES)
                .filter_map(|_| random_winning_strategy(&u.game, w, &mut rng))
                .collect()
        });
        for s in pool {
            out.transfer.checked += 1;
            match c.phi.apply(w, &s) {
                Ok(t) if is_winning(t.pre(), g) => {}
                Ok(_) => out.transfer.fail(format!("{tag}: transferred strategy of {w} loses")),
                Err(CoveringError::LiftStranded { node, .. }) => {
                    out.stranded += 1;
                    out.transfer.fail(format!("{tag}: lift stranded at {node}"));
                }
                Err(e) => out.transfer.fail(format!("{tag}: {e}")),
            }
        }
    }
    out
}

/// Limit of the three-stage collapse chain with schedule (1, 2, 3).
pub fn limit_suite() -> SuiteReport {
    let mut r = SuiteReport::new("limit");
    let sys = collapse_chain(3, 3);
    for depth in 0..=3 {
        let lim = match limit_tree(&sys, depth, 10) {
            Ok(l) => l,
            Err(e) => {
                r.fail(format!("depth {depth}: {e}"));
                continue;
            }
        };
        for i in 0..3 {
            r.checked += 1;
            match lim.projection(&sys, i) {
                Ok(p) if p.validate() && p.is_k_fixing(sys.fixing_schedule(i).min(depth)) => {}
                Ok(p) => r.fail(format!(
                    "depth {depth}: projection {i} has fixing level {}, schedule {}",
                    p.fixing_level(),
                    sys.fixing_schedule(i)
                )),
                Err(e) => r.fail(format!("depth {depth}: projection {i}: {e}")),
            }
        }
        for n in 0..=depth {
            r.checked += 1;
            if !level_functor_check(&sys, &lim, n) {
                r.fail(format!("depth {depth}: level {n} differs from the compatible tuples"));
            }
        }
    }
    r
}

/// `fixing(g ∘ f) >= min(fixing f, fixing g)` over all composable pairs of
/// morphisms between pruned binary trees of depth 2.
pub fn min_rule_suite(caps: &Caps) -> SuiteReport {
    let mut r = SuiteReport::new("fixing-min-rule");
    let trees: Vec<Arc<Tree>> = match enumerate_trees(2, 2, caps) {
        Ok(ts) => ts
            .into_iter()
            .filter(|t| !t.is_empty() && t.is_pruned_to_horizon(h(2)))
            .map(Arc::new)
            .collect(),
        Err(e) => {
            r.skipped.push(e.to_string());
            return r;
        }
    };
    let mut mors = std::collections::HashMap::new();
    for (i, a) in trees.iter().enumerate() {
        for (j, b) in trees.iter().enumerate() {
            match enumerate_morphisms(a, b, caps) {
                Ok(v) => {
                    mors.insert((i, j), v);
                }
                Err(e) => r.skipped.push(e.to_string()),
            }
        }
    }
    let n = trees.len();
    for i in 0..n {
        for j in 0..n {
            for l in 0..n {
                let (Some(fs), Some(gs)) = (mors.get(&(i, j)), mors.get(&(j, l))) else {
                    continue;
                };
                for f in fs {
                    for g in gs {
                        r.checked += 1;
                        match compose(g, f) {
                            Ok(gf) if gf.fixing_level() >= f.fixing_level().min(g.fixing_level()) => {}
                            Ok(gf) => r.fail(format!(
                                "fixing levels {} and {} compose to {}",
                                f.fixing_level(),
                                g.fixing_level(),
                                gf.fixing_level()
                            )),
                            Err(e) => r.fail(e.to_string()),
                        }
                    }
                }
            }
        }
    }
    r
}

/// The Borel code corpus on padded binary trees at the least admissible
/// horizon, against the clopen-expansion oracle.
pub fn borel_suite(codes: &[crate::borel::BorelCode], caps: &Caps) -> SuiteReport {
    let mut r = SuiteReport::new("borel-pipeline");
    for code in codes {
        r.checked += 1;
        let hh = minimal_horizon(code);
        let g = match Game::new(padded_binary(hh), h(hh), Payoff::Borel(code.clone())) {
            Ok(g) => g,
            Err(e) => {
                r.fail(format!("{code}: {e}"));
                continue;
            }
        };
        match solve_borel(&g, caps) {
            Ok(rep) if rep.winner == rep.oracle_winner => {}
            Ok(rep) => r.fail(format!("{code}: pipeline {} vs oracle {}", rep.winner, rep.oracle_winner)),
            Err(e) => r.fail(format!("{code}: {e}")),
        }
    }
    r
}

/// Game files print and parse back to the same game.
pub fn round_trip_suite(games: &[Game]) -> SuiteReport {
    let mut r = SuiteReport::new("format-round-trip");
    for g in games {
        r.checked += 1;
        match print_game(g).and_then(|s| parse_game_file(&s)) {
            Ok(back) if back == *g => {}
            Ok(_) => r.fail(format!("{:?}: round trip changes the game", g.payoff())),
            Err(e) => r.fail(format!("{:?}: {e}", g.payoff())),
        }
    }
    r
}

/// Every suite at the given bounds.
pub fn run_selftest(opts: &SelftestOptions) -> SelftestReport {
    let caps = &opts.caps;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let max_a = opts.max_alphabet.max(1);
    let max_h = opts.max_horizon.max(1);

    let mut games = Vec::new();
    for a in 1..=max_a {
        for hh in 1..=max_h {
            match all_clopen_games(a, hh, caps) {
                Some(v) => games.extend(v),
                None => games.extend(random_clopen_games(a, hh, 500, &mut rng)),
            }
        }
    }
    let zermelo = zermelo_suite(&games, caps);
    let uniqueness = uniqueness_suite(&games, caps);

    let closed: Vec<Game> = (0..200)
        .map(|_| random_closed_game(max_a.min(3).max(2), max_h.min(4).max(2), &mut rng))
        .collect();
    let defensive = defensive_suite(&closed, 10, &mut rng);

    let mut unravel = UnravelSuites::default();
    let mut first = true;
    for hh in 2..=max_h.max(2) {
        let corpus = closed_generator_corpus(hh);
        let u = unravel_suite(&corpus, 0, caps, opts.seed);
        if first {
            unravel = u;
            first = false;
        } else {
            unravel.covering.absorb(u.covering);
            unravel.transfer.absorb(u.transfer);
            unravel.clopen.absorb(u.clopen);
            unravel.pruned.absorb(u.pruned);
            unravel.stranded += u.stranded;
        }
    }

    let mut fixtures: Vec<Game> = games.iter().take(64).cloned().collect();
    fixtures.extend(closed.iter().filter(|g| g.tree().alphabet_size() <= 10).cloned());

    SelftestReport {
        suites: vec![
            zermelo,
            uniqueness,
            defensive,
            unravel.covering,
            unravel.transfer,
            unravel.clopen,
            unravel.pruned,
            limit_suite(),
            min_rule_suite(caps),
            borel_suite(&code_corpus(), caps),
            round_trip_suite(&fixtures),
        ],
    }
}
