//! Coverings `(π, φ)`: a tree morphism plus a map of strategies satisfying
//! locality and lifting, with the `k`-covering discipline.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::sync::{Arc, Mutex};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::game::{eval_payoff, is_position, Game, GameError, Payoff, Player};
use crate::morphism::{compose, InverseSystem, MorphismError, TreeMorphism};
use crate::strategy::{consistent_leaves, count_strategies, enumerate_strategies, is_winning,
    own_positions, PreStrategy, Strategy, StrategyError};
use crate::tree::{Horizon, Letter, Node, Tree};
use crate::caps::Caps;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CoveringError {
    #[error("lift stranded for player {player} at {node}{}", letter.map(|b| format!(" on letter {b}")).unwrap_or_default())]
    LiftStranded {
        player: Player,
        node: Node,
        letter: Option<Letter>,
    },
    #[error("covering chain mismatch: source and target trees disagree")]
    Mismatch,
    #[error("{what} needs {count} steps, above the budget {budget}")]
    BudgetExceeded {
        what: &'static str,
        count: String,
        budget: u64,
    },
    #[error("transfer produced a strategy that is not winning in the base game")]
    TransferNotWinning,
    #[error("structural preimage disagrees with the extensional one at {leaf}")]
    PreimageDisagrees { leaf: Node },
    #[error(transparent)]
    Morphism(#[from] MorphismError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// The strategy part `φ` of a covering.
pub trait StrategyMap: Send + Sync + fmt::Debug {
    /// Maps a strategy of `player` on the source tree to one on the target.
    fn apply(&self, player: Player, s: &Strategy) -> Result<Strategy, CoveringError>;

    /// A proof-by-computation that lifting holds for every strategy of
    /// `player`, when the map can produce one.
    fn lifting_certificate(&self, _player: Player) -> Option<Result<bool, CoveringError>> {
        None
    }

    fn describe(&self) -> String;
}

#[derive(Debug, Clone, Copy)]
pub struct IdentityMap;

impl StrategyMap for IdentityMap {
    fn apply(&self, _player: Player, s: &Strategy) -> Result<Strategy, CoveringError> {
        Ok(s.clone())
    }

    fn describe(&self) -> String {
        "identity".into()
    }

    fn lifting_certificate(&self, _player: Player) -> Option<Result<bool, CoveringError>> {
        Some(Ok(true))
    }
}

/// Ignores its input and returns a fixed strategy per player.
#[derive(Debug, Clone)]
pub struct ConstantMap {
    pub zero: Strategy,
    pub one: Strategy,
}

impl StrategyMap for ConstantMap {
    fn apply(&self, player: Player, _s: &Strategy) -> Result<Strategy, CoveringError> {
        Ok(match player {
            Player::Zero => self.zero.clone(),
            Player::One => self.one.clone(),
        })
    }

    fn describe(&self) -> String {
        "constant".into()
    }
}

/// `outer ∘ inner`.
#[derive(Debug, Clone)]
pub struct CompositeMap {
    pub outer: Arc<dyn StrategyMap>,
    pub inner: Arc<dyn StrategyMap>,
}

impl StrategyMap for CompositeMap {
    fn apply(&self, player: Player, s: &Strategy) -> Result<Strategy, CoveringError> {
        self.outer.apply(player, &self.inner.apply(player, s)?)
    }

    fn lifting_certificate(&self, player: Player) -> Option<Result<bool, CoveringError>> {
        let inner = self.inner.lifting_certificate(player)?;
        let outer = self.outer.lifting_certificate(player)?;
        Some(match (inner, outer) {
            (Ok(a), Ok(b)) => Ok(a && b),
            (Err(e), _) | (_, Err(e)) => Err(e),
        })
    }

    fn describe(&self) -> String {
        format!("{} . {}", self.outer.describe(), self.inner.describe())
    }
}

/// The move a strategy makes at `x`, falling back to the least child.
fn move_or_least(s: &Strategy, t: &Tree, x: &Node) -> Option<Node> {
    match s.move_at(x) {
        Some(a) if t.has_child(x, a) => Some(x.child(a)),
        _ => t.children(x).next().cloned(),
    }
}

/// The naive tracker: one lift, moved to the least child projecting onto
/// each opponent move. Kept for comparison; it strands on the unraveling.
#[derive(Debug, Clone)]
pub struct SingleLiftTracking {
    pi: Arc<TreeMorphism>,
    h: Horizon,
}

impl SingleLiftTracking {
    pub fn new(pi: Arc<TreeMorphism>, h: Horizon) -> Self {
        SingleLiftTracking { pi, h }
    }
}

impl StrategyMap for SingleLiftTracking {
    fn apply(&self, player: Player, s: &Strategy) -> Result<Strategy, CoveringError> {
        let src = self.pi.source();
        let tgt = self.pi.target();
        let mut lift: BTreeMap<Node, Node> = BTreeMap::new();
        lift.insert(Node::root(), Node::root());
        let mut moves = BTreeMap::new();
        for x in tgt.nodes().iter().take_while(|x| x.len() < self.h.get()) {
            let tracked = lift.get(x).cloned();
            if is_position(x, player) {
                let pick = match &tracked {
                    Some(y) => move_or_least(s, src, y)
                        .ok_or(CoveringError::LiftStranded {
                            player,
                            node: x.clone(),
                            letter: None,
                        })?,
                    None => {
                        if let Some(c) = tgt.children(x).next() {
                            moves.insert(x.clone(), c.last().expect("child"));
                        }
                        continue;
                    }
                };
                let image = self.pi.apply(&pick).expect("total map");
                let b = image.last().expect("nonroot");
                moves.insert(x.clone(), b);
                lift.insert(x.child(b), pick);
            } else if let Some(y) = tracked {
                for c in tgt.children(x) {
                    let b = c.last().expect("child");
                    let next = src
                        .children(&y)
                        .find(|z| self.pi.apply(z) == Some(c))
                        .ok_or(CoveringError::LiftStranded {
                            player,
                            node: x.clone(),
                            letter: Some(b),
                        })?;
                    lift.insert(c.clone(), next.clone());
                }
            }
        }
        Ok(Strategy::from_moves_unchecked(player, moves))
    }

    fn describe(&self) -> String {
        "single-lift tracking".into()
    }
}

type RobustKey = (Player, Node, Vec<Node>);

/// The default `φ`: plays on the target while tracking the set of all
/// source positions consistent with the input strategy that project onto
/// the current target position.
///
/// Below the fixing level of `π` it copies the input through the level
/// bijection. Above it, at its own turn, it takes the least move after
/// which every possible continuation of the input strategy can still be
/// lifted ("robust" positions); this reads the input only up to the
/// current level, which gives locality.
pub struct FiberTracking {
    pi: Arc<TreeMorphism>,
    h: Horizon,
    fixing: usize,
    work_cap: u64,
    memo: Mutex<HashMap<RobustKey, bool>>,
}

impl fmt::Debug for FiberTracking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiberTracking")
            .field("h", &self.h)
            .field("fixing", &self.fixing)
            .finish()
    }
}

/// Target moves of `φ(σ')` together with the tracked lift sets.
#[derive(Clone, Debug)]
pub struct Trace {
    pub strategy: Strategy,
    pub lifts: BTreeMap<Node, Vec<Node>>,
}

impl Trace {
    /// A source leaf consistent with the input strategy lying over `leaf`.
    pub fn lift_of(&self, leaf: &Node) -> Option<&Node> {
        self.lifts.get(leaf).and_then(|c| c.first())
    }
}

impl FiberTracking {
    pub fn new(pi: Arc<TreeMorphism>, h: Horizon, caps: &Caps) -> Self {
        let fixing = pi.fixing_level();
        FiberTracking {
            pi,
            h,
            fixing,
            work_cap: caps.max_enumeration,
            memo: Mutex::new(HashMap::new()),
        }
    }

    pub fn pi(&self) -> &TreeMorphism {
        &self.pi
    }

    fn letter_of(&self, z: &Node) -> Letter {
        self.pi
            .apply(z)
            .and_then(|y| y.last())
            .expect("source node maps to a nonroot node")
    }

    /// Runs the tracker for `σ'` and records lift sets.
    pub fn trace(&self, player: Player, s: &Strategy) -> Result<Trace, CoveringError> {
        let src = self.pi.source();
        let tgt = self.pi.target();
        let h = self.h.get();
        let mut memo = self.memo.lock().expect("memo lock");
        let mut work = 0u64;
        let mut lifts: BTreeMap<Node, Vec<Node>> = BTreeMap::new();
        if src.contains(&Node::root()) {
            lifts.insert(Node::root(), vec![Node::root()]);
        }
        let mut moves = BTreeMap::new();
        for x in tgt.nodes().iter().take_while(|x| x.len() < h) {
            let cx = lifts.get(x).cloned().unwrap_or_default();
            if !is_position(x, player) {
                for c in tgt.children(x) {
                    let next: Vec<Node> = cx
                        .iter()
                        .flat_map(|y| src.children(y))
                        .filter(|z| self.pi.apply(z) == Some(c))
                        .cloned()
                        .collect();
                    if !next.is_empty() {
                        lifts.insert(c.clone(), next);
                    }
                }
                continue;
            }
            let played: Vec<Node> = cx
                .iter()
                .filter_map(|y| move_or_least(s, src, y))
                .collect();
            let bucket = |b: Letter| -> Vec<Node> {
                played
                    .iter()
                    .filter(|z| self.letter_of(z) == b)
                    .cloned()
                    .collect()
            };
            let b = if x.len() < self.fixing {
                // Copy the input's move through the unique lift.
                let lift = self.pi.fiber(x).first().map(|y| (*y).clone());
                lift.and_then(|y| move_or_least(s, src, &y))
                    .map(|z| self.letter_of(&z))
            } else if cx.is_empty() {
                None
            } else {
                let mut pick = None;
                for c in tgt.children(x) {
                    let b = c.last().expect("child");
                    if self.robust(player, c, &bucket(b), &mut memo, &mut work)? {
                        pick = Some(b);
                        break;
                    }
                }
                if pick.is_none() {
                    return Err(CoveringError::LiftStranded {
                        player,
                        node: x.clone(),
                        letter: None,
                    });
                }
                pick
            };
            let b = match b.or_else(|| tgt.child_letters(x).first().copied()) {
                Some(b) => b,
                None => continue,
            };
            moves.insert(x.clone(), b);
            let next = bucket(b);
            if !next.is_empty() {
                lifts.insert(x.child(b), next);
            }
        }
        Ok(Trace {
            strategy: Strategy::from_moves_unchecked(player, moves),
            lifts,
        })
    }

    /// Whether, from target position `x` with lift set `c`, the tracker can
    /// keep a nonempty lift set to the horizon whatever the input strategy
    /// does from here on.
    fn robust(
        &self,
        player: Player,
        x: &Node,
        c: &[Node],
        memo: &mut HashMap<RobustKey, bool>,
        work: &mut u64,
    ) -> Result<bool, CoveringError> {
        let h = self.h.get();
        if c.is_empty() {
            return Ok(false);
        }
        if x.len() >= h {
            return Ok(true);
        }
        let own = is_position(x, player);
        // Every lift has a child, and every child projects below x.
        if own && x.len() + 1 == h {
            return Ok(true);
        }
        let key = (player, x.clone(), c.to_vec());
        if let Some(&r) = memo.get(&key) {
            return Ok(r);
        }
        *work += 1;
        if *work > self.work_cap {
            return Err(CoveringError::BudgetExceeded {
                what: "lift tracking",
                count: format!("more than {}", self.work_cap),
                budget: self.work_cap,
            });
        }
        let src = self.pi.source();
        let tgt = self.pi.target();
        let result = if !own {
            let mut all = true;
            for child in tgt.children(x) {
                let next: Vec<Node> = c
                    .iter()
                    .flat_map(|y| src.children(y))
                    .filter(|z| self.pi.apply(z) == Some(child))
                    .cloned()
                    .collect();
                if !self.robust(player, child, &next, memo, work)? {
                    all = false;
                    break;
                }
            }
            all
        } else if c.len() == 1 {
            let mut all = true;
            for z in src.children(&c[0]) {
                let target = x.child(self.letter_of(z));
                if !self.robust(player, &target, std::slice::from_ref(z), memo, work)? {
                    all = false;
                    break;
                }
            }
            all
        } else {
            // Look for an assignment of moves to lifts under which no target
            // move keeps a robust lift set. Lift sets only help when they
            // grow, so a bucket that turns robust settles the branch.
            let options: Vec<Vec<Node>> = c.iter().map(|y| src.children(y).cloned().collect()).collect();
            let mut buckets: BTreeMap<Letter, Vec<Node>> = BTreeMap::new();
            !self.adversary(player, x, &options, 0, &mut buckets, memo, work)?
        };
        memo.insert(key, result);
        Ok(result)
    }

    #[allow(clippy::too_many_arguments)]
    fn adversary(
        &self,
        player: Player,
        x: &Node,
        options: &[Vec<Node>],
        i: usize,
        buckets: &mut BTreeMap<Letter, Vec<Node>>,
        memo: &mut HashMap<RobustKey, bool>,
        work: &mut u64,
    ) -> Result<bool, CoveringError> {
        if i == options.len() {
            return Ok(true);
        }
        *work += 1;
        if *work > self.work_cap {
            return Err(CoveringError::BudgetExceeded {
                what: "lift tracking",
                count: format!("more than {}", self.work_cap),
                budget: self.work_cap,
            });
        }
        for z in &options[i] {
            let b = self.letter_of(z);
            let bucket = buckets.entry(b).or_default();
            bucket.push(z.clone());
            let set = bucket.clone();
            let settled = self.robust(player, &x.child(b), &set, memo, work)?;
            let found = !settled && self.adversary(player, x, options, i + 1, buckets, memo, work)?;
            let bucket = buckets.get_mut(&b).expect("bucket");
            bucket.pop();
            if bucket.is_empty() {
                buckets.remove(&b);
            }
            if found {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

impl StrategyMap for FiberTracking {
    fn apply(&self, player: Player, s: &Strategy) -> Result<Strategy, CoveringError> {
        Ok(self.trace(player, s)?.strategy)
    }

    fn lifting_certificate(&self, player: Player) -> Option<Result<bool, CoveringError>> {
        let mut memo = self.memo.lock().expect("memo lock");
        let mut work = 0;
        Some(self.robust(player, &Node::root(), &[Node::root()], &mut memo, &mut work))
    }

    fn describe(&self) -> String {
        "fiber tracking".into()
    }
}

pub fn fiber_tracking_phi(pi: Arc<TreeMorphism>, h: Horizon, caps: &Caps) -> Arc<FiberTracking> {
    Arc::new(FiberTracking::new(pi, h, caps))
}

/// A morphism `π: T' -> T` with a strategy map `φ` and a fixing level `k`.
#[derive(Clone, Debug)]
pub struct Covering {
    pub pi: Arc<TreeMorphism>,
    pub phi: Arc<dyn StrategyMap>,
    pub k: usize,
}

impl Covering {
    pub fn new(pi: Arc<TreeMorphism>, phi: Arc<dyn StrategyMap>, k: usize) -> Self {
        Covering { pi, phi, k }
    }

    /// `π = id`, `φ = id`, `k` = depth of the tree.
    pub fn identity(t: Arc<Tree>) -> Self {
        let k = t.depth_bound();
        Covering::new(Arc::new(TreeMorphism::identity(t)), Arc::new(IdentityMap), k)
    }

    /// `π` with the default fiber-tracking `φ`.
    pub fn with_fiber_tracking(pi: Arc<TreeMorphism>, h: Horizon, k: usize, caps: &Caps) -> Self {
        let phi = fiber_tracking_phi(pi.clone(), h, caps);
        Covering::new(pi, phi, k)
    }

    pub fn source(&self) -> &Tree {
        self.pi.source()
    }

    pub fn target(&self) -> &Tree {
        self.pi.target()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Law {
    Locality,
    Lifting,
    KCovering,
}

impl fmt::Display for Law {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Law::Locality => "locality",
            Law::Lifting => "lifting",
            Law::KCovering => "k-covering",
        })
    }
}

#[derive(Clone, Debug)]
pub struct Counterexample {
    pub law: Law,
    pub player: Player,
    pub strategy: Option<Strategy>,
    pub node: Option<Node>,
    pub detail: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VerifyMode {
    /// Every strategy of both players was checked.
    Exhaustive,
    /// Lifting was certified for all strategies; the other laws were
    /// checked on a seeded sample.
    CertifiedSample { samples: usize },
}

#[derive(Clone, Debug)]
pub struct CoveringReport {
    pub mode: VerifyMode,
    pub strategies_checked: usize,
    pub counterexample: Option<Counterexample>,
}

impl CoveringReport {
    pub fn ok(&self) -> bool {
        self.counterexample.is_none()
    }
}

/// Samples per player when enumeration is over budget.
pub const DEFAULT_SAMPLES: usize = 48;

/// Checks locality, lifting and the `k`-covering clause for every strategy
/// of both players on the source. When there are more strategies than
/// `budget`, falls back to the map's lifting certificate plus a seeded
/// sample; without a certificate that is a budget error.
pub fn verify_covering(c: &Covering, h: Horizon, budget: u64) -> Result<CoveringReport, CoveringError> {
    verify_covering_with(c, h, budget, DEFAULT_SAMPLES, 0)
}

pub fn verify_covering_with(
    c: &Covering,
    h: Horizon,
    budget: u64,
    samples: usize,
    seed: u64,
) -> Result<CoveringReport, CoveringError> {
    let src = c.pi.source();
    let fail = |law, player, strategy: Option<&Strategy>, node: Option<&Node>, detail: String| {
        Ok(CoveringReport {
            mode: VerifyMode::Exhaustive,
            strategies_checked: 0,
            counterexample: Some(Counterexample {
                law,
                player,
                strategy: strategy.cloned(),
                node: node.cloned(),
                detail,
            }),
        })
    };
    if c.pi.fixing_level() < c.k {
        return fail(
            Law::KCovering,
            Player::Zero,
            None,
            None,
            format!("fixing level {} is below k = {}", c.pi.fixing_level(), c.k),
        );
    }
    let counts: Vec<Option<u128>> = Player::BOTH.iter().map(|&p| count_strategies(src, h, p)).collect();
    let exhaustive = counts.iter().all(|n| matches!(n, Some(n) if *n <= budget as u128));
    let mut checked = 0usize;
    let mode;
    let mut pools: Vec<(Player, Vec<Strategy>)> = Vec::new();
    if exhaustive {
        mode = VerifyMode::Exhaustive;
        for p in Player::BOTH {
            pools.push((p, enumerate_strategies(src, h, p, &Caps::new(budget))?));
        }
    } else {
        for p in Player::BOTH {
            match c.phi.lifting_certificate(p) {
                Some(Ok(true)) => {}
                Some(Ok(false)) => {
                    return fail(
                        Law::Lifting,
                        p,
                        None,
                        Some(&Node::root()),
                        "no lift-preserving choice exists for some strategy".into(),
                    )
                }
                Some(Err(e)) => return Err(e),
                None => {
                    return Err(CoveringError::BudgetExceeded {
                        what: "covering verification",
                        count: counts[p.index()].map_or_else(|| "more than 2^128".into(), |n| n.to_string()),
                        budget,
                    })
                }
            }
        }
        mode = VerifyMode::CertifiedSample { samples };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in Player::BOTH {
            let mut pool = vec![canonical_completion(&PreStrategy::empty(p), src, h)];
            while pool.len() < samples {
                pool.push(random_strategy(src, h, p, &mut rng));
            }
            pools.push((p, pool));
        }
    }
    for (p, pool) in &pools {
        for s in pool {
            checked += 1;
            if let Some(cx) = check_one(c, h, *p, s)? {
                return Ok(CoveringReport {
                    mode,
                    strategies_checked: checked,
                    counterexample: Some(cx),
                });
            }
        }
    }
    Ok(CoveringReport {
        mode,
        strategies_checked: checked,
        counterexample: None,
    })
}

/// The total strategy agreeing with `pre` where it has a move and playing
/// the least letter elsewhere.
pub fn canonical_completion(pre: &PreStrategy, t: &Tree, h: Horizon) -> Strategy {
    Strategy::complete_canonically(pre, t, h)
}

/// A uniformly random total strategy.
pub fn random_strategy(t: &Tree, h: Horizon, p: Player, rng: &mut impl Rng) -> Strategy {
    let moves = own_positions(t, h, p)
        .into_iter()
        .filter_map(|x| {
            let letters = t.child_letters(&x);
            if letters.is_empty() {
                None
            } else {
                let a = letters[rng.gen_range(0..letters.len())];
                Some((x, a))
            }
        })
        .collect();
    Strategy::from_moves_unchecked(p, moves)
}

fn check_one(c: &Covering, h: Horizon, p: Player, s: &Strategy) -> Result<Option<Counterexample>, CoveringError> {
    let src = c.pi.source();
    let tgt = c.pi.target();
    let cx = |law, node: Option<Node>, detail: String| {
        Some(Counterexample {
            law,
            player: p,
            strategy: Some(s.clone()),
            node,
            detail,
        })
    };
    let image = match c.phi.apply(p, s) {
        Ok(t) => t,
        Err(CoveringError::LiftStranded { node, .. }) => {
            return Ok(cx(Law::Lifting, Some(node), "lift stranded".into()))
        }
        Err(e) => return Err(e),
    };
    // Lifting on depth-H leaves.
    let lifted: BTreeSet<Node> = consistent_leaves(s.pre(), src, h)
        .iter()
        .filter_map(|x| c.pi.apply(x).cloned())
        .collect();
    if let Some(leaf) = consistent_leaves(image.pre(), tgt, h)
        .into_iter()
        .find(|x| !lifted.contains(x))
    {
        return Ok(cx(Law::Lifting, Some(leaf), "leaf has no consistent lift".into()));
    }
    // k-covering clause: below k, copy the input through the bijection.
    for x in own_positions(tgt, h, p).into_iter().filter(|x| x.len() < c.k) {
        let lift = c.pi.fiber(&x).first().map(|y| (*y).clone());
        let expected = lift
            .and_then(|y| move_or_least(s, src, &y))
            .and_then(|z| c.pi.apply(&z).and_then(|w| w.last()));
        if expected.is_some() && image.move_at(&x) != expected {
            return Ok(cx(Law::KCovering, Some(x), "move differs from the image of the input move".into()));
        }
    }
    // Locality: compare with the canonical representative of each
    // restriction class.
    for n in 0..h.get() {
        let rep = canonical_completion(&s.pre().restrict_levels(n), src, h);
        let rep_image = match c.phi.apply(p, &rep) {
            Ok(t) => t,
            Err(CoveringError::LiftStranded { node, .. }) => {
                return Ok(cx(Law::Lifting, Some(node), "lift stranded on a representative".into()))
            }
            Err(e) => return Err(e),
        };
        if image.pre().restrict_levels(n) != rep_image.pre().restrict_levels(n) {
            return Ok(cx(
                Law::Locality,
                None,
                format!("output below level {n} depends on input at level {n} or later"),
            ));
        }
    }
    Ok(None)
}

/// `φ(σ')`, asserting that winning strategies of the pulled-back game map to
/// winning strategies of `g`.
pub fn transfer(c: &Covering, g: &Game, sigma_prime: &Strategy) -> Result<Strategy, CoveringError> {
    let p = sigma_prime.player();
    let sigma = c.phi.apply(p, sigma_prime)?;
    let pulled = preimage_game(c, g)?;
    if is_winning(sigma_prime.pre(), &pulled) && !is_winning(sigma.pre(), g) {
        return Err(CoveringError::TransferNotWinning);
    }
    Ok(sigma)
}

/// The clopen preimage `[π]⁻¹(P)` and, for generator payoffs, the
/// structural preimage by generator fibers.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Preimage {
    pub clopen: Payoff,
    pub structural: Option<Payoff>,
}

pub fn preimage_payoff(c: &Covering, g: &Game) -> Result<Preimage, CoveringError> {
    let src = c.pi.source();
    let mut accept = BTreeSet::new();
    for x in src.leaves() {
        let y = c.pi.apply(x).ok_or(CoveringError::Mismatch)?;
        if eval_payoff(g, y)? == Player::Zero {
            accept.insert(x.clone());
        }
    }
    let fiber_of = |gens: &BTreeSet<Node>| -> BTreeSet<Node> {
        gens.iter()
            .flat_map(|u| c.pi.fiber(u).into_iter().cloned())
            .collect()
    };
    let structural = match g.payoff() {
        Payoff::Closed(u) => Some(Payoff::Closed(fiber_of(u))),
        Payoff::Open(u) => Some(Payoff::Open(fiber_of(u))),
        _ => None,
    };
    if let Some(s) = &structural {
        if let Some(leaf) = src.leaves().find(|x| s.contains(x) != accept.contains(*x)) {
            return Err(CoveringError::PreimageDisagrees { leaf: leaf.clone() });
        }
    }
    Ok(Preimage {
        clopen: Payoff::Clopen(accept),
        structural,
    })
}

/// The source tree with the clopen preimage payoff.
pub fn preimage_game(c: &Covering, g: &Game) -> Result<Game, CoveringError> {
    let pre = preimage_payoff(c, g)?;
    Ok(Game::new(c.pi.source_arc().clone(), g.horizon(), pre.clopen)?)
}

/// `c1 ∘ c2` for `c2: T2 -> T1` and `c1: T1 -> T0`; `k` is the minimum.
pub fn compose_coverings(c1: &Covering, c2: &Covering) -> Result<Covering, CoveringError> {
    let pi = compose(&c1.pi, &c2.pi).map_err(|e| match e {
        MorphismError::Mismatch => CoveringError::Mismatch,
        other => other.into(),
    })?;
    Ok(Covering {
        pi: Arc::new(pi),
        phi: Arc::new(CompositeMap {
            outer: c1.phi.clone(),
            inner: c2.phi.clone(),
        }),
        k: c1.k.min(c2.k),
    })
}

/// A chain of coverings `… -> T2 -> T1 -> T0`; `coverings[i]` maps stage
/// `i + 1` to stage `i` and is scheduled at its own `k`.
#[derive(Clone, Debug)]
pub struct CoveringSystem {
    base: Arc<Tree>,
    coverings: Vec<Covering>,
}

impl CoveringSystem {
    pub fn new(base: Arc<Tree>, coverings: Vec<Covering>) -> Result<Self, CoveringError> {
        let mut below = base.clone();
        for (i, c) in coverings.iter().enumerate() {
            if c.target().nodes() != below.nodes() {
                return Err(CoveringError::Mismatch);
            }
            if i > 0 && c.k < coverings[i - 1].k {
                return Err(MorphismError::ScheduleViolated { stage: i, level: c.k }.into());
            }
            below = c.pi.source_arc().clone();
        }
        Ok(CoveringSystem { base, coverings })
    }

    pub fn coverings(&self) -> &[Covering] {
        &self.coverings
    }
}

impl InverseSystem for CoveringSystem {
    fn stage_count(&self) -> Option<usize> {
        Some(self.coverings.len() + 1)
    }

    fn stage(&self, i: usize) -> Arc<Tree> {
        if i == 0 {
            self.base.clone()
        } else {
            let j = i.min(self.coverings.len());
            if j == 0 {
                self.base.clone()
            } else {
                self.coverings[j - 1].pi.source_arc().clone()
            }
        }
    }

    fn transition(&self, i: usize) -> TreeMorphism {
        match self.coverings.get(i) {
            Some(c) => (*c.pi).clone(),
            None => TreeMorphism::identity(self.stage(i)),
        }
    }

    fn fixing_schedule(&self, i: usize) -> usize {
        self.coverings.get(i).map_or(usize::MAX, |c| c.k)
    }
}

/// The covering from the limit (to depth `H`) down to stage `i`: the
/// composite of the chain's coverings from the stabilization stage to `i`.
pub fn extend_limit_covering(
    sys: &CoveringSystem,
    h: Horizon,
    i: usize,
    budget: usize,
) -> Result<Covering, CoveringError> {
    let n = crate::morphism::stabilization_stage(sys, h.get(), budget)?;
    let top = sys.stage(n);
    if i >= n {
        return Ok(Covering::identity(top));
    }
    let mut acc = sys.coverings[n - 1].clone();
    for j in (i..n - 1).rev() {
        acc = compose_coverings(&sys.coverings[j], &acc)?;
    }
    acc.k = sys.fixing_schedule(i);
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full(d: usize) -> Arc<Tree> {
        Arc::new(Tree::full(2, d))
    }

    fn h(k: usize) -> Horizon {
        Horizon::new(k).unwrap()
    }

    #[test]
    fn identity_covering_verifies() {
        let c = Covering::identity(full(2));
        let r = verify_covering(&c, h(2), 1000).unwrap();
        assert!(r.ok());
        assert_eq!(r.mode, VerifyMode::Exhaustive);
    }

    #[test]
    fn constant_phi_fails_lifting() {
        let t = full(2);
        let pi = Arc::new(TreeMorphism::identity(t.clone()));
        let zero = Strategy::complete_canonically(&PreStrategy::empty(Player::Zero), &t, h(2));
        let one = Strategy::complete_canonically(&PreStrategy::empty(Player::One), &t, h(2));
        let c = Covering::new(pi, Arc::new(ConstantMap { zero, one }), 0);
        let r = verify_covering(&c, h(2), 1000).unwrap();
        assert_eq!(r.counterexample.map(|c| c.law), Some(Law::Lifting));
    }

    #[test]
    fn fiber_tracking_on_bijections_is_conjugation() {
        let caps = Caps::default();
        let t = full(2);
        let id = Arc::new(TreeMorphism::identity(t.clone()));
        let ft = FiberTracking::new(id, h(2), &caps);
        let swap = Arc::new(TreeMorphism::letterwise(t.clone(), t.clone(), |a| Letter(1 - a.0)));
        let fs = FiberTracking::new(swap.clone(), h(2), &caps);
        for p in Player::BOTH {
            for s in enumerate_strategies(&t, h(2), p, &caps).unwrap() {
                assert_eq!(ft.apply(p, &s).unwrap(), s);
                let img = fs.apply(p, &s).unwrap();
                for (x, a) in s.moves() {
                    let y = swap.apply(x).unwrap();
                    assert_eq!(img.move_at(y), Some(Letter(1 - a.0)));
                }
            }
        }
        let c = Covering::new(swap, Arc::new(fs), 2);
        assert!(verify_covering(&c, h(2), 1000).unwrap().ok());
    }

    #[test]
    fn collapse_preimage() {
        let t = full(2);
        let collapse = Arc::new(TreeMorphism::letterwise(t.clone(), t.clone(), |_| Letter(0)));
        let c = Covering::new(collapse, Arc::new(IdentityMap), 0);
        let accept = [Node::from_indices(&[0, 0]), Node::from_indices(&[0, 1])].into_iter().collect();
        let g = Game::new(t.clone(), h(2), Payoff::Clopen(accept)).unwrap();
        let pre = preimage_payoff(&c, &g).unwrap();
        assert_eq!(pre.clopen, Payoff::Clopen(t.leaves().cloned().collect()));
    }

    #[test]
    fn compose_min_rule() {
        let t = full(2);
        let mut a = Covering::identity(t.clone());
        a.k = 2;
        let mut b = Covering::identity(t.clone());
        b.k = 1;
        assert_eq!(compose_coverings(&a, &b).unwrap().k, 1);
        let other = Covering::identity(full(1));
        assert!(matches!(compose_coverings(&a, &other), Err(CoveringError::Mismatch)));
    }

    #[test]
    fn limit_of_constant_system_is_identity() {
        let t = full(2);
        let sys = CoveringSystem::new(t.clone(), vec![]).unwrap();
        let c = extend_limit_covering(&sys, h(2), 0, 10).unwrap();
        assert_eq!(*c.pi, TreeMorphism::identity(t));
    }
}
