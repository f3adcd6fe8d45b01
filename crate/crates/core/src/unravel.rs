//! Unraveling of a closed game. Moves carry a base letter and a tree: at
//! move `2k` player zero also commits to a quasistrategy, at move `2k+1`
//! player one answers with a witness that she wins every extension of some
//! position (a "pencil") or with a quasistrategy of hers that keeps the
//! play inside the payoff. Every other move carries the forced subtree.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::caps::Caps;
use crate::covering::{preimage_payoff, Covering, CoveringError};
use crate::game::{decision_depth, Game, GameError, Payoff, Player};
use crate::morphism::TreeMorphism;
use crate::tree::{Horizon, Letter, Node, Tree};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum UnravelError {
    #[error("unraveling needs 2k + 1 < H (k = {k}, H = {h})")]
    HorizonTooSmall { k: usize, h: usize },
    #[error("unraveling needs a closed payoff, got {kind}")]
    NotClosed { kind: &'static str },
    #[error("{what}: more than {cap} objects")]
    CapExceeded { what: &'static str, cap: u64 },
    #[error("valid position {node} has no valid extension (residual closed determinacy fails)")]
    NotPruned { node: Node },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Covering(#[from] CoveringError),
}

/// A move of the unraveled game: a base letter and a tree over the base
/// alphabet governing later moves.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Debug)]
pub struct UnravelLetter {
    pub base: Letter,
    pub aux: Tree,
}

/// Serialized form of an [`UnravelLetter`]: digit strings for the aux nodes.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct LetterRecord {
    pub base: u32,
    pub aux: Vec<String>,
}

impl UnravelLetter {
    pub fn to_record(&self) -> LetterRecord {
        LetterRecord {
            base: self.base.0,
            aux: self.aux.nodes().iter().map(|n| n.to_digits()).collect(),
        }
    }
}

/// Knobs for deliberately broken constructions used by negative tests.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct UnravelOptions {
    /// Also allow the forced subtree as player one's move at `2k+1`.
    pub allow_plain_condition_moves: bool,
}

/// The unraveled game and its projection to the base game.
#[derive(Clone, Debug)]
pub struct UnravelGame {
    pub base: Game,
    pub k: usize,
    /// Canonically sorted letters; letter `i` of the tree is `letters[i]`.
    pub letters: Vec<UnravelLetter>,
    pub tree: Arc<Tree>,
    pub pi: Arc<TreeMorphism>,
    /// The unraveled tree with the clopen preimage of the base payoff.
    pub game: Game,
}

impl UnravelGame {
    pub fn horizon(&self) -> Horizon {
        self.base.horizon()
    }

    /// Letters along a node of the unraveled tree.
    pub fn decode(&self, x: &Node) -> Vec<UnravelLetter> {
        x.letters().iter().map(|a| self.letters[a.index()].clone()).collect()
    }

    /// Positions of length `2k+2`, where the winner is settled.
    pub fn decision_level(&self) -> usize {
        2 * self.k + 2
    }
}

/// Base nodes all of whose leaves have a prefix in `U`.
fn dead_nodes(g: &Game, gens: &BTreeSet<Node>) -> BTreeSet<Node> {
    let t = g.tree();
    let h = g.horizon().get();
    let mut dead = BTreeSet::new();
    for y in t.nodes().iter().rev() {
        let hit = (0..=y.len()).any(|n| gens.contains(&y.prefix(n)));
        if hit || (y.len() < h && t.children(y).all(|c| dead.contains(c))) {
            dead.insert(y.clone());
        }
    }
    dead
}

struct Ctx<'a> {
    base: &'a Game,
    k: usize,
    dead: BTreeSet<Node>,
    cap: u64,
    options: UnravelOptions,
}

/// Tree of a node set under `r`'s alphabet and depth.
fn tree_like(r: &Tree, nodes: BTreeSet<Node>) -> Tree {
    Tree::from_parts_unchecked(r.alphabet_size(), r.depth_bound(), nodes)
}

/// Strategy subtrees of quasistrategies of `player` on `r`, whose root sits
/// at global length `offset`, keeping only trees whose leaves pass `leaf_ok`.
fn quasi_subtrees(
    r: &Tree,
    offset: usize,
    player: Player,
    leaf_ok: &dyn Fn(&Node) -> bool,
    cap: u64,
) -> Result<Vec<Tree>, UnravelError> {
    fn go(
        r: &Tree,
        y: &Node,
        offset: usize,
        player: Player,
        leaf_ok: &dyn Fn(&Node) -> bool,
        cap: u64,
    ) -> Result<Vec<BTreeSet<Node>>, UnravelError> {
        let over = || UnravelError::CapExceeded {
            what: "quasistrategy subtrees",
            cap,
        };
        if y.len() == r.depth_bound() {
            return Ok(if leaf_ok(y) {
                vec![BTreeSet::from([y.clone()])]
            } else {
                vec![]
            });
        }
        let kids: Vec<Vec<BTreeSet<Node>>> = r
            .children(y)
            .map(|c| go(r, c, offset, player, leaf_ok, cap))
            .collect::<Result<_, _>>()?;
        let chooses = (offset + y.len()) % 2 == player.index();
        let mut acc: Vec<BTreeSet<Node>> = vec![BTreeSet::from([y.clone()])];
        if chooses {
            // Nonempty subsets of children, each with one of its subtrees.
            let mut with_any: Vec<(bool, BTreeSet<Node>)> = vec![(false, BTreeSet::from([y.clone()]))];
            for opts in &kids {
                let mut next = Vec::new();
                for (used, partial) in &with_any {
                    next.push((*used, partial.clone()));
                    for o in opts {
                        let mut s = partial.clone();
                        s.extend(o.iter().cloned());
                        next.push((true, s));
                    }
                }
                if next.len() as u64 > cap {
                    return Err(over());
                }
                with_any = next;
            }
            acc = with_any.into_iter().filter(|(u, _)| *u).map(|(_, s)| s).collect();
        } else {
            for opts in &kids {
                if opts.is_empty() {
                    return Ok(vec![]);
                }
                let mut next = Vec::with_capacity(acc.len() * opts.len());
                for partial in &acc {
                    for o in opts {
                        let mut s = partial.clone();
                        s.extend(o.iter().cloned());
                        next.push(s);
                    }
                }
                if next.len() as u64 > cap {
                    return Err(over());
                }
                acc = next;
            }
        }
        Ok(acc)
    }
    Ok(go(r, &Node::root(), offset, player, leaf_ok, cap)?
        .into_iter()
        .map(|s| tree_like(r, s))
        .collect())
}

/// Whether `aux` is the strategy subtree of a quasistrategy of `player` on
/// `r` (root at global length `offset`) with every leaf passing `leaf_ok`.
fn is_quasi_subtree(
    aux: &Tree,
    r: &Tree,
    offset: usize,
    player: Player,
    leaf_ok: &dyn Fn(&Node) -> bool,
) -> bool {
    if aux.depth_bound() != r.depth_bound() || !aux.contains(&Node::root()) {
        return false;
    }
    aux.nodes().iter().all(|y| {
        if !r.contains(y) {
            return false;
        }
        if y.len() == r.depth_bound() {
            return leaf_ok(y);
        }
        let mine: Vec<&Node> = aux.children(y).collect();
        if (offset + y.len()) % 2 == player.index() {
            !mine.is_empty()
        } else {
            mine.len() == r.children(y).count()
        }
    })
}

/// `prefixes(w) ∪ { y ∈ r | w ⪯ y }`.
pub fn pencil(r: &Tree, w: &Node) -> Tree {
    let mut nodes: BTreeSet<Node> = w.prefixes().collect();
    nodes.extend(r.descendants(w).cloned());
    tree_like(r, nodes)
}

impl Ctx<'_> {
    fn h(&self) -> usize {
        self.base.horizon().get()
    }

    fn is_dead(&self, global: &Node) -> bool {
        self.dead.contains(global)
    }

    fn hits_u(&self, global_leaf: &Node) -> bool {
        // Leaves are dead exactly when they have a prefix in U.
        self.is_dead(global_leaf)
    }

    /// Condition moves at `2k+1`: pencils of dead nodes and losing
    /// quasistrategies of player one.
    fn condition_auxes(&self, r: &Tree, global: &Node) -> Result<Vec<Tree>, UnravelError> {
        let mut out: BTreeSet<Tree> = r
            .nodes()
            .iter()
            .filter(|w| self.is_dead(&global.concat(w)))
            .map(|w| pencil(r, w))
            .collect();
        let ok = |y: &Node| !self.hits_u(&global.concat(y));
        out.extend(quasi_subtrees(r, global.len(), Player::One, &ok, self.cap)?);
        if self.options.allow_plain_condition_moves {
            out.insert(r.clone());
        }
        Ok(out.into_iter().collect())
    }

    /// All valid next letters after a valid position with projection
    /// `global` and constraint tree `gt`.
    fn candidates(&self, len: usize, global: &Node, gt: &Tree) -> Result<Vec<UnravelLetter>, UnravelError> {
        let mut out = Vec::new();
        for b in gt.child_letters(&Node::root()) {
            let r = gt.sub_at(&Node::root().child(b));
            let g2 = global.child(b);
            if len == 2 * self.k {
                let any = |_: &Node| true;
                for aux in quasi_subtrees(&r, g2.len(), Player::Zero, &any, self.cap)? {
                    out.push(UnravelLetter { base: b, aux });
                }
            } else if len == 2 * self.k + 1 {
                for aux in self.condition_auxes(&r, &g2)? {
                    out.push(UnravelLetter { base: b, aux });
                }
            } else {
                out.push(UnravelLetter { base: b, aux: r });
            }
        }
        Ok(out)
    }

    fn valid_ext(&self, global: &Node, gt: &Tree, len: usize, a: &UnravelLetter) -> bool {
        let step = Node::root().child(a.base);
        if !gt.contains(&step) {
            return false;
        }
        let r = gt.sub_at(&step);
        let g2 = global.child(a.base);
        if len == 2 * self.k {
            is_quasi_subtree(&a.aux, &r, g2.len(), Player::Zero, &|_| true)
        } else if len == 2 * self.k + 1 {
            self.winning_condition(&r, &g2, &a.aux)
                || self.losing_condition(&r, &g2, &a.aux)
                || (self.options.allow_plain_condition_moves && a.aux == r)
        } else {
            a.aux == r
        }
    }

    fn winning_condition(&self, r: &Tree, global: &Node, aux: &Tree) -> bool {
        r.nodes()
            .iter()
            .filter(|w| self.is_dead(&global.concat(w)))
            .any(|w| pencil(r, w) == *aux)
    }

    fn losing_condition(&self, r: &Tree, global: &Node, aux: &Tree) -> bool {
        let ok = |y: &Node| !self.hits_u(&global.concat(y));
        is_quasi_subtree(aux, r, global.len(), Player::One, &ok)
    }
}

fn context<'a>(g: &'a Game, k: usize, caps: &Caps, options: UnravelOptions) -> Result<Ctx<'a>, UnravelError> {
    let h = g.horizon().get();
    if 2 * k + 1 >= h {
        return Err(UnravelError::HorizonTooSmall { k, h });
    }
    let gens = match g.payoff() {
        Payoff::Closed(u) => u.clone(),
        other => return Err(UnravelError::NotClosed { kind: other.kind() }),
    };
    Ok(Ctx {
        base: g,
        k,
        dead: dead_nodes(g, &gens),
        cap: caps.max_enumeration,
        options,
    })
}

/// The constraint tree after a sequence of unraveled letters.
pub fn get_tree(g: &Game, x: &[UnravelLetter]) -> Tree {
    match x.last() {
        None => g.tree().clone(),
        Some(a) => a.aux.clone(),
    }
}

/// Whether `x·a` is valid, given that `x` is.
pub fn valid_ext(g: &Game, k: usize, x: &[UnravelLetter], a: &UnravelLetter) -> Result<bool, UnravelError> {
    let ctx = context(g, k, &Caps::default(), UnravelOptions::default())?;
    let global = Node::new(x.iter().map(|l| l.base).collect());
    Ok(ctx.valid_ext(&global, &get_tree(g, x), x.len(), a))
}

/// Whether `x·a` (with `|x| = 2k+1`) is a winning-condition move.
pub fn winning_condition(g: &Game, k: usize, x: &[UnravelLetter], a: &UnravelLetter) -> Result<bool, UnravelError> {
    let ctx = context(g, k, &Caps::default(), UnravelOptions::default())?;
    let global = Node::new(x.iter().map(|l| l.base).collect());
    let step = Node::root().child(a.base);
    let gt = get_tree(g, x);
    Ok(gt.contains(&step) && ctx.winning_condition(&gt.sub_at(&step), &global.child(a.base), &a.aux))
}

/// Whether `x·a` (with `|x| = 2k+1`) is a losing-condition move.
pub fn losing_condition(g: &Game, k: usize, x: &[UnravelLetter], a: &UnravelLetter) -> Result<bool, UnravelError> {
    let ctx = context(g, k, &Caps::default(), UnravelOptions::default())?;
    let global = Node::new(x.iter().map(|l| l.base).collect());
    let step = Node::root().child(a.base);
    let gt = get_tree(g, x);
    Ok(gt.contains(&step) && ctx.losing_condition(&gt.sub_at(&step), &global.child(a.base), &a.aux))
}

/// Builds the unraveled tree at parameter `k` together with its projection.
pub fn build_unravel_game(g: &Game, k: usize, caps: &Caps) -> Result<UnravelGame, UnravelError> {
    build_unravel_game_with(g, k, caps, UnravelOptions::default())
}

pub fn build_unravel_game_with(
    g: &Game,
    k: usize,
    caps: &Caps,
    options: UnravelOptions,
) -> Result<UnravelGame, UnravelError> {
    let ctx = context(g, k, caps, options)?;
    let h = ctx.h();
    // Sequences of interned letter ids; ids are renumbered canonically below.
    let mut intern: HashMap<UnravelLetter, u32> = HashMap::new();
    let mut letters: Vec<UnravelLetter> = Vec::new();
    let mut raw: Vec<Vec<u32>> = Vec::new();
    let mut stack: Vec<(Vec<u32>, Node, Tree)> = vec![(Vec::new(), Node::root(), g.tree().clone())];
    while let Some((seq, global, gt)) = stack.pop() {
        if raw.len() as u64 > caps.max_enumeration {
            return Err(UnravelError::CapExceeded {
                what: "unraveled positions",
                cap: caps.max_enumeration,
            });
        }
        if seq.len() < h {
            let cands = ctx.candidates(seq.len(), &global, &gt)?;
            if cands.is_empty() {
                return Err(UnravelError::NotPruned {
                    node: Node::new(seq.iter().map(|&i| Letter(i)).collect()),
                });
            }
            for a in cands {
                let id = *intern.entry(a.clone()).or_insert_with(|| {
                    letters.push(a.clone());
                    (letters.len() - 1) as u32
                });
                let mut s2 = seq.clone();
                s2.push(id);
                stack.push((s2, global.child(a.base), a.aux));
            }
        }
        raw.push(seq);
    }
    let mut order: Vec<u32> = (0..letters.len() as u32).collect();
    order.sort_by(|&a, &b| letters[a as usize].cmp(&letters[b as usize]));
    let mut rank = vec![0u32; letters.len()];
    for (new, &old) in order.iter().enumerate() {
        rank[old as usize] = new as u32;
    }
    let sorted: Vec<UnravelLetter> = order.iter().map(|&i| letters[i as usize].clone()).collect();
    let nodes: BTreeSet<Node> = raw
        .iter()
        .map(|s| Node::new(s.iter().map(|&i| Letter(rank[i as usize])).collect()))
        .collect();
    let alphabet = sorted.len().max(1) as u32;
    let tree = Arc::new(Tree::from_parts_unchecked(alphabet, h, nodes));
    let map: BTreeMap<Node, Node> = tree
        .nodes()
        .iter()
        .map(|x| {
            let y = Node::new(x.letters().iter().map(|a| sorted[a.index()].base).collect());
            (x.clone(), y)
        })
        .collect();
    let pi = Arc::new(TreeMorphism::new(tree.clone(), g.tree_arc().clone(), map));
    let skeleton = Covering::new(pi.clone(), Arc::new(crate::covering::IdentityMap), 0);
    let pre = preimage_payoff(&skeleton, g)?;
    let game = Game::new(tree.clone(), g.horizon(), pre.clopen)?;
    Ok(UnravelGame {
        base: g.clone(),
        k,
        letters: sorted,
        tree,
        pi,
        game,
    })
}

/// The unraveled game with its covering `(π, fiber tracking, 2k)`.
pub fn build_unravel_covering(g: &Game, k: usize, caps: &Caps) -> Result<(UnravelGame, Covering), UnravelError> {
    let u = build_unravel_game(g, k, caps)?;
    let c = Covering::with_fiber_tracking(u.pi.clone(), g.horizon(), 2 * k, caps);
    Ok((u, c))
}

/// Every valid position of length `2k+2` decides the winner.
pub fn check_preimage_clopen(u: &UnravelGame) -> bool {
    clopen_at_level(&u.game, u.decision_level())
}

/// All positions of length `level` have decision depth `<= level`.
pub fn clopen_at_level(g: &Game, level: usize) -> bool {
    let level = level.min(g.horizon().get());
    g.tree()
        .level(level)
        .all(|x| decision_depth(g, x).map_or(false, |d| d <= level))
}

/// Positions of length `2k+1` that lack a valid extension (empty when the
/// tree is pruned).
pub fn unpruned_condition_positions(u: &UnravelGame) -> Vec<Node> {
    u.tree
        .level(2 * u.k + 1)
        .filter(|x| u.tree.children(x).next().is_none())
        .cloned()
        .collect()
}
