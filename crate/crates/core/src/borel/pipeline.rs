//! Unraveling of Borel codes by structural recursion, and the end-to-end
//! solver that transfers a clopen solution back to the base game.

use std::collections::BTreeSet;
use std::sync::Arc;

use thiserror::Error;

use crate::borel::BorelCode;
use crate::caps::Caps;
use crate::covering::{compose_coverings, extend_limit_covering, Covering, CoveringError, CoveringSystem};
use crate::game::{Game, GameError, Payoff, Player};
use crate::morphism::TreeMorphism;
use crate::solver::backward_induction;
use crate::strategy::{is_winning, Strategy};
use crate::tree::{Horizon, Node, Tree};
use crate::unravel::{build_unravel_covering, clopen_at_level, UnravelError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PipelineError {
    #[error("horizon {h} is too small for this code; it needs at least {need}")]
    HorizonTooSmall { h: usize, need: usize },
    #[error("the transferred strategy does not win the base game")]
    TransferNotWinning,
    #[error("pipeline winner {pipeline} disagrees with the oracle winner {oracle}")]
    OracleDisagrees { pipeline: Player, oracle: Player },
    #[error("payoff is not a Borel code")]
    NotBorel,
    #[error(transparent)]
    Unravel(#[from] UnravelError),
    #[error(transparent)]
    Covering(#[from] CoveringError),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// Unraveling parameter for a covering that must be `level`-fixing: the
/// special moves sit at `2p` and `2p + 1`, so `2p >= level`.
pub fn param_for_level(level: usize) -> usize {
    level.div_ceil(2)
}

/// Largest unraveling parameter the recursion uses for `code` at `level`.
pub fn max_param(code: &BorelCode, level: usize) -> usize {
    match code {
        BorelCode::Cylinder(_) | BorelCode::ClosedGen(_) => param_for_level(level),
        BorelCode::Complement(c) => max_param(c, level),
        BorelCode::Union(cs) => cs
            .iter()
            .enumerate()
            .map(|(j, c)| max_param(c, level + j))
            .chain(std::iter::once(param_for_level(level + cs.len())))
            .max()
            .unwrap_or(0),
    }
}

/// Least horizon at which `code` can be unraveled from level 0.
pub fn minimal_horizon(code: &BorelCode) -> usize {
    (2 * max_param(code, 0) + 2).max(2)
}

/// Number of elementary unravelings the recursion performs.
pub fn stage_count(code: &BorelCode) -> usize {
    match code {
        BorelCode::Cylinder(_) | BorelCode::ClosedGen(_) => 1,
        BorelCode::Complement(c) => stage_count(c),
        BorelCode::Union(cs) => cs.iter().map(stage_count).sum::<usize>() + 1,
    }
}

/// The preimage of `code` along `pi`, as a code over the source tree.
pub fn pullback_code(code: &BorelCode, pi: &TreeMorphism) -> BorelCode {
    let fiber = |gens: &BTreeSet<Node>| -> BTreeSet<Node> {
        gens.iter()
            .flat_map(|u| pi.fiber(u).into_iter().cloned())
            .collect()
    };
    match code {
        BorelCode::Cylinder(x) => {
            BorelCode::Complement(Box::new(BorelCode::ClosedGen(fiber(&BTreeSet::from([x.clone()])))))
        }
        BorelCode::ClosedGen(u) => BorelCode::ClosedGen(fiber(u)),
        BorelCode::Complement(c) => BorelCode::Complement(Box::new(pullback_code(c, pi))),
        BorelCode::Union(cs) => BorelCode::Union(cs.iter().map(|c| pullback_code(c, pi)).collect()),
    }
}

/// A covering of the base tree whose preimage of the coded set is clopen.
#[derive(Clone, Debug)]
pub struct CodeCovering {
    pub covering: Covering,
    /// Accepted leaves of the source tree.
    pub preimage: Payoff,
    /// Elementary unravel coverings in the order they were built.
    pub chain: Vec<Covering>,
    /// The preimage is decided at this length.
    pub decision_bound: usize,
}

impl CodeCovering {
    pub fn source(&self) -> &Arc<Tree> {
        self.covering.pi.source_arc()
    }
}

fn complement_clopen(p: &Payoff, t: &Tree) -> Payoff {
    p.complement(t)
}

/// Unravels the set coded by `code` over `tree`, with a `level`-covering.
pub fn unravel_code(
    tree: &Arc<Tree>,
    h: Horizon,
    code: &BorelCode,
    level: usize,
    caps: &Caps,
) -> Result<CodeCovering, PipelineError> {
    let need = 2 * max_param(code, level) + 2;
    if need > h.get() {
        return Err(PipelineError::HorizonTooSmall { h: h.get(), need });
    }
    match code {
        BorelCode::ClosedGen(u) => {
            let p = param_for_level(level);
            let g = Game::new(tree.clone(), h, Payoff::Closed(u.clone()))?;
            let (ug, mut c) = build_unravel_covering(&g, p, caps)?;
            c.k = level;
            Ok(CodeCovering {
                preimage: ug.game.payoff().clone(),
                chain: vec![c.clone()],
                covering: c,
                decision_bound: ug.decision_level(),
            })
        }
        BorelCode::Cylinder(x) => {
            let inner = BorelCode::ClosedGen(BTreeSet::from([x.clone()]));
            let mut r = unravel_code(tree, h, &inner, level, caps)?;
            r.preimage = complement_clopen(&r.preimage, r.covering.source());
            Ok(r)
        }
        BorelCode::Complement(c) => {
            let mut r = unravel_code(tree, h, c, level, caps)?;
            r.preimage = complement_clopen(&r.preimage, r.covering.source());
            Ok(r)
        }
        BorelCode::Union(cs) => unravel_union(tree, h, cs, level, caps),
    }
}

fn unravel_union(
    tree: &Arc<Tree>,
    h: Horizon,
    cs: &[BorelCode],
    level: usize,
    caps: &Caps,
) -> Result<CodeCovering, PipelineError> {
    let mut stages: Vec<Covering> = Vec::new();
    let mut chain: Vec<Covering> = Vec::new();
    let mut decision_bound = 0;
    // Projection from the current top stage to the base tree.
    let mut down = Arc::new(TreeMorphism::identity(tree.clone()));
    for (j, child) in cs.iter().enumerate() {
        let top = down.source_arc().clone();
        let pulled = pullback_code(child, &down);
        let r = unravel_code(&top, h, &pulled, level + j, caps)?;
        decision_bound = decision_bound.max(r.decision_bound);
        chain.extend(r.chain.iter().cloned());
        down = Arc::new(
            crate::morphism::compose(&down, &r.covering.pi).map_err(CoveringError::from)?,
        );
        stages.push(r.covering);
    }
    let sys = CoveringSystem::new(tree.clone(), stages)?;
    let limit = extend_limit_covering(&sys, h, 0, cs.len() + 1)?;
    let top = limit.pi.source_arc().clone();
    // The pulled-back union, written as an open set: minimal nodes below
    // which every leaf lies in some pulled-back set.
    let code = BorelCode::Union(cs.to_vec());
    let inside = |x: &Node| limit.pi.apply(x).map_or(false, |y| code.eval(y));
    let gens = open_generators(&top, &inside);
    let closed = BorelCode::ClosedGen(gens);
    let last = unravel_code(&top, h, &closed, level + cs.len(), caps)?;
    decision_bound = decision_bound.max(last.decision_bound);
    chain.extend(last.chain.iter().cloned());
    let covering = compose_coverings(&limit, &last.covering)?;
    // The union is the complement of the closed set just unraveled.
    let preimage = complement_clopen(&last.preimage, last.covering.source());
    Ok(CodeCovering {
        covering,
        preimage,
        chain,
        decision_bound,
    })
}

/// Minimal nodes all of whose leaves satisfy `inside`.
fn open_generators(t: &Tree, inside: &dyn Fn(&Node) -> bool) -> BTreeSet<Node> {
    let h = t.depth_bound();
    let mut full = BTreeSet::new();
    for x in t.nodes().iter().rev() {
        let ok = if x.len() == h {
            inside(x)
        } else {
            t.children(x).all(|c| full.contains(c))
        };
        if ok {
            full.insert(x.clone());
        }
    }
    full.iter()
        .filter(|x| x.parent().map_or(true, |p| !full.contains(&p)))
        .cloned()
        .collect()
}

/// Outcome of [`solve_borel`].
#[derive(Clone, Debug)]
pub struct PipelineReport {
    pub winner: Player,
    pub base_strategy: Strategy,
    pub covering_chain: Vec<Covering>,
    /// Fixing level of the composite projection.
    pub total_fixing: usize,
    pub oracle_winner: Player,
    pub unraveled_nodes: usize,
    pub decision_bound: usize,
}

/// Unravels the code at level 0, solves the clopen game by backward
/// induction, transfers the strategy down and checks it against the oracle.
pub fn solve_borel(g: &Game, caps: &Caps) -> Result<PipelineReport, PipelineError> {
    let code = match g.payoff() {
        Payoff::Borel(c) => c.clone(),
        _ => return Err(PipelineError::NotBorel),
    };
    let r = unravel_code(g.tree_arc(), g.horizon(), &code, 0, caps)?;
    let lifted = Game::new(r.source().clone(), g.horizon(), r.preimage.clone())?;
    let sol = backward_induction(&lifted);
    let base_strategy = r.covering.phi.apply(sol.winner, &sol.strategy)?;
    if !is_winning(base_strategy.pre(), g) {
        return Err(PipelineError::TransferNotWinning);
    }
    let oracle_winner = crate::oracle::oracle_winner(g);
    if oracle_winner != sol.winner {
        return Err(PipelineError::OracleDisagrees {
            pipeline: sol.winner,
            oracle: oracle_winner,
        });
    }
    Ok(PipelineReport {
        winner: sol.winner,
        base_strategy,
        total_fixing: r.covering.pi.fixing_level(),
        covering_chain: r.chain,
        oracle_winner,
        unraveled_nodes: lifted.tree().len(),
        decision_bound: r.decision_bound,
    })
}

/// Whether the preimage of a code covering is decided at its bound.
pub fn check_code_clopen(r: &CodeCovering, h: Horizon) -> Result<bool, PipelineError> {
    let g = Game::new(r.source().clone(), h, r.preimage.clone())?;
    Ok(clopen_at_level(&g, r.decision_bound))
}

/// Base tree for the code corpus: complete binary to depth 2, then padded
/// with letter 0 down to `h`.
pub fn padded_binary(h: usize) -> Tree {
    let mut nodes: Vec<Node> = Tree::full(2, 2.min(h)).leaves().cloned().collect();
    for x in nodes.iter_mut() {
        while x.len() < h {
            *x = x.child(crate::tree::Letter(0));
        }
    }
    Tree::closure(2, h, nodes).expect("padded leaves form a tree")
}

/// Atoms of the code corpus.
pub fn corpus_atoms() -> Vec<BorelCode> {
    let n = |s: &str| Node::parse_digits(s).expect("digit string");
    vec![
        BorelCode::cylinder(n("0")),
        BorelCode::cylinder(n("11")),
        BorelCode::closed([n("01")]),
        BorelCode::closed([n("1"), n("00")]),
    ]
}

/// Every code over the atoms of nesting depth at most 2 whose unions have
/// one or two children.
pub fn code_corpus() -> Vec<BorelCode> {
    fn grow(below: &[BorelCode]) -> Vec<BorelCode> {
        let mut out = Vec::new();
        for c in below {
            out.push(c.clone().complement());
            out.push(BorelCode::Union(vec![c.clone()]));
        }
        for a in below {
            for b in below {
                out.push(BorelCode::Union(vec![a.clone(), b.clone()]));
            }
        }
        out
    }
    let atoms = corpus_atoms();
    let depth1 = grow(&atoms);
    let upto1: Vec<BorelCode> = atoms.iter().chain(&depth1).cloned().collect();
    let depth2 = grow(&upto1).into_iter().filter(|c| c.nesting_depth() == 2);
    let mut all: Vec<BorelCode> = upto1;
    all.extend(depth2);
    all.sort();
    all.dedup();
    all
}
