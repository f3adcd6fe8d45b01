//! Length-preserving isotone tree maps, fixing levels, and sequential inverse
//! limits computed level by level.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use thiserror::Error;

use crate::caps::Caps;
use crate::tree::{Letter, Node, Tree};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MorphismError {
    #[error("cannot compose: the inner target differs from the outer source")]
    Mismatch,
    #[error("invalid morphism at {node}: {reason}")]
    Invalid { node: Node, reason: &'static str },
    #[error("fixing schedule does not reach depth {depth} within {budget} stages")]
    BudgetExceeded { depth: usize, budget: usize },
    #[error("transition {stage} is not {level}-fixing as scheduled")]
    ScheduleViolated { stage: usize, level: usize },
    #[error("{count} morphisms exceed the enumeration cap {cap}")]
    CapExceeded { count: String, cap: u64 },
}

/// A map of node sets between two trees. [`TreeMorphism::validate`] checks
/// that it is length-preserving, isotone and lands in the target.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TreeMorphism {
    source: Arc<Tree>,
    target: Arc<Tree>,
    map: BTreeMap<Node, Node>,
}

impl TreeMorphism {
    /// Stores the map as given; call [`TreeMorphism::validate`] to check it.
    pub fn new(source: Arc<Tree>, target: Arc<Tree>, map: BTreeMap<Node, Node>) -> Self {
        TreeMorphism {
            source,
            target,
            map,
        }
    }

    /// Like [`TreeMorphism::new`] but rejects invalid maps.
    pub fn checked(
        source: Arc<Tree>,
        target: Arc<Tree>,
        map: BTreeMap<Node, Node>,
    ) -> Result<Self, MorphismError> {
        let f = TreeMorphism::new(source, target, map);
        f.check()?;
        Ok(f)
    }

    pub fn identity(t: Arc<Tree>) -> Self {
        let map = t.nodes().iter().map(|x| (x.clone(), x.clone())).collect();
        TreeMorphism::new(t.clone(), t, map)
    }

    /// Applies `f` to every letter of every source node.
    pub fn letterwise(source: Arc<Tree>, target: Arc<Tree>, f: impl Fn(Letter) -> Letter) -> Self {
        let map = source
            .nodes()
            .iter()
            .map(|x| (x.clone(), Node::new(x.letters().iter().map(|&a| f(a)).collect())))
            .collect();
        TreeMorphism::new(source, target, map)
    }

    pub fn source(&self) -> &Tree {
        &self.source
    }

    pub fn target(&self) -> &Tree {
        &self.target
    }

    pub fn source_arc(&self) -> &Arc<Tree> {
        &self.source
    }

    pub fn target_arc(&self) -> &Arc<Tree> {
        &self.target
    }

    pub fn map(&self) -> &BTreeMap<Node, Node> {
        &self.map
    }

    pub fn apply(&self, x: &Node) -> Option<&Node> {
        self.map.get(x)
    }

    /// Source nodes mapped onto `y`, in canonical order.
    pub fn fiber(&self, y: &Node) -> Vec<&Node> {
        self.source
            .level(y.len())
            .filter(|x| self.map.get(*x) == Some(y))
            .collect()
    }

    /// The action on depth-bound leaves.
    pub fn leaf_map(&self) -> BTreeMap<&Node, &Node> {
        self.source
            .leaves()
            .filter_map(|x| self.map.get(x).map(|y| (x, y)))
            .collect()
    }

    /// Length-preserving, isotone, total on the source, image in the target.
    pub fn validate(&self) -> bool {
        self.check().is_ok()
    }

    fn check(&self) -> Result<(), MorphismError> {
        let bad = |node: &Node, reason| {
            Err(MorphismError::Invalid {
                node: node.clone(),
                reason,
            })
        };
        for x in self.source.nodes() {
            let Some(y) = self.map.get(x) else {
                return bad(x, "not in the domain of the map");
            };
            if y.len() != x.len() {
                return bad(x, "length not preserved");
            }
            if !self.target.contains(y) {
                return bad(x, "image outside the target");
            }
            // Isotone on the whole tree follows from isotone on parent links.
            if let Some(p) = x.parent() {
                if !self.map.get(&p).map_or(false, |py| py.is_prefix_of(y)) {
                    return bad(x, "not isotone");
                }
            }
        }
        if let Some(x) = self.map.keys().find(|x| !self.source.contains(x)) {
            return bad(x, "key outside the source");
        }
        Ok(())
    }

    /// Bijective between level `n` of source and target.
    pub fn is_level_bijective(&self, n: usize) -> bool {
        let mut image = BTreeSet::new();
        for x in self.source.level(n) {
            match self.map.get(x) {
                Some(y) if image.insert(y) => {}
                _ => return false,
            }
        }
        image.len() == self.target.level(n).count()
    }

    /// Greatest `k` with the map bijective on every level `<= k`. A map that
    /// is not even bijective at the root still reports 0.
    pub fn fixing_level(&self) -> usize {
        let top = self.source.depth_bound().min(self.target.depth_bound());
        (1..=top)
            .take_while(|&n| self.is_level_bijective(n))
            .last()
            .filter(|_| self.is_level_bijective(0))
            .unwrap_or(0)
    }

    /// `k <= fixing_level()`.
    pub fn is_k_fixing(&self, k: usize) -> bool {
        k <= self.fixing_level()
    }

    /// Restricts source and target to levels `<= n`.
    pub fn level_restrict(&self, n: usize) -> TreeMorphism {
        let source = Arc::new(self.source.level_restrict(n));
        let target = Arc::new(self.target.level_restrict(n));
        let map = self
            .map
            .iter()
            .filter(|(x, _)| x.len() <= n)
            .map(|(x, y)| (x.clone(), y.clone()))
            .collect();
        TreeMorphism::new(source, target, map)
    }

    /// Inverse of a map bijective on every level, if it is one.
    pub fn inverse(&self) -> Option<TreeMorphism> {
        let mut inv = BTreeMap::new();
        for (x, y) in &self.map {
            if inv.insert(y.clone(), x.clone()).is_some() {
                return None;
            }
        }
        if inv.len() != self.target.len() {
            return None;
        }
        Some(TreeMorphism::new(self.target.clone(), self.source.clone(), inv))
    }
}

/// `g ∘ f`.
pub fn compose(g: &TreeMorphism, f: &TreeMorphism) -> Result<TreeMorphism, MorphismError> {
    if f.target.nodes() != g.source.nodes() {
        return Err(MorphismError::Mismatch);
    }
    let map = f
        .map
        .iter()
        .filter_map(|(x, y)| g.map.get(y).map(|z| (x.clone(), z.clone())))
        .collect();
    Ok(TreeMorphism::new(f.source.clone(), g.target.clone(), map))
}

pub fn validate_morphism(f: &TreeMorphism) -> bool {
    f.validate()
}

pub fn fixing_level(f: &TreeMorphism) -> usize {
    f.fixing_level()
}

pub fn is_k_fixing(f: &TreeMorphism, k: usize) -> bool {
    f.is_k_fixing(k)
}

/// Every morphism `source -> target`, canonically ordered by the images of
/// source nodes in canonical order.
pub fn enumerate_morphisms(
    source: &Arc<Tree>,
    target: &Arc<Tree>,
    caps: &Caps,
) -> Result<Vec<TreeMorphism>, MorphismError> {
    let nodes: Vec<&Node> = source.nodes().iter().collect();
    let mut out = Vec::new();
    let mut current: BTreeMap<Node, Node> = BTreeMap::new();
    fn go(
        i: usize,
        nodes: &[&Node],
        target: &Tree,
        current: &mut BTreeMap<Node, Node>,
        out: &mut Vec<BTreeMap<Node, Node>>,
        cap: u64,
    ) -> bool {
        if out.len() as u64 > cap {
            return false;
        }
        if i == nodes.len() {
            out.push(current.clone());
            return true;
        }
        let x = nodes[i];
        let candidates: Vec<Node> = match x.parent() {
            None => target.level(0).cloned().collect(),
            Some(p) => target.children(&current[&p]).cloned().collect(),
        };
        for y in candidates {
            current.insert(x.clone(), y);
            if !go(i + 1, nodes, target, current, out, cap) {
                return false;
            }
        }
        current.remove(x);
        true
    }
    let mut maps = Vec::new();
    if !go(0, &nodes, target, &mut current, &mut maps, caps.max_enumeration) {
        return Err(MorphismError::CapExceeded {
            count: format!("more than {}", caps.max_enumeration),
            cap: caps.max_enumeration,
        });
    }
    out.extend(
        maps.into_iter()
            .map(|m| TreeMorphism::new(source.clone(), target.clone(), m)),
    );
    Ok(out)
}

/// A chain `… -> T2 -> T1 -> T0`. Stages past the end of a finite system
/// repeat the last stage with identity transitions of unbounded fixing level.
pub trait InverseSystem {
    /// `None` for an unbounded system.
    fn stage_count(&self) -> Option<usize>;
    fn stage(&self, i: usize) -> Arc<Tree>;
    /// The map `stage(i + 1) -> stage(i)`.
    fn transition(&self, i: usize) -> TreeMorphism;
    /// A level at which `transition(i)` is promised to be fixing.
    fn fixing_schedule(&self, i: usize) -> usize;
}

/// A finite chain given by its stages and transitions.
#[derive(Clone, Debug)]
pub struct FiniteSystem {
    stages: Vec<Arc<Tree>>,
    transitions: Vec<TreeMorphism>,
    schedule: Vec<usize>,
}

impl FiniteSystem {
    /// `transitions[i]` maps `stages[i + 1]` to `stages[i]` and must be
    /// `schedule[i]`-fixing; the schedule must be nondecreasing.
    pub fn new(
        stages: Vec<Arc<Tree>>,
        transitions: Vec<TreeMorphism>,
        schedule: Vec<usize>,
    ) -> Result<Self, MorphismError> {
        assert!(!stages.is_empty(), "a system needs at least one stage");
        assert_eq!(transitions.len() + 1, stages.len());
        assert_eq!(schedule.len(), transitions.len());
        for (i, f) in transitions.iter().enumerate() {
            f.check()?;
            if f.source.nodes() != stages[i + 1].nodes() || f.target.nodes() != stages[i].nodes() {
                return Err(MorphismError::Mismatch);
            }
            if !f.is_k_fixing(schedule[i]) || (i > 0 && schedule[i] < schedule[i - 1]) {
                return Err(MorphismError::ScheduleViolated {
                    stage: i,
                    level: schedule[i],
                });
            }
        }
        Ok(FiniteSystem {
            stages,
            transitions,
            schedule,
        })
    }

    /// A single tree with no transitions.
    pub fn constant(t: Arc<Tree>) -> Self {
        FiniteSystem {
            stages: vec![t],
            transitions: Vec::new(),
            schedule: Vec::new(),
        }
    }
}

impl InverseSystem for FiniteSystem {
    fn stage_count(&self) -> Option<usize> {
        Some(self.stages.len())
    }

    fn stage(&self, i: usize) -> Arc<Tree> {
        self.stages[i.min(self.stages.len() - 1)].clone()
    }

    fn transition(&self, i: usize) -> TreeMorphism {
        match self.transitions.get(i) {
            Some(f) => f.clone(),
            None => TreeMorphism::identity(self.stage(i)),
        }
    }

    fn fixing_schedule(&self, i: usize) -> usize {
        self.schedule.get(i).copied().unwrap_or(usize::MAX)
    }
}

/// An unbounded system given by generator closures.
pub struct GeneratedSystem {
    stage: Box<dyn Fn(usize) -> Arc<Tree> + Send + Sync>,
    transition: Box<dyn Fn(usize) -> TreeMorphism + Send + Sync>,
    schedule: Box<dyn Fn(usize) -> usize + Send + Sync>,
}

impl GeneratedSystem {
    pub fn new(
        stage: impl Fn(usize) -> Arc<Tree> + Send + Sync + 'static,
        transition: impl Fn(usize) -> TreeMorphism + Send + Sync + 'static,
        schedule: impl Fn(usize) -> usize + Send + Sync + 'static,
    ) -> Self {
        GeneratedSystem {
            stage: Box::new(stage),
            transition: Box::new(transition),
            schedule: Box::new(schedule),
        }
    }
}

impl InverseSystem for GeneratedSystem {
    fn stage_count(&self) -> Option<usize> {
        None
    }

    fn stage(&self, i: usize) -> Arc<Tree> {
        (self.stage)(i)
    }

    fn transition(&self, i: usize) -> TreeMorphism {
        (self.transition)(i)
    }

    fn fixing_schedule(&self, i: usize) -> usize {
        (self.schedule)(i)
    }
}

/// The limit of a system materialized to a fixed depth.
#[derive(Clone, Debug)]
pub struct Limit {
    /// The limit tree, a copy of the levels `<= depth` of `stage(base_stage)`.
    pub tree: Arc<Tree>,
    pub depth: usize,
    /// First stage from which every transition is `depth`-fixing.
    pub base_stage: usize,
    /// Projections to stages `0..=base_stage`.
    pub projections: Vec<TreeMorphism>,
}

impl Limit {
    /// Projection to stage `i` (restricted to levels `<= depth`). Beyond the
    /// base stage this inverts the bijective transitions.
    pub fn projection(&self, sys: &dyn InverseSystem, i: usize) -> Result<TreeMorphism, MorphismError> {
        if let Some(p) = self.projections.get(i) {
            return Ok(p.clone());
        }
        let mut p = self.projections[self.base_stage].clone();
        for j in self.base_stage..i {
            let inv = sys
                .transition(j)
                .level_restrict(self.depth)
                .inverse()
                .ok_or(MorphismError::ScheduleViolated {
                    stage: j,
                    level: self.depth,
                })?;
            p = compose(&inv, &p)?;
        }
        Ok(p)
    }
}

/// First stage whose onward transitions are all `depth`-fixing.
pub fn stabilization_stage(
    sys: &dyn InverseSystem,
    depth: usize,
    budget: usize,
) -> Result<usize, MorphismError> {
    let last = sys.stage_count().map(|m| m - 1);
    (0..=budget)
        .find(|&i| sys.fixing_schedule(i) >= depth || Some(i) == last)
        .ok_or(MorphismError::BudgetExceeded { depth, budget })
}

/// The limit to depth `up_to_depth`, with projections to every stage up to
/// the stabilization stage.
pub fn limit_tree(
    sys: &dyn InverseSystem,
    up_to_depth: usize,
    budget: usize,
) -> Result<Limit, MorphismError> {
    let n = stabilization_stage(sys, up_to_depth, budget)?;
    let base = sys.stage(n);
    let tree = Arc::new(base.level_restrict(up_to_depth));
    let mut projections = vec![TreeMorphism::identity(tree.clone())];
    for j in (0..n).rev() {
        let step = sys.transition(j).level_restrict(up_to_depth);
        let next = compose(&step, projections.last().expect("nonempty"))?;
        projections.push(next);
    }
    projections.reverse();
    Ok(Limit {
        tree,
        depth: up_to_depth,
        base_stage: n,
        projections,
    })
}

/// Compares level `n` of the limit with the set of compatible tuples of
/// level-`n` nodes across stages `0..=base_stage`, via the projections.
pub fn level_functor_check(sys: &dyn InverseSystem, limit: &Limit, n: usize) -> bool {
    if n > limit.depth {
        return false;
    }
    // Compatible tuples built from stage 0 upward.
    let mut tuples: Vec<Vec<Node>> = sys.stage(0).level(n).map(|x| vec![x.clone()]).collect();
    for i in 0..limit.base_stage {
        let f = sys.transition(i);
        let upper = sys.stage(i + 1);
        tuples = tuples
            .into_iter()
            .flat_map(|t| {
                let below = t.last().cloned().expect("nonempty tuple");
                upper
                    .level(n)
                    .filter(|x| f.apply(x) == Some(&below))
                    .map(|x| {
                        let mut t2 = t.clone();
                        t2.push(x.clone());
                        t2
                    })
                    .collect::<Vec<_>>()
            })
            .collect();
    }
    let expected: BTreeSet<Vec<Node>> = tuples.into_iter().collect();
    let mut seen = BTreeSet::new();
    for x in limit.tree.level(n) {
        let tuple: Option<Vec<Node>> = limit
            .projections
            .iter()
            .map(|p| p.apply(x).cloned())
            .collect();
        match tuple {
            Some(t) if expected.contains(&t) && seen.insert(t.clone()) => {}
            _ => return false,
        }
    }
    seen.len() == expected.len()
}

/// A chain of `stages` transitions on the complete binary tree of depth
/// `depth`. Transition `i` collapses every letter past position `i` to 0, so
/// it is exactly `(i + 1)`-fixing and the schedule is `1, 2, ...`.
pub fn collapse_chain(stages: usize, depth: usize) -> FiniteSystem {
    let t = Arc::new(Tree::full(2, depth));
    let transitions = (0..stages)
        .map(|i| {
            let map = t
                .nodes()
                .iter()
                .map(|x| {
                    let y = x
                        .letters()
                        .iter()
                        .enumerate()
                        .map(|(d, &a)| if d > i { Letter(0) } else { a })
                        .collect();
                    (x.clone(), Node::new(y))
                })
                .collect();
            TreeMorphism::new(t.clone(), t.clone(), map)
        })
        .collect();
    FiniteSystem::new(vec![t; stages + 1], transitions, (1..=stages).collect())
        .expect("collapse maps meet their schedule")
}

/// The covering that gives each letter at positions `>= from` a second
/// copy: the source has alphabet `2A`, and `π` reduces letters mod `A`.
/// It is bijective exactly on the levels `<= from`.
pub fn duplicate_letters(target: Arc<Tree>, from: usize) -> TreeMorphism {
    let a = target.alphabet_size();
    let mut map = BTreeMap::new();
    let mut frontier = vec![(Node::root(), Node::root())];
    while let Some((x, y)) = frontier.pop() {
        for c in target.children(&y) {
            let b = c.last().expect("child of a node");
            let copies: &[u32] = if x.len() >= from { &[0, 1] } else { &[0] };
            for &copy in copies {
                frontier.push((x.child(Letter(b.0 + copy * a)), c.clone()));
            }
        }
        map.insert(x, y);
    }
    let source = Tree::new(2 * a, target.depth_bound(), map.keys().cloned())
        .expect("images of a tree form a tree");
    TreeMorphism::new(Arc::new(source), target, map)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn n(s: &str) -> Node {
        Node::parse_digits(s).unwrap()
    }

    fn full(d: usize) -> Arc<Tree> {
        Arc::new(Tree::full(2, d))
    }

    #[test]
    fn validate_examples() {
        let t = full(2);
        assert!(TreeMorphism::identity(t.clone()).validate());
        let mut map = TreeMorphism::identity(t.clone()).map().clone();
        map.insert(n("0"), Node::root());
        assert!(!TreeMorphism::new(t.clone(), t, map).validate());
    }

    #[test]
    fn compose_examples() {
        let t = full(2);
        let id = TreeMorphism::identity(t.clone());
        let swap = TreeMorphism::letterwise(t.clone(), t.clone(), |a| Letter(1 - a.0));
        assert_eq!(compose(&id, &swap).unwrap(), swap);
        assert_eq!(compose(&swap, &id).unwrap(), swap);
        assert_eq!(compose(&swap, &swap).unwrap(), id);
        let other = TreeMorphism::identity(full(1));
        assert_eq!(compose(&other, &swap), Err(MorphismError::Mismatch));
    }

    #[test]
    fn fixing_examples() {
        let t = full(3);
        assert_eq!(TreeMorphism::identity(t.clone()).fixing_level(), 3);
        let collapse = TreeMorphism::letterwise(t.clone(), t.clone(), |_| Letter(0));
        assert_eq!(collapse.fixing_level(), 0);
        assert!(collapse.is_k_fixing(0));
        assert!(!collapse.is_k_fixing(1));
    }

    fn three_stage() -> FiniteSystem {
        collapse_chain(3, 3)
    }

    #[test]
    fn limit_examples() {
        let c = FiniteSystem::constant(full(2));
        let lim = limit_tree(&c, 2, 10).unwrap();
        assert_eq!(lim.tree.nodes(), full(2).nodes());
        assert_eq!(lim.projections.len(), 1);
        assert!(level_functor_check(&c, &lim, 2));

        let sys = three_stage();
        let lim = limit_tree(&sys, 3, 10).unwrap();
        assert_eq!(lim.base_stage, 2);
        for i in 0..3 {
            let p = lim.projection(&sys, i).unwrap();
            assert!(p.validate());
            assert!(p.is_k_fixing(sys.fixing_schedule(i).min(3)));
        }
        for d in 0..=3 {
            assert!(level_functor_check(&sys, &lim, d));
        }
        let lim2 = limit_tree(&sys, 2, 10).unwrap();
        assert_eq!(lim2.base_stage, 1);
        assert_eq!(lim2.tree.nodes(), full(2).nodes());
    }

    #[test]
    fn unbounded_budget() {
        let t = full(2);
        let t2 = t.clone();
        let sys = GeneratedSystem::new(
            move |_| t.clone(),
            move |_| TreeMorphism::identity(t2.clone()),
            |_| 0,
        );
        assert!(matches!(
            limit_tree(&sys, 1, 5),
            Err(MorphismError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn morphism_enumeration() {
        let caps = Caps::default();
        let t = full(2);
        assert_eq!(enumerate_morphisms(&t, &t, &caps).unwrap().len(), 64);
        let one = Arc::new(Tree::new(2, 2, [n(""), n("0"), n("00")]).unwrap());
        assert_eq!(enumerate_morphisms(&t, &one, &caps).unwrap().len(), 1);
        assert!(enumerate_morphisms(&one, &Arc::new(Tree::empty(2, 2)), &caps)
            .unwrap()
            .is_empty());
    }
}
