//! Finite-horizon Gale-Stewart games and the covering machinery behind Borel
//! determinacy: strategies, solvers, tree morphisms and inverse limits,
//! coverings, closed-game unraveling and a Borel-code pipeline.

pub mod borel;
pub mod caps;
pub mod covering;
pub mod format;
pub mod game;
pub mod morphism;
pub mod oracle;
pub mod selftest;
pub mod solver;
pub mod strategy;
pub mod tree;
pub mod unravel;

pub use borel::{BorelCode, PipelineReport};
pub use caps::Caps;
pub use covering::{Covering, StrategyMap};
pub use game::{Game, Payoff, Player};
pub use morphism::{InverseSystem, TreeMorphism};
pub use strategy::{PreStrategy, QuasiStrategy, Strategy};
pub use tree::{Horizon, Letter, Node, Tree};
