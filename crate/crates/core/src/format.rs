//! JSON game files, plain-text strategy files and the unraveled-game record.
//!
//! Node strings are letter-index digit sequences, so alphabets are limited
//! to ten letters here. The root is `""` in JSON and `ε` in strategy files.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::borel::BorelCode;
use crate::game::{is_position, Game, GameError, Payoff, Player};
use crate::strategy::{Strategy, StrategyError};
use crate::tree::{Horizon, Letter, Node, Tree, TreeError};
use crate::unravel::{LetterRecord, UnravelGame};

pub const MAX_FILE_ALPHABET: u32 = 10;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid {field}: {message}")]
    Invalid { field: &'static str, message: String },
    #[error(transparent)]
    Game(#[from] GameError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
}

impl FormatError {
    fn invalid(field: &'static str, message: impl Into<String>) -> Self {
        FormatError::Invalid {
            field,
            message: message.into(),
        }
    }
}

impl From<serde_json::Error> for FormatError {
    fn from(e: serde_json::Error) -> Self {
        FormatError::Syntax {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeSpec {
    /// Only `"full"` is accepted.
    Named(String),
    Nodes(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CodeSpec {
    Cyl(String),
    Closed(Vec<String>),
    Complement(Box<CodeSpec>),
    Union(Vec<CodeSpec>),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PayoffSpec {
    Clopen(Vec<String>),
    Closed(Vec<String>),
    Open(Vec<String>),
    Borel(CodeSpec),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameFile {
    pub alphabet: u32,
    pub horizon: usize,
    pub tree: TreeSpec,
    pub payoff: PayoffSpec,
}

fn node(s: &str, alphabet: u32, field: &'static str) -> Result<Node, FormatError> {
    let n = Node::parse_digits(s)
        .ok_or_else(|| FormatError::invalid(field, format!("\"{s}\" is not a digit string")))?;
    if n.letters().iter().any(|l| l.0 >= alphabet) {
        return Err(FormatError::invalid(
            field,
            format!("\"{s}\" uses a letter outside the alphabet of size {alphabet}"),
        ));
    }
    Ok(n)
}

fn nodes(v: &[String], alphabet: u32, field: &'static str) -> Result<BTreeSet<Node>, FormatError> {
    v.iter().map(|s| node(s, alphabet, field)).collect()
}

fn code_from_spec(c: &CodeSpec, alphabet: u32) -> Result<BorelCode, FormatError> {
    Ok(match c {
        CodeSpec::Cyl(s) => BorelCode::Cylinder(node(s, alphabet, "code")?),
        CodeSpec::Closed(v) => BorelCode::ClosedGen(nodes(v, alphabet, "code")?),
        CodeSpec::Complement(c) => BorelCode::Complement(Box::new(code_from_spec(c, alphabet)?)),
        CodeSpec::Union(cs) => {
            let children = cs
                .iter()
                .map(|c| code_from_spec(c, alphabet))
                .collect::<Result<Vec<_>, _>>()?;
            BorelCode::union(children).ok_or_else(|| FormatError::invalid("code", "empty union"))?
        }
    })
}

fn digits(ns: &BTreeSet<Node>) -> Vec<String> {
    ns.iter().map(Node::to_digits).collect()
}

fn code_to_spec(c: &BorelCode) -> CodeSpec {
    match c {
        BorelCode::Cylinder(x) => CodeSpec::Cyl(x.to_digits()),
        BorelCode::ClosedGen(u) => CodeSpec::Closed(digits(u)),
        BorelCode::Complement(c) => CodeSpec::Complement(Box::new(code_to_spec(c))),
        BorelCode::Union(cs) => CodeSpec::Union(cs.iter().map(code_to_spec).collect()),
    }
}

impl GameFile {
    pub fn to_game(&self) -> Result<Game, FormatError> {
        let a = self.alphabet;
        if a == 0 || a > MAX_FILE_ALPHABET {
            return Err(FormatError::invalid(
                "alphabet",
                format!("{a} is outside 1..={MAX_FILE_ALPHABET}"),
            ));
        }
        let h = Horizon::new(self.horizon).map_err(GameError::from)?;
        let tree = match &self.tree {
            TreeSpec::Named(s) if s == "full" => Tree::full(a, self.horizon),
            TreeSpec::Named(s) => {
                return Err(FormatError::invalid("tree", format!("unknown tree name \"{s}\"")))
            }
            TreeSpec::Nodes(v) => {
                Tree::new(a, self.horizon, nodes(v, a, "tree")?).map_err(GameError::from)?
            }
        };
        let payoff = match &self.payoff {
            PayoffSpec::Clopen(v) => Payoff::Clopen(nodes(v, a, "payoff")?),
            PayoffSpec::Closed(v) => Payoff::Closed(nodes(v, a, "payoff")?),
            PayoffSpec::Open(v) => Payoff::Open(nodes(v, a, "payoff")?),
            PayoffSpec::Borel(c) => Payoff::Borel(code_from_spec(c, a)?),
        };
        Ok(Game::new(tree, h, payoff)?)
    }

    pub fn from_game(g: &Game) -> Result<GameFile, FormatError> {
        let a = g.tree().alphabet_size();
        if a > MAX_FILE_ALPHABET {
            return Err(FormatError::invalid(
                "alphabet",
                format!("{a} letters cannot be written as digits"),
            ));
        }
        let h = g.horizon().get();
        let tree = if *g.tree() == Tree::full(a, h) {
            TreeSpec::Named("full".into())
        } else {
            TreeSpec::Nodes(digits(g.tree().nodes()))
        };
        let payoff = match g.payoff() {
            Payoff::Clopen(s) => PayoffSpec::Clopen(digits(s)),
            Payoff::Closed(s) => PayoffSpec::Closed(digits(s)),
            Payoff::Open(s) => PayoffSpec::Open(digits(s)),
            Payoff::Borel(c) => PayoffSpec::Borel(code_to_spec(c)),
        };
        Ok(GameFile {
            alphabet: a,
            horizon: h,
            tree,
            payoff,
        })
    }
}

pub fn parse_game_file(text: &str) -> Result<Game, FormatError> {
    let f: GameFile = serde_json::from_str(text)?;
    f.to_game()
}

pub fn print_game(g: &Game) -> Result<String, FormatError> {
    let f = GameFile::from_game(g)?;
    Ok(serde_json::to_string_pretty(&f).expect("game files always serialize"))
}

fn strategy_node(s: &str) -> Option<Node> {
    match s {
        "ε" | "e" => Some(Node::root()),
        _ => Node::parse_digits(s),
    }
}

/// Parses `player: P` followed by `node -> letter` lines; `#` starts a comment.
pub fn parse_strategy_file(text: &str, g: &Game) -> Result<Strategy, FormatError> {
    let mut player = None;
    let mut moves = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let syntax = |column: usize, message: &str| FormatError::Syntax {
            line: i + 1,
            column,
            message: message.into(),
        };
        if let Some(rest) = line.strip_prefix("player:") {
            let p = rest
                .trim()
                .parse::<usize>()
                .ok()
                .and_then(Player::from_index)
                .ok_or_else(|| syntax(1, "player must be 0 or 1"))?;
            player = Some(p);
            continue;
        }
        let (lhs, rhs) = line
            .split_once("->")
            .ok_or_else(|| syntax(1, "expected `node -> letter`"))?;
        let x = strategy_node(lhs.trim()).ok_or_else(|| syntax(1, "node is not a digit string"))?;
        let col = raw.find("->").map_or(1, |c| c + 3);
        let a = rhs
            .trim()
            .parse::<u32>()
            .map_err(|_| syntax(col, "letter is not a number"))?;
        let p = player.ok_or_else(|| syntax(1, "the `player:` line must come first"))?;
        if !g.tree().contains(&x) || x.len() >= g.horizon().get() {
            return Err(FormatError::invalid(
                "strategy",
                format!("line {}: {} is not an inner node of the game tree", i + 1, x),
            ));
        }
        if !is_position(&x, p) {
            return Err(FormatError::invalid(
                "strategy",
                format!("line {}: {} is not a position of player {}", i + 1, x, p),
            ));
        }
        if moves.insert(x.clone(), Letter(a)).is_some() {
            return Err(FormatError::invalid(
                "strategy",
                format!("line {}: {} has two moves", i + 1, x),
            ));
        }
    }
    let p = player.ok_or_else(|| FormatError::invalid("strategy", "missing `player:` line"))?;
    Ok(Strategy::from_moves(p, moves, g.tree(), g.horizon())?)
}

pub fn print_strategy(s: &Strategy) -> String {
    let mut out = format!("player: {}\n", s.player().index());
    for (x, a) in s.moves() {
        let key = if x.is_empty() { "ε".to_string() } else { x.to_digits() };
        out.push_str(&format!("{key} -> {}\n", a.0));
    }
    out
}

/// The unraveled game as written by the `unravel` command. Nodes of the
/// unraveled tree are sequences of indices into `letters`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnraveledFile {
    pub k: usize,
    pub horizon: usize,
    pub letters: Vec<LetterRecord>,
    pub leaves: Vec<Vec<u32>>,
    pub accept: Vec<Vec<u32>>,
}

impl UnraveledFile {
    pub fn from_unravel(u: &UnravelGame) -> Self {
        let idx = |x: &Node| x.letters().iter().map(|l| l.0).collect::<Vec<u32>>();
        let accept = match u.game.payoff() {
            Payoff::Clopen(a) => a.iter().map(idx).collect(),
            other => other.accepted_leaves(u.game.tree()).iter().map(idx).collect(),
        };
        UnraveledFile {
            k: u.k,
            horizon: u.horizon().get(),
            letters: u.letters.iter().map(|l| l.to_record()).collect(),
            leaves: u.tree.leaves().map(idx).collect(),
            accept,
        }
    }

    /// The unraveled tree and its clopen game.
    pub fn to_game(&self) -> Result<Game, FormatError> {
        let a = self.letters.len() as u32;
        let h = Horizon::new(self.horizon).map_err(GameError::from)?;
        let leaves: Vec<Node> = self.leaves.iter().map(|v| Node::from_indices(v)).collect();
        let tree = Tree::closure(a.max(1), self.horizon, leaves).map_err(GameError::from)?;
        let accept = self.accept.iter().map(|v| Node::from_indices(v)).collect();
        Ok(Game::new(tree, h, Payoff::Clopen(accept))?)
    }

    /// Base letter of each unraveled letter, checked against `alphabet`.
    pub fn base_letters(&self, alphabet: u32) -> Result<Vec<Letter>, FormatError> {
        self.letters
            .iter()
            .map(|r| {
                if r.base < alphabet {
                    Ok(Letter(r.base))
                } else {
                    Err(FormatError::invalid(
                        "letters",
                        format!("base letter {} is outside the alphabet", r.base),
                    ))
                }
            })
            .collect()
    }
}

impl From<TreeError> for FormatError {
    fn from(e: TreeError) -> Self {
        FormatError::Game(GameError::Tree(e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_the_cylinder_game() {
        let g = parse_game_file(
            r#"{"alphabet":2,"horizon":2,"tree":"full","payoff":{"clopen":["00","01"]}}"#,
        )
        .unwrap();
        assert_eq!(g.tree().len(), 7);
        assert_eq!(parse_game_file(&print_game(&g).unwrap()).unwrap(), g);
    }

    #[test]
    fn rejects_unpruned_tree() {
        let e = parse_game_file(
            r#"{"alphabet":2,"horizon":2,"tree":["","0"],"payoff":{"clopen":[]}}"#,
        )
        .unwrap_err();
        assert_eq!(
            e,
            FormatError::Game(GameError::Tree(TreeError::Unpruned {
                node: Node::parse_digits("0").unwrap()
            }))
        );
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let e = parse_game_file("{\n  \"alphabet\": 2,\n  oops }").unwrap_err();
        assert!(matches!(e, FormatError::Syntax { line: 3, .. }), "{e:?}");
    }

    #[test]
    fn borel_payoff() {
        let g = parse_game_file(
            r#"{"alphabet":2,"horizon":4,"tree":"full",
                "payoff":{"borel":{"union":[{"cyl":"00"},{"cyl":"11"}]}}}"#,
        )
        .unwrap();
        assert_eq!(g.payoff().kind(), "borel");
        assert_eq!(parse_game_file(&print_game(&g).unwrap()).unwrap(), g);
    }

    #[test]
    fn strategy_round_trip() {
        let g = parse_game_file(
            r#"{"alphabet":2,"horizon":2,"tree":"full","payoff":{"clopen":["00","01"]}}"#,
        )
        .unwrap();
        let s = parse_strategy_file("player: 0\nε -> 0\n", &g).unwrap();
        assert_eq!(s.move_at(&Node::root()), Some(Letter(0)));
        assert_eq!(parse_strategy_file(&print_strategy(&s), &g).unwrap(), s);
        assert!(parse_strategy_file("player: 0\n0 -> 1\n", &g).is_err());
    }
}
