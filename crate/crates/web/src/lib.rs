//! wasm-bindgen entry points for the browser demo. Every function takes and
//! returns JSON text; failures come back as `{"error": "..."}`.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use gsdet::borel::solve_borel;
use gsdet::format::{parse_game_file, parse_strategy_file};
use gsdet::solver::backward_induction;
use gsdet::strategy::{consistent_leaves, is_winning};
use gsdet::unravel::{build_unravel_covering, clopen_at_level, unpruned_condition_positions};
use gsdet::{Caps, Game, Payoff};

// Browser tabs get a smaller budget than the CLI.
const WEB_CAP: u64 = 200_000;

fn caps() -> Caps {
    Caps::new(WEB_CAP)
}

fn respond(r: Result<Value, String>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn load(game: &str) -> Result<Game, String> {
    parse_game_file(game).map_err(|e| e.to_string())
}

pub fn solve_value(game: &str) -> Result<Value, String> {
    let g = load(game)?;
    let (winner, strategy, method) = match g.payoff() {
        Payoff::Borel(_) => {
            let r = solve_borel(&g, &caps()).map_err(|e| e.to_string())?;
            let m = format!("unraveled through {} coverings", r.covering_chain.len());
            (r.winner, r.base_strategy, m)
        }
        _ => {
            let r = backward_induction(&g);
            (r.winner, r.strategy, "backward induction".to_string())
        }
    };
    let plays: Vec<String> = consistent_leaves(strategy.pre(), g.tree(), g.horizon())
        .iter()
        .map(|l| l.to_digits())
        .collect();
    let reach: std::collections::BTreeSet<_> = consistent_leaves(strategy.pre(), g.tree(), g.horizon())
        .iter()
        .flat_map(|l| l.prefixes().collect::<Vec<_>>())
        .collect();
    let moves: serde_json::Map<String, Value> = strategy
        .moves()
        .filter(|(x, _)| reach.contains(*x))
        .map(|(x, a)| (x.to_digits(), json!(a.0)))
        .collect();
    Ok(json!({
        "winner": winner.index(),
        "method": method,
        "strategy": moves,
        "plays": plays,
        "leaves": g.leaves().map(|l| json!({"node": l.to_digits(), "zero_wins": g.payoff().contains(l)})).collect::<Vec<_>>(),
    }))
}

pub fn check_value(game: &str, strategy: &str) -> Result<Value, String> {
    let g = load(game)?;
    let s = parse_strategy_file(strategy, &g).map_err(|e| e.to_string())?;
    let win = is_winning(s.pre(), &g);
    let lost: Vec<String> = consistent_leaves(s.pre(), g.tree(), g.horizon())
        .iter()
        .filter(|l| g.payoff().contains(l) != (s.player().index() == 0))
        .map(|l| l.to_digits())
        .collect();
    Ok(json!({ "player": s.player().index(), "winning": win, "losing_plays": lost }))
}

pub fn unravel_value(game: &str, k: usize) -> Result<Value, String> {
    let g = load(game)?;
    if !matches!(g.payoff(), Payoff::Closed(_)) {
        return Err(format!("unravel needs a closed payoff, got {}", g.payoff().kind()));
    }
    let (u, c) = build_unravel_covering(&g, k, &caps()).map_err(|e| e.to_string())?;
    let level = u.decision_level();
    Ok(json!({
        "letters": u.letters.len(),
        "nodes": u.tree.len(),
        "fixing_level": c.pi.fixing_level(),
        "decision_depth": level,
        "clopen": clopen_at_level(&u.game, level),
        "pruned": unpruned_condition_positions(&u).is_empty(),
        "winner": backward_induction(&u.game).winner.index(),
        "base_winner": backward_induction(&g).winner.index(),
        "sample_letters": u.letters.iter().take(12).map(|a| a.to_record()).collect::<Vec<_>>(),
    }))
}

/// Winner, reachable strategy moves and the plays it allows.
#[wasm_bindgen]
pub fn solve(game: &str) -> String {
    respond(solve_value(game))
}

/// Whether a strategy file wins the game, with the plays it loses.
#[wasm_bindgen]
pub fn check_strategy(game: &str, strategy: &str) -> String {
    respond(check_value(game, strategy))
}

/// Size and decision data of the unraveled closed game.
#[wasm_bindgen]
pub fn unravel(game: &str, k: usize) -> String {
    respond(unravel_value(game, k))
}

#[cfg(test)]
mod tests {
    use super::*;

    const CYL: &str = r#"{"alphabet":2,"horizon":2,"tree":"full","payoff":{"clopen":["00","01"]}}"#;

    #[test]
    fn solve_cylinder() {
        let v: Value = serde_json::from_str(&solve(CYL)).unwrap();
        assert_eq!(v["winner"], 0);
        assert_eq!(v["strategy"][""], 0);
    }

    #[test]
    fn errors_are_json() {
        let v: Value = serde_json::from_str(&solve("{")).unwrap();
        assert!(v["error"].is_string());
        let v: Value = serde_json::from_str(&unravel(CYL, 0)).unwrap();
        assert!(v["error"].as_str().unwrap().contains("closed"));
    }

    #[test]
    fn strategy_check_lists_lost_plays() {
        let v: Value = serde_json::from_str(&check_strategy(CYL, "player: 0\nε -> 1\n")).unwrap();
        assert_eq!(v["winning"], false);
        assert_eq!(v["losing_plays"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn unravel_summary() {
        let g = r#"{"alphabet":2,"horizon":3,"tree":"full","payoff":{"closed":["1"]}}"#;
        let v: Value = serde_json::from_str(&unravel(g, 0)).unwrap();
        assert_eq!(v["clopen"], true);
        assert_eq!(v["winner"], v["base_winner"]);
    }
}
