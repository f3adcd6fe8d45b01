//! Reference solvers that share no code with the main pipeline: a plain
//! minimax over the clopen expansion, and a search over strategy pairs.

use crate::caps::Caps;
use crate::game::{Game, Player};
use crate::strategy::{enumerate_strategies, play, StrategyError};
use crate::tree::Node;

fn minimax(g: &Game, x: &Node) -> Player {
    let h = g.horizon().get();
    if x.len() == h {
        return if g.payoff().contains(x) {
            Player::Zero
        } else {
            Player::One
        };
    }
    let mover = Player::to_move_at(x.len());
    let kids: Vec<Node> = g.tree().children(x).cloned().collect();
    if kids.iter().any(|c| minimax(g, c) == mover) {
        mover
    } else {
        mover.opponent()
    }
}

/// Winner of the game by recursion on the tree of leaves.
pub fn oracle_winner(g: &Game) -> Player {
    minimax(g, &Node::root())
}

/// Winner by brute force: player zero wins iff one of her strategies beats
/// every strategy of player one.
pub fn brute_force_winner(g: &Game, caps: &Caps) -> Result<Player, StrategyError> {
    let zeros = enumerate_strategies(g.tree(), g.horizon(), Player::Zero, caps)?;
    let ones = enumerate_strategies(g.tree(), g.horizon(), Player::One, caps)?;
    let pairs = zeros.len() as u128 * ones.len() as u128;
    if pairs > caps.max_enumeration as u128 {
        return Err(StrategyError::CapExceeded {
            count: pairs.to_string(),
            cap: caps.max_enumeration,
        });
    }
    let zero_wins = zeros.iter().any(|s| {
        ones.iter().all(|t| {
            play(s, t, g.tree(), g.horizon()).map_or(false, |leaf| g.payoff().contains(&leaf))
        })
    });
    Ok(if zero_wins { Player::Zero } else { Player::One })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Payoff;
    use crate::tree::{Horizon, Tree};

    #[test]
    fn oracles_agree_on_small_games() {
        let t = Tree::full(2, 2);
        let leaves: Vec<Node> = t.leaves().cloned().collect();
        for mask in 0u32..16 {
            let acc = leaves
                .iter()
                .enumerate()
                .filter(|(i, _)| mask >> i & 1 == 1)
                .map(|(_, l)| l.clone())
                .collect();
            let g = Game::new(t.clone(), Horizon::new(2).unwrap(), Payoff::Clopen(acc)).unwrap();
            assert_eq!(oracle_winner(&g), brute_force_winner(&g, &Caps::default()).unwrap());
        }
    }
}
