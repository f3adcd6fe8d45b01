use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use serde_json::json;

use gsdet::borel::{solve_borel, PipelineError};
use gsdet::covering::{preimage_payoff, verify_covering, CoveringError, VerifyMode};
use gsdet::format::{parse_game_file, parse_strategy_file, print_game, FormatError, UnraveledFile};
use gsdet::selftest::{run_selftest, SelftestOptions};
use gsdet::solver::backward_induction;
use gsdet::strategy::{consistent_leaves, is_winning};
use gsdet::unravel::{build_unravel_covering, clopen_at_level, unpruned_condition_positions, UnravelError};
use gsdet::{Caps, Covering, Game, Node, Payoff, Strategy, TreeMorphism};

const OK: u8 = 0;
const FALSIFIED: u8 = 1;
const USAGE: u8 = 2;
const CAP: u8 = 3;

#[derive(Parser)]
#[command(name = "gsdet", version, about = "Finite-horizon Gale-Stewart games")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve a game and print the winner with a winning strategy.
    Solve {
        file: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Check whether a strategy file wins a game.
    VerifyStrategy { file: PathBuf, strategy: PathBuf },
    /// Unravel a closed game and write the unraveled game to a directory.
    Unravel {
        file: PathBuf,
        #[arg(long, default_value_t = 0)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-check the covering stored by `unravel`.
    VerifyCovering { dir: PathBuf },
    /// Run the invariant suites.
    Selftest {
        #[arg(long, default_value_t = 2)]
        max_alphabet: u32,
        #[arg(long, default_value_t = 3)]
        max_horizon: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// An error paired with its exit status.
struct Failure(u8, String);

impl From<FormatError> for Failure {
    fn from(e: FormatError) -> Self {
        Failure(USAGE, e.to_string())
    }
}

impl From<CoveringError> for Failure {
    fn from(e: CoveringError) -> Self {
        let code = match e {
            CoveringError::BudgetExceeded { .. } => CAP,
            CoveringError::Morphism(gsdet::morphism::MorphismError::CapExceeded { .. }) => CAP,
            CoveringError::Strategy(gsdet::strategy::StrategyError::CapExceeded { .. }) => CAP,
            CoveringError::LiftStranded { .. }
            | CoveringError::TransferNotWinning
            | CoveringError::PreimageDisagrees { .. } => FALSIFIED,
            _ => USAGE,
        };
        Failure(code, e.to_string())
    }
}

impl From<UnravelError> for Failure {
    fn from(e: UnravelError) -> Self {
        match e {
            UnravelError::CapExceeded { .. } => Failure(CAP, e.to_string()),
            UnravelError::Covering(c) => c.into(),
            other => Failure(USAGE, other.to_string()),
        }
    }
}

impl From<PipelineError> for Failure {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::TransferNotWinning | PipelineError::OracleDisagrees { .. } => {
                Failure(FALSIFIED, e.to_string())
            }
            PipelineError::Unravel(u) => u.into(),
            PipelineError::Covering(c) => c.into(),
            other => Failure(USAGE, other.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure(USAGE, format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure(USAGE, format!("{}: {e}", path.display())))
}

fn load_game(path: &Path) -> Result<Game, Failure> {
    parse_game_file(&read(path)?).map_err(|e| Failure(USAGE, format!("{}: {e}", path.display())))
}

fn node_key(x: &Node) -> String {
    if x.is_empty() {
        "ε".into()
    } else {
        x.to_digits()
    }
}

/// Moves of `s` at positions reachable when `s` is followed.
fn reachable_moves(s: &Strategy, g: &Game) -> BTreeMap<Node, u32> {
    let reach: std::collections::BTreeSet<Node> = consistent_leaves(s.pre(), g.tree(), g.horizon())
        .iter()
        .flat_map(|l| l.prefixes().collect::<Vec<_>>())
        .collect();
    s.moves()
        .filter(|(x, _)| reach.contains(*x))
        .map(|(x, a)| (x.clone(), a.0))
        .collect()
}

fn solve(file: &Path, as_json: bool) -> Result<(), Failure> {
    let g = load_game(file)?;
    let caps = Caps::from_env();
    let (winner, strategy, method) = match g.payoff() {
        Payoff::Borel(_) => {
            let r = solve_borel(&g, &caps)?;
            let method = format!(
                "unraveled through {} coverings, composite fixing level {}",
                r.covering_chain.len(),
                r.total_fixing
            );
            (r.winner, r.base_strategy, method)
        }
        _ => {
            let r = backward_induction(&g);
            (r.winner, r.strategy, "backward induction".to_string())
        }
    };
    if !is_winning(strategy.pre(), &g) {
        return Err(Failure(FALSIFIED, "computed strategy does not win".into()));
    }
    let moves = reachable_moves(&strategy, &g);
    if as_json {
        let table: serde_json::Map<String, serde_json::Value> = moves
            .iter()
            .map(|(x, a)| (x.to_digits(), json!(a)))
            .collect();
        let out = json!({
            "winner": winner.index(),
            "strategy": table,
            "method": method,
        });
        println!("{}", serde_json::to_string_pretty(&out).expect("json value"));
    } else {
        let mut line = format!("winner: {}", winner.index());
        for (x, a) in &moves {
            line.push_str(&format!("; {} -> {a}", node_key(x)));
        }
        println!("{line}");
    }
    Ok(())
}

fn verify_strategy(file: &Path, strat: &Path) -> Result<(), Failure> {
    let g = load_game(file)?;
    let s = parse_strategy_file(&read(strat)?, &g)?;
    if is_winning(s.pre(), &g) {
        println!("winning for player {}", s.player().index());
        Ok(())
    } else {
        Err(Failure(FALSIFIED, format!("not winning for player {}", s.player().index())))
    }
}

fn unravel(file: &Path, k: usize, out: &Path) -> Result<(), Failure> {
    let g = load_game(file)?;
    if !matches!(g.payoff(), Payoff::Closed(_)) {
        return Err(Failure(USAGE, format!("unravel needs a closed payoff, got {}", g.payoff().kind())));
    }
    let (u, c) = build_unravel_covering(&g, k, &Caps::from_env())?;
    fs::create_dir_all(out).map_err(|e| Failure(USAGE, format!("{}: {e}", out.display())))?;
    write(&out.join("base.json"), &print_game(&g)?)?;
    let file = UnraveledFile::from_unravel(&u);
    write(
        &out.join("unraveled.json"),
        &serde_json::to_string_pretty(&file).expect("records serialize"),
    )?;
    let decision = u.decision_level();
    let summary = json!({
        "k": k,
        "covering_k": c.k,
        "fixing_level": c.pi.fixing_level(),
        "decision_depth": decision,
        "clopen": clopen_at_level(&u.game, decision),
        "pruned": unpruned_condition_positions(&u).is_empty(),
        "letters": u.letters.len(),
        "nodes": u.tree.len(),
        "winner": backward_induction(&u.game).winner.index(),
    });
    write(
        &out.join("covering.json"),
        &serde_json::to_string_pretty(&summary).expect("json value"),
    )?;
    println!(
        "unraveled: {} letters, {} nodes; fixing level {}; decided by depth {}",
        u.letters.len(),
        u.tree.len(),
        c.pi.fixing_level(),
        decision
    );
    Ok(())
}

fn verify_covering_dir(dir: &Path) -> Result<(), Failure> {
    let base = load_game(&dir.join("base.json"))?;
    let file: UnraveledFile = serde_json::from_str(&read(&dir.join("unraveled.json"))?)
        .map_err(|e| Failure(USAGE, format!("unraveled.json: {}", FormatError::from(e))))?;
    let lifted = file.to_game()?;
    let bases = file.base_letters(base.tree().alphabet_size())?;
    let map = lifted
        .tree()
        .nodes()
        .iter()
        .map(|x| {
            let y = Node::new(x.letters().iter().map(|l| bases[l.index()]).collect());
            (x.clone(), y)
        })
        .collect();
    let pi = TreeMorphism::checked(lifted.tree_arc().clone(), base.tree_arc().clone(), map)
        .map_err(|e| Failure(FALSIFIED, format!("projection is not a tree morphism: {e}")))?;
    let h = base.horizon();
    let caps = Caps::from_env();
    let c = Covering::with_fiber_tracking(Arc::new(pi), h, 2 * file.k, &caps);
    let pre = preimage_payoff(&c, &base)?;
    if pre.clopen != *lifted.payoff() {
        return Err(Failure(FALSIFIED, "stored payoff is not the preimage of the base payoff".into()));
    }
    if !clopen_at_level(&lifted, 2 * file.k + 2) {
        return Err(Failure(FALSIFIED, format!("preimage is not decided by depth {}", 2 * file.k + 2)));
    }
    let report = verify_covering(&c, h, caps.max_enumeration.min(4096))?;
    let mode = match report.mode {
        VerifyMode::Exhaustive => "exhaustive".to_string(),
        VerifyMode::CertifiedSample { samples } => format!("certified lifting, {samples} sampled strategies per player"),
    };
    match report.counterexample {
        None => {
            println!("covering ok ({mode}; {} strategies checked)", report.strategies_checked);
            Ok(())
        }
        Some(cx) => Err(Failure(
            FALSIFIED,
            format!("{} law fails for player {}: {}", cx.law, cx.player.index(), cx.detail),
        )),
    }
}

fn selftest(max_alphabet: u32, max_horizon: usize, seed: u64) -> Result<(), Failure> {
    let opts = SelftestOptions {
        max_alphabet,
        max_horizon,
        caps: Caps::from_env(),
        seed,
    };
    let report = run_selftest(&opts);
    for s in &report.suites {
        let verdict = if s.passed() { "ok".to_string() } else { format!("FAILED ({})", s.failures.len()) };
        let skipped = if s.skipped.is_empty() { String::new() } else { format!(", {} skipped over caps", s.skipped.len()) };
        println!("{:<20} {:>8} checks  {verdict}{skipped}", s.name, s.checked);
        for f in &s.failures {
            println!("    {f}");
        }
    }
    if report.falsified() {
        Err(Failure(FALSIFIED, "falsification in at least one suite".into()))
    } else {
        Ok(())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Solve { file, json } => solve(file, *json),
        Cmd::VerifyStrategy { file, strategy } => verify_strategy(file, strategy),
        Cmd::Unravel { file, k, out } => unravel(file, *k, out),
        Cmd::VerifyCovering { dir } => verify_covering_dir(dir),
        Cmd::Selftest {
            max_alphabet,
            max_horizon,
            seed,
        } => selftest(*max_alphabet, *max_horizon, *seed),
    };
    match result {
        Ok(()) => ExitCode::from(OK),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}
