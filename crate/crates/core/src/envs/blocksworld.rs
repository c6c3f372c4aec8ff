//! One arm stacking lettered blocks on an unbounded table.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::IllegalAction;
use crate::model::Action;
use crate::rng::SeededRng;

pub const ARM: &str = "arm";

/// Action schemas: token, arity, description.
pub const SCHEMAS: [(&str, usize, &str); 4] = [
    ("pick_up", 1, "pick up a clear block X that sits on the table (hand must be empty)"),
    ("unstack", 2, "unstack a clear block X from the block Y it sits on (hand must be empty)"),
    ("put_down", 1, "put the held block X down on the table"),
    ("stack", 2, "stack the held block X on a clear block Y"),
];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BlocksworldState {
    /// Each tower lists blocks bottom to top.
    pub towers: Vec<Vec<String>>,
    #[serde(default)]
    pub holding: Option<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BlocksError {
    #[error("block `{0}` appears more than once")]
    Duplicate(String),
    #[error("empty tower")]
    EmptyTower,
}

pub fn block_names(n: u32) -> Vec<String> {
    (0..n)
        .map(|i| char::from(b'A' + i as u8).to_string())
        .collect()
}

impl BlocksworldState {
    pub fn on_table(towers: Vec<Vec<String>>) -> Self {
        BlocksworldState {
            towers,
            holding: None,
        }
    }

    pub fn validate(&self) -> Result<(), BlocksError> {
        let mut seen = BTreeSet::new();
        for t in &self.towers {
            if t.is_empty() {
                return Err(BlocksError::EmptyTower);
            }
            for b in t {
                if !seen.insert(b) {
                    return Err(BlocksError::Duplicate(b.clone()));
                }
            }
        }
        if let Some(h) = &self.holding {
            if !seen.insert(h) {
                return Err(BlocksError::Duplicate(h.clone()));
            }
        }
        Ok(())
    }

    /// All blocks, sorted.
    pub fn blocks(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .towers
            .iter()
            .flatten()
            .chain(self.holding.iter())
            .cloned()
            .collect();
        v.sort();
        v
    }

    /// Towers sorted by bottom block: equal configurations compare equal.
    pub fn canonical_towers(&self) -> Vec<Vec<String>> {
        canonical(&self.towers)
    }

    fn tower_with_top(&self, block: &str) -> Option<usize> {
        self.towers
            .iter()
            .position(|t| t.last().map(String::as_str) == Some(block))
    }
}

pub fn canonical(towers: &[Vec<String>]) -> Vec<Vec<String>> {
    let mut t: Vec<Vec<String>> = towers.iter().filter(|t| !t.is_empty()).cloned().collect();
    t.sort();
    t
}

pub fn check_syntax(a: &Action) -> Result<(), String> {
    let Some(&(_, arity, _)) = SCHEMAS.iter().find(|(t, _, _)| *t == a.action) else {
        return Err(format!("unknown blocksworld action `{}`", a.action));
    };
    if a.args.len() != arity || a.args.iter().any(|v| !v.is_string()) {
        return Err(format!("`{}` takes {arity} block name(s)", a.action));
    }
    Ok(())
}

pub fn apply(state: &BlocksworldState, step: &[Action]) -> Result<BlocksworldState, IllegalAction> {
    let a = match step {
        [] => return Ok(state.clone()),
        [a] => a,
        _ => return Err(IllegalAction::new("the arm can take one action per step")),
    };
    if a.robot != ARM {
        return Err(IllegalAction::new(format!("unknown robot `{}`", a.robot)));
    }
    let x = a.str_arg(0).unwrap_or_default();
    let y = a.str_arg(1).unwrap_or_default();
    let mut next = state.clone();
    let illegal = |why: &str| Err(IllegalAction::new(format!("{a}: {why}")));
    match a.action.as_str() {
        "pick_up" => {
            if state.holding.is_some() {
                return illegal("hand is not empty");
            }
            match state.towers.iter().position(|t| t.len() == 1 && t[0] == x) {
                Some(i) => {
                    next.towers.remove(i);
                    next.holding = Some(x.to_string());
                }
                None => return illegal("block is not clear on the table"),
            }
        }
        "unstack" => {
            if state.holding.is_some() {
                return illegal("hand is not empty");
            }
            let Some(i) = state.tower_with_top(x) else {
                return illegal("block is not on top of a tower");
            };
            let t = &state.towers[i];
            if t.len() < 2 || t[t.len() - 2] != y {
                return illegal("block is not directly on the named block");
            }
            next.towers[i].pop();
            next.holding = Some(x.to_string());
        }
        "put_down" => {
            if state.holding.as_deref() != Some(x) {
                return illegal("block is not held");
            }
            next.holding = None;
            next.towers.push(vec![x.to_string()]);
        }
        "stack" => {
            if state.holding.as_deref() != Some(x) {
                return illegal("block is not held");
            }
            let Some(i) = state.tower_with_top(y) else {
                return illegal("target is not a clear block");
            };
            next.holding = None;
            next.towers[i].push(x.to_string());
        }
        other => return Err(IllegalAction::new(format!("unknown action `{other}`"))),
    }
    Ok(next)
}

pub fn is_goal(state: &BlocksworldState, goal: &[Vec<String>]) -> bool {
    state.holding.is_none() && state.canonical_towers() == canonical(goal)
}

/// A uniformly shuffled arrangement cut into a random number of towers.
pub fn random_towers(blocks: &[String], rng: &mut SeededRng) -> Vec<Vec<String>> {
    let mut order = blocks.to_vec();
    rng.shuffle(&mut order);
    let n = order.len();
    let k = rng.range_inclusive(1, n as u64) as usize;
    let mut cuts: Vec<usize> = (1..n).collect();
    rng.shuffle(&mut cuts);
    let mut cuts: Vec<usize> = cuts.into_iter().take(k - 1).collect();
    cuts.sort_unstable();
    let mut towers = Vec::new();
    let mut start = 0;
    for c in cuts.into_iter().chain(std::iter::once(n)) {
        towers.push(order[start..c].to_vec());
        start = c;
    }
    canonical(&towers)
}

/// Every grounded action over the state's blocks, legal or not.
pub fn candidate_actions(state: &BlocksworldState) -> Vec<Action> {
    use serde_json::json;
    let blocks = state.blocks();
    let mut out = Vec::new();
    for x in &blocks {
        out.push(Action::new(ARM, "pick_up", vec![json!(x)]));
        out.push(Action::new(ARM, "put_down", vec![json!(x)]));
        for y in &blocks {
            if x != y {
                out.push(Action::new(ARM, "unstack", vec![json!(x), json!(y)]));
                out.push(Action::new(ARM, "stack", vec![json!(x), json!(y)]));
            }
        }
    }
    out
}
