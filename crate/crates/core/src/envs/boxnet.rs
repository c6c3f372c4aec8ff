//! Arms fixed to grid cells pass colored boxes between 4-adjacent cells and
//! drop them into same-colored goal slots.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{Cell, IllegalAction};
use crate::model::Action;
use crate::rng::SeededRng;

pub const COLORS: [&str; 8] = [
    "red", "blue", "green", "yellow", "purple", "orange", "cyan", "pink",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoxLocation {
    Cell(Cell),
    GoalSlot,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NetBox {
    pub color: String,
    pub location: BoxLocation,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoxNetState {
    pub rows: u32,
    pub cols: u32,
    /// Arm id to the cell it is confined to.
    pub arms: BTreeMap<String, Cell>,
    pub boxes: BTreeMap<String, NetBox>,
    /// Color to goal cell.
    pub goals: BTreeMap<String, Cell>,
}

pub fn arm_id(c: Cell) -> String {
    format!("arm_{}_{}", c.row, c.col)
}

pub fn box_id(color: &str) -> String {
    format!("box_{color}")
}

impl BoxNetState {
    pub fn in_grid(&self, c: Cell) -> bool {
        c.row >= 0 && c.col >= 0 && (c.row as u32) < self.rows && (c.col as u32) < self.cols
    }

    pub fn delivered(&self) -> usize {
        self.boxes
            .values()
            .filter(|b| b.location == BoxLocation::GoalSlot)
            .count()
    }
}

pub fn check_syntax(a: &Action) -> Result<(), String> {
    match a.action.as_str() {
        "move" => {
            let ok = a.args.len() == 3
                && a.args[0].is_string()
                && a.args[1].is_i64()
                && a.args[2].is_i64();
            if !ok {
                return Err("`move` takes [box_id, row, col]".into());
            }
        }
        "place" => {
            if a.args.len() != 1 || !a.args[0].is_string() {
                return Err("`place` takes [box_id]".into());
            }
        }
        other => return Err(format!("unknown boxnet action `{other}`")),
    }
    Ok(())
}

pub fn apply(state: &BoxNetState, step: &[Action]) -> Result<BoxNetState, IllegalAction> {
    let mut next = state.clone();
    let mut busy_arms = BTreeSet::new();
    let mut touched_boxes = BTreeSet::new();
    for a in step {
        let Some(&arm_cell) = state.arms.get(&a.robot) else {
            return Err(IllegalAction::new(format!("unknown arm `{}`", a.robot)));
        };
        if !busy_arms.insert(a.robot.as_str()) {
            return Err(IllegalAction::new(format!("{} acts twice in one step", a.robot)));
        }
        let b = a.str_arg(0).unwrap_or_default();
        let Some(bx) = state.boxes.get(b) else {
            return Err(IllegalAction::new(format!("unknown box `{b}`")));
        };
        if !touched_boxes.insert(b) {
            return Err(IllegalAction::new(format!(
                "two arms handle {b} in the same step"
            )));
        }
        if bx.location != BoxLocation::Cell(arm_cell) {
            return Err(IllegalAction::new(format!(
                "{a}: {b} is not in the arm's cell {arm_cell}"
            )));
        }
        match a.action.as_str() {
            "move" => {
                let target = Cell::new(
                    a.int_arg(1).unwrap_or(-1) as i32,
                    a.int_arg(2).unwrap_or(-1) as i32,
                );
                if !state.in_grid(target) || arm_cell.manhattan(target) != 1 {
                    return Err(IllegalAction::new(format!(
                        "{a}: {target} is not a neighboring cell"
                    )));
                }
                next.boxes.get_mut(b).unwrap().location = BoxLocation::Cell(target);
            }
            "place" => {
                if state.goals.get(&bx.color) != Some(&arm_cell) {
                    return Err(IllegalAction::new(format!(
                        "{a}: no {} goal in cell {arm_cell}",
                        bx.color
                    )));
                }
                next.boxes.get_mut(b).unwrap().location = BoxLocation::GoalSlot;
            }
            other => return Err(IllegalAction::new(format!("unknown action `{other}`"))),
        }
    }
    Ok(next)
}

pub fn is_goal(state: &BoxNetState) -> bool {
    state
        .boxes
        .values()
        .all(|b| b.location == BoxLocation::GoalSlot)
}

/// One arm per cell, boxes and goals scattered uniformly. Always solvable:
/// the grid is connected and every cell has an arm.
pub fn generate(rows: u32, cols: u32, boxes: u32, rng: &mut SeededRng) -> BoxNetState {
    let cells: Vec<Cell> = (0..rows as i32)
        .flat_map(|r| (0..cols as i32).map(move |c| Cell::new(r, c)))
        .collect();
    let arms = cells.iter().map(|c| (arm_id(*c), *c)).collect();
    let mut box_map = BTreeMap::new();
    let mut goals = BTreeMap::new();
    for color in COLORS.iter().take(boxes as usize) {
        let start = cells[rng.index(cells.len())];
        let goal = cells[rng.index(cells.len())];
        box_map.insert(
            box_id(color),
            NetBox {
                color: color.to_string(),
                location: BoxLocation::Cell(start),
            },
        );
        goals.insert(color.to_string(), goal);
    }
    BoxNetState {
        rows,
        cols,
        arms,
        boxes: box_map,
        goals,
    }
}

/// Per-arm options in the current state (excluding idling).
pub fn arm_options(state: &BoxNetState, arm: &str) -> Vec<Action> {
    let cell = state.arms[arm];
    let mut out = Vec::new();
    for (b, bx) in &state.boxes {
        if bx.location != BoxLocation::Cell(cell) {
            continue;
        }
        if state.goals.get(&bx.color) == Some(&cell) {
            out.push(Action::new(arm, "place", vec![json!(b)]));
        }
        for n in cell.neighbors4() {
            if state.in_grid(n) {
                out.push(Action::new(arm, "move", vec![json!(b), json!(n.row), json!(n.col)]));
            }
        }
    }
    out
}

/// Single-arm steps available in the state.
pub fn candidate_steps(state: &BoxNetState) -> Vec<Vec<Action>> {
    state
        .arms
        .keys()
        .flat_map(|a| arm_options(state, a))
        .map(|a| vec![a])
        .collect()
}

/// Sequential upper bound on the plan length: each box travels alone.
pub fn sequential_bound(state: &BoxNetState) -> u32 {
    state
        .boxes
        .values()
        .map(|b| match b.location {
            BoxLocation::Cell(c) => c.manhattan(state.goals[&b.color]) + 1,
            BoxLocation::GoalSlot => 0,
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_by_one() -> BoxNetState {
        let cells = [Cell::new(0, 0), Cell::new(0, 1)];
        BoxNetState {
            rows: 1,
            cols: 2,
            arms: cells.iter().map(|c| (arm_id(*c), *c)).collect(),
            boxes: BTreeMap::from([(
                "box_red".to_string(),
                NetBox {
                    color: "red".into(),
                    location: BoxLocation::Cell(cells[0]),
                },
            )]),
            goals: BTreeMap::from([("red".to_string(), cells[1])]),
        }
    }

    #[test]
    fn move_then_place() {
        let s = two_by_one();
        let s = apply(
            &s,
            &[Action::new("arm_0_0", "move", vec![json!("box_red"), json!(0), json!(1)])],
        )
        .unwrap();
        assert!(!is_goal(&s));
        let s = apply(&s, &[Action::new("arm_0_1", "place", vec![json!("box_red")])]).unwrap();
        assert!(is_goal(&s));
    }

    #[test]
    fn arm_cannot_reach_other_cells() {
        let s = two_by_one();
        let r = apply(&s, &[Action::new("arm_0_1", "place", vec![json!("box_red")])]);
        assert!(r.is_err());
    }

    #[test]
    fn diagonal_or_far_moves_are_illegal() {
        let s = two_by_one();
        let r = apply(
            &s,
            &[Action::new("arm_0_0", "move", vec![json!("box_red"), json!(0), json!(0)])],
        );
        assert!(r.is_err());
    }

    #[test]
    fn two_arms_same_box_conflict() {
        let mut s = two_by_one();
        // a second arm sharing the cell
        s.arms.insert("arm_extra".into(), Cell::new(0, 0));
        let step = [
            Action::new("arm_0_0", "move", vec![json!("box_red"), json!(0), json!(1)]),
            Action::new("arm_extra", "move", vec![json!("box_red"), json!(0), json!(1)]),
        ];
        assert!(apply(&s, &step).is_err());
    }

    #[test]
    fn place_requires_matching_goal() {
        let mut s = two_by_one();
        s.goals.insert("red".into(), Cell::new(0, 0));
        assert!(apply(&s, &[Action::new("arm_0_0", "place", vec![json!("box_red")])]).is_ok());
    }
}
