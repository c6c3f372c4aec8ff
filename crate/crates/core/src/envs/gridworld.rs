//! Single robot on a grid with obstacles; the robot must visit every goal.
//!
//! Rows grow downward: `move_up` decreases the row index.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{Cell, IllegalAction};
use crate::model::Action;
use crate::rng::SeededRng;

pub const ROBOT: &str = "robot";
pub const ACTIONS: [&str; 5] = ["move_up", "move_down", "move_left", "move_right", "visit_goal"];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GoalCell {
    pub cell: Cell,
    pub visited: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridworldState {
    pub width: u32,
    pub height: u32,
    pub obstacles: BTreeSet<Cell>,
    pub goals: Vec<GoalCell>,
    pub robot: Cell,
}

impl GridworldState {
    pub fn in_grid(&self, c: Cell) -> bool {
        c.row >= 0 && c.col >= 0 && (c.row as u32) < self.height && (c.col as u32) < self.width
    }

    pub fn is_free(&self, c: Cell) -> bool {
        self.in_grid(c) && !self.obstacles.contains(&c)
    }

    pub fn all_visited(&self) -> bool {
        self.goals.iter().all(|g| g.visited)
    }

    /// Cells reachable from the robot by 4-connected moves.
    pub fn reachable(&self) -> BTreeSet<Cell> {
        let mut seen = BTreeSet::from([self.robot]);
        let mut queue = VecDeque::from([self.robot]);
        while let Some(c) = queue.pop_front() {
            for n in c.neighbors4() {
                if self.is_free(n) && seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        seen
    }
}

pub fn direction(token: &str) -> Option<(i32, i32)> {
    match token {
        "move_up" => Some((-1, 0)),
        "move_down" => Some((1, 0)),
        "move_left" => Some((0, -1)),
        "move_right" => Some((0, 1)),
        _ => None,
    }
}

pub fn check_syntax(a: &Action) -> Result<(), String> {
    if !ACTIONS.contains(&a.action.as_str()) {
        return Err(format!("unknown gridworld action `{}`", a.action));
    }
    if !a.args.is_empty() {
        return Err(format!("`{}` takes no arguments", a.action));
    }
    Ok(())
}

pub fn apply(state: &GridworldState, step: &[Action]) -> Result<GridworldState, IllegalAction> {
    let mut next = state.clone();
    match step {
        [] => return Ok(next),
        [a] => {
            if a.robot != ROBOT {
                return Err(IllegalAction::new(format!("unknown robot `{}`", a.robot)));
            }
            if let Some((dr, dc)) = direction(&a.action) {
                let target = Cell::new(state.robot.row + dr, state.robot.col + dc);
                if !state.in_grid(target) {
                    return Err(IllegalAction::new(format!("{a} leaves the grid at {target}")));
                }
                if state.obstacles.contains(&target) {
                    return Err(IllegalAction::new(format!("{a} runs into obstacle {target}")));
                }
                next.robot = target;
            } else if a.action == "visit_goal" {
                match next.goals.iter_mut().find(|g| g.cell == state.robot) {
                    Some(g) => g.visited = true,
                    None => {
                        return Err(IllegalAction::new(format!(
                            "visit_goal at {} which is not a goal",
                            state.robot
                        )))
                    }
                }
            } else {
                return Err(IllegalAction::new(format!("unknown action `{}`", a.action)));
            }
        }
        _ => return Err(IllegalAction::new("the robot can take one action per step")),
    }
    Ok(next)
}

pub fn is_goal(state: &GridworldState) -> bool {
    state.all_visited()
}

/// Lays out obstacles and goals; `None` when a goal is unreachable.
pub fn generate(
    width: u32,
    height: u32,
    density: f64,
    goal_count: u32,
    rng: &mut SeededRng,
) -> Option<GridworldState> {
    let mut cells: Vec<Cell> = (0..height as i32)
        .flat_map(|r| (0..width as i32).map(move |c| Cell::new(r, c)))
        .collect();
    rng.shuffle(&mut cells);
    let n_obs = (density * (width * height) as f64).round() as usize;
    let robot = cells[0];
    let obstacles: BTreeSet<Cell> = cells[1..1 + n_obs].iter().copied().collect();
    let mut goal_cells: Vec<Cell> = cells[1 + n_obs..1 + n_obs + goal_count as usize].to_vec();
    goal_cells.sort();
    let state = GridworldState {
        width,
        height,
        obstacles,
        goals: goal_cells
            .into_iter()
            .map(|cell| GoalCell {
                cell,
                visited: false,
            })
            .collect(),
        robot,
    };
    let reach = state.reachable();
    state
        .goals
        .iter()
        .all(|g| reach.contains(&g.cell))
        .then_some(state)
}

pub fn candidate_actions() -> Vec<Action> {
    ACTIONS
        .iter()
        .map(|t| Action::new(ROBOT, *t, vec![]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn open_grid() -> GridworldState {
        GridworldState {
            width: 3,
            height: 3,
            obstacles: BTreeSet::from([Cell::new(0, 1)]),
            goals: vec![GoalCell {
                cell: Cell::new(1, 1),
                visited: false,
            }],
            robot: Cell::new(1, 0),
        }
    }

    fn act(t: &str) -> Vec<Action> {
        vec![Action::new(ROBOT, t, vec![])]
    }

    #[test]
    fn move_into_obstacle_is_illegal() {
        let s = GridworldState {
            robot: Cell::new(1, 1),
            ..open_grid()
        };
        assert!(apply(&s, &act("move_up")).is_err());
    }

    #[test]
    fn move_off_grid_is_illegal() {
        assert!(apply(&open_grid(), &act("move_left")).is_err());
    }

    #[test]
    fn visit_goal_marks_visited() {
        let s = apply(&open_grid(), &act("move_right")).unwrap();
        assert!(!is_goal(&s));
        let s = apply(&s, &act("visit_goal")).unwrap();
        assert!(is_goal(&s));
    }

    #[test]
    fn visit_on_plain_cell_is_illegal() {
        assert!(apply(&open_grid(), &act("visit_goal")).is_err());
    }

    #[test]
    fn input_state_untouched_on_error() {
        let s = open_grid();
        let before = s.clone();
        let _ = apply(&s, &act("move_left"));
        assert_eq!(s, before);
    }
}
