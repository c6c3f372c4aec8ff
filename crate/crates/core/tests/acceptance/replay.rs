//! Discrete action semantics written from the task rules alone, sharing no
//! transition code with the library. Used to certify plans independently.

use std::collections::{BTreeMap, BTreeSet};

use serde_json::Value;
use tampforge::envs::boxnet::BoxLocation;
use tampforge::model::{Action, EnvState, GoalSpec, TaskInstance};

#[derive(Debug, Clone, PartialEq)]
pub enum Replayed {
    /// Step index (0-based) whose action broke a rule or was malformed.
    Rejected(usize, String),
    Finished { goal: bool, steps: usize },
}

impl Replayed {
    pub fn rejected(&self) -> bool {
        matches!(self, Replayed::Rejected(..))
    }
}

/// Plan succeeds: every step legal, goal holds at the end, within the step limit.
pub fn certify(inst: &TaskInstance, steps: &[Vec<Action>]) -> bool {
    match replay(inst, steps) {
        Replayed::Finished { goal, steps } => goal && steps <= inst.step_limit.unwrap_or(u32::MAX) as usize,
        Replayed::Rejected(..) => false,
    }
}

pub fn replay(inst: &TaskInstance, steps: &[Vec<Action>]) -> Replayed {
    let mut world = World::new(&inst.initial_state, &inst.goal);
    for (i, step) in steps.iter().enumerate() {
        if let Err(e) = world.step(step) {
            return Replayed::Rejected(i, e);
        }
    }
    Replayed::Finished {
        goal: world.done(),
        steps: steps.len(),
    }
}

/// Whether `step` is legal in the state reached by `prefix`.
pub fn legal_after(inst: &TaskInstance, prefix: &[Vec<Action>], step: &[Action]) -> bool {
    let mut world = World::new(&inst.initial_state, &inst.goal);
    for s in prefix {
        if world.step(s).is_err() {
            return false;
        }
    }
    world.step(step).is_ok()
}

type Xy = (i64, i64);

enum World {
    Grid {
        w: i64,
        h: i64,
        walls: BTreeSet<Xy>,
        goals: BTreeMap<Xy, bool>,
        at: Xy,
    },
    Blocks {
        /// Block to what it rests on; `None` is the table.
        on: BTreeMap<String, Option<String>>,
        held: Option<String>,
        want: BTreeMap<String, Option<String>>,
    },
    Net {
        rows: i64,
        cols: i64,
        arms: BTreeMap<String, Xy>,
        /// Box to (color, cell); cell `None` once delivered.
        boxes: BTreeMap<String, (String, Option<Xy>)>,
        goals: BTreeMap<String, Xy>,
    },
    Lift {
        caps: BTreeMap<String, u64>,
        weights: BTreeMap<String, u64>,
        lifted: BTreeSet<String>,
    },
}

fn str_arg(a: &Action, i: usize) -> Result<&str, String> {
    a.args.get(i).and_then(Value::as_str).ok_or_else(|| format!("{a}: argument {i} is not a name"))
}

fn int_arg(a: &Action, i: usize) -> Result<i64, String> {
    a.args.get(i).and_then(Value::as_i64).ok_or_else(|| format!("{a}: argument {i} is not an integer"))
}

fn arity(a: &Action, n: usize) -> Result<(), String> {
    if a.args.len() == n {
        Ok(())
    } else {
        Err(format!("{a}: expected {n} arguments"))
    }
}

fn stacked(towers: &[Vec<String>]) -> BTreeMap<String, Option<String>> {
    let mut on = BTreeMap::new();
    for t in towers {
        for (k, b) in t.iter().enumerate() {
            on.insert(b.clone(), if k == 0 { None } else { Some(t[k - 1].clone()) });
        }
    }
    on
}

impl World {
    fn new(state: &EnvState, goal: &GoalSpec) -> World {
        match state {
            EnvState::Gridworld(s) => World::Grid {
                w: s.width as i64,
                h: s.height as i64,
                walls: s.obstacles.iter().map(|c| (c.row as i64, c.col as i64)).collect(),
                goals: s.goals.iter().map(|g| ((g.cell.row as i64, g.cell.col as i64), g.visited)).collect(),
                at: (s.robot.row as i64, s.robot.col as i64),
            },
            EnvState::Blocksworld(s) => {
                let GoalSpec::Blocksworld { towers } = goal else { panic!("blocksworld goal expected") };
                World::Blocks {
                    on: stacked(&s.towers),
                    held: s.holding.clone(),
                    want: stacked(towers),
                }
            }
            EnvState::BoxNet(s) => World::Net {
                rows: s.rows as i64,
                cols: s.cols as i64,
                arms: s.arms.iter().map(|(k, c)| (k.clone(), (c.row as i64, c.col as i64))).collect(),
                boxes: s
                    .boxes
                    .iter()
                    .map(|(k, b)| {
                        let cell = match b.location {
                            BoxLocation::Cell(c) => Some((c.row as i64, c.col as i64)),
                            BoxLocation::GoalSlot => None,
                        };
                        (k.clone(), (b.color.clone(), cell))
                    })
                    .collect(),
                goals: s.goals.iter().map(|(k, c)| (k.clone(), (c.row as i64, c.col as i64))).collect(),
            },
            EnvState::BoxLift(s) => World::Lift {
                caps: s.robots.iter().map(|(k, c)| (k.clone(), *c as u64)).collect(),
                weights: s.boxes.iter().map(|(k, b)| (k.clone(), b.weight as u64)).collect(),
                lifted: s.boxes.iter().filter(|(_, b)| b.lifted).map(|(k, _)| k.clone()).collect(),
            },
            other => panic!("no discrete replay for {:?}", other.env_kind()),
        }
    }

    fn done(&self) -> bool {
        match self {
            World::Grid { goals, .. } => goals.values().all(|v| *v),
            World::Blocks { on, held, want } => held.is_none() && on == want,
            World::Net { boxes, .. } => boxes.values().all(|(_, c)| c.is_none()),
            World::Lift { weights, lifted, .. } => lifted.len() == weights.len(),
        }
    }

    fn step(&mut self, step: &[Action]) -> Result<(), String> {
        match self {
            World::Grid { w, h, walls, goals, at } => {
                let a = match step {
                    [] => return Ok(()),
                    [a] => a,
                    _ => return Err("one robot, one action".into()),
                };
                if a.robot != "robot" {
                    return Err(format!("no robot {}", a.robot));
                }
                arity(a, 0)?;
                let d = match a.action.as_str() {
                    "move_up" => (-1, 0),
                    "move_down" => (1, 0),
                    "move_left" => (0, -1),
                    "move_right" => (0, 1),
                    "visit_goal" => {
                        return match goals.get_mut(at) {
                            Some(v) => {
                                *v = true;
                                Ok(())
                            }
                            None => Err("not on a goal".into()),
                        }
                    }
                    other => return Err(format!("no action {other}")),
                };
                let next = (at.0 + d.0, at.1 + d.1);
                if next.0 < 0 || next.1 < 0 || next.0 >= *h || next.1 >= *w || walls.contains(&next) {
                    return Err(format!("blocked at {next:?}"));
                }
                *at = next;
                Ok(())
            }
            World::Blocks { on, held, .. } => {
                let a = match step {
                    [] => return Ok(()),
                    [a] => a,
                    _ => return Err("one arm, one action".into()),
                };
                if a.robot != "arm" {
                    return Err(format!("no robot {}", a.robot));
                }
                let known = |on: &BTreeMap<String, Option<String>>, held: &Option<String>, b: &str| {
                    on.contains_key(b) || held.as_deref() == Some(b)
                };
                let clear = |on: &BTreeMap<String, Option<String>>, b: &str| {
                    on.contains_key(b) && !on.values().any(|v| v.as_deref() == Some(b))
                };
                match a.action.as_str() {
                    "pick_up" => {
                        arity(a, 1)?;
                        let x = str_arg(a, 0)?;
                        if held.is_some() || on.get(x) != Some(&None) || !clear(on, x) {
                            return Err(format!("{a}"));
                        }
                        on.remove(x);
                        *held = Some(x.to_string());
                    }
                    "unstack" => {
                        arity(a, 2)?;
                        let (x, y) = (str_arg(a, 0)?, str_arg(a, 1)?);
                        if held.is_some() || on.get(x) != Some(&Some(y.to_string())) || !clear(on, x) {
                            return Err(format!("{a}"));
                        }
                        on.remove(x);
                        *held = Some(x.to_string());
                    }
                    "put_down" => {
                        arity(a, 1)?;
                        let x = str_arg(a, 0)?;
                        if held.as_deref() != Some(x) {
                            return Err(format!("{a}"));
                        }
                        on.insert(x.to_string(), None);
                        *held = None;
                    }
                    "stack" => {
                        arity(a, 2)?;
                        let (x, y) = (str_arg(a, 0)?, str_arg(a, 1)?);
                        if held.as_deref() != Some(x) || x == y || !known(on, held, y) || !clear(on, y) {
                            return Err(format!("{a}"));
                        }
                        on.insert(x.to_string(), Some(y.to_string()));
                        *held = None;
                    }
                    other => return Err(format!("no action {other}")),
                }
                Ok(())
            }
            World::Net {
                rows,
                cols,
                arms,
                boxes,
                goals,
            } => {
                let mut busy = BTreeSet::new();
                let mut moved = BTreeSet::new();
                let mut updates = Vec::new();
                for a in step {
                    let Some(&cell) = arms.get(&a.robot) else {
                        return Err(format!("no arm {}", a.robot));
                    };
                    if !busy.insert(a.robot.clone()) {
                        return Err(format!("{} twice", a.robot));
                    }
                    let b = str_arg(a, 0)?;
                    let Some((color, loc)) = boxes.get(b) else {
                        return Err(format!("no box {b}"));
                    };
                    if !moved.insert(b.to_string()) {
                        return Err(format!("{b} handled twice"));
                    }
                    if *loc != Some(cell) {
                        return Err(format!("{b} out of reach of {}", a.robot));
                    }
                    match a.action.as_str() {
                        "move" => {
                            arity(a, 3)?;
                            let to = (int_arg(a, 1)?, int_arg(a, 2)?);
                            let inside = to.0 >= 0 && to.1 >= 0 && to.0 < *rows && to.1 < *cols;
                            if !inside || (to.0 - cell.0).abs() + (to.1 - cell.1).abs() != 1 {
                                return Err(format!("{a}: bad target"));
                            }
                            updates.push((b.to_string(), Some(to)));
                        }
                        "place" => {
                            arity(a, 1)?;
                            if goals.get(color) != Some(&cell) {
                                return Err(format!("{a}: no goal here"));
                            }
                            updates.push((b.to_string(), None));
                        }
                        other => return Err(format!("no action {other}")),
                    }
                }
                for (b, loc) in updates {
                    boxes.get_mut(&b).expect("checked").1 = loc;
                }
                Ok(())
            }
            World::Lift { caps, weights, lifted } => {
                let mut busy = BTreeSet::new();
                let mut groups: BTreeMap<String, u64> = BTreeMap::new();
                for a in step {
                    let Some(c) = caps.get(&a.robot) else {
                        return Err(format!("no robot {}", a.robot));
                    };
                    if !busy.insert(a.robot.clone()) {
                        return Err(format!("{} twice", a.robot));
                    }
                    if a.action != "lift" {
                        return Err(format!("no action {}", a.action));
                    }
                    arity(a, 1)?;
                    let b = str_arg(a, 0)?;
                    if !weights.contains_key(b) || lifted.contains(b) {
                        return Err(format!("{a}: nothing to lift"));
                    }
                    *groups.entry(b.to_string()).or_default() += c;
                }
                for (b, cap) in &groups {
                    if *cap <= weights[b] {
                        return Err(format!("{b} too heavy for {cap}"));
                    }
                }
                lifted.extend(groups.into_keys());
                Ok(())
            }
        }
    }
}
