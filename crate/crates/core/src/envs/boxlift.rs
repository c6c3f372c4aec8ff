//! Robots with different lifting capacities lift weighted boxes. Any group
//! of robots may co-lift one box in a single step; the lift succeeds when
//! the group's combined capacity exceeds the box weight.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::IllegalAction;
use crate::model::Action;
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LiftBox {
    pub weight: u32,
    pub lifted: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BoxLiftState {
    /// Robot id to lifting capacity.
    pub robots: BTreeMap<String, u32>,
    pub boxes: BTreeMap<String, LiftBox>,
}

/// The lift rule: strictly more capacity than weight.
pub fn can_lift(total_capacity: u32, weight: u32) -> bool {
    total_capacity > weight
}

pub fn robot_id(i: usize) -> String {
    format!("robot{i}")
}

pub fn box_id(i: usize) -> String {
    format!("box{i:02}")
}

impl BoxLiftState {
    pub fn new(capacities: &[u32], weights: &[u32]) -> Self {
        BoxLiftState {
            robots: capacities
                .iter()
                .enumerate()
                .map(|(i, c)| (robot_id(i), *c))
                .collect(),
            boxes: weights
                .iter()
                .enumerate()
                .map(|(i, w)| {
                    (
                        box_id(i),
                        LiftBox {
                            weight: *w,
                            lifted: false,
                        },
                    )
                })
                .collect(),
        }
    }

    pub fn total_capacity(&self) -> u32 {
        self.robots.values().sum()
    }

    pub fn unlifted(&self) -> impl Iterator<Item = (&String, &LiftBox)> {
        self.boxes.iter().filter(|(_, b)| !b.lifted)
    }
}

pub fn check_syntax(a: &Action) -> Result<(), String> {
    if a.action != "lift" {
        return Err(format!("unknown boxlift action `{}`", a.action));
    }
    if a.args.len() != 1 || !a.args[0].is_string() {
        return Err("`lift` takes one box id".into());
    }
    Ok(())
}

pub fn apply(state: &BoxLiftState, step: &[Action]) -> Result<BoxLiftState, IllegalAction> {
    let mut groups: BTreeMap<&str, u32> = BTreeMap::new();
    let mut busy = BTreeSet::new();
    for a in step {
        let Some(cap) = state.robots.get(&a.robot) else {
            return Err(IllegalAction::new(format!("unknown robot `{}`", a.robot)));
        };
        if !busy.insert(a.robot.as_str()) {
            return Err(IllegalAction::new(format!("{} acts twice in one step", a.robot)));
        }
        let b = a.str_arg(0).unwrap_or_default();
        match state.boxes.get(b) {
            None => return Err(IllegalAction::new(format!("unknown box `{b}`"))),
            Some(bx) if bx.lifted => {
                return Err(IllegalAction::new(format!("{b} is already lifted")))
            }
            Some(_) => *groups.entry(b).or_default() += cap,
        }
    }
    let mut next = state.clone();
    for (b, cap) in groups {
        let bx = next.boxes.get_mut(b).expect("checked above");
        if !can_lift(cap, bx.weight) {
            return Err(IllegalAction::new(format!(
                "combined capacity {cap} cannot lift {b} (weight {})",
                bx.weight
            )));
        }
        bx.lifted = true;
    }
    Ok(next)
}

pub fn is_goal(state: &BoxLiftState) -> bool {
    state.boxes.values().all(|b| b.lifted)
}

pub fn generate(
    robots: u32,
    boxes: u32,
    capacity: (u32, u32),
    weight: (u32, u32),
    rng: &mut SeededRng,
) -> Option<BoxLiftState> {
    let caps: Vec<u32> = (0..robots)
        .map(|_| rng.range_inclusive(capacity.0 as u64, capacity.1 as u64) as u32)
        .collect();
    let weights: Vec<u32> = (0..boxes)
        .map(|_| rng.range_inclusive(weight.0 as u64, weight.1 as u64) as u32)
        .collect();
    let s = BoxLiftState::new(&caps, &weights);
    // every box must be liftable by the whole team
    let total = s.total_capacity();
    weights
        .iter()
        .all(|w| can_lift(total, *w))
        .then_some(s)
}

/// For each unlifted box, "lift it with the k strongest robots" for every k.
pub fn candidate_steps(state: &BoxLiftState) -> Vec<Vec<Action>> {
    let mut by_strength: Vec<(&String, &u32)> = state.robots.iter().collect();
    by_strength.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
    let mut out = Vec::new();
    for (b, _) in state.unlifted() {
        for k in 1..=by_strength.len() {
            let mut step: Vec<Action> = by_strength[..k]
                .iter()
                .map(|(r, _)| Action::new(r.as_str(), "lift", vec![json!(b)]))
                .collect();
            step.sort_by(|x, y| x.robot.cmp(&y.robot));
            out.push(step);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lift(robots: &[&str], b: &str) -> Vec<Action> {
        robots
            .iter()
            .map(|r| Action::new(*r, "lift", vec![json!(b)]))
            .collect()
    }

    #[test]
    fn co_lift_threshold() {
        let s = BoxLiftState::new(&[50, 40], &[85]);
        let n = apply(&s, &lift(&["robot0", "robot1"], "box00")).unwrap();
        assert!(n.boxes["box00"].lifted);
        let s = BoxLiftState::new(&[50, 40], &[95]);
        assert!(apply(&s, &lift(&["robot0", "robot1"], "box00")).is_err());
    }

    #[test]
    fn exact_capacity_does_not_exceed_weight() {
        let s = BoxLiftState::new(&[50, 40], &[90]);
        assert!(apply(&s, &lift(&["robot0", "robot1"], "box00")).is_err());
    }

    #[test]
    fn robot_cannot_act_twice() {
        let s = BoxLiftState::new(&[50, 40], &[10, 10]);
        let mut step = lift(&["robot0"], "box00");
        step.extend(lift(&["robot0"], "box01"));
        assert!(apply(&s, &step).is_err());
    }

    #[test]
    fn lifted_box_cannot_be_lifted_again() {
        let s = BoxLiftState::new(&[50], &[10]);
        let s = apply(&s, &lift(&["robot0"], "box00")).unwrap();
        assert!(is_goal(&s));
        assert!(apply(&s, &lift(&["robot0"], "box00")).is_err());
    }

    #[test]
    fn parallel_lifts_in_one_step() {
        let s = BoxLiftState::new(&[60, 50, 40], &[100, 30]);
        let mut step = lift(&["robot0", "robot1"], "box00");
        step.extend(lift(&["robot2"], "box01"));
        assert!(is_goal(&apply(&s, &step).unwrap()));
    }
}
