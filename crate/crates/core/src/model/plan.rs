use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::geometry::Point;

/// A timed waypoint. Serialized as `[x, y, t]` (meters, meters, seconds).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Waypoint {
    pub x: f64,
    pub y: f64,
    pub t: f64,
}

impl From<[f64; 3]> for Waypoint {
    fn from(v: [f64; 3]) -> Self {
        Waypoint {
            x: v[0],
            y: v[1],
            t: v[2],
        }
    }
}

impl From<Waypoint> for [f64; 3] {
    fn from(w: Waypoint) -> Self {
        [w.x, w.y, w.t]
    }
}

impl Waypoint {
    pub const fn new(x: f64, y: f64, t: f64) -> Self {
        Waypoint { x, y, t }
    }

    pub fn at(p: Point, t: f64) -> Self {
        Waypoint { x: p.x, y: p.y, t }
    }

    pub fn pos(&self) -> Point {
        Point::new(self.x, self.y)
    }
}

/// One symbolic action performed by one robot during one time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub robot: String,
    pub action: String,
    #[serde(default)]
    pub args: Vec<Value>,
}

impl Action {
    pub fn new(robot: impl Into<String>, action: impl Into<String>, args: Vec<Value>) -> Self {
        Action {
            robot: robot.into(),
            action: action.into(),
            args,
        }
    }

    /// Argument `i` as a string, if it is one.
    pub fn str_arg(&self, i: usize) -> Option<&str> {
        self.args.get(i).and_then(Value::as_str)
    }

    pub fn int_arg(&self, i: usize) -> Option<i64> {
        self.args.get(i).and_then(Value::as_i64)
    }
}

impl std::fmt::Display for Action {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}:{}(", self.robot, self.action)?;
        for (i, a) in self.args.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            match a {
                Value::String(s) => write!(f, "{s}")?,
                other => write!(f, "{other}")?,
            }
        }
        write!(f, ")")
    }
}

/// A candidate plan: either a per-step list of per-robot actions, or
/// per-robot timed waypoint trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case", deny_unknown_fields)]
pub enum Plan {
    Actions { steps: Vec<Vec<Action>> },
    Waypoints { trajectories: BTreeMap<String, Vec<Waypoint>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanVariant {
    Actions,
    Waypoints,
}

impl Plan {
    pub fn variant(&self) -> PlanVariant {
        match self {
            Plan::Actions { .. } => PlanVariant::Actions,
            Plan::Waypoints { .. } => PlanVariant::Waypoints,
        }
    }

    pub fn steps(&self) -> Option<&[Vec<Action>]> {
        match self {
            Plan::Actions { steps } => Some(steps),
            Plan::Waypoints { .. } => None,
        }
    }

    pub fn trajectories(&self) -> Option<&BTreeMap<String, Vec<Waypoint>>> {
        match self {
            Plan::Waypoints { trajectories } => Some(trajectories),
            Plan::Actions { .. } => None,
        }
    }

    pub fn empty_actions() -> Self {
        Plan::Actions { steps: Vec::new() }
    }
}
