//! Shared data model: task instances, plans, verdicts and episode records.

mod plan;
mod record;
mod verdict;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use plan::{Action, Plan, PlanVariant, Waypoint};
pub use record::{
    CheckOutcome, EpisodeRecord, InstanceRef, Method, RoundRecord, StepTrace, TranscriptEntry,
    RECORD_SCHEMA_VERSION,
};
pub use verdict::{FailureReason, Verdict, VerdictError};

use crate::continuous::{ContinuousScene, Hole, ShapeScene, ShapeSpec};
use crate::envs::{BlocksworldState, BoxLiftState, BoxNetState, GridworldState};

pub const INSTANCE_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_EXEC_TIMEOUT_SECS: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum EnvKind {
    #[serde(rename = "boxnet")]
    BoxNet,
    #[serde(rename = "blocksworld")]
    Blocksworld,
    #[serde(rename = "boxlift")]
    BoxLift,
    #[serde(rename = "gridworld")]
    Gridworld,
    #[serde(rename = "path_racecars")]
    PathRacecars,
    #[serde(rename = "shape_formation")]
    ShapeFormation,
    #[serde(rename = "path_drones")]
    PathDrones,
}

impl EnvKind {
    pub const ALL: [EnvKind; 7] = [
        EnvKind::BoxNet,
        EnvKind::Blocksworld,
        EnvKind::BoxLift,
        EnvKind::Gridworld,
        EnvKind::PathRacecars,
        EnvKind::ShapeFormation,
        EnvKind::PathDrones,
    ];

    pub const DISCRETE: [EnvKind; 4] = [
        EnvKind::BoxNet,
        EnvKind::Blocksworld,
        EnvKind::BoxLift,
        EnvKind::Gridworld,
    ];

    pub const CONTINUOUS: [EnvKind; 3] = [
        EnvKind::PathRacecars,
        EnvKind::ShapeFormation,
        EnvKind::PathDrones,
    ];

    pub fn is_discrete(self) -> bool {
        matches!(
            self,
            EnvKind::BoxNet | EnvKind::Blocksworld | EnvKind::BoxLift | EnvKind::Gridworld
        )
    }

    /// The plan variant this environment expects.
    pub fn plan_variant(self) -> PlanVariant {
        if self.is_discrete() {
            PlanVariant::Actions
        } else {
            PlanVariant::Waypoints
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EnvKind::BoxNet => "boxnet",
            EnvKind::Blocksworld => "blocksworld",
            EnvKind::BoxLift => "boxlift",
            EnvKind::Gridworld => "gridworld",
            EnvKind::PathRacecars => "path_racecars",
            EnvKind::ShapeFormation => "shape_formation",
            EnvKind::PathDrones => "path_drones",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            EnvKind::BoxNet => "BoxNet",
            EnvKind::Blocksworld => "Blocksworld",
            EnvKind::BoxLift => "BoxLift",
            EnvKind::Gridworld => "Gridworld",
            EnvKind::PathRacecars => "Path-Racecars",
            EnvKind::ShapeFormation => "Shape Formation",
            EnvKind::PathDrones => "Path-Drones",
        }
    }

    pub fn code(self) -> u32 {
        self as u32
    }

    pub fn from_code(code: u32) -> Option<Self> {
        EnvKind::ALL.get(code as usize).copied()
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EnvKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace(['-', ' '], "_");
        EnvKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm || k.as_str().replace('_', "") == norm.replace('_', ""))
            .ok_or_else(|| format!("unknown task `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShapeKind {
    Circle,
    Triangle,
    Line,
}

/// Size and count parameters controlling how hard a generated instance is.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "env", rename_all = "snake_case")]
pub enum DifficultyParams {
    #[serde(rename = "boxnet")]
    BoxNet { rows: u32, cols: u32, boxes: u32 },
    Blocksworld { blocks: u32 },
    #[serde(rename = "boxlift")]
    BoxLift {
        robots: u32,
        boxes: u32,
        capacity: (u32, u32),
        weight: (u32, u32),
    },
    Gridworld {
        width: u32,
        height: u32,
        obstacle_density: f64,
        goals: u32,
    },
    PathRacecars { cars: u32, obstacles: u32 },
    ShapeFormation {
        boxes: u32,
        bowls: u32,
        #[serde(default)]
        shape: Option<ShapeKind>,
    },
    PathDrones { drones: u32, hole_width: f64 },
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid difficulty for {env}: {reason}")]
pub struct DifficultyError {
    pub env: EnvKind,
    pub reason: String,
}

/// Number of difficulty buckets in the default sweep.
pub const DIFFICULTY_BUCKETS: usize = 5;

impl DifficultyParams {
    pub fn env_kind(&self) -> EnvKind {
        match self {
            DifficultyParams::BoxNet { .. } => EnvKind::BoxNet,
            DifficultyParams::Blocksworld { .. } => EnvKind::Blocksworld,
            DifficultyParams::BoxLift { .. } => EnvKind::BoxLift,
            DifficultyParams::Gridworld { .. } => EnvKind::Gridworld,
            DifficultyParams::PathRacecars { .. } => EnvKind::PathRacecars,
            DifficultyParams::ShapeFormation { .. } => EnvKind::ShapeFormation,
            DifficultyParams::PathDrones { .. } => EnvKind::PathDrones,
        }
    }

    /// Default sweep bucket `b` (0 = easiest, 4 = hardest). Buckets span the
    /// documented per-environment ranges; larger `b` is clamped.
    pub fn bucket(env: EnvKind, b: usize) -> Self {
        let b = b.min(DIFFICULTY_BUCKETS - 1);
        match env {
            EnvKind::BoxNet => {
                let (rows, cols, boxes) = [(2, 2, 2), (2, 3, 3), (3, 3, 4), (3, 4, 6), (4, 4, 8)][b];
                DifficultyParams::BoxNet { rows, cols, boxes }
            }
            EnvKind::Blocksworld => DifficultyParams::Blocksworld {
                blocks: [3, 6, 9, 12, 15][b],
            },
            EnvKind::BoxLift => DifficultyParams::BoxLift {
                robots: [3, 4, 4, 5, 6][b],
                boxes: [4, 6, 8, 10, 12][b],
                capacity: (20, 120),
                weight: (30, 250),
            },
            EnvKind::Gridworld => {
                let (side, density, goals) =
                    [(4, 0.10, 1), (6, 0.15, 2), (8, 0.20, 3), (10, 0.25, 4), (12, 0.30, 5)][b];
                DifficultyParams::Gridworld {
                    width: side,
                    height: side,
                    obstacle_density: density,
                    goals,
                }
            }
            EnvKind::PathRacecars => DifficultyParams::PathRacecars {
                cars: [1, 2, 2, 3, 4][b],
                obstacles: [1, 2, 3, 5, 6][b],
            },
            EnvKind::ShapeFormation => DifficultyParams::ShapeFormation {
                boxes: [3, 4, 5, 6, 8][b],
                bowls: [1, 1, 2, 2, 3][b],
                shape: None,
            },
            EnvKind::PathDrones => DifficultyParams::PathDrones {
                drones: [1, 2, 2, 3, 4][b],
                hole_width: [3.0, 2.5, 2.0, 1.5, 1.0][b],
            },
        }
    }

    /// Smallest instances of each kind; used by oracle agreement suites.
    pub fn small(env: EnvKind) -> Self {
        match env {
            EnvKind::BoxNet => DifficultyParams::BoxNet {
                rows: 2,
                cols: 2,
                boxes: 2,
            },
            EnvKind::Blocksworld => DifficultyParams::Blocksworld { blocks: 3 },
            EnvKind::BoxLift => DifficultyParams::BoxLift {
                robots: 3,
                boxes: 4,
                capacity: (20, 120),
                weight: (30, 250),
            },
            EnvKind::Gridworld => DifficultyParams::Gridworld {
                width: 4,
                height: 4,
                obstacle_density: 0.1,
                goals: 1,
            },
            other => DifficultyParams::bucket(other, 0),
        }
    }

    /// Structural sanity checks. Values outside the default sweep are
    /// accepted as long as an instance can be laid out.
    pub fn validate(&self) -> Result<(), DifficultyError> {
        let env = self.env_kind();
        let fail = |reason: &str| {
            Err(DifficultyError {
                env,
                reason: reason.to_string(),
            })
        };
        match *self {
            DifficultyParams::BoxNet { rows, cols, boxes } => {
                if !(1..=6).contains(&rows) || !(1..=6).contains(&cols) {
                    return fail("grid must be between 1x1 and 6x6");
                }
                if !(1..=crate::envs::boxnet::COLORS.len() as u32).contains(&boxes) {
                    return fail("box count must be between 1 and 8");
                }
            }
            DifficultyParams::Blocksworld { blocks } => {
                if !(1..=26).contains(&blocks) {
                    return fail("block count must be between 1 and 26");
                }
            }
            DifficultyParams::BoxLift {
                robots,
                boxes,
                capacity,
                weight,
            } => {
                if !(1..=8).contains(&robots) || !(1..=16).contains(&boxes) {
                    return fail("1-8 robots and 1-16 boxes");
                }
                if capacity.0 == 0 || capacity.0 > capacity.1 || weight.0 == 0 || weight.0 > weight.1
                {
                    return fail("capacity and weight ranges must be positive and ordered");
                }
            }
            DifficultyParams::Gridworld {
                width,
                height,
                obstacle_density,
                goals,
            } => {
                if !(2..=20).contains(&width) || !(2..=20).contains(&height) {
                    return fail("grid sides must be between 2 and 20");
                }
                if !(0.0..=0.5).contains(&obstacle_density) {
                    return fail("obstacle density must be within [0, 0.5]");
                }
                let cells = width * height;
                let obstacles = (obstacle_density * cells as f64).round() as u32;
                if goals == 0 || goals > 8 || obstacles + goals + 1 > cells {
                    return fail("1-8 goals that fit next to the obstacles");
                }
            }
            DifficultyParams::PathRacecars { cars, obstacles } => {
                if !(1..=5).contains(&cars) || obstacles > 10 {
                    return fail("1-5 cars and at most 10 obstacles");
                }
            }
            DifficultyParams::ShapeFormation { boxes, bowls, .. } => {
                if !(2..=10).contains(&boxes) || bowls > 4 {
                    return fail("2-10 boxes and at most 4 bowls");
                }
            }
            DifficultyParams::PathDrones { drones, hole_width } => {
                if !(1..=5).contains(&drones) || !(0.8..=4.0).contains(&hole_width) {
                    return fail("1-5 drones and a hole width within [0.8, 4]");
                }
            }
        }
        Ok(())
    }
}

/// Environment-specific world state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "env", rename_all = "snake_case")]
pub enum EnvState {
    #[serde(rename = "boxnet")]
    BoxNet(BoxNetState),
    Blocksworld(BlocksworldState),
    #[serde(rename = "boxlift")]
    BoxLift(BoxLiftState),
    Gridworld(GridworldState),
    PathRacecars(ContinuousScene),
    ShapeFormation(ShapeScene),
    PathDrones(ContinuousScene),
}

impl EnvState {
    pub fn env_kind(&self) -> EnvKind {
        match self {
            EnvState::BoxNet(_) => EnvKind::BoxNet,
            EnvState::Blocksworld(_) => EnvKind::Blocksworld,
            EnvState::BoxLift(_) => EnvKind::BoxLift,
            EnvState::Gridworld(_) => EnvKind::Gridworld,
            EnvState::PathRacecars(_) => EnvKind::PathRacecars,
            EnvState::ShapeFormation(_) => EnvKind::ShapeFormation,
            EnvState::PathDrones(_) => EnvKind::PathDrones,
        }
    }

    /// Scene of a path-planning environment.
    pub fn scene(&self) -> Option<&ContinuousScene> {
        match self {
            EnvState::PathRacecars(s) | EnvState::PathDrones(s) => Some(s),
            _ => None,
        }
    }

    /// Identifiers of the agents that appear in plans for this state.
    pub fn agent_ids(&self) -> Vec<String> {
        match self {
            EnvState::BoxNet(s) => s.arms.keys().cloned().collect(),
            EnvState::Blocksworld(_) => vec![crate::envs::blocksworld::ARM.to_string()],
            EnvState::BoxLift(s) => s.robots.keys().cloned().collect(),
            EnvState::Gridworld(_) => vec![crate::envs::gridworld::ROBOT.to_string()],
            EnvState::PathRacecars(s) | EnvState::PathDrones(s) => s.robots.keys().cloned().collect(),
            EnvState::ShapeFormation(s) => s.boxes.keys().cloned().collect(),
        }
    }
}

/// Goal predicate parameters. Environments whose goal is fully described by
/// their state (all boxes delivered, all goals visited, ...) carry no data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "env", rename_all = "snake_case")]
pub enum GoalSpec {
    /// Every box delivered into its color's goal slot.
    #[serde(rename = "boxnet")]
    BoxNet,
    /// Final towers, bottom to top, with the hand empty.
    Blocksworld { towers: Vec<Vec<String>> },
    /// Every box lifted.
    #[serde(rename = "boxlift")]
    BoxLift,
    /// Every goal cell visited.
    Gridworld,
    /// Every car ends inside its goal region.
    PathRacecars,
    ShapeFormation(ShapeSpec),
    /// Every drone passes through the hole, one at a time, and ends in its goal region.
    PathDrones { hole: Hole },
}

impl GoalSpec {
    pub fn env_kind(&self) -> EnvKind {
        match self {
            GoalSpec::BoxNet => EnvKind::BoxNet,
            GoalSpec::Blocksworld { .. } => EnvKind::Blocksworld,
            GoalSpec::BoxLift => EnvKind::BoxLift,
            GoalSpec::Gridworld => EnvKind::Gridworld,
            GoalSpec::PathRacecars => EnvKind::PathRacecars,
            GoalSpec::ShapeFormation(_) => EnvKind::ShapeFormation,
            GoalSpec::PathDrones { .. } => EnvKind::PathDrones,
        }
    }
}

fn default_exec_timeout() -> f64 {
    DEFAULT_EXEC_TIMEOUT_SECS
}

fn default_schema() -> u32 {
    INSTANCE_SCHEMA_VERSION
}

/// One seeded, fully specified benchmark problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskInstance {
    #[serde(default = "default_schema")]
    pub schema_version: u32,
    pub env_kind: EnvKind,
    pub seed: u64,
    pub difficulty: DifficultyParams,
    pub initial_state: EnvState,
    pub goal: GoalSpec,
    /// Maximum number of discrete time steps (discrete environments).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step_limit: Option<u32>,
    /// Maximum total operation time in seconds (continuous environments).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_limit: Option<f64>,
    #[serde(default = "default_exec_timeout")]
    pub exec_timeout: f64,
}

#[derive(Debug, thiserror::Error)]
pub enum InstanceError {
    #[error("instance JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unsupported instance schema version {0}")]
    SchemaVersion(u32),
    #[error("inconsistent instance: {0}")]
    Inconsistent(String),
}

impl TaskInstance {
    pub fn instance_ref(&self) -> InstanceRef {
        InstanceRef {
            env_kind: self.env_kind,
            seed: self.seed,
            difficulty: self.difficulty.clone(),
        }
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        if self.schema_version != INSTANCE_SCHEMA_VERSION {
            return Err(InstanceError::SchemaVersion(self.schema_version));
        }
        let bad = |m: &str| Err(InstanceError::Inconsistent(m.to_string()));
        if self.initial_state.env_kind() != self.env_kind
            || self.goal.env_kind() != self.env_kind
            || self.difficulty.env_kind() != self.env_kind
        {
            return bad("state, goal and difficulty must match env_kind");
        }
        if !(self.exec_timeout > 0.0 && self.exec_timeout.is_finite()) {
            return bad("exec_timeout must be positive");
        }
        if self.env_kind.is_discrete() {
            if self.step_limit.is_none() {
                return bad("discrete instances need a step_limit");
            }
        } else {
            match self.time_limit {
                Some(t) if t > 0.0 && t.is_finite() => {}
                _ => return bad("continuous instances need a positive time_limit"),
            }
        }
        match &self.initial_state {
            EnvState::PathRacecars(s) | EnvState::PathDrones(s) => {
                s.validate().map_err(|e| InstanceError::Inconsistent(e.to_string()))?
            }
            EnvState::Blocksworld(s) => s
                .validate()
                .map_err(|e| InstanceError::Inconsistent(e.to_string()))?,
            _ => {}
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let inst: TaskInstance = serde_json::from_str(text)?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("instances always serialize")
    }

    /// Number of agents acting in plans (robots, arms, cars, drones).
    pub fn agent_count(&self) -> usize {
        match &self.initial_state {
            EnvState::ShapeFormation(_) => 1,
            other => other.agent_ids().len(),
        }
    }
}
